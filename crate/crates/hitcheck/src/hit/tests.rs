use super::*;

#[test]
fn minimal_single_block() {
    let tree = parse("[Mesh]\n  type = GeneratedMesh\n[]").unwrap();
    let blocks = tree.blocks();
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0].name, "Mesh");
    assert_eq!(blocks[0].path, "/Mesh");
    let p = blocks[0].get_param("type").unwrap();
    assert_eq!(p.value(), "GeneratedMesh");
    assert_eq!(p.value_kind, ValueKind::Bare);
}

#[test]
fn empty_document_has_root_only() {
    let tree = parse("").unwrap();
    assert!(tree.root().is_root());
    assert_eq!(tree.root().children().count(), 0);
    assert_eq!(tree.render(), "");
    assert_eq!(tree.root().span.byte_end, 0);
}

#[test]
fn missing_final_closer_fails_at_eof() {
    // Hand-parse of the token stream: [Kernels] opens, [diff] opens and
    // closes, then EOF arrives with /Kernels still open on line 5, col 1.
    let text = "[Kernels]\n  [diff]\n    type = Diffusion\n  []\n";
    let failure = parse(text).unwrap_err();
    assert_eq!(failure.expected, TokenClass::BlockClose);
    assert_eq!(failure.location.start_line, 5);
    assert_eq!(failure.location.byte_start, text.len());
}

#[test]
fn roundtrip_preserves_bytes() {
    let text = "# heat conduction demo\n[Mesh]\n  [gen]\n    type = GeneratedMeshGenerator\n    dim = 2\t# tab stays\n  []\n[]\n\n[Kernels]\n  [./hc]\n    type = HeatConduction\n    variable = T\n  [../]\n[]\n";
    let tree = parse(text).unwrap();
    assert_eq!(tree.render(), text);
}

#[test]
fn roundtrip_multiline_quote_and_brace_expr() {
    let text = "x = ${fparse 2 * 3}\n[Functions]\n  [f]\n    type = ParsedFunction\n    expression = 'x*x +\n                  y'\n  []\n[]\n";
    let tree = parse(text).unwrap();
    assert_eq!(tree.render(), text);
    let f = &tree.find_blocks("/Functions/*").unwrap()[0];
    assert_eq!(f.get_param("expression").unwrap().value_kind, ValueKind::SingleQuoted);
}

#[test]
fn include_directive_is_opaque() {
    let text = "!include common.i\n[Mesh]\n  type = GeneratedMesh\n[]\n";
    let tree = parse(text).unwrap();
    assert_eq!(tree.render(), text);
    assert_eq!(tree.blocks().len(), 1);
}

#[test]
fn edited_value_changes_only_its_span() {
    let text = "[Kernels]\n  [diff]\n    type = Diffusionn\n  []\n[]\n";
    let tree = parse(text).unwrap();
    let usage = &tree.extract_types()[0];
    let edited = tree.replace_span(usage.span, "Diffusion").unwrap();
    let out = edited.render();
    // Diff oracle: bytes outside the replaced span are unchanged.
    assert_eq!(&out[..usage.span.byte_start], &text[..usage.span.byte_start]);
    assert_eq!(&out[usage.span.byte_start..usage.span.byte_start + 9], "Diffusion");
    assert_eq!(&out[usage.span.byte_start + 9..], &text[usage.span.byte_end..]);
}

#[test]
fn find_blocks_glob() {
    let text = "[Kernels]\n  [a]\n    type = Diffusion\n  []\n  [b]\n    type = BodyForce\n  []\n[]\n[BCs]\n  [left]\n    type = DirichletBC\n  []\n[]\n";
    let tree = parse(text).unwrap();
    let kernels = tree.find_blocks("/Kernels/*").unwrap();
    assert_eq!(
        kernels.iter().map(|b| b.name.as_str()).collect::<Vec<_>>(),
        vec!["a", "b"]
    );
    assert!(tree.find_blocks("/NoSuch/*").unwrap().is_empty());
    // Brute-force traversal oracle for the match-all pattern.
    let all = tree.find_blocks("/**").unwrap();
    assert_eq!(all.len(), tree.blocks().len());
    assert_eq!(all.len(), 5);
    assert!(tree.find_blocks("Kernels").is_err());
    assert!(tree.find_blocks("/Kernels//a").is_err());
}

#[test]
fn extract_types_in_document_order() {
    let text = "[Kernels]\n  [diff]\n    type = Diffusion\n  []\n[]\n[BCs]\n  [left]\n    type = DirichletBC\n  []\n[]\n";
    let tree = parse(text).unwrap();
    let usages = tree.extract_types();
    assert_eq!(usages.len(), 2);
    assert_eq!(usages[0].family, "Kernels");
    assert_eq!(usages[0].type_name, "Diffusion");
    assert_eq!(usages[1].family, "BCs");
    assert_eq!(usages[1].block_path, "/BCs/left");
    // The span points at the exact value text.
    assert_eq!(usages[0].span.slice(text), "Diffusion");
}

#[test]
fn block_without_type_emits_no_usage() {
    let tree = parse("[Outputs]\n  exodus = true\n[]\n").unwrap();
    assert!(tree.extract_types().is_empty());
}

#[test]
fn top_level_type_param_family_is_block_name() {
    let tree = parse("[Mesh]\n  type = GeneratedMesh\n  dim = 1\n[]\n").unwrap();
    let usages = tree.extract_types();
    assert_eq!(usages[0].family, "Mesh");
    assert_eq!(usages[0].block_path, "/Mesh");
}

#[test]
fn duplicate_keys_warn_and_last_wins() {
    let text = "[Mesh]\n  dim = 1\n  dim = 2\n[]\n";
    let tree = parse(text).unwrap();
    assert_eq!(tree.diagnostics().len(), 1);
    assert_eq!(tree.diagnostics()[0].severity, Severity::Warning);
    let mesh = tree.find_blocks("/Mesh").unwrap()[0];
    assert_eq!(mesh.get_param("dim").unwrap().value(), "2");
    assert_eq!(tree.render(), text); // both occurrences kept in the text
}

#[test]
fn unterminated_quote_reports_opening_position() {
    let text = "[BCs]\n  [all]\n    value = '1 2 3\n  []\n[]\n";
    let failure = parse(text).unwrap_err();
    assert_eq!(failure.expected, TokenClass::EndOfQuote);
    assert_eq!(failure.location.start_line, 3);
    assert_eq!(text.as_bytes()[failure.location.byte_start], b'\'');
}

#[test]
fn stray_quote_in_bare_value() {
    let text = "[BCs]\n  [all]\n    value = 1 2 3'\n  []\n[]\n";
    let failure = parse(text).unwrap_err();
    assert_eq!(failure.expected, TokenClass::EndOfQuote);
    assert_eq!(text.as_bytes()[failure.location.byte_start], b'\'');
    assert_eq!(failure.location.start_line, 3);
}

#[test]
fn missing_equals() {
    let text = "[Mesh]\n  type GeneratedMesh\n[]\n";
    let failure = parse(text).unwrap_err();
    assert_eq!(failure.expected, TokenClass::Equals);
    assert_eq!(failure.location.start_line, 2);
    assert_eq!(&text[failure.location.byte_start..failure.location.byte_start + 1], "G");
}

#[test]
fn bracketed_value_is_a_value_failure() {
    let text = "[Mesh]\n  sizes = [1, 2, 3]\n[]\n";
    let failure = parse(text).unwrap_err();
    assert_eq!(failure.expected, TokenClass::Value);
    assert_eq!(&text[failure.location.byte_start..=failure.location.byte_start], "[");
}

#[test]
fn empty_value_is_a_value_failure() {
    let failure = parse("[Mesh]\n  dim =\n[]\n").unwrap_err();
    assert_eq!(failure.expected, TokenClass::Value);
}

#[test]
fn stray_closer_at_top_level() {
    let failure = parse("[]\n[Mesh]\n[]\n").unwrap_err();
    assert_eq!(failure.expected, TokenClass::Identifier);
    assert_eq!(failure.location.start_line, 1);
}

#[test]
fn stray_token_inside_block() {
    let failure = parse("[Mesh]\n  ```\n[]\n").unwrap_err();
    assert_eq!(failure.expected, TokenClass::Identifier);
    assert_eq!(failure.found, "```");
}

#[test]
fn malformed_header_has_no_repair_class() {
    let failure = parse("[Me sh]\n[]\n").unwrap_err();
    assert_eq!(failure.expected, TokenClass::BlockOpen);
    assert_eq!(failure.location.start_col, 1);
}

#[test]
fn first_failure_is_deterministic() {
    let text = "[A]\n x 1\n[]\n[B\n";
    let a = parse(text).unwrap_err();
    let b = parse(text).unwrap_err();
    assert_eq!(a, b);
}

#[test]
fn sibling_spans_do_not_overlap() {
    let text = "[A]\n  x = 1\n[]\n[B]\n  [c]\n  []\n[]\n";
    let tree = parse(text).unwrap();
    let blocks = tree.root().children().collect::<Vec<_>>();
    for w in blocks.windows(2) {
        assert!(w[0].span.byte_end <= w[1].span.byte_start);
    }
    // every type value byte lies inside exactly one usage span
    let tree = parse("[K]\n [a]\n  type = X\n []\n [b]\n  type = Y\n []\n[]\n").unwrap();
    let usages = tree.extract_types();
    for (i, u) in usages.iter().enumerate() {
        for (j, v) in usages.iter().enumerate() {
            if i != j {
                assert!(u.span.byte_end <= v.span.byte_start || v.span.byte_end <= u.span.byte_start);
            }
        }
    }
}

#[test]
fn parse_prefix_reports_completed_blocks() {
    let text = "[A]\n  x = 1\n[]\n[B]\n  y 2\n[]\n";
    let (done, failure) = parse_prefix(text);
    assert_eq!(done.len(), 1);
    assert_eq!(done[0].slice(text), "[A]\n  x = 1\n[]");
    assert_eq!(failure.unwrap().expected, TokenClass::Equals);
}

#[test]
fn child_block_text_reparses_standalone() {
    let text = "[Kernels]\n  [./diff]\n    type = Diffusion\n    variable = u\n  [../]\n[]\n";
    let tree = parse(text).unwrap();
    for block in tree.blocks() {
        let snippet = block.span.slice(text);
        let sub = parse(snippet).unwrap();
        assert_eq!(sub.blocks()[0].name, block.name);
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn ident_strategy() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9_]{0,8}"
    }

    fn value_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            "[A-Za-z0-9_.]{1,12}",
            "'[a-z0-9 ]{0,20}'".prop_map(|s| s),
            "\"[a-z0-9 ]{0,12}\"".prop_map(|s| s),
        ]
    }

    #[derive(Debug, Clone)]
    struct GenBlock {
        name: String,
        legacy: bool,
        params: Vec<(String, String)>,
        children: Vec<GenBlock>,
    }

    fn block_strategy(depth: u32) -> impl Strategy<Value = GenBlock> {
        let leaf = (
            ident_strategy(),
            any::<bool>(),
            prop::collection::vec((ident_strategy(), value_strategy()), 0..4),
        )
            .prop_map(|(name, legacy, params)| GenBlock {
                name,
                legacy,
                params,
                children: Vec::new(),
            });
        leaf.prop_recursive(depth, 16, 3, |inner| {
            (
                ident_strategy(),
                any::<bool>(),
                prop::collection::vec((ident_strategy(), value_strategy()), 0..3),
                prop::collection::vec(inner, 0..3),
            )
                .prop_map(|(name, legacy, params, children)| GenBlock {
                    name,
                    legacy,
                    params,
                    children,
                })
        })
    }

    fn write_block(b: &GenBlock, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        if b.legacy && indent > 0 {
            out.push_str(&format!("{pad}[./{}]\n", b.name));
        } else {
            out.push_str(&format!("{pad}[{}]\n", b.name));
        }
        for (k, v) in &b.params {
            out.push_str(&format!("{pad}  {k} = {v}\n"));
        }
        for c in &b.children {
            write_block(c, indent + 1, out);
        }
        if b.legacy && indent > 0 {
            out.push_str(&format!("{pad}[../]\n"));
        } else {
            out.push_str(&format!("{pad}[]\n"));
        }
    }

    fn count_blocks(b: &GenBlock) -> usize {
        1 + b.children.iter().map(count_blocks).sum::<usize>()
    }

    proptest! {
        #[test]
        fn roundtrip_and_reparse_stability(blocks in prop::collection::vec(block_strategy(3), 0..4)) {
            let mut text = String::new();
            for b in &blocks {
                write_block(b, 0, &mut text);
            }
            let tree = parse(&text).unwrap();
            let rendered = tree.render();
            prop_assert_eq!(&rendered, &text);
            let tree2 = parse(&rendered).unwrap();
            prop_assert_eq!(tree.root(), tree2.root());
            // node count matches the generator's own count
            let expected: usize = blocks.iter().map(count_blocks).sum();
            prop_assert_eq!(tree.blocks().len(), expected);
        }
    }
}
