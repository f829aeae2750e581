//! Seeded mutations of valid inputs, for measuring how much of the
//! sanitize/repair/type-correction pipeline recovers without an LLM in the
//! loop.
//!
//! Site selection uses splitmix64 — a fixed, documented generator — so a
//! `(input, class, seed)` triple produces the same mutation on every
//! platform and in every implementation. Mutation sites are restricted to
//! ones the pipeline can actually recover to the original text (e.g. only
//! closers in the trailing closer run are deleted, since repair re-closes
//! blocks at end of file); recoverability is part of the contract, and the
//! acceptance suite measures it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hit::{self, ParseFailure, SyntaxTree, ValueKind};
use crate::span::SourceSpan;

/// splitmix64: a tiny, well-known PRNG with a 64-bit state. The update is
/// `state += 0x9E3779B97F4A7C15`, followed by two xor-shift-multiply mixing
/// rounds. Chosen for cross-language reproducibility, not statistical
/// strength.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish pick in `[0, n)`; the modulo bias is irrelevant here and
    /// keeping the arithmetic trivial keeps it portable.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    DeleteCloser,
    DeleteEquals,
    CorruptQuote,
    BreakListSeparator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationClass {
    /// Inject an NBSP, a zero-width character, or a smart quote.
    Sanitation,
    /// Break HIT structure in one of four ways.
    Structure(StructureKind),
    /// Single-character edit on a valid `type =` name.
    TypeTypo,
}

impl std::fmt::Display for MutationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MutationClass::Sanitation => "sanitation",
            MutationClass::Structure(StructureKind::DeleteCloser) => "delete-closer",
            MutationClass::Structure(StructureKind::DeleteEquals) => "delete-equals",
            MutationClass::Structure(StructureKind::CorruptQuote) => "corrupt-quote",
            MutationClass::Structure(StructureKind::BreakListSeparator) => "break-list-separator",
            MutationClass::TypeTypo => "type-typo",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for MutationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sanitation" => Ok(MutationClass::Sanitation),
            "delete-closer" => Ok(MutationClass::Structure(StructureKind::DeleteCloser)),
            "delete-equals" => Ok(MutationClass::Structure(StructureKind::DeleteEquals)),
            "corrupt-quote" => Ok(MutationClass::Structure(StructureKind::CorruptQuote)),
            "break-list-separator" => {
                Ok(MutationClass::Structure(StructureKind::BreakListSeparator))
            }
            "type-typo" => Ok(MutationClass::TypeTypo),
            other => Err(format!(
                "unknown mutation class {other:?} (expected sanitation, delete-closer, \
                 delete-equals, corrupt-quote, break-list-separator, or type-typo)"
            )),
        }
    }
}

/// Record of one applied mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub id: String,
    pub class: MutationClass,
    pub location: SourceSpan,
    pub seed: u64,
}

/// The pipeline stage expected to catch (and recover) this mutation class.
pub fn expected_recovery_stage(class: MutationClass) -> &'static str {
    match class {
        MutationClass::Sanitation => "sanitize",
        MutationClass::Structure(_) => "repair",
        MutationClass::TypeTypo => "type_check",
    }
}

#[derive(Debug, Error)]
pub enum MutateError {
    #[error("input does not parse: {0}")]
    Unparsable(ParseFailure),
    #[error("mutation class {class} not applicable: {reason}")]
    ClassInapplicable { class: MutationClass, reason: String },
}

const CLASS_SALT_SANITATION: u64 = 0x5a17;
const CLASS_SALT_STRUCTURE: u64 = 0x57f0c70fe;
const CLASS_SALT_TYPO: u64 = 0x7f90;

/// Apply one seeded mutation of `class` to a valid input. Deterministic in
/// `(input, class, seed)`; the mutated text fails exactly the pipeline
/// stage the class targets.
pub fn mutate(text: &str, class: MutationClass, seed: u64) -> Result<(String, Mutation), MutateError> {
    let tree = hit::parse(text).map_err(MutateError::Unparsable)?;
    let (mutated, location) = match class {
        MutationClass::Sanitation => {
            let mut rng = SplitMix64::new(seed ^ CLASS_SALT_SANITATION);
            mutate_sanitation(text, &mut rng, class)?
        }
        MutationClass::Structure(kind) => {
            let mut rng = SplitMix64::new(seed ^ CLASS_SALT_STRUCTURE);
            mutate_structure(text, &tree, kind, &mut rng, class)?
        }
        MutationClass::TypeTypo => {
            let mut rng = SplitMix64::new(seed ^ CLASS_SALT_TYPO);
            mutate_type_typo(text, &tree, &mut rng, class)?
        }
    };
    let mutation = Mutation {
        id: format!("{class}:{seed:#x}:{}:{}", location.start_line, location.start_col),
        class,
        location,
        seed,
    };
    Ok((mutated, mutation))
}

fn splice(text: &str, range: std::ops::Range<usize>, insert: &str) -> String {
    let mut out = String::with_capacity(text.len() + insert.len());
    out.push_str(&text[..range.start]);
    out.push_str(insert);
    out.push_str(&text[range.end..]);
    out
}

fn span_at(text: &str, byte: usize, len: usize) -> SourceSpan {
    let line = text[..byte].matches('\n').count() as u32 + 1;
    let lstart = text[..byte].rfind('\n').map_or(0, |i| i + 1);
    let col = text[lstart..byte].chars().count() as u32 + 1;
    let chars = text[byte..byte + len].chars().count().max(1) as u32;
    SourceSpan {
        start_line: line,
        start_col: col,
        end_line: line,
        end_col: col + chars - 1,
        byte_start: byte,
        byte_end: byte + len,
    }
}

// -- sanitation ---------------------------------------------------------------

fn mutate_sanitation(
    text: &str,
    rng: &mut SplitMix64,
    class: MutationClass,
) -> Result<(String, SourceSpan), MutateError> {
    // Sub-operation choice depends on what the text offers.
    let spaces: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| *c == ' ')
        .map(|(i, _)| i)
        .collect();
    let quotes: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| *c == '\'')
        .map(|(i, _)| i)
        .collect();
    let mut ops: Vec<u8> = vec![1]; // zero-width insertion is always possible
    if !spaces.is_empty() {
        ops.push(0);
    }
    if !quotes.is_empty() {
        ops.push(2);
    }
    match *rng.pick(&ops) {
        0 => {
            let at = spaces[rng.below(spaces.len())];
            Ok((splice(text, at..at + 1, "\u{00A0}"), span_at(text, at, 1)))
        }
        1 => {
            // Insert at a char boundary; never split a CRLF-free line start
            // ambiguity matters little, the sanitizer strips it anywhere.
            let boundaries: Vec<usize> = text
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(text.len()))
                .collect();
            if boundaries.is_empty() {
                return Err(MutateError::ClassInapplicable {
                    class,
                    reason: "input is empty".into(),
                });
            }
            let at = boundaries[rng.below(boundaries.len())];
            let zw = *rng.pick(&['\u{200B}', '\u{200C}', '\u{200D}']);
            Ok((splice(text, at..at, &zw.to_string()), span_at(text, at, 0)))
        }
        _ => {
            let at = quotes[rng.below(quotes.len())];
            // Curly counterpart of the straight quote.
            let repl = if rng.below(2) == 0 { "\u{2018}" } else { "\u{2019}" };
            Ok((splice(text, at..at + 1, repl), span_at(text, at, 1)))
        }
    }
}

// -- structure ----------------------------------------------------------------

/// Byte ranges of block closers whose deletion repair can undo: the
/// trailing run of closers at end of file (only trivia or other closers
/// follow them), since `balance_delimiters` re-closes at EOF.
fn trailing_closer_sites(text: &str, tree: &SyntaxTree) -> Vec<std::ops::Range<usize>> {
    let mut closers: Vec<std::ops::Range<usize>> = tree
        .blocks()
        .iter()
        .map(|b| {
            let end = b.span.byte_end;
            let len = if text[..end].ends_with("[../]") { 5 } else { 2 };
            end - len..end
        })
        .collect();
    closers.sort_by_key(|r| r.start);
    closers
        .into_iter()
        .filter(|r| {
            text[r.end..].chars().all(|c| c.is_whitespace())
                || only_trivia_and_closers(&text[r.end..])
        })
        .collect()
}

fn only_trivia_and_closers(mut rest: &str) -> bool {
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            return true;
        }
        if let Some(r) = rest.strip_prefix("[../]") {
            rest = r;
        } else if let Some(r) = rest.strip_prefix("[]") {
            rest = r;
        } else if let Some(i) = rest.strip_prefix('#').map(|r| r.find('\n')) {
            match i {
                Some(n) => rest = &rest[n + 2..],
                None => return true,
            }
        } else {
            return false;
        }
    }
}

struct QuoteSite {
    open: usize,
    close: usize,
    line_end_clean: bool,
    token_count: usize,
}

/// Single-line quoted values, with enough context to know which quote edits
/// stay recoverable.
fn quote_sites(text: &str, tree: &SyntaxTree) -> Vec<QuoteSite> {
    let mut sites = Vec::new();
    for block in tree.blocks() {
        for p in block.params() {
            if p.value_kind != ValueKind::SingleQuoted && p.value_kind != ValueKind::DoubleQuoted {
                continue;
            }
            if p.value().contains('\n') {
                continue;
            }
            let open = p.value_span.byte_start;
            let close = p.value_span.byte_end - 1;
            let rest_of_line = text[p.value_span.byte_end..]
                .lines()
                .next()
                .unwrap_or("");
            sites.push(QuoteSite {
                open,
                close,
                line_end_clean: rest_of_line.trim().is_empty(),
                token_count: p.value().split_whitespace().count(),
            });
        }
    }
    sites
}

fn mutate_structure(
    text: &str,
    tree: &SyntaxTree,
    kind: StructureKind,
    rng: &mut SplitMix64,
    class: MutationClass,
) -> Result<(String, SourceSpan), MutateError> {
    let inapplicable = |reason: &str| MutateError::ClassInapplicable {
        class,
        reason: reason.to_owned(),
    };
    match kind {
        StructureKind::DeleteCloser => {
            let sites = trailing_closer_sites(text, tree);
            if sites.is_empty() {
                return Err(inapplicable("no closer in the trailing closer run"));
            }
            let site = sites[rng.below(sites.len())].clone();
            let span = span_at(text, site.start, site.len());
            Ok((splice(text, site, ""), span))
        }
        StructureKind::DeleteEquals => {
            let mut sites: Vec<usize> = Vec::new();
            for block in tree.blocks() {
                for p in block.params() {
                    let key_end = p.span.byte_start + p.key.len();
                    let eq = key_end + text[key_end..].find('=').unwrap();
                    sites.push(eq);
                }
            }
            if sites.is_empty() {
                return Err(inapplicable("input has no parameters"));
            }
            let at = sites[rng.below(sites.len())];
            Ok((splice(text, at..at + 1, ""), span_at(text, at, 1)))
        }
        StructureKind::CorruptQuote => {
            let sites = quote_sites(text, tree);
            // Deleting an opening quote is recoverable anywhere; deleting a
            // closing quote only when nothing else follows on the line.
            let mut edits: Vec<usize> = Vec::new();
            for s in &sites {
                edits.push(s.open);
                if s.line_end_clean {
                    edits.push(s.close);
                }
            }
            if edits.is_empty() {
                return Err(inapplicable("no single-line quoted values"));
            }
            let at = edits[rng.below(edits.len())];
            Ok((splice(text, at..at + 1, ""), span_at(text, at, 1)))
        }
        StructureKind::BreakListSeparator => {
            let all = quote_sites(text, tree);
            let eligible: Vec<&QuoteSite> = all
                .iter()
                .filter(|s| s.token_count >= 2)
                .collect();
            if eligible.is_empty() {
                return Err(inapplicable("no multi-token quoted lists"));
            }
            let site = eligible[rng.below(eligible.len())];
            let inner = &text[site.open + 1..site.close];
            let bracketed = format!("[{}]", inner.split_whitespace().collect::<Vec<_>>().join(", "));
            let span = span_at(text, site.open, site.close + 1 - site.open);
            Ok((splice(text, site.open..site.close + 1, &bracketed), span))
        }
    }
}

// -- type typo ----------------------------------------------------------------

const TYPO_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// One random single-character edit (substitute, insert, delete, or
/// transpose) that keeps the result a nonempty identifier different from
/// the original.
pub fn typo_identifier(name: &str, rng: &mut SplitMix64) -> String {
    let chars: Vec<char> = name.chars().collect();
    loop {
        let mut out = chars.clone();
        match rng.below(if chars.len() >= 2 { 4 } else { 2 }) {
            0 => {
                // substitute
                let i = rng.below(out.len());
                out[i] = TYPO_ALPHABET[rng.below(TYPO_ALPHABET.len())] as char;
            }
            1 => {
                // insert
                let i = rng.below(out.len() + 1);
                out.insert(i, TYPO_ALPHABET[rng.below(TYPO_ALPHABET.len())] as char);
            }
            2 => {
                // delete
                let i = rng.below(out.len());
                out.remove(i);
            }
            _ => {
                // transpose adjacent
                let i = rng.below(out.len() - 1);
                out.swap(i, i + 1);
            }
        }
        let candidate: String = out.iter().collect();
        if !candidate.is_empty() && candidate != name {
            return candidate;
        }
    }
}

fn mutate_type_typo(
    text: &str,
    tree: &SyntaxTree,
    rng: &mut SplitMix64,
    class: MutationClass,
) -> Result<(String, SourceSpan), MutateError> {
    let usages = tree.extract_types();
    if usages.is_empty() {
        return Err(MutateError::ClassInapplicable {
            class,
            reason: "input has no type parameters".into(),
        });
    }
    let usage = &usages[rng.below(usages.len())];
    let typo = typo_identifier(&usage.type_name, rng);
    // Replace just the name inside the (possibly quoted) raw value.
    let raw = usage.span.slice(text);
    let new_raw = raw.replacen(usage.type_name.as_str(), &typo, 1);
    Ok((
        splice(text, usage.span.byte_start..usage.span.byte_end, &new_raw),
        usage.span,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sanitize::sanitize;

    const INPUT: &str = "[Mesh]\n  [gen]\n    type = GeneratedMeshGenerator\n    dim = 2\n  []\n[]\n[Kernels]\n  [diff]\n    type = Diffusion\n    variable = u\n  []\n[]\n[BCs]\n  [all]\n    type = DirichletBC\n    variable = u\n    boundary = 'left right'\n    value = 0\n  []\n[]\n";

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 1234567, from the published splitmix64
        // reference sequence.
        let mut rng = SplitMix64::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
    }

    #[test]
    fn deterministic_across_calls() {
        for class in [
            MutationClass::Sanitation,
            MutationClass::Structure(StructureKind::DeleteCloser),
            MutationClass::Structure(StructureKind::DeleteEquals),
            MutationClass::Structure(StructureKind::CorruptQuote),
            MutationClass::Structure(StructureKind::BreakListSeparator),
            MutationClass::TypeTypo,
        ] {
            let a = mutate(INPUT, class, 42).unwrap();
            let b = mutate(INPUT, class, 42).unwrap();
            assert_eq!(a, b, "{class}");
        }
    }

    #[test]
    fn delete_closer_breaks_parse() {
        let (mutated, m) = mutate(INPUT, MutationClass::Structure(StructureKind::DeleteCloser), 3).unwrap();
        assert!(crate::hit::parse(&mutated).is_err());
        assert_eq!(m.class, MutationClass::Structure(StructureKind::DeleteCloser));
        // single edit site: length differs by exactly one closer
        assert!(INPUT.len() - mutated.len() == 2 || INPUT.len() - mutated.len() == 5);
    }

    #[test]
    fn sanitation_injection_reports_one_edit() {
        for seed in 0..20 {
            let (mutated, _) = mutate(INPUT, MutationClass::Sanitation, seed).unwrap();
            let (clean, report) = sanitize(&mutated);
            assert_eq!(report.edits.len(), 1, "seed {seed}");
            assert_eq!(clean, INPUT, "seed {seed}");
        }
    }

    #[test]
    fn structure_mutations_fail_parse_and_repair_recovers() {
        for kind in [
            StructureKind::DeleteCloser,
            StructureKind::DeleteEquals,
            StructureKind::CorruptQuote,
            StructureKind::BreakListSeparator,
        ] {
            for seed in 0..10 {
                let (mutated, _) = mutate(INPUT, MutationClass::Structure(kind), seed).unwrap();
                assert!(crate::hit::parse(&mutated).is_err(), "{kind:?} seed {seed}");
                let out = crate::repair::repair(&mutated, 8);
                assert!(out.success, "{kind:?} seed {seed}: {:?}", out.final_failure);
            }
        }
    }

    #[test]
    fn type_typo_is_one_edit_away() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..50 {
            let typo = typo_identifier("Diffusion", &mut rng);
            assert_ne!(typo, "Diffusion");
            let dist = strsim::damerau_levenshtein("Diffusion", &typo);
            assert_eq!(dist, 1, "{typo}");
        }
    }

    #[test]
    fn type_typo_detected_and_suggested() {
        let reg = crate::registry::SyntaxRegistry::from_json(
            r#"{"app":"t","families":{
                "Mesh":[{"name":"GeneratedMeshGenerator"}],
                "Kernels":[{"name":"Diffusion"},{"name":"BodyForce"}],
                "BCs":[{"name":"DirichletBC"},{"name":"NeumannBC"}]}}"#,
        )
        .unwrap();
        let (mutated, _) = mutate(INPUT, MutationClass::TypeTypo, 7).unwrap();
        let tree = crate::hit::parse(&mutated).unwrap();
        let issues = crate::registry::validate_types(&tree, &reg);
        assert_eq!(issues.len(), 1);
        let cands = crate::registry::suggest_types(&issues[0], &reg, 3);
        // the original name ranks first (edit-distance oracle checked in
        // the registry tests)
        let original = INPUT
            .match_indices("type = ")
            .map(|(i, _)| {
                INPUT[i + 7..].split_whitespace().next().unwrap().to_owned()
            })
            .find(|n| n == &cands[0].name);
        assert!(original.is_some(), "top candidate {:?}", cands[0].name);
    }

    #[test]
    fn inapplicable_class_is_an_error() {
        let no_types = "[Outputs]\n  exodus = true\n[]\n";
        assert!(matches!(
            mutate(no_types, MutationClass::TypeTypo, 1),
            Err(MutateError::ClassInapplicable { .. })
        ));
        let no_quotes = "[Mesh]\n  dim = 1\n[]\n";
        assert!(matches!(
            mutate(no_quotes, MutationClass::Structure(StructureKind::CorruptQuote), 1),
            Err(MutateError::ClassInapplicable { .. })
        ));
    }

    #[test]
    fn unparsable_input_is_rejected() {
        assert!(matches!(
            mutate("[Mesh]\n", MutationClass::Sanitation, 1),
            Err(MutateError::Unparsable(_))
        ));
    }
}
