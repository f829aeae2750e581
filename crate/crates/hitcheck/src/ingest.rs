//! Syntax-preserving chunking of valid inputs into retrieval documents.
//!
//! A file becomes one parent document (the whole input) plus one child
//! document per block node — top-level and nested alike — each carrying the
//! verbatim block text and tree-derived metadata. Nested blocks get their
//! own child, so an enclosing block's child textually contains its
//! descendants; the overlap is intentional, retrieval dedup happens
//! downstream. Metadata comes from the parse tree, never from text
//! heuristics.
//!
//! Serialization is line-delimited JSON: parent first, then children in
//! document order, each `{id, parent_id, kind, text, metadata}`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hit::{self, ParseFailure, SyntaxTree};

/// Projection of a `type =` usage into document metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeUsageMeta {
    pub block_path: String,
    pub family: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentMeta {
    /// Reserved for an externally supplied natural-language summary;
    /// empty unless the caller provides one.
    #[serde(default)]
    pub summary_slot: String,
    /// Top-level block names, in document order.
    pub systems: Vec<String>,
    pub types_used: Vec<TypeUsageMeta>,
    /// Documentation snippets per type name, when a docs directory was
    /// given and `<TypeName>.md` existed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub docs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildMeta {
    pub block_path: String,
    pub block_name: String,
    /// Direct parameter keys of this block.
    pub params: Vec<String>,
    /// Type names instantiated anywhere in this subtree.
    pub types: Vec<String>,
    pub span: LineRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentDoc {
    pub document_id: String,
    pub source_path: String,
    pub text: String,
    pub metadata: ParentMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildDoc {
    pub document_id: String,
    pub parent_id: String,
    pub text: String,
    pub metadata: ChildMeta,
}

/// Extra inputs for [`chunk_input_with`].
#[derive(Debug, Clone, Default)]
pub struct ChunkOptions {
    /// Externally produced summary for the parent's `summary_slot`.
    pub summary: Option<String>,
    /// Directory of `<TypeName>.md` files; missing files are skipped
    /// silently.
    pub docs_dir: Option<std::path::PathBuf>,
}

fn doc_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

fn normalize_path(path: &str) -> String {
    path.replace('\\', "/")
}

/// Chunk a parsed input into one parent and one child per block node, in
/// document order. Unparsable text is refused with the failure — no
/// partial chunks.
pub fn chunk_input(text: &str, source_path: &str) -> Result<(ParentDoc, Vec<ChildDoc>), ParseFailure> {
    chunk_input_with(text, source_path, &ChunkOptions::default())
}

/// [`chunk_input`] with a summary hook and optional docs-directory
/// metadata enrichment.
pub fn chunk_input_with(
    text: &str,
    source_path: &str,
    opts: &ChunkOptions,
) -> Result<(ParentDoc, Vec<ChildDoc>), ParseFailure> {
    let tree = hit::parse(text)?;
    let norm = normalize_path(source_path);
    let parent_id = doc_hash(&[&norm, text]);

    let types_used: Vec<TypeUsageMeta> = tree
        .extract_types()
        .into_iter()
        .map(|u| TypeUsageMeta {
            block_path: u.block_path,
            family: u.family,
            type_name: u.type_name,
        })
        .collect();

    let mut docs = BTreeMap::new();
    if let Some(dir) = &opts.docs_dir {
        for usage in &types_used {
            if docs.contains_key(&usage.type_name) {
                continue;
            }
            let path = dir.join(format!("{}.md", usage.type_name));
            if let Ok(snippet) = std::fs::read_to_string(&path) {
                docs.insert(usage.type_name.clone(), snippet);
            }
        }
    }

    let parent = ParentDoc {
        document_id: parent_id.clone(),
        source_path: norm.clone(),
        text: text.to_owned(),
        metadata: ParentMeta {
            summary_slot: opts.summary.clone().unwrap_or_default(),
            systems: tree.root().children().map(|b| b.name.clone()).collect(),
            types_used,
            docs,
        },
    };

    let children = collect_children(&tree, text, &parent_id);
    Ok((parent, children))
}

fn collect_children(tree: &SyntaxTree, text: &str, parent_id: &str) -> Vec<ChildDoc> {
    tree.blocks()
        .into_iter()
        .map(|block| {
            let snippet = block.span.slice(text);
            let types: Vec<String> = {
                let mut names: Vec<String> = Vec::new();
                let mut nodes = vec![block];
                while let Some(b) = nodes.pop() {
                    if let Some(p) = b.get_param("type") {
                        names.push(p.value().to_owned());
                    }
                    nodes.extend(b.children());
                }
                names.sort();
                names.dedup();
                names
            };
            ChildDoc {
                document_id: doc_hash(&[
                    parent_id,
                    &block.path,
                    &block.span.byte_start.to_string(),
                    snippet,
                ]),
                parent_id: parent_id.to_owned(),
                text: snippet.to_owned(),
                metadata: ChildMeta {
                    block_path: block.path.clone(),
                    block_name: block.name.clone(),
                    params: block.params().map(|p| p.key.clone()).collect(),
                    types,
                    span: LineRange {
                        start_line: block.span.start_line,
                        end_line: block.span.end_line,
                    },
                },
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// JSONL emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Parent,
    Child,
}

/// Uniform record shape of the JSONL stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocRecord {
    pub id: String,
    pub parent_id: Option<String>,
    pub kind: DocKind,
    pub text: String,
    pub metadata: serde_json::Value,
}

#[derive(Debug, Error)]
#[error("failed to emit document {document_id}: {source}")]
pub struct EmitError {
    pub document_id: String,
    #[source]
    pub source: std::io::Error,
}

/// Write one JSON object per line: the parent first, then children in
/// document order.
pub fn emit_jsonl<W: Write>(
    parent: &ParentDoc,
    children: &[ChildDoc],
    mut out: W,
) -> Result<(), EmitError> {
    let emit = |out: &mut W, id: &str, record: &DocRecord| -> Result<(), EmitError> {
        let line = serde_json::to_string(record).map_err(|e| EmitError {
            document_id: id.to_owned(),
            source: e.into(),
        })?;
        writeln!(out, "{line}").map_err(|e| EmitError {
            document_id: id.to_owned(),
            source: e,
        })
    };
    let parent_record = DocRecord {
        id: parent.document_id.clone(),
        parent_id: None,
        kind: DocKind::Parent,
        text: parent.text.clone(),
        metadata: serde_json::to_value(&parent.metadata).unwrap(),
    };
    emit(&mut out, &parent.document_id, &parent_record)?;
    for child in children {
        let record = DocRecord {
            id: child.document_id.clone(),
            parent_id: Some(child.parent_id.clone()),
            kind: DocKind::Child,
            text: child.text.clone(),
            metadata: serde_json::to_value(&child.metadata).unwrap(),
        };
        emit(&mut out, &child.document_id, &record)?;
    }
    Ok(())
}

/// Read a JSONL stream back into records (the inverse of [`emit_jsonl`]).
pub fn read_jsonl<R: BufRead>(reader: R) -> std::io::Result<Vec<DocRecord>> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocRecord = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        records.push(record);
    }
    Ok(records)
}

/// Convenience: chunk a file from disk.
pub fn chunk_file(path: &Path, opts: &ChunkOptions) -> std::io::Result<Result<(ParentDoc, Vec<ChildDoc>), ParseFailure>> {
    let text = std::fs::read_to_string(path)?;
    Ok(chunk_input_with(&text, &path.to_string_lossy(), opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SYSTEMS: &str = "[Mesh]\n  [gen]\n    type = GeneratedMeshGenerator\n  []\n[]\n[Kernels]\n  [diff]\n    type = Diffusion\n    variable = u\n  []\n[]\n";

    #[test]
    fn one_child_per_block_node() {
        // Node-count oracle: walk the tree by hand — Mesh, Mesh/gen,
        // Kernels, Kernels/diff.
        let (parent, children) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        assert_eq!(children.len(), 4);
        assert_eq!(parent.metadata.systems, vec!["Mesh", "Kernels"]);
        let paths: Vec<&str> = children.iter().map(|c| c.metadata.block_path.as_str()).collect();
        assert_eq!(paths, vec!["/Mesh", "/Mesh/gen", "/Kernels", "/Kernels/diff"]);
    }

    #[test]
    fn child_text_is_exact_substring() {
        let (parent, children) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        for child in &children {
            assert!(parent.text.contains(&child.text));
            // and re-parses standalone as exactly one top-level block
            let sub = crate::hit::parse(&child.text).unwrap();
            assert_eq!(sub.root().children().count(), 1);
        }
        // the nested child is contained in its parent block's text
        assert!(children[0].text.contains(&children[1].text));
    }

    #[test]
    fn single_empty_block() {
        let (parent, children) = chunk_input("[Outputs]\n[]", "o.i").unwrap();
        assert_eq!(children.len(), 1);
        assert_eq!(children[0].text, "[Outputs]\n[]");
        assert_eq!(children[0].parent_id, parent.document_id);
    }

    #[test]
    fn empty_input_has_no_children() {
        let (parent, children) = chunk_input("", "empty.i").unwrap();
        assert!(children.is_empty());
        assert!(parent.text.is_empty());
        assert!(parent.metadata.systems.is_empty());
    }

    #[test]
    fn unparsable_input_is_refused() {
        assert!(chunk_input("[Mesh]\n  oops\n", "bad.i").is_err());
    }

    #[test]
    fn ids_are_deterministic_and_distinct() {
        let (p1, c1) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        let (p2, c2) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        assert_eq!(p1.document_id, p2.document_id);
        assert_eq!(c1, c2);
        // different path, different parent id
        let (p3, _) = chunk_input(TWO_SYSTEMS, "other.i").unwrap();
        assert_ne!(p1.document_id, p3.document_id);
        // duplicate sibling names still get distinct child ids
        let (_, dup) = chunk_input("[K]\n[]\n[K]\n[]\n", "dup.i").unwrap();
        assert_ne!(dup[0].document_id, dup[1].document_id);
    }

    #[test]
    fn metadata_from_tree() {
        let (parent, children) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        assert_eq!(parent.metadata.types_used.len(), 2);
        assert_eq!(parent.metadata.types_used[0].type_name, "GeneratedMeshGenerator");
        let diff = children.iter().find(|c| c.metadata.block_path == "/Kernels/diff").unwrap();
        assert_eq!(diff.metadata.params, vec!["type", "variable"]);
        assert_eq!(diff.metadata.types, vec!["Diffusion"]);
        let kernels = children.iter().find(|c| c.metadata.block_path == "/Kernels").unwrap();
        assert_eq!(kernels.metadata.types, vec!["Diffusion"]);
        assert_eq!(kernels.metadata.span.start_line, 6);
    }

    #[test]
    fn jsonl_roundtrip() {
        let (parent, children) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        let mut buf = Vec::new();
        emit_jsonl(&parent, &children, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + children.len());

        let records = read_jsonl(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(records.len(), 5);
        assert_eq!(records[0].kind, DocKind::Parent);
        assert!(records[0].parent_id.is_none());
        for (record, child) in records[1..].iter().zip(&children) {
            assert_eq!(record.kind, DocKind::Child);
            assert_eq!(record.id, child.document_id);
            assert_eq!(record.parent_id.as_deref(), Some(parent.document_id.as_str()));
            assert_eq!(record.text, child.text);
        }
    }

    #[test]
    fn unicode_survives_serialization() {
        let text = "# flux régulier 流\n[Mesh]\n[]\n";
        let (parent, children) = chunk_input(text, "u.i").unwrap();
        let mut buf = Vec::new();
        emit_jsonl(&parent, &children, &mut buf).unwrap();
        let records = read_jsonl(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(records[0].text, text);
    }

    #[test]
    fn docs_dir_enrichment() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("Diffusion.md"), "Laplacian kernel.").unwrap();
        let opts = ChunkOptions {
            summary: Some("steady diffusion demo".into()),
            docs_dir: Some(dir.path().to_path_buf()),
        };
        let (parent, _) = chunk_input_with(TWO_SYSTEMS, "two.i", &opts).unwrap();
        assert_eq!(parent.metadata.summary_slot, "steady diffusion demo");
        assert_eq!(parent.metadata.docs["Diffusion"], "Laplacian kernel.");
        // absent file (GeneratedMeshGenerator.md) silently skipped
        assert!(!parent.metadata.docs.contains_key("GeneratedMeshGenerator"));
    }

    #[test]
    fn top_level_children_tile_the_parent() {
        let (parent, children) = chunk_input(TWO_SYSTEMS, "two.i").unwrap();
        let top: Vec<&ChildDoc> = children
            .iter()
            .filter(|c| c.metadata.block_path.matches('/').count() == 1)
            .collect();
        // Remove each top-level child text once; what remains is trivia.
        let mut rest = parent.text.clone();
        for child in top {
            rest = rest.replacen(&child.text, "", 1);
        }
        assert!(rest.chars().all(|c| c.is_whitespace() || c == '#'), "{rest:?}");
    }
}
