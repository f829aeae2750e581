//! Lossless parsing, rendering and querying of HIT block-structured input.
//!
//! HIT is the hierarchical text format of MOOSE `.i` files: nested
//! `[Block] ... []` sections holding `key = value` parameters. The parser
//! here is a concrete syntax tree: every byte of the source (whitespace,
//! comments, quoting) is retained, so `render(parse(text)) == text` for any
//! parsable input. Structure-preserving edits (replacing one parameter
//! value) splice the source text and re-parse, so a diff against the
//! original touches exactly the edited span.
//!
//! Supported syntax:
//! - blocks opened by `[Name]` or the legacy `[./Name]`, closed by `[]` or
//!   the legacy `[../]`;
//! - `key = value` parameters with bare, single-quoted or double-quoted
//!   values (quoted values may span lines);
//! - `#` line comments;
//! - brace expressions `${...}` and `!include` lines, recognized lexically
//!   and preserved as opaque text, never evaluated.

mod parser;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::span::SourceSpan;

pub use parser::parse_prefix;
pub(crate) use parser::open_stack_at_failure;

/// Identifier characters for block names and parameter keys.
pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '-')
}

/// Token class the parser was looking for when it failed.
///
/// The repair module keys its rule table on this enumeration, so the set is
/// fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    BlockOpen,
    BlockClose,
    Identifier,
    Equals,
    Value,
    EndOfQuote,
}

impl std::fmt::Display for TokenClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TokenClass::BlockOpen => "block_open",
            TokenClass::BlockClose => "block_close",
            TokenClass::Identifier => "identifier",
            TokenClass::Equals => "equals",
            TokenClass::Value => "value",
            TokenClass::EndOfQuote => "end_of_quote",
        };
        f.write_str(s)
    }
}

/// First parse failure in document order. A first-class return value, not a
/// panic path: callers (notably repair) dispatch on `expected`.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{message} at {location} (expected {expected}, found {found:?})")]
pub struct ParseFailure {
    pub location: SourceSpan,
    pub expected: TokenClass,
    pub found: String,
    pub message: String,
}

/// Non-fatal parser observation (e.g. duplicate parameter keys).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

/// How a parameter value was written in the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Bare,
    SingleQuoted,
    DoubleQuoted,
}

/// One `key = value` entry. The raw pieces (inter-token whitespace, quote
/// characters) are kept verbatim so rendering reproduces the source bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub key: String,
    pub value_raw: String,
    pub value_kind: ValueKind,
    pub span: SourceSpan,
    pub value_span: SourceSpan,
    pub(crate) leading_trivia: String,
    pub(crate) pre_eq: String,
    pub(crate) post_eq: String,
}

impl Param {
    /// The value with surrounding quotes removed (bare values unchanged).
    pub fn value(&self) -> &str {
        match self.value_kind {
            ValueKind::Bare => &self.value_raw,
            ValueKind::SingleQuoted | ValueKind::DoubleQuoted => {
                &self.value_raw[1..self.value_raw.len() - 1]
            }
        }
    }
}

/// An `!include` (or similar bang-directive) line kept as opaque text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub text: String,
    pub span: SourceSpan,
    pub(crate) leading_trivia: String,
}

/// Source-order element of a block body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Item {
    Param(Param),
    Block(BlockNode),
    Directive(Directive),
}

/// Opening form of a block: `[Name]` or legacy `[./Name]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockForm {
    Standard,
    Legacy,
    Root,
}

/// Closing form of a block: `[]` or legacy `[../]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseForm {
    Standard,
    Legacy,
    Root,
}

/// One `[Name] ... []` unit (or the synthetic document root).
///
/// `path` is the slash-joined chain of ancestor names, `/` for the root.
/// Items preserve source order; `params()` and `children()` are filtered
/// views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockNode {
    pub name: String,
    pub path: String,
    pub open_form: BlockForm,
    pub close_form: CloseForm,
    pub items: Vec<Item>,
    pub span: SourceSpan,
    pub(crate) leading_trivia: String,
    pub(crate) close_trivia: String,
}

impl BlockNode {
    pub fn is_root(&self) -> bool {
        self.open_form == BlockForm::Root
    }

    /// Direct parameters of this block, in source order.
    pub fn params(&self) -> impl DoubleEndedIterator<Item = &Param> {
        self.items.iter().filter_map(|i| match i {
            Item::Param(p) => Some(p),
            _ => None,
        })
    }

    /// Direct child blocks, in source order.
    pub fn children(&self) -> impl Iterator<Item = &BlockNode> {
        self.items.iter().filter_map(|i| match i {
            Item::Block(b) => Some(b),
            _ => None,
        })
    }

    /// Look up a direct parameter by key. Duplicate keys are a parse
    /// diagnostic; the last occurrence wins here.
    pub fn get_param(&self, key: &str) -> Option<&Param> {
        self.params().filter(|p| p.key == key).next_back()
    }

    /// Raw comment lines (starting with `#`) from the trivia immediately
    /// preceding this block.
    pub fn leading_comments(&self) -> Vec<String> {
        self.leading_trivia
            .lines()
            .map(str::trim_start)
            .filter(|l| l.starts_with('#'))
            .map(str::to_owned)
            .collect()
    }

    fn render_into(&self, out: &mut String) {
        out.push_str(&self.leading_trivia);
        match self.open_form {
            BlockForm::Standard => {
                out.push('[');
                out.push_str(&self.name);
                out.push(']');
            }
            BlockForm::Legacy => {
                out.push_str("[./");
                out.push_str(&self.name);
                out.push(']');
            }
            BlockForm::Root => {}
        }
        for item in &self.items {
            match item {
                Item::Param(p) => {
                    out.push_str(&p.leading_trivia);
                    out.push_str(&p.key);
                    out.push_str(&p.pre_eq);
                    out.push('=');
                    out.push_str(&p.post_eq);
                    out.push_str(&p.value_raw);
                }
                Item::Block(b) => b.render_into(out),
                Item::Directive(d) => {
                    out.push_str(&d.leading_trivia);
                    out.push_str(&d.text);
                }
            }
        }
        out.push_str(&self.close_trivia);
        match self.close_form {
            CloseForm::Standard => out.push_str("[]"),
            CloseForm::Legacy => out.push_str("[../]"),
            CloseForm::Root => {}
        }
    }

    /// Walk this node and all descendants depth-first in document order,
    /// excluding `self`.
    pub fn descendants(&self) -> Vec<&BlockNode> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a BlockNode, out: &mut Vec<&'a BlockNode>) {
            for child in node.children() {
                out.push(child);
                walk(child, out);
            }
        }
        walk(self, &mut out);
        out
    }
}

/// One `type = ClassName` occurrence: which block instantiated it and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeUsage {
    pub block_path: String,
    pub family: String,
    pub type_name: String,
    pub span: SourceSpan,
}

/// Parsed document: the exact source plus the syntax tree over it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxTree {
    source: String,
    root: BlockNode,
    diagnostics: Vec<Diagnostic>,
}

/// Parse `text` into a syntax tree, or return the first failure in
/// document order.
///
/// ```
/// let tree = hitcheck::hit::parse("[Mesh]\n  type = GeneratedMesh\n[]\n").unwrap();
/// assert_eq!(tree.root().children().count(), 1);
/// assert_eq!(tree.render(), "[Mesh]\n  type = GeneratedMesh\n[]\n");
/// ```
pub fn parse(text: &str) -> Result<SyntaxTree, ParseFailure> {
    parser::parse_document(text)
}

impl SyntaxTree {
    pub(crate) fn new(source: String, root: BlockNode, diagnostics: Vec<Diagnostic>) -> Self {
        SyntaxTree {
            source,
            root,
            diagnostics,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &BlockNode {
        &self.root
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn has_error_diagnostics(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.severity == Severity::Error)
    }

    /// Reconstruct the source text from the tree pieces. For a tree that
    /// came straight from [`parse`], this is byte-identical to the input.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        self.root.render_into(&mut out);
        out
    }

    /// All blocks (excluding the synthetic root) in document order.
    pub fn blocks(&self) -> Vec<&BlockNode> {
        self.root.descendants()
    }

    /// Find blocks whose path matches a glob pattern: `*` matches one path
    /// segment, `**` matches any number (including none). Patterns are
    /// absolute (`/Kernels/*`); `/**` matches every block.
    pub fn find_blocks(&self, pattern: &str) -> Result<Vec<&BlockNode>, PatternError> {
        let segs = parse_pattern(pattern)?;
        Ok(self
            .blocks()
            .into_iter()
            .filter(|b| {
                let parts: Vec<&str> = b.path[1..].split('/').collect();
                glob_match(&segs, &parts)
            })
            .collect())
    }

    /// Every block carrying a `type` parameter, in document order.
    pub fn extract_types(&self) -> Vec<TypeUsage> {
        self.blocks()
            .iter()
            .filter_map(|b| {
                let p = b.get_param("type")?;
                let family = b.path[1..].split('/').next().unwrap_or_default();
                Some(TypeUsage {
                    block_path: b.path.clone(),
                    family: family.to_owned(),
                    type_name: p.value().to_owned(),
                    span: p.value_span,
                })
            })
            .collect()
    }

    /// Splice `new_raw` over `span` in the source and re-parse. Used for
    /// structure-preserving edits such as type-name substitution: bytes
    /// outside the span are untouched.
    pub fn replace_span(&self, span: SourceSpan, new_raw: &str) -> Result<SyntaxTree, ParseFailure> {
        let mut text = String::with_capacity(self.source.len() + new_raw.len());
        text.push_str(&self.source[..span.byte_start]);
        text.push_str(new_raw);
        text.push_str(&self.source[span.byte_end..]);
        parse(&text)
    }
}

/// Malformed block-path pattern handed to [`SyntaxTree::find_blocks`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern must start with '/'")]
    NotAbsolute,
    #[error("pattern has an empty segment")]
    EmptySegment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatSeg {
    Literal(String),
    One,
    Any,
}

fn parse_pattern(pattern: &str) -> Result<Vec<PatSeg>, PatternError> {
    let rest = pattern.strip_prefix('/').ok_or(PatternError::NotAbsolute)?;
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    rest.split('/')
        .map(|s| match s {
            "" => Err(PatternError::EmptySegment),
            "*" => Ok(PatSeg::One),
            "**" => Ok(PatSeg::Any),
            lit => Ok(PatSeg::Literal(lit.to_owned())),
        })
        .collect()
}

fn glob_match(pat: &[PatSeg], path: &[&str]) -> bool {
    match (pat.first(), path.first()) {
        (None, None) => true,
        (None, Some(_)) => false,
        (Some(PatSeg::Any), _) => {
            glob_match(&pat[1..], path) || (!path.is_empty() && glob_match(pat, &path[1..]))
        }
        (Some(_), None) => false,
        (Some(PatSeg::One), Some(_)) => glob_match(&pat[1..], &path[1..]),
        (Some(PatSeg::Literal(l)), Some(seg)) => l == seg && glob_match(&pat[1..], &path[1..]),
    }
}

#[cfg(test)]
mod tests;
