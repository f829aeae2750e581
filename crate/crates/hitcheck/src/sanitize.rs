//! Deterministic character-level cleanup of candidate input text.
//!
//! LLM-generated inputs routinely carry formatting that is invisible in a
//! chat window but breaks parsing: mixed newlines, non-breaking spaces,
//! curly quotes, zero-width characters. [`sanitize`] normalizes all of it
//! in a fixed stage order and returns an auditable report of every edit.
//!
//! Stage order:
//! 1. newline normalization (`\r\n` and `\r` become `\n`);
//! 2. NFKC compatibility normalization, applied per character so every
//!    expansion (ligatures, fullwidth forms) is reported at its original
//!    coordinate;
//! 3. smart punctuation: curly quotes to `'`/`"`, minus sign to `-`,
//!    en/em dashes to `-` when used as an operator, NBSP to a space;
//! 4. removal of zero-width characters (U+200B..U+200D, U+FEFF, including
//!    a leading BOM) and control characters other than tab and newline.
//!
//! Edit coordinates are line/column positions on the newline-normalized
//! text (the input to stage 2), so the report can be replayed against that
//! text to reproduce the clean output exactly — see [`replay_edits`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditAction {
    Replaced,
    Removed,
}

/// One character-level change: where it happened, what was there, and what
/// replaced it (empty for removals).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitationEdit {
    pub line: u32,
    pub col: u32,
    pub codepoint: String,
    pub unicode_name: String,
    pub action: EditAction,
    pub replacement: String,
}

/// Full audit trail of a [`sanitize`] run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitationReport {
    pub edits: Vec<SanitationEdit>,
    pub counts: BTreeMap<EditAction, usize>,
    pub newline_normalizations: usize,
}

impl SanitationReport {
    pub fn is_clean(&self) -> bool {
        self.edits.is_empty() && self.newline_normalizations == 0
    }

    pub fn count(&self, action: EditAction) -> usize {
        self.counts.get(&action).copied().unwrap_or(0)
    }
}

/// Normalize CRLF and lone CR to `\n`, counting conversions.
pub fn normalize_newlines(raw: &str) -> (String, usize) {
    let mut out = String::with_capacity(raw.len());
    let mut count = 0;
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' {
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
            out.push('\n');
            count += 1;
        } else {
            out.push(c);
        }
    }
    (out, count)
}

/// Per-character NFKC. Applying normalization one scalar at a time keeps a
/// 1:1 mapping from each edit to its source coordinate; the trade-off is
/// that canonical composition across neighboring characters (plain NFC
/// territory) is not performed, which is irrelevant for the artifact
/// classes this stage exists to catch.
fn compat_map(c: char) -> Option<String> {
    let normalized: String = std::iter::once(c).nfkc().collect();
    if normalized.chars().eq(std::iter::once(c)) {
        None
    } else {
        Some(normalized)
    }
}

fn is_zero_width(c: char) -> bool {
    matches!(c, '\u{200B}' | '\u{200C}' | '\u{200D}' | '\u{FEFF}')
}

fn is_stripped_control(c: char) -> bool {
    c.is_control() && c != '\t' && c != '\n'
}

fn is_dash(c: char) -> bool {
    matches!(c, '\u{2013}' | '\u{2014}')
}

/// Unconditional smart-punctuation mapping.
fn punct_map(c: char) -> Option<&'static str> {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' => Some("'"),
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' => Some("\""),
        '\u{00A0}' => Some(" "),
        '\u{2212}' => Some("-"),
        _ => None,
    }
}

fn codepoint_label(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

/// Pipeline result of pushing one source character through stages 2-4.
fn transform_char(c: char) -> Option<String> {
    let mapped: String = compat_map(c).unwrap_or_else(|| c.to_string());
    let mut out = String::new();
    for m in mapped.chars() {
        if let Some(p) = punct_map(m) {
            out.push_str(p);
        } else if is_zero_width(m) || is_stripped_control(m) {
            // dropped
        } else {
            out.push(m);
        }
    }
    if out == c.to_string() {
        None
    } else {
        Some(out)
    }
}

/// Sanitize `raw`, returning the clean text plus the full change report.
///
/// Total over valid text: empty input yields empty output and an empty
/// report; already-clean input is a fixed point.
///
/// ```
/// use hitcheck::sanitize::sanitize;
/// let (clean, report) = sanitize("type\u{00A0}= Diffusion");
/// assert_eq!(clean, "type = Diffusion");
/// assert_eq!(report.edits.len(), 1);
/// assert_eq!(report.edits[0].codepoint, "U+00A0");
/// ```
pub fn sanitize(raw: &str) -> (String, SanitationReport) {
    let (normalized, newline_normalizations) = normalize_newlines(raw);

    // Pass A: everything except the context-dependent dash rule. Each
    // surviving character keeps the (line, col) of its source character so
    // pass B can report dash edits at original coordinates.
    struct Survivor {
        ch: char,
        line: u32,
        col: u32,
        original: bool,
    }
    let mut survivors: Vec<Survivor> = Vec::with_capacity(normalized.len());
    let mut edits: Vec<SanitationEdit> = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    for c in normalized.chars() {
        if is_dash(c) {
            survivors.push(Survivor {
                ch: c,
                line,
                col,
                original: true,
            });
        } else {
            match transform_char(c) {
                None => survivors.push(Survivor {
                    ch: c,
                    line,
                    col,
                    original: true,
                }),
                Some(replacement) => {
                    edits.push(SanitationEdit {
                        line,
                        col,
                        codepoint: codepoint_label(c),
                        unicode_name: char_name(c),
                        action: if replacement.is_empty() {
                            EditAction::Removed
                        } else {
                            EditAction::Replaced
                        },
                        replacement: replacement.clone(),
                    });
                    for r in replacement.chars() {
                        survivors.push(Survivor {
                            ch: r,
                            line,
                            col,
                            original: false,
                        });
                    }
                }
            }
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }

    // Pass B: en/em dashes become `-` when used as a minus — adjacent to a
    // digit, or whitespace-delimited as an operator. Decisions are taken on
    // a snapshot of the pass-A output, which is exactly the neighborhood the
    // dash will have in the clean text, so a second sanitize run reproduces
    // them (idempotence).
    let mut dash_edits: Vec<SanitationEdit> = Vec::new();
    let mut clean = String::with_capacity(normalized.len());
    for i in 0..survivors.len() {
        let s = &survivors[i];
        if s.original && is_dash(s.ch) {
            let prev = if i > 0 { Some(survivors[i - 1].ch) } else { None };
            let next = survivors.get(i + 1).map(|n| n.ch);
            let digit_adjacent = prev.is_some_and(|p| p.is_ascii_digit())
                || next.is_some_and(|n| n.is_ascii_digit());
            let ws_delimited = prev.is_none_or(|p| p.is_whitespace())
                && next.is_none_or(|n| n.is_whitespace());
            if digit_adjacent || ws_delimited {
                dash_edits.push(SanitationEdit {
                    line: s.line,
                    col: s.col,
                    codepoint: codepoint_label(s.ch),
                    unicode_name: char_name(s.ch),
                    action: EditAction::Replaced,
                    replacement: "-".to_owned(),
                });
                clean.push('-');
                continue;
            }
        }
        clean.push(s.ch);
    }

    edits.extend(dash_edits);
    edits.sort_by_key(|e| (e.line, e.col));

    let mut counts = BTreeMap::new();
    for e in &edits {
        *counts.entry(e.action).or_insert(0) += 1;
    }
    (
        clean,
        SanitationReport {
            edits,
            counts,
            newline_normalizations,
        },
    )
}

/// Apply a report's edits to the newline-normalized text, reproducing the
/// clean output. This is the audit-completeness check: the report alone is
/// enough to go from the normalized input to the sanitized result.
pub fn replay_edits(normalized: &str, edits: &[SanitationEdit]) -> String {
    let mut by_pos: BTreeMap<(u32, u32), &SanitationEdit> = BTreeMap::new();
    for e in edits {
        by_pos.insert((e.line, e.col), e);
    }
    let mut out = String::with_capacity(normalized.len());
    let mut line = 1u32;
    let mut col = 1u32;
    for c in normalized.chars() {
        match by_pos.get(&(line, col)) {
            Some(e) => out.push_str(&e.replacement),
            None => out.push(c),
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    out
}

/// Character classes [`sanitize`] is guaranteed to remove; the clean text
/// never contains them.
pub fn is_forbidden_output(c: char) -> bool {
    is_zero_width(c) || is_stripped_control(c)
}

/// Official Unicode name of a character. Control characters (which have no
/// formal name) use their standard aliases; anything the name table cannot
/// resolve falls back to the `U+XXXX` label.
pub fn char_name(c: char) -> String {
    const C0: &[&str] = &[
        "NULL",
        "START OF HEADING",
        "START OF TEXT",
        "END OF TEXT",
        "END OF TRANSMISSION",
        "ENQUIRY",
        "ACKNOWLEDGE",
        "BELL",
        "BACKSPACE",
        "CHARACTER TABULATION",
        "LINE FEED",
        "LINE TABULATION",
        "FORM FEED",
        "CARRIAGE RETURN",
        "SHIFT OUT",
        "SHIFT IN",
        "DATA LINK ESCAPE",
        "DEVICE CONTROL ONE",
        "DEVICE CONTROL TWO",
        "DEVICE CONTROL THREE",
        "DEVICE CONTROL FOUR",
        "NEGATIVE ACKNOWLEDGE",
        "SYNCHRONOUS IDLE",
        "END OF TRANSMISSION BLOCK",
        "CANCEL",
        "END OF MEDIUM",
        "SUBSTITUTE",
        "ESCAPE",
        "INFORMATION SEPARATOR FOUR",
        "INFORMATION SEPARATOR THREE",
        "INFORMATION SEPARATOR TWO",
        "INFORMATION SEPARATOR ONE",
    ];
    match c {
        '\u{0000}'..='\u{001F}' => C0[c as usize].to_owned(),
        '\u{007F}' => "DELETE".to_owned(),
        '\u{0080}'..='\u{009F}' => format!("<control-{:04X}>", c as u32),
        _ => match unicode_names2::name(c) {
            Some(name) => name.to_string(),
            None => codepoint_label(c),
        },
    }
}
