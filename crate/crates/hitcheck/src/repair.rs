//! Bounded, grammar-constrained repair of near-valid HIT text.
//!
//! The loop is: parse; on failure, apply the single rule keyed by the
//! failure's expected token class, editing only within ±2 lines of the
//! failure location; re-parse. It stops as soon as the text parses or the
//! iteration budget runs out. One rule application per iteration keeps
//! every diff auditable and avoids cascading misfixes.
//!
//! Rule table (keyed by expected token class):
//!
//! | expected       | rule                 | edit                                    |
//! |----------------|----------------------|-----------------------------------------|
//! | `block_close`  | `balance_delimiters` | append the matching `[]` / `[../]`      |
//! | `equals`       | `insert_equals`      | insert `=` between key and value        |
//! | `end_of_quote` | `close_quote`        | insert the missing quote character      |
//! | `value`        | `fix_list_separator` | rewrite `[a, b]` lists, fill `''`       |
//! | `identifier`   | `drop_stray_token`   | delete the offending token              |
//!
//! `normalize_quote` is part of the rule vocabulary but is not reachable
//! through the static keying; mixed-quote forms are closed by `close_quote`
//! instead. A `block_open` failure (malformed header) has no rule and halts
//! the loop. Delimiter balancing always inserts a closer, never deletes an
//! opener, and no rule ever touches a comment-only line.

use serde::{Deserialize, Serialize};

use crate::hit::{self, BlockForm, ParseFailure, TokenClass};
use crate::span::SourceSpan;

/// Default iteration budget: covers every single- and double-mutation case
/// in the acceptance corpus with room to spare.
pub const DEFAULT_BUDGET: usize = 8;

/// Edits are confined to this many lines around the observed failure.
pub const LOCALITY_WINDOW_LINES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairRule {
    BalanceDelimiters,
    InsertEquals,
    NormalizeQuote,
    FixListSeparator,
    CloseQuote,
    DropStrayToken,
}

impl std::fmt::Display for RepairRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RepairRule::BalanceDelimiters => "balance_delimiters",
            RepairRule::InsertEquals => "insert_equals",
            RepairRule::NormalizeQuote => "normalize_quote",
            RepairRule::FixListSeparator => "fix_list_separator",
            RepairRule::CloseQuote => "close_quote",
            RepairRule::DropStrayToken => "drop_stray_token",
        };
        f.write_str(s)
    }
}

/// Rule selection for a failure class; `None` means the loop halts with
/// `no_applicable_rule`.
pub fn rule_for(expected: TokenClass) -> Option<RepairRule> {
    match expected {
        TokenClass::BlockClose => Some(RepairRule::BalanceDelimiters),
        TokenClass::Equals => Some(RepairRule::InsertEquals),
        TokenClass::EndOfQuote => Some(RepairRule::CloseQuote),
        TokenClass::Value => Some(RepairRule::FixListSeparator),
        TokenClass::Identifier => Some(RepairRule::DropStrayToken),
        TokenClass::BlockOpen => None,
    }
}

/// One applied edit: where, which rule, and the before/after excerpts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAction {
    pub iteration: u32,
    pub rule: RepairRule,
    pub location: SourceSpan,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    BudgetExhausted,
    NoApplicableRule,
}

/// Result of a repair run. `success` implies the final text parses with no
/// error diagnostics and `final_failure` is absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub text: String,
    pub success: bool,
    pub actions: Vec<RepairAction>,
    pub iterations_used: usize,
    pub final_failure: Option<ParseFailure>,
    pub halt: Option<HaltReason>,
    /// Failure observed in each iteration, parallel to `actions`; kept so
    /// the ±2-line locality of every edit can be audited.
    pub observed_failures: Vec<ParseFailure>,
}

/// Repair `text` with the given iteration budget (≥ 1).
///
/// ```
/// let out = hitcheck::repair::repair("[Mesh]\n  type = GeneratedMesh\n", 8);
/// assert!(out.success);
/// assert_eq!(out.actions.len(), 1);
/// assert!(out.text.ends_with("[]\n"));
/// ```
pub fn repair(text: &str, budget: usize) -> RepairOutcome {
    let budget = budget.max(1);
    let mut current = text.to_owned();
    let mut actions = Vec::new();
    let mut observed = Vec::new();

    for iteration in 1..=budget + 1 {
        let failure = match hit::parse(&current) {
            Ok(_) => {
                return RepairOutcome {
                    text: current,
                    success: true,
                    iterations_used: actions.len(),
                    actions,
                    final_failure: None,
                    halt: None,
                    observed_failures: observed,
                };
            }
            Err(f) => f,
        };
        if iteration > budget {
            return RepairOutcome {
                text: current,
                success: false,
                iterations_used: actions.len(),
                actions,
                final_failure: Some(failure),
                halt: Some(HaltReason::BudgetExhausted),
                observed_failures: observed,
            };
        }
        let Some(rule) = rule_for(failure.expected) else {
            return RepairOutcome {
                text: current,
                success: false,
                iterations_used: actions.len(),
                actions,
                final_failure: Some(ParseFailure {
                    message: format!(
                        "{} (no applicable repair rule; table: balance_delimiters, \
                         insert_equals, normalize_quote, fix_list_separator, close_quote, \
                         drop_stray_token)",
                        failure.message
                    ),
                    ..failure
                }),
                halt: Some(HaltReason::NoApplicableRule),
                observed_failures: observed,
            };
        };
        let edit = plan_edit(&current, &failure, rule);
        debug_assert!(
            edit_within_window(&edit, &failure),
            "repair edit left the locality window"
        );
        let action = apply_edit(&mut current, edit, rule, iteration as u32);
        actions.push(action);
        observed.push(failure);
    }
    unreachable!("loop returns on success, budget exhaustion, or missing rule");
}

/// A planned text edit: replace `range` with `insert`.
struct Edit {
    range: std::ops::Range<usize>,
    insert: String,
    location: SourceSpan,
}

fn edit_within_window(edit: &Edit, failure: &ParseFailure) -> bool {
    let lo = failure.location.start_line.saturating_sub(LOCALITY_WINDOW_LINES);
    let hi = failure.location.end_line + LOCALITY_WINDOW_LINES;
    edit.location.start_line >= lo && edit.location.end_line <= hi
}

fn apply_edit(text: &mut String, edit: Edit, rule: RepairRule, iteration: u32) -> RepairAction {
    let before = text[edit.range.clone()].to_owned();
    let mut out = String::with_capacity(text.len() + edit.insert.len());
    out.push_str(&text[..edit.range.start]);
    out.push_str(&edit.insert);
    out.push_str(&text[edit.range.end..]);
    *text = out;
    RepairAction {
        iteration,
        rule,
        location: edit.location,
        before,
        after: edit.insert,
    }
}

fn plan_edit(text: &str, failure: &ParseFailure, rule: RepairRule) -> Edit {
    match rule {
        RepairRule::BalanceDelimiters => plan_balance(text, failure),
        RepairRule::InsertEquals => Edit {
            range: failure.location.byte_start..failure.location.byte_start,
            insert: "= ".to_owned(),
            location: failure.location,
        },
        RepairRule::CloseQuote => plan_close_quote(text, failure),
        RepairRule::FixListSeparator => plan_value_fix(text, failure),
        RepairRule::DropStrayToken => plan_drop_token(text, failure),
        RepairRule::NormalizeQuote => unreachable!("not reachable via rule_for"),
    }
}

/// Byte range of the line containing `byte` (exclusive of the newline).
fn line_bounds(text: &str, byte: usize) -> (usize, usize) {
    let start = text[..byte].rfind('\n').map_or(0, |i| i + 1);
    let end = text[byte..]
        .find('\n')
        .map_or(text.len(), |i| byte + i);
    (start, end)
}

/// Close the innermost unclosed block at end of file, matching the opener's
/// form and indentation. Always inserts; never deletes an opener.
fn plan_balance(text: &str, failure: &ParseFailure) -> Edit {
    let stack = hit::open_stack_at_failure(text);
    let (form, header) = stack
        .last()
        .cloned()
        .unwrap_or((BlockForm::Standard, failure.location));
    let closer = match form {
        BlockForm::Legacy => "[../]",
        _ => "[]",
    };
    // Reuse the opener's indentation when its line has nothing else before it.
    let (lstart, _) = line_bounds(text, header.byte_start);
    let prefix = &text[lstart..header.byte_start];
    let indent = if prefix.chars().all(|c| c == ' ' || c == '\t') {
        prefix
    } else {
        ""
    };
    let at = failure.location.byte_start;
    let mut insert = String::new();
    if !text.is_empty() && !text.ends_with('\n') {
        insert.push('\n');
    }
    insert.push_str(indent);
    insert.push_str(closer);
    insert.push('\n');
    Edit {
        range: at..at,
        insert,
        location: failure.location,
    }
}

/// First non-whitespace position after the `=` on the failure line, if any.
fn value_start_on_line(text: &str, failure_byte: usize) -> Option<usize> {
    let (lstart, lend) = line_bounds(text, failure_byte);
    let line = &text[lstart..lend.min(failure_byte.max(lstart))];
    let eq = line.rfind('=')?;
    let after = lstart + eq + 1;
    let mut at = after;
    for c in text[after..lend].chars() {
        if c == ' ' || c == '\t' {
            at += c.len_utf8();
        } else {
            break;
        }
    }
    Some(at)
}

fn col_of(text: &str, byte: usize) -> (u32, u32) {
    let line = text[..byte].matches('\n').count() as u32 + 1;
    let (lstart, _) = line_bounds(text, byte);
    let col = text[lstart..byte].chars().count() as u32 + 1;
    (line, col)
}

/// Insert the missing quote. An unterminated quote (failure points at the
/// opening character) is closed at the end of its opening line; a stray
/// quote inside a bare value gets its opener inserted at the value start.
fn plan_close_quote(text: &str, failure: &ParseFailure) -> Edit {
    let at = failure.location.byte_start;
    let quote = text[at..].chars().next().filter(|c| matches!(c, '\'' | '"'));
    let quote = quote.unwrap_or('\'');
    let vstart = value_start_on_line(text, at);
    let unterminated = vstart == Some(at);
    if unterminated || vstart.is_none() {
        let (_, lend) = line_bounds(text, at);
        let (line, col) = col_of(text, lend);
        Edit {
            range: lend..lend,
            insert: quote.to_string(),
            location: SourceSpan::point(line, col, lend),
        }
    } else {
        let vs = vstart.unwrap();
        let (line, col) = col_of(text, vs);
        Edit {
            range: vs..vs,
            insert: quote.to_string(),
            location: SourceSpan::point(line, col, vs),
        }
    }
}

/// Handle a `value` failure: convert a bracketed list to a quoted
/// space-separated list, drop a stray bracket inside a value, terminate an
/// open brace expression, or fill in an empty value.
fn plan_value_fix(text: &str, failure: &ParseFailure) -> Edit {
    let at = failure.location.byte_start;
    let next = text[at..].chars().next();
    match next {
        Some('[') if value_start_on_line(text, at) == Some(at) => {
            let (_, lend) = line_bounds(text, at);
            let line_after = &text[at..lend];
            let stop = line_after.find('#').unwrap_or(line_after.len());
            let close = line_after[..stop].find(']');
            let raw_end = at + close.map(|i| i + 1).unwrap_or(stop);
            let inner = text[at..raw_end]
                .trim_start_matches('[')
                .trim_end_matches(']');
            let tokens: Vec<&str> = inner
                .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
                .filter(|t| !t.is_empty())
                .collect();
            let (line, col) = col_of(text, at);
            Edit {
                range: at..raw_end,
                insert: format!("'{}'", tokens.join(" ")),
                location: SourceSpan {
                    start_line: line,
                    start_col: col,
                    end_line: line,
                    end_col: col + text[at..raw_end].chars().count() as u32 - 1,
                    byte_start: at,
                    byte_end: raw_end,
                },
            }
        }
        Some(c @ ('[' | ']')) => {
            let (line, col) = col_of(text, at);
            Edit {
                range: at..at + c.len_utf8(),
                insert: String::new(),
                location: SourceSpan {
                    start_line: line,
                    start_col: col,
                    end_line: line,
                    end_col: col,
                    byte_start: at,
                    byte_end: at + c.len_utf8(),
                },
            }
        }
        Some('$') => {
            let (_, lend) = line_bounds(text, at);
            let (line, col) = col_of(text, lend);
            Edit {
                range: lend..lend,
                insert: "}".to_owned(),
                location: SourceSpan::point(line, col, lend),
            }
        }
        _ => Edit {
            range: at..at,
            insert: "''".to_owned(),
            location: failure.location,
        },
    }
}

/// Delete the offending non-whitespace token.
fn plan_drop_token(text: &str, failure: &ParseFailure) -> Edit {
    let at = failure.location.byte_start;
    let mut end = at;
    for c in text[at..].chars() {
        if c.is_whitespace() {
            break;
        }
        end += c.len_utf8();
    }
    let (line, col) = col_of(text, at);
    Edit {
        range: at..end,
        insert: String::new(),
        location: SourceSpan {
            start_line: line,
            start_col: col,
            end_line: line,
            end_col: col + text[at..end].chars().count().saturating_sub(1) as u32,
            byte_start: at,
            byte_end: end,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_closer_is_appended() {
        let out = repair("[Mesh]\n type = GeneratedMesh\n", 8);
        assert!(out.success);
        assert_eq!(out.actions.len(), 1);
        assert_eq!(out.iterations_used, 1);
        assert_eq!(out.actions[0].rule, RepairRule::BalanceDelimiters);
        assert_eq!(out.text, "[Mesh]\n type = GeneratedMesh\n[]\n");
        // Re-parse oracle: the result is valid and the only diff is the closer.
        assert!(hit::parse(&out.text).is_ok());
    }

    #[test]
    fn already_valid_is_a_fixed_point() {
        let text = "[Mesh]\n type = GeneratedMesh\n[]\n";
        let out = repair(text, 8);
        assert!(out.success);
        assert!(out.actions.is_empty());
        assert_eq!(out.iterations_used, 0);
        assert_eq!(out.text, text);
    }

    #[test]
    fn unterminated_quote_closed_at_line_end() {
        let out = repair("[P]\n value = '1 2 3\n[]\n", 8);
        assert!(out.success);
        assert_eq!(out.actions[0].rule, RepairRule::CloseQuote);
        assert_eq!(out.text, "[P]\n value = '1 2 3'\n[]\n");
    }

    #[test]
    fn stray_quote_gets_opener_at_value_start() {
        let out = repair("[P]\n value = 1 2 3'\n[]\n", 8);
        assert!(out.success);
        assert_eq!(out.actions[0].rule, RepairRule::CloseQuote);
        assert_eq!(out.text, "[P]\n value = '1 2 3'\n[]\n");
    }

    #[test]
    fn missing_equals_inserted() {
        let out = repair("[Mesh]\n type GeneratedMesh\n[]\n", 8);
        assert!(out.success);
        assert_eq!(out.actions[0].rule, RepairRule::InsertEquals);
        assert_eq!(out.text, "[Mesh]\n type = GeneratedMesh\n[]\n");
    }

    #[test]
    fn bracket_list_rewritten() {
        let out = repair("[P]\n vals = [1, 2, 3]\n[]\n", 8);
        assert!(out.success);
        assert_eq!(out.actions[0].rule, RepairRule::FixListSeparator);
        assert_eq!(out.text, "[P]\n vals = '1 2 3'\n[]\n");
    }

    #[test]
    fn empty_value_filled() {
        let out = repair("[P]\n vals =\n[]\n", 8);
        assert!(out.success);
        assert_eq!(out.text, "[P]\n vals =''\n[]\n");
    }

    #[test]
    fn markdown_fence_dropped() {
        let out = repair("```moose\n[Mesh]\n[]\n```\n", 8);
        assert!(out.success);
        assert_eq!(out.actions.len(), 2);
        assert!(out.actions.iter().all(|a| a.rule == RepairRule::DropStrayToken));
        assert_eq!(out.text, "\n[Mesh]\n[]\n\n");
    }

    #[test]
    fn legacy_block_closed_with_legacy_form() {
        let out = repair("[Kernels]\n  [./diff]\n    type = Diffusion\n", 8);
        assert!(out.success);
        assert_eq!(out.actions.len(), 2);
        assert_eq!(out.text.matches("[../]").count(), 1);
        assert!(hit::parse(&out.text).is_ok());
    }

    #[test]
    fn budget_exhaustion_reports_final_failure() {
        // Ten missing closers with a budget of 3.
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("[B{i}]\n"));
        }
        let out = repair(&text, 3);
        assert!(!out.success);
        assert_eq!(out.halt, Some(HaltReason::BudgetExhausted));
        assert_eq!(out.actions.len(), 3);
        assert!(out.final_failure.is_some());
    }

    #[test]
    fn malformed_header_has_no_rule() {
        let out = repair("[Me sh]\n[]\n", 8);
        assert!(!out.success);
        assert_eq!(out.halt, Some(HaltReason::NoApplicableRule));
        assert!(out.actions.is_empty());
        let f = out.final_failure.unwrap();
        assert!(f.message.contains("balance_delimiters"));
    }

    #[test]
    fn determinism() {
        let text = "[A]\n x 1\n v = [1,2]\n";
        let a = repair(text, 8);
        let b = repair(text, 8);
        assert_eq!(a, b);
    }

    #[test]
    fn locality_of_all_actions() {
        let cases = [
            "[Mesh]\n type = GeneratedMesh\n",
            "[P]\n value = '1 2 3\n[]\n",
            "[P]\n vals = [1, 2, 3]\n[]\n",
            "```moose\n[Mesh]\n[]\n```\n",
            "[Mesh]\n type GeneratedMesh\n[]\n",
        ];
        for text in cases {
            let out = repair(text, 8);
            assert!(out.success, "{text:?}");
            for (action, failure) in out.actions.iter().zip(&out.observed_failures) {
                let lo = failure.location.start_line.saturating_sub(LOCALITY_WINDOW_LINES);
                let hi = failure.location.end_line + LOCALITY_WINDOW_LINES;
                assert!(
                    action.location.start_line >= lo && action.location.end_line <= hi,
                    "action {action:?} outside window of {failure:?}"
                );
            }
        }
    }

    #[test]
    fn parsed_prefix_blocks_survive() {
        let text = "[A]\n  x = 1\n[]\n\n[B]\n  y = 2\n[]\n\n[C]\n  z = '1 2\n[]\n";
        let (done, _) = hit::parse_prefix(text);
        let out = repair(text, 8);
        assert!(out.success);
        for span in done {
            let original = span.slice(text);
            assert!(out.text.contains(original));
        }
    }
}
