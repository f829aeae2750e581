//! Hand-rolled scanner and recursive-descent parser for HIT.

use super::{
    is_ident_char, BlockForm, BlockNode, CloseForm, Diagnostic, Directive, Item, Param,
    ParseFailure, Severity, SyntaxTree, TokenClass, ValueKind,
};
use crate::span::SourceSpan;

/// Byte position paired with its 1-based line/column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    byte: usize,
    line: u32,
    col: u32,
}

struct Scanner<'a> {
    text: &'a str,
    pos: Pos,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner {
            text,
            pos: Pos {
                byte: 0,
                line: 1,
                col: 1,
            },
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos.byte..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.text[self.pos.byte..].chars();
        it.next();
        it.next()
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos.byte..]
    }

    fn at_eof(&self) -> bool {
        self.pos.byte >= self.text.len()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos.byte += c.len_utf8();
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn save(&self) -> Pos {
        self.pos
    }

    fn restore(&mut self, pos: Pos) {
        self.pos = pos;
    }

    fn slice(&self, from: Pos) -> &'a str {
        &self.text[from.byte..self.pos.byte]
    }

    fn point(&self) -> SourceSpan {
        SourceSpan::point(self.pos.line, self.pos.col, self.pos.byte)
    }

    fn span_from(&self, start: Pos) -> SourceSpan {
        // End line/col name the last character of the region (inclusive),
        // which is the position just before the current one on this line.
        SourceSpan {
            start_line: start.line,
            start_col: start.col,
            end_line: self.pos.line,
            end_col: self.pos.col.saturating_sub(1).max(1),
            byte_start: start.byte,
            byte_end: self.pos.byte,
        }
    }
}

/// Short excerpt of the offending text for failure messages.
fn excerpt(rest: &str) -> String {
    if rest.is_empty() {
        return "end of file".to_owned();
    }
    let first_line = rest.lines().next().unwrap_or(rest);
    let cut: String = first_line.chars().take(16).collect();
    if cut.is_empty() {
        "end of line".to_owned()
    } else {
        cut
    }
}

enum HeaderToken {
    Open { name: String, form: BlockForm },
    Close { form: CloseForm },
}

struct Parser<'a> {
    sc: Scanner<'a>,
    diagnostics: Vec<Diagnostic>,
    /// Spans of top-level blocks completed before any failure; supports
    /// prefix analysis of unparsable text.
    completed_top_level: Vec<SourceSpan>,
    /// Headers of blocks currently open; left populated when parsing fails,
    /// so repair can close them in the right form.
    open_stack: Vec<(BlockForm, SourceSpan)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            sc: Scanner::new(text),
            diagnostics: Vec::new(),
            completed_top_level: Vec::new(),
            open_stack: Vec::new(),
        }
    }

    /// Consume whitespace and `#` comments, returning them verbatim.
    fn take_trivia(&mut self) -> String {
        let start = self.sc.save();
        loop {
            match self.sc.peek() {
                Some(c) if c.is_whitespace() => {
                    self.sc.bump();
                }
                Some('#') => {
                    while let Some(c) = self.sc.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.sc.bump();
                    }
                }
                _ => break,
            }
        }
        self.sc.slice(start).to_owned()
    }

    fn ident(&mut self) -> String {
        let start = self.sc.save();
        while let Some(c) = self.sc.peek() {
            if is_ident_char(c) {
                self.sc.bump();
            } else {
                break;
            }
        }
        self.sc.slice(start).to_owned()
    }

    fn header(&mut self) -> Result<(HeaderToken, SourceSpan), ParseFailure> {
        let start = self.sc.save();
        let fail = |sc: &Scanner<'a>, msg: &str| ParseFailure {
            location: SourceSpan::point(start.line, start.col, start.byte),
            expected: TokenClass::BlockOpen,
            found: excerpt(&sc.text[start.byte..]),
            message: msg.to_owned(),
        };
        self.sc.bump(); // consume '['
        match self.sc.peek() {
            Some(']') => {
                self.sc.bump();
                Ok((
                    HeaderToken::Close {
                        form: CloseForm::Standard,
                    },
                    self.sc.span_from(start),
                ))
            }
            Some('.') => {
                if self.sc.rest().starts_with("../]") {
                    for _ in 0..4 {
                        self.sc.bump();
                    }
                    return Ok((
                        HeaderToken::Close {
                            form: CloseForm::Legacy,
                        },
                        self.sc.span_from(start),
                    ));
                }
                if self.sc.rest().starts_with("./") && self.sc.peek2() == Some('/') {
                    self.sc.bump();
                    self.sc.bump();
                    let name = self.ident();
                    if name.is_empty() {
                        return Err(fail(&self.sc, "malformed block header: missing name"));
                    }
                    if self.sc.peek() != Some(']') {
                        return Err(fail(&self.sc, "malformed block header: missing ']'"));
                    }
                    self.sc.bump();
                    return Ok((
                        HeaderToken::Open {
                            name,
                            form: BlockForm::Legacy,
                        },
                        self.sc.span_from(start),
                    ));
                }
                Err(fail(&self.sc, "malformed block header"))
            }
            Some(c) if is_ident_char(c) => {
                let name = self.ident();
                if self.sc.peek() != Some(']') {
                    return Err(fail(&self.sc, "malformed block header: missing ']'"));
                }
                self.sc.bump();
                Ok((
                    HeaderToken::Open {
                        name,
                        form: BlockForm::Standard,
                    },
                    self.sc.span_from(start),
                ))
            }
            _ => Err(fail(&self.sc, "malformed block header")),
        }
    }

    fn quoted_value(&mut self, quote: char) -> Result<(String, ValueKind), ParseFailure> {
        let start = self.sc.save();
        self.sc.bump(); // opening quote
        loop {
            match self.sc.bump() {
                Some(c) if c == quote => break,
                Some(_) => {}
                None => {
                    return Err(ParseFailure {
                        location: SourceSpan::point(start.line, start.col, start.byte),
                        expected: TokenClass::EndOfQuote,
                        found: excerpt(&self.sc.text[start.byte..]),
                        message: "unterminated quoted value".to_owned(),
                    });
                }
            }
        }
        let kind = if quote == '\'' {
            ValueKind::SingleQuoted
        } else {
            ValueKind::DoubleQuoted
        };
        Ok((self.sc.slice(start).to_owned(), kind))
    }

    /// Scan a bare value to end of line or comment. Brace expressions
    /// `${...}` pass through opaquely (nested braces allowed, and `#`
    /// inside one does not start a comment). Quote characters and square
    /// brackets outside a brace expression are failures.
    fn bare_value(&mut self) -> Result<String, ParseFailure> {
        let start = self.sc.save();
        let mut last_non_ws = self.sc.save();
        loop {
            match self.sc.peek() {
                None | Some('\n') | Some('#') => break,
                Some('$') if self.sc.peek2() == Some('{') => {
                    let brace_start = self.sc.save();
                    self.sc.bump();
                    self.sc.bump();
                    let mut depth = 1;
                    loop {
                        match self.sc.bump() {
                            Some('{') => depth += 1,
                            Some('}') => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            Some(_) => {}
                            None => {
                                return Err(ParseFailure {
                                    location: SourceSpan::point(
                                        brace_start.line,
                                        brace_start.col,
                                        brace_start.byte,
                                    ),
                                    expected: TokenClass::Value,
                                    found: excerpt(&self.sc.text[brace_start.byte..]),
                                    message: "unterminated brace expression".to_owned(),
                                });
                            }
                        }
                    }
                    last_non_ws = self.sc.save();
                }
                Some(c @ ('\'' | '"')) => {
                    let at = self.sc.save();
                    return Err(ParseFailure {
                        location: SourceSpan::point(at.line, at.col, at.byte),
                        expected: TokenClass::EndOfQuote,
                        found: c.to_string(),
                        message: "stray quote in unquoted value".to_owned(),
                    });
                }
                Some(c @ ('[' | ']')) => {
                    let at = self.sc.save();
                    return Err(ParseFailure {
                        location: SourceSpan::point(at.line, at.col, at.byte),
                        expected: TokenClass::Value,
                        found: c.to_string(),
                        message: "brackets are not valid in unquoted values".to_owned(),
                    });
                }
                Some(c) => {
                    self.sc.bump();
                    if !c.is_whitespace() {
                        last_non_ws = self.sc.save();
                    }
                }
            }
        }
        // Trailing spaces belong to the following trivia, not the value.
        self.sc.restore(last_non_ws);
        Ok(self.sc.slice(start).to_owned())
    }

    fn param(&mut self, leading_trivia: String) -> Result<Param, ParseFailure> {
        let key_start = self.sc.save();
        let key = self.ident();
        let pre_start = self.sc.save();
        while matches!(self.sc.peek(), Some(' ' | '\t')) {
            self.sc.bump();
        }
        let pre_eq = self.sc.slice(pre_start).to_owned();
        if self.sc.peek() != Some('=') {
            return Err(ParseFailure {
                location: self.sc.point(),
                expected: TokenClass::Equals,
                found: excerpt(self.sc.rest()),
                message: format!("expected '=' after parameter key `{key}`"),
            });
        }
        self.sc.bump();
        let post_start = self.sc.save();
        while matches!(self.sc.peek(), Some(' ' | '\t')) {
            self.sc.bump();
        }
        let post_eq = self.sc.slice(post_start).to_owned();

        let value_start = self.sc.save();
        let (value_raw, value_kind) = match self.sc.peek() {
            None | Some('\n') | Some('#') => {
                return Err(ParseFailure {
                    location: self.sc.point(),
                    expected: TokenClass::Value,
                    found: excerpt(self.sc.rest()),
                    message: format!("parameter `{key}` has no value"),
                });
            }
            Some(q @ ('\'' | '"')) => self.quoted_value(q)?,
            _ => (self.bare_value()?, ValueKind::Bare),
        };
        let value_span = self.sc.span_from(value_start);
        let span = self.sc.span_from(key_start);
        Ok(Param {
            key,
            value_raw,
            value_kind,
            span,
            value_span,
            leading_trivia,
            pre_eq,
            post_eq,
        })
    }

    /// Parse the body of a block (or the document root). Returns the items,
    /// the trivia before the closer, the close form, and the full span end.
    fn body(
        &mut self,
        path: &str,
        is_root: bool,
    ) -> Result<(Vec<Item>, String, CloseForm), ParseFailure> {
        let mut items: Vec<Item> = Vec::new();
        let mut seen_keys: Vec<String> = Vec::new();
        loop {
            let trivia = self.take_trivia();
            if self.sc.at_eof() {
                if is_root {
                    return Ok((items, trivia, CloseForm::Root));
                }
                return Err(ParseFailure {
                    location: self.sc.point(),
                    expected: TokenClass::BlockClose,
                    found: "end of file".to_owned(),
                    message: format!("block `{path}` is never closed"),
                });
            }
            let c = self.sc.peek().unwrap();
            if c == '[' {
                let header_start = self.sc.save();
                let (tok, header_span) = self.header()?;
                match tok {
                    HeaderToken::Close { form } => {
                        if is_root {
                            // A closer with no open block is a stray token.
                            self.sc.restore(header_start);
                            return Err(ParseFailure {
                                location: SourceSpan::point(
                                    header_start.line,
                                    header_start.col,
                                    header_start.byte,
                                ),
                                expected: TokenClass::Identifier,
                                found: excerpt(self.sc.rest()),
                                message: "block close without a matching open".to_owned(),
                            });
                        }
                        return Ok((items, trivia, form));
                    }
                    HeaderToken::Open { name, form } => {
                        let child_path = if path == "/" {
                            format!("/{name}")
                        } else {
                            format!("{path}/{name}")
                        };
                        self.open_stack.push((form, header_span));
                        let (child_items, close_trivia, close_form) =
                            self.body(&child_path, false)?;
                        self.open_stack.pop();
                        let end = self.sc.save();
                        let span = SourceSpan {
                            start_line: header_span.start_line,
                            start_col: header_span.start_col,
                            end_line: end.line,
                            end_col: end.col.saturating_sub(1).max(1),
                            byte_start: header_span.byte_start,
                            byte_end: end.byte,
                        };
                        if is_root {
                            self.completed_top_level.push(span);
                        }
                        items.push(Item::Block(BlockNode {
                            name,
                            path: child_path,
                            open_form: form,
                            close_form,
                            items: child_items,
                            span,
                            leading_trivia: trivia,
                            close_trivia,
                        }));
                    }
                }
            } else if is_ident_char(c) {
                let param = self.param(trivia)?;
                if seen_keys.iter().any(|k| k == &param.key) {
                    self.diagnostics.push(Diagnostic {
                        severity: Severity::Warning,
                        span: param.span,
                        message: format!(
                            "duplicate parameter `{}` in block `{}` (last occurrence wins)",
                            param.key, path
                        ),
                    });
                } else {
                    seen_keys.push(param.key.clone());
                }
                items.push(Item::Param(param));
            } else if c == '!' && self.sc.rest().starts_with("!include") {
                let start = self.sc.save();
                while let Some(ch) = self.sc.peek() {
                    if ch == '\n' {
                        break;
                    }
                    self.sc.bump();
                }
                items.push(Item::Directive(Directive {
                    text: self.sc.slice(start).to_owned(),
                    span: self.sc.span_from(start),
                    leading_trivia: trivia,
                }));
            } else {
                return Err(ParseFailure {
                    location: self.sc.point(),
                    expected: TokenClass::Identifier,
                    found: excerpt(self.sc.rest()),
                    message: "stray token".to_owned(),
                });
            }
        }
    }
}

pub(super) fn parse_document(text: &str) -> Result<SyntaxTree, ParseFailure> {
    let mut p = Parser::new(text);
    let (items, close_trivia, _) = p.body("/", true)?;
    let end = p.sc.save();
    let root = BlockNode {
        name: String::new(),
        path: "/".to_owned(),
        open_form: BlockForm::Root,
        close_form: CloseForm::Root,
        items,
        span: SourceSpan {
            start_line: 1,
            start_col: 1,
            end_line: end.line,
            end_col: end.col.saturating_sub(1).max(1),
            byte_start: 0,
            byte_end: text.len(),
        },
        leading_trivia: String::new(),
        close_trivia,
    };
    Ok(SyntaxTree::new(text.to_owned(), root, p.diagnostics))
}

/// Parse as far as possible, returning the spans of top-level blocks that
/// completed before the first failure (empty when the whole text parses).
///
/// Repair uses this to check that already-valid regions survive edits.
pub fn parse_prefix(text: &str) -> (Vec<SourceSpan>, Option<ParseFailure>) {
    let mut p = Parser::new(text);
    match p.body("/", true) {
        Ok(_) => (p.completed_top_level, None),
        Err(f) => (p.completed_top_level, Some(f)),
    }
}

/// The stack of still-open block headers (outermost first) at the point
/// parsing stopped. Empty when the text parses.
pub(crate) fn open_stack_at_failure(text: &str) -> Vec<(BlockForm, SourceSpan)> {
    let mut p = Parser::new(text);
    match p.body("/", true) {
        Ok(_) => Vec::new(),
        Err(_) => p.open_stack,
    }
}
