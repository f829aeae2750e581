//! Source locations for parsed input.

use serde::{Deserialize, Serialize};

/// A contiguous region of source text.
///
/// Lines and columns are 1-based and counted in Unicode scalar values; the
/// end line/column is inclusive. Byte offsets are half-open (`byte_start`
/// up to but excluding `byte_end`) so that `&text[byte_start..byte_end]`
/// is the exact spanned slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl SourceSpan {
    /// A zero-width span at a single position, used for point failures
    /// (end-of-file, insertion points).
    pub fn point(line: u32, col: u32, byte: usize) -> Self {
        SourceSpan {
            start_line: line,
            start_col: col,
            end_line: line,
            end_col: col,
            byte_start: byte,
            byte_end: byte,
        }
    }

    /// Merge two spans into the smallest span covering both.
    pub fn cover(self, other: SourceSpan) -> SourceSpan {
        let (start_line, start_col, byte_start) = if self.byte_start <= other.byte_start {
            (self.start_line, self.start_col, self.byte_start)
        } else {
            (other.start_line, other.start_col, other.byte_start)
        };
        let (end_line, end_col, byte_end) = if self.byte_end >= other.byte_end {
            (self.end_line, self.end_col, self.byte_end)
        } else {
            (other.end_line, other.end_col, other.byte_end)
        };
        SourceSpan {
            start_line,
            start_col,
            end_line,
            end_col,
            byte_start,
            byte_end,
        }
    }

    /// True when `other` lies entirely within `self`.
    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.byte_start <= other.byte_start && other.byte_end <= self.byte_end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.byte_start..self.byte_end]
    }
}

impl std::fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.start_line == self.end_line && self.start_col == self.end_col {
            write!(f, "{}:{}", self.start_line, self.start_col)
        } else {
            write!(
                f,
                "{}:{}-{}:{}",
                self.start_line, self.start_col, self.end_line, self.end_col
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cover_takes_extremes() {
        let a = SourceSpan {
            start_line: 1,
            start_col: 2,
            end_line: 1,
            end_col: 5,
            byte_start: 1,
            byte_end: 5,
        };
        let b = SourceSpan {
            start_line: 2,
            start_col: 1,
            end_line: 2,
            end_col: 3,
            byte_start: 6,
            byte_end: 9,
        };
        let c = a.cover(b);
        assert_eq!(c.byte_start, 1);
        assert_eq!(c.byte_end, 9);
        assert_eq!(c.start_line, 1);
        assert_eq!(c.end_line, 2);
    }

    #[test]
    fn point_is_empty() {
        let p = SourceSpan::point(3, 1, 10);
        assert_eq!(p.byte_start, p.byte_end);
        assert_eq!(format!("{p}"), "3:1");
    }
}
