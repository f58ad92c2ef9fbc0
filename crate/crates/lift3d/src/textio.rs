//! Crate-internal helpers for the line-oriented text formats (datasets,
//! landmark files, checkpoints): a comment/blank-skipping line cursor and
//! small parsers that produce located errors.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Formats a value with 17 significant digits (lossless for `f64`).
pub(crate) fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Lower-case hex SHA-256 of `bytes`.
pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Cursor over significant lines: skips blanks and `#` comments, tracks
/// 1-based line numbers, and reports truncation as [`Error::CorruptFile`].
pub(crate) struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { iter: text.lines().enumerate() }
    }

    /// Next significant line as `(1-based number, trimmed content)`.
    pub(crate) fn next_significant(&mut self) -> Option<(usize, &'a str)> {
        for (idx, raw) in self.iter.by_ref() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some((idx + 1, trimmed));
        }
        None
    }

    /// Like [`Self::next_significant`] but treats EOF as truncation.
    pub(crate) fn next_required(&mut self, context: &str) -> Result<(usize, &'a str)> {
        self.next_significant().ok_or_else(|| {
            Error::CorruptFile(format!(
                "unexpected end of file while reading {context}; the file appears truncated"
            ))
        })
    }

    /// Rejects any further significant content.
    pub(crate) fn expect_eof(&mut self, after: &str) -> Result<()> {
        if let Some((line_no, line)) = self.next_significant() {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("unexpected content after {after}: '{line}'"),
            });
        }
        Ok(())
    }
}

/// Consumes the magic header line. A line that begins with `family` but is
/// not exactly `magic` is a version mismatch; anything else is a parse error.
pub(crate) fn expect_magic(lines: &mut Lines<'_>, magic: &str, family: &str) -> Result<()> {
    let (line_no, line) = lines.next_required("the format header")?;
    if line == magic {
        return Ok(());
    }
    if line.starts_with(family) {
        return Err(Error::FormatVersionMismatch(format!(
            "unsupported format version '{line}'; this build reads '{magic}'"
        )));
    }
    Err(Error::ParseError {
        line: line_no,
        message: format!("expected header '{magic}', found '{line}'"),
    })
}

/// Parses a `<key> <usize>` header line.
pub(crate) fn parse_header_usize(lines: &mut Lines<'_>, key: &str) -> Result<usize> {
    let (line_no, line) = lines.next_required(&format!("the '{key}' header"))?;
    let rest = header_rest(line, line_no, key)?;
    rest.parse::<usize>().map_err(|_| Error::ParseError {
        line: line_no,
        message: format!("'{key}' must be a non-negative integer, got '{rest}'"),
    })
}

/// Parses a `<key> <free text>` header line (the text may be empty).
pub(crate) fn parse_header_rest(lines: &mut Lines<'_>, key: &str) -> Result<String> {
    let (line_no, line) = lines.next_required(&format!("the '{key}' header"))?;
    Ok(header_rest(line, line_no, key)?.to_string())
}

/// Strips `key` plus whitespace from the front of `line`.
pub(crate) fn header_rest<'a>(line: &'a str, line_no: usize, key: &str) -> Result<&'a str> {
    match line.strip_prefix(key) {
        Some("") => Ok(""),
        Some(rest) if rest.starts_with(char::is_whitespace) => Ok(rest.trim()),
        _ => Err(Error::ParseError {
            line: line_no,
            message: format!("expected '{key} <value>', found '{line}'"),
        }),
    }
}

/// Parses every whitespace-separated token on `line` as an `f64`.
pub(crate) fn parse_floats(line: &str, line_no: usize, context: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|token| {
            token.parse::<f64>().map_err(|_| Error::ParseError {
                line: line_no,
                message: format!("{context}: '{token}' is not a number"),
            })
        })
        .collect()
}

/// Consumes the literal `end` trailer line and rejects trailing content.
pub(crate) fn expect_end(lines: &mut Lines<'_>, after: &str) -> Result<()> {
    let (line_no, line) = lines.next_required(&format!("the 'end' line after the {after}"))?;
    if line != "end" {
        return Err(Error::ParseError {
            line: line_no,
            message: format!("expected 'end' after the {after}, found '{line}'"),
        });
    }
    lines.expect_eof("'end'")
}
