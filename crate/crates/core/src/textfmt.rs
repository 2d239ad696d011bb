//! Line-oriented `key value...` text records used for model artifacts.
//!
//! Floats are written in shortest round-trip scientific notation, so reading
//! a record back reproduces every value bit for bit.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: expected {expected}, found {found:?}")]
    Unexpected {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("unexpected end of input, expected {0}")]
    Eof(String),
    #[error("unsupported format {found:?}, expected {expected:?}")]
    Version { expected: String, found: String },
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Default)]
pub struct RecordWriter {
    out: String,
}

impl RecordWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn line(&mut self, text: &str) -> &mut Self {
        self.out.push_str(text);
        self.out.push('\n');
        self
    }

    pub fn usize(&mut self, key: &str, v: usize) -> &mut Self {
        let _ = writeln!(self.out, "{key} {v}");
        self
    }

    pub fn str(&mut self, key: &str, v: &str) -> &mut Self {
        let _ = writeln!(self.out, "{key} {v}");
        self
    }

    pub fn f64s(&mut self, key: &str, values: &[f64]) -> &mut Self {
        self.out.push_str(key);
        for v in values {
            let _ = write!(self.out, " {v:e}");
        }
        self.out.push('\n');
        self
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.out)
    }
}

/// Sequential reader over records; blank lines and `#` comments are skipped.
pub struct RecordReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> RecordReader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    fn next_line(&mut self, expected: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.lines.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(FormatError::Eof(expected.to_string()))
    }

    /// Requires the next line to be exactly `header`.
    pub fn expect_line(&mut self, header: &str) -> Result<()> {
        let (line, t) = self.next_line(header)?;
        if t == header {
            Ok(())
        } else {
            let tag = header.split_whitespace().next().unwrap_or(header);
            if t.split_whitespace().next() == Some(tag) {
                Err(FormatError::Version {
                    expected: header.to_string(),
                    found: t.to_string(),
                })
            } else {
                Err(FormatError::Unexpected {
                    line,
                    expected: header.to_string(),
                    found: t.to_string(),
                })
            }
        }
    }

    /// Key of the next record without consuming it.
    pub fn peek_key(&mut self) -> Option<&'a str> {
        while let Some((_, line)) = self.lines.peek() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                self.lines.next();
                continue;
            }
            return t.split_whitespace().next();
        }
        None
    }

    fn field(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, t) = self.next_line(key)?;
        let mut parts = t.split_whitespace();
        if parts.next() != Some(key) {
            return Err(FormatError::Unexpected {
                line,
                expected: key.to_string(),
                found: t.to_string(),
            });
        }
        Ok((line, parts.collect()))
    }

    pub fn str(&mut self, key: &str) -> Result<String> {
        let (_, parts) = self.field(key)?;
        Ok(parts.join(" "))
    }

    pub fn usize(&mut self, key: &str) -> Result<usize> {
        let (line, parts) = self.field(key)?;
        match parts.as_slice() {
            [v] => v.parse().map_err(|_| FormatError::Unexpected {
                line,
                expected: format!("{key} <integer>"),
                found: v.to_string(),
            }),
            _ => Err(FormatError::Unexpected {
                line,
                expected: format!("{key} <integer>"),
                found: parts.join(" "),
            }),
        }
    }

    pub fn f64s(&mut self, key: &str) -> Result<Vec<f64>> {
        let (line, parts) = self.field(key)?;
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FormatError::Unexpected {
                        line,
                        expected: "finite number".to_string(),
                        found: p.to_string(),
                    })
            })
            .collect()
    }

    pub fn f64s_len(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let v = self.f64s(key)?;
        if v.len() != len {
            return Err(FormatError::Inconsistent(format!(
                "{key} has {} values, expected {len}",
                v.len()
            )));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let values = [0.1, -1e-300, 123456.789, f64::MIN_POSITIVE, 1.0 / 3.0];
        let text = RecordWriter::new()
            .line("thing v1")
            .usize("n", 5)
            .f64s("values", &values)
            .finish();
        let mut r = RecordReader::new(&text);
        r.expect_line("thing v1").unwrap();
        assert_eq!(r.usize("n").unwrap(), 5);
        let back = r.f64s_len("values", 5).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn version_mismatch_detected() {
        let mut r = RecordReader::new("thing v2\n");
        assert!(matches!(
            r.expect_line("thing v1"),
            Err(FormatError::Version { .. })
        ));
    }
}
