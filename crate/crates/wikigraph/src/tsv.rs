//! Tab-separated output tables: field escaping and header-checked I/O.
//!
//! Every table this crate writes is UTF-8, LF-terminated, one header row,
//! fields separated by a single tab. Three byte sequences are escaped inside
//! fields so that any string round-trips bit-exactly:
//!
//! | in field  | on disk |
//! |-----------|---------|
//! | tab       | `\t`    |
//! | newline   | `\n`    |
//! | backslash | `\\`    |
//!
//! Nothing else is transformed; carriage returns, quotes and control bytes
//! pass through verbatim.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: missing header row")]
    MissingHeader { path: String },
    #[error("{path}: header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        path: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    FieldCount {
        path: String,
        line: u64,
        expected: usize,
        found: usize,
    },
}

/// Escape one field for a tab-separated row.
pub fn escape_field(raw: &str) -> String {
    if !raw.contains(['\t', '\n', '\\']) {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len() + 4);
    for c in raw.chars() {
        match c {
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\\' => out.push_str("\\\\"),
            _ => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_field`]. Unknown escapes and a trailing lone
/// backslash are preserved verbatim so that foreign files stay readable.
pub fn unescape_field(escaped: &str) -> String {
    if !escaped.contains('\\') {
        return escaped.to_string();
    }
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Split one physical line into unescaped fields.
pub fn split_line(line: &str) -> Vec<String> {
    line.split('\t').map(unescape_field).collect()
}

/// Join fields into one physical line (no trailing newline).
pub fn join_fields<S: AsRef<str>>(fields: &[S]) -> String {
    fields
        .iter()
        .map(|f| escape_field(f.as_ref()))
        .collect::<Vec<_>>()
        .join("\t")
}

/// Buffered writer that emits the header row on creation.
pub struct TsvWriter<W: Write> {
    out: W,
    path: String,
    columns: usize,
    rows: u64,
}

impl TsvWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, TsvError> {
        let file = File::create(path).map_err(|e| TsvError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_writer(BufWriter::new(file), &path.display().to_string(), header)
    }
}

impl<W: Write> TsvWriter<W> {
    pub fn from_writer(out: W, path: &str, header: &[&str]) -> Result<Self, TsvError> {
        let mut w = TsvWriter {
            out,
            path: path.to_string(),
            columns: header.len(),
            rows: 0,
        };
        w.write_raw(&join_fields(header))?;
        Ok(w)
    }

    fn write_raw(&mut self, line: &str) -> Result<(), TsvError> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| TsvError::Io {
                path: self.path.clone(),
                source: e,
            })
    }

    pub fn write_row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<(), TsvError> {
        debug_assert_eq!(fields.len(), self.columns, "row width drifted from header");
        self.rows += 1;
        self.write_raw(&join_fields(fields))
    }

    /// Rows written so far, excluding the header.
    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn finish(mut self) -> Result<u64, TsvError> {
        self.out.flush().map_err(|e| TsvError::Io {
            path: self.path.clone(),
            source: e,
        })?;
        Ok(self.rows)
    }
}

/// Buffered reader that validates the header row and field counts.
pub struct TsvReader<R: BufRead> {
    input: R,
    path: String,
    header: Vec<String>,
    line: u64,
    buf: String,
}

impl TsvReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, TsvError> {
        let file = File::open(path).map_err(|e| TsvError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_reader(BufReader::new(file), &path.display().to_string())
    }

    /// Open and assert the exact header.
    pub fn open_expecting(path: &Path, header: &[&str]) -> Result<Self, TsvError> {
        let reader = Self::open(path)?;
        reader.expect_header(header)?;
        Ok(reader)
    }
}

impl<R: BufRead> TsvReader<R> {
    pub fn from_reader(mut input: R, path: &str) -> Result<Self, TsvError> {
        let mut first = String::new();
        let n = input.read_line(&mut first).map_err(|e| TsvError::Io {
            path: path.to_string(),
            source: e,
        })?;
        if n == 0 {
            return Err(TsvError::MissingHeader {
                path: path.to_string(),
            });
        }
        strip_newline(&mut first);
        Ok(TsvReader {
            input,
            path: path.to_string(),
            header: split_line(&first),
            line: 1,
            buf: String::new(),
        })
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<(), TsvError> {
        if self.header.len() != expected.len()
            || self.header.iter().zip(expected).any(|(a, b)| a != b)
        {
            return Err(TsvError::HeaderMismatch {
                path: self.path.clone(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: self.header.clone(),
            });
        }
        Ok(())
    }

    /// Read the next row; `None` at end of file. Rows must match the header
    /// width exactly.
    pub fn next_row(&mut self) -> Result<Option<Vec<String>>, TsvError> {
        self.buf.clear();
        let n = self.input.read_line(&mut self.buf).map_err(|e| TsvError::Io {
            path: self.path.clone(),
            source: e,
        })?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        strip_newline(&mut self.buf);
        let fields = split_line(&self.buf);
        if fields.len() != self.header.len() {
            return Err(TsvError::FieldCount {
                path: self.path.clone(),
                line: self.line,
                expected: self.header.len(),
                found: fields.len(),
            });
        }
        Ok(Some(fields))
    }
}

fn strip_newline(s: &mut String) {
    if s.ends_with('\n') {
        s.pop();
    }
}
