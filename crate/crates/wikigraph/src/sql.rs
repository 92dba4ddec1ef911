//! Streaming parser for MySQL dump files as published for MediaWiki tables.
//!
//! A dump file is a sequence of SQL statements. Only multi-row `INSERT`
//! statements carry data; `CREATE TABLE`, `DROP`, `LOCK`, session `SET`s and
//! comments are skipped (with quote-awareness, so a `;` inside a string
//! never terminates a statement early). Rows are yielded one at a time;
//! memory use is bounded by the longest single row, not the file.
//!
//! Value literals follow what `mysqldump` emits:
//!
//! - single-quoted strings with the backslash escapes `\'` `\"` `\\` `\n`
//!   `\t` `\r` `\0` (any other escape is an error — the dumps never produce
//!   one, so seeing one means the input is corrupt);
//! - decimal integers and floats;
//! - `NULL` (case-insensitive);
//! - `0x…` hex blobs, decoded to bytes and then to text via lossy UTF-8.
//!
//! [`emit_insert`] is the exact inverse used by tests and fixture
//! generators: `parse(emit(rows)) == rows`.

use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SqlError {
    #[error("I/O error while reading dump: {0}")]
    Io(#[from] io::Error),
    #[error("malformed statement at byte {offset}: {detail}")]
    MalformedStatement { offset: u64, detail: String },
    #[error(
        "column count mismatch in INSERT statement #{statement}, row {row}: \
         table `{table}` has {expected} columns, row has {found}"
    )]
    ColumnCountMismatch {
        statement: u64,
        row: u64,
        table: String,
        expected: usize,
        found: usize,
    },
    #[error("INSERT targets table `{found}` but this file was opened for `{expected}`")]
    WrongTable { expected: String, found: String },
}

/// One SQL literal from an INSERT row.
#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
}

impl SqlValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            SqlValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            SqlValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Expected column kinds, used by typed extractors for clearer errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Integer,
    Float,
    Text,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: &'static str,
    pub kind: ColumnKind,
}

/// Ordered column specification for one table.
#[derive(Debug, Clone)]
pub struct TableSchema {
    pub name: &'static str,
    pub columns: Vec<Column>,
}

impl TableSchema {
    pub fn new(name: &'static str, columns: &[(&'static str, ColumnKind)]) -> Self {
        TableSchema {
            name,
            columns: columns
                .iter()
                .map(|&(name, kind)| Column { name, kind })
                .collect(),
        }
    }

    /// Position of a column by name; panics on a typo in our own code.
    pub fn index_of(&self, column: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c.name == column)
            .unwrap_or_else(|| panic!("table `{}` has no column `{}`", self.name, column))
    }
}

/// Iterator over the rows of every INSERT statement in a dump file.
pub struct SqlDumpParser<R: BufRead> {
    input: R,
    /// One-byte pushback slot for two-byte lookahead (`--`, `/*`).
    pending: Option<u8>,
    offset: u64,
    schema: TableSchema,
    state: State,
    statements: u64,
    rows_in_statement: u64,
}

#[derive(Debug, PartialEq)]
enum State {
    BetweenStatements,
    InTuples,
    Done,
}

pub fn parse_sql_dump<R: BufRead>(input: R, schema: &TableSchema) -> SqlDumpParser<R> {
    SqlDumpParser {
        input,
        pending: None,
        offset: 0,
        schema: schema.clone(),
        state: State::BetweenStatements,
        statements: 0,
        rows_in_statement: 0,
    }
}

impl<R: BufRead> Iterator for SqlDumpParser<R> {
    type Item = Result<Vec<SqlValue>, SqlError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.state == State::Done {
            return None;
        }
        match self.next_row() {
            Ok(row) => row.map(Ok),
            Err(e) => {
                self.state = State::Done;
                Some(Err(e))
            }
        }
    }
}

impl<R: BufRead> SqlDumpParser<R> {
    /// INSERT statements seen so far.
    pub fn statements_seen(&self) -> u64 {
        self.statements
    }

    fn next_row(&mut self) -> Result<Option<Vec<SqlValue>>, SqlError> {
        loop {
            if self.state == State::BetweenStatements {
                if !self.seek_insert()? {
                    self.state = State::Done;
                    return Ok(None);
                }
                self.state = State::InTuples;
                self.rows_in_statement = 0;
            }
            // InTuples: one row per call.
            self.skip_ws()?;
            self.expect_byte(b'(', "expected `(` to open a row")?;
            let row = self.parse_tuple_body()?;
            self.rows_in_statement += 1;
            self.skip_ws()?;
            match self.bump()? {
                Some(b',') => {}
                Some(b';') => self.state = State::BetweenStatements,
                Some(b) => {
                    return Err(self.malformed(format!(
                        "expected `,` or `;` after row, found `{}`",
                        escape_byte(b)
                    )))
                }
                None => {
                    return Err(self.malformed("unterminated INSERT at end of stream".into()))
                }
            }
            if row.len() != self.schema.columns.len() {
                return Err(SqlError::ColumnCountMismatch {
                    statement: self.statements,
                    row: self.rows_in_statement,
                    table: self.schema.name.to_string(),
                    expected: self.schema.columns.len(),
                    found: row.len(),
                });
            }
            return Ok(Some(row));
        }
    }

    /// Skip forward to the tuple list of the next INSERT statement.
    /// Returns false at end of input.
    fn seek_insert(&mut self) -> Result<bool, SqlError> {
        loop {
            self.skip_ws_and_comments()?;
            match self.peek()? {
                None => return Ok(false),
                Some(b';') => {
                    self.bump()?; // stray terminator, e.g. after a /*!…*/ comment
                    continue;
                }
                Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                    let word = self.read_word()?;
                    if word.eq_ignore_ascii_case("INSERT") {
                        self.parse_insert_header()?;
                        self.statements += 1;
                        return Ok(true);
                    }
                    self.skip_statement()?;
                }
                Some(_) => {
                    // Unrecognized junk: treat as a statement and skip it.
                    self.skip_statement()?;
                }
            }
        }
    }

    /// After the INSERT keyword: `INTO table [(col, …)] VALUES`.
    fn parse_insert_header(&mut self) -> Result<(), SqlError> {
        self.skip_ws()?;
        let into = self.read_word()?;
        if !into.eq_ignore_ascii_case("INTO") {
            return Err(self.malformed(format!("expected INTO after INSERT, found `{into}`")));
        }
        self.skip_ws()?;
        let table = self.read_identifier()?;
        if table != self.schema.name {
            return Err(SqlError::WrongTable {
                expected: self.schema.name.to_string(),
                found: table,
            });
        }
        self.skip_ws()?;
        if self.peek()? == Some(b'(') {
            // Explicit column list: skip it, the schema still decides counts.
            self.bump()?;
            let mut depth = 1u32;
            loop {
                match self.bump()? {
                    Some(b'(') => depth += 1,
                    Some(b')') => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    Some(b'`') => self.skip_until(b'`')?,
                    Some(_) => {}
                    None => {
                        return Err(
                            self.malformed("unterminated column list at end of stream".into())
                        )
                    }
                }
            }
            self.skip_ws()?;
        }
        let values = self.read_word()?;
        if !values.eq_ignore_ascii_case("VALUES") {
            return Err(self.malformed(format!("expected VALUES, found `{values}`")));
        }
        Ok(())
    }

    /// Values of one row; the opening `(` is already consumed.
    fn parse_tuple_body(&mut self) -> Result<Vec<SqlValue>, SqlError> {
        let mut row = Vec::with_capacity(self.schema.columns.len());
        self.skip_ws()?;
        if self.peek()? == Some(b')') {
            self.bump()?;
            return Ok(row); // () — flagged by the count check
        }
        loop {
            row.push(self.parse_value()?);
            self.skip_ws()?;
            match self.bump()? {
                Some(b',') => self.skip_ws()?,
                Some(b')') => return Ok(row),
                Some(b) => {
                    return Err(self.malformed(format!(
                        "expected `,` or `)` after value, found `{}`",
                        escape_byte(b)
                    )))
                }
                None => return Err(self.malformed("unterminated row at end of stream".into())),
            }
        }
    }

    fn parse_value(&mut self) -> Result<SqlValue, SqlError> {
        match self.peek()? {
            Some(b'\'') => self.parse_string(),
            Some(b'N') | Some(b'n') => {
                let word = self.read_word()?;
                if word.eq_ignore_ascii_case("NULL") {
                    Ok(SqlValue::Null)
                } else {
                    Err(self.malformed(format!("expected NULL, found `{word}`")))
                }
            }
            Some(b'0') => {
                self.bump()?;
                if matches!(self.peek()?, Some(b'x') | Some(b'X')) {
                    self.bump()?;
                    self.parse_hex_blob()
                } else {
                    self.parse_number(b'0')
                }
            }
            Some(b) if b.is_ascii_digit() || b == b'-' || b == b'+' || b == b'.' => {
                self.bump()?;
                self.parse_number(b)
            }
            Some(b) => Err(self.malformed(format!(
                "expected a value, found `{}`",
                escape_byte(b)
            ))),
            None => Err(self.malformed("expected a value, found end of stream".into())),
        }
    }

    /// The opening quote is not yet consumed.
    fn parse_string(&mut self) -> Result<SqlValue, SqlError> {
        self.bump()?; // opening '
        let mut bytes = Vec::new();
        loop {
            match self.bump()? {
                Some(b'\'') => {
                    return Ok(SqlValue::Text(
                        String::from_utf8_lossy(&bytes).into_owned(),
                    ))
                }
                Some(b'\\') => match self.bump()? {
                    Some(b'\'') => bytes.push(b'\''),
                    Some(b'"') => bytes.push(b'"'),
                    Some(b'\\') => bytes.push(b'\\'),
                    Some(b'n') => bytes.push(b'\n'),
                    Some(b't') => bytes.push(b'\t'),
                    Some(b'r') => bytes.push(b'\r'),
                    Some(b'0') => bytes.push(0),
                    Some(b) => {
                        return Err(self.malformed(format!(
                            "unsupported escape `\\{}` in string",
                            escape_byte(b)
                        )))
                    }
                    None => {
                        return Err(
                            self.malformed("unterminated string at end of stream".into())
                        )
                    }
                },
                Some(b) => bytes.push(b),
                None => {
                    return Err(self.malformed("unterminated string at end of stream".into()))
                }
            }
        }
    }

    /// `0x` is already consumed; at least one hex digit must follow.
    fn parse_hex_blob(&mut self) -> Result<SqlValue, SqlError> {
        let mut digits = Vec::new();
        while let Some(b) = self.peek()? {
            if b.is_ascii_hexdigit() {
                digits.push(b);
                self.bump()?;
            } else {
                break;
            }
        }
        if digits.is_empty() {
            return Err(self.malformed("hex literal `0x` with no digits".into()));
        }
        if digits.len() % 2 != 0 {
            return Err(self.malformed(format!(
                "hex literal with odd digit count ({})",
                digits.len()
            )));
        }
        let bytes: Vec<u8> = digits
            .chunks(2)
            .map(|pair| hex_nibble(pair[0]) << 4 | hex_nibble(pair[1]))
            .collect();
        Ok(SqlValue::Text(String::from_utf8_lossy(&bytes).into_owned()))
    }

    /// `first` is the already-consumed leading byte of the token.
    fn parse_number(&mut self, first: u8) -> Result<SqlValue, SqlError> {
        let mut token = String::new();
        token.push(first as char);
        let mut prev = first;
        while let Some(b) = self.peek()? {
            let take = b.is_ascii_digit()
                || b == b'.'
                || b == b'e'
                || b == b'E'
                || ((b == b'+' || b == b'-') && (prev == b'e' || prev == b'E'));
            if !take {
                break;
            }
            token.push(b as char);
            prev = b;
            self.bump()?;
        }
        let is_float = token.contains(['.', 'e', 'E']);
        if !is_float {
            if let Ok(i) = token.parse::<i64>() {
                return Ok(SqlValue::Int(i));
            }
        }
        token
            .parse::<f64>()
            .map(SqlValue::Float)
            .map_err(|_| self.malformed(format!("bad numeric literal `{token}`")))
    }

    /// Consume a non-INSERT statement up to its terminating `;`, honoring
    /// quotes and comments. A clean end of input also terminates it, but
    /// ending inside a string is an error.
    fn skip_statement(&mut self) -> Result<(), SqlError> {
        loop {
            match self.bump()? {
                None => return Ok(()),
                Some(b';') => return Ok(()),
                Some(b'\'') => self.skip_quoted(b'\'')?,
                Some(b'"') => self.skip_quoted(b'"')?,
                Some(b'`') => self.skip_until(b'`')?,
                Some(b'-') => {
                    if self.peek()? == Some(b'-') {
                        self.skip_line()?;
                    }
                }
                Some(b'/') => {
                    if self.peek()? == Some(b'*') {
                        self.bump()?;
                        self.skip_block_comment()?;
                    }
                }
                Some(b'#') => self.skip_line()?,
                Some(_) => {}
            }
        }
    }

    /// Inside a quoted literal (opening quote consumed): skip to its end,
    /// honoring backslash escapes.
    fn skip_quoted(&mut self, quote: u8) -> Result<(), SqlError> {
        loop {
            match self.bump()? {
                Some(b) if b == quote => return Ok(()),
                Some(b'\\') => {
                    if self.bump()?.is_none() {
                        return Err(
                            self.malformed("unterminated string at end of stream".into())
                        );
                    }
                }
                Some(_) => {}
                None => {
                    return Err(self.malformed("unterminated string at end of stream".into()))
                }
            }
        }
    }

    fn skip_until(&mut self, stop: u8) -> Result<(), SqlError> {
        loop {
            match self.bump()? {
                Some(b) if b == stop => return Ok(()),
                Some(_) => {}
                None => {
                    return Err(self
                        .malformed(format!("unterminated `{}` at end of stream", stop as char)))
                }
            }
        }
    }

    fn skip_ws(&mut self) -> Result<(), SqlError> {
        while let Some(b) = self.peek()? {
            if b == b' ' || b == b'\t' || b == b'\n' || b == b'\r' {
                self.bump()?;
            } else {
                break;
            }
        }
        Ok(())
    }

    fn skip_ws_and_comments(&mut self) -> Result<(), SqlError> {
        loop {
            self.skip_ws()?;
            match self.peek()? {
                Some(b'-') => {
                    // Only `--` starts a comment; a lone `-` is junk for
                    // seek_insert to deal with.
                    self.bump()?;
                    if self.peek()? == Some(b'-') {
                        self.skip_line()?;
                    } else {
                        self.unread(b'-');
                        return Ok(());
                    }
                }
                Some(b'#') => {
                    self.bump()?;
                    self.skip_line()?;
                }
                Some(b'/') => {
                    self.bump()?;
                    if self.peek()? == Some(b'*') {
                        self.bump()?;
                        self.skip_block_comment()?;
                    } else {
                        self.unread(b'/');
                        return Ok(());
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn skip_line(&mut self) -> Result<(), SqlError> {
        while let Some(b) = self.bump()? {
            if b == b'\n' {
                break;
            }
        }
        Ok(())
    }

    /// `/*` already consumed.
    fn skip_block_comment(&mut self) -> Result<(), SqlError> {
        loop {
            match self.bump()? {
                Some(b'*') => {
                    if self.peek()? == Some(b'/') {
                        self.bump()?;
                        return Ok(());
                    }
                }
                Some(_) => {}
                None => return Err(self.malformed("unterminated comment at end of stream".into())),
            }
        }
    }

    fn read_word(&mut self) -> Result<String, SqlError> {
        let mut word = String::new();
        while let Some(b) = self.peek()? {
            if b.is_ascii_alphanumeric() || b == b'_' {
                word.push(b as char);
                self.bump()?;
            } else {
                break;
            }
        }
        Ok(word)
    }

    /// A table identifier, optionally backtick-quoted.
    fn read_identifier(&mut self) -> Result<String, SqlError> {
        if self.peek()? == Some(b'`') {
            self.bump()?;
            let mut name = String::new();
            loop {
                match self.bump()? {
                    Some(b'`') => return Ok(name),
                    Some(b) => name.push(b as char),
                    None => {
                        return Err(
                            self.malformed("unterminated identifier at end of stream".into())
                        )
                    }
                }
            }
        }
        let word = self.read_word()?;
        if word.is_empty() {
            return Err(self.malformed("expected a table name".into()));
        }
        Ok(word)
    }

    fn expect_byte(&mut self, want: u8, context: &str) -> Result<(), SqlError> {
        match self.bump()? {
            Some(b) if b == want => Ok(()),
            Some(b) => Err(self.malformed(format!("{context}, found `{}`", escape_byte(b)))),
            None => Err(self.malformed(format!("{context}, found end of stream"))),
        }
    }

    fn peek(&mut self) -> Result<Option<u8>, SqlError> {
        if let Some(b) = self.pending {
            return Ok(Some(b));
        }
        Ok(self.input.fill_buf()?.first().copied())
    }

    fn bump(&mut self) -> Result<Option<u8>, SqlError> {
        if let Some(b) = self.pending.take() {
            self.offset += 1;
            return Ok(Some(b));
        }
        let b = self.peek()?;
        if b.is_some() {
            self.input.consume(1);
            self.offset += 1;
        }
        Ok(b)
    }

    fn unread(&mut self, b: u8) {
        debug_assert!(self.pending.is_none(), "single-byte pushback only");
        self.pending = Some(b);
        self.offset -= 1;
    }

    fn malformed(&self, detail: String) -> SqlError {
        SqlError::MalformedStatement {
            offset: self.offset,
            detail,
        }
    }
}

fn hex_nibble(b: u8) -> u8 {
    match b {
        b'0'..=b'9' => b - b'0',
        b'a'..=b'f' => b - b'a' + 10,
        b'A'..=b'F' => b - b'A' + 10,
        _ => unreachable!("caller checked is_ascii_hexdigit"),
    }
}

fn escape_byte(b: u8) -> String {
    if b.is_ascii_graphic() || b == b' ' {
        (b as char).to_string()
    } else {
        format!("0x{b:02x}")
    }
}

/// Render rows as one INSERT statement in the same dialect the parser
/// accepts. Exact inverse of parsing for finite floats.
pub fn emit_insert(table: &str, rows: &[Vec<SqlValue>]) -> String {
    let mut out = String::new();
    out.push_str("INSERT INTO `");
    out.push_str(table);
    out.push_str("` VALUES ");
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('(');
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            emit_value(&mut out, v);
        }
        out.push(')');
    }
    out.push(';');
    out
}

fn emit_value(out: &mut String, v: &SqlValue) {
    match v {
        SqlValue::Null => out.push_str("NULL"),
        SqlValue::Int(i) => out.push_str(&i.to_string()),
        SqlValue::Float(f) => {
            debug_assert!(f.is_finite(), "dumps never contain NaN/inf");
            let s = format!("{f}");
            out.push_str(&s);
            if !s.contains(['.', 'e', 'E']) {
                out.push_str(".0"); // keep the literal unambiguously a float
            }
        }
        SqlValue::Text(t) => {
            out.push('\'');
            for c in t.chars() {
                match c {
                    '\'' => out.push_str("\\'"),
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    '\0' => out.push_str("\\0"),
                    _ => out.push(c),
                }
            }
            out.push('\'');
        }
    }
}
