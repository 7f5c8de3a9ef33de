//! Output formats.
//!
//! Structured text is one `key = value` per line. Values are floats written
//! with 17 significant digits (`1.0000000000000000e-2`), integers, `true` /
//! `false`, double-quoted strings, or bracketed lists of floats or strings.
//! `#` starts a comment line. Tables render to CSV (header row, 17 significant
//! digits) or to structured text with one blank-line separated block per row.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    List(Vec<f64>),
    Words(Vec<String>),
}

pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Num(x) => format_f64(*x),
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => quote(s),
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|&x| format_f64(x)).collect();
                format!("[{}]", parts.join(", "))
            }
            Value::Words(ws) => {
                let parts: Vec<String> = ws.iter().map(|w| quote(w)).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

/// Ordered key/value record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Record {
    entries: Vec<(String, Value)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: Value) {
        self.entries.push((key.to_string(), value));
    }

    pub fn num(&mut self, key: &str, x: f64) {
        self.push(key, Value::Num(x));
    }

    pub fn int(&mut self, key: &str, i: i64) {
        self.push(key, Value::Int(i));
    }

    pub fn boolean(&mut self, key: &str, b: bool) {
        self.push(key, Value::Bool(b));
    }

    pub fn text(&mut self, key: &str, s: &str) {
        self.push(key, Value::Text(s.to_string()));
    }

    pub fn list(&mut self, key: &str, xs: Vec<f64>) {
        self.push(key, Value::List(xs));
    }

    pub fn words(&mut self, key: &str, ws: Vec<String>) {
        self.push(key, Value::Words(ws));
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(Value::as_f64)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {}", v.render());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Record> {
        let mut r = Record::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: n + 1,
                reason: "expected key = value".into(),
            })?;
            let value = parse_value(v.trim()).map_err(|reason| Error::Config {
                line: n + 1,
                reason,
            })?;
            r.push(k.trim(), value);
        }
        Ok(r)
    }
}

fn parse_f64_token(t: &str) -> std::result::Result<f64, String> {
    t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"))
}

/// Splits a string list body into its quoted items.
fn parse_quoted_items(body: &str) -> std::result::Result<Vec<String>, String> {
    let mut items = Vec::new();
    let mut chars = body.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace() || *c == ',') {
            chars.next();
        }
        match chars.next() {
            None => return Ok(items),
            Some('"') => {}
            Some(c) => return Err(format!("unexpected {c:?} in string list")),
        }
        let mut s = String::new();
        loop {
            match chars.next() {
                None => return Err("unterminated string".into()),
                Some('"') => break,
                Some('\\') => match chars.next() {
                    Some('n') => s.push('\n'),
                    Some(c) => s.push(c),
                    None => return Err("dangling escape".into()),
                },
                Some(c) => s.push(c),
            }
        }
        items.push(s);
    }
}

fn parse_value(v: &str) -> std::result::Result<Value, String> {
    if let Some(body) = v.strip_prefix('[') {
        let body = body.strip_suffix(']').ok_or("unterminated list")?.trim();
        if body.is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        if body.starts_with('"') {
            return Ok(Value::Words(parse_quoted_items(body)?));
        }
        return body
            .split(',')
            .map(parse_f64_token)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Value::List);
    }
    if v.starts_with('"') {
        let mut items = parse_quoted_items(v)?;
        if items.len() != 1 {
            return Err("expected a single string".into());
        }
        return Ok(Value::Text(items.remove(0)));
    }
    match v {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Ok(i) = v.parse::<i64>() {
        return Ok(Value::Int(i));
    }
    parse_f64_token(v).map(Value::Num)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_value(&self) -> Value {
        match self {
            Cell::Num(x) => Value::Num(*x),
            Cell::Int(i) => Value::Int(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::Text(s.clone()),
            Cell::Empty => Value::Text(String::new()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "text" | "structured-text" => Ok(Format::Text),
            _ => Err(Error::Parse(format!("unknown format {s:?} (csv | text)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Parse(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut head = Record::new();
        head.words("columns", self.columns.clone());
        head.int("rows", self.rows.len() as i64);
        out.push_str(&head.render());
        for (i, row) in self.rows.iter().enumerate() {
            let mut r = Record::new();
            r.int("row", i as i64);
            for (c, cell) in self.columns.iter().zip(row) {
                r.push(c, cell.to_value());
            }
            out.push('\n');
            out.push_str(&r.render());
        }
        out
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Text => Ok(self.to_text()),
        }
    }
}

/// Raw CSV contents: header and string cells.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let header = rdr.headers().map_err(err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec.map_err(err)?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Writes `contents` to `path`, or to stdout when `path` is `None` or `-`.
pub fn write_output(contents: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => fs::write(p, contents).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
