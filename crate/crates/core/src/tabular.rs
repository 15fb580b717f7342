//! CSV tables with a single header row, and loader specs that turn
//! instrument exports (preambles, footers, odd column names) into them.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::Deserialize;
use thiserror::Error;

use crate::metadata::format_number;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: file is not valid UTF-8")]
    Encoding(String),
    #[error("no header line")]
    EmptyFile,
    #[error("duplicate column name `{0}`")]
    DuplicateColumnName(String),
    #[error("data row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("rename source column `{0}` not present")]
    RenameSourceMissing(String),
    #[error("header row {header_row} out of range ({lines} usable lines)")]
    HeaderRowOutOfRange { header_row: usize, lines: usize },
    #[error("invalid loader spec: {0}")]
    InvalidLoaderSpec(String),
}

impl TableError {
    pub fn code(&self) -> &'static str {
        match self {
            TableError::Io { .. } => "IO_ERROR",
            TableError::Encoding(_) => "ENCODING_ERROR",
            TableError::EmptyFile => "EMPTY_CSV",
            TableError::DuplicateColumnName(_) => "DUPLICATE_COLUMN",
            TableError::RaggedRow { .. } => "RAGGED_ROW",
            TableError::Csv(_) => "CSV_ERROR",
            TableError::RenameSourceMissing(_) => "RENAME_SOURCE_MISSING",
            TableError::HeaderRowOutOfRange { .. } => "HEADER_ROW_OUT_OF_RANGE",
            TableError::InvalidLoaderSpec(_) => "LOADER_SPEC_INVALID",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Null,
}

impl Cell {
    /// Classifies raw CSV text. `decimal` is the decimal separator.
    pub fn parse(raw: &str, decimal: char) -> Cell {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Cell::Null;
        }
        let candidate = if decimal == '.' {
            std::borrow::Cow::Borrowed(trimmed)
        } else {
            std::borrow::Cow::Owned(trimmed.replace(decimal, "."))
        };
        if is_decimal_literal(&candidate) {
            if let Ok(v) = candidate.parse::<f64>() {
                return Cell::Number(v);
            }
        }
        Cell::Text(raw.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(v) => f.write_str(&format_number(*v)),
            Cell::Text(s) => f.write_str(s),
            Cell::Null => Ok(()),
        }
    }
}

/// Optional sign, digits with an optional fraction, optional exponent.
/// `NaN`, `inf` and friends are deliberately not numbers.
pub fn is_decimal_literal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

/// A rectangular table with unique column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(TableError::DuplicateColumnName(c.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RaggedRow {
                    row: i,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Table { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &Cell> + '_> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[idx]))
    }

    /// Returns a copy with `f` applied to every cell of column `idx`.
    pub fn map_column(&self, idx: usize, f: impl Fn(&Cell) -> Cell) -> Table {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[idx] = f(&r[idx]);
                r
            })
            .collect();
        Table {
            columns: self.columns.clone(),
            rows,
        }
    }

    pub fn rename_columns(&self, rename: &IndexMap<String, String>) -> Result<Table, TableError> {
        let mut columns = self.columns.clone();
        for (from, to) in rename {
            let idx = self
                .column_index(from)
                .ok_or_else(|| TableError::RenameSourceMissing(from.clone()))?;
            columns[idx] = to.clone();
        }
        Table::new(columns, self.rows.clone())
    }

    /// Renders the table as CSV text with `\n` line endings.
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        writer
            .write_record(&self.columns)
            .expect("writing to memory");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|c| c.to_string()))
                .expect("writing to memory");
        }
        String::from_utf8(writer.into_inner().expect("flushing to memory"))
            .expect("cells are valid UTF-8")
    }
}

fn read_text(path: &Path) -> Result<String, TableError> {
    let bytes = fs::read(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text =
        String::from_utf8(bytes).map_err(|_| TableError::Encoding(path.display().to_string()))?;
    Ok(match text.strip_prefix('\u{feff}') {
        Some(rest) => rest.to_string(),
        None => text,
    })
}

/// Parses CSV text whose first record is the header.
pub fn parse_csv(text: &str, delimiter: u8, decimal: char) -> Result<Table, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| TableError::Csv(e.to_string()))?,
        None => return Err(TableError::EmptyFile),
    };
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| TableError::Csv(e.to_string()))?;
        if record.len() != columns.len() {
            return Err(TableError::RaggedRow {
                row: i,
                expected: columns.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(|c| Cell::parse(c, decimal)).collect());
    }
    Table::new(columns, rows)
}

/// Reads a comma separated file with a single header line.
pub fn read_table(path: impl AsRef<Path>) -> Result<Table, TableError> {
    let text = read_text(path.as_ref())?;
    parse_csv(&text, b',', '.')
}

pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<(), TableError> {
    let path = path.as_ref();
    fs::write(path, table.to_csv_string()).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Declarative description of a nonstandard instrument file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoaderSpec {
    pub delimiter: String,
    pub decimal_separator: String,
    pub header_row: usize,
    pub skip_footer: usize,
    pub comment_prefix: Option<String>,
    pub rename: IndexMap<String, String>,
}

impl Default for LoaderSpec {
    fn default() -> Self {
        LoaderSpec {
            delimiter: ",".into(),
            decimal_separator: ".".into(),
            header_row: 0,
            skip_footer: 0,
            comment_prefix: None,
            rename: IndexMap::new(),
        }
    }
}

impl LoaderSpec {
    pub fn from_yaml_str(text: &str) -> Result<Self, TableError> {
        let spec: LoaderSpec =
            serde_yaml::from_str(text).map_err(|e| TableError::InvalidLoaderSpec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        LoaderSpec::from_yaml_str(&read_text(path.as_ref())?)
    }

    pub fn check(&self) -> Result<(), TableError> {
        let bad = |m: String| Err(TableError::InvalidLoaderSpec(m));
        let delimiter = self.delimiter_byte()?;
        let decimal = self.decimal_char()?;
        if decimal == ',' && delimiter == b',' {
            return bad("decimal separator `,` requires a delimiter other than `,`".into());
        }
        let mut targets = HashSet::new();
        for to in self.rename.values() {
            if !targets.insert(to) {
                return bad(format!("two columns are renamed to `{to}`"));
            }
        }
        if let Some(p) = &self.comment_prefix {
            if p.is_empty() {
                return bad("comment_prefix must not be empty".into());
            }
        }
        Ok(())
    }

    fn delimiter_byte(&self) -> Result<u8, TableError> {
        match self.delimiter.as_bytes() {
            [b] if self.delimiter.is_ascii() => Ok(*b),
            _ => Err(TableError::InvalidLoaderSpec(format!(
                "delimiter must be a single ASCII character, got `{}`",
                self.delimiter
            ))),
        }
    }

    fn decimal_char(&self) -> Result<char, TableError> {
        match self.decimal_separator.as_str() {
            "." => Ok('.'),
            "," => Ok(','),
            other => Err(TableError::InvalidLoaderSpec(format!(
                "decimal separator must be `.` or `,`, got `{other}`"
            ))),
        }
    }
}

/// Reads an instrument file according to `spec`.
///
/// Comment lines go first, then trailing blank lines and `skip_footer`
/// footer lines. The line at `header_row` becomes the header and everything
/// above it is discarded. Renames apply last.
pub fn apply_loader(path: impl AsRef<Path>, spec: &LoaderSpec) -> Result<Table, TableError> {
    spec.check()?;
    let text = read_text(path.as_ref())?;
    let mut lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| match &spec.comment_prefix {
            Some(p) => !l.starts_with(p.as_str()),
            None => true,
        })
        .collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    lines.truncate(lines.len().saturating_sub(spec.skip_footer));
    if spec.header_row >= lines.len() {
        return Err(TableError::HeaderRowOutOfRange {
            header_row: spec.header_row,
            lines: lines.len(),
        });
    }
    let body = lines[spec.header_row..].join("\n");
    let table = parse_csv(&body, spec.delimiter_byte()?, spec.decimal_char()?)?;
    table.rename_columns(&spec.rename)
}
