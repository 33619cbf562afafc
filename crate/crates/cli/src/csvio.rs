//! CSV tables with row- and column-addressed errors.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct CsvError {
    pub file: String,
    /// 1-based file line; the header is line 1.
    pub line: Option<usize>,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(l) = self.line {
            write!(f, ": line {l}")?;
        }
        if let Some(c) = &self.column {
            write!(f, ", column {c:?}")?;
        }
        write!(f, ": {}", self.message)
    }
}

pub struct Table {
    name: String,
    headers: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, CsvError> {
        let name = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| CsvError {
            file: name.clone(),
            line: None,
            column: None,
            message: e.to_string(),
        })?;
        Table::from_reader(name, file)
    }

    pub fn from_reader(name: impl Into<String>, reader: impl std::io::Read) -> Result<Table, CsvError> {
        let name = name.into();
        let err = |line: Option<usize>, message: String| CsvError {
            file: name.clone(),
            line,
            column: None,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| err(Some(1), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut index = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            if index.insert(h.clone(), i).is_some() {
                return Err(err(Some(1), format!("duplicate column {h:?}")));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            rows.push(rec.map_err(|e| err(Some(i + 2), e.to_string()))?);
        }
        Ok(Table {
            name,
            headers,
            index,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn has(&self, column: &str) -> bool {
        self.index.contains_key(column)
    }

    pub fn require(&self, columns: &[&str]) -> Result<(), CsvError> {
        match columns.iter().find(|c| !self.has(c)) {
            Some(c) => Err(CsvError {
                file: self.name.clone(),
                line: Some(1),
                column: Some(c.to_string()),
                message: "missing required column".into(),
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().enumerate().map(move |(i, rec)| Row {
            table: self,
            line: i + 2,
            rec,
        })
    }
}

pub struct Row<'a> {
    table: &'a Table,
    line: usize,
    rec: &'a csv::StringRecord,
}

impl<'a> Row<'a> {
    pub fn line(&self) -> usize {
        self.line
    }

    pub fn error(&self, column: &str, message: impl Into<String>) -> CsvError {
        CsvError {
            file: self.table.name.clone(),
            line: Some(self.line),
            column: Some(column.to_string()),
            message: message.into(),
        }
    }

    /// Cell value; empty cells are `None`.
    pub fn opt(&self, column: &str) -> Option<&'a str> {
        let i = *self.table.index.get(column)?;
        self.rec.get(i).filter(|v| !v.is_empty())
    }

    pub fn str(&self, column: &str) -> Result<&'a str, CsvError> {
        self.opt(column).ok_or_else(|| self.error(column, "empty value"))
    }

    pub fn parse<T: FromStr>(&self, column: &str) -> Result<T, CsvError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.str(column)?;
        raw.parse().map_err(|e| self.error(column, format!("cannot parse {raw:?}: {e}")))
    }

    pub fn parse_opt<T: FromStr>(&self, column: &str) -> Result<Option<T>, CsvError>
    where
        T::Err: fmt::Display,
    {
        match self.opt(column) {
            None => Ok(None),
            Some(_) => self.parse(column).map(Some),
        }
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
