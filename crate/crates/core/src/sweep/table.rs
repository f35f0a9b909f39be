//! Reader for the crate's CSV artifacts: an optional `# key=value ...`
//! header, a column line, then comma-separated rows.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numfmt::header_fields;

#[derive(Debug, Clone)]
pub(crate) struct Table {
    path: PathBuf,
    header: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub(crate) fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub(crate) fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            kind: "table",
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines().peekable();
        let header = match lines.peek().and_then(|l| l.strip_prefix("# ")) {
            Some(h) => {
                let fields = header_fields(h)
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect();
                lines.next();
                fields
            }
            None => Vec::new(),
        };
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| bad("missing column line".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let row: Vec<String> = l.split(',').map(str::to_string).collect();
                if row.len() == columns.len() {
                    Ok(row)
                } else {
                    Err(bad(format!("row {l:?} has {} fields, expected {}", row.len(), columns.len())))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            path: path.to_path_buf(),
            header,
            columns,
            rows,
        })
    }

    fn bad(&self, reason: String) -> Error {
        Error::Parse {
            kind: "table",
            path: self.path.clone(),
            reason,
        }
    }

    pub(crate) fn header(&self, key: &str) -> Result<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| self.bad(format!("header lacks {key}")))
    }

    pub(crate) fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub(crate) fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| self.bad(format!("no column {name}")))
    }

    pub(crate) fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse::<f64>()
                    .map_err(|e| self.bad(format!("column {name}: {:?}: {e}", r[k])))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_columns_and_rows() {
        let t = Table::parse("# gamma=1 m=log(1,2,3)\na,b\n1,x\n2.5,y\n", Path::new("mem")).unwrap();
        assert_eq!(t.header("m").unwrap(), "log(1,2,3)");
        assert_eq!(t.numbers("a").unwrap(), vec![1.0, 2.5]);
        assert!(t.numbers("b").is_err());
        assert!(t.header("missing").is_err());
        assert!(Table::parse("a,b\n1\n", Path::new("mem")).is_err());
    }
}
