//! Two-column `(x, y)` data from delimited text.

use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A column picked by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        })
    }
}

fn resolve(col: &ColumnRef, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match col {
        ColumnRef::Index(i) => Ok(*i),
        ColumnRef::Name(name) => headers
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("no column named `{name}`"),
            }),
    }
}

pub fn parse_csv(
    path: impl AsRef<Path>,
    x_col: &ColumnRef,
    y_col: &ColumnRef,
    has_header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_str(&text, x_col, y_col, has_header)
}

pub fn parse_csv_str(
    text: &str,
    x_col: &ColumnRef,
    y_col: &ColumnRef,
    has_header: bool,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = if has_header {
        Some(rdr.headers().map_err(csv_error)?.clone())
    } else {
        None
    };
    let xi = resolve(x_col, headers.as_ref())?;
    let yi = resolve(y_col, headers.as_ref())?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            let raw = rec.get(i).ok_or_else(|| Error::Parse {
                line,
                msg: format!("row has no column {i}"),
            })?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("column {i}: expected a number, found `{raw}`"),
            })
        };
        x.push(field(xi)?);
        y.push(field(yi)?);
    }
    if x.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    Dataset::new(x, y)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn by_name_and_index() {
        let text = "y, x\n1.0, 2.0\n3.0, 4.0\n";
        let d = parse_csv_str(text, &"x".parse().unwrap(), &"y".parse().unwrap(), true).unwrap();
        assert_eq!(d.x(), &[2.0, 4.0]);
        assert_eq!(d.y(), &[1.0, 3.0]);
        let d = parse_csv_str("5,6\n", &ColumnRef::Index(0), &ColumnRef::Index(1), false).unwrap();
        assert_eq!((d.x()[0], d.y()[0]), (5.0, 6.0));
    }

    #[test]
    fn errors() {
        let x = ColumnRef::Name("x".into());
        let y = ColumnRef::Name("y".into());
        assert!(parse_csv_str("x,y\n", &x, &y, true).is_err());
        assert!(parse_csv_str("a,y\n1,2\n", &x, &y, true).is_err());
        match parse_csv_str("x,y\n1,2\n1,nope\n", &x, &y, true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
