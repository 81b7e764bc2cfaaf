//! Reader for NIST StRD nonlinear-regression `.dat` files.

use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NistDataset {
    pub name: String,
    /// Starting values per parameter, one inner vector per parameter.
    pub starts: Vec<Vec<f64>>,
    pub certified: Vec<f64>,
    pub certified_sd: Vec<f64>,
    pub residual_sd: f64,
    pub residual_ss: Option<f64>,
    pub data: Dataset,
}

impl NistDataset {
    /// The `which`-th published starting vector (0 = "Start 1").
    pub fn start(&self, which: usize) -> Option<Vec<f64>> {
        self.starts.iter().map(|s| s.get(which).copied()).collect()
    }
}

pub fn parse_nist_strd(path: impl AsRef<Path>) -> Result<NistDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_nist_str(&text)
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a number, found `{tok}`"),
    })
}

fn trailing_number(s: &str, line: usize) -> Result<f64> {
    let tok = s.split_whitespace().last().ok_or(Error::Parse {
        line,
        msg: "missing value".into(),
    })?;
    parse_f64(tok, line)
}

/// `b<k> = v1 v2 ... certified sd` in the header.
fn parameter_line(s: &str) -> Option<(usize, &str)> {
    let rest = s.trim_start().strip_prefix('b')?;
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let k: usize = rest[..digits].parse().ok()?;
    let values = rest[digits..].trim_start().strip_prefix('=')?;
    Some((k, values))
}

pub fn parse_nist_str(text: &str) -> Result<NistDataset> {
    let lines: Vec<&str> = text.lines().collect();
    // The header also has a "Data:" line describing the variables; the data
    // block starts after the last one.
    let marker = lines
        .iter()
        .rposition(|l| l.trim_start().starts_with("Data:"))
        .ok_or(Error::MissingDataMarker)?;

    let mut name = String::new();
    let mut params: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut residual_sd = None;
    let mut residual_ss = None;
    let mut declared_n = None;
    for (idx, raw) in lines[..marker].iter().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if let Some(rest) = s.strip_prefix("Dataset Name:") {
            name = rest.split_whitespace().next().unwrap_or_default().to_string();
        } else if let Some(rest) = s.strip_prefix("Residual Standard Deviation:") {
            residual_sd = Some(trailing_number(rest, line)?);
        } else if let Some(rest) = s.strip_prefix("Residual Sum of Squares:") {
            residual_ss = Some(trailing_number(rest, line)?);
        } else if let Some(rest) = s.strip_prefix("Number of Observations:") {
            declared_n = Some(trailing_number(rest, line)? as usize);
        } else if let Some((k, values)) = parameter_line(s) {
            let nums = values
                .split_whitespace()
                .map(|t| parse_f64(t, line))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() < 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!("parameter b{k} needs starts, certified value and SD"),
                });
            }
            params.push((k, nums));
        }
    }
    params.sort_by_key(|(k, _)| *k);
    if params.iter().enumerate().any(|(i, (k, _))| *k != i + 1) {
        return Err(Error::Parse {
            line: 0,
            msg: "parameters b1..bp are not contiguous".into(),
        });
    }
    let residual_sd = residual_sd.ok_or(Error::Parse {
        line: 0,
        msg: "no `Residual Standard Deviation` in header".into(),
    })?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (idx, raw) in lines.iter().enumerate().skip(marker + 1) {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let line = idx + 1;
        if toks.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected `y x`, found `{}`", raw.trim()),
            });
        }
        y.push(parse_f64(toks[0], line)?);
        x.push(parse_f64(toks[1], line)?);
    }
    if x.is_empty() {
        return Err(Error::Parse {
            line: marker + 1,
            msg: "no data rows after `Data:`".into(),
        });
    }
    if let Some(n) = declared_n {
        if n != x.len() {
            return Err(Error::Parse {
                line: marker + 1,
                msg: format!("header declares {n} observations, found {}", x.len()),
            });
        }
    }

    let starts = params.iter().map(|(_, v)| v[..v.len() - 2].to_vec()).collect();
    let certified = params.iter().map(|(_, v)| v[v.len() - 2]).collect();
    let certified_sd = params.iter().map(|(_, v)| v[v.len() - 1]).collect();
    Ok(NistDataset {
        name,
        starts,
        certified,
        certified_sd,
        residual_sd,
        residual_ss,
        data: Dataset::new(x, y).map_err(|e| Error::Parse {
            line: marker + 1,
            msg: e.to_string(),
        })?,
    })
}
