//! CSV formats for edge weights, rank tables, and known-regulator lists.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const EDGE_HEADER: [&str; 6] = ["child", "candidate", "weight", "role_kinase_prob", "role_inhibitor_prob", "method"];

/// One row of an edge-weight file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub child: String,
    pub candidate: String,
    /// `None` is written as `NA`.
    pub weight: Option<f64>,
    pub role_kinase_prob: Option<f64>,
    pub role_inhibitor_prob: Option<f64>,
    pub method: String,
}

fn fmt_weight(w: Option<f64>) -> String {
    w.map_or_else(|| "NA".to_string(), |w| w.to_string())
}

fn fmt_optional(w: Option<f64>) -> String {
    w.map(|w| w.to_string()).unwrap_or_default()
}

fn parse_cell(path: &Path, row: usize, column: &str, cell: &str, na: bool) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() || (na && cell == "NA") {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message: format!("`{cell}` is not a number"),
        }),
    }
}

pub fn write_edges(path: &Path, rows: &[EdgeRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EDGE_HEADER)?;
    for r in rows {
        w.write_record([
            r.child.as_str(),
            r.candidate.as_str(),
            &fmt_weight(r.weight),
            &fmt_optional(r.role_kinase_prob),
            &fmt_optional(r.role_inhibitor_prob),
            r.method.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_edges(path: &Path) -> Result<Vec<EdgeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != EDGE_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            column: header.join(","),
            message: format!("expected header {}", EDGE_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        rows.push(EdgeRow {
            child: rec[0].to_string(),
            candidate: rec[1].to_string(),
            weight: parse_cell(path, row, "weight", &rec[2], true)?,
            role_kinase_prob: parse_cell(path, row, "role_kinase_prob", &rec[3], false)?,
            role_inhibitor_prob: parse_cell(path, row, "role_inhibitor_prob", &rec[4], false)?,
            method: rec[5].to_string(),
        });
    }
    Ok(rows)
}

/// `child,known` pairs, one per row.
pub fn read_known(path: &Path) -> Result<Vec<(String, String)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: out.len() + 1,
                column: "known".into(),
                message: "expected `child,known`".into(),
            });
        }
        out.push((rec[0].trim().to_string(), rec[1].trim().to_string()));
    }
    Ok(out)
}

/// Parse `a,b,c` into names.
pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

/// Parse `child=cand1|cand2,child2=cand3` into per-child exclusions.
pub fn parse_exclusions(s: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for entry in parse_list(s) {
        let (child, cands) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("exclusion `{entry}` must look like child=cand1|cand2")))?;
        let list = out.entry(child.trim().to_string()).or_default();
        list.extend(cands.split('|').map(str::trim).filter(|c| !c.is_empty()).map(str::to_string));
    }
    Ok(out)
}
