//! CSV ingestion and emission.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use spca::data::{one_hot, RawData, Task};

use crate::error::{CliError, CliResult};

/// Cell spellings treated as missing values.
const MISSING: [&str; 6] = ["", "na", "nan", "?", "null", "none"];

#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Source line of each row, for diagnostics.
    pub lines: Vec<u64>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{}: missing header row", path.display())));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        lines.push(rec.position().map_or(0, |p| p.line()));
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows, lines })
}

fn is_missing(cell: &str) -> bool {
    MISSING.iter().any(|m| m.eq_ignore_ascii_case(cell))
}

impl Table {
    /// Column indices for names, or zero-based positions when no header matches.
    pub fn resolve(&self, spec: &[String]) -> CliResult<Vec<usize>> {
        spec.iter()
            .map(|s| {
                if let Some(i) = self.headers.iter().position(|h| h == s) {
                    return Ok(i);
                }
                match s.parse::<usize>() {
                    Ok(i) if i < self.headers.len() => Ok(i),
                    _ => Err(CliError::Usage(format!(
                        "column '{s}' not found (have: {})",
                        self.headers.join(", ")
                    ))),
                }
            })
            .collect()
    }

    pub fn has_columns(&self, names: &[String]) -> bool {
        names.iter().all(|n| self.headers.contains(n))
    }

    /// Parse the given columns as numbers, reporting every missing or
    /// non-numeric cell (first few locations listed per column).
    pub fn numeric(&self, cols: &[usize]) -> CliResult<DMatrix<f64>> {
        let mut bad: BTreeMap<usize, (usize, Vec<String>)> = BTreeMap::new();
        let mut m = DMatrix::zeros(self.rows.len(), cols.len());
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                let cell = row[c].as_str();
                let parsed = if is_missing(cell) { None } else { cell.parse::<f64>().ok() };
                match parsed {
                    Some(v) if v.is_finite() => m[(i, j)] = v,
                    _ => {
                        let entry = bad.entry(c).or_default();
                        entry.0 += 1;
                        if entry.1.len() < 5 {
                            let what = if is_missing(cell) { "missing".to_string() } else { format!("'{cell}'") };
                            entry.1.push(format!("line {} {what}", self.lines[i]));
                        }
                    }
                }
            }
        }
        if bad.is_empty() {
            return Ok(m);
        }
        let total: usize = bad.values().map(|b| b.0).sum();
        let detail: Vec<String> = bad
            .iter()
            .map(|(c, (count, locs))| format!("column '{}': {count} bad ({})", self.headers[*c], locs.join(", ")))
            .collect();
        Err(CliError::Data(format!(
            "{total} missing or non-numeric values; {}",
            detail.join("; ")
        )))
    }

    fn strings(&self, col: usize) -> CliResult<Vec<String>> {
        let mut missing = Vec::new();
        let out = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if is_missing(&r[col]) {
                    missing.push(self.lines[i]);
                }
                r[col].clone()
            })
            .collect();
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(CliError::Data(format!(
                "{} missing labels in column '{}' (lines {:?})",
                missing.len(),
                self.headers[col],
                &missing[..missing.len().min(5)]
            )))
        }
    }
}

/// Distinct labels, numerically ordered when all are numbers, otherwise
/// lexicographically.
pub fn class_order(labels: &[String]) -> Vec<String> {
    let mut distinct: Vec<String> = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(vals) = numeric {
        let mut paired: Vec<(f64, String)> = vals.into_iter().zip(distinct).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        paired.into_iter().map(|p| p.1).collect()
    } else {
        distinct
    }
}

pub fn encode_labels(labels: &[String], classes: &[String]) -> CliResult<DMatrix<f64>> {
    let idx = labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| CliError::Data(format!("unknown class label '{l}'")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(one_hot(&idx, classes.len())?)
}

/// Response columns: the given names or positions, or the last column.
pub fn response_columns(table: &Table, spec: &[String], task: Task) -> CliResult<Vec<usize>> {
    let cols = if spec.is_empty() {
        vec![table.headers.len() - 1]
    } else {
        table.resolve(spec)?
    };
    if task == Task::Classification && cols.len() != 1 {
        return Err(CliError::Usage("classification takes exactly one response column".into()));
    }
    if cols.len() >= table.headers.len() {
        return Err(CliError::Data("no feature columns left after removing responses".into()));
    }
    Ok(cols)
}

/// Features are every column not used as a response.
pub fn load_training(path: &Path, response: &[String], task: Task) -> CliResult<RawData> {
    let table = read_table(path)?;
    let ycols = response_columns(&table, response, task)?;
    let xcols: Vec<usize> = (0..table.headers.len()).filter(|c| !ycols.contains(c)).collect();
    let x = table.numeric(&xcols)?;
    let (y, names) = match task {
        Task::Regression => (
            table.numeric(&ycols)?,
            ycols.iter().map(|&c| table.headers[c].clone()).collect::<Vec<_>>(),
        ),
        Task::Classification => {
            let labels = table.strings(ycols[0])?;
            let classes = class_order(&labels);
            if classes.len() < 2 {
                return Err(CliError::Data(format!(
                    "column '{}' has fewer than two classes",
                    table.headers[ycols[0]]
                )));
            }
            (encode_labels(&labels, &classes)?, classes)
        }
    };
    let mut raw = RawData::new(x, y, task)?;
    raw.feature_names = Some(xcols.iter().map(|&c| table.headers[c].clone()).collect());
    raw.response_names = Some(names);
    Ok(raw)
}

/// Float text that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv(headers: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}
