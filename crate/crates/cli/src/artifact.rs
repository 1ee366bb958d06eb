//! Versioned plain-text model files.
//!
//! Layout, one item per line:
//!
//! ```text
//! spca-model 1
//! method lspca
//! lambda 0.25            (or `lambda none`)
//! gamma 1.0
//! nuisance none          (or `nuisance <σ_x²> <α> <σ_y²|none>`)
//! kernel none            (or `kernel linear`, `kernel rbf <width>`)
//! features 2             (followed by one name per line)
//! responses 1
//! classes 0
//! matrix x_means 1 2     (followed by the rows)
//! ...
//! end
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! loaded model predicts bit-identically to the saved one.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use spca::data::Centering;
use spca::kernel::{CenteredKernel, KernelKind, KernelSpec};
use spca::method::{Embedding, FittedModel, Method};
use spca::nuisance::Nuisance;

use crate::error::{CliError, CliResult};
use crate::table::fmt_f64;

pub const MAGIC: &str = "spca-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Artifact {
    pub model: FittedModel,
    /// Response column names in the training file.
    pub response_columns: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), fmt_f64)
}

fn names(out: &mut String, key: &str, list: &[String]) -> CliResult<()> {
    out.push_str(&format!("{key} {}\n", list.len()));
    for n in list {
        if n.contains('\n') {
            return Err(CliError::Data(format!("name {n:?} contains a newline")));
        }
        out.push_str(n);
        out.push('\n');
    }
    Ok(())
}

fn matrix(out: &mut String, key: &str, m: &DMatrix<f64>) {
    out.push_str(&format!("matrix {key} {} {}\n", m.nrows(), m.ncols()));
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

fn row_vector(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

impl Artifact {
    pub fn to_text(&self) -> CliResult<String> {
        let m = &self.model;
        let mut out = format!("{MAGIC} {VERSION}\nmethod {}\n", m.method);
        out.push_str(&format!("lambda {}\ngamma {}\n", opt(m.lambda), opt(m.gamma)));
        match &m.nuisance {
            None => out.push_str("nuisance none\n"),
            Some(nu) => out.push_str(&format!(
                "nuisance {} {} {}\n",
                fmt_f64(nu.sigma_x2),
                fmt_f64(nu.alpha),
                opt(nu.sigma_y2)
            )),
        }
        match &m.embedding {
            Embedding::Linear(_) => out.push_str("kernel none\n"),
            Embedding::Kernel { kernel, .. } => match kernel.spec.kind {
                KernelKind::Linear => out.push_str("kernel linear\n"),
                KernelKind::Rbf => out.push_str(&format!("kernel rbf {}\n", opt(kernel.spec.bandwidth))),
            },
        }
        names(&mut out, "features", m.feature_names.as_deref().unwrap_or(&[]))?;
        names(&mut out, "responses", &self.response_columns)?;
        let classes: &[String] = match m.family() {
            spca::model::Family::Categorical => m.response_names.as_deref().unwrap_or(&[]),
            spca::model::Family::Gaussian => &[],
        };
        names(&mut out, "classes", classes)?;
        matrix(&mut out, "x_means", &row_vector(&m.centering.x_means));
        if let Some(s) = &m.centering.x_scales {
            matrix(&mut out, "x_scales", &row_vector(s));
        }
        if let Some(s) = &m.centering.y_means {
            matrix(&mut out, "y_means", &row_vector(s));
        }
        matrix(&mut out, "basis", m.embedding.basis());
        matrix(&mut out, "beta", &m.beta);
        if let Embedding::Kernel { kernel, .. } = &m.embedding {
            matrix(&mut out, "train_x", &kernel.train_x);
            matrix(&mut out, "kernel_row_means", &row_vector(&kernel.row_means));
            matrix(&mut out, "kernel_grand_mean", &DMatrix::from_element(1, 1, kernel.grand_mean));
        }
        out.push_str("end\n");
        Ok(out)
    }

    pub fn from_text(text: &str) -> CliResult<Artifact> {
        let mut p = Parser { lines: text.lines().enumerate().peekable() };
        let header = p.keyed(MAGIC)?;
        let version: u32 = parse(&header, "version")?;
        if version != VERSION {
            return Err(CliError::Data(format!(
                "unsupported model version {version} (this build reads version {VERSION})"
            )));
        }
        let method = Method::from_str(&p.keyed("method")?).map_err(|e| CliError::Data(e.to_string()))?;
        let lambda = parse_opt(&p.keyed("lambda")?)?;
        let gamma = parse_opt(&p.keyed("gamma")?)?;
        let nuisance = {
            let v = p.keyed("nuisance")?;
            let parts: Vec<&str> = v.split_whitespace().collect();
            match parts.as_slice() {
                ["none"] => None,
                [sx, a, sy] => Some(Nuisance {
                    sigma_x2: parse(sx, "σ_x²")?,
                    alpha: parse(a, "α")?,
                    sigma_y2: parse_opt(sy)?,
                }),
                _ => return Err(CliError::Data(format!("bad nuisance line '{v}'"))),
            }
        };
        let kernel_line = p.keyed("kernel")?;
        let kernel = match kernel_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["none"] => None,
            ["linear"] => Some(KernelSpec::linear()),
            ["rbf", b] => Some(KernelSpec { kind: KernelKind::Rbf, bandwidth: parse_opt(b)? }),
            _ => return Err(CliError::Data(format!("bad kernel line '{kernel_line}'"))),
        };
        let features = p.names("features")?;
        let response_columns = p.names("responses")?;
        let classes = p.names("classes")?;
        let x_means = p.matrix("x_means")?;
        let x_scales = p.optional_matrix("x_scales")?;
        let y_means = p.optional_matrix("y_means")?;
        let basis = p.matrix("basis")?;
        let beta = p.matrix("beta")?;
        let embedding = match kernel {
            None => Embedding::Linear(basis),
            Some(spec) => {
                let train_x = p.matrix("train_x")?;
                let row_means = p.matrix("kernel_row_means")?;
                let grand = p.matrix("kernel_grand_mean")?;
                if grand.shape() != (1, 1) || row_means.ncols() != train_x.nrows() {
                    return Err(CliError::Data("kernel aggregates have the wrong shape".into()));
                }
                let mut kernel = CenteredKernel::new(&train_x, &spec)?;
                kernel.row_means = DVector::from_row_slice(row_means.as_slice());
                kernel.grand_mean = grand[(0, 0)];
                Embedding::Kernel { kernel, l: basis }
            }
        };
        p.keyed("end")?;
        let as_vec = |m: DMatrix<f64>| DVector::from_row_slice(m.transpose().as_slice());
        let centering = Centering {
            x_means: as_vec(x_means),
            x_scales: x_scales.map(as_vec),
            y_means: y_means.map(as_vec),
        };
        let response_names = if classes.is_empty() { response_columns.clone() } else { classes };
        let model = FittedModel {
            method,
            centering,
            embedding,
            beta,
            lambda,
            gamma,
            nuisance,
            feature_names: (!features.is_empty()).then_some(features),
            response_names: Some(response_names),
        };
        check_shapes(&model)?;
        Ok(Artifact { model, response_columns })
    }
}

fn check_shapes(m: &FittedModel) -> CliResult<()> {
    let p = m.centering.x_means.len();
    let basis = m.embedding.basis();
    let expected_rows = match &m.embedding {
        Embedding::Linear(_) => p,
        Embedding::Kernel { kernel, .. } => {
            if kernel.train_x.ncols() != p {
                return Err(CliError::Data("kernel training rows do not match the feature count".into()));
            }
            kernel.n()
        }
    };
    if basis.nrows() != expected_rows || m.beta.nrows() != basis.ncols() {
        return Err(CliError::Data("basis and coefficient shapes are inconsistent".into()));
    }
    if m.feature_names.as_ref().is_some_and(|f| f.len() != p) {
        return Err(CliError::Data("feature name count does not match the model".into()));
    }
    Ok(())
}

fn parse<T: FromStr>(s: &str, what: &str) -> CliResult<T> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Data(format!("cannot parse {what} from '{s}'")))
}

fn parse_opt(s: &str) -> CliResult<Option<f64>> {
    match s.trim() {
        "none" => Ok(None),
        v => parse(v, "number").map(Some),
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> CliResult<(usize, &'a str)> {
        self.lines
            .next()
            .ok_or_else(|| CliError::Data("model file ends early".into()))
    }

    /// Value of a `key value` line.
    fn keyed(&mut self, key: &str) -> CliResult<String> {
        let (i, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            None if line == key => Ok(String::new()),
            _ => Err(CliError::Data(format!("model line {}: expected '{key}', got '{line}'", i + 1))),
        }
    }

    fn names(&mut self, key: &str) -> CliResult<Vec<String>> {
        let count: usize = parse(&self.keyed(key)?, key)?;
        (0..count).map(|_| self.next().map(|(_, l)| l.to_string())).collect()
    }

    fn optional_matrix(&mut self, key: &str) -> CliResult<Option<DMatrix<f64>>> {
        let prefix = format!("matrix {key} ");
        match self.lines.peek() {
            Some((_, l)) if l.starts_with(&prefix) => self.matrix(key).map(Some),
            _ => Ok(None),
        }
    }

    fn matrix(&mut self, key: &str) -> CliResult<DMatrix<f64>> {
        let (i, line) = self.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (rows, cols) = match parts.as_slice() {
            ["matrix", k, r, c] if *k == key => (parse::<usize>(r, "rows")?, parse::<usize>(c, "columns")?),
            _ => {
                return Err(CliError::Data(format!(
                    "model line {}: expected matrix '{key}', got '{line}'",
                    i + 1
                )))
            }
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (j, row) = self.next()?;
            let vals = row
                .split_whitespace()
                .map(|v| parse::<f64>(v, key))
                .collect::<CliResult<Vec<_>>>()?;
            if vals.len() != cols {
                return Err(CliError::Data(format!(
                    "model line {}: matrix '{key}' row has {} values, expected {cols}",
                    j + 1,
                    vals.len()
                )));
            }
            data.extend(vals);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}
