//! Experiment plan files: flat TOML with explicit grids.
//!
//! ```toml
//! data = "train.csv"
//! response_col = "y"
//! task = "reg"
//! methods = ["lspca", "pcr"]
//! r = 2                    # or a list to cross-validate over r
//! lambdas = [0.01, 1.0, 100.0]
//! lambda_units = "relative"
//! seed = 0
//! repeats = 10
//! folds = 10
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spca::data::{SplitPlan, Task};
use spca::harness::{BandwidthGrid, ExperimentPlan, LambdaGrid, ModeChoice, RPolicy};
use spca::kernel::KernelKind;
use spca::method::Method;
use spca::solver::Algorithm;

use crate::error::{CliError, CliResult};
use crate::{AlgorithmArg, KernelArg, ModeArg, TaskArg};

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RValue {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub response_col: Vec<String>,
    pub task: TaskArg,
    pub methods: Vec<String>,
    pub r: RValue,
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_units: Units,
    pub bandwidths: Option<Vec<f64>>,
    #[serde(default)]
    pub bandwidth_units: Units,
    #[serde(default)]
    pub kernel: Option<KernelArg>,
    #[serde(default)]
    pub mode: Option<ModeArg>,
    #[serde(default)]
    pub algorithm: Option<AlgorithmArg>,
    #[serde(default)]
    pub seed: u64,
    pub test_fraction: Option<f64>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    #[serde(default)]
    pub lr_reg: f64,
    #[serde(default)]
    pub standardize: bool,
    /// Also run a λ sweep on the first split for each supervised PCA method.
    #[serde(default = "yes")]
    pub pareto: bool,
}

fn yes() -> bool {
    true
}

impl PlanFile {
    pub fn load(path: &Path) -> CliResult<PlanFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn task(&self) -> Task {
        self.task.into()
    }

    pub fn to_plan(&self) -> CliResult<ExperimentPlan> {
        let methods = self
            .methods
            .iter()
            .map(|m| m.parse::<Method>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?;
        let defaults = ExperimentPlan::default();
        let split_defaults = SplitPlan::default();
        let lambda_grid = match (&self.lambdas, self.lambda_units) {
            (None, _) => defaults.lambda_grid,
            (Some(v), Units::Relative) => LambdaGrid::Relative(v.clone()),
            (Some(v), Units::Absolute) => LambdaGrid::Absolute(v.clone()),
        };
        let bandwidth_grid = match (&self.bandwidths, self.bandwidth_units) {
            (None, _) => defaults.bandwidth_grid,
            (Some(v), Units::Relative) => BandwidthGrid::Relative(v.clone()),
            (Some(v), Units::Absolute) => BandwidthGrid::Absolute(v.clone()),
        };
        let plan = ExperimentPlan {
            methods,
            r: match &self.r {
                RValue::One(r) => RPolicy::Fixed(*r),
                RValue::Many(v) => RPolicy::Cv(v.clone()),
            },
            lambda_grid,
            bandwidth_grid,
            kernel: self.kernel.map_or(KernelKind::Rbf, Into::into),
            mode: match self.mode.unwrap_or(ModeArg::Cv) {
                ModeArg::Cv => ModeChoice::Cv,
                ModeArg::Mle => ModeChoice::Mle,
            },
            algorithm: self.algorithm.map_or(Algorithm::Alternating, Into::into),
            split: SplitPlan {
                seed: self.seed,
                test_fraction: self.test_fraction.unwrap_or(split_defaults.test_fraction),
                n_folds: self.folds.unwrap_or(split_defaults.n_folds),
                n_repeats: self.repeats.unwrap_or(split_defaults.n_repeats),
            },
            lr_reg: self.lr_reg,
            threads: 0,
        };
        plan.validate(self.task()).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(plan)
    }
}
