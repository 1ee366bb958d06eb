//! Data drawn from the latent-subspace model
//! `x ~ N(0, σ_x² I + α L L')`, `y | x ~ N(β'L'x, σ_y² I)` (or a softmax draw
//! for classification).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{one_hot, RawData, Task};
use crate::error::{Result, SpcaError};
use crate::grassmann::GrassmannPoint;
use crate::linalg::random_normal;
use crate::regression::softmax_rows;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    /// Response columns (regression) or classes (classification).
    pub q: usize,
    pub sigma_x2: f64,
    pub alpha: f64,
    pub sigma_y2: f64,
    pub task: Task,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 500,
            p: 20,
            r: 3,
            q: 1,
            sigma_x2: 1.0,
            alpha: 25.0,
            sigma_y2: 0.01,
            task: Task::Regression,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub raw: RawData,
    pub l_true: GrassmannPoint,
    /// `r×q`; the last column is zero for classification.
    pub beta_true: DMatrix<f64>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.r == 0 || spec.r > spec.p || spec.n < 2 || spec.q == 0 {
        return Err(SpcaError::InvalidArgument(format!(
            "invalid synthetic sizes n={} p={} r={} q={}",
            spec.n, spec.p, spec.r, spec.q
        )));
    }
    if !(spec.sigma_x2 > 0.0 && spec.alpha >= 0.0 && spec.sigma_y2 >= 0.0) {
        return Err(SpcaError::InvalidArgument("noise scales must be nonnegative".into()));
    }
    if spec.task == Task::Classification && spec.q < 2 {
        return Err(SpcaError::InvalidArgument("classification needs q ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = GrassmannPoint::random(spec.p, spec.r, &mut rng);
    let mut beta = random_normal(spec.r, spec.q, &mut rng);
    // latent scores with variance σ_x² + α along span(L)
    let s = random_normal(spec.n, spec.r, &mut rng) * spec.alpha.sqrt();
    let e = random_normal(spec.n, spec.p, &mut rng) * spec.sigma_x2.sqrt();
    let x = &s * l.basis().transpose() + e;
    let scores = &x * l.basis();
    let y = match spec.task {
        Task::Regression => {
            let noise = DMatrix::from_fn(spec.n, spec.q, |_, _| {
                spec.sigma_y2.sqrt() * rng.sample::<f64, _>(StandardNormal)
            });
            &scores * &beta + noise
        }
        Task::Classification => {
            beta.column_mut(spec.q - 1).fill(0.0);
            // keep logits of order one whatever the latent scale
            let scale = 1.0 / (spec.sigma_x2 + spec.alpha).sqrt();
            beta *= scale;
            let probs = softmax_rows(&(&scores * &beta));
            let mut labels = Vec::with_capacity(spec.n);
            for row in probs.row_iter() {
                let w: Vec<f64> = row.iter().cloned().collect();
                let dist = WeightedIndex::new(&w)
                    .map_err(|e| SpcaError::Numerical(format!("class probabilities: {e}")))?;
                labels.push(dist.sample(&mut rng));
            }
            one_hot(&labels, spec.q)?
        }
    };
    let raw = RawData::new(x, y, spec.task)?;
    Ok(SyntheticData {
        raw,
        l_true: l,
        beta_true: beta,
    })
}
