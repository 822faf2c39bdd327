use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ProblemError;

/// Objectives of the form `f(x) = (1/N) Σ_i f_i(x)` with per-sample gradients.
pub trait ComponentGradients: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean of the component gradients over `indices`.
    fn batch_gradient(&self, x: &DVector<f64>, indices: &[usize]) -> DVector<f64>;
}

/// Least-squares data `f(x) = 1/(2N) Σ (a_iᵀx − b_i)²`, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresData {
    features: DMatrix<f64>,
    targets: DVector<f64>,
}

impl LeastSquaresData {
    pub fn new(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self, ProblemError> {
        if features.nrows() != targets.len() {
            return Err(ProblemError::Data(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if features.nrows() == 0 {
            return Err(ProblemError::Data("no samples".into()));
        }
        Ok(Self { features, targets })
    }

    /// Synthetic data `b = A x_true + noise`, deterministic in `seed`.
    pub fn synthetic(samples: usize, x_true: &DVector<f64>, noise: f64, seed: u64) -> Self {
        let n = x_true.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = DMatrix::from_fn(samples, n, |_, _| StandardNormal.sample(&mut rng));
        let eps: DVector<f64> =
            DVector::from_fn(samples, |_, _| noise * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let targets = &features * x_true + eps;
        Self { features, targets }
    }

    /// Read rows `features…, target` from a headerless CSV file.
    pub fn from_csv(path: &Path) -> Result<Self, ProblemError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| ProblemError::Data(format!("{}: {e}", path.display())))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| ProblemError::Data(e.to_string()))?;
            let row = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ProblemError::Data(format!("row {}: {e}", line + 1)))?;
            if row.len() < 2 {
                return Err(ProblemError::Data(format!(
                    "row {}: need at least one feature and a target",
                    line + 1
                )));
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(ProblemError::Data(format!(
                        "row {} has {} columns, expected {}",
                        line + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(ProblemError::Data(format!("{}: no rows", path.display())));
        }
        let cols = rows[0].len();
        let features = DMatrix::from_fn(rows.len(), cols - 1, |r, c| rows[r][c]);
        let targets = DVector::from_fn(rows.len(), |r, _| rows[r][cols - 1]);
        Self::new(features, targets)
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let r = &self.features * x - &self.targets;
        0.5 * r.norm_squared() / self.targets.len() as f64
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        self.features.transpose() * &self.features / self.targets.len() as f64
    }
}

impl ComponentGradients for LeastSquaresData {
    fn len(&self) -> usize {
        self.targets.len()
    }

    fn batch_gradient(&self, x: &DVector<f64>, indices: &[usize]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for &i in indices {
            let row = self.features.row(i);
            let r = row.dot(&x.transpose()) - self.targets[i];
            g.axpy(r, &row.transpose(), 1.0);
        }
        g / indices.len() as f64
    }
}
