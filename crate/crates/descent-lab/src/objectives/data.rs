//! Seeded Gaussian sampling and datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Matrix, Vector};

/// Standard normal stream: ChaCha20 (counter-based, 64-bit seed) plus Box–Muller.
///
/// The output is platform independent for a given seed.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    pub fn new(seed: u64) -> Self {
        GaussianSampler {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn vector(&mut self, n: usize) -> Vector {
        Vector::from_iterator(n, (0..n).map(|_| self.normal()))
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.normal()).collect();
        Matrix::from_row_slice(rows, cols, &data)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

/// A design matrix with targets, stored row-major for serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Seed the entries were drawn from, when generated.
    pub seed: Option<u64>,
    /// `[rows, cols]`.
    pub shape: [usize; 2],
    pub matrix: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    /// Gaussian matrix; the first `rows / 2` targets are 0 and the rest 1.
    pub fn gaussian(seed: u64, rows: usize, cols: usize) -> Self {
        let mut g = GaussianSampler::new(seed);
        let matrix = (0..rows)
            .map(|_| (0..cols).map(|_| g.normal()).collect())
            .collect();
        let targets = (0..rows)
            .map(|i| if i < rows / 2 { 0.0 } else { 1.0 })
            .collect();
        Dataset {
            seed: Some(seed),
            shape: [rows, cols],
            matrix,
            targets,
        }
    }

    pub fn from_rows(matrix: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        let ds = Dataset {
            seed: None,
            shape: [rows, cols],
            matrix,
            targets,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// A single row `w` with target `y`.
    pub fn single(w: &[f64], y: f64) -> Self {
        Dataset {
            seed: None,
            shape: [1, w.len()],
            matrix: vec![w.to_vec()],
            targets: vec![y],
        }
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        self.targets = targets;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let [rows, cols] = self.shape;
        if rows == 0 || cols == 0 {
            return Err(Error::arg("dataset must have at least one row and column"));
        }
        if self.matrix.len() != rows || self.matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::arg(format!(
                "dataset rows do not match declared shape {rows}x{cols}"
            )));
        }
        if self.targets.len() != rows {
            return Err(Error::arg(format!(
                "dataset has {} targets for {rows} rows",
                self.targets.len()
            )));
        }
        if self.matrix.iter().flatten().chain(&self.targets).any(|v| !v.is_finite()) {
            return Err(Error::arg("dataset contains non-finite entries"));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn design(&self) -> Matrix {
        let flat: Vec<f64> = self.matrix.iter().flatten().copied().collect();
        Matrix::from_row_slice(self.rows(), self.cols(), &flat)
    }

    pub fn target_vector(&self) -> Vector {
        Vector::from_column_slice(&self.targets)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text)?;
        ds.validate()?;
        Ok(ds)
    }
}
