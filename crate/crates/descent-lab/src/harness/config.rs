//! Serializable experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Matrix, Vector};
use crate::objectives::{
    make_affine_power_norm_loss, make_glm_loss, make_hamiltonian_quartic_loss, make_logistic_loss,
    make_lp_regression_loss, make_power_norm_loss, make_quadratic_loss, Dataset, GaussianSampler,
    Objective,
};
use crate::order::Order;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that replaces every seed in a configuration.
pub const SEED_ENV: &str = "DESCENT_LAB_SEED";

/// Seeded Gaussian design with the half-zero, half-one target recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
}

impl DataSpec {
    pub fn build(&self) -> Dataset {
        Dataset::gaussian(self.seed, self.rows, self.cols)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `(1/p)‖x‖₂^p`.
    PowerNorm { p: f64, dim: usize },
    /// `(1/p)‖Ax - b‖₂^p`.
    AffinePowerNorm { p: f64, data: DataSpec },
    /// `(1/p)‖Ax - b‖_p^p`.
    LpRegression { p: f64, data: DataSpec },
    Logistic { data: DataSpec },
    Glm { data: DataSpec },
    HamiltonianQuartic,
    /// `½ Σ d_i x_i² - cᵀx`, shifted to minimum 0.
    Quadratic { diag: Vec<f64>, c: Vec<f64> },
}

impl LossSpec {
    pub fn build(&self) -> Result<Objective> {
        match self {
            LossSpec::PowerNorm { p, dim } => make_power_norm_loss(*p, Geometry::identity(*dim)),
            LossSpec::AffinePowerNorm { p, data } => make_affine_power_norm_loss(&data.build(), *p),
            LossSpec::LpRegression { p, data } => make_lp_regression_loss(&data.build(), *p),
            LossSpec::Logistic { data } => make_logistic_loss(&data.build()),
            LossSpec::Glm { data } => make_glm_loss(&data.build()),
            LossSpec::HamiltonianQuartic => Ok(make_hamiltonian_quartic_loss()),
            LossSpec::Quadratic { diag, c } => make_quadratic_loss(
                Matrix::from_diagonal(&Vector::from_column_slice(diag)),
                Vector::from_column_slice(c),
            ),
        }
        .map_err(|e| Error::Config(format!("cannot build loss: {e}")))
    }

    fn seeds_mut(&mut self) -> Option<&mut u64> {
        match self {
            LossSpec::AffinePowerNorm { data, .. }
            | LossSpec::LpRegression { data, .. }
            | LossSpec::Logistic { data }
            | LossSpec::Glm { data } => Some(&mut data.seed),
            _ => None,
        }
    }
}

/// One method run. `id` is one of `gd`, `nag`, `rgd`, `argd-nesterov`, `argd-ms`, `aprox-ms`,
/// `atensor-ms`, `rcd`, `arcd` or `restart:<accelerated id>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub id: String,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Order>,
    /// Nesterov gradient placement, `x` (default) or `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Hölder exponent of the tensor method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Gradient-domination constant for restarts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// Coordinate sampling seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// How `eta` was chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<String>,
}

impl MethodSpec {
    pub fn new(id: &str, eta: f64) -> Self {
        MethodSpec {
            id: id.to_string(),
            eta,
            p: None,
            variant: None,
            nu: None,
            mu: None,
            epochs: None,
            seed: None,
            label: None,
            step_rule: None,
        }
    }

    pub fn with_order(mut self, p: Order) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    /// Legend name: the label, else the id with its order.
    pub fn name(&self) -> String {
        match (&self.label, self.p) {
            (Some(l), _) => l.clone(),
            (None, Some(p)) => format!("{}(p={p})", self.id),
            (None, None) => self.id.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub iterations: usize,
    /// Rows past this many gradient evaluations are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grad_evals: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum X0Spec {
    Zeros,
    Point { values: Vec<f64> },
    Gaussian { seed: u64, scale: f64 },
}

impl X0Spec {
    pub fn build(&self, dim: usize) -> Result<Vector> {
        match self {
            X0Spec::Zeros => Ok(Vector::zeros(dim)),
            X0Spec::Point { values } if values.len() == dim => Ok(Vector::from_column_slice(values)),
            X0Spec::Point { values } => Err(Error::Config(format!(
                "initial point has {} entries, loss dimension is {dim}",
                values.len()
            ))),
            X0Spec::Gaussian { seed, scale } => Ok(GaussianSampler::new(*seed).vector(dim) * *scale),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Svg,
}

/// Horizontal axis of a plot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Iterations,
    GradEvals,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Iterations => "iterations",
            Axis::GradEvals => "grad_evals",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub formats: Vec<Format>,
    pub axes: Vec<Axis>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            formats: vec![Format::Csv, Format::Svg],
            axes: vec![Axis::Iterations],
        }
    }
}

/// Where `f*` comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePolicy {
    /// The loss's analytic optimum; an error when there is none.
    Known,
    /// A damped Newton solve from the initial point.
    Newton,
    /// Known, else Newton, else the best value any method reached.
    #[default]
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub loss: LossSpec,
    pub methods: Vec<MethodSpec>,
    pub budget: Budget,
    pub x0: X0Spec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub reference: ReferencePolicy,
}

pub(crate) const ACCELERATED_IDS: [&str; 5] = ["nag", "argd-nesterov", "argd-ms", "aprox-ms", "atensor-ms"];
pub(crate) const METHOD_IDS: [&str; 9] = [
    "gd", "rgd", "rcd", "arcd", "nag", "argd-nesterov", "argd-ms", "aprox-ms", "atensor-ms",
];

pub(crate) fn known_id(id: &str) -> bool {
    match id.strip_prefix("restart:") {
        Some(inner) => ACCELERATED_IDS.contains(&inner),
        None => METHOD_IDS.contains(&id),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.budget.iterations == 0 || self.budget.max_grad_evals == Some(0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        for m in &self.methods {
            if !known_id(&m.id) {
                return Err(Error::Config(format!("unknown method id {:?}", m.id)));
            }
            if !(m.eta > 0.0) || !m.eta.is_finite() {
                return Err(Error::Config(format!("{}: step must be positive, got {}", m.id, m.eta)));
            }
        }
        Ok(())
    }

    /// Short SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configs serialize");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    /// Replaces every dataset, initial-point and sampling seed with `seed`.
    pub fn override_seeds(&mut self, seed: u64) {
        if let Some(s) = self.loss.seeds_mut() {
            *s = seed;
        }
        if let X0Spec::Gaussian { seed: s, .. } = &mut self.x0 {
            *s = seed;
        }
        for m in &mut self.methods {
            if m.seed.is_some() || matches!(m.id.as_str(), "rcd" | "arcd") {
                m.seed = Some(seed);
            }
        }
    }

    /// Applies `DESCENT_LAB_SEED` when set; a malformed value is a config error.
    pub fn apply_env_seed(&mut self) -> Result<Option<u64>> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let seed = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                self.override_seeds(seed);
                Ok(Some(seed))
            }
            Err(_) => Ok(None),
        }
    }
}
