//! Figure recipes and the doubling step-size probe.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Axis, Budget, DataSpec, ExperimentConfig, LossSpec, MethodSpec, OutputSpec, X0Spec, SCHEMA_VERSION};
use super::{certify_trace, resolve_reference, run_method};
use crate::error::{Error, Result};
use crate::order::Order;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureName {
    #[serde(rename = "fig_logistic")]
    Logistic,
    #[serde(rename = "fig_l4")]
    L4,
    #[serde(rename = "fig_hamiltonian")]
    Hamiltonian,
}

impl FigureName {
    pub const ALL: [FigureName; 3] = [FigureName::Logistic, FigureName::L4, FigureName::Hamiltonian];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Logistic => "fig_logistic",
            FigureName::L4 => "fig_l4",
            FigureName::Hamiltonian => "fig_hamiltonian",
        }
    }
}

impl FromStr for FigureName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FigureName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure {s:?} (expected fig_logistic, fig_l4 or fig_hamiltonian)")))
    }
}

impl std::fmt::Display for FigureName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seed of the figure datasets.
const DATA_SEED: u64 = 1;
const PROBE_START: f64 = 1.0 / 1_073_741_824.0;
const PROBE_DOUBLINGS: usize = 50;
pub(crate) const PROBE_RULE: &str = "doubling probe from 2^-30: largest step whose run stays below 10 f(x0) and passes certification";

/// Largest `start·2^j` (scanning upward, stopping at the first failure) for which the method
/// runs without error, keeps `f` finite and below `10 f(x0)`, and passes certification.
pub fn probe_step(template: &MethodSpec, config: &ExperimentConfig, start: f64, max_doublings: usize) -> Result<f64> {
    let obj = config.loss.build()?;
    let x0 = config.x0.build(obj.dim())?;
    let (obj, _) = resolve_reference(config, obj, &x0)?;
    let limit = 10.0 * obj.peek_value(&x0).abs();
    let mut best = None;
    let mut eta = start;
    for _ in 0..=max_doublings {
        let spec = MethodSpec {
            eta,
            ..template.clone()
        };
        let run = obj.clone_fresh();
        let stable = match run_method(&spec, &run, &x0, &config.budget) {
            Ok(trace) => {
                trace.records.iter().all(|r| r.f_value.is_finite() && r.f_value <= limit)
                    && certify_trace(&spec, &run, &trace).is_ok_and(|checks| checks.iter().all(|c| c.passed))
            }
            Err(_) => false,
        };
        if !stable {
            break;
        }
        best = Some(eta);
        eta *= 2.0;
    }
    best.ok_or_else(|| Error::Config(format!("{}: no stable step at or above {start:e}", template.name())))
}

fn with_probed_steps(mut config: ExperimentConfig) -> Result<ExperimentConfig> {
    let probed = config
        .methods
        .iter()
        .map(|m| probe_step(m, &config, PROBE_START, PROBE_DOUBLINGS))
        .collect::<Result<Vec<_>>>()?;
    for (m, eta) in config.methods.iter_mut().zip(probed) {
        m.eta = eta;
        m.step_rule = Some(PROBE_RULE.into());
    }
    Ok(config)
}

fn method(id: &str, p: Option<Order>, label: &str) -> MethodSpec {
    let mut m = MethodSpec::new(id, 1.0).with_label(label);
    m.p = p;
    m
}

/// The configuration behind one figure, with probed step sizes filled in.
pub fn build_figure_experiment(name: FigureName) -> Result<ExperimentConfig> {
    with_probed_steps(build_figure_experiment_unprobed(name))
}

pub(super) fn build_figure_experiment_unprobed(name: FigureName) -> ExperimentConfig {
    let data = DataSpec {
        seed: DATA_SEED,
        rows: 10,
        cols: 10,
    };
    let four = Some(Order::Finite(4.0));
    let both_axes = OutputSpec {
        axes: vec![Axis::Iterations, Axis::GradEvals],
        ..OutputSpec::default()
    };
    let (loss, methods, budget, x0, outputs) = match name {
        FigureName::Logistic => (
            LossSpec::Logistic { data },
            vec![
                method("gd", None, "GD"),
                method("nag", None, "NAG"),
                method("rgd", Some(Order::Infinite), "RGD(p=inf)"),
                method("rgd", four, "RGD(p=4)"),
                method("argd-nesterov", four, "ARGD(p=4)"),
            ],
            Budget {
                iterations: 1000,
                max_grad_evals: Some(1000),
            },
            X0Spec::Zeros,
            both_axes,
        ),
        FigureName::L4 => (
            LossSpec::LpRegression { p: 4.0, data },
            vec![
                method("gd", None, "GD"),
                method("nag", None, "NAG"),
                method("rgd", four, "RGD(p=4)"),
                method("argd-nesterov", four, "ARGD(p=4)"),
            ],
            Budget {
                iterations: 1000,
                max_grad_evals: Some(1000),
            },
            X0Spec::Zeros,
            both_axes,
        ),
        FigureName::Hamiltonian => (
            LossSpec::HamiltonianQuartic,
            vec![
                method("gd", None, "GD"),
                method("nag", None, "NAG"),
                method("rgd", four, "RGD(p=4)"),
                method("argd-nesterov", four, "ARGD(p=4)"),
            ],
            Budget {
                iterations: 500,
                max_grad_evals: None,
            },
            X0Spec::Point { values: vec![1.0, 0.5] },
            OutputSpec::default(),
        ),
    };
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: name.as_str().into(),
        loss,
        methods,
        budget,
        x0,
        outputs,
        reference: Default::default(),
    }
}
