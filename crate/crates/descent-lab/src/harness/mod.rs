//! Experiment configuration, method dispatch, certification, figure recipes and output.

mod config;
mod figures;
mod output;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accel::{
    certify_kernel_margins, ms_accelerate, nesterov_rate_bound, ms_rate_bound, restart_epoch_length,
    restart_wrap, Accelerated, MsConfig, MsVariant, Nesterov, NesterovVariant,
};
use crate::coordinate::{accel_rcd, certify_coordinate_descent, run_rcd, CoordinateConfig};
use crate::descent::{
    certify_delta_descent, rate_bound, reference_solution, run_descent, BoundKind, DescentConfig,
    Method, RateParams, Trace,
};
use crate::error::{Error, Result};
use crate::geometry::{Dgf, Vector};
use crate::objectives::Objective;
use crate::order::Order;

pub use config::{
    Axis, Budget, DataSpec, ExperimentConfig, Format, LossSpec, MethodSpec, OutputSpec, ReferencePolicy,
    X0Spec, SCHEMA_VERSION, SEED_ENV,
};
pub use figures::{build_figure_experiment, probe_step, FigureName};
pub use output::{emit_csv, emit_metadata, emit_svg_plot, render_csv, render_svg, GAP_FLOOR, RUN_CSV_HEADER};

/// One output row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub k: usize,
    pub grad_evals: u64,
    pub f_gap: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// Legend name.
    pub method: String,
    pub id: String,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<String>,
    pub config_hash: String,
    pub f_star: Option<f64>,
    /// `analytic`, `newton` or `best-observed`.
    pub f_star_provenance: String,
    pub wall_time_s: f64,
    /// Some gap fell below the plotting floor.
    pub gap_clamped: bool,
    pub error: Option<String>,
    pub details: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<Row>,
    pub meta: RunMeta,
}

impl RunRecord {
    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.f_gap)
    }

    /// Gap of the last row using at most `evals` gradient evaluations.
    pub fn gap_at_evals(&self, evals: u64) -> Option<f64> {
        self.rows.iter().take_while(|r| r.grad_evals <= evals).last().map(|r| r.f_gap)
    }

    pub fn gap_at_iteration(&self, k: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.f_gap)
    }
}

fn required_order(spec: &MethodSpec) -> Result<Order> {
    spec.p
        .ok_or_else(|| Error::Config(format!("method {} needs an order p", spec.id)))
}

fn integer_order(spec: &MethodSpec) -> Result<usize> {
    match required_order(spec)? {
        Order::Finite(p) if p.fract() == 0.0 && p >= 2.0 => Ok(p as usize),
        p => Err(Error::Config(format!("method {} needs an integer order, got {p}", spec.id))),
    }
}

fn nesterov_variant(spec: &MethodSpec) -> Result<NesterovVariant> {
    match spec.variant.as_deref() {
        None | Some("x") => Ok(NesterovVariant::GradAtX),
        Some("y") => Ok(NesterovVariant::GradAtY),
        Some(v) => Err(Error::Config(format!("unknown Nesterov variant {v:?} (expected x or y)"))),
    }
}

fn kernel(spec: &MethodSpec, obj: &Objective) -> Result<DescentConfig> {
    let method = match spec.id.as_str() {
        "gd" | "nag" => Method::Gd,
        _ => Method::Rgd(required_order(spec)?),
    };
    Ok(DescentConfig::new(method, spec.eta, obj.geometry().clone()))
}

fn accelerated(id: &str, spec: &MethodSpec, obj: &Objective) -> Result<Accelerated> {
    let geom = obj.geometry().clone();
    let ms = |variant| Accelerated::Ms(MsConfig::new(variant, spec.eta, geom.clone()));
    Ok(match id {
        "nag" | "argd-nesterov" => Accelerated::Nesterov(Nesterov::new(kernel(spec, obj)?, nesterov_variant(spec)?)),
        "argd-ms" => ms(MsVariant::Rgd {
            p: integer_order(spec)? as f64,
        }),
        "aprox-ms" => ms(MsVariant::Prox {
            p: integer_order(spec)? as f64,
        }),
        "atensor-ms" => ms(MsVariant::Tensor {
            p: integer_order(spec)?,
            nu: spec.nu.unwrap_or(1.0),
        }),
        other => return Err(Error::Config(format!("{other:?} is not an accelerated method"))),
    })
}

fn coordinate_config(spec: &MethodSpec, obj: &Objective) -> Result<CoordinateConfig> {
    let seed = spec.seed.unwrap_or(0);
    Ok(CoordinateConfig::broadcast(spec.eta, obj.dim(), required_order(spec)?, seed))
}

fn power_dgf(p: usize, x0: &Vector, obj: &Objective) -> Result<Dgf> {
    if p == 2 {
        Ok(Dgf::quadratic(obj.geometry().clone()))
    } else {
        Dgf::power_p(p as f64, x0.clone(), obj.geometry().clone())
    }
}

fn run_accelerated(acc: &Accelerated, obj: &Objective, x0: &Vector, k: usize) -> Result<Trace> {
    match acc {
        Accelerated::Nesterov(n) => n.run(obj, &n.default_dgf(x0)?, x0, k),
        Accelerated::Ms(m) => ms_accelerate(m, obj, &Dgf::quadratic(m.geometry.clone()), x0, k),
    }
}

/// Runs one method for the budget's iterations and drops rows past its evaluation cap.
pub fn run_method(spec: &MethodSpec, obj: &Objective, x0: &Vector, budget: &Budget) -> Result<Trace> {
    let k = budget.iterations;
    let mut trace = match spec.id.as_str() {
        "gd" | "rgd" => run_descent(&kernel(spec, obj)?, obj, x0, k),
        "rcd" => {
            let c = coordinate_config(spec, obj)?;
            run_rcd(obj, &c, x0, k, c.seed)
        }
        "arcd" => {
            let c = coordinate_config(spec, obj)?;
            let dgf = power_dgf(integer_order(spec)?, x0, obj)?;
            accel_rcd(obj, &dgf, &c, x0, k, c.seed)
        }
        id => match id.strip_prefix("restart:") {
            Some(inner) => {
                let acc = accelerated(inner, spec, obj)?;
                let epochs = match spec.epochs {
                    Some(e) => e,
                    None => {
                        let mu = spec
                            .mu
                            .or_else(|| obj.gradient_dominated().map(|g| g.mu))
                            .ok_or_else(|| Error::Config("restarting needs a gradient-domination constant".into()))?;
                        let c = restart_epoch_length(acc.style(), acc.order()?, acc.kappa(mu)?)?;
                        (k / c).max(1)
                    }
                };
                restart_wrap(&acc, obj, x0, spec.mu, epochs)
            }
            None => run_accelerated(&accelerated(id, spec, obj)?, obj, x0, k),
        },
    }?;
    if let Some(cap) = budget.max_grad_evals {
        let keep = trace.records.iter().take_while(|r| r.grad_evals <= cap).count().max(1);
        trace.records.truncate(keep);
    }
    Ok(trace)
}

/// A method's trace, or the error that stopped it.
#[derive(Debug)]
pub struct MethodOutcome {
    pub spec: MethodSpec,
    pub result: Result<Trace>,
    pub wall_time_s: f64,
}

/// Reference minimum with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub f_star: Option<f64>,
    pub provenance: String,
}

fn resolve_reference(config: &ExperimentConfig, obj: Objective, x0: &Vector) -> Result<(Objective, Reference)> {
    let analytic = |obj: Objective| {
        let f = obj.known_minimum();
        (obj, Reference {
            f_star: f,
            provenance: "analytic".into(),
        })
    };
    let newton = |obj: Objective| -> Result<(Objective, Reference)> {
        let (x, f) = reference_solution(&obj, x0)?;
        Ok((obj.with_reference(f, Some(x)), Reference {
            f_star: Some(f),
            provenance: "newton".into(),
        }))
    };
    match config.reference {
        ReferencePolicy::Known if obj.known_minimum().is_some() => Ok(analytic(obj)),
        ReferencePolicy::Known => Err(Error::Config(format!("loss {} has no analytic minimum", obj.id()))),
        ReferencePolicy::Newton => newton(obj),
        ReferencePolicy::Auto if obj.known_minimum().is_some() => Ok(analytic(obj)),
        ReferencePolicy::Auto => match reference_solution(&obj, x0) {
            Ok((x, f)) => Ok((obj.with_reference(f, Some(x)), Reference {
                f_star: Some(f),
                provenance: "newton".into(),
            })),
            Err(_) => Ok((obj, Reference {
                f_star: None,
                provenance: "best-observed".into(),
            })),
        },
    }
}

/// Builds the objective, resolves `f*` and runs every method on an independent copy.
pub fn execute(config: &ExperimentConfig) -> Result<(Vec<MethodOutcome>, Reference)> {
    config.validate()?;
    let obj = config.loss.build()?;
    let x0 = config.x0.build(obj.dim())?;
    let (obj, mut reference) = resolve_reference(config, obj, &x0)?;
    let outcomes: Vec<MethodOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = config
            .methods
            .iter()
            .map(|spec| {
                let (obj, x0) = (obj.clone_fresh(), &x0);
                let budget = &config.budget;
                s.spawn(move || {
                    let start = Instant::now();
                    let result = run_method(spec, &obj, x0, budget);
                    MethodOutcome {
                        spec: spec.clone(),
                        result,
                        wall_time_s: start.elapsed().as_secs_f64(),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("method thread panicked")).collect()
    });
    if reference.f_star.is_none() {
        reference.f_star = outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok())
            .flat_map(|t| t.records.iter().map(|r| r.f_value))
            .filter(|f| f.is_finite())
            .reduce(f64::min);
    }
    Ok((outcomes, reference))
}

fn to_record(outcome: &MethodOutcome, reference: &Reference, hash: &str) -> RunRecord {
    let f_star = reference.f_star;
    let (rows, error, details) = match &outcome.result {
        Ok(t) => (
            t.records
                .iter()
                .map(|r| Row {
                    k: r.k,
                    grad_evals: r.grad_evals,
                    f_gap: f_star.map_or(f64::NAN, |f| r.f_value - f),
                    grad_norm: r.grad_dual_norm,
                })
                .collect(),
            None,
            t.meta.clone(),
        ),
        Err(e) => (Vec::new(), Some(e.to_string()), BTreeMap::new()),
    };
    let gap_clamped = rows.iter().any(|r: &Row| r.f_gap.is_finite() && r.f_gap < GAP_FLOOR);
    RunRecord {
        rows,
        meta: RunMeta {
            method: outcome.spec.name(),
            id: outcome.spec.id.clone(),
            eta: outcome.spec.eta,
            step_rule: outcome.spec.step_rule.clone(),
            config_hash: hash.to_string(),
            f_star,
            f_star_provenance: reference.provenance.clone(),
            wall_time_s: outcome.wall_time_s,
            gap_clamped,
            error,
            details,
        },
    }
}

/// One record per method, in configuration order. Method failures are recorded in
/// `meta.error` without stopping the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let (outcomes, reference) = execute(config)?;
    let hash = config.hash();
    Ok(outcomes.iter().map(|o| to_record(o, &reference, &hash)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodCertification {
    pub method: String,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    /// The failure was a configuration problem rather than a solver failure.
    pub config_error: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport {
    pub experiment: String,
    pub methods: Vec<MethodCertification>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.methods
            .iter()
            .all(|m| m.error.is_none() && m.checks.iter().all(|c| c.passed))
    }

    pub fn errored(&self) -> bool {
        self.methods.iter().any(|m| m.error.is_some())
    }

    pub fn config_errored(&self) -> bool {
        self.methods.iter().any(|m| m.config_error)
    }
}

const ENVELOPE_SLACK: f64 = 1e-9;

fn lyapunov_checks(trace: &Trace, checks: &mut Vec<Check>) -> Option<f64> {
    let values: Vec<f64> = trace
        .records
        .iter()
        .filter_map(|r| r.certificates.get("lyapunov").copied())
        .collect();
    let e0 = *values.first()?;
    let slack = 1e-9 * (1.0 + e0);
    let worst = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "lyapunov",
        values.windows(2).all(|w| w[1] <= w[0] + slack),
        format!("worst increase {worst:e} (slack {slack:e})"),
    ));
    Some(e0)
}

fn envelope_check(name: &str, trace: &Trace, bound: impl Fn(f64) -> f64) -> Check {
    let mut worst = 0.0f64;
    let mut first = None;
    for r in trace.records.iter().skip(1) {
        let b = bound(r.k as f64);
        let ratio = r.f_gap / b;
        worst = worst.max(ratio);
        if !(r.f_gap <= b * (1.0 + ENVELOPE_SLACK)) && first.is_none() {
            first = Some(r.k);
        }
    }
    Check::new(
        name,
        first.is_none(),
        match first {
            None => format!("worst gap/bound {worst:e}"),
            Some(k) => format!("violated first at k={k}, worst gap/bound {worst:e}"),
        },
    )
}

fn window_checks(cfg: &MsConfig, trace: &Trace, checks: &mut Vec<Check>) {
    let (lo, hi) = cfg.variant.window();
    let steps: Vec<_> = trace.records.iter().skip(1).collect();
    let outside = steps
        .iter()
        .filter(|r| r.certificates.get("window").map_or(true, |w| !(lo - 1e-12..=hi + 1e-12).contains(w)))
        .count();
    checks.push(Check::new("window", outside == 0, format!("{outside} of {} steps outside [{lo}, {hi}]", steps.len())));
    let worst = steps
        .iter()
        .filter_map(|r| r.certificates.get("contraction").copied())
        .fold(0.0f64, f64::max);
    checks.push(Check::new("contraction", worst <= 0.5 + 1e-9, format!("worst ratio {worst}")));
}

fn kernel_check(trace: &Trace) -> Check {
    let (worst, holds) = certify_kernel_margins(trace);
    Check::new("kernel_descent", holds, format!("worst margin {worst:e}"))
}

fn certify_trace(spec: &MethodSpec, obj: &Objective, trace: &Trace) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let id = spec.id.as_str();
    match id {
        "gd" | "rgd" => {
            let k = kernel(spec, obj)?;
            let delta = k.delta();
            let rep = certify_delta_descent(trace, delta, k.order(), k.mode)?;
            checks.push(Check::new(
                "delta_descent",
                rep.holds,
                format!("worst margin {:e} over {} steps", rep.worst_margin, rep.checked),
            ));
            if let Some(f_star) = trace.f_star {
                let e0 = trace.records[0].f_value - f_star;
                if e0 > 0.0 {
                    let params = RateParams::new(k.order(), delta, e0);
                    let mins = trace.running_min_grad();
                    let mut bad = None;
                    for (r, m) in trace.records.iter().zip(&mins).skip(1) {
                        let b = rate_bound(BoundKind::GradNorm, &params, r.k as f64)?;
                        if !(*m <= b * (1.0 + ENVELOPE_SLACK)) && bad.is_none() {
                            bad = Some(r.k);
                        }
                    }
                    checks.push(Check::new(
                        "gradient_envelope",
                        bad.is_none(),
                        bad.map_or("holds at every k".into(), |k| format!("violated first at k={k}")),
                    ));
                }
            }
        }
        "rcd" => {
            let c = coordinate_config(spec, obj)?;
            let rep = certify_coordinate_descent(trace, c.delta(), c.order)?;
            checks.push(Check::new(
                "coordinate_descent",
                rep.holds,
                format!("worst margin {:e} over {} steps", rep.worst_margin, rep.checked),
            ));
        }
        "arcd" => checks.push(kernel_check(trace)),
        _ => {
            let (inner, restarted) = match id.strip_prefix("restart:") {
                Some(inner) => (inner, true),
                None => (id, false),
            };
            match accelerated(inner, spec, obj)? {
                Accelerated::Nesterov(n) => {
                    checks.push(kernel_check(trace));
                    if !restarted {
                        if let Some(d0) = lyapunov_checks(trace, &mut checks) {
                            let (p, delta) = (n.schedule()?.p as f64, n.delta());
                            checks.push(envelope_check("rate_envelope", trace, |k| nesterov_rate_bound(p, delta, d0, k)));
                        }
                    }
                }
                Accelerated::Ms(m) => {
                    window_checks(&m, trace, &mut checks);
                    if !restarted {
                        if let Some(d0) = lyapunov_checks(trace, &mut checks) {
                            let (p, delta) = (m.variant.order(), m.delta());
                            checks.push(envelope_check("rate_envelope", trace, |k| ms_rate_bound(p, delta, d0, k)));
                        }
                    }
                }
            }
        }
    }
    Ok(checks)
}

/// Runs every method and checks its descent, Lyapunov and rate-envelope certificates.
pub fn certify_experiment(config: &ExperimentConfig) -> Result<CertificationReport> {
    let (outcomes, _) = execute(config)?;
    let obj = config.loss.build()?;
    let methods = outcomes
        .into_iter()
        .map(|o| {
            let method = o.spec.name();
            let checked = o.result.and_then(|t| certify_trace(&o.spec, &obj, &t));
            match checked {
                Ok(checks) => MethodCertification {
                    method,
                    checks,
                    error: None,
                    config_error: false,
                },
                Err(e) => MethodCertification {
                    method,
                    checks: Vec::new(),
                    config_error: e.is_config(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(CertificationReport {
        experiment: config.name.clone(),
        methods,
    })
}
