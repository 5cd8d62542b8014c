//! Iterate traces, CSV emission and descent-condition certification.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Vector};
use crate::objectives::Objective;
use crate::order::Order;

use super::DescentMode;

pub const CSV_HEADER: &str = "k,f_gap,grad_dual_norm,grad_evals,step_norm,cert_descent_margin";

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub k: usize,
    pub x: Vector,
    pub f_value: f64,
    /// `f(x_k) - f*`, NaN when `f*` is unknown.
    pub f_gap: f64,
    pub grad_dual_norm: f64,
    /// Counted gradient evaluations since the run started.
    pub grad_evals: u64,
    pub step_norm: f64,
    /// Mirror sequence of accelerated methods.
    pub z: Option<Vector>,
    /// Coordinate sampled to produce this iterate.
    pub coordinate: Option<usize>,
    pub certificates: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub method_tag: String,
    pub records: Vec<Record>,
    /// Configuration snapshot and schedule constants.
    pub meta: BTreeMap<String, String>,
    pub f_star: Option<f64>,
    /// Set when the run stopped at the gradient floor.
    pub converged: bool,
}

impl Trace {
    pub fn new(method_tag: impl Into<String>, f_star: Option<f64>) -> Self {
        Trace {
            method_tag: method_tag.into(),
            records: Vec::new(),
            meta: BTreeMap::new(),
            f_star,
            converged: false,
        }
    }

    /// Appends a record at `x`, measuring `f` and `∇f` without touching the counters.
    pub(crate) fn push(
        &mut self,
        obj: &Objective,
        geom: &Geometry,
        x: Vector,
        k: usize,
        base_grads: u64,
        certificates: BTreeMap<String, f64>,
    ) -> Result<&mut Record> {
        let f_value = obj.peek_value(&x);
        let g = obj.peek_gradient(&x);
        let grad_dual_norm = geom.dual_norm(&g);
        if !f_value.is_finite() || !grad_dual_norm.is_finite() {
            return Err(Error::Degenerate(format!("iterate {k} diverged: f = {f_value}, gradient norm = {grad_dual_norm}")));
        }
        let f_gap = self.f_star.map_or(f64::NAN, |fs| f_value - fs);
        self.records.push(Record {
            k,
            grad_dual_norm,
            x,
            f_value,
            f_gap,
            grad_evals: obj.counts().gradients - base_grads,
            step_norm: 0.0,
            z: None,
            coordinate: None,
            certificates,
        });
        Ok(self.records.last_mut().expect("just pushed"))
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("traces hold at least one record")
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_gap).collect()
    }

    /// `min_{s ≤ k} ‖∇f(x_s)‖_*` for every `k`.
    pub fn running_min_grad(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.grad_dual_norm);
                best
            })
            .collect()
    }

    pub fn certificate(&self, k: usize, key: &str) -> Option<f64> {
        self.records.get(k).and_then(|r| r.certificates.get(key).copied())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
        w.write_record(CSV_HEADER.split(',')).map_err(io)?;
        for r in &self.records {
            let margin = r
                .certificates
                .get("descent_margin")
                .map_or(String::new(), |m| format!("{m:e}"));
            w.write_record([
                r.k.to_string(),
                format!("{:e}", r.f_gap),
                format!("{:e}", r.grad_dual_norm),
                r.grad_evals.to_string(),
                format!("{:e}", r.step_norm),
                margin,
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Outcome of checking the descent condition along a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DescentReport {
    pub holds: bool,
    /// Largest `f_{k+1} - f_k + δ‖∇f‖_*^{p/(p-1)}` over consecutive pairs.
    pub worst_margin: f64,
    pub first_violation_k: Option<usize>,
    pub checked: usize,
}

/// Checks `f(x_{k+1}) - f(x_k) ≤ -δ‖∇f‖_*^{p/(p-1)}` at every consecutive pair,
/// with the gradient at `x_k` or `x_{k+1}` per `mode` and slack `1e-9 (1 + |f(x_k)|)`.
pub fn certify_delta_descent(trace: &Trace, delta: f64, p: Order, mode: DescentMode) -> Result<DescentReport> {
    if !(delta > 0.0) {
        return Err(Error::arg(format!("descent constant must be positive, got {delta}")));
    }
    if let Some(r) = trace.records.iter().find(|r| !r.grad_dual_norm.is_finite() || !r.f_value.is_finite()) {
        return Err(Error::arg(format!("record {} lacks finite value or gradient data", r.k)));
    }
    let q = p.dual_exponent();
    let mut report = DescentReport {
        holds: true,
        worst_margin: f64::NEG_INFINITY,
        first_violation_k: None,
        checked: 0,
    };
    for pair in trace.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let g = match mode {
            DescentMode::AtCurrent => a.grad_dual_norm,
            DescentMode::AtNext => b.grad_dual_norm,
        };
        let margin = b.f_value - a.f_value + delta * g.powf(q);
        report.checked += 1;
        report.worst_margin = report.worst_margin.max(margin);
        if margin > 1e-9 * (1.0 + a.f_value.abs()) && report.holds {
            report.holds = false;
            report.first_violation_k = Some(a.k);
        }
    }
    Ok(report)
}
