//! Fixed-epoch restarts of accelerated methods under gradient domination.

use std::collections::BTreeMap;

use crate::descent::Trace;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Dgf, Vector};
use crate::objectives::Objective;

use super::ms::{ms_accelerate, MsConfig};
use super::Nesterov;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestartStyle {
    Nesterov,
    Ms,
}

/// The method being restarted.
#[derive(Clone, Debug)]
pub enum Accelerated {
    Nesterov(Nesterov),
    Ms(MsConfig),
}

impl Accelerated {
    pub fn style(&self) -> RestartStyle {
        match self {
            Accelerated::Nesterov(_) => RestartStyle::Nesterov,
            Accelerated::Ms(_) => RestartStyle::Ms,
        }
    }

    pub fn order(&self) -> Result<f64> {
        match self {
            Accelerated::Nesterov(n) => Ok(n.schedule()?.p as f64),
            Accelerated::Ms(m) => Ok(m.variant.order()),
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            Accelerated::Nesterov(n) => n.delta(),
            Accelerated::Ms(m) => m.delta(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Accelerated::Nesterov(n) => n.tag(),
            Accelerated::Ms(m) => m.variant.tag(),
        }
    }

    fn dgf_at(&self, center: &Vector) -> Result<Dgf> {
        match self {
            Accelerated::Nesterov(n) => n.default_dgf(center),
            Accelerated::Ms(m) => Ok(Dgf::quadratic(m.geometry.clone())),
        }
    }

    fn run(&self, obj: &Objective, x0: &Vector, k: usize) -> Result<Trace> {
        let dgf = self.dgf_at(x0)?;
        match self {
            Accelerated::Nesterov(n) => n.run(obj, &dgf, x0, k),
            Accelerated::Ms(m) => ms_accelerate(m, obj, &dgf, x0, k),
        }
    }

    fn kernel_step(&self, obj: &Objective, x: &Vector) -> Result<Vector> {
        match self {
            Accelerated::Nesterov(n) => n.kernel.step(obj, x).map(|(y, _)| y),
            Accelerated::Ms(m) => m.variant.step(obj, &m.geometry, x, m.eta),
        }
    }

    /// `κ = μδ^p` for the Nesterov coupling and `κ = μη` for the line-search method.
    pub fn kappa(&self, mu: f64) -> Result<f64> {
        match self {
            Accelerated::Nesterov(n) => Ok(mu * n.delta().powf(self.order()?)),
            Accelerated::Ms(m) => Ok(mu * m.eta),
        }
    }
}

/// Epoch length, rounded up and at least 1.
///
/// Nesterov: `2p/κ^{1/p}`. Line search: `(p³/2)^{p/(3p-2)} (e/(3κ))^{2/(3p-2)}`.
pub fn restart_epoch_length(style: RestartStyle, p: f64, kappa: f64) -> Result<usize> {
    if !(kappa > 0.0) || !kappa.is_finite() || !(p >= 2.0) {
        return Err(Error::arg(format!("invalid restart parameters p={p}, kappa={kappa}")));
    }
    let c = match style {
        RestartStyle::Nesterov => 2.0 * p / kappa.powf(1.0 / p),
        RestartStyle::Ms => {
            let d = 3.0 * p - 2.0;
            (p.powi(3) / 2.0).powf(p / d) * (std::f64::consts::E / (3.0 * kappa)).powf(2.0 / d)
        }
    };
    // Guard against representation noise just above an integer.
    Ok(((c - 1e-9).ceil() as usize).max(1))
}

/// Runs `epochs` restarts of `c` accelerated iterations each, recentering the dgf at
/// every epoch start, then one plain kernel step.
///
/// Records carry their epoch in the `epoch` certificate; `meta["epoch_length"]` is `c`.
pub fn restart_wrap(
    inner: &Accelerated,
    obj: &Objective,
    x0: &Vector,
    mu: Option<f64>,
    epochs: usize,
) -> Result<Trace> {
    check_dim("initial point", x0.len(), obj.dim())?;
    let mu = mu
        .or_else(|| obj.gradient_dominated().map(|g| g.mu))
        .ok_or_else(|| Error::Config("restarting needs a gradient-domination constant".into()))?;
    if !(mu > 0.0) {
        return Err(Error::Config(format!("gradient-domination constant must be positive, got {mu}")));
    }
    let p = inner.order()?;
    let kappa = inner.kappa(mu)?;
    let c = restart_epoch_length(inner.style(), p, kappa)?;
    let mut trace = Trace::new(format!("restart:{}", inner.tag()), obj.known_minimum());
    trace.meta.insert("epoch_length".into(), c.to_string());
    trace.meta.insert("kappa".into(), format!("{kappa}"));
    trace.meta.insert("mu".into(), format!("{mu}"));
    let base = obj.counts().gradients;
    let geom = obj.geometry().clone();
    trace.push(obj, &geom, x0.clone(), 0, base, BTreeMap::from([("epoch".to_string(), 0.0)]))?;
    let mut x = x0.clone();
    let mut k = 0;
    for epoch in 0..epochs {
        let run = inner.run(obj, &x, c).map_err(|e| e.at(k))?;
        for r in run.records.iter().skip(1) {
            k += 1;
            let mut certs = r.certificates.clone();
            certs.insert("epoch".into(), epoch as f64);
            let rec = trace.push(obj, &geom, r.x.clone(), k, base, certs)?;
            rec.step_norm = r.step_norm;
            rec.z = r.z.clone();
        }
        x = run.last().x.clone();
        if run.converged {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        let y = inner.kernel_step(obj, &x).map_err(|e| e.at(k))?;
        let step_norm = geom.primal_norm(&(&y - &x));
        let rec = trace.push(obj, &geom, y, k + 1, base, BTreeMap::from([("epoch".to_string(), epochs as f64)]))?;
        rec.step_norm = step_norm;
    }
    Ok(trace)
}
