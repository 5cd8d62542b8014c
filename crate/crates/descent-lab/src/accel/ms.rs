//! Monteiro–Svaiter acceleration with a λ line search.

use std::collections::BTreeMap;

use crate::descent::{natural_prox_solve, rgd_step, tensor_step_detailed, Trace, GRAD_FLOOR};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{mirror_step, Dgf, DgfKind, Geometry, Vector};
use crate::objectives::Objective;
use crate::order::Order;

const MAX_BRACKET: usize = 64;
const MAX_BISECT: usize = 64;
const CONTRACTION_SLACK: f64 = 1e-9;

/// How `y` is produced from the coupled point `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MsVariant {
    /// Rescaled gradient step of order `p`; window `[3/4, 5/4]`.
    Rgd { p: f64 },
    /// Proximal step of order `p`; window `[1/2, 3/2]`.
    Prox { p: f64 },
    /// Regularized Taylor step with `p̃ = p - 1 + ν`; window `[1/2, 3/4]`.
    Tensor { p: usize, nu: f64 },
}

impl MsVariant {
    pub fn window(&self) -> (f64, f64) {
        match self {
            MsVariant::Rgd { .. } => (0.75, 1.25),
            MsVariant::Prox { .. } => (0.5, 1.5),
            MsVariant::Tensor { .. } => (0.5, 0.75),
        }
    }

    /// Preferred window value; the half-contraction condition is most slack here.
    fn target(&self) -> f64 {
        match self {
            MsVariant::Rgd { .. } | MsVariant::Prox { .. } => 1.0,
            MsVariant::Tensor { .. } => 0.7,
        }
    }

    /// The exponent `p` (or `p̃`) in the window function and the rate.
    pub fn order(&self) -> f64 {
        match *self {
            MsVariant::Rgd { p } | MsVariant::Prox { p } => p,
            MsVariant::Tensor { p, nu } => p as f64 - 1.0 + nu,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            MsVariant::Rgd { p } => format!("ms-rgd-p{p}"),
            MsVariant::Prox { p } => format!("ms-prox-p{p}"),
            MsVariant::Tensor { p, nu } => format!("ms-tensor-p{p}-nu{nu}"),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            MsVariant::Rgd { p } | MsVariant::Prox { p } if !(p >= 2.0) || !p.is_finite() => {
                Err(Error::Config(format!("order must be finite and at least 2, got {p}")))
            }
            MsVariant::Tensor { p, nu } if !(2..=3).contains(&p) || !(nu > 0.0 && nu <= 1.0) => {
                Err(Error::Config(format!("unsupported tensor parameters p={p}, nu={nu}")))
            }
            _ => Ok(()),
        }
    }

    /// One kernel step from `x`.
    pub fn step(&self, obj: &Objective, geom: &Geometry, x: &Vector, eta: f64) -> Result<Vector> {
        match *self {
            MsVariant::Rgd { p } => rgd_step(obj, geom, x, eta, Order::Finite(p)),
            MsVariant::Prox { p } => {
                natural_prox_solve(obj, &Dgf::quadratic(geom.clone()), geom, x, eta, p).map(|s| s.y)
            }
            MsVariant::Tensor { p, nu } => tensor_step_detailed(obj, geom, x, eta, p, nu).map(|t| t.y),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MsConfig {
    pub variant: MsVariant,
    pub eta: f64,
    pub geometry: Geometry,
}

impl MsConfig {
    pub fn new(variant: MsVariant, eta: f64, geometry: Geometry) -> Self {
        MsConfig {
            variant,
            eta,
            geometry,
        }
    }

    /// `δ` with `δ^{(3p-2)/2} = η`.
    pub fn delta(&self) -> f64 {
        let p = self.variant.order();
        self.eta.powf(2.0 / (3.0 * p - 2.0))
    }

    /// Step bound `η^{1/(p-1)} ≤ min{2/(5p), 1/(2 Σ L_m/m!)}` for the rescaled-gradient variant.
    pub fn admissible_rgd_eta(p: f64, weighted_sum: f64) -> f64 {
        let mut s = 2.0 / (5.0 * p);
        if weighted_sum > 0.0 {
            s = s.min(1.0 / (2.0 * weighted_sum));
        }
        s.powf(p - 1.0)
    }

    fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// `p^{(3p-2)/2} D^{p/2}/(δk)^{(3p-2)/2}`.
pub fn ms_rate_bound(p: f64, delta: f64, d0: f64, k: f64) -> f64 {
    let e = (3.0 * p - 2.0) / 2.0;
    p.powf(e) * d0.powf(p / 2.0) / (delta * k).powf(e)
}

/// An accepted line-search point.
#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub lambda: f64,
    /// `δ α_k`, the increment `A_{k+1} - A_k`.
    pub a_step: f64,
    pub x: Vector,
    pub y: Vector,
    /// `∇f(y)`.
    pub grad_y: Vector,
    /// `λ‖y - x‖^{p-2}/η`.
    pub window_value: f64,
    /// `‖y - x + λB⁻¹∇f(y)‖ / ‖y - x‖`.
    pub contraction: f64,
    /// Kernel evaluations spent.
    pub evaluations: usize,
    /// The kernel made no move: `x` is stationary.
    pub converged: bool,
}

struct Probe {
    lambda: f64,
    a_step: f64,
    x: Vector,
    y: Vector,
    s_norm: f64,
    g: f64,
}

struct Search<'a> {
    obj: &'a Objective,
    cfg: &'a MsConfig,
    z: &'a Vector,
    y: &'a Vector,
    a_k: f64,
    evaluations: usize,
}

impl Search<'_> {
    fn coupled(&self, lambda: f64) -> (f64, Vector) {
        let a = 0.5 * (lambda + (lambda * lambda + 4.0 * self.a_k * lambda).sqrt());
        let x = if self.a_k == 0.0 {
            self.z.clone()
        } else {
            (self.z * a + self.y * self.a_k) / (self.a_k + a)
        };
        (a, x)
    }

    fn probe(&mut self, lambda: f64) -> Result<Probe> {
        let (a_step, x) = self.coupled(lambda);
        let y = self.cfg.variant.step(self.obj, &self.cfg.geometry, &x, self.cfg.eta)?;
        self.evaluations += 1;
        let s_norm = self.cfg.geometry.primal_norm(&(&y - &x));
        let g = lambda * s_norm.powf(self.cfg.variant.order() - 2.0) / self.cfg.eta;
        Ok(Probe { lambda, a_step, x, y, s_norm, g })
    }

    /// The probe re-weighted to `λ`; valid when `x` does not depend on `λ`.
    fn with_lambda(&self, p: &Probe, lambda: f64) -> Probe {
        Probe {
            lambda,
            a_step: self.coupled(lambda).0,
            x: p.x.clone(),
            y: p.y.clone(),
            s_norm: p.s_norm,
            g: lambda * p.s_norm.powf(self.cfg.variant.order() - 2.0) / self.cfg.eta,
        }
    }

    /// Accepts a probe in the window that also passes the half-contraction check.
    fn accept(&self, p: &Probe) -> Option<LineSearchOutcome> {
        let (lo, hi) = self.cfg.variant.window();
        if p.g < lo || p.g > hi {
            return None;
        }
        let geom = &self.cfg.geometry;
        let grad_y = self.obj.gradient(&p.y);
        let s = &p.y - &p.x;
        let r = geom.primal_norm(&(&s + geom.solve(&grad_y) * p.lambda));
        let contraction = r / p.s_norm;
        if contraction > 0.5 + CONTRACTION_SLACK {
            return None;
        }
        Some(LineSearchOutcome {
            lambda: p.lambda,
            a_step: p.a_step,
            x: p.x.clone(),
            y: p.y.clone(),
            grad_y,
            window_value: p.g,
            contraction,
            evaluations: self.evaluations,
            converged: false,
        })
    }

    fn too_low(&self, p: &Probe) -> bool {
        p.g < self.cfg.variant.target()
    }
}

/// Finds `λ` whose coupled pair `(x(λ), y(x(λ)))` lies in the variant's window and
/// satisfies `‖y - x + λB⁻¹∇f(y)‖ ≤ ½‖y - x‖`.
///
/// Starts at `warm`, doubles or halves until the window is bracketed, then bisects.
pub fn ms_line_search(
    obj: &Objective,
    cfg: &MsConfig,
    z: &Vector,
    y: &Vector,
    a_k: f64,
    warm: f64,
) -> Result<LineSearchOutcome> {
    cfg.validate()?;
    if !(a_k >= 0.0) || !(warm > 0.0) {
        return Err(Error::arg(format!("invalid line search state A={a_k}, warm start={warm}")));
    }
    let mut search = Search { obj, cfg, z, y, a_k, evaluations: 0 };
    let first = search.probe(warm)?;
    if first.s_norm == 0.0 || cfg.geometry.dual_norm(&obj.peek_gradient(&first.x)) <= GRAD_FLOOR {
        return Ok(LineSearchOutcome {
            lambda: warm,
            a_step: first.a_step,
            grad_y: obj.peek_gradient(&first.y),
            x: first.x,
            y: first.y,
            window_value: 0.0,
            contraction: 0.0,
            evaluations: search.evaluations,
            converged: true,
        });
    }
    let (lo_w, hi_w) = cfg.variant.window();
    let exponent = cfg.variant.order() - 2.0;
    if a_k == 0.0 || exponent == 0.0 {
        // The window function is linear in λ at fixed x; try the target, then sweep the window.
        let scale = first.s_norm.powf(exponent) / cfg.eta;
        let target = cfg.variant.target();
        let sweep = (0..=16).map(|i| lo_w + (hi_w - lo_w) * i as f64 / 16.0);
        let candidates: Vec<f64> = std::iter::once(target).chain(sweep).collect();
        if a_k == 0.0 {
            for w in &candidates {
                if let Some(out) = search.accept(&search.with_lambda(&first, w / scale)) {
                    return Ok(out);
                }
            }
            return Err(Error::LineSearch(format!(
                "no window value gives half contraction at the first iterate (step norm {:.3e})",
                first.s_norm
            )));
        }
        if let Some(out) = search.accept(&first) {
            return Ok(out);
        }
    } else if let Some(out) = search.accept(&first) {
        return Ok(out);
    }

    let mut trail = vec![first.g];
    let (mut lo, mut hi);
    if search.too_low(&first) {
        lo = first.lambda;
        let mut lam = first.lambda;
        let mut found = None;
        for _ in 0..MAX_BRACKET {
            lam *= 2.0;
            let p = search.probe(lam)?;
            trail.push(p.g);
            if let Some(out) = search.accept(&p) {
                return Ok(out);
            }
            if search.too_low(&p) {
                lo = lam;
            } else {
                found = Some(lam);
                break;
            }
        }
        hi = found.ok_or_else(|| bracket_error(&trail))?;
    } else {
        hi = first.lambda;
        let mut lam = first.lambda;
        let mut found = None;
        for _ in 0..MAX_BRACKET {
            lam *= 0.5;
            let p = search.probe(lam)?;
            trail.push(p.g);
            if let Some(out) = search.accept(&p) {
                return Ok(out);
            }
            if search.too_low(&p) {
                found = Some(lam);
                break;
            }
            hi = lam;
        }
        lo = found.ok_or_else(|| bracket_error(&trail))?;
    }
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let p = search.probe(mid)?;
        trail.push(p.g);
        if let Some(out) = search.accept(&p) {
            return Ok(out);
        }
        if search.too_low(&p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::LineSearch(format!(
        "bisection exhausted; last window values {:?}",
        &trail[trail.len().saturating_sub(4)..]
    )))
}

fn bracket_error(trail: &[f64]) -> Error {
    Error::LineSearch(format!(
        "window not bracketed after {MAX_BRACKET} steps; last window values {:?}",
        &trail[trail.len().saturating_sub(4)..]
    ))
}

/// Runs the line-search accelerated method with a quadratic dgf.
pub fn ms_accelerate(cfg: &MsConfig, obj: &Objective, dgf: &Dgf, x0: &Vector, k_max: usize) -> Result<Trace> {
    cfg.validate()?;
    check_dim("initial point", x0.len(), obj.dim())?;
    check_dim("dgf", dgf.dim(), obj.dim())?;
    if !matches!(dgf.kind(), DgfKind::Quadratic) {
        return Err(Error::Config("line-search acceleration needs a quadratic dgf".into()));
    }
    let geom = &cfg.geometry;
    let delta = cfg.delta();
    let x_star = obj.known_minimizer().cloned();
    let mut trace = Trace::new(cfg.variant.tag(), obj.known_minimum());
    trace.meta.insert("delta".into(), format!("{delta}"));
    trace.meta.insert("eta".into(), format!("{}", cfg.eta));
    trace.meta.insert("order".into(), format!("{}", cfg.variant.order()));
    let (lo, hi) = cfg.variant.window();
    trace.meta.insert("window".into(), format!("[{lo}, {hi}]"));
    let base = obj.counts().gradients;
    let (mut y, mut z) = (x0.clone(), x0.clone());
    let mut a = 0.0;
    let mut warm = cfg.eta;
    let mut certs = BTreeMap::from([("A".to_string(), 0.0)]);
    if let Some(xs) = &x_star {
        certs.insert("lyapunov".into(), dgf.divergence(xs, &z));
    }
    trace.push(obj, geom, y.clone(), 0, base, certs)?.z = Some(z.clone());
    for k in 0..k_max {
        if trace.last().grad_dual_norm <= GRAD_FLOOR {
            trace.converged = true;
            break;
        }
        let out = ms_line_search(obj, cfg, &z, &y, a, warm).map_err(|e| e.at(k))?;
        if out.converged {
            trace.converged = true;
            break;
        }
        a += out.a_step;
        warm = out.lambda;
        z = mirror_step(dgf, &z, &out.grad_y, out.a_step).map_err(|e| e.at(k))?;
        let step_norm = geom.primal_norm(&(&out.y - &y));
        y = out.y;
        let rec = trace.push(obj, geom, y.clone(), k + 1, base, BTreeMap::new())?;
        rec.step_norm = step_norm;
        rec.z = Some(z.clone());
        let mut certs = BTreeMap::from([
            ("A".to_string(), a),
            ("alpha".to_string(), out.a_step / delta),
            ("lambda".to_string(), out.lambda),
            ("window".to_string(), out.window_value),
            ("contraction".to_string(), out.contraction),
            ("ls_evals".to_string(), out.evaluations as f64),
        ]);
        if let Some(xs) = &x_star {
            certs.insert("lyapunov".into(), a * rec.f_gap + dgf.divergence(xs, &z));
        }
        rec.certificates = certs;
    }
    Ok(trace)
}
