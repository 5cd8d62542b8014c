//! Plain descent kernels, the descent-condition certifier and closed-form rate bounds.

pub mod rates;
pub(crate) mod subsolve;
mod trace;

use std::collections::BTreeMap;

use nalgebra::Cholesky;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{mirror_step, Dgf, Geometry, Matrix, Vector};
use crate::objectives::Objective;
use crate::order::Order;
use subsolve::{damped_newton, newton_best, NewtonProblem, Tol, MAX_ITERS};

pub use rates::{c_p, gamma, rate_bound, BoundKind, RateParams};
pub use trace::{certify_delta_descent, DescentReport, Record, Trace, CSV_HEADER};

/// Gradient dual norms at or below this are treated as stationary.
pub const GRAD_FLOOR: f64 = 1e-13;

const INNER_TOL: f64 = 1e-10;

/// Where the gradient in the descent condition is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DescentMode {
    /// `f(x_{k+1}) - f(x_k) ≤ -δ ‖∇f(x_k)‖_*^{p/(p-1)}`.
    AtCurrent,
    /// `f(x_{k+1}) - f(x_k) ≤ -δ ‖∇f(x_{k+1})‖_*^{p/(p-1)}`.
    AtNext,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Gd,
    Rgd(Order),
    NaturalProx(f64),
    MirrorDescent,
    NaturalGd,
    BregmanProx,
    UniversalTensor { p: usize, nu: f64 },
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::Gd => "gd".into(),
            Method::Rgd(p) => format!("rgd-p{p}"),
            Method::NaturalProx(p) => format!("natural-prox-p{p}"),
            Method::MirrorDescent => "mirror".into(),
            Method::NaturalGd => "natural-gd".into(),
            Method::BregmanProx => "bregman-prox".into(),
            Method::UniversalTensor { p, nu } => format!("tensor-p{p}-nu{nu}"),
        }
    }

    /// The order of the descent condition the method satisfies.
    pub fn order(&self) -> Order {
        match *self {
            Method::Gd | Method::MirrorDescent | Method::NaturalGd | Method::BregmanProx => {
                Order::Finite(2.0)
            }
            Method::Rgd(p) => p,
            Method::NaturalProx(p) => Order::Finite(p),
            Method::UniversalTensor { p, nu } => Order::Finite(p as f64 - 1.0 + nu),
        }
    }

    pub fn default_mode(&self) -> DescentMode {
        match self {
            Method::NaturalProx(_) | Method::BregmanProx | Method::UniversalTensor { .. } => {
                DescentMode::AtNext
            }
            _ => DescentMode::AtCurrent,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DescentConfig {
    pub method: Method,
    pub eta: f64,
    pub geometry: Geometry,
    pub dgf: Option<Dgf>,
    pub mode: DescentMode,
    pub grad_floor: f64,
}

impl DescentConfig {
    pub fn new(method: Method, eta: f64, geometry: Geometry) -> Self {
        DescentConfig {
            mode: method.default_mode(),
            method,
            eta,
            geometry,
            dgf: None,
            grad_floor: GRAD_FLOOR,
        }
    }

    pub fn with_dgf(mut self, dgf: Dgf) -> Self {
        self.dgf = Some(dgf);
        self
    }

    pub fn with_mode(mut self, mode: DescentMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn order(&self) -> Order {
        self.method.order()
    }

    /// The distance-generating function in use; quadratic in `B` when none is set.
    pub fn dgf(&self) -> Dgf {
        self.dgf
            .clone()
            .unwrap_or_else(|| Dgf::quadratic(self.geometry.clone()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {}", self.eta)));
        }
        if let Some(h) = &self.dgf {
            check_dim("dgf", h.dim(), self.geometry.dim())?;
        }
        match self.method {
            Method::Rgd(Order::Finite(p)) | Method::NaturalProx(p) if p < 2.0 => Err(
                Error::Config(format!("order must be at least 2, got {p}")),
            ),
            Method::UniversalTensor { p, nu } if !(2..=3).contains(&p) || !(nu > 0.0 && nu <= 1.0) => {
                Err(Error::Config(format!(
                    "tensor step supports p in {{2, 3}} and nu in (0, 1], got p={p}, nu={nu}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// The descent constant `δ` of the configured method.
    pub fn delta(&self) -> f64 {
        let eta = self.eta;
        let h = self.dgf();
        let (m, big_m) = (h.strong_convexity_modulus(), h.smoothness_modulus());
        match self.method {
            Method::Gd => eta / 2.0,
            Method::Rgd(p) => p.step_scale(eta) / 2.0,
            Method::NaturalProx(p) => m.powf(p / (p - 1.0)) * eta.powf(1.0 / (p - 1.0)) / p,
            Method::MirrorDescent | Method::NaturalGd => eta / (2.0 * big_m),
            Method::BregmanProx => m * eta / (2.0 * big_m * big_m),
            Method::UniversalTensor { p, nu } => {
                let pt = p as f64 - 1.0 + nu;
                eta.powf(1.0 / (pt - 1.0)) / 2f64.powf((2.0 * pt - 3.0) / (pt - 1.0))
            }
        }
    }

    /// One step from `x`, with the inner residual for solver-based methods.
    pub fn step(&self, obj: &Objective, x: &Vector) -> Result<(Vector, Option<f64>)> {
        let eta = self.eta;
        match self.method {
            Method::Gd => gd_step(obj, &self.geometry, x, eta).map(|y| (y, None)),
            Method::Rgd(p) => rgd_step(obj, &self.geometry, x, eta, p).map(|y| (y, None)),
            Method::MirrorDescent => mirror_descent_step(obj, &self.dgf(), x, eta).map(|y| (y, None)),
            Method::NaturalGd => natural_gd_step(obj, &self.dgf(), x, eta).map(|y| (y, None)),
            Method::NaturalProx(p) => {
                natural_prox_solve(obj, &self.dgf(), &self.geometry, x, eta, p).map(|s| (s.y, Some(s.residual)))
            }
            Method::BregmanProx => {
                bregman_prox_solve(obj, &self.dgf(), &self.geometry, x, eta).map(|s| (s.y, Some(s.residual)))
            }
            Method::UniversalTensor { p, nu } => {
                tensor_step_detailed(obj, &self.geometry, x, eta, p, nu).map(|t| (t.y, Some(t.residual)))
            }
        }
    }
}

fn check_step(obj: &Objective, x: &Vector, eta: f64) -> Result<()> {
    check_dim("iterate", x.len(), obj.dim())?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::arg(format!("step size must be positive, got {eta}")));
    }
    Ok(())
}

/// `x - η B⁻¹∇f(x)`.
pub fn gd_step(obj: &Objective, geom: &Geometry, x: &Vector, eta: f64) -> Result<Vector> {
    check_step(obj, x, eta)?;
    let g = obj.gradient(x);
    Ok(x - geom.solve(&g) * eta)
}

/// `x - η^{1/(p-1)} B⁻¹∇f / ‖∇f‖_*^{(p-2)/(p-1)}`; a no-op below the gradient floor.
pub fn rgd_step(obj: &Objective, geom: &Geometry, x: &Vector, eta: f64, p: Order) -> Result<Vector> {
    check_step(obj, x, eta)?;
    if let Order::Finite(q) = p {
        if q < 2.0 {
            return Err(Error::arg(format!("rescaled gradient order must be at least 2, got {q}")));
        }
    }
    let g = obj.gradient(x);
    if p == Order::Finite(2.0) {
        return Ok(x - geom.solve(&g) * eta);
    }
    let gn = geom.dual_norm(&g);
    if gn <= GRAD_FLOOR {
        return Ok(x.clone());
    }
    let scale = p.step_scale(eta) / gn.powf(p.rescale_exponent());
    Ok(x - geom.solve(&g) * scale)
}

/// Solves `∇h(x') = ∇h(x) - η∇f(x)`.
pub fn mirror_descent_step(obj: &Objective, dgf: &Dgf, x: &Vector, eta: f64) -> Result<Vector> {
    check_step(obj, x, eta)?;
    let g = obj.gradient(x);
    mirror_step(dgf, x, &g, eta)
}

/// `x - η ∇²h(x)⁻¹∇f(x)`.
pub fn natural_gd_step(obj: &Objective, dgf: &Dgf, x: &Vector, eta: f64) -> Result<Vector> {
    check_step(obj, x, eta)?;
    let h = dgf.hessian(x)?;
    let g = obj.gradient(x);
    let ch = Cholesky::new(h).ok_or_else(|| Error::Degenerate("dgf Hessian is singular".into()))?;
    Ok(x - ch.solve(&g) * eta)
}

/// A solved inner problem.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub y: Vector,
    /// Dual norm of the subproblem gradient at `y`.
    pub residual: f64,
}

struct NaturalProx<'a> {
    obj: &'a Objective,
    x: &'a Vector,
    h: Matrix,
    eta: f64,
    p: f64,
}

impl NaturalProx<'_> {
    fn hnorm(&self, s: &Vector) -> f64 {
        s.dot(&(&self.h * s)).max(0.0).sqrt()
    }
}

impl NewtonProblem for NaturalProx<'_> {
    fn merit(&self, y: &Vector) -> f64 {
        let s = y - self.x;
        self.obj.value(y) + self.hnorm(&s).powf(self.p) / (self.p * self.eta)
    }
    fn gradient(&self, y: &Vector) -> Vector {
        let s = y - self.x;
        let n = self.hnorm(&s);
        let w = if n > 0.0 { n.powf(self.p - 2.0) } else if self.p == 2.0 { 1.0 } else { 0.0 };
        self.obj.gradient(y) + &self.h * s * (w / self.eta)
    }
    fn hessian(&self, y: &Vector) -> Matrix {
        let s = y - self.x;
        let n = self.hnorm(&s);
        let mut out = self.obj.hessian(y);
        if self.p == 2.0 {
            out += &self.h / self.eta;
        } else if n > 0.0 {
            let hs = &self.h * &s;
            out += &self.h * (n.powf(self.p - 2.0) / self.eta);
            out += &hs * hs.transpose() * ((self.p - 2.0) * n.powf(self.p - 4.0) / self.eta);
        }
        out
    }
}

/// Solves `min_y f(y) + ‖y - x‖_x^p / (pη)` with `‖·‖_x` induced by `∇²h(x)`.
pub fn natural_prox_solve(
    obj: &Objective,
    dgf: &Dgf,
    geom: &Geometry,
    x: &Vector,
    eta: f64,
    p: f64,
) -> Result<InnerSolution> {
    check_step(obj, x, eta)?;
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::arg(format!("proximal order must be at least 2, got {p}")));
    }
    let h = dgf.hessian(x)?;
    let problem = NaturalProx { obj, x, h, eta, p };
    let s = damped_newton(&problem, x.clone(), geom, Tol::Scaled(INNER_TOL), MAX_ITERS, "natural prox")?;
    Ok(InnerSolution { y: s.y, residual: s.residual })
}

pub fn natural_prox_step(obj: &Objective, dgf: &Dgf, x: &Vector, eta: f64, p: f64) -> Result<Vector> {
    natural_prox_solve(obj, dgf, dgf.geometry(), x, eta, p).map(|s| s.y)
}

struct BregmanProx<'a> {
    obj: &'a Objective,
    dgf: &'a Dgf,
    x: &'a Vector,
    grad_hx: Vector,
    eta: f64,
}

impl NewtonProblem for BregmanProx<'_> {
    fn merit(&self, y: &Vector) -> f64 {
        self.obj.value(y) + self.dgf.divergence(y, self.x) / self.eta
    }
    fn gradient(&self, y: &Vector) -> Vector {
        self.obj.gradient(y) + (self.dgf.gradient(y) - &self.grad_hx) / self.eta
    }
    fn hessian(&self, y: &Vector) -> Matrix {
        let n = y.len();
        let hh = self.dgf.hessian(y).unwrap_or_else(|_| Matrix::zeros(n, n));
        self.obj.hessian(y) + hh / self.eta
    }
}

/// Solves `min_y f(y) + D_h(y, x)/η`.
pub fn bregman_prox_solve(
    obj: &Objective,
    dgf: &Dgf,
    geom: &Geometry,
    x: &Vector,
    eta: f64,
) -> Result<InnerSolution> {
    check_step(obj, x, eta)?;
    check_dim("dgf", dgf.dim(), obj.dim())?;
    let problem = BregmanProx { obj, dgf, x, grad_hx: dgf.gradient(x), eta };
    let s = damped_newton(&problem, x.clone(), geom, Tol::Scaled(INNER_TOL), MAX_ITERS, "Bregman prox")?;
    Ok(InnerSolution { y: s.y, residual: s.residual })
}

pub fn bregman_prox_step(obj: &Objective, dgf: &Dgf, x: &Vector, eta: f64) -> Result<Vector> {
    bregman_prox_solve(obj, dgf, dgf.geometry(), x, eta).map(|s| s.y)
}

/// Result of a regularized Taylor-model step.
#[derive(Clone, Debug)]
pub struct TensorStep {
    pub y: Vector,
    /// Dual norm of the stationarity residual of the regularized model.
    pub residual: f64,
    /// `‖∇f_{p-1}(y; x)‖_*`, the dual norm of the Taylor model gradient at `y`.
    pub model_gradient_norm: f64,
    /// `‖y - x‖^{p̃-1}/η`, which the model gradient norm matches at exact stationarity.
    pub regularizer_norm: f64,
}

struct TensorModel<'a> {
    geom: &'a Geometry,
    g: Vector,
    hess: Matrix,
    x: &'a Vector,
    eta: f64,
    pt: f64,
}

impl TensorModel<'_> {
    fn model_gradient(&self, s: &Vector) -> Vector {
        &self.g + &self.hess * s
    }
}

impl NewtonProblem for TensorModel<'_> {
    fn merit(&self, y: &Vector) -> f64 {
        let s = y - self.x;
        let n = self.geom.primal_norm(&s);
        self.g.dot(&s) + 0.5 * s.dot(&(&self.hess * &s)) + n.powf(self.pt) / (self.pt * self.eta)
    }
    fn gradient(&self, y: &Vector) -> Vector {
        let s = y - self.x;
        let n = self.geom.primal_norm(&s);
        let w = if n > 0.0 { n.powf(self.pt - 2.0) } else { 0.0 };
        self.model_gradient(&s) + self.geom.apply(&s) * (w / self.eta)
    }
    fn hessian(&self, y: &Vector) -> Matrix {
        let s = y - self.x;
        let n = self.geom.primal_norm(&s);
        let mut out = self.hess.clone();
        if n > 0.0 {
            let bs = self.geom.apply(&s);
            out += self.geom.operator() * (n.powf(self.pt - 2.0) / self.eta);
            out += &bs * bs.transpose() * ((self.pt - 2.0) * n.powf(self.pt - 4.0) / self.eta);
        }
        out
    }
}

/// Minimizes the order `p-1` Taylor model of `f` at `x` plus `‖y - x‖^{p̃}/(p̃η)`, `p̃ = p - 1 + ν`.
pub fn tensor_step_detailed(
    obj: &Objective,
    geom: &Geometry,
    x: &Vector,
    eta: f64,
    p: usize,
    nu: f64,
) -> Result<TensorStep> {
    check_step(obj, x, eta)?;
    check_dim("geometry", geom.dim(), obj.dim())?;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::arg(format!("Hölder exponent must lie in (0, 1], got {nu}")));
    }
    let pt = p as f64 - 1.0 + nu;
    let g = obj.gradient(x);
    match p {
        2 => {
            // Linear model: the minimizer is a rescaled gradient step of order p̃.
            let gn = geom.dual_norm(&g);
            if gn <= GRAD_FLOOR {
                return Ok(TensorStep { y: x.clone(), residual: gn, model_gradient_norm: gn, regularizer_norm: 0.0 });
            }
            let t = (eta * gn.powf(2.0 - pt)).powf(1.0 / (pt - 1.0));
            let s = -geom.solve(&g) * t;
            let n = geom.primal_norm(&s);
            let resid = &g + geom.apply(&s) * (n.powf(pt - 2.0) / eta);
            Ok(TensorStep {
                y: x + s,
                residual: geom.dual_norm(&resid),
                model_gradient_norm: gn,
                regularizer_norm: n.powf(pt - 1.0) / eta,
            })
        }
        3 => {
            let hess = obj.hessian(x);
            let model = TensorModel { geom, g, hess, x, eta, pt };
            let sol = damped_newton(&model, x.clone(), geom, Tol::Scaled(INNER_TOL), MAX_ITERS, "tensor step")?;
            let s = &sol.y - x;
            let n = geom.primal_norm(&s);
            Ok(TensorStep {
                model_gradient_norm: geom.dual_norm(&model.model_gradient(&s)),
                regularizer_norm: n.powf(pt - 1.0) / eta,
                residual: sol.residual,
                y: sol.y,
            })
        }
        _ => Err(Error::Capability(format!(
            "tensor step is implemented for p in {{2, 3}}, got {p}"
        ))),
    }
}

pub fn tensor_step(obj: &Objective, geom: &Geometry, x: &Vector, eta: f64, p: usize, nu: f64) -> Result<Vector> {
    tensor_step_detailed(obj, geom, x, eta, p, nu).map(|t| t.y)
}

/// Runs `k_max` steps, recording every iterate. Stops early at the gradient floor.
pub fn run_descent(config: &DescentConfig, obj: &Objective, x0: &Vector, k_max: usize) -> Result<Trace> {
    config.validate()?;
    check_dim("initial point", x0.len(), obj.dim())?;
    check_dim("geometry", config.geometry.dim(), obj.dim())?;
    let delta = config.delta();
    let q = config.order().dual_exponent();
    let mut trace = Trace::new(config.method.tag(), obj.known_minimum());
    trace.meta.insert("eta".into(), format!("{}", config.eta));
    trace.meta.insert("delta".into(), format!("{delta}"));
    trace.meta.insert("order".into(), format!("{}", config.order()));
    trace.meta.insert("mode".into(), format!("{:?}", config.mode));
    let base = obj.counts().gradients;
    let mut x = x0.clone();
    trace.push(obj, &config.geometry, x.clone(), 0, base, BTreeMap::new())?;
    for k in 0..k_max {
        let prev = trace.records.last().expect("nonempty");
        if prev.grad_dual_norm <= config.grad_floor {
            trace.converged = true;
            break;
        }
        let (f_prev, g_prev) = (prev.f_value, prev.grad_dual_norm);
        let (y, residual) = config.step(obj, &x).map_err(|e| e.at(k))?;
        let step_norm = config.geometry.primal_norm(&(&y - &x));
        x = y;
        let mut certs = BTreeMap::new();
        if let Some(r) = residual {
            certs.insert("subsolver_residual".to_string(), r);
        }
        trace.push(obj, &config.geometry, x.clone(), k + 1, base, certs)?;
        let rec = trace.records.last_mut().expect("nonempty");
        rec.step_norm = step_norm;
        let g = match config.mode {
            DescentMode::AtCurrent => g_prev,
            DescentMode::AtNext => rec.grad_dual_norm,
        };
        rec.certificates
            .insert("descent_margin".into(), rec.f_value - f_prev + delta * g.powf(q));
    }
    Ok(trace)
}

struct Reference<'a>(&'a Objective);

impl NewtonProblem for Reference<'_> {
    fn merit(&self, y: &Vector) -> f64 {
        self.0.peek_value(y)
    }
    fn gradient(&self, y: &Vector) -> Vector {
        self.0.peek_gradient(y)
    }
    fn hessian(&self, y: &Vector) -> Matrix {
        self.0.peek_hessian(y)
    }
}

/// High-accuracy minimizer by damped Newton (up to 10⁴ iterations, uncounted evaluations).
///
/// Aims for the gradient floor; fails unless the gradient dual norm reaches `1e-8`.
pub fn reference_solution(obj: &Objective, x0: &Vector) -> Result<(Vector, f64)> {
    check_dim("initial point", x0.len(), obj.dim())?;
    let (sol, iterations, _) = newton_best(&Reference(obj), x0.clone(), obj.geometry(), Tol::Absolute(GRAD_FLOOR), 10_000);
    if sol.residual > 1e-8 {
        return Err(Error::Subsolver {
            context: "reference solve".into(),
            residual: sol.residual,
            iterations,
        });
    }
    let f = obj.peek_value(&sol.y);
    Ok((sol.y, f))
}

#[cfg(test)]
mod tests;
