//! Loss zoo with exact derivatives, finite-difference oracles and smoothness certifiers.

mod certify;
mod data;
pub mod jet;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Geometry, Matrix, Vector};
use crate::order::Order;
use jet::{sigmoid, softplus, Jet};

pub use certify::{
    certify_gradient_lower_bound, certify_strong_smoothness, derive_lower_bound_constants,
    fd_directional_derivative, sample_points, tensor_norm_estimate, LowerBoundReport,
    SmoothnessReport,
};
pub use data::{Dataset, GaussianSampler};

/// Which inequality the recorded smoothness constants bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothnessForm {
    /// `|∇^m f(x)(B⁻¹∇f)^m| ≤ L_m ‖∇f‖_*^{m+(p-m)/(p-1)}`.
    AlongGradient,
    /// `‖∇^m f(x)‖ ≤ L_m ‖∇f‖_*^{(p-m)/(p-1)}`.
    OperatorNorm,
}

/// Strong smoothness constants `L_1, L_2, …` of a given order.
#[derive(Clone, Debug, PartialEq)]
pub struct Smoothness {
    pub order: Order,
    pub constants: Vec<f64>,
    pub form: SmoothnessForm,
}

impl Smoothness {
    /// `Σ_{m=2}^{p} L_m/m!` over the recorded constants.
    pub fn weighted_sum(&self) -> f64 {
        let mut fact = 1.0;
        let mut sum = 0.0;
        for (i, l) in self.constants.iter().enumerate() {
            let m = i + 1;
            fact *= m as f64;
            if m >= 2 {
                sum += l / fact;
            }
        }
        sum
    }

    /// Largest step `η` admitted by `η^{1/(p-1)} ≤ min{1, 1/(2 Σ L_m/m!)}`.
    pub fn admissible_step(&self) -> f64 {
        let s = self.weighted_sum();
        let scale = if s > 0.0 { (1.0 / (2.0 * s)).min(1.0) } else { 1.0 };
        match self.order {
            Order::Finite(p) => scale.powf(p - 1.0),
            Order::Infinite => scale,
        }
    }
}

/// Gradient domination `(p-1)/p ‖∇f‖_*^{p/(p-1)} ≥ μ^{1/(p-1)} (f - f*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientDomination {
    pub mu: f64,
    pub order: f64,
}

/// Snapshot of evaluation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub values: u64,
    pub gradients: u64,
    pub hessians: u64,
    pub derivatives: u64,
}

#[derive(Debug, Default)]
struct Counters {
    values: AtomicU64,
    gradients: AtomicU64,
    hessians: AtomicU64,
    derivatives: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> EvalCounts {
        EvalCounts {
            values: self.values.load(Ordering::Relaxed),
            gradients: self.gradients.load(Ordering::Relaxed),
            hessians: self.hessians.load(Ordering::Relaxed),
            derivatives: self.derivatives.load(Ordering::Relaxed),
        }
    }

    fn from_snapshot(c: EvalCounts) -> Self {
        Counters {
            values: AtomicU64::new(c.values),
            gradients: AtomicU64::new(c.gradients),
            hessians: AtomicU64::new(c.hessians),
            derivatives: AtomicU64::new(c.derivatives),
        }
    }
}

/// Per-row scalar profile of a ridge sum `Σ φ_i(a_iᵀx - b_i)`.
#[derive(Clone, Debug)]
enum Profile {
    /// `(w_i/p)|r|^p`.
    AbsPow { p: f64, weights: Vector },
    /// `ln(1 + e^{-y_i r})`.
    Logistic { labels: Vector },
    /// `½ σ(s_i r)²` with `s_i = 1 - 2y_i`.
    Glm { signs: Vector },
}

impl Profile {
    fn phi(&self, i: usize, r: f64) -> f64 {
        match self {
            Profile::AbsPow { p, weights } => weights[i] / p * r.abs().powf(*p),
            Profile::Logistic { labels } => softplus(-labels[i] * r),
            Profile::Glm { signs } => 0.5 * sigmoid(signs[i] * r).powi(2),
        }
    }

    fn d1(&self, i: usize, r: f64) -> f64 {
        match self {
            Profile::AbsPow { p, weights } => {
                if r == 0.0 {
                    0.0
                } else {
                    weights[i] * r.signum() * r.abs().powf(p - 1.0)
                }
            }
            Profile::Logistic { labels } => {
                let y = labels[i];
                -y * sigmoid(-y * r)
            }
            Profile::Glm { signs } => {
                let s = sigmoid(signs[i] * r);
                signs[i] * s * s * (1.0 - s)
            }
        }
    }

    fn d2(&self, i: usize, r: f64) -> f64 {
        match self {
            Profile::AbsPow { p, weights } => {
                if *p == 2.0 {
                    weights[i]
                } else if r == 0.0 {
                    0.0
                } else {
                    weights[i] * (p - 1.0) * r.abs().powf(p - 2.0)
                }
            }
            Profile::Logistic { labels } => {
                let y = labels[i];
                y * y * sigmoid(y * r) * sigmoid(-y * r)
            }
            Profile::Glm { signs } => {
                let s = sigmoid(signs[i] * r);
                s * s * (1.0 - s) * (2.0 - 3.0 * s)
            }
        }
    }

    fn jet(&self, i: usize, r: Jet) -> Jet {
        match self {
            Profile::AbsPow { p, weights } => r.abs_pow(*p).scale(weights[i] / p),
            Profile::Logistic { labels } => r.scale(-labels[i]).softplus(),
            Profile::Glm { signs } => {
                let s = r.scale(signs[i]).sigmoid();
                (s * s).scale(0.5)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Loss {
    /// `(1/p)‖r‖_B^p` with `r = x` or `r = Ax - b`.
    PowerNorm {
        p: f64,
        affine: Option<(Matrix, Vector)>,
    },
    /// `Σ φ_i(a_iᵀx - b_i)`.
    Ridge { a: Matrix, b: Vector, profile: Profile },
    /// `½xᵀQx - cᵀx + offset`.
    Quadratic { q: Matrix, c: Vector, offset: f64 },
}

/// A differentiable objective with exact derivatives up to order four,
/// known constants where available, and evaluation counters.
#[derive(Debug)]
pub struct Objective {
    id: String,
    dim: usize,
    geom: Geometry,
    loss: Loss,
    known_minimum: Option<f64>,
    known_minimizer: Option<Vector>,
    smoothness: Option<Smoothness>,
    gradient_dominated: Option<GradientDomination>,
    counters: Counters,
}

impl Clone for Objective {
    fn clone(&self) -> Self {
        Objective {
            id: self.id.clone(),
            dim: self.dim,
            geom: self.geom.clone(),
            loss: self.loss.clone(),
            known_minimum: self.known_minimum,
            known_minimizer: self.known_minimizer.clone(),
            smoothness: self.smoothness.clone(),
            gradient_dominated: self.gradient_dominated,
            counters: Counters::from_snapshot(self.counters.snapshot()),
        }
    }
}

/// Highest derivative order with an exact implementation.
pub const MAX_ORDER: usize = jet::ORDER;

fn falling_factorials(p: f64, upto: usize) -> Vec<f64> {
    // (p-1)(p-2)…(p-m+1) for m = 1..=upto
    let mut out = Vec::with_capacity(upto);
    let mut acc = 1.0;
    for m in 1..=upto {
        if m >= 2 {
            acc *= p - (m as f64 - 1.0);
        }
        out.push(acc);
    }
    out
}

fn singular_range(a: &Matrix) -> (f64, f64) {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (max, min)
}

fn full_row_rank(a: &Matrix) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    if a.nrows() > a.ncols() {
        return false;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > 1e-10 * max.max(1e-300)).count() == a.nrows()
}

/// Constants for `F(Ax - b)` where `F` has operator-norm constants `c_m` and `A` is
/// square and invertible: `L_m = c_m s_max^{2m} / s_min^{m+(p-m)/(p-1)}`, `L_p = c_p s_max^p`.
fn composed_constants(base: &[f64], p: f64, s_max: f64, s_min: f64) -> Vec<f64> {
    let pi = p as usize;
    base.iter()
        .enumerate()
        .map(|(i, c)| {
            let m = i + 1;
            if m == 1 {
                1.0
            } else if m == pi {
                c * s_max.powf(p)
            } else {
                let mf = m as f64;
                c * s_max.powf(2.0 * mf) / s_min.powf(mf + (p - mf) / (p - 1.0))
            }
        })
        .collect()
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0
}

impl Objective {
    fn base(id: &str, dim: usize, loss: Loss) -> Self {
        Objective {
            id: id.to_string(),
            dim,
            geom: Geometry::identity(dim),
            loss,
            known_minimum: None,
            known_minimizer: None,
            smoothness: None,
            gradient_dominated: None,
            counters: Counters::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Geometry in which the recorded constants hold.
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn max_order(&self) -> usize {
        MAX_ORDER
    }

    pub fn known_minimum(&self) -> Option<f64> {
        self.known_minimum
    }

    pub fn known_minimizer(&self) -> Option<&Vector> {
        self.known_minimizer.as_ref()
    }

    pub fn smoothness(&self) -> Option<&Smoothness> {
        self.smoothness.as_ref()
    }

    pub fn gradient_dominated(&self) -> Option<GradientDomination> {
        self.gradient_dominated
    }

    /// Replaces the reference optimum, e.g. with a numerically computed one.
    pub fn with_reference(mut self, minimum: f64, minimizer: Option<Vector>) -> Self {
        self.known_minimum = Some(minimum);
        self.known_minimizer = minimizer;
        self
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = Some(s);
        self
    }

    pub fn counts(&self) -> EvalCounts {
        self.counters.snapshot()
    }

    /// Same objective with zeroed counters, for independent runs.
    pub fn clone_fresh(&self) -> Self {
        let mut o = self.clone();
        o.counters = Counters::default();
        o
    }

    pub fn reset_counts(&self) {
        for c in [
            &self.counters.values,
            &self.counters.gradients,
            &self.counters.hessians,
            &self.counters.derivatives,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }

    /// `f(x)`; counts one value evaluation.
    pub fn value(&self, x: &Vector) -> f64 {
        self.counters.values.fetch_add(1, Ordering::Relaxed);
        self.peek_value(x)
    }

    /// `∇f(x)`; counts one gradient evaluation.
    pub fn gradient(&self, x: &Vector) -> Vector {
        self.counters.gradients.fetch_add(1, Ordering::Relaxed);
        self.peek_gradient(x)
    }

    /// `∇²f(x)`; counts one Hessian evaluation.
    pub fn hessian(&self, x: &Vector) -> Matrix {
        self.counters.hessians.fetch_add(1, Ordering::Relaxed);
        self.peek_hessian(x)
    }

    /// `∇^m f(x)(v)^m` for `m ≤ 4`.
    pub fn directional_derivative(&self, x: &Vector, m: usize, v: &Vector) -> Result<f64> {
        check_dim("directional derivative point", x.len(), self.dim)?;
        check_dim("directional derivative direction", v.len(), self.dim)?;
        if m > MAX_ORDER {
            return Err(Error::Capability(format!(
                "{}: derivatives above order {MAX_ORDER} are not available (asked for {m})",
                self.id
            )));
        }
        self.counters.derivatives.fetch_add(1, Ordering::Relaxed);
        Ok(self.restrict(x, v).derivative(m))
    }

    /// Uncounted `f(x)`, for monitoring and certification.
    pub fn peek_value(&self, x: &Vector) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.loss {
            Loss::PowerNorm { p, affine } => {
                let r = self.residual(x, affine);
                self.geom.primal_norm(&r).powf(*p) / p
            }
            Loss::Ridge { a, b, profile } => {
                let r = a * x - b;
                r.iter().enumerate().map(|(i, ri)| profile.phi(i, *ri)).sum()
            }
            Loss::Quadratic { q, c, offset } => 0.5 * x.dot(&(q * x)) - c.dot(x) + offset,
        }
    }

    /// Uncounted `∇f(x)`.
    pub fn peek_gradient(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.dim);
        match &self.loss {
            Loss::PowerNorm { p, affine } => {
                let r = self.residual(x, affine);
                let n = self.geom.primal_norm(&r);
                let inner = if n == 0.0 {
                    Vector::zeros(r.len())
                } else {
                    self.geom.apply(&r) * n.powf(p - 2.0)
                };
                match affine {
                    Some((a, _)) => a.tr_mul(&inner),
                    None => inner,
                }
            }
            Loss::Ridge { a, b, profile } => {
                let r = a * x - b;
                let d = Vector::from_iterator(
                    r.len(),
                    r.iter().enumerate().map(|(i, ri)| profile.d1(i, *ri)),
                );
                a.tr_mul(&d)
            }
            Loss::Quadratic { q, c, .. } => q * x - c,
        }
    }

    /// Uncounted `∇²f(x)`.
    pub fn peek_hessian(&self, x: &Vector) -> Matrix {
        match &self.loss {
            Loss::PowerNorm { p, affine } => {
                let r = self.residual(x, affine);
                let n = self.geom.primal_norm(&r);
                let bmat = self.geom.operator();
                let inner = if n == 0.0 {
                    if *p == 2.0 {
                        bmat.clone()
                    } else {
                        Matrix::zeros(r.len(), r.len())
                    }
                } else {
                    let br = self.geom.apply(&r);
                    bmat * n.powf(p - 2.0) + &br * br.transpose() * ((p - 2.0) * n.powf(p - 4.0))
                };
                match affine {
                    Some((a, _)) => a.transpose() * inner * a,
                    None => inner,
                }
            }
            Loss::Ridge { a, b, profile } => {
                let r = a * x - b;
                let mut scaled = a.clone();
                for (i, ri) in r.iter().enumerate() {
                    let d = profile.d2(i, *ri);
                    scaled.row_mut(i).scale_mut(d);
                }
                a.transpose() * scaled
            }
            Loss::Quadratic { q, .. } => q.clone(),
        }
    }

    /// Rows of the ridge design, for candidate tensor directions.
    pub(crate) fn ridge_rows(&self) -> Vec<Vector> {
        match &self.loss {
            Loss::Ridge { a, .. } => a.row_iter().map(|r| r.transpose()).collect(),
            Loss::PowerNorm {
                affine: Some((a, _)),
                ..
            } => a.row_iter().map(|r| r.transpose()).collect(),
            _ => Vec::new(),
        }
    }

    fn residual(&self, x: &Vector, affine: &Option<(Matrix, Vector)>) -> Vector {
        match affine {
            Some((a, b)) => a * x - b,
            None => x.clone(),
        }
    }

    /// Taylor series of `t ↦ f(x + t v)`.
    fn restrict(&self, x: &Vector, v: &Vector) -> Jet {
        match &self.loss {
            Loss::PowerNorm { p, affine } => {
                let r = self.residual(x, affine);
                let u = match affine {
                    Some((a, _)) => a * v,
                    None => v.clone(),
                };
                let q0 = self.geom.inner(&r, &r);
                let q1 = 2.0 * self.geom.inner(&r, &u);
                let q2 = self.geom.inner(&u, &u);
                if q0 > 0.0 {
                    let mut q = Jet::constant(q0);
                    q.c[1] = q1;
                    q.c[2] = q2;
                    q.powf(p / 2.0).scale(1.0 / p)
                } else {
                    Jet::linear(0.0, q2.sqrt()).abs_pow(*p).scale(1.0 / p)
                }
            }
            Loss::Ridge { a, b, profile } => {
                let r = a * x - b;
                let u = a * v;
                let mut acc = Jet::constant(0.0);
                for i in 0..r.len() {
                    acc = acc + profile.jet(i, Jet::linear(r[i], u[i]));
                }
                acc
            }
            Loss::Quadratic { q, c, offset } => {
                let qv = q * v;
                let mut j = Jet::constant(0.5 * x.dot(&(q * x)) - c.dot(x) + offset);
                j.c[1] = (q * x - c).dot(v);
                j.c[2] = 0.5 * v.dot(&qv);
                j
            }
        }
    }
}

/// `f(x) = (1/p)‖x‖_B^p`; minimizer 0, gradient dominated with `μ = (p-1)^{p-1}`.
pub fn make_power_norm_loss(p: f64, geom: Geometry) -> Result<Objective> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::arg(format!("power norm loss needs p >= 2, got {p}")));
    }
    let dim = geom.dim();
    let mut o = Objective::base("power_norm", dim, Loss::PowerNorm { p, affine: None });
    o.geom = geom;
    o.known_minimum = Some(0.0);
    o.known_minimizer = Some(Vector::zeros(dim));
    o.gradient_dominated = Some(GradientDomination {
        mu: (p - 1.0).powf(p - 1.0),
        order: p,
    });
    if is_integer(p) {
        o.smoothness = Some(Smoothness {
            order: Order::Finite(p),
            constants: falling_factorials(p, p as usize),
            form: SmoothnessForm::AlongGradient,
        });
    }
    Ok(o)
}

/// `f(x) = (1/p)‖Ax - b‖₂^p`.
pub fn make_affine_power_norm_loss(data: &Dataset, p: f64) -> Result<Objective> {
    data.validate()?;
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::arg(format!("power norm loss needs p >= 2, got {p}")));
    }
    let a = data.design();
    let b = data.target_vector();
    let dim = a.ncols();
    let svd = a.clone().svd(true, true);
    let xstar = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Degenerate(format!("least-squares reference solve failed: {e}")))?;
    let mut o = Objective::base(
        "power_norm",
        dim,
        Loss::PowerNorm {
            p,
            affine: Some((a.clone(), b)),
        },
    );
    let fstar = o.peek_value(&xstar);
    o.known_minimum = Some(fstar);
    o.known_minimizer = Some(xstar);
    if a.is_square() {
        let (s_max, s_min) = singular_range(&a);
        if s_min > 1e-12 * s_max {
            o.gradient_dominated = Some(GradientDomination {
                mu: (p - 1.0).powf(p - 1.0) * s_min.powf(p),
                order: p,
            });
            if is_integer(p) {
                o.smoothness = Some(Smoothness {
                    order: Order::Finite(p),
                    constants: composed_constants(
                        &falling_factorials(p, p as usize),
                        p,
                        s_max,
                        s_min,
                    ),
                    form: SmoothnessForm::AlongGradient,
                });
            }
        }
    }
    Ok(o)
}

/// `f(x) = (1/p) Σ_i |a_iᵀx - b_i|^p`.
pub fn make_lp_regression_loss(data: &Dataset, p: f64) -> Result<Objective> {
    data.validate()?;
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::arg(format!("lp regression needs p >= 2, got {p}")));
    }
    let a = data.design();
    let b = data.target_vector();
    let (n, dim) = a.shape();
    let identity = a.is_square() && a == Matrix::identity(n, n);
    let mut o = Objective::base(
        "lp_regression",
        dim,
        Loss::Ridge {
            a: a.clone(),
            b: b.clone(),
            profile: Profile::AbsPow {
                p,
                weights: Vector::from_element(n, 1.0),
            },
        },
    );
    if b.iter().all(|v| *v == 0.0) {
        o.known_minimum = Some(0.0);
        o.known_minimizer = Some(Vector::zeros(dim));
    }
    if a.is_square() {
        let (s_max, s_min) = singular_range(&a);
        if s_min > 1e-12 * s_max {
            let xstar = a.clone().lu().solve(&b).ok_or_else(|| {
                Error::Degenerate("design matrix is numerically singular".into())
            })?;
            o.known_minimum = Some(0.0);
            o.known_minimizer = Some(xstar);
            if is_integer(p) {
                let base = falling_factorials(p, p as usize);
                let constants = if identity {
                    base
                } else {
                    composed_constants(&base, p, s_max, s_min)
                };
                o.smoothness = Some(Smoothness {
                    order: Order::Finite(p),
                    constants,
                    form: SmoothnessForm::AlongGradient,
                });
            }
            let q = p / (p - 1.0);
            let mu_root = (p - 1.0) * s_min.powf(q) * (n as f64).powf(q / 2.0 - 1.0);
            o.gradient_dominated = Some(GradientDomination {
                mu: mu_root.powf(p - 1.0),
                order: p,
            });
        }
    }
    Ok(o)
}

/// `f(x) = Σ_i ln(1 + e^{-y_i w_iᵀx})`.
///
/// With linearly independent active rows (`y_i ≠ 0`) the infimum is the constant
/// contribution of the inactive rows and is not attained.
pub fn make_logistic_loss(data: &Dataset) -> Result<Objective> {
    data.validate()?;
    let w = data.design();
    let y = data.target_vector();
    let (n, dim) = w.shape();
    let mut o = Objective::base(
        "logistic",
        dim,
        Loss::Ridge {
            a: w.clone(),
            b: Vector::zeros(n),
            profile: Profile::Logistic { labels: y.clone() },
        },
    );
    let active: Vec<usize> = (0..n).filter(|&i| y[i] != 0.0).collect();
    let inactive = (n - active.len()) as f64;
    if full_row_rank(&w.select_rows(active.iter())) {
        o.known_minimum = Some(inactive * std::f64::consts::LN_2);
    }
    if n == 1 {
        let norm = w.row(0).norm() * y[0].abs();
        let mut constants = Vec::new();
        let mut fact = 1.0;
        for m in 1..=MAX_ORDER {
            if m >= 2 {
                fact *= (m - 1) as f64;
            }
            constants.push(fact * norm.powi(m as i32 - 1));
        }
        o.smoothness = Some(Smoothness {
            order: Order::Infinite,
            constants,
            form: SmoothnessForm::OperatorNorm,
        });
    }
    Ok(o)
}

/// `f(x) = Σ_i ½(y_i - σ(w_iᵀx))²` with labels in `{0, 1}`.
pub fn make_glm_loss(data: &Dataset) -> Result<Objective> {
    data.validate()?;
    if let Some(bad) = data.targets.iter().find(|y| **y != 0.0 && **y != 1.0) {
        return Err(Error::arg(format!("glm labels must be 0 or 1, got {bad}")));
    }
    let w = data.design();
    let y = data.target_vector();
    let (n, dim) = w.shape();
    let signs = y.map(|v| 1.0 - 2.0 * v);
    let mut o = Objective::base(
        "glm",
        dim,
        Loss::Ridge {
            a: w.clone(),
            b: Vector::zeros(n),
            profile: Profile::Glm { signs },
        },
    );
    if full_row_rank(&w) {
        o.known_minimum = Some(0.0);
    }
    if n == 1 {
        let norm = w.row(0).norm();
        o.smoothness = Some(Smoothness {
            order: Order::Finite(3.0),
            constants: vec![
                1.0,
                2.0 * norm.powf(1.5),
                (3f64.sqrt() / 24.0 + 0.5) * norm.powi(3),
            ],
            form: SmoothnessForm::OperatorNorm,
        });
    }
    Ok(o)
}

/// `f(x) = (x₁ + x₂)⁴ + (1/16)(x₁ - x₂)⁴`.
pub fn make_hamiltonian_quartic_loss() -> Objective {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
    let weights = Vector::from_column_slice(&[4.0, 0.25]);
    let mut o = Objective::base(
        "hamiltonian_quartic",
        2,
        Loss::Ridge {
            a,
            b: Vector::zeros(2),
            profile: Profile::AbsPow { p: 4.0, weights },
        },
    );
    o.known_minimum = Some(0.0);
    o.known_minimizer = Some(Vector::zeros(2));
    // In u = x₁+x₂, v = x₁-x₂ the loss is separable; AAᵀ = 2I gives these bounds.
    let base = falling_factorials(4.0, 4);
    let constants = (1..=4)
        .map(|m| {
            let mf = m as f64;
            if m == 1 {
                1.0
            } else if m == 4 {
                base[3] * 4.0 * 4.0
            } else {
                let e = mf + (4.0 - mf) / 3.0;
                base[m - 1] * 2f64.powf(mf - e / 2.0) * 4f64.powf((mf - 1.0) / 3.0)
            }
        })
        .collect();
    o.smoothness = Some(Smoothness {
        order: Order::Finite(4.0),
        constants,
        form: SmoothnessForm::AlongGradient,
    });
    o.gradient_dominated = Some(GradientDomination {
        mu: 13.5,
        order: 4.0,
    });
    o
}

/// `f(x) = ½xᵀQx - cᵀx`, shifted so that its minimum is 0.
pub fn make_quadratic_loss(q: Matrix, c: Vector) -> Result<Objective> {
    let geom = Geometry::new(q.clone())?;
    check_dim("quadratic linear term", c.len(), geom.dim())?;
    let dim = geom.dim();
    let xstar = geom.solve(&c);
    let offset = 0.5 * c.dot(&xstar);
    let sym = geom.operator().clone();
    let eig = sym.clone().symmetric_eigen().eigenvalues;
    let lmax = eig.iter().copied().fold(f64::MIN, f64::max);
    let lmin = eig.iter().copied().fold(f64::MAX, f64::min);
    let mut o = Objective::base("quadratic", dim, Loss::Quadratic { q: sym, c, offset });
    o.known_minimum = Some(0.0);
    o.known_minimizer = Some(xstar);
    o.smoothness = Some(Smoothness {
        order: Order::Finite(2.0),
        constants: vec![1.0, lmax],
        form: SmoothnessForm::AlongGradient,
    });
    o.gradient_dominated = Some(GradientDomination {
        mu: lmin,
        order: 2.0,
    });
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn power_norm_examples() {
        let f = make_power_norm_loss(4.0, Geometry::identity(2)).unwrap();
        assert_eq!(f.value(&v(&[1.0, 0.0])), 0.25);
        assert_eq!(f.gradient(&v(&[1.0, 0.0])), v(&[1.0, 0.0]));
        assert_eq!(f.value(&v(&[0.0, 0.0])), 0.0);
        assert_eq!(f.gradient(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        let q = make_power_norm_loss(2.0, Geometry::identity(2)).unwrap();
        assert_eq!(q.value(&v(&[3.0, 4.0])), 12.5);
        assert_eq!(q.gradient(&v(&[3.0, 4.0])), v(&[3.0, 4.0]));
        assert!(make_power_norm_loss(1.5, Geometry::identity(2)).is_err());
        let s = f.smoothness().unwrap();
        assert_eq!(s.constants, vec![1.0, 3.0, 6.0, 6.0]);
        assert_eq!(f.gradient_dominated().unwrap().mu, 27.0);
    }

    #[test]
    fn lp_regression_examples() {
        let d = Dataset::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let f = make_lp_regression_loss(&d, 4.0).unwrap();
        assert_eq!(f.value(&v(&[1.0, 1.0])), 0.5);
        assert_eq!(f.gradient(&v(&[1.0, 1.0])), v(&[1.0, 1.0]));
        let d = Dataset::single(&[1.0], 1.0);
        let f = make_lp_regression_loss(&d, 2.0).unwrap();
        assert_eq!(f.value(&v(&[1.0])), 0.0);
        assert_eq!(f.gradient(&v(&[1.0])), v(&[0.0]));
        let d = Dataset::single(&[1.0, 1.0], 0.0);
        let f = make_lp_regression_loss(&d, 4.0).unwrap();
        assert_eq!(f.value(&v(&[1.0, 1.0])), 4.0);
        assert_eq!(f.gradient(&v(&[1.0, 1.0])), v(&[8.0, 8.0]));
    }

    #[test]
    fn logistic_examples() {
        let f = make_logistic_loss(&Dataset::single(&[1.0], 1.0)).unwrap();
        assert!(close(f.value(&v(&[0.0])), std::f64::consts::LN_2, 1e-15));
        assert!(close(f.gradient(&v(&[0.0]))[0], -0.5, 1e-15));
        assert!(f.value(&v(&[50.0])) < 1e-20);
        let f = make_logistic_loss(&Dataset::single(&[2.0, 0.0], 1.0)).unwrap();
        assert!(close(f.value(&v(&[0.0, 5.0])), std::f64::consts::LN_2, 1e-15));
        assert_eq!(f.gradient(&v(&[0.0, 5.0])), v(&[-1.0, 0.0]));
        assert_eq!(f.known_minimum(), Some(0.0));
    }

    #[test]
    fn glm_examples() {
        let f = make_glm_loss(&Dataset::single(&[1.0], 0.0)).unwrap();
        assert_eq!(f.value(&v(&[0.0])), 0.125);
        assert!(close(f.gradient(&v(&[0.0]))[0], 0.125, 1e-15));
        let f1 = make_glm_loss(&Dataset::single(&[1.0], 1.0)).unwrap();
        assert_eq!(f1.value(&v(&[0.0])), 0.125);
        assert!(make_glm_loss(&Dataset::single(&[1.0], 0.5)).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let f = make_hamiltonian_quartic_loss();
        assert_eq!(f.value(&v(&[1.0, -1.0])), 1.0);
        assert_eq!(f.value(&v(&[0.0, 0.0])), 0.0);
        assert_eq!(f.gradient(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        assert_eq!(f.gradient(&v(&[1.0, -1.0])), v(&[2.0, -2.0]));
    }

    #[test]
    fn counters_increment_once_per_call() {
        let f = make_power_norm_loss(3.0, Geometry::identity(2)).unwrap();
        let x = v(&[0.3, 0.4]);
        f.value(&x);
        f.gradient(&x);
        f.gradient(&x);
        f.hessian(&x);
        f.peek_value(&x);
        f.peek_gradient(&x);
        let c = f.counts();
        assert_eq!((c.values, c.gradients, c.hessians), (1, 2, 1));
        let g = f.clone_fresh();
        assert_eq!(g.counts(), EvalCounts::default());
        assert_eq!(f.clone().counts(), c);
    }

    #[test]
    fn first_directional_derivative_is_gradient_inner_product() {
        let f = make_logistic_loss(&Dataset::gaussian(3, 6, 4)).unwrap();
        let mut g = GaussianSampler::new(9);
        for _ in 0..20 {
            let x = g.vector(4);
            let d = g.vector(4);
            let a = f.directional_derivative(&x, 1, &d).unwrap();
            let b = f.peek_gradient(&x).dot(&d);
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert!(f.directional_derivative(&g.vector(4), 5, &g.vector(4)).is_err());
    }

    #[test]
    fn hessian_matches_second_directional_derivative() {
        let data = Dataset::gaussian(5, 4, 3);
        let objs = vec![
            make_power_norm_loss(3.0, Geometry::diagonal(&[1.0, 2.0, 3.0]).unwrap()).unwrap(),
            make_affine_power_norm_loss(&Dataset::gaussian(6, 3, 3), 4.0).unwrap(),
            make_lp_regression_loss(&data, 4.0).unwrap(),
            make_logistic_loss(&data).unwrap(),
            make_glm_loss(&data).unwrap(),
        ];
        let mut g = GaussianSampler::new(11);
        for f in &objs {
            for _ in 0..10 {
                let x = g.vector(3);
                let d = g.vector(3);
                let h = f.peek_hessian(&x);
                let a = d.dot(&(&h * &d));
                let b = f.directional_derivative(&x, 2, &d).unwrap();
                assert!(close(a, b, 1e-10), "{}: {a} vs {b}", f.id());
            }
        }
    }

    #[test]
    fn lp_identity_matches_coordinate_formula() {
        let d = Dataset::from_rows(
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![0.0; 3],
        )
        .unwrap();
        let f = make_lp_regression_loss(&d, 5.0).unwrap();
        let x = v(&[0.5, -1.5, 2.0]);
        let g = f.gradient(&x);
        for i in 0..3 {
            assert_eq!(g[i], x[i].signum() * x[i].abs().powf(4.0));
        }
        assert_eq!(f.smoothness().unwrap().constants, vec![1.0, 4.0, 12.0, 24.0, 24.0]);
    }

    #[test]
    fn quadratic_reference_is_consistent() {
        let q = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = make_quadratic_loss(q, v(&[1.0, -1.0])).unwrap();
        let xs = f.known_minimizer().unwrap().clone();
        assert!(f.peek_value(&xs).abs() < 1e-15);
        assert!(f.peek_gradient(&xs).norm() < 1e-15);
    }
}
