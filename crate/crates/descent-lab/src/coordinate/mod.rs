//! Randomized coordinate variants of rescaled gradient descent and its Nesterov coupling.
//!
//! Coordinates are sampled uniformly from a seeded stream and norms are Euclidean.

use std::collections::BTreeMap;

use crate::accel::{check_coupling_dgf, NesterovSchedule};
use crate::descent::{DescentReport, Trace, GRAD_FLOOR};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{mirror_step, Dgf, Geometry, Vector};
use crate::objectives::{GaussianSampler, Objective};
use crate::order::Order;

/// Per-coordinate steps `η_i` for rescaled coordinate descent of order `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateConfig {
    pub etas: Vec<f64>,
    pub order: Order,
    pub seed: u64,
    /// `L_1^{(i)}, …, L_p^{(i)}` for each coordinate, when known.
    pub constants: Option<Vec<Vec<f64>>>,
    /// Schedule constant `C` of the accelerated variant; defaults to `1/p^p`.
    pub schedule_constant: Option<f64>,
}

/// `Σ_{m=2}^{p} L_m/m!`.
fn weighted_sum(constants: &[f64]) -> f64 {
    let mut fact = 1.0;
    let mut sum = 0.0;
    for (i, l) in constants.iter().enumerate() {
        fact *= (i + 1) as f64;
        if i >= 1 {
            sum += l / fact;
        }
    }
    sum
}

/// `min{1, 1/(2 Σ_{m≥2} L_m/m!)}`, the largest admissible `η^{1/(p-1)}`.
fn step_scale_bound(constants: &[f64]) -> f64 {
    let s = weighted_sum(constants);
    if s > 0.0 {
        (0.5 / s).min(1.0)
    } else {
        1.0
    }
}

impl CoordinateConfig {
    pub fn new(etas: Vec<f64>, order: Order, seed: u64) -> Self {
        CoordinateConfig {
            etas,
            order,
            seed,
            constants: None,
            schedule_constant: None,
        }
    }

    /// The same step on every coordinate.
    pub fn broadcast(eta: f64, dim: usize, order: Order, seed: u64) -> Self {
        Self::new(vec![eta; dim], order, seed)
    }

    /// Largest steps allowed by the per-coordinate smoothness constants.
    pub fn admissible(constants: Vec<Vec<f64>>, order: Order, seed: u64) -> Result<Self> {
        let p = match order {
            Order::Finite(p) => p,
            Order::Infinite => {
                return Err(Error::Capability(
                    "coordinate step bounds are stated for finite orders".into(),
                ))
            }
        };
        let etas = constants
            .iter()
            .map(|c| step_scale_bound(c).powf(p - 1.0))
            .collect();
        Ok(CoordinateConfig {
            constants: Some(constants),
            ..Self::new(etas, order, seed)
        })
    }

    pub fn with_constants(mut self, constants: Vec<Vec<f64>>) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn with_schedule_constant(mut self, c: f64) -> Self {
        self.schedule_constant = Some(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.etas.len()
    }

    /// `min_i η_i^{1/(p-1)}/2`.
    pub fn delta(&self) -> f64 {
        self.etas
            .iter()
            .map(|e| self.order.step_scale(*e))
            .fold(f64::INFINITY, f64::min)
            / 2.0
    }

    /// Checks positivity, the dimension, and the step bound when constants are known.
    pub fn validate(&self, dim: usize) -> Result<()> {
        check_dim("coordinate steps", self.etas.len(), dim)?;
        if let Order::Finite(p) = self.order {
            if p < 2.0 {
                return Err(Error::Config(format!("coordinate descent needs order >= 2, got {p}")));
            }
        }
        if let Some((i, e)) = self.etas.iter().enumerate().find(|(_, e)| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::Config(format!("step {i} must be positive and finite, got {e}")));
        }
        if let Some(constants) = &self.constants {
            check_dim("coordinate smoothness constants", constants.len(), dim)?;
            for (i, (c, e)) in constants.iter().zip(&self.etas).enumerate() {
                let bound = step_scale_bound(c);
                let scale = self.order.step_scale(*e);
                if scale > bound * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "step {i}: η^(1/(p-1)) = {scale} exceeds the admissible {bound}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_index(obj: &Objective, x: &Vector, i: usize) -> Result<()> {
    check_dim("initial point", x.len(), obj.dim())?;
    if i >= obj.dim() {
        return Err(Error::arg(format!("coordinate {i} out of range for dimension {}", obj.dim())));
    }
    Ok(())
}

/// Moves coordinate `i` by `-η^{1/(p-1)} g_i/|g_i|^{(p-2)/(p-1)}`; one gradient evaluation.
pub fn rcd_step(obj: &Objective, x: &Vector, i: usize, eta: f64, p: Order) -> Result<Vector> {
    check_index(obj, x, i)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::arg(format!("step must be positive, got {eta}")));
    }
    let g = obj.gradient(x)[i];
    Ok(coordinate_move(x, i, g, eta, p))
}

fn coordinate_move(x: &Vector, i: usize, g: f64, eta: f64, p: Order) -> Vector {
    let mut y = x.clone();
    let gn = g.abs();
    if gn <= GRAD_FLOOR {
        return y;
    }
    let scale = if p == Order::Finite(2.0) {
        eta
    } else {
        p.step_scale(eta) / gn.powf(p.rescale_exponent())
    };
    y[i] -= g * scale;
    y
}

fn new_trace(tag: &str, config: &CoordinateConfig, obj: &Objective, seed: u64) -> Trace {
    let mut trace = Trace::new(tag, obj.known_minimum());
    trace.meta.insert("order".into(), config.order.to_string());
    trace.meta.insert("delta".into(), format!("{}", config.delta()));
    trace.meta.insert("seed".into(), seed.to_string());
    trace
}

/// Rescaled coordinate descent with uniformly sampled coordinates.
///
/// Each record after the first stores the sampled coordinate, `coordinate_grad = |∇_i f(x_k)|`
/// and `coordinate_margin = f(x_{k+1}) - f(x_k) + δ|∇_i f(x_k)|^{p/(p-1)}`.
pub fn run_rcd(obj: &Objective, config: &CoordinateConfig, x0: &Vector, k_max: usize, seed: u64) -> Result<Trace> {
    check_dim("initial point", x0.len(), obj.dim())?;
    config.validate(obj.dim())?;
    let geom = Geometry::identity(obj.dim());
    let delta = config.delta();
    let q = config.order.dual_exponent();
    let mut rng = GaussianSampler::new(seed);
    let mut trace = new_trace("rcd", config, obj, seed);
    let base = obj.counts().gradients;
    let mut x = x0.clone();
    trace.push(obj, &geom, x.clone(), 0, base, BTreeMap::new())?;
    for k in 0..k_max {
        let f_prev = trace.last().f_value;
        if trace.last().grad_dual_norm <= GRAD_FLOOR {
            trace.converged = true;
            break;
        }
        let i = rng.index(obj.dim());
        let g = obj.gradient(&x)[i];
        let y = coordinate_move(&x, i, g, config.etas[i], config.order);
        let step_norm = (&y - &x).norm();
        x = y;
        let rec = trace.push(obj, &geom, x.clone(), k + 1, base, BTreeMap::new())?;
        rec.step_norm = step_norm;
        rec.coordinate = Some(i);
        rec.certificates.insert("coordinate_grad".into(), g.abs());
        rec.certificates
            .insert("coordinate_margin".into(), rec.f_value - f_prev + delta * g.abs().powf(q));
    }
    Ok(trace)
}

/// Checks `f(x_{k+1}) - f(x_k) ≤ -δ|∇_{i_k} f(x_k)|^{p/(p-1)}` on every step of a coordinate
/// trace, with slack `1e-9 (1 + |f(x_k)|)`.
pub fn certify_coordinate_descent(trace: &Trace, delta: f64, p: Order) -> Result<DescentReport> {
    if !(delta > 0.0) {
        return Err(Error::arg(format!("descent constant must be positive, got {delta}")));
    }
    let q = p.dual_exponent();
    let mut report = DescentReport {
        holds: true,
        worst_margin: f64::NEG_INFINITY,
        first_violation_k: None,
        checked: 0,
    };
    for w in trace.records.windows(2) {
        let g = *w[1].certificates.get("coordinate_grad").ok_or_else(|| {
            Error::arg(format!("record {} has no coordinate gradient", w[1].k))
        })?;
        let margin = w[1].f_value - w[0].f_value + delta * g.powf(q);
        report.checked += 1;
        report.worst_margin = report.worst_margin.max(margin);
        if margin > 1e-9 * (1.0 + w[0].f_value.abs()) && report.holds {
            report.holds = false;
            report.first_violation_k = Some(w[0].k);
        }
    }
    Ok(report)
}

/// Nesterov-coupled rescaled coordinate descent.
///
/// Uses the accelerated constant `δ = δ_0^{(p-1)/p}` with `δ_0 = config.delta()`. Every
/// iteration samples one coordinate and spends one gradient on it, shared by the mirror
/// step and the coordinate step.
pub fn accel_rcd(
    obj: &Objective,
    dgf: &Dgf,
    config: &CoordinateConfig,
    x0: &Vector,
    k_max: usize,
    seed: u64,
) -> Result<Trace> {
    check_dim("initial point", x0.len(), obj.dim())?;
    check_dim("dgf", dgf.dim(), obj.dim())?;
    config.validate(obj.dim())?;
    let delta = config.delta().powf(config.order.rate_exponent());
    let mut sched = NesterovSchedule::new(config.order, delta)?;
    if let Some(c) = config.schedule_constant {
        sched = sched.with_constant(c)?;
    }
    check_coupling_dgf(dgf, sched.p as f64)?;
    let geom = Geometry::identity(obj.dim());
    let q = config.order.dual_exponent();
    let x_star = obj.known_minimizer().cloned();
    let mut rng = GaussianSampler::new(seed);
    let mut trace = new_trace("arcd", config, obj, seed);
    trace.meta.insert("accelerated_delta".into(), format!("{delta}"));
    trace.meta.insert("schedule_constant".into(), format!("{}", sched.c));
    let base = obj.counts().gradients;
    let (mut y, mut z) = (x0.clone(), x0.clone());
    let lyap = |a: f64, gap: f64, z: &Vector| x_star.as_ref().map(|xs| a * gap + dgf.divergence(xs, z));
    let mut certs = BTreeMap::from([("A".to_string(), 0.0)]);
    if let Some(e) = lyap(0.0, 0.0, &z) {
        certs.insert("lyapunov".into(), e);
    }
    trace.push(obj, &geom, y.clone(), 0, base, certs)?.z = Some(z.clone());
    for k in 0..k_max {
        if trace.last().grad_dual_norm <= GRAD_FLOOR {
            trace.converged = true;
            break;
        }
        let s = sched.at(k as u64);
        let w = sched.delta * s.tau;
        let x = &z * w + &y * (1.0 - w);
        let i = rng.index(obj.dim());
        let g = obj.gradient(&x)[i];
        let mut gi = Vector::zeros(obj.dim());
        gi[i] = g;
        z = mirror_step(dgf, &z, &gi, sched.delta * s.alpha).map_err(|e| e.at(k))?;
        let y_next = coordinate_move(&x, i, g, config.etas[i], config.order);
        let f_x = obj.peek_value(&x);
        let kernel_margin = obj.peek_value(&y_next) - f_x + config.delta() * g.abs().powf(q);
        let step_norm = (&y_next - &y).norm();
        y = y_next;
        let rec = trace.push(obj, &geom, y.clone(), k + 1, base, BTreeMap::new())?;
        rec.step_norm = step_norm;
        rec.coordinate = Some(i);
        rec.z = Some(z.clone());
        let mut certs = BTreeMap::from([
            ("A".to_string(), s.a_next),
            ("alpha".to_string(), s.alpha),
            ("tau".to_string(), s.tau),
            ("coordinate_grad".to_string(), g.abs()),
            ("kernel_margin".to_string(), kernel_margin),
            ("kernel_base".to_string(), f_x),
        ]);
        if let Some(e) = lyap(s.a_next, rec.f_gap, &z) {
            certs.insert("lyapunov".into(), e);
        }
        rec.certificates = certs;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests;
