//! Closed-form convergence bounds for descent methods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::Order;

use super::DescentMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `min_{s<k} ‖∇f(x_s)‖_* ≤ (E₀/(δk))^{(p-1)/p}`.
    GradNorm,
    /// Convex objectives with initial distance `R`.
    Convex,
    /// Gradient-dominated objectives.
    GradDominated,
}

impl std::str::FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b11" | "grad_norm" => Ok(BoundKind::GradNorm),
            "b22" | "convex" => Ok(BoundKind::Convex),
            "b33" | "grad_dominated" => Ok(BoundKind::GradDominated),
            _ => Err(Error::arg(format!("unknown bound kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateParams {
    pub p: Order,
    pub delta: f64,
    /// Initial gap `f(x_0) - f*`.
    pub e0: f64,
    /// Radius of the initial sublevel set (convex bound).
    pub r: Option<f64>,
    /// Gradient-domination constant.
    pub mu: Option<f64>,
    pub mode: DescentMode,
}

impl RateParams {
    pub fn new(p: Order, delta: f64, e0: f64) -> Self {
        RateParams {
            p,
            delta,
            e0,
            r: None,
            mu: None,
            mode: DescentMode::AtCurrent,
        }
    }
}

/// `c_p = (1 - 1/p)^p/(p - 1)`.
pub fn c_p(p: f64) -> f64 {
    (1.0 - 1.0 / p).powf(p) / (p - 1.0)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::arg(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `γ = 1` when the gradient is taken at the current iterate; otherwise
/// `(1 + (E₀/c_p)^{1/p} δ^{(p-1)/p}/(Rp))^{p-1}`, with limit `exp(δ/R)` at `p = ∞`.
pub fn gamma(params: &RateParams) -> Result<f64> {
    if params.mode == DescentMode::AtCurrent {
        return Ok(1.0);
    }
    let r = positive("R", params.r.ok_or_else(|| Error::arg("convex bound needs R"))?)?;
    let delta = positive("delta", params.delta)?;
    let e0 = positive("E0", params.e0)?;
    Ok(match params.p {
        Order::Finite(p) => {
            (1.0 + (e0 / c_p(p)).powf(1.0 / p) * delta.powf((p - 1.0) / p) / (r * p)).powf(p - 1.0)
        }
        Order::Infinite => (delta / r).exp(),
    })
}

/// Evaluates the bound of `kind` after `k` iterations.
pub fn rate_bound(kind: BoundKind, params: &RateParams, k: f64) -> Result<f64> {
    let delta = positive("delta", params.delta)?;
    let e0 = positive("E0", params.e0)?;
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::arg(format!("iteration count must be nonnegative, got {k}")));
    }
    match kind {
        BoundKind::GradNorm => {
            if k < 1.0 {
                return Err(Error::arg("gradient-norm bound needs k >= 1"));
            }
            Ok((e0 / (delta * k)).powf(params.p.rate_exponent()))
        }
        BoundKind::Convex => {
            let r = positive("R", params.r.ok_or_else(|| Error::arg("convex bound needs R"))?)?;
            let gamma = gamma(params)?;
            match params.p {
                Order::Finite(p) => {
                    let inner = 1.0 / e0.powf(1.0 / p)
                        + (delta * k).powf((p - 1.0) / p) / (r * gamma * c_p(p).powf(1.0 / p) * p);
                    Ok(2.0 * inner.powf(-p))
                }
                Order::Infinite => Ok(2.0 * e0 * (-delta * k / (r * gamma)).exp()),
            }
        }
        BoundKind::GradDominated => {
            let mu = positive("mu", params.mu.ok_or_else(|| Error::arg("gradient-dominated bound needs mu"))?)?;
            let (lead, mu_pow) = match params.p {
                Order::Finite(p) => (p / (p - 1.0), mu.powf(1.0 / (p - 1.0))),
                Order::Infinite => (1.0, 1.0),
            };
            Ok(e0 * (-lead * mu_pow * delta * k).exp())
        }
    }
}
