//! Accelerated wrappers around descent kernels: Nesterov coupling, Monteiro–Svaiter
//! line-search acceleration, restarts and Lyapunov tracking.

mod ms;
mod restart;

use std::collections::BTreeMap;

use crate::descent::{DescentConfig, Trace};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{mirror_step, Dgf, DgfKind, Vector};
use crate::objectives::Objective;
use crate::order::Order;

pub use ms::{ms_accelerate, ms_line_search, ms_rate_bound, LineSearchOutcome, MsConfig, MsVariant};
pub use restart::{restart_epoch_length, restart_wrap, Accelerated, RestartStyle};

/// `k(k+1)⋯(k+p-1)` in exact integer arithmetic, `None` on overflow.
pub fn rising_factorial_exact(k: u64, p: u32) -> Option<u128> {
    (0..p as u64).try_fold(1u128, |acc, i| acc.checked_mul((k + i) as u128))
}

/// `k(k+1)⋯(k+p-1)` in floating point.
pub fn rising_factorial(k: f64, p: usize) -> f64 {
    (0..p).map(|i| k + i as f64).product()
}

/// Which gradient drives the mirror update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NesterovVariant {
    /// `z_{k+1}` uses `∇f(x_k)`.
    GradAtX,
    /// `z_{k+1}` uses `∇f(y_{k+1})`.
    GradAtY,
}

/// `A_k = C δ^p k^{(p)}`, `α_k = (A_{k+1} - A_k)/δ`, `τ_k = α_k/A_{k+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NesterovSchedule {
    pub p: usize,
    pub delta: f64,
    /// Defaults to `1/p^p`.
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleValues {
    pub a: f64,
    pub a_next: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl NesterovSchedule {
    pub fn new(p: Order, delta: f64) -> Result<Self> {
        let p = integer_order(p)?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::arg(format!("delta must be positive, got {delta}")));
        }
        Ok(NesterovSchedule {
            p,
            delta,
            c: (p as f64).powi(-(p as i32)),
        })
    }

    pub fn with_constant(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("schedule constant must be positive, got {c}")));
        }
        self.c = c;
        Ok(self)
    }

    pub fn a(&self, k: u64) -> f64 {
        self.c * self.delta.powi(self.p as i32) * rising_factorial(k as f64, self.p)
    }

    pub fn at(&self, k: u64) -> ScheduleValues {
        let a = self.a(k);
        let a_next = self.a(k + 1);
        let alpha = (a_next - a) / self.delta;
        ScheduleValues {
            a,
            a_next,
            alpha,
            tau: alpha / a_next,
        }
    }
}

fn integer_order(p: Order) -> Result<usize> {
    match p {
        Order::Infinite => Err(Error::Capability(
            "acceleration is defined for finite orders only".into(),
        )),
        Order::Finite(q) if q >= 2.0 && q.fract() == 0.0 && q <= 64.0 => Ok(q as usize),
        Order::Finite(q) => Err(Error::arg(format!(
            "acceleration schedule needs an integer order >= 2, got {q}"
        ))),
    }
}

/// `(A_k, α_k, τ_k)` with `δ` and `C = 1/p^p`.
pub fn nesterov_schedule(p: Order, delta: f64, k: u64) -> Result<ScheduleValues> {
    Ok(NesterovSchedule::new(p, delta)?.at(k))
}

/// `p^p D/(δk)^p`.
pub fn nesterov_rate_bound(p: f64, delta: f64, d0: f64, k: f64) -> f64 {
    p.powf(p) * d0 / (delta * k).powf(p)
}

/// A descent kernel wrapped in the Nesterov coupling.
#[derive(Clone, Debug)]
pub struct Nesterov {
    pub kernel: DescentConfig,
    pub variant: NesterovVariant,
    /// Overrides the schedule constant `C`.
    pub schedule_constant: Option<f64>,
}

impl Nesterov {
    pub fn new(kernel: DescentConfig, variant: NesterovVariant) -> Self {
        Nesterov {
            kernel,
            variant,
            schedule_constant: None,
        }
    }

    /// The kernel's descent constant `δ_0` read as `δ^{p/(p-1)}`.
    pub fn delta(&self) -> f64 {
        let q = self.kernel.order().dual_exponent();
        self.kernel.delta().powf(1.0 / q)
    }

    pub fn schedule(&self) -> Result<NesterovSchedule> {
        let s = NesterovSchedule::new(self.kernel.order(), self.delta())?;
        match self.schedule_constant {
            Some(c) => s.with_constant(c),
            None => Ok(s),
        }
    }

    pub fn tag(&self) -> String {
        let v = match self.variant {
            NesterovVariant::GradAtX => "",
            NesterovVariant::GradAtY => "-y",
        };
        format!("nesterov{v}({})", self.kernel.method.tag())
    }

    /// The distance-generating function the coupling expects around `x0`.
    pub fn default_dgf(&self, x0: &Vector) -> Result<Dgf> {
        let p = self.schedule()?.p as f64;
        if p == 2.0 {
            Ok(Dgf::quadratic(self.kernel.geometry.clone()))
        } else {
            Dgf::power_p(p, x0.clone(), self.kernel.geometry.clone())
        }
    }

    pub fn run(&self, obj: &Objective, dgf: &Dgf, x0: &Vector, k_max: usize) -> Result<Trace> {
        self.kernel.validate()?;
        check_dim("initial point", x0.len(), obj.dim())?;
        check_dim("dgf", dgf.dim(), obj.dim())?;
        let sched = self.schedule()?;
        let p = sched.p as f64;
        check_coupling_dgf(dgf, p)?;
        let geom = &self.kernel.geometry;
        let x_star = obj.known_minimizer().cloned();
        let mut trace = Trace::new(self.tag(), obj.known_minimum());
        trace.meta.insert("delta".into(), format!("{}", sched.delta));
        trace.meta.insert("schedule_constant".into(), format!("{}", sched.c));
        trace.meta.insert("eta".into(), format!("{}", self.kernel.eta));
        trace.meta.insert("order".into(), format!("{p}"));
        let base = obj.counts().gradients;
        let kernel_delta = self.kernel.delta();
        let q = self.kernel.order().dual_exponent();
        let (mut y, mut z) = (x0.clone(), x0.clone());
        let lyap = |a: f64, gap: f64, z: &Vector| x_star.as_ref().map(|xs| a * gap + dgf.divergence(xs, z));
        let mut certs = BTreeMap::from([("A".to_string(), 0.0)]);
        if let Some(e) = lyap(0.0, 0.0, &z) {
            certs.insert("lyapunov".into(), e);
        }
        trace.push(obj, geom, y.clone(), 0, base, certs)?.z = Some(z.clone());
        for k in 0..k_max {
            if trace.last().grad_dual_norm <= self.kernel.grad_floor {
                trace.converged = true;
                break;
            }
            let s = sched.at(k as u64);
            let w = sched.delta * s.tau;
            let x = &z * w + &y * (1.0 - w);
            let weight = sched.delta * s.alpha;
            let (y_next, z_next, gx) = match self.variant {
                NesterovVariant::GradAtX => {
                    let g = obj.gradient(&x);
                    let z_next = mirror_step(dgf, &z, &g, weight).map_err(|e| e.at(k))?;
                    let (y_next, _) = self.kernel.step(obj, &x).map_err(|e| e.at(k))?;
                    (y_next, z_next, g)
                }
                NesterovVariant::GradAtY => {
                    let (y_next, _) = self.kernel.step(obj, &x).map_err(|e| e.at(k))?;
                    let g = obj.gradient(&y_next);
                    let z_next = mirror_step(dgf, &z, &g, weight).map_err(|e| e.at(k))?;
                    (y_next, z_next, obj.peek_gradient(&x))
                }
            };
            let f_x = obj.peek_value(&x);
            let kernel_margin = obj.peek_value(&y_next) - f_x + kernel_delta * geom.dual_norm(&gx).powf(q);
            let step_norm = geom.primal_norm(&(&y_next - &y));
            y = y_next;
            z = z_next;
            let mut certs = BTreeMap::from([
                ("A".to_string(), s.a_next),
                ("alpha".to_string(), s.alpha),
                ("tau".to_string(), s.tau),
                ("kernel_margin".to_string(), kernel_margin),
                ("kernel_base".to_string(), f_x),
            ]);
            let rec = trace.push(obj, geom, y.clone(), k + 1, base, BTreeMap::new())?;
            rec.step_norm = step_norm;
            rec.z = Some(z.clone());
            if let Some(e) = lyap(s.a_next, rec.f_gap, &z) {
                certs.insert("lyapunov".into(), e);
            }
            rec.certificates = certs;
        }
        Ok(trace)
    }
}

/// The coupling needs a dgf that is uniformly convex of the schedule's order.
pub(crate) fn check_coupling_dgf(dgf: &Dgf, p: f64) -> Result<()> {
    match dgf.kind() {
        DgfKind::Quadratic if p > 2.0 => Err(Error::Config(format!(
            "order {p} acceleration needs an order-{p} power dgf"
        ))),
        DgfKind::PowerP { p: q, .. } if *q != p => Err(Error::Config(format!(
            "dgf order {q} does not match acceleration order {p}"
        ))),
        _ => Ok(()),
    }
}

/// Checks the recorded kernel condition `f(y_{k+1}) - f(x_k) ≤ -δ_0‖∇f(x_k)‖_*^{p/(p-1)}`
/// with slack `1e-9 (1 + |f(x_k)|)`, returning the worst margin and whether it held.
pub fn certify_kernel_margins(trace: &Trace) -> (f64, bool) {
    let mut worst = f64::NEG_INFINITY;
    let mut holds = true;
    for r in trace.records.iter().skip(1) {
        if let (Some(m), Some(b)) = (r.certificates.get("kernel_margin"), r.certificates.get("kernel_base")) {
            worst = worst.max(*m);
            if !(*m <= 1e-9 * (1.0 + b.abs())) {
                holds = false;
            }
        }
    }
    (worst, holds)
}

/// Runs the Nesterov-coupled kernel; `dgf` must be uniformly convex of the kernel's order.
pub fn nesterov_accelerate(
    kernel: &DescentConfig,
    obj: &Objective,
    dgf: &Dgf,
    x0: &Vector,
    k_max: usize,
    variant: NesterovVariant,
) -> Result<Trace> {
    Nesterov::new(kernel.clone(), variant).run(obj, dgf, x0, k_max)
}

/// Lyapunov values along an accelerated trace.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovReport {
    pub values: Vec<f64>,
    /// Largest `E_{k+1} - E_k`.
    pub worst_increase: f64,
    /// `E_{k+1} ≤ E_k + 1e-9 (1 + E_0)` everywhere.
    pub monotone: bool,
}

/// `E_k = A_k (f(y_k) - f*) + D_h(x*, z_k)` from the recorded `A_k` and `z_k`.
pub fn lyapunov_track(trace: &Trace, dgf: &Dgf, x_star: &Vector) -> Result<LyapunovReport> {
    if trace.f_star.is_none() {
        return Err(Error::arg("trace has no reference minimum"));
    }
    let mut values = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        let z = r
            .z
            .as_ref()
            .ok_or_else(|| Error::arg(format!("record {} has no mirror iterate", r.k)))?;
        let a = *r
            .certificates
            .get("A")
            .ok_or_else(|| Error::arg(format!("record {} has no schedule weight", r.k)))?;
        values.push(a * r.f_gap + dgf.divergence(x_star, z));
    }
    let slack = 1e-9 * (1.0 + values.first().copied().unwrap_or(0.0));
    let worst_increase = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovReport {
        monotone: values.windows(2).all(|w| w[1] <= w[0] + slack),
        worst_increase,
        values,
    })
}
