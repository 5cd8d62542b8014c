//! Damped Newton with halving backtracking for the smooth convex inner problems.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Matrix, Vector};

pub(crate) const MAX_ITERS: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Inner problem: a merit function with gradient and Hessian.
pub(crate) trait NewtonProblem {
    fn merit(&self, y: &Vector) -> f64;
    fn gradient(&self, y: &Vector) -> Vector;
    fn hessian(&self, y: &Vector) -> Matrix;
}

pub(crate) struct Solution {
    pub y: Vector,
    pub residual: f64,
}

/// Solves `(H + τI) d = -g`, raising `τ` until the factorization succeeds.
fn newton_direction(h: &Matrix, g: &Vector) -> Vector {
    if let Some(ch) = Cholesky::new(h.clone()) {
        let d = ch.solve(&(-g));
        if d.iter().all(|v| v.is_finite()) {
            return d;
        }
    }
    let scale = h.amax().max(1e-300);
    let mut tau = scale * 1e-12;
    let n = h.nrows();
    for _ in 0..40 {
        let shifted = h + Matrix::identity(n, n) * tau;
        if let Some(ch) = Cholesky::new(shifted) {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        tau *= 10.0;
    }
    -g.clone()
}

/// Stopping rule on the dual norm of the merit gradient; `r0` is its initial value.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Tol {
    Absolute(f64),
    /// Aims for `c min(1, r0)` but accepts `c (1 + r0)` once progress stalls.
    Scaled(f64),
}

impl Tol {
    /// `(target, acceptable)`.
    fn resolve(self, r0: f64) -> (f64, f64) {
        match self {
            Tol::Absolute(t) => (t, t),
            Tol::Scaled(c) => (c * r0.min(1.0), c * (1.0 + r0)),
        }
    }
}

/// Runs damped Newton from `y0` until the stopping rule holds.
pub(crate) fn damped_newton<P: NewtonProblem>(
    problem: &P,
    y0: Vector,
    geom: &Geometry,
    tol: Tol,
    max_iters: usize,
    context: &str,
) -> Result<Solution> {
    let (sol, iterations, ok) = newton_best(problem, y0, geom, tol, max_iters);
    if ok {
        Ok(sol)
    } else {
        Err(Error::Subsolver {
            context: context.to_string(),
            residual: sol.residual,
            iterations,
        })
    }
}

/// Damped Newton returning the last iterate, the iteration count and whether it converged.
pub(crate) fn newton_best<P: NewtonProblem>(
    problem: &P,
    y0: Vector,
    geom: &Geometry,
    tol: Tol,
    max_iters: usize,
) -> (Solution, usize, bool) {
    let mut y = y0;
    let mut g = problem.gradient(&y);
    let mut res = geom.dual_norm(&g);
    let (tol, acceptable) = tol.resolve(res);
    let mut phi = problem.merit(&y);
    for it in 0..max_iters {
        if res <= tol {
            return (Solution { y, residual: res }, it, true);
        }
        let h = problem.hessian(&y);
        let d = newton_direction(&h, &g);
        let d = if g.dot(&d) < 0.0 { d } else { -geom.solve(&g) };
        let slope = g.dot(&d);
        // Once the predicted decrease is below the rounding level of the merit,
        // steps are judged by the residual instead.
        let rounding = -slope <= 1e-13 * (1.0 + phi.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &y + &d * t;
            let phi_c = problem.merit(&cand);
            let ok = if rounding {
                geom.dual_norm(&problem.gradient(&cand)) < res
            } else {
                phi_c.is_finite() && phi_c <= phi + ARMIJO * t * slope
            };
            if ok {
                accepted = Some((cand, phi_c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, phi_c)) = accepted else {
            return (Solution { y, residual: res }, it, res <= acceptable);
        };
        y = cand;
        phi = phi_c;
        g = problem.gradient(&y);
        res = geom.dual_norm(&g);
    }
    let ok = res <= acceptable;
    (Solution { y, residual: res }, max_iters, ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quartic;

    impl NewtonProblem for Quartic {
        fn merit(&self, y: &Vector) -> f64 {
            y.iter().map(|v| v.powi(4) / 4.0 + 0.5 * (v - 1.0).powi(2)).sum()
        }
        fn gradient(&self, y: &Vector) -> Vector {
            y.map(|v| v.powi(3) + v - 1.0)
        }
        fn hessian(&self, y: &Vector) -> Matrix {
            Matrix::from_diagonal(&y.map(|v| 3.0 * v * v + 1.0))
        }
    }

    #[test]
    fn solves_cubic_root() {
        let geom = Geometry::identity(2);
        let s = damped_newton(&Quartic, Vector::from_element(2, 5.0), &geom, Tol::Absolute(1e-12), MAX_ITERS, "test").unwrap();
        // Oracle: bisection on z + z³ = 1.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.powi(3) > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((s.y[0] - lo).abs() < 1e-12);
        assert!(s.residual <= 1e-12);
    }
}
