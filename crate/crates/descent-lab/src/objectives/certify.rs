//! Finite-difference oracles and sampled certification of smoothness conditions.

use super::{GaussianSampler, Objective, SmoothnessForm, MAX_ORDER};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Vector;
use crate::order::Order;

/// Central-difference estimate of `∇^m f(x)(v)^m`, `m ∈ {1,…,4}`, with `O(h²)` error.
pub fn fd_directional_derivative(obj: &Objective, x: &Vector, m: usize, v: &Vector) -> Result<f64> {
    check_dim("finite difference point", x.len(), obj.dim())?;
    check_dim("finite difference direction", v.len(), obj.dim())?;
    let base = match m {
        1 => 1e-5,
        2 => 1e-4,
        3 => 1e-3,
        4 => 1e-2,
        _ => {
            return Err(Error::arg(format!(
                "finite differences support orders 1..=4, got {m}"
            )))
        }
    };
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(0.0);
    }
    let h = base * x.norm().max(1.0) / vn;
    let g = |t: f64| obj.peek_value(&(x + v * t));
    Ok(match m {
        1 => (g(h) - g(-h)) / (2.0 * h),
        2 => (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h),
        3 => (g(2.0 * h) - 2.0 * g(h) + 2.0 * g(-h) - g(-2.0 * h)) / (2.0 * h.powi(3)),
        _ => (g(2.0 * h) - 4.0 * g(h) + 6.0 * g(0.0) - 4.0 * g(-h) + g(-2.0 * h)) / h.powi(4),
    })
}

/// Gaussian points scaled in turn by radii 0.1, 1 and 10.
pub fn sample_points(dim: usize, count: usize, seed: u64) -> Vec<Vector> {
    const RADII: [f64; 3] = [0.1, 1.0, 10.0];
    let mut g = GaussianSampler::new(seed);
    (0..count).map(|i| g.vector(dim) * RADII[i % 3]).collect()
}

/// Lower estimate of `‖∇^m f(x)‖ = max_{‖u‖=1} |∇^m f(x)(u)^m|` over candidate
/// directions: the gradient, the coordinate axes, design rows and random draws.
pub fn tensor_norm_estimate(obj: &Objective, x: &Vector, m: usize, seed: u64) -> Result<f64> {
    let geom = obj.geometry();
    let d = obj.dim();
    let mut dirs: Vec<Vector> = Vec::new();
    dirs.push(geom.solve(&obj.peek_gradient(x)));
    for i in 0..d {
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        dirs.push(e);
    }
    dirs.extend(obj.ridge_rows().into_iter().map(|r| geom.solve(&r)));
    let mut g = GaussianSampler::new(seed);
    for _ in 0..32 {
        dirs.push(g.vector(d));
    }
    let mut best: f64 = 0.0;
    for u in dirs {
        let n = geom.primal_norm(&u);
        if n == 0.0 || !n.is_finite() {
            continue;
        }
        let u = u / n;
        best = best.max(obj.directional_derivative(x, m, &u)?.abs());
    }
    Ok(best)
}

/// Outcome of a sampled certification.
#[derive(Clone, Debug)]
pub struct SmoothnessReport {
    pub max_violation_ratio: f64,
    pub worst_point: Option<Vector>,
    pub worst_order: usize,
    pub checked: usize,
    pub skipped: usize,
    pub certified: bool,
}

const RATIO_SLACK: f64 = 1e-9;
const GRAD_SKIP: f64 = 1e-13;

/// Checks the strong smoothness bound for `m = 1..p-1` at every point, plus the
/// `m = p` tensor bound on sampled unit directions when `L_p` is supplied.
pub fn certify_strong_smoothness(
    obj: &Objective,
    p: Order,
    constants: &[f64],
    points: &[Vector],
    form: SmoothnessForm,
) -> Result<SmoothnessReport> {
    let (below_p, top) = match p {
        Order::Finite(pf) => {
            let pi = pf.round() as usize;
            (pi.saturating_sub(1), Some(pi))
        }
        Order::Infinite => (constants.len(), None),
    };
    let upto = below_p.min(constants.len());
    if upto > MAX_ORDER {
        return Err(Error::Capability(format!(
            "{}: certification needs derivatives of order {upto}",
            obj.id()
        )));
    }
    let geom = obj.geometry();
    let mut report = SmoothnessReport {
        max_violation_ratio: 0.0,
        worst_point: None,
        worst_order: 0,
        checked: 0,
        skipped: 0,
        certified: true,
    };
    let mut sampler = GaussianSampler::new(0x5eed);
    for (idx, x) in points.iter().enumerate() {
        check_dim("certification point", x.len(), obj.dim())?;
        let g = obj.peek_gradient(x);
        let gn = geom.dual_norm(&g);
        if gn <= GRAD_SKIP {
            report.skipped += 1;
        } else {
            let dir = geom.solve(&g);
            for m in 1..=upto {
                let lm = constants[m - 1];
                let ratio = match form {
                    SmoothnessForm::AlongGradient => {
                        let lhs = obj.directional_derivative(x, m, &dir)?.abs();
                        lhs / (lm * gn.powf(p.smoothness_exponent(m)))
                    }
                    SmoothnessForm::OperatorNorm => {
                        let lhs = if m == 1 {
                            gn
                        } else {
                            tensor_norm_estimate(obj, x, m, idx as u64)?
                        };
                        lhs / (lm * gn.powf(p.operator_exponent(m).max(0.0)))
                    }
                };
                report.checked += 1;
                if ratio > report.max_violation_ratio {
                    report.max_violation_ratio = ratio;
                    report.worst_point = Some(x.clone());
                    report.worst_order = m;
                }
            }
        }
        if let Some(pi) = top {
            if pi >= 2 && pi <= MAX_ORDER && constants.len() >= pi {
                let lp = constants[pi - 1];
                for _ in 0..4 {
                    let u = sampler.vector(obj.dim());
                    let u = &u / geom.primal_norm(&u);
                    let ratio = obj.directional_derivative(x, pi, &u)?.abs() / lp;
                    report.checked += 1;
                    if ratio > report.max_violation_ratio {
                        report.max_violation_ratio = ratio;
                        report.worst_point = Some(x.clone());
                        report.worst_order = pi;
                    }
                }
            }
        }
    }
    report.certified = report.max_violation_ratio <= 1.0 + RATIO_SLACK;
    Ok(report)
}

/// `C_m = 4 (Σ_{i=2}^p L_i/i!) L_m^{p/(p-m)}` for `m = 1..p-1`.
///
/// At `p = ∞` the sum runs over the supplied constants and the exponent is 1.
pub fn derive_lower_bound_constants(p: Order, constants: &[f64]) -> Vec<f64> {
    let limit = match p {
        Order::Finite(pf) => (pf.round() as usize).min(constants.len()),
        Order::Infinite => constants.len(),
    };
    let mut fact = 1.0;
    let mut sum = 0.0;
    for (i, l) in constants.iter().enumerate().take(limit) {
        let m = i + 1;
        fact *= m as f64;
        if m >= 2 {
            sum += l / fact;
        }
    }
    let count = match p {
        Order::Finite(pf) => (pf.round() as usize).saturating_sub(1).min(constants.len()),
        Order::Infinite => constants.len(),
    };
    (1..=count)
        .map(|m| {
            let e = match p {
                Order::Finite(pf) => pf / (pf - m as f64),
                Order::Infinite => 1.0,
            };
            4.0 * sum * constants[m - 1].powf(e)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LowerBoundReport {
    pub max_violation_ratio: f64,
    pub worst_point: Option<Vector>,
    pub worst_order: usize,
    pub checked: usize,
    pub certified: bool,
}

/// Checks `f(x) - f* ≥ (1/C_m) ‖∇^m f(x)‖^{p/(p-m)}` at every point.
pub fn certify_gradient_lower_bound(
    obj: &Objective,
    p: Order,
    constants: &[f64],
    points: &[Vector],
) -> Result<LowerBoundReport> {
    let fstar = obj.known_minimum().ok_or_else(|| {
        Error::Capability(format!("{}: gradient lower bound needs a known minimum", obj.id()))
    })?;
    if constants.len() > MAX_ORDER {
        return Err(Error::Capability(format!(
            "{}: derivatives above order {MAX_ORDER} are not available",
            obj.id()
        )));
    }
    let geom = obj.geometry();
    let mut report = LowerBoundReport {
        max_violation_ratio: 0.0,
        worst_point: None,
        worst_order: 0,
        checked: 0,
        certified: true,
    };
    for (idx, x) in points.iter().enumerate() {
        check_dim("certification point", x.len(), obj.dim())?;
        let gap = (obj.peek_value(x) - fstar).max(0.0);
        for (i, c) in constants.iter().enumerate() {
            let m = i + 1;
            let norm = if m == 1 {
                geom.dual_norm(&obj.peek_gradient(x))
            } else {
                tensor_norm_estimate(obj, x, m, idx as u64)?
            };
            let e = match p {
                Order::Finite(pf) => pf / (pf - m as f64),
                Order::Infinite => 1.0,
            };
            let rhs = norm.powf(e) / c;
            report.checked += 1;
            let ratio = if rhs == 0.0 {
                0.0
            } else if gap == 0.0 {
                f64::INFINITY
            } else {
                rhs / gap
            };
            if ratio > report.max_violation_ratio {
                report.max_violation_ratio = ratio;
                report.worst_point = Some(x.clone());
                report.worst_order = m;
            }
        }
    }
    report.certified = report.max_violation_ratio <= 1.0 + RATIO_SLACK;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn fd_examples() {
        let q = make_power_norm_loss(2.0, Geometry::identity(2)).unwrap();
        let d2 = fd_directional_derivative(&q, &v(&[0.4, -2.0]), 2, &v(&[1.0, 0.0])).unwrap();
        assert!((d2 - 1.0).abs() < 1e-6);
        let f = make_power_norm_loss(4.0, Geometry::identity(1)).unwrap();
        let d3 = fd_directional_derivative(&f, &v(&[1.0]), 3, &v(&[1.0])).unwrap();
        assert!((d3 - 6.0).abs() < 1e-3);
        let l = make_logistic_loss(&Dataset::single(&[1.0], 1.0)).unwrap();
        let d1 = fd_directional_derivative(&l, &v(&[0.0]), 1, &v(&[1.0])).unwrap();
        assert!((d1 - l.peek_gradient(&v(&[0.0]))[0]).abs() < 1e-6);
        assert!(fd_directional_derivative(&l, &v(&[0.0]), 5, &v(&[1.0])).is_err());
        assert!(fd_directional_derivative(&l, &v(&[0.0]), 0, &v(&[1.0])).is_err());
    }

    #[test]
    fn quadratic_ratio_is_exactly_one() {
        let q = make_power_norm_loss(2.0, Geometry::identity(3)).unwrap();
        let pts = sample_points(3, 30, 1);
        let r = certify_strong_smoothness(
            &q,
            Order::Finite(2.0),
            &[1.0, 1.0],
            &pts,
            SmoothnessForm::AlongGradient,
        )
        .unwrap();
        assert!(r.certified);
        assert!((r.max_violation_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_points_are_skipped() {
        let f = make_power_norm_loss(4.0, Geometry::identity(2)).unwrap();
        let r = certify_strong_smoothness(
            &f,
            Order::Finite(4.0),
            &[1.0, 3.0, 6.0],
            &[Vector::zeros(2)],
            SmoothnessForm::AlongGradient,
        )
        .unwrap();
        assert_eq!(r.skipped, 1);
        assert!(r.certified);
    }

    #[test]
    fn undersized_constants_fail() {
        let f = make_power_norm_loss(4.0, Geometry::identity(2)).unwrap();
        let pts = sample_points(2, 30, 2);
        let r = certify_strong_smoothness(
            &f,
            Order::Finite(4.0),
            &[1.0, 1.0, 6.0],
            &pts,
            SmoothnessForm::AlongGradient,
        )
        .unwrap();
        assert!(!r.certified);
        assert_eq!(r.worst_order, 2);
    }

    #[test]
    fn radial_lower_bound_with_c1_equal_p() {
        let f = make_power_norm_loss(4.0, Geometry::identity(3)).unwrap();
        let mut pts = sample_points(3, 60, 3);
        pts.push(Vector::zeros(3));
        let r = certify_gradient_lower_bound(&f, Order::Finite(4.0), &[4.0], &pts).unwrap();
        assert!(r.certified, "ratio {}", r.max_violation_ratio);
        assert!((r.max_violation_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_needs_minimum() {
        let f = make_logistic_loss(&Dataset::gaussian(1, 12, 3)).unwrap();
        assert!(f.known_minimum().is_none());
        assert!(matches!(
            certify_gradient_lower_bound(&f, Order::Infinite, &[1.0], &[Vector::zeros(3)]),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn lemma_constants() {
        let c = derive_lower_bound_constants(Order::Finite(4.0), &[1.0, 3.0, 6.0, 6.0]);
        let s = 3.0 / 2.0 + 6.0 / 6.0 + 6.0 / 24.0;
        assert_eq!(c.len(), 3);
        assert!((c[0] - 4.0 * s).abs() < 1e-12);
        assert!((c[1] - 4.0 * s * 3f64.powi(2)).abs() < 1e-9);
        assert!((c[2] - 4.0 * s * 6f64.powi(4)).abs() < 1e-6);
    }
}
