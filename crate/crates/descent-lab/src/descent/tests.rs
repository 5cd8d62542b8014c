use super::*;
use crate::objectives::{make_power_norm_loss, make_quadratic_loss};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn power(p: f64, d: usize) -> Objective {
    make_power_norm_loss(p, Geometry::identity(d)).unwrap()
}

fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
    (a - b).amax() <= tol
}

/// Root of `z + z³ = 1` by bisection.
fn cubic_root() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + mid.powi(3) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

#[test]
fn gd_examples() {
    let f = power(2.0, 2);
    let g = Geometry::identity(2);
    assert!(close(&gd_step(&f, &g, &v(&[1.0, 1.0]), 0.5).unwrap(), &v(&[0.5, 0.5]), 1e-15));
    assert_eq!(gd_step(&f, &g, &v(&[0.0, 0.0]), 0.5).unwrap(), v(&[0.0, 0.0]));
    let q = power(4.0, 1);
    let y = gd_step(&q, &Geometry::identity(1), &v(&[1.0]), 0.1).unwrap();
    assert!((y[0] - 0.9).abs() < 1e-15);
    assert_eq!(f.counts().gradients, 2);
}

#[test]
fn rgd_examples() {
    let g1 = Geometry::identity(1);
    let q = power(4.0, 1);
    let y = rgd_step(&q, &g1, &v(&[1.0]), 0.125, Order::Finite(4.0)).unwrap();
    assert!((y[0] - 0.5).abs() < 1e-15);

    let f = power(2.0, 2);
    let g = Geometry::identity(2);
    let y = rgd_step(&f, &g, &v(&[1.0, 1.0]), 0.5, Order::Finite(2.0)).unwrap();
    assert!(close(&y, &v(&[0.5, 0.5]), 1e-15));
    let y = rgd_step(&f, &g, &v(&[3.0, 4.0]), 5.0, Order::Infinite).unwrap();
    assert!(close(&y, &v(&[0.0, 0.0]), 1e-14));
    assert_eq!(rgd_step(&f, &g, &v(&[0.0, 0.0]), 5.0, Order::Infinite).unwrap(), v(&[0.0, 0.0]));
}

#[test]
fn mirror_examples() {
    let f = power(2.0, 2);
    let h = Dgf::quadratic(Geometry::identity(2));
    let y = mirror_descent_step(&f, &h, &v(&[1.0, 1.0]), 0.5).unwrap();
    assert!(close(&y, &v(&[0.5, 0.5]), 1e-15));

    // ∇h(x) = 4x³ for the order-4 dgf, so ∇h(1) - η∇f(1) = 4 - 4·1 = 0.
    let quartic = power(4.0, 1);
    let h4 = Dgf::power_p(4.0, v(&[0.0]), Geometry::identity(1)).unwrap();
    let y = mirror_descent_step(&quartic, &h4, &v(&[1.0]), 4.0).unwrap();
    assert!(y[0].abs() < 1e-15);
    let y = mirror_step(&h4, &v(&[1.0]), &v(&[4.0]), 1.0).unwrap();
    assert!(y[0].abs() < 1e-15);
    assert_eq!(mirror_descent_step(&f, &h, &v(&[0.0, 0.0]), 0.5).unwrap(), v(&[0.0, 0.0]));
}

#[test]
fn natural_gd_examples() {
    let f = make_quadratic_loss(Matrix::from_diagonal(&v(&[2.0, 1.0])), v(&[0.0, 0.0])).unwrap();
    let h = Dgf::quadratic(Geometry::diagonal(&[2.0, 1.0]).unwrap());
    // ∇f(1,1) = (2,1); diag(2,1)⁻¹(2,1) = (1,1).
    let y = natural_gd_step(&f, &h, &v(&[1.0, 1.0]), 1.0).unwrap();
    assert!(close(&y, &v(&[0.0, 0.0]), 1e-15));

    let q = power(2.0, 2);
    let hi = Dgf::quadratic(Geometry::identity(2));
    let a = natural_gd_step(&q, &hi, &v(&[0.3, -1.0]), 0.4).unwrap();
    let b = gd_step(&q, &Geometry::identity(2), &v(&[0.3, -1.0]), 0.4).unwrap();
    assert!(close(&a, &b, 1e-15));

    let hp = Dgf::power_p(4.0, v(&[0.0, 0.0]), Geometry::identity(2)).unwrap();
    assert!(matches!(natural_gd_step(&q, &hp, &v(&[0.0, 0.0]), 1.0), Err(Error::Degenerate(_))));
}

#[test]
fn natural_prox_examples() {
    let f = power(2.0, 2);
    let h = Dgf::quadratic(Geometry::identity(2));
    let y = natural_prox_step(&f, &h, &v(&[2.0, 0.0]), 1.0, 2.0).unwrap();
    assert!(close(&y, &v(&[1.0, 0.0]), 1e-10));
    let y = natural_prox_step(&f, &h, &v(&[0.0, 0.0]), 1.0, 2.0).unwrap();
    assert_eq!(y, v(&[0.0, 0.0]));

    let q = power(4.0, 1);
    let h1 = Dgf::quadratic(Geometry::identity(1));
    let y = natural_prox_step(&q, &h1, &v(&[1.0]), 1.0, 2.0).unwrap();
    assert!((y[0] - cubic_root()).abs() < 1e-8);
}

#[test]
fn natural_prox_optimality_identity() {
    let q = power(4.0, 3);
    let h = Dgf::quadratic(Geometry::diagonal(&[1.0, 2.0, 0.5]).unwrap());
    let x = v(&[1.0, -0.5, 2.0]);
    for &(p, eta) in &[(3.0, 0.7), (4.0, 0.2), (2.0, 1.5)] {
        let y = natural_prox_step(&q, &h, &x, eta, p).unwrap();
        let lhs = h.geometry().primal_norm(&(&y - &x));
        let rhs = eta.powf(1.0 / (p - 1.0)) * h.geometry().dual_norm(&q.peek_gradient(&y)).powf(1.0 / (p - 1.0));
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.max(1e-300), "p={p}: {lhs} vs {rhs}");
    }
}

#[test]
fn bregman_prox_examples() {
    let f = power(2.0, 2);
    let h = Dgf::quadratic(Geometry::identity(2));
    let y = bregman_prox_step(&f, &h, &v(&[2.0, 0.0]), 1.0).unwrap();
    assert!(close(&y, &v(&[1.0, 0.0]), 1e-10));
    assert_eq!(bregman_prox_step(&f, &h, &v(&[0.0, 0.0]), 1.0).unwrap(), v(&[0.0, 0.0]));

    let q = power(4.0, 1);
    let h1 = Dgf::quadratic(Geometry::identity(1));
    let y = bregman_prox_step(&q, &h1, &v(&[1.0]), 1.0).unwrap();
    assert!((y[0] - cubic_root()).abs() < 1e-8);
}

#[test]
fn bregman_prox_optimality_identity() {
    let q = power(4.0, 2);
    let h = Dgf::power_p(3.0, v(&[0.2, 0.1]), Geometry::identity(2)).unwrap();
    let x = v(&[1.0, -1.0]);
    let eta = 0.5;
    let y = bregman_prox_step(&q, &h, &x, eta).unwrap();
    let lhs = q.peek_gradient(&y) * eta;
    let rhs = h.gradient(&x) - h.gradient(&y);
    assert!((&lhs - &rhs).amax() <= 1e-8 * lhs.amax().max(1.0));
}

#[test]
fn tensor_examples() {
    let g1 = Geometry::identity(1);
    let f = power(2.0, 1);
    // Linear model plus ½(y-x)²: y = x - η∇f(x).
    let y = tensor_step(&f, &g1, &v(&[1.0]), 1.0, 2, 1.0).unwrap();
    assert!(y[0].abs() < 1e-15);
    assert_eq!(tensor_step(&f, &g1, &v(&[0.0]), 1.0, 3, 1.0).unwrap(), v(&[0.0]));

    // p = 3, ν = 1 on x⁴/4 at x = 1: s + 3s² + s|s| = -1 ... solved for s ∈ (-1, 0).
    let q = power(4.0, 1);
    let t = tensor_step_detailed(&q, &g1, &v(&[1.0]), 1.0, 3, 1.0).unwrap();
    let model = |s: f64| 1.0 + 3.0 * s + s * s.abs();
    let grid_best = (0..=20000)
        .map(|i| -1.0 + i as f64 * 1e-4)
        .min_by(|a, b| {
            let m = |s: f64| s + 1.5 * s * s + s.abs().powi(3) / 3.0;
            m(*a).partial_cmp(&m(*b)).unwrap()
        })
        .unwrap();
    let (mut lo, mut hi) = (grid_best - 1e-4, grid_best + 1e-4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((t.y[0] - 1.0 - lo).abs() < 1e-8, "{} vs {}", t.y[0] - 1.0, lo);
    assert!(t.residual <= 1e-10);
    assert!((t.model_gradient_norm - t.regularizer_norm).abs() < 1e-9);
    assert!(matches!(
        tensor_step(&q, &g1, &v(&[1.0]), 1.0, 4, 1.0),
        Err(Error::Capability(_))
    ));
}

#[test]
fn tensor_step_stationarity_in_several_dimensions() {
    let q = power(4.0, 3);
    let g = Geometry::diagonal(&[1.0, 3.0, 0.5]).unwrap();
    for nu in [0.3, 0.7, 1.0] {
        let x = v(&[0.4, -1.2, 2.0]);
        let t = tensor_step_detailed(&q, &g, &x, 0.8, 3, nu).unwrap();
        assert!(t.residual <= 1e-10 * (1.0 + g.dual_norm(&q.peek_gradient(&x))));
        assert!((t.model_gradient_norm - t.regularizer_norm).abs() <= 1e-8 * t.regularizer_norm);
    }
}

#[test]
fn run_descent_records_and_exact_rgd_rate() {
    let q = power(4.0, 1);
    let cfg = DescentConfig::new(Method::Rgd(Order::Finite(4.0)), 0.001, Geometry::identity(1));
    let t = run_descent(&cfg, &q, &v(&[1.0]), 0).unwrap();
    assert_eq!(t.records.len(), 1);
    let t = run_descent(&cfg, &q, &v(&[1.0]), 3).unwrap();
    for r in &t.records {
        let want = 0.9f64.powi(4 * r.k as i32) / 4.0;
        assert!((r.f_gap - want).abs() <= 1e-14 * want);
        assert_eq!(r.grad_evals, r.k as u64);
    }
    let report = certify_delta_descent(&t, cfg.delta(), cfg.order(), cfg.mode).unwrap();
    assert!(report.holds);
    assert!(t.to_csv().unwrap().starts_with(CSV_HEADER));
    assert_eq!(t.to_csv().unwrap().lines().count(), 5);
}

#[test]
fn certifier_flags_divergent_gd() {
    let f = make_quadratic_loss(Matrix::from_diagonal(&v(&[100.0, 1.0])), v(&[0.0, 0.0])).unwrap();
    let cfg = DescentConfig::new(Method::Gd, 10.0 / 100.0, Geometry::identity(2));
    let t = run_descent(&cfg, &f, &v(&[1.0, 1.0]), 5).unwrap();
    assert!(t.records[1].f_value > t.records[0].f_value);
    let rep = certify_delta_descent(&t, cfg.delta(), cfg.order(), cfg.mode).unwrap();
    assert!(!rep.holds);
    assert_eq!(rep.first_violation_k, Some(0));
    assert!(rep.worst_margin > 0.0);

    let at_min = run_descent(&cfg, &f, &v(&[0.0, 0.0]), 5).unwrap();
    assert!(certify_delta_descent(&at_min, cfg.delta(), cfg.order(), cfg.mode).unwrap().holds);
}

#[test]
fn delta_formulas() {
    let g = Geometry::identity(1);
    let eta = 0.3;
    let c = |m| DescentConfig::new(m, eta, g.clone()).delta();
    assert_eq!(c(Method::Gd), 0.15);
    assert!((c(Method::Rgd(Order::Finite(3.0))) - eta.sqrt() / 2.0).abs() < 1e-15);
    assert_eq!(c(Method::Rgd(Order::Infinite)), 0.15);
    assert!((c(Method::NaturalProx(3.0)) - eta.sqrt() / 3.0).abs() < 1e-15);
    assert_eq!(c(Method::MirrorDescent), 0.15);
    assert_eq!(c(Method::BregmanProx), 0.15);
    let t = c(Method::UniversalTensor { p: 3, nu: 1.0 });
    assert!((t - eta.sqrt() / 2f64.powf(1.5)).abs() < 1e-15);
}

#[test]
fn prox_methods_decrease_monotonically() {
    let q = power(4.0, 2);
    let h = Dgf::quadratic(Geometry::identity(2));
    for m in [Method::NaturalProx(4.0), Method::BregmanProx, Method::UniversalTensor { p: 3, nu: 1.0 }] {
        let cfg = DescentConfig::new(m, 0.5, Geometry::identity(2)).with_dgf(h.clone());
        let t = run_descent(&cfg, &q, &v(&[1.0, -2.0]), 30).unwrap();
        for w in t.records.windows(2) {
            assert!(w[1].f_value <= w[0].f_value, "{}", m.tag());
        }
        let rep = certify_delta_descent(&t, cfg.delta(), cfg.order(), cfg.mode).unwrap();
        assert!(rep.holds, "{} margin {}", m.tag(), rep.worst_margin);
    }
}

#[test]
fn reference_solution_matches_known_minimizer() {
    let f = make_quadratic_loss(Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]), v(&[1.0, -1.0])).unwrap();
    let (x, fx) = reference_solution(&f, &v(&[5.0, 5.0])).unwrap();
    assert!(close(&x, f.known_minimizer().unwrap(), 1e-12));
    assert!(fx.abs() < 1e-14);
}
