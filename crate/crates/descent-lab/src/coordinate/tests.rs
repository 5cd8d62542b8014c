use super::*;
use crate::accel::{Nesterov, NesterovVariant};
use crate::descent::{run_descent, DescentConfig, Method};
use crate::objectives::{make_lp_regression_loss, make_power_norm_loss, Dataset};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// `(1/4) Σ x_i⁴`.
fn separable_quartic(d: usize) -> Objective {
    let rows = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    make_lp_regression_loss(&Dataset::from_rows(rows, vec![0.0; d]).unwrap(), 4.0).unwrap()
}

/// Each coordinate of the separable quartic is the one-dimensional `x⁴/4`.
fn quartic_config(d: usize, seed: u64) -> CoordinateConfig {
    CoordinateConfig::admissible(vec![vec![1.0, 3.0, 6.0, 6.0]; d], Order::Finite(4.0), seed).unwrap()
}

#[test]
fn rcd_step_examples() {
    let f = make_power_norm_loss(2.0, Geometry::identity(2)).unwrap();
    assert_eq!(rcd_step(&f, &v(&[1.0, 1.0]), 0, 0.5, Order::Finite(2.0)).unwrap(), v(&[0.5, 1.0]));
    let f = separable_quartic(2);
    let y = rcd_step(&f, &v(&[1.0, 2.0]), 0, 0.125, Order::Finite(4.0)).unwrap();
    assert!((y[0] - 0.5).abs() < 1e-15);
    assert_eq!(y[1], 2.0);
    let x = v(&[0.0, 2.0]);
    assert_eq!(rcd_step(&f, &x, 0, 0.125, Order::Finite(4.0)).unwrap(), x);
    assert!(matches!(
        rcd_step(&f, &x, 2, 0.125, Order::Finite(4.0)),
        Err(Error::Argument(_))
    ));
}

#[test]
fn config_delta_and_bounds() {
    let c = quartic_config(3, 0);
    assert!((c.delta() - 1.0 / 11.0).abs() < 1e-15);
    c.validate(3).unwrap();
    let mut bad = c.clone();
    bad.etas[1] *= 1.01;
    assert!(matches!(bad.validate(3), Err(Error::Config(_))));
    let b = CoordinateConfig::broadcast(0.008, 2, Order::Finite(4.0), 1);
    assert!((b.delta() - 0.1).abs() < 1e-15);
    assert!(b.validate(3).is_err());
}

#[test]
fn zero_iterations_give_one_record() {
    let f = separable_quartic(3);
    let t = run_rcd(&f, &quartic_config(3, 0), &v(&[1.0, 2.0, 3.0]), 0, 5).unwrap();
    assert_eq!(t.records.len(), 1);
    let h = Dgf::power_p(4.0, v(&[1.0, 2.0, 3.0]), Geometry::identity(3)).unwrap();
    let t = accel_rcd(&f, &h, &quartic_config(3, 0), &v(&[1.0, 2.0, 3.0]), 0, 5).unwrap();
    assert_eq!(t.records.len(), 1);
}

#[test]
fn per_step_descent_certificate_holds() {
    let f = separable_quartic(4);
    for seed in 0..4 {
        let c = quartic_config(4, seed);
        let t = run_rcd(&f, &c, &v(&[1.0, -2.0, 0.5, 3.0]), 2000, seed).unwrap();
        let rep = certify_coordinate_descent(&t, c.delta(), c.order).unwrap();
        assert!(rep.holds, "seed {seed}: worst {}", rep.worst_margin);
        assert_eq!(t.last().grad_evals, t.last().k as u64);
    }
}

#[test]
fn one_dimensional_rcd_is_rgd() {
    let f = separable_quartic(1);
    let c = quartic_config(1, 3);
    let a = run_rcd(&f, &c, &v(&[2.0]), 100, 3).unwrap();
    let kernel = DescentConfig::new(Method::Rgd(Order::Finite(4.0)), c.etas[0], Geometry::identity(1));
    let b = run_descent(&kernel, &f, &v(&[2.0]), 100).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (r, s) in a.records.iter().zip(&b.records) {
        assert_eq!(r.x, s.x);
    }
}

#[test]
fn one_dimensional_arcd_is_nesterov_rgd() {
    let f = separable_quartic(1);
    let c = quartic_config(1, 3);
    let x0 = v(&[2.0]);
    let h = Dgf::power_p(4.0, x0.clone(), Geometry::identity(1)).unwrap();
    let a = accel_rcd(&f, &h, &c, &x0, 100, 9).unwrap();
    let kernel = DescentConfig::new(Method::Rgd(Order::Finite(4.0)), c.etas[0], Geometry::identity(1));
    let b = Nesterov::new(kernel, NesterovVariant::GradAtX).run(&f, &h, &x0, 100).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (r, s) in a.records.iter().zip(&b.records) {
        assert!((r.x[0] - s.x[0]).abs() <= 1e-14 * (1.0 + s.x[0].abs()));
    }
}

#[test]
fn replay_is_bit_identical() {
    let f = separable_quartic(4);
    let c = quartic_config(4, 0);
    let x0 = v(&[1.0, -2.0, 0.5, 3.0]);
    let a = run_rcd(&f, &c, &x0, 300, 42).unwrap();
    let b = run_rcd(&f, &c, &x0, 300, 42).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    let ia: Vec<_> = a.records.iter().map(|r| r.coordinate).collect();
    let ib: Vec<_> = b.records.iter().map(|r| r.coordinate).collect();
    assert_eq!(ia, ib);
}

#[test]
fn arcd_rejects_quadratic_dgf() {
    let f = separable_quartic(2);
    let h = Dgf::quadratic(Geometry::identity(2));
    assert!(matches!(
        accel_rcd(&f, &h, &quartic_config(2, 0), &v(&[1.0, 1.0]), 3, 0),
        Err(Error::Config(_))
    ));
}

#[test]
fn arcd_kernel_condition_holds() {
    let f = separable_quartic(4);
    let x0 = v(&[1.0, -2.0, 0.5, 3.0]);
    let h = Dgf::power_p(4.0, x0.clone(), Geometry::identity(4)).unwrap();
    let t = accel_rcd(&f, &h, &quartic_config(4, 1), &x0, 500, 1).unwrap();
    let (worst, holds) = crate::accel::certify_kernel_margins(&t);
    assert!(holds, "worst {worst}");
    assert_eq!(t.last().grad_evals, t.last().k as u64);
}
