//! Inner-product structure, dual norms and distance-generating functions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// An SPD operator `B` with primal norm `sqrt(<v, Bv>)` and dual norm `sqrt(<g, B^-1 g>)`.
#[derive(Clone, Debug)]
pub struct Geometry {
    b: Matrix,
    chol: Cholesky<f64, Dyn>,
    identity: bool,
}

impl Geometry {
    pub fn identity(dim: usize) -> Self {
        let b = Matrix::identity(dim, dim);
        let chol = Cholesky::new(b.clone()).expect("identity is SPD");
        Geometry {
            b,
            chol,
            identity: true,
        }
    }

    /// Validates symmetry (1e-12 relative) and positive definiteness.
    pub fn new(b: Matrix) -> Result<Self> {
        if !b.is_square() || b.nrows() == 0 {
            return Err(Error::arg("geometry operator must be a nonempty square matrix"));
        }
        let scale = b.amax().max(f64::MIN_POSITIVE);
        let asym = (&b - b.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::arg(format!(
                "geometry operator is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let sym = (&b + b.transpose()) * 0.5;
        let chol = Cholesky::new(sym.clone())
            .ok_or_else(|| Error::arg("geometry operator is not positive definite"))?;
        let identity = sym == Matrix::identity(sym.nrows(), sym.ncols());
        Ok(Geometry {
            b: sym,
            chol,
            identity,
        })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Geometry::new(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn operator(&self) -> &Matrix {
        &self.b
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `B v`.
    pub fn apply(&self, v: &Vector) -> Vector {
        if self.identity {
            v.clone()
        } else {
            &self.b * v
        }
    }

    /// `B^-1 g`.
    pub fn solve(&self, g: &Vector) -> Vector {
        if self.identity {
            g.clone()
        } else {
            self.chol.solve(g)
        }
    }

    pub fn inner(&self, u: &Vector, v: &Vector) -> f64 {
        if self.identity {
            u.dot(v)
        } else {
            u.dot(&(&self.b * v))
        }
    }

    /// Panics on dimension mismatch; see [`primal_norm`] for the checked form.
    pub fn primal_norm(&self, v: &Vector) -> f64 {
        if self.identity {
            v.norm()
        } else {
            self.inner(v, v).max(0.0).sqrt()
        }
    }

    /// Panics on dimension mismatch; see [`dual_norm`] for the checked form.
    pub fn dual_norm(&self, g: &Vector) -> f64 {
        if self.identity {
            g.norm()
        } else {
            g.dot(&self.chol.solve(g)).max(0.0).sqrt()
        }
    }
}

pub fn primal_norm(geom: &Geometry, v: &Vector) -> Result<f64> {
    check_dim("primal_norm", v.len(), geom.dim())?;
    Ok(geom.primal_norm(v))
}

pub fn dual_norm(geom: &Geometry, g: &Vector) -> Result<f64> {
    check_dim("dual_norm", g.len(), geom.dim())?;
    Ok(geom.dual_norm(g))
}

/// Which distance-generating function.
#[derive(Clone, Debug)]
pub enum DgfKind {
    /// `h(x) = ½‖x‖²`.
    Quadratic,
    /// `h(x) = (2^{p-2}/p)‖x - x0‖^p`.
    PowerP { p: f64, center: Vector },
}

/// Distance-generating function `h` with its Bregman divergence and mirror map.
#[derive(Clone, Debug)]
pub struct Dgf {
    kind: DgfKind,
    geom: Geometry,
    m: f64,
    big_m: f64,
}

impl Dgf {
    pub fn quadratic(geom: Geometry) -> Self {
        Dgf {
            kind: DgfKind::Quadratic,
            geom,
            m: 1.0,
            big_m: 1.0,
        }
    }

    /// Requires `p >= 2` and a center of matching dimension.
    pub fn power_p(p: f64, center: Vector, geom: Geometry) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::arg(format!("power dgf needs finite p >= 2, got {p}")));
        }
        check_dim("power dgf center", center.len(), geom.dim())?;
        Ok(Dgf {
            kind: DgfKind::PowerP { p, center },
            geom,
            m: 1.0,
            big_m: 1.0,
        })
    }

    /// Overrides the spectral bounds `m B ⪯ ∇²h ⪯ M B` used by step-size formulas.
    pub fn with_moduli(mut self, m: f64, big_m: f64) -> Result<Self> {
        if !(m > 0.0 && big_m >= m && big_m.is_finite()) {
            return Err(Error::arg(format!("invalid dgf moduli m={m}, M={big_m}")));
        }
        self.m = m;
        self.big_m = big_m;
        Ok(self)
    }

    /// Same function recentered at `center` (no-op for the quadratic kind).
    pub fn recentered(&self, center: &Vector) -> Self {
        let mut out = self.clone();
        if let DgfKind::PowerP { center: c, .. } = &mut out.kind {
            *c = center.clone();
        }
        out
    }

    pub fn kind(&self) -> &DgfKind {
        &self.kind
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    /// Order of uniform convexity.
    pub fn order(&self) -> f64 {
        match &self.kind {
            DgfKind::Quadratic => 2.0,
            DgfKind::PowerP { p, .. } => *p,
        }
    }

    pub fn strong_convexity_modulus(&self) -> f64 {
        self.m
    }

    pub fn smoothness_modulus(&self) -> f64 {
        self.big_m
    }

    pub fn is_power(&self) -> bool {
        matches!(self.kind, DgfKind::PowerP { .. })
    }

    fn coefficient(p: f64) -> f64 {
        2f64.powf(p - 2.0)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            DgfKind::Quadratic => 0.5 * self.geom.inner(x, x),
            DgfKind::PowerP { p, center } => {
                let u = x - center;
                Self::coefficient(*p) / p * self.geom.primal_norm(&u).powf(*p)
            }
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match &self.kind {
            DgfKind::Quadratic => self.geom.apply(x),
            DgfKind::PowerP { p, center } => {
                let u = x - center;
                let r = self.geom.primal_norm(&u);
                if r == 0.0 {
                    return Vector::zeros(u.len());
                }
                self.geom.apply(&u) * (Self::coefficient(*p) * r.powf(p - 2.0))
            }
        }
    }

    /// `∇²h(x)`; singular at the center of a power dgf with `p > 2`.
    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        match &self.kind {
            DgfKind::Quadratic => Ok(self.geom.operator().clone()),
            DgfKind::PowerP { p, center } => {
                let u = x - center;
                let r = self.geom.primal_norm(&u);
                let c = Self::coefficient(*p);
                if *p == 2.0 {
                    return Ok(self.geom.operator() * c);
                }
                if r == 0.0 {
                    return Err(Error::Degenerate(
                        "power dgf Hessian is singular at its center".into(),
                    ));
                }
                let bu = self.geom.apply(&u);
                Ok(self.geom.operator() * (c * r.powf(p - 2.0))
                    + &bu * bu.transpose() * (c * (p - 2.0) * r.powf(p - 4.0)))
            }
        }
    }

    /// Inverse of the mirror map: the `x` with `∇h(x) = theta`.
    pub fn mirror_invert(&self, theta: &Vector) -> Vector {
        match &self.kind {
            DgfKind::Quadratic => self.geom.solve(theta),
            DgfKind::PowerP { p, center } => {
                let t = self.geom.dual_norm(theta);
                if t == 0.0 {
                    return center.clone();
                }
                let c = Self::coefficient(*p);
                let r = (t / c).powf(1.0 / (p - 1.0));
                center + self.geom.solve(theta) / (c * r.powf(p - 2.0))
            }
        }
    }

    /// `D_h(x, y)`; unchecked dimensions.
    pub fn divergence(&self, x: &Vector, y: &Vector) -> f64 {
        match &self.kind {
            DgfKind::Quadratic => {
                let d = x - y;
                0.5 * self.geom.inner(&d, &d)
            }
            DgfKind::PowerP { .. } => {
                let d = self.value(x) - self.value(y) - self.gradient(y).dot(&(x - y));
                d.max(0.0)
            }
        }
    }
}

/// Bregman divergence `h(x) - h(y) - <∇h(y), x - y>`.
pub fn bregman(h: &Dgf, x: &Vector, y: &Vector) -> Result<f64> {
    check_dim("bregman x", x.len(), h.dim())?;
    check_dim("bregman y", y.len(), h.dim())?;
    Ok(h.divergence(x, y))
}

/// Solves `∇h(z') = ∇h(z) - weight·g` in closed form.
pub fn mirror_step(h: &Dgf, z: &Vector, g: &Vector, weight: f64) -> Result<Vector> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::arg(format!("mirror step weight must be positive, got {weight}")));
    }
    check_dim("mirror_step z", z.len(), h.dim())?;
    check_dim("mirror_step g", g.len(), h.dim())?;
    if let DgfKind::Quadratic = h.kind {
        return Ok(z - h.geom.solve(g) * weight);
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok(z.clone());
    }
    let theta = h.gradient(z) - g * weight;
    Ok(h.mirror_invert(&theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn dual_norm_examples() {
        let g = Geometry::identity(2);
        assert_eq!(dual_norm(&g, &v(&[3.0, 4.0])).unwrap(), 5.0);
        let d = Geometry::diagonal(&[4.0, 1.0]).unwrap();
        assert!((dual_norm(&d, &v(&[2.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(dual_norm(&d, &v(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(dual_norm(&d, &v(&[1.0])).is_err());
    }

    #[test]
    fn rejects_bad_operators() {
        assert!(Geometry::new(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(Geometry::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(Geometry::new(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn bregman_examples() {
        let q = Dgf::quadratic(Geometry::identity(2));
        assert_eq!(bregman(&q, &v(&[1.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), 0.5);
        let h = Dgf::power_p(4.0, v(&[0.0]), Geometry::identity(1)).unwrap();
        assert_eq!(bregman(&h, &v(&[1.0]), &v(&[0.0])).unwrap(), 1.0);
        assert_eq!(bregman(&h, &v(&[0.7]), &v(&[0.7])).unwrap(), 0.0);
        assert!(bregman(&h, &v(&[0.7, 1.0]), &v(&[0.7])).is_err());
    }

    #[test]
    fn power_dgf_matches_quartic() {
        let h = Dgf::power_p(4.0, v(&[0.0]), Geometry::identity(1)).unwrap();
        for x in [-1.5, 0.3, 2.0] {
            assert!((h.value(&v(&[x])) - x.powi(4)).abs() < 1e-14);
            assert!((h.gradient(&v(&[x]))[0] - 4.0 * x.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_step_examples() {
        let q = Dgf::quadratic(Geometry::identity(2));
        let z = mirror_step(&q, &v(&[1.0, 1.0]), &v(&[1.0, 0.0]), 0.5).unwrap();
        assert_eq!(z, v(&[0.5, 1.0]));
        let h = Dgf::power_p(4.0, v(&[0.0]), Geometry::identity(1)).unwrap();
        let z = mirror_step(&h, &v(&[1.0]), &v(&[4.0]), 1.0).unwrap();
        assert_eq!(z[0], 0.0);
        let same = mirror_step(&h, &v(&[0.3]), &v(&[0.0]), 2.0).unwrap();
        assert_eq!(same[0], 0.3);
        assert!(mirror_step(&h, &v(&[0.3]), &v(&[1.0]), 0.0).is_err());
        assert!(mirror_step(&h, &v(&[0.3]), &v(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn hessian_singular_at_power_center() {
        let h = Dgf::power_p(3.0, v(&[1.0, 1.0]), Geometry::identity(2)).unwrap();
        assert!(matches!(h.hessian(&v(&[1.0, 1.0])), Err(Error::Degenerate(_))));
        assert!(h.hessian(&v(&[2.0, 1.0])).is_ok());
    }
}
