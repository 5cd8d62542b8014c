//! Truncated Taylor series in one variable.
//!
//! A loss restricted to the line `x + t v` becomes a scalar function of `t`;
//! propagating its Taylor coefficients through the loss formula gives the
//! directional derivatives `∇^m f(x)(v)^m = m! c_m` exactly.

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 4;
const N: usize = ORDER + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; N],
}

impl Jet {
    pub fn constant(a: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = a;
        Jet { c }
    }

    /// `a + b t`.
    pub fn linear(a: f64, b: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = a;
        c[1] = b;
        Jet { c }
    }

    pub fn scale(self, s: f64) -> Self {
        Jet {
            c: self.c.map(|v| v * s),
        }
    }

    /// `m`-th derivative at `t = 0`.
    pub fn derivative(&self, m: usize) -> f64 {
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        fact * self.c[m]
    }

    pub fn powi(self, n: u32) -> Self {
        let mut out = Jet::constant(1.0);
        for _ in 0..n {
            out = out * self;
        }
        out
    }

    /// `a^r` for `a_0 > 0`.
    pub fn powf(self, r: f64) -> Self {
        let a = self.c;
        debug_assert!(a[0] > 0.0);
        let mut y = [0.0; N];
        y[0] = a[0].powf(r);
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += (r * j as f64 - (k - j) as f64) * a[j] * y[k - j];
            }
            y[k] = s / (k as f64 * a[0]);
        }
        Jet { c: y }
    }

    /// `|a|^p`; exact below order `p` when `a_0 = 0`.
    pub fn abs_pow(self, p: f64) -> Self {
        let lead = self.c.iter().copied().find(|v| *v != 0.0).unwrap_or(0.0);
        if lead == 0.0 {
            return Jet::constant(0.0);
        }
        let s = if self.c[0] != 0.0 { self.c[0].signum() } else { lead.signum() };
        let a = self.scale(s);
        if p.fract() == 0.0 && p >= 0.0 && p <= 64.0 {
            a.powi(p as u32)
        } else if a.c[0] > 0.0 {
            a.powf(p)
        } else {
            Jet::constant(0.0)
        }
    }

    pub fn exp(self) -> Self {
        let a = self.c;
        let mut e = [0.0; N];
        e[0] = a[0].exp();
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    pub fn recip(self) -> Self {
        let a = self.c;
        let mut y = [0.0; N];
        y[0] = 1.0 / a[0];
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += a[j] * y[k - j];
            }
            y[k] = -s / a[0];
        }
        Jet { c: y }
    }

    /// Logistic sigmoid `1/(1+e^{-a})`, evaluated without overflow.
    pub fn sigmoid(self) -> Self {
        if self.c[0] >= 0.0 {
            (Jet::constant(1.0) + (-self).exp()).recip()
        } else {
            let e = self.exp();
            e * (Jet::constant(1.0) + e).recip()
        }
    }

    /// `ln(1 + e^a)`, integrated from its derivative `σ(a) a'`.
    pub fn softplus(self) -> Self {
        let a = self.c;
        let sig = self.sigmoid().c;
        let mut s = [0.0; N];
        s[0] = softplus(a[0]);
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * sig[k - j];
            }
            s[k] = acc / k as f64;
        }
        Jet { c: s }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for (ci, oi) in c.iter_mut().zip(o.c) {
            *ci += oi;
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; N];
        for (k, ck) in c.iter_mut().enumerate() {
            for j in 0..=k {
                *ck += self.c[j] * o.c[k - j];
            }
        }
        Jet { c }
    }
}

/// `ln(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `1/(1 + e^{-u})` without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}
