//! The order `p` of a descent method, finite or infinite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order `p > 1`. Exponents at `p = ∞` use their analytic limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrderRepr", into = "OrderRepr")]
pub enum Order {
    Finite(f64),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OrderRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<OrderRepr> for Order {
    type Error = Error;
    fn try_from(r: OrderRepr) -> Result<Order> {
        match r {
            OrderRepr::Num(p) => Order::finite(p),
            OrderRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Order> for OrderRepr {
    fn from(o: Order) -> OrderRepr {
        match o {
            Order::Finite(p) => OrderRepr::Num(p),
            Order::Infinite => OrderRepr::Text("inf".into()),
        }
    }
}

impl std::str::FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Order> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Order::Infinite),
            t => t
                .parse::<f64>()
                .map_err(|_| Error::arg(format!("cannot parse order {s:?}")))
                .and_then(Order::finite),
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Finite(p) => write!(f, "{p}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

impl Order {
    pub fn finite(p: f64) -> Result<Order> {
        if p.is_infinite() && p > 0.0 {
            return Ok(Order::Infinite);
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::arg(format!("order must exceed 1, got {p}")));
        }
        Ok(Order::Finite(p))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Order::Finite(p) => Some(p),
            Order::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinite)
    }

    /// `p/(p-1)`, the exponent on the gradient norm in the descent condition.
    pub fn dual_exponent(self) -> f64 {
        match self {
            Order::Finite(p) => p / (p - 1.0),
            Order::Infinite => 1.0,
        }
    }

    /// `(p-2)/(p-1)`, the normalization exponent in rescaled gradient descent.
    pub fn rescale_exponent(self) -> f64 {
        match self {
            Order::Finite(p) => (p - 2.0) / (p - 1.0),
            Order::Infinite => 1.0,
        }
    }

    /// `(p-1)/p`.
    pub fn rate_exponent(self) -> f64 {
        match self {
            Order::Finite(p) => (p - 1.0) / p,
            Order::Infinite => 1.0,
        }
    }

    /// Step length scale `η^{1/(p-1)}`; at `p = ∞` the step length is `η` itself.
    pub fn step_scale(self, eta: f64) -> f64 {
        match self {
            Order::Finite(p) => eta.powf(1.0 / (p - 1.0)),
            Order::Infinite => eta,
        }
    }

    /// Exponent `m + (p-m)/(p-1)` in the strong smoothness bound.
    pub fn smoothness_exponent(self, m: usize) -> f64 {
        let m = m as f64;
        match self {
            Order::Finite(p) => m + (p - m) / (p - 1.0),
            Order::Infinite => m + 1.0,
        }
    }

    /// Exponent `(p-m)/(p-1)` in the operator-norm form of strong smoothness.
    pub fn operator_exponent(self, m: usize) -> f64 {
        let m = m as f64;
        match self {
            Order::Finite(p) => (p - m) / (p - 1.0),
            Order::Infinite => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_at_infinity() {
        let o = Order::Infinite;
        assert_eq!(o.dual_exponent(), 1.0);
        assert_eq!(o.rescale_exponent(), 1.0);
        assert_eq!(o.rate_exponent(), 1.0);
        assert_eq!(o.step_scale(0.3), 0.3);
    }

    #[test]
    fn finite_exponents() {
        let o = Order::Finite(4.0);
        assert!((o.dual_exponent() - 4.0 / 3.0).abs() < 1e-15);
        assert!((o.step_scale(0.125) - 0.5).abs() < 1e-15);
        assert!((o.smoothness_exponent(2) - (2.0 + 2.0 / 3.0)).abs() < 1e-15);
        assert!(Order::finite(1.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = serde_json::to_string(&vec![Order::Finite(3.0), Order::Infinite]).unwrap();
        assert_eq!(s, r#"[3.0,"inf"]"#);
        let back: Vec<Order> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![Order::Finite(3.0), Order::Infinite]);
        assert!(serde_json::from_str::<Order>("0.5").is_err());
    }
}
