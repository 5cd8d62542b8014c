//! Descent methods of order `p`, Nesterov- and Monteiro–Svaiter-style acceleration,
//! coordinate variants, and runtime certification of descent, Lyapunov and rate conditions.

pub mod accel;
pub mod coordinate;
pub mod descent;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod objectives;
pub mod order;

pub use error::{Error, Result};
pub use geometry::{Dgf, Geometry, Matrix, Vector};
pub use objectives::Objective;
pub use order::Order;
