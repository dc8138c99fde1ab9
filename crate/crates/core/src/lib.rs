//! Numerical certification of c-concavity for the quadratic cost `½d²` on
//! model Riemannian manifolds (round sphere, flat torus, Euclidean box).
//!
//! * [`manifold`]: closed-form distance, exp/log and distance Hessians.
//! * [`field`]: C² scalar fields with analytic derivatives and FD oracles.
//! * [`comparison`]: sampled checks of the Hessian comparison bounds.
//! * [`cconcavity`]: hypothesis certificates and the argmin test.
//! * [`counterexample`]: a function on S² with `∇²f ≤ g` that is not c-concave.
//! * [`transport`]: optimality of `T = exp(−∇f)` on discrete measures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cconcavity;
pub mod comparison;
pub mod counterexample;
pub mod error;
pub mod field;
pub mod manifold;
pub mod report;
pub mod transport;

pub use error::{Error, Result};
