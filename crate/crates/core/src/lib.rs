//! Numerical laboratory for the blow-up construction in the supercritical
//! boundary Yamabe problem on the half-space model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops mirror
// the tensor notation they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blowup;
pub mod bubble;
pub mod cli_io;
pub mod corrector;
pub mod error;
pub mod energy;
pub mod exponents;
pub mod fit;
pub mod form;
pub mod special;

pub use error::{Error, Result};
