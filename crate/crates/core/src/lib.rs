//! Information-rate bounds for channels with ARMA-filtered phase noise.
//!
//! The crate simulates `y_k = x_k e^{jφ_k} + w_k` where the phase increments are
//! white Gaussian noise passed through a stable rational filter, and estimates
//! lower and upper bounds on the achievable rate `lim I(X^n; Y^n)/n` from long
//! simulated traces. Gaussian phase trackers (an extended Kalman filter and a
//! particle filter) supply the auxiliary densities the bounds need; reference
//! oracles for memoryless and Wiener phase noise check them.

pub mod angle;
pub mod bounds;
pub mod cli;
pub mod ekf;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod pf;
pub mod quadrature;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
