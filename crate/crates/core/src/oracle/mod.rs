//! Reference computations used to check the estimators: discrete-input AWGN
//! mutual information (the zero phase-noise limit) and a quantized-phase trellis
//! rate for Wiener phase noise.

mod awgn;
mod fixtures;
mod trellis;

pub use awgn::{awgn_mi, awgn_mi_checked, monte_carlo as awgn_mi_monte_carlo, AwgnMethod, AGREEMENT_TOL};
pub use fixtures::{AwgnFixture, Fixtures, TrellisFixture, FIXTURE_VERSION};
pub use trellis::{
    trellis_entropy_series, trellis_rate, trellis_series, TrellisConfig, TrellisGrid, MIN_BINS,
};
