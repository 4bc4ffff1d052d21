//! Phase-noise process, source, channel and joint trace generation.

mod arma;
mod channel;
mod constellation;
mod trace;

pub use arma::{ArmaSpec, StateVector, ZeroFactor, SM_POLES, SM_ZEROS};
pub use channel::{
    blind_likelihood, blind_log_likelihood, data_aided_likelihood, data_aided_log_likelihood,
    BlindEvaluator, ChannelParams, DataAidedEvaluator,
};
pub use constellation::{Constellation, Modulation, SymbolSampler};
pub use trace::{generate_trace, RegisterSampler, Trace};
