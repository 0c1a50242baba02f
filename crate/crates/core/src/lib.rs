//! Exact uniform sampling and approximate counting of binary contingency
//! tables with the configuration model, plus brute-force oracles and
//! diagnostics for when rejection sampling runs in linear time.

pub mod asymptotics;
pub mod estimator;
pub mod expr;
pub mod family;
pub mod margins;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use margins::{falling_factorial, Margins, MarginsError};
pub use sampler::{
    sample_binary_rejection, sample_pairing, table_from_pairing, ConfigurationModel, ContingencyTable,
    SampleError, TokenPairing,
};
