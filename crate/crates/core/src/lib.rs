//! Energy-per-bit bounds for the many-user quasi-static Rayleigh-fading MAC
//! under a per-user error criterion, plus the Monte Carlo tools used to check
//! them.

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod mc_sim;
pub mod quadrature;
pub mod replica;
pub mod scalar_channel;
pub mod special_math;

pub use error::{Error, Result};
