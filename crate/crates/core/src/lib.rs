//! Continuous-variable 1-2 randomized oblivious transfer in the noisy-storage model.
//!
//! The crate is organised by protocol layer:
//!
//! - [`params`], [`config`], [`rng`]: shared domain types, the flat `key = value`
//!   configuration format and the deterministic random-number contract.
//! - [`gauss`]: Gaussian model of the two-mode squeezed source, lossy channel,
//!   homodyne sampling and discretization.
//! - [`uncertainty`]: smooth min-entropy uncertainty bounds for discretized
//!   position/momentum measurements.
//! - [`rate`]: secure output length and OT rate from the uncertainty bounds, the
//!   adversary's memory capacity and the ε-budget.
//! - [`recon`]: one-way reconciliation with a non-binary LDPC code over GF(64).
//! - [`hashing`]: Toeplitz two-universal hashing.
//! - [`protocol`]: Alice/Bob state machines, wire framing and transports.
//! - [`experiment`]: parameter presets of the optical demonstration.
//!
//! All quadrature values use ħ = 1 (vacuum variance 1/2); all entropies are in bits.

pub mod config;
pub mod experiment;
pub mod gauss;
pub mod hashing;
pub mod params;
pub mod protocol;
pub mod rate;
pub mod recon;
pub mod rng;
pub mod stats;
pub mod uncertainty;

pub use params::{
    validate_params, DiscretizationScheme, Encoding, EpsilonBudget, MemoryAssumption, ParamError,
    ValidatedParams,
};
pub use rng::SeededRng;

/// Formats a float with 17 significant digits, the precision used by every CSV
/// and text dump in this crate.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
