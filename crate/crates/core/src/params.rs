//! Shared domain types and parameter validation.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::config::{ConfigError, ConfigFile};

/// Reduced Planck constant. Fixed to one everywhere.
pub const HBAR: f64 = 1.0;

/// Quadrature variance of the vacuum state for `HBAR = 1`.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Factor converting a quadrature value quoted in shot-noise units (vacuum
/// variance 1) into the crate's convention (vacuum variance 1/2).
pub const SHOT_NOISE_TO_NATURAL: f64 = FRAC_1_SQRT_2;

const REL_TOL: f64 = 1e-12;

/// A violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid epsilon budget: {0}")]
    InvalidBudget(String),
    #[error("invalid discretization scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid memory assumption: {0}")]
    InvalidMemory(String),
}

/// Binning of quadrature outcomes into `2^bits` symbols of width `delta`
/// covering `[-alpha_cut, alpha_cut]`; outcomes beyond the range fall into the
/// outermost bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationScheme {
    pub delta: f64,
    pub alpha_cut: f64,
    pub bits: u32,
}

impl DiscretizationScheme {
    /// Scheme with `alpha_cut = 2^(bits-1) * delta`.
    pub fn new(delta: f64, bits: u32) -> Self {
        let alpha_cut = delta * 2f64.powi(bits as i32 - 1);
        Self {
            delta,
            alpha_cut,
            bits,
        }
    }

    /// Same as [`DiscretizationScheme::new`] with `delta` quoted in shot-noise units.
    pub fn from_shot_noise_units(delta_snu: f64, bits: u32) -> Self {
        Self::new(delta_snu * SHOT_NOISE_TO_NATURAL, bits)
    }

    pub fn alphabet_size(&self) -> u32 {
        1 << self.bits
    }

    /// Lower and upper edge of bin `k` (1-based). Outer bins extend to infinity.
    pub fn bin_edges(&self, k: u32) -> (f64, f64) {
        let lo = if k <= 1 {
            f64::NEG_INFINITY
        } else {
            -self.alpha_cut + (k - 1) as f64 * self.delta
        };
        let hi = if k >= self.alphabet_size() {
            f64::INFINITY
        } else {
            -self.alpha_cut + k as f64 * self.delta
        };
        (lo, hi)
    }

    /// Midpoint of the finite extent of bin `k` (1-based).
    pub fn bin_center(&self, k: u32) -> f64 {
        -self.alpha_cut + (k as f64 - 0.5) * self.delta
    }

    pub fn check(&self) -> Result<(), ParamError> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(ParamError::InvalidScheme(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.bits == 0 || self.bits > 24 {
            return Err(ParamError::InvalidScheme(format!(
                "bits per symbol must lie in 1..=24, got {}",
                self.bits
            )));
        }
        let expected = self.delta * 2f64.powi(self.bits as i32 - 1);
        if (self.alpha_cut - expected).abs() > REL_TOL * expected {
            return Err(ParamError::InvalidScheme(format!(
                "alpha_cut = {} but 2^(d-1)*delta = {}",
                self.alpha_cut, expected
            )));
        }
        Ok(())
    }
}

/// Failure probabilities of the security statement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBudget {
    pub eps_a: f64,
    pub eps_1: f64,
    pub eps_2: f64,
    pub eps_alpha_cut: f64,
}

impl EpsilonBudget {
    /// Checks `eps_a > 4 eps_1 > 4 eps_2 > 4 eps_alpha_cut > 0`.
    pub fn check(&self) -> Result<(), ParamError> {
        let Self {
            eps_a,
            eps_1,
            eps_2,
            eps_alpha_cut,
        } = *self;
        if !(eps_a < 1.0) {
            return Err(ParamError::InvalidBudget(format!(
                "eps_A must be below 1, got {eps_a}"
            )));
        }
        if !(eps_a > 4.0 * eps_1) {
            return Err(ParamError::InvalidBudget(format!(
                "need eps_A > 4 eps_1, got eps_A = {eps_a}, eps_1 = {eps_1}"
            )));
        }
        if !(eps_1 > eps_2) {
            return Err(ParamError::InvalidBudget(format!(
                "need eps_1 > eps_2, got {eps_1} <= {eps_2}"
            )));
        }
        if !(eps_2 > eps_alpha_cut) {
            return Err(ParamError::InvalidBudget(format!(
                "need eps_2 > eps_alpha_cut, got {eps_2} <= {eps_alpha_cut}"
            )));
        }
        if !(eps_alpha_cut > 0.0) {
            return Err(ParamError::InvalidBudget(format!(
                "need eps_alpha_cut > 0, got {eps_alpha_cut}"
            )));
        }
        Ok(())
    }
}

/// Restriction on a dishonest Bob's encoding into his quantum memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Arbitrary,
    Gaussian,
    /// Independent and identical over blocks of `block` modes.
    Iid {
        block: u32,
    },
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Encoding::Arbitrary => write!(f, "arbitrary"),
            Encoding::Gaussian => write!(f, "gaussian"),
            Encoding::Iid { block } => write!(f, "iid:{block}"),
        }
    }
}

impl FromStr for Encoding {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "arbitrary" => Ok(Encoding::Arbitrary),
            "gaussian" => Ok(Encoding::Gaussian),
            other => {
                let block = other
                    .strip_prefix("iid:")
                    .and_then(|b| b.parse::<u32>().ok())
                    .filter(|&b| b >= 1)
                    .ok_or_else(|| {
                        ParamError::InvalidMemory(format!(
                            "unknown encoding {other:?} (expected arbitrary, gaussian or iid:<m>)"
                        ))
                    })?;
                Ok(Encoding::Iid { block })
            }
        }
    }
}

/// Adversary model: `nu * n` uses of a lossy bosonic channel with transmissivity
/// `eta` and a photon-number cap `n_max`, with strong-converse exponent `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryAssumption {
    pub nu: f64,
    pub eta: f64,
    pub n_max: u64,
    pub xi: f64,
    pub encoding: Encoding,
}

impl MemoryAssumption {
    pub fn check(&self) -> Result<(), ParamError> {
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(ParamError::InvalidMemory(format!(
                "storage rate nu must be >= 0, got {}",
                self.nu
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(ParamError::InvalidMemory(format!(
                "transmissivity eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(ParamError::InvalidMemory(format!(
                "converse exponent xi must be > 0, got {}",
                self.xi
            )));
        }
        Ok(())
    }
}

impl Default for MemoryAssumption {
    fn default() -> Self {
        Self {
            nu: 0.0,
            eta: 1.0,
            n_max: 100,
            xi: 1.0,
            encoding: Encoding::Gaussian,
        }
    }
}

/// A configuration whose invariants have all been checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams {
    scheme: DiscretizationScheme,
    budget: EpsilonBudget,
    mem: MemoryAssumption,
}

impl ValidatedParams {
    pub fn scheme(&self) -> &DiscretizationScheme {
        &self.scheme
    }

    pub fn budget(&self) -> &EpsilonBudget {
        &self.budget
    }

    pub fn memory(&self) -> &MemoryAssumption {
        &self.mem
    }

    /// Writes the configuration into `file` using the keys read by
    /// [`ValidatedParams::from_config`].
    pub fn write_config(&self, file: &mut ConfigFile) {
        file.set("delta", self.scheme.delta);
        file.set("alpha_cut", self.scheme.alpha_cut);
        file.set("bits", self.scheme.bits);
        file.set("eps_a", self.budget.eps_a);
        file.set("eps_1", self.budget.eps_1);
        file.set("eps_2", self.budget.eps_2);
        file.set("eps_alpha_cut", self.budget.eps_alpha_cut);
        file.set("nu", self.mem.nu);
        file.set("eta", self.mem.eta);
        file.set("n_max", self.mem.n_max);
        file.set("xi", self.mem.xi);
        file.set("encoding", self.mem.encoding);
    }

    pub fn to_config(&self) -> ConfigFile {
        let mut file = ConfigFile::default();
        self.write_config(&mut file);
        file
    }

    pub fn from_config(file: &ConfigFile) -> Result<Self, ConfigError> {
        let scheme = DiscretizationScheme {
            delta: file.require("delta")?,
            alpha_cut: file.require("alpha_cut")?,
            bits: file.require("bits")?,
        };
        let budget = EpsilonBudget {
            eps_a: file.require("eps_a")?,
            eps_1: file.require("eps_1")?,
            eps_2: file.require("eps_2")?,
            eps_alpha_cut: file.require("eps_alpha_cut")?,
        };
        let encoding: Encoding = file
            .get_str("encoding")
            .unwrap_or("gaussian")
            .parse()
            .map_err(|e: ParamError| ConfigError::Invalid(vec![e]))?;
        let mem = MemoryAssumption {
            nu: file.require("nu")?,
            eta: file.require("eta")?,
            n_max: file.require("n_max")?,
            xi: file.get("xi")?.unwrap_or(1.0),
            encoding,
        };
        validate_params(scheme, budget, mem).map_err(ConfigError::Invalid)
    }
}

/// Returns the configuration iff every invariant holds, otherwise every
/// violated invariant.
pub fn validate_params(
    scheme: DiscretizationScheme,
    budget: EpsilonBudget,
    mem: MemoryAssumption,
) -> Result<ValidatedParams, Vec<ParamError>> {
    let errors: Vec<ParamError> = [scheme.check(), budget.check(), mem.check()]
        .into_iter()
        .filter_map(Result::err)
        .collect();
    if errors.is_empty() {
        Ok(ValidatedParams {
            scheme,
            budget,
            mem,
        })
    } else {
        Err(errors)
    }
}
