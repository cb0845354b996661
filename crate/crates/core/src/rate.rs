//! Secure output length and OT rate.
//!
//! For smoothing parameters `ε_A > 4ε₁`, `ε₁ > ε₂ > ε_αcut`:
//!
//! ```text
//! r_ot = ½ (λ^{ε₂−ε_αcut}(n) − r_ec − (2/n)(log2(1/(ε₁−ε₂)²) + 1))
//! ℓ    = ⌊(n/2) ξ (r_ot − ν C_cl) − log2(1/(ε_A − 4ε₁))⌋
//! ```
//!
//! maximised over a logarithmic grid of `(ε₁, ε₂)`.

use thiserror::Error;

use crate::params::{DiscretizationScheme, Encoding, MemoryAssumption};
use crate::uncertainty::{
    lambda_from_renyi, lambda_iid, GaussianBound, IidCorrection, MajorizationBound,
    MajorizingSequence, UncertaintyError,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RateError {
    #[error("cutoff penalty eps_alpha_cut = {eps_alpha_cut:e} leaves no room below eps_A/4 = {:e}", .eps_a / 4.0)]
    InfeasibleBudget { eps_alpha_cut: f64, eps_a: f64 },
    #[error("invalid rate inputs: {0}")]
    InvalidInputs(String),
}

/// `g(x) = (x+1) log2(x+1) − x log2 x`: classical capacity of a bosonic
/// channel with mean output photon number `x`.
pub fn g_capacity(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // x log2((x+1)/x) + log2(x+1), avoiding the cancellation of the two large terms.
    (x * (1.0 / x).ln_1p() + x.ln_1p()) / std::f64::consts::LN_2
}

/// Classical capacity per use of the adversary's storage channel.
pub fn memory_capacity(mem: &MemoryAssumption) -> f64 {
    g_capacity(mem.eta * mem.n_max as f64)
}

/// `√(2(1 − p^n))` for the probability `p` that one outcome is in range.
pub fn eps_cutoff(p_alpha_cut: f64, n: f64) -> f64 {
    eps_cutoff_from_tail(1.0 - p_alpha_cut, n)
}

/// As [`eps_cutoff`], from the out-of-range probability `q = 1 − p`, which
/// keeps full precision when `p` rounds to 1.
pub fn eps_cutoff_from_tail(q: f64, n: f64) -> f64 {
    if n <= 0.0 || q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return std::f64::consts::SQRT_2;
    }
    (-2.0 * (n * (-q).ln_1p()).exp_m1()).sqrt()
}

/// `ε_C = ε_IR + 2ε_A`, capped at 1.
pub fn correctness_eps(eps_ir: f64, eps_a: f64) -> f64 {
    (eps_ir + 2.0 * eps_a).min(1.0)
}

/// Placement of the factor ½ in the rate expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthFormula {
    /// `r_ot = ½(λ − r_ec − …)`, the complete finite-size expression.
    #[default]
    Full,
    /// `r_ot = λ − r_ec − …`, the summary expression without the inner ½.
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub n: f64,
    pub scheme: DiscretizationScheme,
    pub eps_a: f64,
    /// Fixed `(ε₁, ε₂)`; when absent they are optimized over the grid.
    pub eps_pair: Option<(f64, f64)>,
    pub mem: MemoryAssumption,
    /// Reconciliation leakage in bits per symbol.
    pub r_ec: f64,
    /// Probability that one of Alice's outcomes falls outside `[−α_cut, α_cut]`.
    pub p_outside_range: f64,
    /// Standard deviation of Alice's outcomes (used by the IID bound).
    pub sigma_a: f64,
    pub formula: LengthFormula,
    pub iid_correction: IidCorrection,
}

impl RateInputs {
    pub fn eps_alpha_cut(&self) -> f64 {
        eps_cutoff_from_tail(self.p_outside_range, self.n)
    }

    fn check(&self) -> Result<(), RateError> {
        if !(self.n >= 1.0) {
            return Err(RateError::InvalidInputs(format!(
                "n must be >= 1, got {}",
                self.n
            )));
        }
        if !(self.r_ec >= 0.0) {
            return Err(RateError::InvalidInputs(format!(
                "r_ec must be >= 0, got {}",
                self.r_ec
            )));
        }
        if !(self.eps_a > 0.0 && self.eps_a < 1.0) {
            return Err(RateError::InvalidInputs(format!(
                "eps_A must lie in (0, 1), got {}",
                self.eps_a
            )));
        }
        self.scheme
            .check()
            .and_then(|_| self.mem.check())
            .map_err(|e| RateError::InvalidInputs(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub ell: u64,
    pub r_ot: f64,
    pub lambda: f64,
    pub eps_1: f64,
    pub eps_2: f64,
    pub eps_alpha_cut: f64,
    pub feasible: bool,
    /// The arbitrary-encoding bound was evaluated on a capped sequence.
    pub truncated_bound: bool,
}

impl RateResult {
    /// Secure bits per transmitted signal.
    pub fn rate(&self, n: f64) -> f64 {
        self.ell as f64 / n
    }
}

const GRID: usize = 40;

fn grid_fractions() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), (1.0 - 1e-3f64).ln());
    (0..GRID)
        .map(|i| (lo + (hi - lo) * i as f64 / (GRID - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    eps_1: f64,
    eps_2: f64,
    lambda: f64,
}

/// Uncertainty bounds precomputed over the ε-grid for one `(n, δ, encoding)`.
/// Everything else in [`RateInputs`] can vary between evaluations.
#[derive(Debug, Clone)]
pub struct LambdaTable {
    n: f64,
    eps_a: f64,
    eps_alpha_cut: f64,
    candidates: Vec<Candidate>,
    truncated: bool,
}

impl LambdaTable {
    pub fn build(inputs: &RateInputs) -> Result<Self, RateError> {
        inputs.check()?;
        let eps_alpha_cut = inputs.eps_alpha_cut();
        if eps_alpha_cut >= inputs.eps_a / 4.0 {
            return Err(RateError::InfeasibleBudget {
                eps_alpha_cut,
                eps_a: inputs.eps_a,
            });
        }
        let pairs: Vec<(f64, f64)> = match inputs.eps_pair {
            Some((e1, e2)) => {
                if !(inputs.eps_a > 4.0 * e1 && e1 > e2 && e2 > eps_alpha_cut) {
                    return Err(RateError::InfeasibleBudget {
                        eps_alpha_cut,
                        eps_a: inputs.eps_a,
                    });
                }
                vec![(e1, e2)]
            }
            None => {
                let f = grid_fractions();
                f.iter()
                    .map(|f1| inputs.eps_a / 4.0 * f1)
                    .filter(|&e1| e1 > eps_alpha_cut)
                    .flat_map(|e1| {
                        f.iter()
                            .map(move |f2| (e1, eps_alpha_cut + (e1 - eps_alpha_cut) * f2))
                    })
                    .collect()
            }
        };
        let delta = inputs.scheme.delta;
        let mut truncated = false;
        let lambda_at: Box<dyn Fn(f64) -> f64> = match inputs.mem.encoding {
            Encoding::Gaussian => {
                let b = GaussianBound { delta };
                let n = inputs.n;
                Box::new(move |eps| lambda_from_renyi(&b, n, eps).0)
            }
            Encoding::Arbitrary => {
                let seq = match MajorizingSequence::new(delta) {
                    Ok(s) => s,
                    Err(UncertaintyError::CapExceeded(s)) => {
                        truncated = true;
                        s
                    }
                };
                let b = MajorizationBound(seq);
                let n = inputs.n;
                Box::new(move |eps| lambda_from_renyi(&b, n, eps).0)
            }
            Encoding::Iid { block } => {
                let (n, sigma, corr) = (inputs.n, inputs.sigma_a, inputs.iid_correction);
                Box::new(move |eps| lambda_iid(delta, n, block, eps, sigma, corr))
            }
        };
        let candidates = pairs
            .into_iter()
            .map(|(eps_1, eps_2)| Candidate {
                eps_1,
                eps_2,
                lambda: lambda_at(eps_2 - eps_alpha_cut),
            })
            .collect();
        Ok(Self {
            n: inputs.n,
            eps_a: inputs.eps_a,
            eps_alpha_cut,
            candidates,
            truncated,
        })
    }

    /// Best length over the grid for the leakage and memory in `inputs`.
    pub fn evaluate(&self, inputs: &RateInputs) -> RateResult {
        debug_assert_eq!(inputs.n, self.n);
        debug_assert_eq!(inputs.eps_a, self.eps_a);
        let n = self.n;
        let capacity = memory_capacity(&inputs.mem);
        let mut best: Option<(f64, f64, &Candidate)> = None;
        for c in &self.candidates {
            let smoothing = (2.0 / n) * ((1.0 / (c.eps_1 - c.eps_2).powi(2)).log2() + 1.0);
            let inner = c.lambda - inputs.r_ec - smoothing;
            let r_ot = match inputs.formula {
                LengthFormula::Full => 0.5 * inner,
                LengthFormula::Summary => inner,
            };
            let length = (n / 2.0) * inputs.mem.xi * (r_ot - inputs.mem.nu * capacity)
                - (1.0 / (self.eps_a - 4.0 * c.eps_1)).log2();
            if best.is_none_or(|(l, _, _)| length > l) {
                best = Some((length, r_ot, c));
            }
        }
        let (length, r_ot, c) = best.expect("non-empty epsilon grid");
        let ell = if length >= 1.0 {
            length.floor() as u64
        } else {
            0
        };
        RateResult {
            ell,
            r_ot,
            lambda: c.lambda,
            eps_1: c.eps_1,
            eps_2: c.eps_2,
            eps_alpha_cut: self.eps_alpha_cut,
            feasible: ell >= 1,
            truncated_bound: self.truncated,
        }
    }

    /// True if no grid point remains (every `ε₁` at or below the cutoff penalty).
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

pub fn secure_length(inputs: &RateInputs) -> Result<RateResult, RateError> {
    let table = LambdaTable::build(inputs)?;
    if table.is_empty() {
        return Err(RateError::InfeasibleBudget {
            eps_alpha_cut: table.eps_alpha_cut,
            eps_a: inputs.eps_a,
        });
    }
    Ok(table.evaluate(inputs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub nu: f64,
    pub eta: f64,
    pub feasible: bool,
    pub ell: u64,
}

/// Feasibility over a `(ν, η)` grid, row-major in `nu_grid`.
pub fn security_region(
    base: &RateInputs,
    nu_grid: &[f64],
    eta_grid: &[f64],
) -> Result<Vec<RegionCell>, RateError> {
    let table = LambdaTable::build(base)?;
    let mut cells = Vec::with_capacity(nu_grid.len() * eta_grid.len());
    for &nu in nu_grid {
        for &eta in eta_grid {
            let mut inputs = *base;
            inputs.mem.nu = nu;
            inputs.mem.eta = eta;
            let r = table.evaluate(&inputs);
            cells.push(RegionCell {
                nu,
                eta,
                feasible: r.feasible,
                ell: r.ell,
            });
        }
    }
    Ok(cells)
}

/// A joint distribution of two strings `(Z₀, Z₁)` over `2^bits0 × 2^bits1`
/// outcomes, stored row-major in `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub size0: usize,
    pub size1: usize,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingCheck {
    pub h_min_joint: f64,
    pub h_min_split: f64,
    pub holds: bool,
}

impl JointDistribution {
    pub fn at(&self, z0: usize, z1: usize) -> f64 {
        self.p[z0 * self.size1 + z1]
    }

    pub fn h_min(&self) -> f64 {
        -self.p.iter().cloned().fold(0.0, f64::max).log2()
    }

    /// Exhibits a choice `D(z₀, z₁)` with `H_min(Z_D | D) ≥ ½ H_min(Z₀Z₁) − 1`
    /// and evaluates both sides exactly.
    ///
    /// `D = 1` iff `P(Z₁ = z₁) ≤ 2^{−h/2}`: then every `Z₁` value guessed under
    /// `D = 1` has probability at most `2^{−h/2}`, and under `D = 0` each `z₀`
    /// pairs with fewer than `2^{h/2}` heavy `z₁`, each of probability at most `2^{−h}`.
    pub fn splitting_check(&self) -> SplittingCheck {
        let h = self.h_min();
        let threshold = (-h / 2.0).exp2();
        let marginal1: Vec<f64> = (0..self.size1)
            .map(|z1| (0..self.size0).map(|z0| self.at(z0, z1)).sum())
            .collect();
        let light: Vec<bool> = marginal1.iter().map(|&m| m <= threshold).collect();
        // max_z P(Z_D = z, D = d), summed over d.
        let guess_d0 = (0..self.size0)
            .map(|z0| {
                (0..self.size1)
                    .filter(|&z1| !light[z1])
                    .map(|z1| self.at(z0, z1))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let guess_d1 = (0..self.size1)
            .filter(|&z1| light[z1])
            .map(|z1| marginal1[z1])
            .fold(0.0, f64::max);
        let h_min_split = -(guess_d0 + guess_d1).log2();
        SplittingCheck {
            h_min_joint: h,
            h_min_split,
            holds: h_min_split >= h / 2.0 - 1.0 - 1e-12,
        }
    }
}
