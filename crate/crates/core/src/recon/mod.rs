//! One-way information reconciliation.
//!
//! Of each 10-bit symbol the 4 least significant bits are disclosed in plain;
//! the upper 6 bits form a GF(64) word whose syndrome under a column-weight-2
//! LDPC code is disclosed. Bob decodes with belief propagation using his
//! continuous outcomes as side information.

pub mod code;
pub mod decode;
pub mod gf64;

use thiserror::Error;

use crate::gauss::{conditional_symbol_entropy, symbol_entropy};
use crate::params::DiscretizationScheme;
use crate::stats::normal_interval;

pub use code::LdpcCode;
pub use decode::{decode, DecodeOutcome, DecoderConfig, Dist};

pub const LOW_BITS: u32 = 4;
pub const HIGH_BITS: u32 = 6;
pub const SYMBOL_BITS: u32 = LOW_BITS + HIGH_BITS;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReconError {
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),
    #[error("code construction failed: {0}")]
    ConstructionFailed(String),
    #[error("malformed code file: {0}")]
    CodeFile(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("symbol {0} outside 1..=1024")]
    SymbolRange(u32),
    #[error(
        "belief propagation found no word matching the syndrome after {iterations} iterations"
    )]
    DecodeFailure { iterations: usize },
}

/// Splits 1-based 10-bit symbols into the planes of the 0-based value `k − 1`.
pub fn split_planes(symbols: &[u32]) -> Result<(Vec<u8>, Vec<u8>), ReconError> {
    let mut low = Vec::with_capacity(symbols.len());
    let mut high = Vec::with_capacity(symbols.len());
    for &k in symbols {
        if !(1..=1 << SYMBOL_BITS).contains(&k) {
            return Err(ReconError::SymbolRange(k));
        }
        let v = k - 1;
        low.push((v & 0xf) as u8);
        high.push((v >> LOW_BITS) as u8);
    }
    Ok((low, high))
}

pub fn recombine_planes(low: &[u8], high: &[u8]) -> Vec<u32> {
    low.iter()
        .zip(high)
        .map(|(&l, &h)| ((h as u32) << LOW_BITS | l as u32) + 1)
        .collect()
}

/// Disclosed bits per symbol: 4 plain bits plus 6 bits per syndrome symbol.
pub fn leakage_rate(code: &LdpcCode) -> f64 {
    leakage_for_counts(code.n(), code.m())
}

fn leakage_for_counts(n: usize, m: usize) -> f64 {
    // Ratio of exact integers, so e.g. (n, m) = (10^4, 600) gives 4.36 to the last bit.
    (LOW_BITS as usize * n + HIGH_BITS as usize * m) as f64 / n as f64
}

/// Leakage of an ideal rate-`rate` code: `4 + 6(1 − R)`.
pub fn leakage_for_rate(rate: f64) -> f64 {
    LOW_BITS as f64 + HIGH_BITS as f64 * (1.0 - rate)
}

/// Reconciliation efficiency `β = (H(Z) − r_ec) / I(Z;Y)` with
/// `I(Z;Y) = H(Z) − H(Z|Y)`.
pub fn efficiency(r_ec: f64, h_z: f64, h_z_given_y: f64) -> f64 {
    (h_z - r_ec) / (h_z - h_z_given_y)
}

/// Efficiency for Alice's marginal `sigma_a` and correlation `rho`.
pub fn efficiency_for_source(
    r_ec: f64,
    sigma_a: f64,
    rho: f64,
    scheme: &DiscretizationScheme,
) -> f64 {
    efficiency(
        r_ec,
        symbol_entropy(sigma_a, scheme),
        conditional_symbol_entropy(sigma_a, rho, scheme),
    )
}

/// Leakage a reconciliation of efficiency `beta` needs for the given source.
pub fn leakage_for_efficiency(
    beta: f64,
    sigma_a: f64,
    rho: f64,
    scheme: &DiscretizationScheme,
) -> f64 {
    let h = symbol_entropy(sigma_a, scheme);
    h - beta * (h - conditional_symbol_entropy(sigma_a, rho, scheme))
}

/// Code rate with leakage `leakage_for_efficiency(beta, …)`, clamped to the
/// constructible range `[0.5, 0.99]`.
pub fn code_rate_for_efficiency(
    beta: f64,
    sigma_a: f64,
    rho: f64,
    scheme: &DiscretizationScheme,
) -> f64 {
    let r_ec = leakage_for_efficiency(beta, sigma_a, rho, scheme);
    (1.0 - (r_ec - LOW_BITS as f64) / HIGH_BITS as f64).clamp(0.5, 0.99)
}

/// Bob's model of Alice's outcome given his rescaled outcome `y`:
/// `X | Y=y ~ N(κy, s²)` with `κ = ρσ_A/σ_B` and `s = σ_A√(1−ρ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub rho: f64,
}

impl NoiseModel {
    pub fn kappa(&self) -> f64 {
        self.rho * self.sigma_a / self.sigma_b
    }

    pub fn conditional_sd(&self) -> f64 {
        self.sigma_a * (1.0 - self.rho * self.rho).sqrt()
    }
}

/// Bob's side information for one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SideInfo<'a> {
    /// Continuous rescaled outcomes.
    Continuous(&'a [f64]),
    /// Bin centres of Bob's own discretized outcomes; adds the uniform
    /// quantization variance `κ²δ²/12`.
    BinCenters(&'a [f64]),
}

/// Priors on Alice's high plane given Bob's side information and her
/// disclosed low plane. Padding positions beyond the frame get a point mass
/// on 0.
pub fn channel_priors(
    scheme: &DiscretizationScheme,
    noise: &NoiseModel,
    side: SideInfo<'_>,
    low: &[u8],
    block_len: usize,
) -> Result<Vec<Dist>, ReconError> {
    let (ys, quantized) = match side {
        SideInfo::Continuous(y) => (y, false),
        SideInfo::BinCenters(y) => (y, true),
    };
    if ys.len() != low.len() {
        return Err(ReconError::LengthMismatch {
            expected: low.len(),
            got: ys.len(),
        });
    }
    if ys.len() > block_len {
        return Err(ReconError::LengthMismatch {
            expected: block_len,
            got: ys.len(),
        });
    }
    let kappa = noise.kappa();
    let mut var = noise.conditional_sd().powi(2);
    if quantized {
        var += kappa * kappa * scheme.delta * scheme.delta / 12.0;
    }
    let sd = var.sqrt();
    let plane = 1u32 << LOW_BITS;
    let mut priors = Vec::with_capacity(block_len);
    for (&y, &l) in ys.iter().zip(low) {
        let mean = kappa * y;
        let mut p = [0.0; gf64::Q];
        // High-plane values whose bins lie within 12 sd of the mean.
        let lo_k = crate::gauss::discretize(mean - 12.0 * sd, scheme);
        let hi_k = crate::gauss::discretize(mean + 12.0 * sd, scheme);
        for a in ((lo_k - 1) / plane)..=((hi_k - 1) / plane) {
            let k = a * plane + l as u32 + 1;
            let (lo, hi) = scheme.bin_edges(k);
            p[a as usize] = normal_interval(mean, sd, lo, hi);
        }
        if p.iter().all(|&x| x == 0.0) {
            // Far outside the modelled range: fall back to the nearest bin.
            let a = (crate::gauss::discretize(mean, scheme) - 1) / plane;
            p[a as usize] = 1.0;
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x = (*x / total).max(1e-30));
        priors.push(p);
    }
    let mut pad = [0.0; gf64::Q];
    pad[0] = 1.0;
    priors.resize(block_len, pad);
    Ok(priors)
}

/// Alice's side: the disclosed low plane and the syndrome of the zero-padded high plane.
pub fn encode_frame(code: &LdpcCode, symbols: &[u32]) -> Result<(Vec<u8>, Vec<u8>), ReconError> {
    if symbols.len() > code.n() {
        return Err(ReconError::LengthMismatch {
            expected: code.n(),
            got: symbols.len(),
        });
    }
    let (low, mut high) = split_planes(symbols)?;
    high.resize(code.n(), 0);
    Ok((low, code.syndrome(&high)?))
}

/// Bob's side: recovers Alice's symbols from the disclosed planes.
pub fn decode_frame(
    code: &LdpcCode,
    scheme: &DiscretizationScheme,
    noise: &NoiseModel,
    side: SideInfo<'_>,
    low: &[u8],
    syndrome: &[u8],
    cfg: &DecoderConfig,
) -> Result<(Vec<u32>, usize), ReconError> {
    let priors = channel_priors(scheme, noise, side, low, code.n())?;
    let out = decode(code, &priors, syndrome, cfg)?;
    Ok((
        recombine_planes(low, &out.word[..low.len()]),
        out.iterations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::discretize;
    use crate::rng::SeededRng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn scheme() -> DiscretizationScheme {
        DiscretizationScheme::from_shot_noise_units(0.1, 10)
    }

    /// Alice's symbols and Bob's outcomes for a bivariate normal with equal
    /// marginals `sigma` and correlation `rho`.
    fn frame(rng: &mut SeededRng, n: usize, sigma: f64, rho: f64) -> (Vec<u32>, Vec<f64>) {
        let s = scheme();
        (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let x = sigma * a;
                let y = sigma * (rho * a + (1.0 - rho * rho).sqrt() * b);
                (discretize(x, &s), y)
            })
            .unzip()
    }

    fn frame_errors(n: usize, rate: f64, rho: f64, frames: usize, seed: u64) -> usize {
        let code = LdpcCode::build(n, rate, seed).unwrap();
        let sigma = 4.838 * crate::params::SHOT_NOISE_TO_NATURAL;
        let noise = NoiseModel {
            sigma_a: sigma,
            sigma_b: sigma,
            rho,
        };
        let mut rng = SeededRng::new(seed, 77);
        (0..frames)
            .filter(|_| {
                let (z, y) = frame(&mut rng, n, sigma, rho);
                let (low, syn) = encode_frame(&code, &z).unwrap();
                match decode_frame(
                    &code,
                    &scheme(),
                    &noise,
                    SideInfo::Continuous(&y),
                    &low,
                    &syn,
                    &DecoderConfig::default(),
                ) {
                    Ok((zz, _)) => {
                        // Soundness: any returned word matches the syndrome.
                        assert_eq!(encode_frame(&code, &zz).unwrap().1, syn);
                        zz != z
                    }
                    Err(_) => true,
                }
            })
            .count()
    }

    #[test]
    fn plane_examples() {
        assert_eq!(split_planes(&[512]).unwrap(), (vec![15], vec![31]));
        assert_eq!(split_planes(&[1]).unwrap(), (vec![0], vec![0]));
        let all: Vec<u32> = (1..=1024).collect();
        let (l, h) = split_planes(&all).unwrap();
        assert_eq!(recombine_planes(&l, &h), all);
        assert!(split_planes(&[0]).is_err() && split_planes(&[1025]).is_err());
    }

    #[test]
    fn leakage_examples() {
        assert_eq!(leakage_for_rate(0.94), 4.36);
        assert!((leakage_for_rate(0.85) - 4.90).abs() < 1e-12);
        assert_eq!(leakage_for_rate(1.0), 4.0);
        let code = LdpcCode::build(10_000, 0.94, 1).unwrap();
        assert_eq!(leakage_rate(&code), 4.36);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency(2.0, 7.0, 2.0), 1.0);
        assert_eq!(efficiency(7.0, 7.0, 2.0), 0.0);
        // First row of the experiment's code table: σ_A = 4.838, ρ = 0.996, R = 0.94.
        let beta = efficiency_for_source(4.36, 4.838 / 2f64.sqrt(), 0.996, &scheme());
        assert!((beta - 0.942).abs() < 0.01, "beta = {beta}");
    }

    #[test]
    fn efficiency_round_trip() {
        let sigma = 3.4;
        let r = leakage_for_efficiency(0.93, sigma, 0.995, &scheme());
        assert!((efficiency_for_source(r, sigma, 0.995, &scheme()) - 0.93).abs() < 1e-12);
    }

    #[test]
    fn noiseless_decodes_immediately() {
        let code = LdpcCode::build(1000, 0.9, 1).unwrap();
        let mut rng = SeededRng::new(3, 1);
        let sigma = 3.0;
        let s = scheme();
        let x: Vec<f64> = (0..1000)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let z: Vec<u32> = x.iter().map(|&v| discretize(v, &s)).collect();
        let noise = NoiseModel {
            sigma_a: sigma,
            sigma_b: sigma,
            rho: 0.999_999,
        };
        let (low, syn) = encode_frame(&code, &z).unwrap();
        let (zz, it) = decode_frame(
            &code,
            &s,
            &noise,
            SideInfo::Continuous(&x),
            &low,
            &syn,
            &DecoderConfig::default(),
        )
        .unwrap();
        assert_eq!(zz, z);
        assert!(it <= 2);
    }

    #[test]
    fn short_frames_are_padded() {
        let code = LdpcCode::build(500, 0.8, 2).unwrap();
        let mut rng = SeededRng::new(4, 1);
        let sigma = 3.4;
        let (z, y) = frame(&mut rng, 300, sigma, 0.996);
        let noise = NoiseModel {
            sigma_a: sigma,
            sigma_b: sigma,
            rho: 0.996,
        };
        let (low, syn) = encode_frame(&code, &z).unwrap();
        let (zz, _) = decode_frame(
            &code,
            &scheme(),
            &noise,
            SideInfo::Continuous(&y),
            &low,
            &syn,
            &DecoderConfig::default(),
        )
        .unwrap();
        assert_eq!(zz, z);
    }

    #[test]
    fn bin_center_side_info_decodes() {
        let s = scheme();
        let code = LdpcCode::build(2000, 0.9, 5).unwrap();
        let mut rng = SeededRng::new(6, 1);
        let sigma = 3.4;
        let (z, y) = frame(&mut rng, 2000, sigma, 0.996);
        let centres: Vec<f64> = y.iter().map(|&v| s.bin_center(discretize(v, &s))).collect();
        let noise = NoiseModel {
            sigma_a: sigma,
            sigma_b: sigma,
            rho: 0.996,
        };
        let (low, syn) = encode_frame(&code, &z).unwrap();
        let (zz, _) = decode_frame(
            &code,
            &s,
            &noise,
            SideInfo::BinCenters(&centres),
            &low,
            &syn,
            &DecoderConfig::default(),
        )
        .unwrap();
        assert_eq!(zz, z);
    }

    #[test]
    fn weak_correlation_fails() {
        // Far beyond capacity: H(Z|Y) at ρ = 0.5 dwarfs the 0.36 syndrome bits.
        assert_eq!(frame_errors(2000, 0.94, 0.5, 20, 11), 20);
    }

    #[test]
    fn fer_monotone_in_correlation() {
        let fer: Vec<usize> = [0.996, 0.99, 0.98]
            .iter()
            .map(|&rho| frame_errors(2000, 0.9, rho, 20, 12))
            .collect();
        assert!(fer[0] <= fer[1] && fer[1] <= fer[2], "{fer:?}");
    }
}
