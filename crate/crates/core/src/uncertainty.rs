//! Smooth min-entropy uncertainty bounds for discretized position/momentum
//! measurements, per encoding class of a dishonest receiver.
//!
//! Rényi bounds `B^α` are per mode; `n` modes add. A lower bound on the
//! smooth min-entropy rate follows from
//! `λ^ε = sup_{1<α≤2} B^α − log2(2/ε²) / (n(α−1))`.

use std::f64::consts::{E, LN_2, PI};

use thiserror::Error;

use crate::params::HBAR;
use crate::stats::normal_interval;

/// Maximum length of a majorizing sequence.
pub const SEQUENCE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum UncertaintyError {
    /// The partial sums did not reach 2 within the cap. The truncated sequence
    /// still yields a valid (looser) bound.
    #[error("majorizing sequence for delta = {} did not converge within {} terms", .0.delta, .0.w.len())]
    CapExceeded(MajorizingSequence),
}

/// Landau–Pollak overlap of intervals of length `a` (position) and `b`
/// (momentum), in the small-argument approximation `ab / 2πħ`, capped at 1.
pub fn gamma_lp(a: f64, b: f64) -> f64 {
    (a * b / (2.0 * PI * HBAR)).min(1.0)
}

/// Upper bound on the momentum-interval probability `p[J]` given the
/// position-interval probability `q`.
pub fn landau_pollak_g(q: f64, a: f64, b: f64) -> f64 {
    let gamma = gamma_lp(a, b);
    if q <= gamma {
        return 1.0;
    }
    ((q * gamma).sqrt() + ((1.0 - q) * (1.0 - gamma)).sqrt()).powi(2)
}

/// `F_k = max_{1≤j≤k} √γ(jδ, (k−j)δ)`, attained at `j = ⌊k/2⌋`.
pub fn f_term(k: usize, delta: f64) -> f64 {
    let j = (k / 2) as f64;
    gamma_lp(j * delta, (k as f64 - j) * delta).sqrt()
}

/// `F_1 .. F_len`.
pub fn f_sequence(delta: f64, len: usize) -> Vec<f64> {
    (1..=len).map(|k| f_term(k, delta)).collect()
}

/// How the sequence increments are derived from `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recursion {
    /// `w_1 = 1, w_k = F_k − F_{k−1}`, so the partial sums are `1 + F_k`.
    #[default]
    PartialSums,
    /// `w_k = F_k − w_{k−1}`, kept only for comparison: its increments
    /// alternate, so the partial sums drift away from `1 + F_k`. Negative
    /// increments are clamped to 0.
    Alternating,
}

/// Nonincreasing sequence `w` whose partial sums dominate those of the merged
/// and sorted position and momentum bin probabilities of every state.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorizingSequence {
    pub w: Vec<f64>,
    pub delta: f64,
    pub truncated: bool,
}

impl MajorizingSequence {
    pub fn new(delta: f64) -> Result<Self, UncertaintyError> {
        Self::build(delta, Recursion::PartialSums, SEQUENCE_CAP)
    }

    pub fn build(delta: f64, recursion: Recursion, cap: usize) -> Result<Self, UncertaintyError> {
        let mut w = vec![1.0];
        let mut f_prev = 0.0;
        let mut done = false;
        for k in 2..=cap {
            let f = f_term(k, delta);
            let next = match recursion {
                Recursion::PartialSums => f - f_prev,
                Recursion::Alternating => (f - w[w.len() - 1]).max(0.0),
            };
            w.push(next);
            f_prev = f;
            if f >= 1.0 - 1e-9 {
                done = true;
                break;
            }
        }
        w.sort_by(|a, b| b.total_cmp(a));
        let seq = Self {
            w,
            delta,
            truncated: !done,
        };
        if done {
            Ok(seq)
        } else {
            Err(UncertaintyError::CapExceeded(seq))
        }
    }

    /// `½ Σ w_k^α`.
    pub fn half_power_sum(&self, alpha: f64) -> f64 {
        0.5 * self
            .w
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|x| x.powf(alpha))
            .sum::<f64>()
    }
}

/// A per-mode Rényi-entropy lower bound as a function of `α ∈ (1, 2]`.
pub trait RenyiBound {
    fn bound(&self, alpha: f64) -> f64;
}

/// Bound valid for arbitrary states, from the majorizing sequence.
///
/// Since `x ↦ x^α` is convex and increasing, weak majorization of the sorted
/// bin probabilities `r` by `w` gives `Σ r^α ≤ Σ w^α`, hence the bound.
#[derive(Debug, Clone)]
pub struct MajorizationBound(pub MajorizingSequence);

impl RenyiBound for MajorizationBound {
    fn bound(&self, alpha: f64) -> f64 {
        renyi_from_power_sum(self.0.half_power_sum(alpha), alpha)
    }
}

/// Bound valid for Gaussian states.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBound {
    pub delta: f64,
}

impl RenyiBound for GaussianBound {
    fn bound(&self, alpha: f64) -> f64 {
        renyi_bound_gauss(alpha, self.delta)
    }
}

fn renyi_from_power_sum(s: f64, alpha: f64) -> f64 {
    (s.log2() / (1.0 - alpha)).max(0.0)
}

pub fn renyi_bound_maj(alpha: f64, seq: &MajorizingSequence) -> f64 {
    MajorizationBound(seq.clone()).bound(alpha)
}

/// `log2(½(1 + (δ²/πħ)^(α−1) / α)) / (1−α)`, clamped at 0.
pub fn renyi_bound_gauss(alpha: f64, delta: f64) -> f64 {
    let am1 = alpha - 1.0;
    let t = am1 * (delta * delta / (PI * HBAR)).ln();
    // ½(1 + e^t/α) − 1 = (expm1(t) − (α−1)) / 2α, accurate as α → 1.
    let excess = (t.exp_m1() - am1) / (2.0 * alpha);
    (excess.ln_1p() / LN_2 / (1.0 - alpha)).max(0.0)
}

/// Penalty `log2(2/ε²) / (n(α−1))` of the smoothing step.
fn penalty(alpha: f64, n: f64, eps: f64) -> f64 {
    (2.0 / (eps * eps)).log2() / (n * (alpha - 1.0))
}

/// `λ^ε(n)` and the maximizing `α`.
pub fn lambda_from_renyi(bound: &dyn RenyiBound, n: f64, eps: f64) -> (f64, f64) {
    let objective = |a: f64| bound.bound(a) - penalty(a, n, eps);
    const GRID: usize = 200;
    let grid: Vec<f64> = (1..=GRID).map(|i| 1.0 + i as f64 / GRID as f64).collect();
    let (best_i, _) = grid.iter().map(|&a| objective(a)).enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
    );
    let lo = if best_i == 0 {
        1.0 + 1e-15
    } else {
        grid[best_i - 1]
    };
    let hi = grid[(best_i + 1).min(GRID - 1)];
    let alpha = golden_max(&objective, lo, hi, 1e-6);
    // Golden section may miss a kink at the grid point; keep the better one.
    let (value, alpha) = [
        (objective(alpha), alpha),
        (objective(grid[best_i]), grid[best_i]),
    ]
    .into_iter()
    .fold(
        (f64::NEG_INFINITY, 2.0),
        |acc, c| if c.0 > acc.0 { c } else { acc },
    );
    (value.max(0.0), alpha)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `H_½` of a centred normal with standard deviation `sigma` binned on the
/// lattice `kδ`, in bits.
pub fn h_half(sigma: f64, delta: f64) -> f64 {
    // 8.5σ each side leaves less than 1e-16 of mass outside.
    let k_max = (8.5 * sigma / delta).ceil() as i64 + 1;
    let total: f64 = (-k_max..k_max)
        .map(|k| {
            let lo = if k == -k_max {
                f64::NEG_INFINITY
            } else {
                k as f64 * delta
            };
            let hi = if k == k_max - 1 {
                f64::INFINITY
            } else {
                (k + 1) as f64 * delta
            };
            normal_interval(0.0, sigma, lo, hi).sqrt()
        })
        .sum();
    2.0 * total.log2()
}

/// Reading of the finite-size correction term of the IID bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IidCorrection {
    /// `log2(η²) = 2 log2 η`.
    #[default]
    LogOfSquare,
    /// `(log2 η)²`; far more pessimistic, kept for comparison.
    SquaredLog,
}

/// Bound for encodings that are IID over blocks of `block` modes.
pub fn lambda_iid(
    delta: f64,
    n: f64,
    block: u32,
    eps: f64,
    sigma_a: f64,
    correction: IidCorrection,
) -> f64 {
    let m = block as f64;
    let n = (n / m).floor() * m;
    if n < m {
        return 0.0;
    }
    let shannon = 0.5 * (E * PI * HBAR / (delta * delta)).log2();
    let h = m * h_half(sigma_a, delta);
    // log2(2 + 2^h) without overflow.
    let log_eta = if h > 1.0 {
        h + (1.0 + 2f64.powf(1.0 - h)).log2()
    } else {
        (2.0 + 2f64.powf(h)).log2()
    };
    let corr = match correction {
        IidCorrection::LogOfSquare => 2.0 * log_eta,
        IidCorrection::SquaredLog => log_eta * log_eta,
    };
    let value = shannon - 4.0 * (m / n).sqrt() * corr * (2.0 / (eps * eps)).log2().sqrt();
    value.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Bin probabilities of a centred normal on the lattice `kδ`.
    fn binned(sigma: f64, delta: f64) -> Vec<f64> {
        let k = (40.0 * sigma / delta).ceil() as i64 + 2;
        (-k..k)
            .map(|i| normal_interval(0.0, sigma, i as f64 * delta, (i + 1) as f64 * delta))
            .collect()
    }

    fn random_state(rng: &mut SeededRng) -> (f64, f64) {
        let sx = (rng.random_range(0.02f64.ln()..50f64.ln())).exp();
        let sp = 0.5 / sx * rng.random_range(0.0f64..1.0).exp();
        (sx, sp)
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_lp(0.0, 3.0), 0.0);
        assert!((gamma_lp(0.1, 0.1) - 1.5915494309189535e-3).abs() < 1e-15);
        assert_eq!(gamma_lp(10.0, 10.0), 1.0);
    }

    #[test]
    fn landau_pollak_examples() {
        // Junction continuity at q = γ.
        let (a, b) = (1.0, 1.0);
        let gamma = gamma_lp(a, b);
        assert!((landau_pollak_g(gamma + 1e-15, a, b) - 1.0).abs() < 1e-12);
        assert!((landau_pollak_g(1.0, 1.0, 2.0 * PI * 0.25) - 0.25).abs() < 1e-15);
        let g = landau_pollak_g(0.9, a, b);
        assert!(0.9 + g <= 1.0 + gamma.sqrt());
    }

    #[test]
    fn f_examples() {
        for d in [0.1, 1.0, 10.0] {
            let f = f_sequence(d, 64);
            assert_eq!(f[0], 0.0);
            assert!(f[3] >= f[2]);
            for k in 1..=64usize {
                let explicit = (1..=k)
                    .map(|j| gamma_lp(j as f64 * d, (k - j) as f64 * d).sqrt())
                    .fold(0.0, f64::max);
                assert!((f[k - 1] - explicit).abs() < 1e-15, "k = {k}, delta = {d}");
            }
            assert!(f.windows(2).all(|p| p[1] >= p[0]));
        }
        assert!((f_term(2, 1.0) - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn sequence_examples() {
        let big = MajorizingSequence::new(10.0).unwrap();
        assert_eq!(big.w, vec![1.0, 1.0]);
        let one = MajorizingSequence::new(1.0).unwrap();
        assert_eq!(one.w[0], 1.0);
        assert!((one.w[1] - 0.3989422804014327).abs() < 1e-15);
        for d in [0.05, 0.1, 0.5, 1.0, 2.0] {
            let s = MajorizingSequence::new(d).unwrap();
            assert!(s.w.windows(2).all(|p| p[0] >= p[1]));
            assert!((s.w.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        }
        assert!(matches!(
            MajorizingSequence::build(1e-3, Recursion::PartialSums, 100),
            Err(UncertaintyError::CapExceeded(s)) if s.truncated
        ));
    }

    #[test]
    fn alternating_recursion_breaks_contract() {
        let s = MajorizingSequence::build(0.5, Recursion::Alternating, SEQUENCE_CAP).unwrap();
        let fixed = MajorizingSequence::new(0.5).unwrap();
        assert_ne!(s.w, fixed.w);
        // Sorted partial sums of the fixed sequence dominate 1 + F_k and end at 2;
        // the alternating one overshoots the total mass.
        let mut acc = 0.0;
        for (i, w) in fixed.w.iter().enumerate() {
            acc += w;
            assert!(acc >= 1.0 + f_term(i + 1, 0.5) - 1e-9);
        }
        assert!((acc - 2.0).abs() < 1e-9);
        assert!(s.w.iter().sum::<f64>() > 2.5);
    }

    #[test]
    fn weak_majorization_oracle() {
        let mut rng = SeededRng::new(7, 99);
        for d in [0.05, 0.1, 0.5, 1.0, 2.0] {
            let seq = MajorizingSequence::new(d).unwrap();
            let mut w_cum = 0.0;
            let w_partial: Vec<f64> = seq
                .w
                .iter()
                .map(|x| {
                    w_cum += x;
                    w_cum
                })
                .collect();
            for _ in 0..10 {
                let (sx, sp) = random_state(&mut rng);
                let mut r: Vec<f64> = binned(sx, d).into_iter().chain(binned(sp, d)).collect();
                r.sort_by(|a, b| b.total_cmp(a));
                let mut r_cum = 0.0;
                for (k, x) in r.iter().enumerate() {
                    r_cum += x;
                    let wk = w_partial[k.min(w_partial.len() - 1)];
                    assert!(r_cum <= wk + 1e-12, "delta {d} k {k}: {r_cum} > {wk}");
                }
            }
        }
    }

    #[test]
    fn renyi_oracles_on_random_states() {
        let mut rng = SeededRng::new(8, 99);
        for _ in 0..50 {
            let d = rng.random_range(0.05f64.ln()..2f64.ln()).exp();
            let alpha = rng.random_range(1.001..2.0);
            let (sx, sp) = random_state(&mut rng);
            let x = binned(sx, d);
            let p = binned(sp, d);
            let half_sum = 0.5
                * (x.iter().map(|v| v.powf(alpha)).sum::<f64>()
                    + p.iter().map(|v| v.powf(alpha)).sum::<f64>());
            let h = half_sum.log2() / (1.0 - alpha);
            assert!(h >= renyi_bound_gauss(alpha, d) - 1e-9);
            let seq = MajorizingSequence::new(d).unwrap();
            assert!(half_sum <= seq.half_power_sum(alpha) + 1e-12);
            assert!(h >= renyi_bound_maj(alpha, &seq) - 1e-9);
        }
    }

    #[test]
    fn renyi_examples() {
        assert_eq!(
            renyi_bound_maj(1.5, &MajorizingSequence::new(10.0).unwrap()),
            0.0
        );
        let b2 = renyi_bound_maj(2.0, &MajorizingSequence::new(1.0).unwrap());
        let w = MajorizingSequence::new(1.0).unwrap().w;
        let direct = -(0.5 * w.iter().map(|x| x * x).sum::<f64>()).log2();
        assert!(b2 > 0.0 && (b2 - direct).abs() < 1e-12);
        let expected = -(0.5 * (1.0 + 0.5 * (0.01 / PI))).log2();
        assert!((renyi_bound_gauss(2.0, 0.1) - expected).abs() < 1e-12);
        assert!((renyi_bound_gauss(2.0, 0.1) - 0.99770).abs() < 1e-5);
        assert_eq!(renyi_bound_gauss(1.5, 100.0), 0.0);
        let seq = MajorizingSequence::new(0.1).unwrap();
        assert!(renyi_bound_maj(2.0, &seq) <= renyi_bound_gauss(2.0, 0.1));
    }

    #[test]
    fn gauss_bound_stable_near_one() {
        // The naive form loses every digit this close to α = 1.
        let a = renyi_bound_gauss(1.0 + 1e-12, 0.1);
        let b = renyi_bound_gauss(1.0 + 1e-7, 0.1);
        assert!(a.is_finite() && (a - b).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn gauss_bound_monotone_in_delta(alpha in 1.001f64..2.0, d1 in 0.01f64..3.0, d2 in 0.01f64..3.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(renyi_bound_gauss(alpha, lo) >= renyi_bound_gauss(alpha, hi) - 1e-12);
        }

        #[test]
        fn lambda_monotone_in_n_and_eps(n1 in 1e3f64..1e9, n2 in 1e3f64..1e9, e1 in -12.0f64..-1.0, e2 in -12.0f64..-1.0) {
            let b = GaussianBound { delta: 0.1 };
            let (nlo, nhi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
            let (elo, ehi) = if e1 <= e2 { (10f64.powf(e1), 10f64.powf(e2)) } else { (10f64.powf(e2), 10f64.powf(e1)) };
            prop_assert!(lambda_from_renyi(&b, nhi, elo).0 >= lambda_from_renyi(&b, nlo, elo).0 - 1e-9);
            prop_assert!(lambda_from_renyi(&b, nlo, ehi).0 >= lambda_from_renyi(&b, nlo, elo).0 - 1e-9);
        }
    }

    #[test]
    fn lambda_limits() {
        let b = GaussianBound { delta: 0.1 };
        let (big, alpha) = lambda_from_renyi(&b, 1e30, 1e-8);
        assert!(alpha < 1.0 + 1e-5);
        assert!((big - renyi_bound_gauss(1.0 + 1e-12, 0.1)).abs() < 1e-5);
        let (l, _) = lambda_from_renyi(&b, 2e5, 1e-8);
        assert!(l > 0.0 && l < big);
        assert_eq!(lambda_from_renyi(&b, 1.0, 1e-8).0, 0.0);
        // ε = 1: penalty 1/(n(α−1)) bits, only the total is floored.
        let (l1, _) = lambda_from_renyi(&b, 1e6, 1.0);
        assert!(l1 > l);
    }

    #[test]
    fn lambda_matches_dense_scan() {
        let seq = MajorizingSequence::new(0.2).unwrap();
        for (bound, n) in [
            (&GaussianBound { delta: 0.1 } as &dyn RenyiBound, 2e5),
            (&MajorizationBound(seq) as &dyn RenyiBound, 1e8),
        ] {
            let (l, _) = lambda_from_renyi(bound, n, 1e-8);
            let dense = (1..=200_000)
                .map(|i| {
                    let a = 1.0 + i as f64 / 200_000.0;
                    bound.bound(a) - penalty(a, n, 1e-8)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(l >= dense - 1e-9 && l <= dense + 1e-6, "{l} vs {dense}");
        }
    }

    #[test]
    fn iid_examples() {
        let first = 0.5 * (E * PI / 0.01).log2();
        assert!((first - 4.869_023_680_068_003).abs() < 1e-12);
        let inf = lambda_iid(0.1, 1e40, 10, 1e-8, 3.4, IidCorrection::LogOfSquare);
        assert!((inf - first).abs() < 1e-9);
        // Rounds n down to a multiple of the block length.
        assert_eq!(
            lambda_iid(0.1, 1e8 + 7.0, 10, 1e-8, 3.4, IidCorrection::LogOfSquare),
            lambda_iid(0.1, 1e8, 10, 1e-8, 3.4, IidCorrection::LogOfSquare)
        );
        assert_eq!(
            lambda_iid(0.1, 5.0, 10, 1e-8, 3.4, IidCorrection::LogOfSquare),
            0.0
        );
        assert!(
            lambda_iid(0.1, 1e8, 10, 1e-8, 3.4, IidCorrection::SquaredLog)
                < lambda_iid(0.1, 1e8, 10, 1e-8, 3.4, IidCorrection::LogOfSquare)
        );
    }

    #[test]
    fn h_half_matches_renyi_oracle() {
        // Fine binning: H_½ ≈ ½log2(8πσ²) − log2 δ for a normal density.
        let s = 3.0;
        let approx = 0.5 * (8.0 * PI * s * s).log2() - 0.05f64.log2();
        assert!((h_half(s, 0.05) - approx).abs() < 1e-4);
        // Coarse binning collapses to a couple of bins.
        assert!(h_half(0.01, 1.0) < 1e-3 + 1.0);
    }

    #[test]
    fn lambdas_nonincreasing_in_delta() {
        let deltas: Vec<f64> = (0..=20)
            .map(|i| 0.05 * (40f64).powf(i as f64 / 20.0))
            .collect();
        let mut prev = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for d in deltas {
            let maj = lambda_from_renyi(
                &MajorizationBound(MajorizingSequence::new(d).unwrap()),
                1e8,
                1e-8,
            )
            .0;
            let gauss = lambda_from_renyi(&GaussianBound { delta: d }, 1e8, 1e-8).0;
            let iid = lambda_iid(d, 1e8, 10, 1e-8, 3.42, IidCorrection::LogOfSquare);
            assert!(
                maj <= prev.0 + 1e-9 && gauss <= prev.1 + 1e-9 && iid <= prev.2 + 1e-9,
                "delta {d}"
            );
            prev = (maj, gauss, iid);
        }
    }
}
