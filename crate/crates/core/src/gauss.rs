//! Gaussian model of the EPR source, the lossy channel, homodyne sampling and
//! discretization.
//!
//! Quadratures are ordered `(X_A, P_A, X_B, P_B)`. The source mixes two
//! squeezed vacua on a balanced beam splitter, so X quadratures come out
//! correlated and P quadratures anti-correlated.

use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::params::{DiscretizationScheme, VACUUM_VARIANCE};
use crate::rng::SeededRng;
use crate::stats::{mean_var, normal_interval, pearson, shannon_entropy};

#[derive(Debug, Error)]
pub enum GaussError {
    #[error("invalid source model: {0}")]
    InvalidSource(String),
    #[error("covariance matrix is not physical: {0}")]
    Unphysical(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("malformed dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Two squeezers with quadrature variances `v_sq <= 1/2 <= v_anti`, mixed on a
/// balanced beam splitter; Alice's arm suffers loss `loss_a`, Bob's arm
/// (including the channel) loss `loss_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    pub v_sq: f64,
    pub v_anti: f64,
    pub loss_a: f64,
    pub loss_b: f64,
}

impl SourceModel {
    pub fn new(v_sq: f64, v_anti: f64, loss_a: f64, loss_b: f64) -> Result<Self, GaussError> {
        let src = Self {
            v_sq,
            v_anti,
            loss_a,
            loss_b,
        };
        src.check()?;
        Ok(src)
    }

    /// Pure squeezers with `db` decibels of squeezing relative to vacuum.
    pub fn two_mode_squeezed(db: f64, loss_a: f64, loss_b: f64) -> Result<Self, GaussError> {
        let factor = 10f64.powf(db / 10.0);
        Self::new(
            VACUUM_VARIANCE / factor,
            VACUUM_VARIANCE * factor,
            loss_a,
            loss_b,
        )
    }

    pub fn check(&self) -> Result<(), GaussError> {
        let tol = 1e-12;
        if !(self.v_sq > 0.0 && self.v_sq <= VACUUM_VARIANCE + tol) {
            return Err(GaussError::InvalidSource(format!(
                "v_sq must lie in (0, 1/2], got {}",
                self.v_sq
            )));
        }
        if !(self.v_anti >= VACUUM_VARIANCE - tol) || !self.v_anti.is_finite() {
            return Err(GaussError::InvalidSource(format!(
                "v_anti must be >= 1/2, got {}",
                self.v_anti
            )));
        }
        if self.v_sq * self.v_anti < VACUUM_VARIANCE * VACUUM_VARIANCE - tol {
            return Err(GaussError::InvalidSource(format!(
                "v_sq * v_anti = {} violates the uncertainty bound 1/4",
                self.v_sq * self.v_anti
            )));
        }
        for (name, loss) in [("loss_a", self.loss_a), ("loss_b", self.loss_b)] {
            if !(0.0..1.0).contains(&loss) {
                return Err(GaussError::InvalidSource(format!(
                    "{name} must lie in [0, 1), got {loss}"
                )));
            }
        }
        Ok(())
    }

    /// The same source with an additional loss `mu` on Bob's arm.
    pub fn with_extra_channel_loss(&self, mu: f64) -> Result<Self, GaussError> {
        Self::new(
            self.v_sq,
            self.v_anti,
            self.loss_a,
            1.0 - (1.0 - self.loss_b) * (1.0 - mu),
        )
    }

    /// Solves for `v_anti` and `loss_b` so that Alice's standard deviation is
    /// `sigma_a` and the matched-quadrature correlation is `rho`, with `v_sq`
    /// and `loss_a` held fixed.
    pub fn fit_to_marginals(
        sigma_a: f64,
        rho: f64,
        v_sq: f64,
        loss_a: f64,
    ) -> Result<Self, GaussError> {
        let v_mean = (sigma_a * sigma_a - loss_a * VACUUM_VARIANCE) / (1.0 - loss_a);
        let v_anti = 2.0 * v_mean - v_sq;
        let at = |loss_b: f64| -> Result<f64, GaussError> {
            Ok(epr_covariance(&Self::new(v_sq, v_anti, loss_a, loss_b)?).correlation())
        };
        if at(0.0)? < rho {
            return Err(GaussError::InvalidSource(format!(
                "correlation {rho} unreachable: lossless Bob arm gives {}",
                at(0.0)?
            )));
        }
        let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid)? > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::new(v_sq, v_anti, loss_a, 0.5 * (lo + hi))
    }
}

/// Symmetric 4x4 covariance matrix over `(X_A, P_A, X_B, P_B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(pub [[f64; 4]; 4]);

pub const XA: usize = 0;
pub const PA: usize = 1;
pub const XB: usize = 2;
pub const PB: usize = 3;

impl CovarianceMatrix {
    pub fn vacuum() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = VACUUM_VARIANCE;
        }
        Self(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    /// Alice's larger quadrature standard deviation.
    pub fn sigma_a(&self) -> f64 {
        self.0[XA][XA].max(self.0[PA][PA]).sqrt()
    }

    /// Matched-quadrature correlation of the X quadratures.
    pub fn correlation(&self) -> f64 {
        self.0[XA][XB] / (self.0[XA][XA] * self.0[XB][XB]).sqrt()
    }

    /// Symplectic eigenvalues `(nu_minus, nu_plus)` of the two-mode matrix.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let m = &self.0;
        let det2 = |i: usize, j: usize| m[i][j] * m[i + 1][j + 1] - m[i][j + 1] * m[i + 1][j];
        let delta = det2(0, 0) + det2(2, 2) + 2.0 * det2(0, 2);
        let det = det4(m);
        let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
        (
            ((delta - disc) / 2.0).max(0.0).sqrt(),
            ((delta + disc) / 2.0).sqrt(),
        )
    }

    /// Symmetric, positive definite, and `Γ + (i/2)Ω >= 0`.
    pub fn check_physical(&self) -> Result<(), GaussError> {
        let m = &self.0;
        let scale = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
        let tol = 1e-9 * scale.max(1.0);
        for i in 0..4 {
            for j in 0..i {
                if (m[i][j] - m[j][i]).abs() > tol {
                    return Err(GaussError::Unphysical(format!(
                        "not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        // Sylvester's criterion on the leading minors.
        let minors = [
            m[0][0],
            m[0][0] * m[1][1] - m[0][1] * m[1][0],
            det3(m),
            det4(m),
        ];
        if let Some(k) = minors.iter().position(|&d| d <= 0.0) {
            return Err(GaussError::Unphysical(format!(
                "leading minor {} is not positive",
                k + 1
            )));
        }
        let (nu_minus, _) = self.symplectic_eigenvalues();
        if nu_minus < VACUUM_VARIANCE - 1e-9 {
            return Err(GaussError::Unphysical(format!(
                "smallest symplectic eigenvalue {nu_minus} < 1/2"
            )));
        }
        Ok(())
    }

    /// Text dump: 16 row-major values, one row per line, 17 significant digits.
    pub fn to_text(&self) -> String {
        self.0
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&x| crate::fmt17(x))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    pub fn from_text(text: &str) -> Result<Self, GaussError> {
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| GaussError::Format(format!("{t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != 16 {
            return Err(GaussError::Format(format!(
                "expected 16 values, got {}",
                values.len()
            )));
        }
        let mut m = [[0.0; 4]; 4];
        for (i, v) in values.into_iter().enumerate() {
            m[i / 4][i % 4] = v;
        }
        Ok(Self(m))
    }
}

fn det3(m: &[[f64; 4]; 4]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut det = 0.0;
    for col in 0..4 {
        let mut minor = [[0.0; 4]; 4];
        for r in 1..4 {
            let mut cc = 0;
            for c in 0..4 {
                if c != col {
                    minor[r - 1][cc] = m[r][c];
                    cc += 1;
                }
            }
        }
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][col] * det3(&minor);
    }
    det
}

/// Covariance matrix of the lossy two-mode squeezed state.
pub fn epr_covariance(src: &SourceModel) -> CovarianceMatrix {
    let v_mean = 0.5 * (src.v_sq + src.v_anti);
    let c_mean = 0.5 * (src.v_anti - src.v_sq);
    let var_a = (1.0 - src.loss_a) * v_mean + src.loss_a * VACUUM_VARIANCE;
    let var_b = (1.0 - src.loss_b) * v_mean + src.loss_b * VACUUM_VARIANCE;
    let cov = ((1.0 - src.loss_a) * (1.0 - src.loss_b)).sqrt() * c_mean;
    let mut m = [[0.0; 4]; 4];
    m[XA][XA] = var_a;
    m[PA][PA] = var_a;
    m[XB][XB] = var_b;
    m[PB][PB] = var_b;
    m[XA][XB] = cov;
    m[XB][XA] = cov;
    m[PA][PB] = -cov;
    m[PB][PA] = -cov;
    CovarianceMatrix(m)
}

/// `10 log10` of `[Var(X_A - X_B) + Var(P_A + P_B)]` normalised to its vacuum
/// value. Negative values certify entanglement.
pub fn duan_value(gamma: &CovarianceMatrix) -> f64 {
    let g = &gamma.0;
    let var_x = g[XA][XA] + g[XB][XB] - 2.0 * g[XA][XB];
    let var_p = g[PA][PA] + g[PB][PB] + 2.0 * g[PA][PB];
    10.0 * ((var_x + var_p) / (4.0 * VACUUM_VARIANCE)).log10()
}

/// Entanglement certified by the Duan criterion, in dB (positive when entangled).
pub fn entanglement_db(gamma: &CovarianceMatrix) -> f64 {
    -duan_value(gamma)
}

/// One homodyne measurement round. Bases are 0 for X and 1 for P. Bob's value is
/// already divided by `sqrt(1 - mu)` and sign-flipped for P.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRecord {
    pub basis_a: u8,
    pub basis_b: u8,
    pub value_a: f64,
    pub value_b_rescaled: f64,
}

impl QuadratureRecord {
    pub fn matched(&self) -> bool {
        self.basis_a == self.basis_b
    }
}

/// Bob's honest post-measurement rescaling for channel loss `mu`.
pub fn rescale_bob(raw: f64, basis_b: u8, mu: f64) -> f64 {
    let flipped = if basis_b == 1 { -raw } else { raw };
    flipped / (1.0 - mu).sqrt()
}

/// Samples `n` measurement rounds of the state `gamma`. `channel_loss` is the
/// loss Bob compensates for when rescaling.
pub fn sample_records(
    gamma: &CovarianceMatrix,
    channel_loss: f64,
    n: usize,
    rng: &mut SeededRng,
) -> Vec<QuadratureRecord> {
    let g = &gamma.0;
    (0..n)
        .map(|_| {
            let basis_a = rng.bit() as u8;
            let basis_b = rng.bit() as u8;
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let ia = basis_a as usize;
            let ib = 2 + basis_b as usize;
            let sd_a = g[ia][ia].sqrt();
            let (value_a, raw_b) = if basis_a == basis_b {
                let slope = g[ia][ib] / sd_a;
                let resid = (g[ib][ib] - slope * slope).max(0.0).sqrt();
                (sd_a * z1, slope * z1 + resid * z2)
            } else {
                (sd_a * z1, g[ib][ib].sqrt() * z2)
            };
            QuadratureRecord {
                basis_a,
                basis_b,
                value_a,
                value_b_rescaled: rescale_bob(raw_b, basis_b, channel_loss),
            }
        })
        .collect()
}

/// Symbol in `1..=2^d` of the bin containing `value`; bins are left-open,
/// right-closed and the outermost bins extend to infinity.
pub fn discretize(value: f64, scheme: &DiscretizationScheme) -> u32 {
    // A bin-relative slack of 1e-9 keeps exact bin edges such as 0.0 in the
    // lower bin despite the rounding of (value + alpha_cut) / delta.
    let pos = ((value + scheme.alpha_cut) / scheme.delta - 1e-9).ceil();
    pos.max(1.0).min(scheme.alphabet_size() as f64) as u32
}

/// Minimum over Alice's quadratures of `P(|outcome| <= alpha_cut)`.
pub fn p_within_range(gamma: &CovarianceMatrix, alpha_cut: f64) -> f64 {
    [XA, PA]
        .iter()
        .map(|&i| {
            let sd = gamma.0[i][i].sqrt();
            libm::erf(alpha_cut / (sd * std::f64::consts::SQRT_2))
        })
        .fold(1.0, f64::min)
}

/// Sample estimates from measurement records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmEstimate {
    /// Estimated matrix in Bob's raw (unrescaled, unflipped) frame. The
    /// same-mode X-P covariances are not observable and are reported as 0.
    pub cm: CovarianceMatrix,
    /// Matched-basis Pearson correlation pooled over X and P, after Bob's flip.
    pub rho: f64,
    /// Standard deviation of all of Alice's outcomes.
    pub sigma_a: f64,
}

pub fn estimate_cm(
    records: &[QuadratureRecord],
    channel_loss: f64,
) -> Result<CmEstimate, GaussError> {
    let unscale = (1.0 - channel_loss).sqrt();
    let raw_b = |r: &QuadratureRecord| {
        let v = r.value_b_rescaled * unscale;
        if r.basis_b == 1 {
            -v
        } else {
            v
        }
    };
    let pairs = |ba: u8, bb: u8| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter(|r| r.basis_a == ba && r.basis_b == bb)
            .map(|r| (r.value_a, raw_b(r)))
            .collect()
    };
    let xx = pairs(0, 0);
    let pp = pairs(1, 1);
    let xp = pairs(0, 1);
    let px = pairs(1, 0);
    if xx.len() < 2 || pp.len() < 2 {
        return Err(GaussError::InsufficientData(format!(
            "need >= 2 matched records per quadrature, got {} (X) and {} (P)",
            xx.len(),
            pp.len()
        )));
    }
    let var_of = |ba: Option<u8>, bb: Option<u8>| -> f64 {
        let xs: Vec<f64> = records
            .iter()
            .filter_map(|r| match (ba, bb) {
                (Some(b), _) if r.basis_a == b => Some(r.value_a),
                (_, Some(b)) if r.basis_b == b => Some(raw_b(r)),
                _ => None,
            })
            .collect();
        mean_var(&xs).1
    };
    let mut m = [[0.0; 4]; 4];
    m[XA][XA] = var_of(Some(0), None);
    m[PA][PA] = var_of(Some(1), None);
    m[XB][XB] = var_of(None, Some(0));
    m[PB][PB] = var_of(None, Some(1));
    if (0..4).any(|i| !(m[i][i] > 0.0)) {
        return Err(GaussError::Degenerate("zero quadrature variance".into()));
    }
    let cov = crate::stats::covariance;
    m[XA][XB] = cov(&xx);
    m[PA][PB] = cov(&pp);
    if xp.len() >= 2 {
        m[XA][PB] = cov(&xp);
    }
    if px.len() >= 2 {
        m[PA][XB] = cov(&px);
    }
    for i in 0..4 {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    let matched: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.matched())
        .map(|r| (r.value_a, r.value_b_rescaled))
        .collect();
    let rho = pearson(&matched)
        .ok_or_else(|| GaussError::Degenerate("constant matched-basis data".into()))?;
    let alice: Vec<f64> = records.iter().map(|r| r.value_a).collect();
    Ok(CmEstimate {
        cm: CovarianceMatrix(m),
        rho,
        sigma_a: mean_var(&alice).1.sqrt(),
    })
}

/// Probabilities of Alice's `2^d` symbols for a centred normal with
/// standard deviation `sigma`.
pub fn binned_distribution(mean: f64, sigma: f64, scheme: &DiscretizationScheme) -> Vec<f64> {
    (1..=scheme.alphabet_size())
        .map(|k| {
            let (lo, hi) = scheme.bin_edges(k);
            normal_interval(mean, sigma, lo, hi)
        })
        .collect()
}

/// `H(Z)` of Alice's discretized outcome for a normal marginal.
pub fn symbol_entropy(sigma_a: f64, scheme: &DiscretizationScheme) -> f64 {
    shannon_entropy(binned_distribution(0.0, sigma_a, scheme))
}

/// `H(Z|Y)` where `Y` is Bob's continuous outcome with correlation `rho`,
/// by trapezoidal quadrature over the standardised `Y`.
pub fn conditional_symbol_entropy(sigma_a: f64, rho: f64, scheme: &DiscretizationScheme) -> f64 {
    let cond_sd = sigma_a * (1.0 - rho * rho).sqrt();
    let points = 801;
    let span = 8.0;
    let h = 2.0 * span / (points - 1) as f64;
    let mut total = 0.0;
    let mut weight = 0.0;
    for i in 0..points {
        let u = -span + i as f64 * h;
        let w = (-0.5 * u * u).exp() * if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        let mean = rho * sigma_a * u;
        // Only bins within 12 conditional standard deviations carry mass.
        let lo_k = crate::gauss::discretize(mean - 12.0 * cond_sd, scheme);
        let hi_k = crate::gauss::discretize(mean + 12.0 * cond_sd, scheme);
        let probs = (lo_k..=hi_k).map(|k| {
            let (lo, hi) = scheme.bin_edges(k);
            normal_interval(mean, cond_sd, lo, hi)
        });
        total += w * shannon_entropy(probs);
        weight += w;
    }
    total / weight
}

/// Gaussian mutual information `½ log2(1 / (1 - ρ²))` between continuous outcomes.
pub fn gaussian_mutual_information(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).log2()
}

pub const RECORD_BYTES: usize = 18;

/// Binary little-endian dump: `u8 basis_a, u8 basis_b, f64 value_a, f64 value_b_rescaled`.
pub fn write_records<W: Write>(mut w: W, records: &[QuadratureRecord]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(records.len() * RECORD_BYTES);
    for r in records {
        buf.push(r.basis_a);
        buf.push(r.basis_b);
        buf.extend_from_slice(&r.value_a.to_le_bytes());
        buf.extend_from_slice(&r.value_b_rescaled.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_records<R: Read>(mut r: R) -> Result<Vec<QuadratureRecord>, GaussError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % RECORD_BYTES != 0 {
        return Err(GaussError::Format(format!(
            "record dump length {} is not a multiple of {RECORD_BYTES}",
            buf.len()
        )));
    }
    buf.chunks_exact(RECORD_BYTES)
        .map(|c| {
            let rec = QuadratureRecord {
                basis_a: c[0],
                basis_b: c[1],
                value_a: f64::from_le_bytes(c[2..10].try_into().unwrap()),
                value_b_rescaled: f64::from_le_bytes(c[10..18].try_into().unwrap()),
            };
            if rec.basis_a > 1 || rec.basis_b > 1 {
                return Err(GaussError::Format(format!(
                    "basis byte out of range: {} {}",
                    rec.basis_a, rec.basis_b
                )));
            }
            Ok(rec)
        })
        .collect()
}
