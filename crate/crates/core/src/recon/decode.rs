//! Belief propagation over GF(64) with a flooding schedule.
//!
//! Messages are dense 64-entry distributions. At a check node the
//! distribution of a weighted sum of the other neighbours is an XOR
//! convolution, evaluated in the Walsh–Hadamard domain with prefix/suffix
//! products.

use super::code::LdpcCode;
use super::gf64::{self, walsh_hadamard, Q};
use super::ReconError;

pub type Dist = [f64; Q];

const FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub max_iterations: usize,
    /// Weight of the fresh check-to-variable message against the previous one.
    pub damping: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            damping: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub word: Vec<u8>,
    /// Completed message-passing rounds; 0 if the priors already satisfied the syndrome.
    pub iterations: usize,
}

fn normalize(v: &mut Dist) {
    let mut total = 0.0;
    for x in v.iter_mut() {
        if !(*x > FLOOR) {
            *x = FLOOR;
        }
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

fn argmax(v: &Dist) -> u8 {
    let mut best = 0;
    for i in 1..Q {
        if v[i] > v[best] {
            best = i;
        }
    }
    best as u8
}

/// Finds a word with syndrome `syndrome` that is most likely under `priors`.
/// A returned word always satisfies the syndrome exactly.
pub fn decode(
    code: &LdpcCode,
    priors: &[Dist],
    syndrome: &[u8],
    cfg: &DecoderConfig,
) -> Result<DecodeOutcome, ReconError> {
    let n = code.n();
    if priors.len() != n {
        return Err(ReconError::LengthMismatch {
            expected: n,
            got: priors.len(),
        });
    }
    if syndrome.len() != code.m() {
        return Err(ReconError::LengthMismatch {
            expected: code.m(),
            got: syndrome.len(),
        });
    }
    let rows = code.rows();
    let mut row_start = Vec::with_capacity(rows.len() + 1);
    row_start.push(0usize);
    for row in rows {
        row_start.push(row_start.last().unwrap() + row.len());
    }
    let edges = *row_start.last().unwrap();
    // Edge ids of each column.
    let col_edges: Vec<Vec<usize>> = code
        .cols()
        .iter()
        .map(|c| {
            c.iter()
                .map(|&(r, pos)| row_start[r as usize] + pos as usize)
                .collect()
        })
        .collect();

    let mut word: Vec<u8> = priors.iter().map(argmax).collect();
    if code.syndrome(&word)? == syndrome {
        return Ok(DecodeOutcome {
            word,
            iterations: 0,
        });
    }

    let uniform = [1.0 / Q as f64; Q];
    let mut to_check: Vec<Dist> = vec![uniform; edges];
    let mut to_var: Vec<Dist> = vec![uniform; edges];
    let mut spectra: Vec<Dist> = Vec::new();
    let mut suffix: Vec<Dist> = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        // Variable to check: prior times all other incoming messages.
        for (v, es) in col_edges.iter().enumerate() {
            for &e in es {
                let mut msg = priors[v];
                for &other in es {
                    if other != e {
                        for a in 0..Q {
                            msg[a] *= to_var[other][a];
                        }
                    }
                }
                normalize(&mut msg);
                to_check[e] = msg;
            }
        }
        // Check to variable.
        for (r, row) in rows.iter().enumerate() {
            let base = row_start[r];
            let deg = row.len();
            spectra.clear();
            for (pos, &(_, h)) in row.iter().enumerate() {
                // Distribution of h * x_v, then its transform.
                let mut weighted = [0.0; Q];
                for (a, &p) in to_check[base + pos].iter().enumerate() {
                    weighted[gf64::mul(h, a as u8) as usize] = p;
                }
                walsh_hadamard(&mut weighted);
                spectra.push(weighted);
            }
            suffix.clear();
            suffix.resize(deg + 1, [1.0; Q]);
            for pos in (0..deg).rev() {
                for i in 0..Q {
                    suffix[pos][i] = suffix[pos + 1][i] * spectra[pos][i];
                }
            }
            let mut prefix = [1.0; Q];
            let s = syndrome[r];
            for (pos, &(_, h)) in row.iter().enumerate() {
                let mut others = [0.0; Q];
                for i in 0..Q {
                    others[i] = prefix[i] * suffix[pos + 1][i];
                }
                walsh_hadamard(&mut others);
                // h * x_v must equal s + (sum of the others).
                let mut msg = [0.0; Q];
                for (a, m) in msg.iter_mut().enumerate() {
                    let u = gf64::mul(h, a as u8);
                    *m = others[(s ^ u) as usize];
                }
                normalize(&mut msg);
                let old = &mut to_var[base + pos];
                for a in 0..Q {
                    old[a] = cfg.damping * msg[a] + (1.0 - cfg.damping) * old[a];
                }
                for i in 0..Q {
                    prefix[i] *= spectra[pos][i];
                }
            }
        }
        // Tentative decision.
        for (v, es) in col_edges.iter().enumerate() {
            let mut post = priors[v];
            for &e in es {
                for a in 0..Q {
                    post[a] *= to_var[e][a];
                }
                // Keep the running product in range for high-degree columns.
                let max = post.iter().cloned().fold(0.0, f64::max);
                if max > 0.0 {
                    post.iter_mut().for_each(|x| *x /= max);
                }
            }
            word[v] = argmax(&post);
        }
        if code.syndrome(&word)? == syndrome {
            return Ok(DecodeOutcome {
                word,
                iterations: iteration,
            });
        }
    }
    Err(ReconError::DecodeFailure {
        iterations: cfg.max_iterations,
    })
}
