//! Column-weight-2 LDPC codes over GF(64), built by progressive edge growth.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::gf64;
use super::ReconError;
use crate::rng::{streams, SeededRng};

pub const COLUMN_DEGREE: usize = 2;

/// A parity-check matrix `H` (`m × n`) over GF(64), stored by rows with a
/// column index for message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    m: usize,
    rate: f64,
    seed: u64,
    /// `(column, coefficient)` per row, columns ascending.
    rows: Vec<Vec<(u32, u8)>>,
    /// `(row, position in that row)` per column.
    cols: Vec<Vec<(u32, u32)>>,
    id: u64,
}

/// Number of parity rows for `n` symbols at rate `rate`.
pub fn check_count(n: usize, rate: f64) -> usize {
    // The slack absorbs representation error such as 1e4 * (1 - 0.94) = 600.0000000000006.
    (n as f64 * (1.0 - rate) - 1e-9).ceil() as usize
}

impl LdpcCode {
    /// Progressive edge growth: each column's first edge goes to a
    /// least-loaded check, its second to a least-loaded check as far as
    /// possible from the first in the current graph, which never repeats a
    /// pair of checks (no 4-cycles).
    pub fn build(n: usize, rate: f64, seed: u64) -> Result<Self, ReconError> {
        if n < 100 {
            return Err(ReconError::InvalidCode(format!(
                "block length {n} below 100"
            )));
        }
        if !(0.5..=0.99).contains(&rate) {
            return Err(ReconError::InvalidCode(format!(
                "rate {rate} outside [0.5, 0.99]"
            )));
        }
        let m = check_count(n, rate);
        if m * (m - 1) / 2 < n {
            return Err(ReconError::ConstructionFailed(format!(
                "{m} checks cannot host {n} distinct column pairs"
            )));
        }
        let mut rng = SeededRng::new(seed, streams::CODE);
        let mut degree = vec![0usize; m];
        // Check adjacency via columns: neighbours[c] = checks sharing a column with c.
        let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); m];
        let mut col_rows: Vec<[u32; COLUMN_DEGREE]> = Vec::with_capacity(n);
        let mut dist = vec![u32::MAX; m];
        let mut queue = VecDeque::new();
        for _ in 0..n {
            let first = pick_least_loaded(&mut rng, &degree, (0..m as u32).collect());
            // Breadth-first search from `first` until at least half the checks
            // are reached; the unreached ones are at least that far away.
            dist.iter_mut().for_each(|d| *d = u32::MAX);
            dist[first as usize] = 0;
            queue.clear();
            queue.push_back(first);
            let mut reached = 1;
            let mut frontier_depth = 0;
            while let Some(c) = queue.pop_front() {
                let d = dist[c as usize];
                if d > frontier_depth {
                    frontier_depth = d;
                    if reached * 2 >= m {
                        break;
                    }
                }
                for &nb in &neighbours[c as usize] {
                    if dist[nb as usize] == u32::MAX {
                        dist[nb as usize] = d + 1;
                        reached += 1;
                        queue.push_back(nb);
                    }
                }
            }
            let mut candidates: Vec<u32> = (0..m as u32)
                .filter(|&c| dist[c as usize] == u32::MAX)
                .collect();
            if candidates.is_empty() {
                // Everything is reachable: take the deepest layer.
                let max_d = dist.iter().copied().max().unwrap_or(0);
                candidates = (0..m as u32)
                    .filter(|&c| dist[c as usize] == max_d)
                    .collect();
            }
            candidates.retain(|&c| c != first && !neighbours[first as usize].contains(&c));
            if candidates.is_empty() {
                return Err(ReconError::ConstructionFailed(format!(
                    "no check left for a new column at n = {n}, m = {m}"
                )));
            }
            let second = pick_least_loaded(&mut rng, &degree, candidates);
            degree[first as usize] += 1;
            degree[second as usize] += 1;
            neighbours[first as usize].push(second);
            neighbours[second as usize].push(first);
            col_rows.push([first, second]);
        }
        let mut rows: Vec<Vec<(u32, u8)>> = vec![Vec::new(); m];
        for (j, rs) in col_rows.iter().enumerate() {
            for &r in rs {
                let coeff = rng.random_range(1..gf64::Q as u8);
                rows[r as usize].push((j as u32, coeff));
            }
        }
        Self::from_rows(n, rate, seed, rows)
    }

    /// Assembles a code from explicit rows; `rate` and `seed` are metadata.
    pub fn from_rows(
        n: usize,
        rate: f64,
        seed: u64,
        mut rows: Vec<Vec<(u32, u8)>>,
    ) -> Result<Self, ReconError> {
        let m = rows.len();
        let mut cols: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(ReconError::InvalidCode(format!("row {r} repeats a column")));
            }
            for (pos, &(c, coeff)) in row.iter().enumerate() {
                if c as usize >= n || coeff == 0 || coeff as usize >= gf64::Q {
                    return Err(ReconError::InvalidCode(format!(
                        "row {r}: entry ({c}, {coeff}) out of range"
                    )));
                }
                cols[c as usize].push((r as u32, pos as u32));
            }
        }
        let id = structure_digest(n, &rows);
        Ok(Self {
            n,
            m,
            rate,
            seed,
            rows,
            cols,
            id,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity checks (syndrome symbols).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Digest of the parity-check structure, exchanged to detect mismatched codes.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn rows(&self) -> &[Vec<(u32, u8)>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<(u32, u32)>] {
        &self.cols
    }

    /// `H x` over GF(64).
    pub fn syndrome(&self, x: &[u8]) -> Result<Vec<u8>, ReconError> {
        if x.len() != self.n {
            return Err(ReconError::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter().fold(0u8, |acc, &(c, h)| {
                    gf64::add(acc, gf64::mul(h, x[c as usize]))
                })
            })
            .collect())
    }

    /// Text form: a header of `key value` lines (`N`, `R`, `q`, `seed`, `M`)
    /// followed by one `row col coeff` line per nonzero entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "cvot-ldpc 1").unwrap();
        writeln!(s, "N {}", self.n).unwrap();
        writeln!(s, "R {}", self.rate).unwrap();
        writeln!(s, "q {}", gf64::Q).unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "M {}", self.m).unwrap();
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, h) in row {
                writeln!(s, "{r} {c} {h}").unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ReconError> {
        let bad = |line: usize, msg: &str| ReconError::CodeFile(format!("line {line}: {msg}"));
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == "cvot-ldpc 1" => {}
            _ => return Err(bad(1, "missing `cvot-ldpc 1` header")),
        }
        let mut header = |key: &str| -> Result<String, ReconError> {
            let (i, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let (k, v) = l
                .trim()
                .split_once(' ')
                .ok_or_else(|| bad(i + 1, "expected `key value`"))?;
            if k != key {
                return Err(bad(i + 1, &format!("expected key {key}, got {k}")));
            }
            Ok(v.trim().to_string())
        };
        let parse_err = |k: &str| ReconError::CodeFile(format!("bad value for {k}"));
        let n: usize = header("N")?.parse().map_err(|_| parse_err("N"))?;
        let rate: f64 = header("R")?.parse().map_err(|_| parse_err("R"))?;
        let q: usize = header("q")?.parse().map_err(|_| parse_err("q"))?;
        let seed: u64 = header("seed")?.parse().map_err(|_| parse_err("seed"))?;
        let m: usize = header("M")?.parse().map_err(|_| parse_err("M"))?;
        if q != gf64::Q {
            return Err(ReconError::CodeFile(format!("field order {q} unsupported")));
        }
        let mut rows: Vec<Vec<(u32, u8)>> = vec![Vec::new(); m];
        for (i, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            let parsed = (f.len() == 3).then(|| {
                (
                    f[0].parse::<usize>(),
                    f[1].parse::<u32>(),
                    f[2].parse::<u8>(),
                )
            });
            match parsed {
                Some((Ok(r), Ok(c), Ok(h))) if r < m => rows[r].push((c, h)),
                _ => return Err(bad(i + 1, "expected `row col coeff`")),
            }
        }
        Self::from_rows(n, rate, seed, rows)
    }
}

fn pick_least_loaded(rng: &mut SeededRng, degree: &[usize], candidates: Vec<u32>) -> u32 {
    let min = candidates
        .iter()
        .map(|&c| degree[c as usize])
        .min()
        .unwrap();
    let ties: Vec<u32> = candidates
        .into_iter()
        .filter(|&c| degree[c as usize] == min)
        .collect();
    ties[rng.random_range(0..ties.len())]
}

fn structure_digest(n: usize, rows: &[Vec<(u32, u8)>]) -> u64 {
    let mut h = Sha256::new();
    h.update((n as u64).to_le_bytes());
    h.update((rows.len() as u64).to_le_bytes());
    for row in rows {
        h.update((row.len() as u32).to_le_bytes());
        for &(c, coeff) in row {
            h.update(c.to_le_bytes());
            h.update([coeff]);
        }
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}
