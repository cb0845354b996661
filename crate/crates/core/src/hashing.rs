//! Two-universal hashing with random Toeplitz matrices over GF(2).
//!
//! An `ℓ × m` Toeplitz matrix is fixed by `m + ℓ − 1` seed bits via
//! `T[i][j] = seed[i − j + m − 1]`.

use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HashError {
    #[error("input has {got} bits, hash expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid hash dimensions: m = {m}, l = {ell}")]
    InvalidDims { m: usize, ell: usize },
    #[error("malformed hash descriptor: {0}")]
    Format(String),
}

/// A packed bit string; bit `i` is bit `i % 64` of word `i / 64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = Self::default();
        for b in bits {
            out.push(b);
        }
        out
    }

    /// The first `len` bits of `bytes`, least significant bit of each byte first.
    pub fn from_bytes_le(bytes: &[u8], len: usize) -> Self {
        let mut out = Self::zeros(len);
        for i in 0..len {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                out.set(i, true);
            }
        }
        out
    }

    pub fn to_bytes_le(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(
            self.len, other.len,
            "xor of bit strings of different length"
        );
        Bits {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bits `start .. start + 64` as one word, zero beyond the end.
    fn word_at(&self, start: usize) -> u64 {
        let (w, s) = (start / 64, start % 64);
        let lo = self.words.get(w).copied().unwrap_or(0) >> s;
        let hi = if s == 0 {
            0
        } else {
            self.words.get(w + 1).copied().unwrap_or(0) << (64 - s)
        };
        lo | hi
    }

    fn reversed(&self) -> Bits {
        let mut out = Bits::zeros(self.len);
        for i in 0..self.len {
            if self.get(i) {
                out.set(self.len - 1 - i, true);
            }
        }
        out
    }
}

impl std::fmt::Display for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzDescriptor {
    in_bits: usize,
    out_bits: usize,
    seed: Bits,
}

impl ToeplitzDescriptor {
    pub fn new(in_bits: usize, out_bits: usize, seed: Bits) -> Result<Self, HashError> {
        if out_bits == 0 || out_bits > in_bits || in_bits > u32::MAX as usize {
            return Err(HashError::InvalidDims {
                m: in_bits,
                ell: out_bits,
            });
        }
        if seed.len() != in_bits + out_bits - 1 {
            return Err(HashError::Format(format!(
                "seed has {} bits, expected {}",
                seed.len(),
                in_bits + out_bits - 1
            )));
        }
        Ok(Self {
            in_bits,
            out_bits,
            seed,
        })
    }

    pub fn in_bits(&self) -> usize {
        self.in_bits
    }

    pub fn out_bits(&self) -> usize {
        self.out_bits
    }

    pub fn seed(&self) -> &Bits {
        &self.seed
    }

    /// `u32 m`, `u32 ℓ` (little-endian), then the seed bits packed LSB first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.seed.len().div_ceil(8));
        out.extend_from_slice(&(self.in_bits as u32).to_le_bytes());
        out.extend_from_slice(&(self.out_bits as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_bytes_le());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HashError> {
        if bytes.len() < 8 {
            return Err(HashError::Format("shorter than its 8-byte header".into()));
        }
        let m = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let ell = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if ell == 0 || ell > m {
            return Err(HashError::InvalidDims { m, ell });
        }
        let seed_len = m + ell - 1;
        if bytes.len() != 8 + seed_len.div_ceil(8) {
            return Err(HashError::Format(format!(
                "{} bytes for a {seed_len}-bit seed",
                bytes.len() - 8
            )));
        }
        Self::new(m, ell, Bits::from_bytes_le(&bytes[8..], seed_len))
    }
}

/// Draws a uniformly random descriptor for `m` input and `ell` output bits.
pub fn sample_hash(
    rng: &mut impl RngCore,
    m: usize,
    ell: usize,
) -> Result<ToeplitzDescriptor, HashError> {
    if ell == 0 || ell > m {
        return Err(HashError::InvalidDims { m, ell });
    }
    let len = m + ell - 1;
    let mut bytes = vec![0u8; len.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    ToeplitzDescriptor::new(m, ell, Bits::from_bytes_le(&bytes, len))
}

/// `T x` over GF(2).
///
/// Row `i` of `T` read right to left is `seed[i .. i + m]`, so output bit `i`
/// is the parity of that window ANDed with the reversed input.
pub fn apply_hash(desc: &ToeplitzDescriptor, input: &Bits) -> Result<Bits, HashError> {
    if input.len() != desc.in_bits {
        return Err(HashError::LengthMismatch {
            expected: desc.in_bits,
            got: input.len(),
        });
    }
    let m = desc.in_bits;
    let rev = input.reversed();
    let full_words = m / 64;
    let tail = m % 64;
    let tail_mask = if tail == 0 { 0 } else { (1u64 << tail) - 1 };
    let mut out = Bits::zeros(desc.out_bits);
    for i in 0..desc.out_bits {
        let mut acc = 0u64;
        for w in 0..full_words {
            acc ^= desc.seed.word_at(i + 64 * w) & rev.words[w];
        }
        if tail != 0 {
            acc ^= desc.seed.word_at(i + 64 * full_words) & rev.words[full_words] & tail_mask;
        }
        if acc.count_ones() % 2 == 1 {
            out.set(i, true);
        }
    }
    Ok(out)
}

pub const SYMBOL_BITS: usize = 10;

/// Serializes 1-based 10-bit symbols by their 0-based value, 10 bits each,
/// least significant bit first.
pub fn symbols_to_bits(symbols: &[u32]) -> Bits {
    let mut out = Bits::zeros(symbols.len() * SYMBOL_BITS);
    for (s, &k) in symbols.iter().enumerate() {
        let v = k.wrapping_sub(1);
        for b in 0..SYMBOL_BITS {
            if v >> b & 1 == 1 {
                out.set(s * SYMBOL_BITS + b, true);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use rand::Rng;

    /// Dense matrix-vector product straight from the definition.
    fn apply_dense(desc: &ToeplitzDescriptor, x: &Bits) -> Bits {
        let m = desc.in_bits();
        Bits::from_bools((0..desc.out_bits()).map(|i| {
            (0..m).fold(false, |acc, j| {
                acc ^ (desc.seed().get(i + m - 1 - j) & x.get(j))
            })
        }))
    }

    fn random_bits(rng: &mut SeededRng, len: usize) -> Bits {
        Bits::from_bools((0..len).map(|_| rng.bit()))
    }

    #[test]
    fn descriptor_shape() {
        let mut rng = SeededRng::new(1, 1);
        let d = sample_hash(&mut rng, 8, 4).unwrap();
        assert_eq!(d.seed().len(), 11);
        let mut again = SeededRng::new(1, 1);
        assert_eq!(sample_hash(&mut again, 8, 4).unwrap(), d);
        assert!(sample_hash(&mut rng, 8, 8).is_ok());
        assert!(sample_hash(&mut rng, 8, 9).is_err());
        assert!(sample_hash(&mut rng, 8, 0).is_err());
    }

    #[test]
    fn zero_seed_and_identity() {
        let zero = ToeplitzDescriptor::new(20, 7, Bits::zeros(26)).unwrap();
        let mut rng = SeededRng::new(2, 1);
        assert_eq!(
            apply_hash(&zero, &random_bits(&mut rng, 20)).unwrap(),
            Bits::zeros(7)
        );
        // Main diagonal i = j is seed[m - 1].
        let mut seed = Bits::zeros(39);
        seed.set(19, true);
        let id = ToeplitzDescriptor::new(20, 20, seed).unwrap();
        let x = random_bits(&mut rng, 20);
        assert_eq!(apply_hash(&id, &x).unwrap(), x);
        assert!(matches!(
            apply_hash(&id, &Bits::zeros(19)),
            Err(HashError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fast_path_matches_dense_oracle() {
        let mut rng = SeededRng::new(3, 1);
        for m in [1usize, 2, 5, 63, 64, 65, 100, 128, 200] {
            for ell in [1, m / 2 + 1, m] {
                let d = sample_hash(&mut rng, m, ell).unwrap();
                let x = random_bits(&mut rng, m);
                assert_eq!(
                    apply_hash(&d, &x).unwrap(),
                    apply_dense(&d, &x),
                    "m {m} l {ell}"
                );
            }
        }
    }

    #[test]
    fn linear_over_gf2() {
        let mut rng = SeededRng::new(4, 1);
        for _ in 0..50 {
            let d = sample_hash(&mut rng, 300, 120).unwrap();
            let x = random_bits(&mut rng, 300);
            let y = random_bits(&mut rng, 300);
            let lhs = apply_hash(&d, &x.xor(&y)).unwrap();
            let rhs = apply_hash(&d, &x)
                .unwrap()
                .xor(&apply_hash(&d, &y).unwrap());
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn two_universal() {
        let mut rng = SeededRng::new(5, 1);
        for (m, ell) in [(16usize, 8usize), (32, 16)] {
            let trials = 10_000;
            let x = random_bits(&mut rng, m);
            let mut y = x.clone();
            let flip = rng.random_range(0..m);
            y.set(flip, !y.get(flip));
            let collisions = (0..trials)
                .filter(|_| {
                    let d = sample_hash(&mut rng, m, ell).unwrap();
                    apply_hash(&d, &x).unwrap() == apply_hash(&d, &y).unwrap()
                })
                .count();
            let p = 2f64.powi(-(ell as i32));
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((collisions as f64 / trials as f64) <= p + 3.0 * se);
        }
    }

    #[test]
    fn wire_round_trip() {
        let mut rng = SeededRng::new(6, 1);
        let d = sample_hash(&mut rng, 1000, 333).unwrap();
        let bytes = d.to_bytes();
        assert_eq!(bytes.len(), 8 + 1332usize.div_ceil(8));
        assert_eq!(ToeplitzDescriptor::from_bytes(&bytes).unwrap(), d);
        assert!(ToeplitzDescriptor::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn symbol_serialization() {
        let b = symbols_to_bits(&[1, 2, 1024]);
        assert_eq!(b.len(), 30);
        assert_eq!(b.to_string(), "000000000010000000001111111111");
    }
}
