//! Arithmetic in GF(64) = GF(2)[x] / (x^6 + x + 1).
//!
//! Elements are `u8` in `0..64`; addition is XOR.

pub const Q: usize = 64;
const POLY: u16 = 0x43;

struct Tables {
    exp: [u8; 2 * (Q - 1)],
    log: [u8; Q],
}

const TABLES: Tables = build_tables();

const fn build_tables() -> Tables {
    let mut exp = [0u8; 2 * (Q - 1)];
    let mut log = [0u8; Q];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < Q - 1 {
        exp[i] = x as u8;
        exp[i + Q - 1] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x40 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    Tables { exp, log }
}

#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    TABLES.exp[TABLES.log[a as usize] as usize + TABLES.log[b as usize] as usize]
}

/// Multiplicative inverse; panics on zero.
#[inline]
pub fn inv(a: u8) -> u8 {
    assert!(a != 0, "zero has no inverse in GF(64)");
    TABLES.exp[(Q - 1 - TABLES.log[a as usize] as usize) % (Q - 1)]
}

/// In-place unnormalised Walsh–Hadamard transform of a 64-entry vector.
/// Applying it twice multiplies by 64. It diagonalises XOR-convolution, i.e.
/// the distribution of a sum of independent field elements.
pub fn walsh_hadamard(v: &mut [f64; Q]) {
    let mut h = 1;
    while h < Q {
        for i in (0..Q).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}
