//! Scalar reference implementations used as oracles by the integration and
//! acceptance tests. They work on one word at a time with shifts and masks
//! and never touch bit-planes.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mask(bits: u32) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// `sign | top r_e exponent bits | top r_m mantissa bits` of `word`.
pub fn truncate_word(word: u32, e: u32, m: u32, r_e: u32, r_m: u32) -> u32 {
    let sign = (word >> (e + m)) & 1;
    let exp = (word >> m) & mask(e);
    let man = word & mask(m);
    (sign << (r_e + r_m)) | ((exp >> (e - r_e)) << r_m) | (man >> (m - r_m))
}

/// Round-to-nearest reference. The magnitude `exp[top r_e+d_e] ++ man[top
/// r_m+d_m]` is read as one integer, divided by `2^d_m` in floating point
/// and rounded there: half up for one guard bit, half to even for two
/// (the lower bit only says "something below the half").
pub fn round_word(word: u32, e: u32, m: u32, r_e: u32, r_m: u32, d_e: u32, d_m: u32) -> u32 {
    let sign = (word >> (e + m)) & 1;
    let exp = (word >> m) & mask(e);
    let man = word & mask(m);
    let x = ((exp >> (e - r_e - d_e)) << (r_m + d_m)) | (man >> (m - r_m - d_m));
    let scaled = x as f64 / (1u64 << d_m) as f64;
    let q = match d_m {
        1 => (scaled + 0.5).floor(),
        2 => scaled.round_ties_even(),
        _ => panic!("oracle covers one or two guard bits"),
    } as u64;
    let width = r_e + d_e + r_m;
    let q = q.min(mask(width) as u64) as u32;
    let kept_exp = q >> (r_m + d_e);
    let kept_man = q & mask(r_m);
    (sign << (r_e + r_m)) | (kept_exp << r_m) | kept_man
}

pub fn random_words(n: usize, bits: u32, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<u32>() & mask(bits)).collect()
}

/// Round a float to BF16 bits, nearest-even.
pub fn bf16(x: f32) -> u32 {
    let b = x.to_bits();
    (b.wrapping_add(0x7FFF + ((b >> 16) & 1)) >> 16) & 0xFFFF
}

#[test]
fn oracle_self_checks() {
    // BF16 1.0 = 0x3F80: sign 0, exponent 127, mantissa 0
    assert_eq!(truncate_word(0x3F80, 8, 7, 8, 0), 0x7F);
    assert_eq!(truncate_word(0xBF80, 8, 7, 4, 0), 0b1_0111);
    // mantissa 0b111_0000, keep 2 with one guard: 11|1 rounds into the exponent
    assert_eq!(round_word((0x7E << 7) | 0b111_0000, 8, 7, 8, 2, 0, 1), 0x7F << 2);
    // two guards: 00|10 is a tie and stays even, 01|10 goes up, 11|01 stays
    assert_eq!(round_word(0b001_0000, 8, 7, 8, 2, 0, 2), 0b00);
    assert_eq!(round_word(0b011_0000, 8, 7, 8, 2, 0, 2), 0b10);
    assert_eq!(round_word(0b110_1000, 8, 7, 8, 2, 0, 2), 0b11);
    assert_eq!(bf16(1.0), 0x3F80);
}
