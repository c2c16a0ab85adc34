//! Brute-force and textbook reference implementations used as test oracles.

#![allow(dead_code)]

use lrfhss_core::coding::conv::{conv_encode_data, encode, HEADER_MEMORY, HEADER_POLYS};
use lrfhss_core::{DataRate, SoftSymbol};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Remainder of the dividend polynomial (MSB first) modulo `poly` by long division.
fn gf2_mod(dividend: &[u8], poly: &[u8]) -> Vec<u8> {
    let deg = poly.len() - 1;
    let mut r = dividend.to_vec();
    for i in 0..r.len().saturating_sub(deg) {
        if r[i] == 1 {
            for (j, &p) in poly.iter().enumerate() {
                r[i + j] ^= p;
            }
        }
    }
    r[r.len() - deg..].to_vec()
}

fn bits_msb(v: u32, width: usize) -> Vec<u8> {
    (0..width).rev().map(|i| ((v >> i) & 1) as u8).collect()
}

fn value_msb(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
}

/// CRC-8, generator x⁸ + x² + x + 1, zero initial value: M(x)·x⁸ mod P.
pub fn crc8_division(bits: &[u8]) -> u8 {
    let mut d = bits.to_vec();
    d.extend([0; 8]);
    value_msb(&gf2_mod(&d, &bits_msb(0x107, 9))) as u8
}

/// CRC-16, generator x¹⁶ + x¹² + x⁵ + 1, register preset to all ones:
/// (M(x)·x¹⁶ + I(x)·x^L) mod P for an L-bit message.
pub fn crc16_division(bytes: &[u8]) -> u16 {
    let mut d: Vec<u8> = bytes.iter().flat_map(|&b| bits_msb(b as u32, 8)).collect();
    d.extend([0; 16]);
    for b in d.iter_mut().take(16) {
        *b ^= 1;
    }
    value_msb(&gf2_mod(&d, &bits_msb(0x11021, 17))) as u16
}

/// PN9 sequence from its recurrence s[n+9] = s[n] ⊕ s[n+5], first nine outputs all ones.
pub fn pn9_recurrence(n: usize) -> Vec<u8> {
    let mut s = vec![1u8; 9.min(n)];
    while s.len() < n {
        let k = s.len() - 9;
        s.push(s[k] ^ s[k + 5]);
    }
    s
}

/// Writes row by row into a `rows`-row matrix and reads column by column.
pub fn interleave_matrix<T: Copy>(bits: &[T], rows: usize) -> Vec<T> {
    let cols = bits.len().div_ceil(rows);
    let mut grid: Vec<Vec<Option<T>>> = vec![vec![None; cols]; rows];
    for (i, &b) in bits.iter().enumerate() {
        grid[i / cols][i % cols] = Some(b);
    }
    (0..cols)
        .flat_map(|c| (0..rows).map(move |r| (r, c)))
        .filter_map(|(r, c)| grid[r][c])
        .collect()
}

pub fn cost(soft: &[SoftSymbol], codeword: &[u8]) -> f64 {
    soft.iter()
        .zip(codeword)
        .filter(|(s, _)| !s.erased)
        .map(|(s, &c)| {
            let x = if c == 1 { 1.0 } else { -1.0 };
            (s.value - x) * (s.value - x)
        })
        .sum()
}

/// Noisy ±1 observation of a codeword with random erasures.
pub fn observe<R: Rng>(codeword: &[u8], sigma: f64, erase_p: f64, rng: &mut R) -> Vec<SoftSymbol> {
    let n = Normal::new(0.0, sigma).unwrap();
    codeword
        .iter()
        .map(|&c| {
            if rng.random_bool(erase_p) {
                SoftSymbol::erasure()
            } else {
                SoftSymbol::new(if c == 1 { 1.0 } else { -1.0 } + n.sample(rng))
            }
        })
        .collect()
}

pub fn data_input(message: u32, k: usize) -> Vec<u8> {
    let mut bits = bits_msb(message, k);
    bits.extend([0; 6]);
    bits
}

/// Lowest-cost and runner-up cost over every terminated data codeword with `k` free bits.
pub fn exhaustive_data(soft: &[SoftSymbol], k: usize, dr: DataRate) -> (Vec<u8>, f64, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    let mut second = f64::INFINITY;
    for m in 0..1u32 << k {
        let bits = data_input(m, k);
        let c = cost(soft, &conv_encode_data(&bits, dr).unwrap());
        if c < best.1 {
            second = best.1;
            best = (bits, c);
        } else if c < second {
            second = c;
        }
    }
    (best.0, best.1, second)
}

/// Lowest-cost (message, initial state) of the unterminated header code, plus the runner-up cost.
pub fn exhaustive_header(soft: &[SoftSymbol], k: usize) -> (Vec<u8>, u8, f64, f64) {
    let mut best = (Vec::new(), 0u8, f64::INFINITY);
    let mut second = f64::INFINITY;
    for state in 0..16u32 {
        for m in 0..1u32 << k {
            let bits = bits_msb(m, k);
            let c = cost(soft, &encode(&bits, &HEADER_POLYS, HEADER_MEMORY, state));
            if c < best.2 {
                second = best.2;
                best = (bits, state as u8, c);
            } else if c < second {
                second = c;
            }
        }
    }
    (best.0, best.1, best.2, second)
}

/// G(δ, θ) = Σ_a w_a Σ_t (Θ_{a,t} − δ·t − θ_a)², t = 1..N.
pub fn objective_g(theta: &[Vec<f64>], w: &[f64], delta: f64, th: &[f64]) -> f64 {
    theta
        .iter()
        .zip(w)
        .zip(th)
        .map(|((row, &wa), &ta)| {
            wa * row
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - delta * (i + 1) as f64 - ta).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Grid minimiser of G. Given δ the antennas separate, so each θ_a is searched on its own
/// grid; δ is searched on `deltas`.
pub fn grid_minimise_g(theta: &[Vec<f64>], w: &[f64], deltas: &[f64], thetas: &[f64]) -> (f64, Vec<f64>, f64) {
    let mut best = (0.0, Vec::new(), f64::INFINITY);
    for &d in deltas {
        let mut th = Vec::with_capacity(theta.len());
        let mut g = 0.0;
        for (row, &wa) in theta.iter().zip(w) {
            let (t, c) = thetas
                .iter()
                .map(|&t| {
                    let c: f64 = row.iter().enumerate().map(|(i, &v)| (v - d * (i + 1) as f64 - t).powi(2)).sum();
                    (t, wa * c)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            th.push(t);
            g += c;
        }
        if g < best.2 {
            best = (d, th, g);
        }
    }
    best
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
