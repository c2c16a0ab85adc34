//! Phase-slope soft demodulation and maximum ratio combining.

use std::f64::consts::FRAC_PI_4;

use crate::dsp::{Baseband, BB_PER_SYMBOL};
use crate::types::SoftSymbol;

const QUARTER: usize = BB_PER_SYMBOL / 4;

/// Soft values for symbols `first..first+n` of a block whose start is the baseband origin.
/// The phase advance between T/4 before and T/4 after each centre is divided by π/4.
pub fn demod_soft(bb: &Baseband, antenna: usize, first: usize, n: usize) -> Vec<SoftSymbol> {
    let s = &bb.antennas[antenna];
    (first..first + n)
        .map(|k| {
            let c = k * BB_PER_SYMBOL + BB_PER_SYMBOL / 2;
            match (s.get(c - QUARTER), s.get(c + QUARTER)) {
                (Some(m1), Some(m2)) => SoftSymbol::new((m2 * m1.conj()).arg() / FRAC_PI_4),
                _ => SoftSymbol::new(0.0),
            }
        })
        .collect()
}

/// Mean power at the symbol centres of `first..first+n`.
pub fn block_energy(bb: &Baseband, antenna: usize, first: usize, n: usize) -> f64 {
    let s = &bb.antennas[antenna];
    let idx: Vec<usize> = (first..first + n)
        .map(|k| k * BB_PER_SYMBOL + BB_PER_SYMBOL / 2)
        .filter(|&c| c < s.len())
        .collect();
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().map(|&c| s[c].norm_sqr()).sum::<f64>() / idx.len() as f64
}

/// Weights ∝ strengths, Σ = 1; equal weights if every strength is zero.
pub fn mrc_weights(strengths: &[f64]) -> Vec<f64> {
    let total: f64 = strengths.iter().map(|s| s.max(0.0)).sum();
    if total <= 0.0 {
        return vec![1.0 / strengths.len() as f64; strengths.len()];
    }
    strengths.iter().map(|s| s.max(0.0) / total).collect()
}

pub fn mrc_combine(per_antenna: &[Vec<SoftSymbol>], strengths: &[f64]) -> Vec<SoftSymbol> {
    let w = mrc_weights(strengths);
    let n = per_antenna.first().map_or(0, |v| v.len());
    (0..n)
        .map(|k| {
            if per_antenna.iter().any(|v| v[k].erased) {
                return SoftSymbol::erasure();
            }
            SoftSymbol::new(per_antenna.iter().zip(&w).map(|(v, w)| v[k].value * w).sum())
        })
        .collect()
}

/// Demodulates and combines all antennas of a block.
pub fn demod_block(bb: &Baseband, first: usize, n: usize, energy_symbols: usize) -> (Vec<SoftSymbol>, Vec<f64>) {
    let per: Vec<Vec<SoftSymbol>> = (0..bb.n_antennas()).map(|a| demod_soft(bb, a, first, n)).collect();
    let e: Vec<f64> = (0..bb.n_antennas())
        .map(|a| block_energy(bb, a, 0, energy_symbols))
        .collect();
    (mrc_combine(&per, &e), mrc_weights(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::ddc_window;
    use crate::tx::gmsk::gmsk_modulate;
    use crate::tx::packet::carrier;
    use crate::types::IqTrace;
    use num_complex::Complex32;

    fn block_trace(bits: &[u8], freq: f64, lead: usize) -> IqTrace {
        let x = gmsk_modulate(bits, 1024);
        let mut s = vec![Complex32::new(0.0, 0.0); lead];
        s.extend(x.antenna(0).iter().zip(carrier(freq, lead as i64, x.len())).map(|(z, c)| {
            let v = num_complex::Complex64::new(z.re as f64, z.im as f64) * c;
            Complex32::new(v.re as f32, v.im as f32)
        }));
        s.extend(vec![Complex32::new(0.0, 0.0); lead]);
        IqTrace::single(s, 500_000.0).unwrap()
    }

    #[test]
    fn run_of_ones_is_plus_one() {
        let t = block_trace(&[1; 20], 1000.0, 5000);
        let bb = ddc_window(&t, 1000.0, 5000, 5000 + 20 * 1024);
        for v in &demod_soft(&bb, 0, 3, 14) {
            assert!((v.value - 1.0).abs() < 0.02, "{}", v.value);
        }
    }

    #[test]
    fn alternating_bits_are_attenuated() {
        let bits: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let t = block_trace(&bits, -2000.0, 5000);
        let bb = ddc_window(&t, -2000.0, 5000, 5000 + 20 * 1024);
        for (k, v) in demod_soft(&bb, 0, 3, 14).iter().enumerate() {
            assert!(v.value.abs() < 1.0);
            assert_eq!(v.value > 0.0, bits[k + 3] == 1);
        }
    }

    #[test]
    fn frequency_offset_bias() {
        let t = block_trace(&[1; 20], 1005.0, 5000);
        let bb = ddc_window(&t, 1000.0, 5000, 5000 + 20 * 1024);
        let bias = 5.0 * (2.048e-3 / 2.0) * 2.0 * std::f64::consts::PI / FRAC_PI_4;
        for v in &demod_soft(&bb, 0, 3, 14) {
            assert!((v.value - 1.0 - bias).abs() < 0.02, "{}", v.value);
        }
    }

    #[test]
    fn mrc_rules() {
        let a = vec![SoftSymbol::new(1.0), SoftSymbol::new(-0.5)];
        let b = vec![SoftSymbol::new(0.0), SoftSymbol::new(0.5)];
        let eq = mrc_combine(&[a.clone(), b.clone()], &[2.0, 2.0]);
        assert_eq!(eq[0].value, 0.5);
        assert_eq!(eq[1].value, 0.0);
        let only_b = mrc_combine(&[a, b.clone()], &[0.0, 3.0]);
        assert_eq!(only_b, b);
    }
}
