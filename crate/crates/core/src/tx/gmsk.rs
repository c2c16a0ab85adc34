//! GMSK modulation (BT = 1.0, pulse truncated to 3 symbols).
//!
//! Phase of symbol k at fraction u ∈ [0,1):
//!   φ = (π/2)·[Σ_{j≤k−2} a_j + a_{k−1}·q(u+½) + a_k·q(u−½) + a_{k+1}·q(u−3/2)]
//! where q is the integrated, renormalized frequency pulse. The block is extended by
//! repeating its first and last symbol so every symbol sees settled neighbours.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::{Complex32, Complex64};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::params::SAMPLES_PER_SYMBOL;
use crate::types::IqTrace;

pub const BT: f64 = 1.0;
const SPAN: f64 = 1.5;

fn sigma() -> f64 {
    (2f64.ln()).sqrt() / (2.0 * PI * BT)
}

/// Integrated frequency pulse, 0 before −1.5 symbols, 1 after +1.5.
pub fn phase_pulse(u: f64) -> f64 {
    let s = sigma();
    let n = Normal::standard();
    // ∫_{−∞}^{t} Φ(x/σ) dx = tΦ(t/σ) + σφ(t/σ)
    let psi = |t: f64| t * n.cdf(t / s) + s * n.pdf(t / s);
    let g = |t: f64| psi(t + 0.5) - psi(t - 0.5);
    let u = u.clamp(-SPAN, SPAN);
    (g(u) - g(-SPAN)) / (g(SPAN) - g(-SPAN))
}

#[derive(Debug, Clone)]
pub struct GmskModulator {
    sps: usize,
    q_prev: Vec<f64>,
    q_cur: Vec<f64>,
    q_next: Vec<f64>,
    /// e^{jψ} per (prev, cur, next) pattern and sample offset
    patterns: [Vec<Complex64>; 8],
}

impl GmskModulator {
    pub fn new(sps: usize) -> Self {
        assert!(sps >= 4, "need at least 4 samples per symbol");
        let us: Vec<f64> = (0..sps).map(|i| i as f64 / sps as f64).collect();
        let q_prev: Vec<f64> = us.iter().map(|&u| phase_pulse(u + 0.5)).collect();
        let q_cur: Vec<f64> = us.iter().map(|&u| phase_pulse(u - 0.5)).collect();
        let q_next: Vec<f64> = us.iter().map(|&u| phase_pulse(u - 1.5)).collect();
        let patterns = std::array::from_fn(|p| {
            let a = |bit: usize| if (p >> bit) & 1 == 1 { 1.0 } else { -1.0 };
            (0..sps)
                .map(|i| {
                    let psi = FRAC_PI_2 * (a(2) * q_prev[i] + a(1) * q_cur[i] + a(0) * q_next[i]);
                    Complex64::from_polar(1.0, psi)
                })
                .collect()
        });
        GmskModulator {
            sps,
            q_prev,
            q_cur,
            q_next,
            patterns,
        }
    }

    /// Shared modulator at the trace rate.
    pub fn standard() -> &'static GmskModulator {
        static M: OnceLock<GmskModulator> = OnceLock::new();
        M.get_or_init(|| GmskModulator::new(SAMPLES_PER_SYMBOL))
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    fn extended(bits: &[u8]) -> impl Fn(isize) -> u8 + '_ {
        move |k: isize| bits[k.clamp(0, bits.len() as isize - 1) as usize] & 1
    }

    /// Pattern index and j^m rotation of every symbol: the envelope of symbol k is
    /// `rotation · pattern(index)`.
    pub fn symbol_patterns(bits: &[u8]) -> Vec<(usize, Complex64)> {
        if bits.is_empty() {
            return Vec::new();
        }
        let b = Self::extended(bits);
        // j^m accumulates the fully settled symbols j ≤ k−2
        let mut quarter = 0i32;
        (0..bits.len() as isize)
            .map(|k| {
                let p = ((b(k - 1) as usize) << 2) | ((b(k) as usize) << 1) | b(k + 1) as usize;
                let rot = match quarter.rem_euclid(4) {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, 1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, -1.0),
                };
                quarter += if b(k - 1) == 1 { 1 } else { -1 };
                (p, rot)
            })
            .collect()
    }

    pub fn pattern(&self, p: usize) -> &[Complex64] {
        &self.patterns[p]
    }

    /// Complex envelope of a block, `bits.len() * sps` samples.
    pub fn modulate(&self, bits: &[u8]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(bits.len() * self.sps);
        for (p, rot) in Self::symbol_patterns(bits) {
            out.extend(self.patterns[p].iter().map(|&z| z * rot));
        }
        out
    }

    /// Unwrapped phase of a block, same sampling as `modulate`.
    pub fn phase(&self, bits: &[u8]) -> Vec<f64> {
        let mut out = Vec::with_capacity(bits.len() * self.sps);
        if bits.is_empty() {
            return out;
        }
        let b = Self::extended(bits);
        let a = |k: isize| if b(k) == 1 { 1.0 } else { -1.0 };
        let mut settled = 0.0;
        for k in 0..bits.len() as isize {
            for i in 0..self.sps {
                out.push(
                    FRAC_PI_2
                        * (settled
                            + a(k - 1) * self.q_prev[i]
                            + a(k) * self.q_cur[i]
                            + a(k + 1) * self.q_next[i]),
                );
            }
            settled += a(k - 1);
        }
        out
    }
}

/// Unit-amplitude single-antenna GMSK waveform.
pub fn gmsk_modulate(bits: &[u8], samples_per_symbol: usize) -> IqTrace {
    let m = if samples_per_symbol == SAMPLES_PER_SYMBOL {
        GmskModulator::standard().clone()
    } else {
        GmskModulator::new(samples_per_symbol)
    };
    let s: Vec<Complex32> = m
        .modulate(bits)
        .into_iter()
        .map(|z| Complex32::new(z.re as f32, z.im as f32))
        .collect();
    let rate = samples_per_symbol as f64 * crate::params::SYMBOL_RATE_HZ;
    IqTrace::single(s, rate).expect("finite samples")
}
