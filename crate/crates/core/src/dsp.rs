//! Down-conversion, low-pass filtering, interpolation and band-limited noise.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::params::{OCW_HZ, SAMPLE_RATE_HZ};
use crate::types::IqTrace;

/// Decimation from the trace rate to the baseband rate (16 samples per symbol).
pub const DECIMATION: usize = 64;
pub const BASEBAND_RATE_HZ: f64 = SAMPLE_RATE_HZ / DECIMATION as f64;
pub const BB_PER_SYMBOL: usize = crate::params::SAMPLES_PER_SYMBOL / DECIMATION;

const STAGE2_CUTOFF_HZ: f64 = 240.0;
const STAGE2_TRANSITION_HZ: f64 = 440.0;
const STAGE2_ATTEN_DB: f64 = 66.0;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let y = x * x / 4.0;
    for k in 1..200 {
        term *= y / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-window low-pass taps normalised to unit DC gain.
pub fn kaiser_lowpass(cutoff_hz: f64, transition_hz: f64, atten_db: f64, fs: f64) -> Vec<f64> {
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let n = ((atten_db - 7.95) / (2.285 * 2.0 * PI * transition_hz / fs)).ceil() as usize;
    let n = n | 1;
    let m = (n - 1) as f64 / 2.0;
    let fc = cutoff_hz / fs;
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let r = t / m;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(beta)
        })
        .collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= s);
    h
}

fn box_cascade(lengths: &[usize]) -> Vec<f64> {
    let mut h = vec![1.0];
    for &l in lengths {
        let mut out = vec![0.0; h.len() + l - 1];
        for (i, &a) in h.iter().enumerate() {
            for o in &mut out[i..i + l] {
                *o += a / l as f64;
            }
        }
        h = out;
    }
    h
}

/// The two filter stages: a CIC-style box cascade at the trace rate and a FIR after decimation.
pub struct DdcFilters {
    pub stage1: Vec<f64>,
    pub stage2: Vec<f64>,
}

impl DdcFilters {
    pub fn get() -> &'static DdcFilters {
        static F: OnceLock<DdcFilters> = OnceLock::new();
        F.get_or_init(|| DdcFilters {
            stage1: box_cascade(&[64, 64, 65]),
            stage2: kaiser_lowpass(
                STAGE2_CUTOFF_HZ,
                STAGE2_TRANSITION_HZ,
                STAGE2_ATTEN_DB,
                BASEBAND_RATE_HZ,
            ),
        })
    }

    /// Overall magnitude response at `f` Hz offset from the tuned frequency.
    pub fn response(&self, f: f64) -> f64 {
        let eval = |h: &[f64], fs: f64| {
            let m = (h.len() - 1) as f64 / 2.0;
            h.iter()
                .enumerate()
                .map(|(i, &c)| Complex64::from_polar(c, -2.0 * PI * f * (i as f64 - m) / fs))
                .sum::<Complex64>()
                .norm()
        };
        eval(&self.stage1, SAMPLE_RATE_HZ) * eval(&self.stage2, BASEBAND_RATE_HZ)
    }

    /// ∫|H(f)|² df over the baseband Nyquist zone.
    pub fn noise_bandwidth_hz(&self) -> f64 {
        let n = 4000;
        let df = BASEBAND_RATE_HZ / n as f64;
        (0..n)
            .map(|i| {
                let f = -BASEBAND_RATE_HZ / 2.0 + (i as f64 + 0.5) * df;
                self.response(f).powi(2) * df
            })
            .sum()
    }
}

/// Filtered baseband at 16 samples per symbol; sample k sits at trace index origin + 64k.
#[derive(Debug, Clone)]
pub struct Baseband {
    pub antennas: Vec<Vec<Complex64>>,
    pub origin: i64,
    pub freq_hz: f64,
}

impl Baseband {
    pub fn len(&self) -> usize {
        self.antennas[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_antennas(&self) -> usize {
        self.antennas.len()
    }

    /// Fractional baseband index of trace position `pos`.
    pub fn index_of(&self, pos: f64) -> f64 {
        (pos - self.origin as f64) / DECIMATION as f64
    }

    /// Linear interpolation at fractional baseband index; zero outside.
    pub fn at(&self, a: usize, idx: f64) -> Complex64 {
        let s = &self.antennas[a];
        if idx < 0.0 || idx > (s.len() - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = idx.floor() as usize;
        let f = idx - i as f64;
        if f == 0.0 || i + 1 >= s.len() {
            s[i]
        } else {
            s[i] * (1.0 - f) + s[i + 1] * f
        }
    }

    pub fn mean_power(&self) -> f64 {
        let n = (self.len() * self.n_antennas()).max(1) as f64;
        self.antennas.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / n
    }
}

/// Moves `freq_hz` to DC and low-pass filters, producing `n_out` baseband samples
/// centred at origin + 64k. Samples outside the trace count as zero.
pub fn ddc_lpf(trace: &IqTrace, freq_hz: f64, origin: i64, n_out: usize) -> Baseband {
    let f = DdcFilters::get();
    let h1 = &f.stage1;
    let h2 = &f.stage2;
    let half1 = (h1.len() / 2) as i64;
    let half2 = h2.len() / 2;
    let w = 2.0 * PI * freq_hz / SAMPLE_RATE_HZ;
    // stage-1 taps with the down-mix folded in: e^{−jω(c+m)} = e^{−jωc}·e^{−jωm}
    let taps: Vec<Complex32> = h1
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let z = Complex64::from_polar(c, -w * (i as i64 - half1) as f64);
            Complex32::new(z.re as f32, z.im as f32)
        })
        .collect();
    let n1 = n_out + 2 * half2;
    let len = trace.len() as i64;
    let antennas = trace
        .antennas()
        .iter()
        .map(|x| {
            let s1: Vec<Complex64> = (0..n1)
                .map(|j| {
                    let c = origin + (j as i64 - half2 as i64) * DECIMATION as i64;
                    let lo = c - half1;
                    let (t0, x0) = if lo < 0 { ((-lo) as usize, 0usize) } else { (0, lo as usize) };
                    let hi = (c + half1 + 1).min(len);
                    if hi <= 0 || x0 as i64 >= hi {
                        return Complex64::new(0.0, 0.0);
                    }
                    let xs = &x[x0..hi as usize];
                    // single-precision MACs over ≤ 191 taps: error far below the f32 input's
                    let mut acc = Complex32::new(0.0, 0.0);
                    for (t, z) in taps[t0..].iter().zip(xs) {
                        acc += t * z;
                    }
                    let acc = Complex64::new(acc.re as f64, acc.im as f64);
                    let cycles = freq_hz * c as f64 / SAMPLE_RATE_HZ;
                    acc * Complex64::from_polar(1.0, -2.0 * PI * (cycles - cycles.floor()))
                })
                .collect();
            (0..n_out)
                .map(|k| {
                    s1[k..k + h2.len()]
                        .iter()
                        .zip(h2)
                        .map(|(z, &c)| z * c)
                        .sum::<Complex64>()
                })
                .collect()
        })
        .collect();
    Baseband {
        antennas,
        origin,
        freq_hz,
    }
}

/// Baseband covering trace samples [start, end) with the grid anchored at `start`.
pub fn ddc_window(trace: &IqTrace, freq_hz: f64, start: i64, end: i64) -> Baseband {
    let n = ((end - start).max(0) as usize).div_ceil(DECIMATION) + 1;
    ddc_lpf(trace, freq_hz, start, n)
}

/// Smallest 2^a·3^b·5^c ≥ n.
pub fn fast_fft_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Complex Gaussian noise of unit mean power, flat over the OCW and zero outside it.
pub fn ocw_noise<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<Complex32> {
    if len == 0 {
        return Vec::new();
    }
    let n = fast_fft_len(len);
    let df = SAMPLE_RATE_HZ / n as f64;
    let kmax = ((OCW_HZ / 2.0) / df).floor() as usize;
    let n_in = 2 * kmax + 1;
    let sd = (0.5 / n_in as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let draw = |rng: &mut R| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sd, im * sd)
    };
    buf[0] = draw(rng);
    for k in 1..=kmax {
        buf[k] = draw(rng);
        buf[n - k] = draw(rng);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.truncate(len);
    buf.into_iter()
        .map(|z| Complex32::new(z.re as f32, z.im as f32))
        .collect()
}
