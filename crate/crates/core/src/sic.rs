//! Successive interference cancellation: channel estimation, waveform reconstruction
//! and subtraction of decoded packets.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use crate::dsp::{ddc_lpf, ddc_window, Baseband, DdcFilters, BB_PER_SYMBOL, DECIMATION};
use crate::error::{Error, Result};
use crate::params::{channel_center_freq, SAMPLES_PER_SYMBOL, SAMPLE_RATE_HZ, SYMBOL_TIME_S};
use crate::rx::demod::{block_energy, mrc_weights};
use crate::tx::gmsk::GmskModulator;
use crate::tx::packet::{block_symbols, carrier};
use crate::types::{DecodedPacket, IqTrace, PacketConfig};

/// Samples per symbol of the phase-difference matrix.
pub const RECON_SPS: usize = 4;
pub const RECON_SEGMENT_SYMBOLS: usize = 10;
/// Baseband samples between consecutive Θ samples.
const THETA_STRIDE: usize = BB_PER_SYMBOL / RECON_SPS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau_s: f64,
    pub confident: bool,
    pub transitions: usize,
}

/// One block observation for timing estimation: received and ideal baseband on the
/// same grid (origin at the nominal block start) plus the transmitted bits.
pub struct TauObservation<'a> {
    pub received: &'a Baseband,
    pub ideal: &'a Baseband,
    pub bits: &'a [u8],
}

/// Timing error from the phase advance across bit transitions.
///
/// Sampling a transition late by τ shifts the centre-to-centre phase change by −πτ/T for
/// a 0→1 transition and +πτ/T for 1→0. The ideal waveform's own change is removed first.
pub fn estimate_tau(obs: &[TauObservation]) -> TauEstimate {
    let mut acc = 0.0;
    let mut count = 0usize;
    for o in obs {
        let n_ant = o.received.n_antennas();
        let n_sym = o.bits.len();
        let e: Vec<f64> = (0..n_ant).map(|a| block_energy(o.received, a, 0, n_sym)).collect();
        let w = mrc_weights(&e);
        let ideal = &o.ideal.antennas[0];
        for k in 0..n_sym.saturating_sub(1) {
            if o.bits[k] == o.bits[k + 1] {
                continue;
            }
            let c0 = k * BB_PER_SYMBOL + BB_PER_SYMBOL / 2;
            let c1 = c0 + BB_PER_SYMBOL;
            if c1 >= o.received.len() || c1 >= ideal.len() {
                continue;
            }
            let sign = if o.bits[k + 1] == 1 { 1.0 } else { -1.0 };
            let d_ideal = (ideal[c1] * ideal[c0].conj()).arg();
            let d: f64 = (0..n_ant)
                .map(|a| {
                    let r = &o.received.antennas[a];
                    w[a] * wrap(((r[c1] * r[c0].conj()).arg()) - d_ideal)
                })
                .sum();
            acc += sign * d;
            count += 1;
        }
    }
    if count < 4 {
        return TauEstimate {
            tau_s: 0.0,
            confident: false,
            transitions: count,
        };
    }
    TauEstimate {
        tau_s: -(SYMBOL_TIME_S / PI) * acc / count as f64,
        confident: true,
        transitions: count,
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Least-squares (δ, θ_a) for Θ_{a,t} ≈ δ·t + θ_a, t = 1..N, weighted by w_a (Σw = 1).
/// δ is in radians per Θ sample.
pub fn estimate_delta_theta(theta: &[Vec<f64>], w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = theta.first().map_or(0, |r| r.len());
    if n < 2 {
        return Err(Error::InvalidParameter("recon segment needs N ≥ 2".into()));
    }
    let nf = n as f64;
    let mut s_t = 0.0;
    let mut s_0 = 0.0;
    for (row, &wa) in theta.iter().zip(w) {
        for (i, &v) in row.iter().enumerate() {
            s_t += wa * v * (i + 1) as f64;
            s_0 += wa * v;
        }
    }
    let den = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0 - nf * (nf + 1.0).powi(2) / 4.0;
    let delta = (s_t - (nf + 1.0) / 2.0 * s_0) / den;
    let th = theta
        .iter()
        .map(|row| row.iter().sum::<f64>() / nf - (nf + 1.0) * delta / 2.0)
        .collect();
    Ok((delta, th))
}

/// Channel parameters of one recon-segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconSegment {
    /// Index of the first Θ sample within the block.
    pub first: usize,
    pub n: usize,
    /// Residual frequency, rad per Θ sample.
    pub delta: f64,
    pub theta: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ReconSegment {
    pub fn delta_hz(&self) -> f64 {
        self.delta / (2.0 * PI) * SAMPLE_RATE_HZ / (DECIMATION * THETA_STRIDE) as f64
    }
}

fn trimmed_mean(mut v: Vec<f64>, frac: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (v.len() as f64 * frac).floor() as usize;
    let s = &v[k..v.len() - k];
    s.iter().sum::<f64>() / s.len() as f64
}

fn unwrap_phase(p: &mut [f64]) {
    for i in 1..p.len() {
        let d = p[i] - p[i - 1];
        p[i] -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
    }
}

/// Fits every recon-segment of a block from received and ideal baseband on one grid.
pub fn estimate_segments(received: &Baseband, ideal: &Baseband, n_symbols: usize) -> Vec<ReconSegment> {
    let n_ant = received.n_antennas();
    let n_pts = n_symbols * RECON_SPS;
    let idx = |i: usize| i * THETA_STRIDE;
    let ideal0 = &ideal.antennas[0];
    let mut theta: Vec<Vec<f64>> = (0..n_ant)
        .map(|a| {
            (0..n_pts)
                .map(|i| (received.antennas[a][idx(i)] * ideal0[idx(i)].conj()).arg())
                .collect()
        })
        .collect();
    theta.iter_mut().for_each(|r| unwrap_phase(r));
    let seg = RECON_SEGMENT_SYMBOLS * RECON_SPS;
    let mut out = Vec::new();
    let mut first = 0;
    while first < n_pts {
        let mut n = seg.min(n_pts - first);
        // fold a short tail into the previous segment
        if n_pts - first - n < RECON_SPS * 2 {
            n = n_pts - first;
        }
        let rows: Vec<Vec<f64>> = theta.iter().map(|r| r[first..first + n].to_vec()).collect();
        let e: Vec<f64> = (0..n_ant)
            .map(|a| (first..first + n).map(|i| received.antennas[a][idx(i)].norm_sqr()).sum())
            .collect();
        let w = mrc_weights(&e);
        let (delta, th) = estimate_delta_theta(&rows, &w).unwrap_or((0.0, vec![0.0; n_ant]));
        let ideal_mag = trimmed_mean((first..first + n).map(|i| ideal0[idx(i)].norm()).collect(), 0.1);
        let amplitude = (0..n_ant)
            .map(|a| {
                let m = trimmed_mean(
                    (first..first + n).map(|i| received.antennas[a][idx(i)].norm()).collect(),
                    0.1,
                );
                if ideal_mag > 0.0 {
                    m / ideal_mag
                } else {
                    0.0
                }
            })
            .collect();
        out.push(ReconSegment {
            first,
            n,
            delta,
            theta: th,
            amplitude,
            weights: w,
        });
        first += n;
    }
    out
}

/// Complex gain per antenna at every Θ sample of the block.
pub fn segment_gains(segments: &[ReconSegment], n_ant: usize) -> Vec<Vec<Complex64>> {
    (0..n_ant)
        .map(|a| {
            segments
                .iter()
                .flat_map(|s| {
                    (1..=s.n).map(move |t| {
                        Complex64::from_polar(s.amplitude[a], s.theta[a] + s.delta * t as f64)
                    })
                })
                .collect()
        })
        .collect()
}

/// Linear interpolation of per-Θ-sample gains at position `num/den` in Θ samples,
/// held at the ends.
fn gain_at(g: &[Complex64], num: i64, den: i64) -> Complex64 {
    if num <= 0 {
        return g[0];
    }
    let i = (num / den) as usize;
    if i + 1 >= g.len() {
        return g[g.len() - 1];
    }
    let f = (num % den) as f64 / den as f64;
    g[i] * (1.0 - f) + g[i + 1] * f
}

/// Full-rate reconstruction of one block at its trace position, per antenna.
#[derive(Debug, Clone)]
pub struct BlockRecon {
    pub start_sample: i64,
    pub freq_hz: f64,
    pub samples: Vec<Vec<Complex32>>,
    pub segments: Vec<ReconSegment>,
}

/// Filtered, decimated response of each GMSK symbol pattern, for one sub-grid offset.
struct PatternResponses {
    /// Output index of the pattern's first sample minus `lead`.
    lead: i64,
    resp: [Vec<Complex64>; 8],
}

fn pattern_responses(r: usize) -> &'static PatternResponses {
    static TABLES: OnceLock<Vec<OnceLock<PatternResponses>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| (0..DECIMATION).map(|_| OnceLock::new()).collect());
    tables[r].get_or_init(|| {
        let f = DdcFilters::get();
        let reach = f.stage1.len() / 2 + (f.stage2.len() / 2) * DECIMATION;
        let lead = reach.div_ceil(DECIMATION) + 1;
        let h = lead * DECIMATION;
        let len = 2 * h + r + SAMPLES_PER_SYMBOL;
        let n_out = len / DECIMATION + 1;
        let m = GmskModulator::standard();
        let resp = std::array::from_fn(|p| {
            let mut buf = vec![Complex32::new(0.0, 0.0); len];
            for (d, z) in buf[h + r..].iter_mut().zip(m.pattern(p)) {
                *d = Complex32::new(z.re as f32, z.im as f32);
            }
            let local = IqTrace::single(buf, SAMPLE_RATE_HZ).expect("finite");
            ddc_lpf(&local, 0.0, 0, n_out).antennas.swap_remove(0)
        });
        PatternResponses {
            lead: lead as i64,
            resp,
        }
    })
}

/// Ideal block baseband for a block starting at `start`, on the grid anchored at `origin`.
/// The low-pass filter is linear and a symbol spans a whole number of output samples, so
/// the block response is a superposition of per-pattern responses.
fn ideal_baseband(bits: &[u8], start: i64, origin: i64, n_out: usize) -> Baseband {
    let d = start - origin;
    let q = d.div_euclid(DECIMATION as i64);
    let t = pattern_responses(d.rem_euclid(DECIMATION as i64) as usize);
    let mut out = vec![Complex64::new(0.0, 0.0); n_out];
    for (k, (p, rot)) in GmskModulator::symbol_patterns(bits).into_iter().enumerate() {
        let base = q + (k * BB_PER_SYMBOL) as i64 - t.lead;
        for (i, z) in t.resp[p].iter().enumerate() {
            let j = base + i as i64;
            if j >= 0 && (j as usize) < n_out {
                out[j as usize] += rot * z;
            }
        }
    }
    Baseband {
        antennas: vec![out],
        origin,
        freq_hz: 0.0,
    }
}

/// Builds a full-rate block from the ideal waveform and per-segment gains.
/// `received`/`ideal` share the grid anchored at the nominal start; the waveform sits
/// `shift` samples later. Returns None if the model would not reduce in-channel energy.
pub fn reconstruct_block(
    wave: &[Complex64],
    nominal_start: i64,
    shift: i64,
    freq_hz: f64,
    received: &Baseband,
    ideal: &Baseband,
    n_symbols: usize,
) -> Option<BlockRecon> {
    let n_ant = received.n_antennas();
    let segments = estimate_segments(received, ideal, n_symbols);
    let gains = segment_gains(&segments, n_ant);
    // energy safety on the baseband grid: the model must explain part of the block
    let n_bb = (n_symbols * BB_PER_SYMBOL).min(received.len());
    for a in 0..n_ant {
        let mut before = 0.0;
        let mut after = 0.0;
        for j in 0..n_bb {
            let g = gain_at(&gains[a], j as i64, THETA_STRIDE as i64);
            let r = received.antennas[a][j];
            before += r.norm_sqr();
            after += (r - g * ideal.antennas[0][j]).norm_sqr();
        }
        if after >= before {
            return None;
        }
    }
    let start = nominal_start + shift;
    let samples = (0..n_ant)
        .map(|a| {
            wave.iter()
                .zip(carrier(freq_hz, start, wave.len()))
                .enumerate()
                .map(|(n, (z, c))| {
                    let v = z * gain_at(&gains[a], shift + n as i64, (DECIMATION * THETA_STRIDE) as i64) * c;
                    Complex32::new(v.re as f32, v.im as f32)
                })
                .collect()
        })
        .collect();
    Some(BlockRecon {
        start_sample: start,
        freq_hz,
        samples,
        segments,
    })
}

/// Packet reconstruction: τ from all blocks, then per-block segment fits.
pub struct PacketRecon {
    pub tau: TauEstimate,
    pub blocks: Vec<BlockRecon>,
}

pub fn reconstruct_packet(trace: &IqTrace, pkt: &DecodedPacket) -> PacketRecon {
    let cfg = PacketConfig {
        data_rate: pkt.data_rate,
        payload: pkt.payload.clone(),
        hop_sequence_id: pkt.hop_sequence_id,
        group: pkt.group,
    };
    let bits = block_symbols(&cfg, pkt.header_initial_state);
    let m = GmskModulator::standard();
    let waves: Vec<Vec<Complex64>> = bits.iter().map(|b| m.modulate(b)).collect();
    let blocks = &pkt.hop_plan.blocks;
    let freqs: Vec<f64> = blocks
        .iter()
        .map(|b| channel_center_freq(b.channel_index).expect("valid plan") + pkt.cfo_hz)
        .collect();
    let received: Vec<Baseband> = blocks
        .iter()
        .zip(&freqs)
        .map(|(b, &f)| ddc_window(trace, f, b.start_sample, b.end_sample()))
        .collect();
    let ideal0: Vec<Baseband> = blocks
        .iter()
        .zip(&bits)
        .zip(&received)
        .map(|((b, bits), r)| ideal_baseband(bits, b.start_sample, b.start_sample, r.len()))
        .collect();
    let obs: Vec<TauObservation> = received
        .iter()
        .zip(&ideal0)
        .zip(&bits)
        .map(|((r, i), b)| TauObservation {
            received: r,
            ideal: i,
            bits: b,
        })
        .collect();
    let tau = estimate_tau(&obs);
    let max_shift = (SAMPLES_PER_SYMBOL / 5) as i64;
    let shift = ((tau.tau_s * SAMPLE_RATE_HZ).round() as i64).clamp(-max_shift, max_shift);
    let out = blocks
        .iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let ideal = if shift == 0 {
                ideal0[i].clone()
            } else {
                ideal_baseband(&bits[i], b.start_sample + shift, b.start_sample, received[i].len())
            };
            reconstruct_block(&waves[i], b.start_sample, shift, freqs[i], &received[i], &ideal, b.n_symbols)
        })
        .collect();
    PacketRecon { tau, blocks: out }
}

/// Subtracts reconstructed blocks; samples outside them are untouched.
pub fn subtract_packet(trace: &mut IqTrace, recon: &PacketRecon) {
    let len = trace.len() as i64;
    for b in &recon.blocks {
        for (a, s) in b.samples.iter().enumerate() {
            let dst = trace.antenna_mut(a);
            for (n, z) in s.iter().enumerate() {
                let i = b.start_sample + n as i64;
                if (0..len).contains(&i) {
                    dst[i as usize] -= z;
                }
            }
        }
    }
}
