//! Header acquisition: spectral screening, coarse timing, fine time/frequency search.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::{Complex32, Complex64};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::RxConfig;
use crate::dsp::{ddc_lpf, Baseband, BB_PER_SYMBOL, DECIMATION};
use crate::params::{
    channel_center_freq, nearest_channel, HEADER_SAMPLES, OCW_HZ, SAMPLES_PER_SYMBOL, SYMBOL_TIME_S,
    SYNC_BITS, SYNC_OFFSET_SYMBOLS,
};
use crate::tx::header::sync_word_bits;
use crate::types::IqTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateHeader {
    pub start_sample: i64,
    pub freq_hz: f64,
    pub score: f64,
}

/// Smoothed power spectra of consecutive segments, restricted to the OCW.
#[derive(Debug, Clone)]
pub struct SegmentSpectrum {
    pub segment_samples: usize,
    pub bin_hz: f64,
    /// Frequency of bin 0 of every row.
    pub first_bin_hz: f64,
    pub rows: Vec<Vec<f64>>,
    pub peaks: Vec<Vec<usize>>,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let h = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-h..=h).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

pub fn segment_spectra(trace: &IqTrace, cfg: &RxConfig) -> SegmentSpectrum {
    let n = cfg.segment_samples;
    let n_seg = trace.len() / n;
    let fs = trace.sample_rate_hz();
    let bin_hz = fs / n as f64;
    let kmax = ((OCW_HZ / 2.0) / bin_hz).floor() as usize;
    let fft = FftPlanner::<f32>::new().plan_fft_forward(n);
    let window: Vec<f32> = (0..n)
        .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()) as f32)
        .collect();
    let kernel = gaussian_kernel(cfg.smoothing_sigma_bins);
    let half = kernel.len() / 2;
    let width = 2 * kmax + 1;
    let mut buf = vec![Complex32::new(0.0, 0.0); n];
    let mut scratch = vec![Complex32::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut rows = Vec::with_capacity(n_seg);
    let mut peaks = Vec::with_capacity(n_seg);
    let thr = 10f64.powf(cfg.peak_threshold_db / 10.0);
    let dyn_floor = 10f64.powf(-cfg.dynamic_range_db / 10.0);
    let w = cfg.smoothing_sigma_bins.round().max(1.0) as usize;
    for s in 0..n_seg {
        let mut power = vec![0.0f64; width];
        for x in trace.antennas() {
            for ((b, z), w) in buf.iter_mut().zip(&x[s * n..(s + 1) * n]).zip(&window) {
                *b = z * w;
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (j, p) in power.iter_mut().enumerate() {
                let k = (j + n - kmax) % n;
                *p += buf[k].norm_sqr() as f64;
            }
        }
        let smooth: Vec<f64> = (0..width)
            .map(|j| {
                let mut acc = 0.0;
                let mut norm = 0.0;
                for (t, &c) in kernel.iter().enumerate() {
                    let idx = j as i64 + t as i64 - half as i64;
                    if idx >= 0 && (idx as usize) < width {
                        acc += c * power[idx as usize];
                        norm += c;
                    }
                }
                acc / norm
            })
            .collect();
        let mut sorted = smooth.clone();
        let mid = sorted.len() / 2;
        let median = *sorted
            .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap())
            .1;
        let max = smooth.iter().cloned().fold(0.0, f64::max);
        let level = (thr * median).max(max * dyn_floor);
        let p: Vec<usize> = (0..width)
            .filter(|&j| {
                let v = smooth[j];
                if v <= level {
                    return false;
                }
                let lo = j.saturating_sub(w);
                let hi = (j + w).min(width - 1);
                // strict maximum against earlier neighbours, non-strict against later ones
                (lo..j).all(|i| smooth[i] < v) && (j + 1..=hi).all(|i| smooth[i] <= v)
            })
            .collect();
        rows.push(smooth);
        peaks.push(p);
    }
    SegmentSpectrum {
        segment_samples: n,
        bin_hz,
        first_bin_hz: -(kmax as f64) * bin_hz,
        rows,
        peaks,
    }
}

struct Chain {
    first_seg: usize,
    bins: Vec<usize>,
    ratios: Vec<f64>,
}

/// Finds header-like patterns: a spectral peak persisting over ≥ 5 consecutive segments.
pub fn screen_headers(trace: &IqTrace, cfg: &RxConfig) -> Vec<CandidateHeader> {
    let spec = segment_spectra(trace, cfg);
    let mut active: Vec<Chain> = Vec::new();
    let mut done: Vec<Chain> = Vec::new();
    let tol = cfg.chain_tolerance_bins as i64;
    for (s, (row, peaks)) in spec.rows.iter().zip(&spec.peaks).enumerate() {
        let mut sorted = row.clone();
        let mid = sorted.len() / 2;
        let median = *sorted
            .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap())
            .1;
        let mut order: Vec<usize> = peaks.clone();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        let mut extended = vec![false; active.len()];
        let mut fresh = Vec::new();
        for &p in &order {
            let best = active
                .iter()
                .enumerate()
                .filter(|(i, c)| !extended[*i] && (*c.bins.last().unwrap() as i64 - p as i64).abs() <= tol)
                .min_by_key(|(i, c)| ((*c.bins.last().unwrap() as i64 - p as i64).abs(), *i))
                .map(|(i, _)| i);
            let ratio = row[p] / median.max(f64::MIN_POSITIVE);
            match best {
                Some(i) => {
                    extended[i] = true;
                    active[i].bins.push(p);
                    active[i].ratios.push(ratio);
                }
                None => fresh.push(Chain {
                    first_seg: s,
                    bins: vec![p],
                    ratios: vec![ratio],
                }),
            }
        }
        let mut keep = Vec::new();
        for (c, e) in active.into_iter().zip(extended) {
            if e {
                keep.push(c);
            } else {
                done.push(c);
            }
        }
        keep.extend(fresh);
        active = keep;
    }
    done.extend(active);

    let min = cfg.min_chain_segments;
    let mut cands: Vec<(usize, CandidateHeader)> = Vec::new();
    for (ci, c) in done.iter().enumerate() {
        if c.bins.len() < min {
            continue;
        }
        // a long chain can hold several same-channel blocks; offer a start every
        // two segments so the ±L coarse search covers any header inside it
        let mut off = 0;
        while off + min <= c.bins.len() {
            let bins = &c.bins[off..off + min];
            let mut b: Vec<usize> = bins.to_vec();
            b.sort();
            let f = spec.first_bin_hz + b[b.len() / 2] as f64 * spec.bin_hz;
            let freq = nearest_channel(f)
                .and_then(|ch| channel_center_freq(ch).ok())
                .unwrap_or(f);
            let score = c.ratios[off..off + min].iter().sum::<f64>() / min as f64;
            cands.push((
                ci,
                CandidateHeader {
                    start_sample: ((c.first_seg + off) * spec.segment_samples) as i64,
                    freq_hz: freq,
                    score,
                },
            ));
            off += 2;
        }
    }
    // merge candidates of different chains that point at the same header
    cands.sort_by(|a, b| b.1.score.partial_cmp(&a.1.score).unwrap().then(a.1.start_sample.cmp(&b.1.start_sample)));
    let mut out: Vec<(usize, CandidateHeader)> = Vec::new();
    let seg = spec.segment_samples as i64;
    for (ci, c) in cands {
        let dup = out.iter().any(|(cj, o)| {
            *cj != ci
                && (o.start_sample - c.start_sample).abs() <= 3 * seg
                && (o.freq_hz - c.freq_hz).abs() < 0.5 * crate::params::OBW_HZ + 1.0
        });
        if !dup {
            out.push((ci, c));
        }
    }
    let mut out: Vec<CandidateHeader> = out.into_iter().map(|(_, c)| c).collect();
    out.sort_by(|a, b| a.start_sample.cmp(&b.start_sample).then(a.freq_hz.partial_cmp(&b.freq_hz).unwrap()));
    out
}

/// Baseband spanning every position the coarse and fine searches may visit.
pub fn acquisition_baseband(trace: &IqTrace, cand: &CandidateHeader, cfg: &RxConfig) -> Baseband {
    let l = cfg.segment_samples as i64;
    let span = (cfg.fine_time_span_symbols.ceil() as i64 + 1) * SAMPLES_PER_SYMBOL as i64;
    let origin = cand.start_sample - l - span;
    let end = cand.start_sample + l + HEADER_SAMPLES as i64 + span;
    let n = ((end - origin) as usize).div_ceil(DECIMATION) + 1;
    ddc_lpf(trace, cand.freq_hz, origin, n)
}

/// Start maximising header-length window energy over [S−L, S+L] in steps of T.
pub fn coarse_timing(bb: &Baseband, cand: &CandidateHeader, cfg: &RxConfig) -> i64 {
    let l = cfg.segment_samples as i64;
    let mut cum = vec![0.0f64; bb.len() + 1];
    for i in 0..bb.len() {
        let e: f64 = bb.antennas.iter().map(|a| a[i].norm_sqr()).sum();
        cum[i + 1] = cum[i] + e;
    }
    let d = HEADER_SAMPLES / DECIMATION;
    let t = SAMPLES_PER_SYMBOL as i64;
    let mut best = (f64::NEG_INFINITY, cand.start_sample);
    let mut x = cand.start_sample - l;
    while x <= cand.start_sample + l {
        let i0 = bb.index_of(x as f64).round();
        if i0 >= 0.0 {
            let i0 = i0 as usize;
            let i1 = (i0 + d).min(bb.len());
            if i0 < i1 {
                let e = cum[i1] - cum[i0];
                if e > best.0 {
                    best = (e, x);
                }
            }
        }
        x += t;
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineSync {
    /// Estimated header start (trace samples, fractional).
    pub start_sample: f64,
    /// Absolute frequency estimate.
    pub freq_hz: f64,
    /// |⟨r,ref⟩|² / (32·Σ|r|²); 1 for a perfect match.
    pub score: f64,
    pub energy: f64,
}

/// Ideal phase at the centre of each SyncWord symbol, assuming linear ramps.
pub fn sync_reference() -> Vec<Complex64> {
    let a: Vec<f64> = sync_word_bits().iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect();
    let mut acc = 0.0;
    a.iter()
        .map(|&ak| {
            let z = Complex64::from_polar(1.0, FRAC_PI_2 * (acc + ak / 2.0));
            acc += ak;
            z
        })
        .collect()
}

/// Grid search over timing (±5T, T/10) and frequency (±100 Hz, 5 Hz) around a coarse start.
/// Returns `None` when the best normalised score is below the floor.
pub fn fine_sync(bb: &Baseband, coarse_start: i64, cfg: &RxConfig) -> Option<FineSync> {
    let surface = fine_sync_surface(bb, coarse_start, cfg);
    let best = surface.best?;
    (best.score >= cfg.sync_score_floor).then_some(best)
}

pub struct SyncSurface {
    pub offsets: Vec<f64>,
    pub freqs: Vec<f64>,
    /// raw |⟨r,ref⟩|², offsets × freqs
    pub values: Vec<Vec<f64>>,
    pub best: Option<FineSync>,
}

pub fn fine_sync_surface(bb: &Baseband, coarse_start: i64, cfg: &RxConfig) -> SyncSurface {
    let reference = sync_reference();
    let t = SAMPLES_PER_SYMBOL as f64;
    let n_t = (cfg.fine_time_span_symbols * cfg.fine_time_steps_per_symbol as f64).round() as i64;
    let step = t / cfg.fine_time_steps_per_symbol as f64;
    let n_f = (cfg.fine_freq_span_hz / cfg.fine_freq_step_hz).round() as i64;
    let offsets: Vec<f64> = (-n_t..=n_t).map(|i| i as f64 * step).collect();
    let freqs: Vec<f64> = (-n_f..=n_f).map(|i| i as f64 * cfg.fine_freq_step_hz).collect();
    // rot[f][k] = conj(ref_k)·e^{−j2πf·kT}
    let rot: Vec<Vec<Complex64>> = freqs
        .iter()
        .map(|&f| {
            reference
                .iter()
                .enumerate()
                .map(|(k, r)| r.conj() * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64 * SYMBOL_TIME_S))
                .collect()
        })
        .collect();
    let mut values = vec![vec![0.0; freqs.len()]; offsets.len()];
    let mut best: Option<(f64, usize, usize, f64)> = None;
    let mut r = vec![Complex64::new(0.0, 0.0); SYNC_BITS];
    for (oi, &o) in offsets.iter().enumerate() {
        let mut power = 0.0;
        let mut row = vec![0.0; freqs.len()];
        for a in 0..bb.n_antennas() {
            for (k, rk) in r.iter_mut().enumerate() {
                let pos = coarse_start as f64 + o + (SYNC_OFFSET_SYMBOLS + k) as f64 * t + t / 2.0;
                *rk = bb.at(a, bb.index_of(pos));
                power += rk.norm_sqr();
            }
            for (fi, rf) in rot.iter().enumerate() {
                let ip: Complex64 = r.iter().zip(rf).map(|(x, y)| x * y).sum();
                row[fi] += ip.norm_sqr();
            }
        }
        for (fi, &v) in row.iter().enumerate() {
            let better = match best {
                None => true,
                Some((bv, boi, bfi, _)) => {
                    v > bv
                        || (v == bv
                            && (offsets[oi].abs(), freqs[fi]) < (offsets[boi].abs(), freqs[bfi]))
                }
            };
            if better {
                best = Some((v, oi, fi, power));
            }
        }
        values[oi] = row;
    }
    let n = SYNC_BITS as f64;
    let best = best.map(|(v, oi, fi, power)| FineSync {
        start_sample: coarse_start as f64 + offsets[oi],
        freq_hz: bb.freq_hz + freqs[fi],
        score: if power > 0.0 { v / (n * power) } else { 0.0 },
        energy: v / (n * n),
    });
    SyncSurface {
        offsets,
        freqs,
        values,
        best,
    }
}

/// DDC + coarse timing + fine search for one candidate.
pub fn acquire(trace: &IqTrace, cand: &CandidateHeader, cfg: &RxConfig) -> Option<FineSync> {
    let bb = acquisition_baseband(trace, cand, cfg);
    let coarse = coarse_timing(&bb, cand, cfg);
    fine_sync(&bb, coarse, cfg)
}

/// Symbol-centre baseband index of symbol `k` for a block starting at the baseband origin.
pub fn symbol_center_index(k: usize) -> usize {
    k * BB_PER_SYMBOL + BB_PER_SYMBOL / 2
}
