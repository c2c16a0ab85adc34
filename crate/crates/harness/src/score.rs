//! Matching decoded packets against ground truth.

use lrfhss_core::channel::{GroundTruth, TruthPacket};
use lrfhss_core::params::{channel_center_freq, OBW_HZ, SAMPLES_PER_SYMBOL};
use lrfhss_core::receiver::RxReport;
use lrfhss_core::{BlockKind, DataRate, DecodedPacket};
use serde::{Deserialize, Serialize};

/// Start-time tolerance when matching a decode or header to a transmitted packet.
pub const MATCH_TOLERANCE_SAMPLES: i64 = 2 * SAMPLES_PER_SYMBOL as i64;

/// Width of a collision-fraction bin.
pub const COLLISION_BIN: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateMetrics {
    pub transmitted: usize,
    pub decoded: usize,
    pub payload_bits: usize,
    /// Packets by number of header replicas detected (0..=3).
    pub header_histogram: [usize; 4],
    /// (transmitted, decoded) per collision-fraction bin of width 0.1.
    pub collision_bins: Vec<(usize, usize)>,
}

impl RateMetrics {
    pub fn prr(&self) -> f64 {
        if self.transmitted == 0 {
            1.0
        } else {
            self.decoded as f64 / self.transmitted as f64
        }
    }

    pub fn merge(&mut self, o: &RateMetrics) {
        self.transmitted += o.transmitted;
        self.decoded += o.decoded;
        self.payload_bits += o.payload_bits;
        for (a, b) in self.header_histogram.iter_mut().zip(o.header_histogram) {
            *a += b;
        }
        if self.collision_bins.len() < o.collision_bins.len() {
            self.collision_bins.resize(o.collision_bins.len(), (0, 0));
        }
        for (a, b) in self.collision_bins.iter_mut().zip(&o.collision_bins) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dr8: RateMetrics,
    pub dr9: RateMetrics,
    /// CRC-passing decodes that match no transmitted packet.
    pub false_decodes: usize,
}

impl Metrics {
    pub fn rate(&self, dr: DataRate) -> &RateMetrics {
        match dr {
            DataRate::Dr8 => &self.dr8,
            DataRate::Dr9 => &self.dr9,
        }
    }

    fn rate_mut(&mut self, dr: DataRate) -> &mut RateMetrics {
        match dr {
            DataRate::Dr8 => &mut self.dr8,
            DataRate::Dr9 => &mut self.dr9,
        }
    }

    pub fn transmitted(&self) -> usize {
        self.dr8.transmitted + self.dr9.transmitted
    }

    pub fn decoded(&self) -> usize {
        self.dr8.decoded + self.dr9.decoded
    }

    pub fn payload_bits(&self) -> usize {
        self.dr8.payload_bits + self.dr9.payload_bits
    }

    pub fn prr(&self) -> f64 {
        if self.transmitted() == 0 {
            1.0
        } else {
            self.decoded() as f64 / self.transmitted() as f64
        }
    }

    pub fn merge(&mut self, o: &Metrics) {
        self.dr8.merge(&o.dr8);
        self.dr9.merge(&o.dr9);
        self.false_decodes += o.false_decodes;
    }
}

fn block_freq(p: &TruthPacket, channel: usize) -> f64 {
    channel_center_freq(channel).expect("truth channels valid") + p.freq_offset_hz
}

/// Fraction of the packet's fragment symbols that overlap another packet's block in time
/// while the two carriers are within one OBW of each other.
pub fn collision_fraction(truth: &GroundTruth, id: usize) -> f64 {
    let me = &truth.packets[id];
    let t = SAMPLES_PER_SYMBOL as i64;
    let mut total = 0usize;
    let mut hit = 0usize;
    for b in me.plan.blocks.iter().filter(|b| b.kind == BlockKind::Fragment) {
        let f = block_freq(me, b.channel_index);
        let others: Vec<(i64, i64)> = truth
            .packets
            .iter()
            .filter(|o| o.id != id)
            .flat_map(|o| {
                o.plan
                    .blocks
                    .iter()
                    .filter(move |ob| (block_freq(o, ob.channel_index) - f).abs() < OBW_HZ)
                    .map(|ob| (ob.start_sample, ob.end_sample()))
            })
            .filter(|&(s, e)| s < b.end_sample() && e > b.start_sample)
            .collect();
        for k in 0..b.n_symbols as i64 {
            let s0 = b.start_sample + k * t;
            let s1 = s0 + t;
            total += 1;
            if others.iter().any(|&(s, e)| s < s1 && e > s0) {
                hit += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

fn matches(d: &DecodedPacket, p: &TruthPacket) -> bool {
    d.hop_sequence_id == p.hop_sequence_id
        && d.data_rate == p.data_rate
        && d.payload == p.payload()
        && (d.start_sample() - p.start_sample as i64).abs() <= MATCH_TOLERANCE_SAMPLES
}

/// Greedy one-to-one matching: per truth packet the index of its decode, if any.
fn assign(report: &RxReport, truth: &GroundTruth) -> (Vec<Option<usize>>, Vec<bool>) {
    let mut used = vec![false; report.packets.len()];
    let hits = truth
        .packets
        .iter()
        .map(|p| {
            let hit = report
                .packets
                .iter()
                .enumerate()
                .find(|(i, d)| !used[*i] && d.crc_ok && matches(d, p))
                .map(|(i, _)| i);
            if let Some(i) = hit {
                used[i] = true;
            }
            hit
        })
        .collect();
    (hits, used)
}

/// Whether each truth packet was decoded.
pub fn decoded_flags(report: &RxReport, truth: &GroundTruth) -> Vec<bool> {
    assign(report, truth).0.iter().map(Option::is_some).collect()
}

pub fn score(report: &RxReport, truth: &GroundTruth) -> Metrics {
    let mut m = Metrics::default();
    let n_bins = (1.0 / COLLISION_BIN).round() as usize + 1;
    let (hits, used) = assign(report, truth);
    for (p, hit) in truth.packets.iter().zip(hits) {
        let replicas = p
            .plan
            .headers()
            .filter(|b| {
                report.headers.iter().any(|h| {
                    h.crc_ok
                        && h.fields.hop_sequence_id == p.hop_sequence_id
                        && (h.start_sample_est - b.start_sample).abs() <= MATCH_TOLERANCE_SAMPLES
                })
            })
            .count();
        let cf = collision_fraction(truth, p.id);
        let r = m.rate_mut(p.data_rate);
        r.transmitted += 1;
        r.header_histogram[replicas.min(3)] += 1;
        if r.collision_bins.is_empty() {
            r.collision_bins = vec![(0, 0); n_bins];
        }
        let bin = ((cf / COLLISION_BIN) as usize).min(n_bins - 1);
        r.collision_bins[bin].0 += 1;
        if hit.is_some() {
            r.decoded += 1;
            r.payload_bits += 8 * p.payload_hex.len() / 2;
            r.collision_bins[bin].1 += 1;
        }
    }
    m.false_decodes = report
        .packets
        .iter()
        .zip(&used)
        .filter(|(d, u)| d.crc_ok && !**u)
        .count();
    m
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = k as f64 / n;
    let d = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / d;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / d;
    ((c - h).max(0.0), (c + h).min(1.0))
}

/// SNR where the PRR curve first reaches `target`, linear between straddling points.
pub fn interpolate_threshold(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // highest SNR at which the curve is still below target, then the next point up
    let last_below = pts.iter().rposition(|&(_, p)| p < target);
    match last_below {
        None => pts.first().map(|p| p.0),
        Some(i) if i + 1 < pts.len() => {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[i + 1];
            Some(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
        }
        Some(_) => None,
    }
}
