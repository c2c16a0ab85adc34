//! Loopback, PRR sweep, capacity and offline decode runs.

use std::path::Path;

use anyhow::{Context, Result};
use lrfhss_core::channel::GroundTruth;
use lrfhss_core::receiver::{sic_loop_with, Acquisition, RxReport};
use lrfhss_core::rx::decode::known_record;
use lrfhss_core::{DataRate, IqTrace};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::config::{trial_seed, ExperimentConfig, Variant};
use crate::score::{collision_fraction, decoded_flags, interpolate_threshold, score, wilson, Metrics, COLLISION_BIN};
use crate::synth::{single_packet_trace, synthesize_trace};
use crate::trace_io::read_trace;

pub const PRR_TARGET: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// CSV tables and pass/fail checks of one run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub tables: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, text) in &self.tables {
            std::fs::write(dir.join(name), text)?;
        }
        std::fs::write(dir.join("checks.json"), serde_json::to_string_pretty(&self.checks)?)?;
        Ok(())
    }
}

/// CSV text with a leading schema line.
fn csv_table<T: Serialize>(schema: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(format!("# {schema} v1\n").into_bytes());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Runs the receiver on a trace. Ideal acquisition feeds the true packet parameters
/// instead of the blind front end.
pub fn run_receiver(trace: &IqTrace, truth: &GroundTruth, variant: Variant, cfg: &ExperimentConfig) -> RxReport {
    let rx = variant.rx(&cfg.rx);
    let ideal = variant == Variant::IdealAcquisition || cfg.ideal_acquisition;
    let acq = if ideal {
        Acquisition::Known(
            truth
                .packets
                .iter()
                .map(|p| {
                    known_record(
                        trace,
                        p.data_rate,
                        p.payload_hex.len() / 2,
                        p.hop_sequence_id,
                        p.group,
                        p.start_sample as i64,
                        p.freq_offset_hz,
                    )
                })
                .collect(),
        )
    } else {
        Acquisition::Blind
    };
    sic_loop_with(trace, &rx, &acq)
}

#[derive(Serialize)]
struct LoopbackRow {
    data_rate: String,
    payload_bytes: usize,
    trials: usize,
    decoded: usize,
    false_decodes: usize,
}

/// TX → channel → RX for every data rate and payload length, `trials` packets each.
pub fn run_loopback(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut combos = Vec::new();
    for &dr in cfg.dr_mix.rates() {
        for len in cfg.payload_bytes[0]..=cfg.payload_bytes[1] {
            combos.push((dr, len));
        }
    }
    let mut rows = Vec::new();
    let mut total = (0, 0, 0);
    for (ci, &(dr, len)) in combos.iter().enumerate() {
        let per: Vec<Result<Metrics>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let c = ExperimentConfig {
                    payload_bytes: [len, len],
                    ..cfg.clone()
                };
                let (trace, truth) = single_packet_trace(&c, dr, cfg.loopback_snr_db, trial_seed(cfg.seed, ci as u64, t as u64))?;
                let rep = run_receiver(&trace, &truth, Variant::AsIs, cfg);
                Ok(score(&rep, &truth))
            })
            .collect();
        let mut m = Metrics::default();
        for r in per {
            m.merge(&r?);
        }
        total.0 += m.transmitted();
        total.1 += m.decoded();
        total.2 += m.false_decodes;
        rows.push(LoopbackRow {
            data_rate: dr.to_string(),
            payload_bytes: len,
            trials: m.transmitted(),
            decoded: m.decoded(),
            false_decodes: m.false_decodes,
        });
    }
    let min = cfg.expect.min_prr.unwrap_or(1.0);
    let prr = if total.0 == 0 { 1.0 } else { total.1 as f64 / total.0 as f64 };
    Ok(RunOutput {
        tables: vec![("loopback.csv".into(), csv_table("loopback", &rows)?)],
        checks: vec![Check::new(
            "loopback",
            prr >= min && total.2 == 0,
            format!("{}/{} packets recovered, {} false decodes", total.1, total.0, total.2),
        )],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrrRow {
    pub data_rate: String,
    pub snr_db: f64,
    pub trials: usize,
    pub decoded: usize,
    pub prr: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

#[derive(Serialize)]
struct ThresholdRow {
    data_rate: String,
    channel: String,
    threshold_db: Option<f64>,
}

/// PRR of single-packet traces over the SNR grid, per data rate. Points run in ascending
/// SNR and the sweep for a rate stops after two consecutive points at PRR = 1.
pub fn prr_curve(cfg: &ExperimentConfig, dr: DataRate) -> Result<Vec<PrrRow>> {
    let mut rows = Vec::new();
    let mut perfect = 0;
    for (pi, snr) in cfg.snr_grid_db.points().into_iter().enumerate() {
        let point = (dr as u64) << 32 | pi as u64;
        let per: Vec<Result<Metrics>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let (trace, truth) = single_packet_trace(cfg, dr, snr, trial_seed(cfg.seed, point, t as u64))?;
                let rep = run_receiver(&trace, &truth, Variant::AsIs, cfg);
                Ok(score(&rep, &truth))
            })
            .collect();
        let mut m = Metrics::default();
        for r in per {
            m.merge(&r?);
        }
        let (lo, hi) = wilson(m.decoded(), m.transmitted());
        rows.push(PrrRow {
            data_rate: dr.to_string(),
            snr_db: snr,
            trials: m.transmitted(),
            decoded: m.decoded(),
            prr: m.prr(),
            ci95_lo: lo,
            ci95_hi: hi,
        });
        perfect = if m.prr() >= 1.0 { perfect + 1 } else { 0 };
        if perfect >= 2 {
            break;
        }
    }
    Ok(rows)
}

pub fn threshold_of(rows: &[PrrRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.snr_db, r.prr)).collect();
    interpolate_threshold(&pts, PRR_TARGET)
}

fn in_window(v: Option<f64>, w: [f64; 2]) -> bool {
    v.is_some_and(|v| v >= w[0] && v <= w[1])
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or("none".into(), |v| format!("{v:.2} dB"))
}

pub fn run_prr_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut rows = Vec::new();
    let mut thresholds = Vec::new();
    let label = cfg.channel_model().label().to_string();
    for &dr in cfg.dr_mix.rates() {
        let curve = prr_curve(cfg, dr)?;
        thresholds.push(ThresholdRow {
            data_rate: dr.to_string(),
            channel: label.clone(),
            threshold_db: threshold_of(&curve),
        });
        rows.extend(curve);
    }
    let th = |dr: DataRate| {
        thresholds
            .iter()
            .find(|t| t.data_rate == dr.to_string())
            .and_then(|t| t.threshold_db)
    };
    let mut checks = Vec::new();
    if let Some(w) = cfg.expect.dr8_threshold_db {
        checks.push(Check::new("dr8_threshold", in_window(th(DataRate::Dr8), w), fmt_db(th(DataRate::Dr8))));
    }
    if let Some(w) = cfg.expect.dr9_threshold_db {
        checks.push(Check::new("dr9_threshold", in_window(th(DataRate::Dr9), w), fmt_db(th(DataRate::Dr9))));
    }
    if let Some(w) = cfg.expect.threshold_gap_db {
        let gap = th(DataRate::Dr9).zip(th(DataRate::Dr8)).map(|(a, b)| a - b);
        checks.push(Check::new("threshold_gap", in_window(gap, w), fmt_db(gap)));
    }
    Ok(RunOutput {
        tables: vec![
            ("prr.csv".into(), csv_table("prr", &rows)?),
            ("thresholds.csv".into(), csv_table("thresholds", &thresholds)?),
        ],
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityRow {
    pub variant: String,
    pub offered_kbps: f64,
    pub transmitted: usize,
    pub decoded: usize,
    pub goodput_kbps: f64,
    pub prr: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub dr8_prr: f64,
    pub dr9_prr: f64,
    pub false_decodes: usize,
}

#[derive(Serialize)]
struct HeaderRow {
    variant: String,
    offered_kbps: f64,
    data_rate: String,
    headers_0: usize,
    headers_1: usize,
    headers_2: usize,
    headers_3: usize,
}

#[derive(Serialize)]
struct CollisionRow {
    variant: String,
    offered_kbps: f64,
    data_rate: String,
    fraction_lo: f64,
    fraction_hi: f64,
    transmitted: usize,
    decoded: usize,
}

#[derive(Serialize)]
struct CapacitySummary {
    variant: String,
    capacity_kbps: f64,
    at_offered_kbps: Option<f64>,
}

/// Aggregated metrics per (variant, load point).
pub struct CapacityResult {
    pub rows: Vec<CapacityRow>,
    pub metrics: Vec<(Variant, f64, Metrics)>,
}

/// Every variant sees the same traces, so variant differences are paired.
pub fn capacity_sweep(cfg: &ExperimentConfig) -> Result<CapacityResult> {
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    for (li, &load) in cfg.load_kbps.iter().enumerate() {
        let per: Vec<Result<Vec<Metrics>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let (trace, truth) = synthesize_trace(cfg, load, trial_seed(cfg.seed, li as u64, t as u64))?;
                Ok(cfg
                    .variants
                    .iter()
                    .map(|&v| score(&run_receiver(&trace, &truth, v, cfg), &truth))
                    .collect())
            })
            .collect();
        let mut agg = vec![Metrics::default(); cfg.variants.len()];
        for r in per {
            for (a, m) in agg.iter_mut().zip(r?) {
                a.merge(&m);
            }
        }
        for (&v, m) in cfg.variants.iter().zip(agg) {
            let (lo, hi) = wilson(m.decoded(), m.transmitted());
            rows.push(CapacityRow {
                variant: v.name().into(),
                offered_kbps: load,
                transmitted: m.transmitted(),
                decoded: m.decoded(),
                goodput_kbps: m.payload_bits() as f64 / (cfg.duration_s * cfg.trials as f64) / 1000.0,
                prr: m.prr(),
                ci95_lo: lo,
                ci95_hi: hi,
                dr8_prr: m.dr8.prr(),
                dr9_prr: m.dr9.prr(),
                false_decodes: m.false_decodes,
            });
            metrics.push((v, load, m));
        }
    }
    Ok(CapacityResult { rows, metrics })
}

/// Goodput at the highest offered load whose PRR is still at least 0.9.
pub fn capacity_of(rows: &[CapacityRow], variant: Variant) -> (f64, Option<f64>) {
    rows.iter()
        .filter(|r| r.variant == variant.name() && r.prr >= PRR_TARGET)
        .max_by(|a, b| a.offered_kbps.partial_cmp(&b.offered_kbps).unwrap())
        .map_or((0.0, None), |r| (r.goodput_kbps, Some(r.offered_kbps)))
}

pub fn run_capacity(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let res = capacity_sweep(cfg)?;
    let mut headers = Vec::new();
    let mut collisions = Vec::new();
    for (v, load, m) in &res.metrics {
        for &dr in cfg.dr_mix.rates() {
            let r = m.rate(dr);
            let h = r.header_histogram;
            headers.push(HeaderRow {
                variant: v.name().into(),
                offered_kbps: *load,
                data_rate: dr.to_string(),
                headers_0: h[0],
                headers_1: h[1],
                headers_2: h[2],
                headers_3: h[3],
            });
            for (i, &(n, k)) in r.collision_bins.iter().enumerate() {
                collisions.push(CollisionRow {
                    variant: v.name().into(),
                    offered_kbps: *load,
                    data_rate: dr.to_string(),
                    fraction_lo: i as f64 * COLLISION_BIN,
                    fraction_hi: (i + 1) as f64 * COLLISION_BIN,
                    transmitted: n,
                    decoded: k,
                });
            }
        }
    }
    let summary: Vec<CapacitySummary> = cfg
        .variants
        .iter()
        .map(|&v| {
            let (c, at) = capacity_of(&res.rows, v);
            CapacitySummary {
                variant: v.name().into(),
                capacity_kbps: c,
                at_offered_kbps: at,
            }
        })
        .collect();
    let mut checks = Vec::new();
    if let Some(min) = cfg.expect.min_capacity_kbps {
        let (c, _) = capacity_of(&res.rows, Variant::AsIs);
        checks.push(Check::new("capacity", c >= min, format!("{c:.3} kbps")));
    }
    Ok(RunOutput {
        tables: vec![
            ("capacity.csv".into(), csv_table("capacity", &res.rows)?),
            ("capacity_summary.csv".into(), csv_table("capacity_summary", &summary)?),
            ("headers.csv".into(), csv_table("headers", &headers)?),
            ("collision.csv".into(), csv_table("collision", &collisions)?),
        ],
        checks,
    })
}

/// Paired CAED on/off outcome over colliding packets.
#[derive(Debug, Clone, Serialize)]
pub struct CaedResult {
    pub packets: usize,
    pub with_caed: usize,
    pub without_caed: usize,
    /// Decoded only with CAED on.
    pub gained: usize,
    /// Decoded only with CAED off.
    pub lost: usize,
    /// One-sided exact sign test of gained against lost.
    pub p_value: f64,
}

/// Decodes the same traces with CAED on and off in a single pass (no SIC, so
/// cancellation cannot hide the erasures) and keeps every packet that collides
/// with another one. Traces are added until `min_packets` are collected.
pub fn caed_ensemble(cfg: &ExperimentConfig, load_kbps: f64, min_packets: usize) -> Result<CaedResult> {
    let mut base = cfg.clone();
    base.rx.sic = false;
    let mut res = CaedResult {
        packets: 0,
        with_caed: 0,
        without_caed: 0,
        gained: 0,
        lost: 0,
        p_value: 1.0,
    };
    let mut t = 0u64;
    while res.packets < min_packets {
        let (trace, truth) = synthesize_trace(&base, load_kbps, trial_seed(cfg.seed, u64::MAX, t))?;
        t += 1;
        let on = decoded_flags(&run_receiver(&trace, &truth, Variant::AsIs, &base), &truth);
        let off = decoded_flags(&run_receiver(&trace, &truth, Variant::NoCaed, &base), &truth);
        for p in &truth.packets {
            if collision_fraction(&truth, p.id) == 0.0 {
                continue;
            }
            let (a, b) = (on[p.id], off[p.id]);
            res.packets += 1;
            res.with_caed += a as usize;
            res.without_caed += b as usize;
            res.gained += (a && !b) as usize;
            res.lost += (b && !a) as usize;
        }
    }
    let n = res.gained + res.lost;
    if n > 0 {
        let bin = Binomial::new(0.5, n as u64).expect("valid binomial");
        res.p_value = if res.gained == 0 { 1.0 } else { bin.sf(res.gained as u64 - 1) };
    }
    Ok(res)
}

#[derive(Serialize)]
struct PacketRow {
    start_sample: i64,
    data_rate: String,
    hop_sequence_id: u16,
    group: u8,
    payload_hex: String,
    cfo_hz: f64,
    energy: f64,
}

/// Decodes a stored trace; scores it when the sidecar carries ground truth.
pub fn run_decode(cfg: &ExperimentConfig, path: &Path) -> Result<RunOutput> {
    let (trace, side) = read_trace(path)?;
    let truth = side.ground_truth.clone().unwrap_or_default();
    let variant = if cfg.ideal_acquisition {
        Variant::IdealAcquisition
    } else {
        Variant::AsIs
    };
    let rep = run_receiver(&trace, &truth, variant, cfg);
    let rows: Vec<PacketRow> = rep
        .packets
        .iter()
        .map(|p| PacketRow {
            start_sample: p.start_sample(),
            data_rate: p.data_rate.to_string(),
            hop_sequence_id: p.hop_sequence_id,
            group: p.group,
            payload_hex: lrfhss_core::channel::to_hex(&p.payload),
            cfo_hz: p.cfo_hz,
            energy: p.energy,
        })
        .collect();
    let mut out = RunOutput {
        tables: vec![("packets.csv".into(), csv_table("packets", &rows)?)],
        checks: Vec::new(),
    };
    if let Some(gt) = &side.ground_truth {
        let m = score(&rep, gt);
        let min = cfg.expect.min_prr.unwrap_or(0.0);
        out.checks.push(Check::new(
            "decode",
            m.prr() >= min,
            format!("{}/{} packets, {} false", m.decoded(), m.transmitted(), m.false_decodes),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_schema_line() {
        #[derive(Serialize)]
        struct R {
            a: u8,
            b: f64,
        }
        let t = csv_table("x", &[R { a: 1, b: 0.5 }]).unwrap();
        assert_eq!(t, "# x v1\na,b\n1,0.5\n");
    }

    #[test]
    fn capacity_picks_highest_passing_load() {
        let row = |load: f64, prr: f64, g: f64| CapacityRow {
            variant: "as_is".into(),
            offered_kbps: load,
            transmitted: 10,
            decoded: 9,
            goodput_kbps: g,
            prr,
            ci95_lo: 0.0,
            ci95_hi: 1.0,
            dr8_prr: prr,
            dr9_prr: prr,
            false_decodes: 0,
        };
        let rows = [row(1.0, 1.0, 0.98), row(2.0, 0.93, 1.9), row(3.0, 0.7, 2.1)];
        assert_eq!(capacity_of(&rows, Variant::AsIs), (1.9, Some(2.0)));
        assert_eq!(capacity_of(&rows, Variant::NoSic), (0.0, None));
    }
}
