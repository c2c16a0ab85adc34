//! Acceptance run: one PASS/FAIL line per criterion. A failed criterion is reported, not
//! raised; set LRFHSS_ACCEPTANCE_STRICT=1 to exit with status 1 when any criterion fails.
//! Tables land in `<target>/tmp/acceptance/`.

#[allow(dead_code)]
#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use lrfhss_core::channel::ChannelKind;
use lrfhss_core::coding::conv::{conv_encode_data, encode, HEADER_MEMORY, HEADER_POLYS};
use lrfhss_core::coding::crc::{crc16, crc8};
use lrfhss_core::coding::interleave::interleave;
use lrfhss_core::coding::viterbi::{viterbi_data, viterbi_header};
use lrfhss_core::coding::whiten::pn9_stream;
use lrfhss_core::sic::estimate_delta_theta;
use lrfhss_core::DataRate;
use lrfhss_harness::config::{DrMix, ExperimentConfig, SnrGrid, Variant};
use lrfhss_harness::experiments::{
    caed_ensemble, capacity_of, capacity_sweep, prr_curve, run_loopback, threshold_of, CapacityResult, PrrRow,
};
use lrfhss_harness::quality::{sic_residual, sync_accuracy, two_packet_case};
use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const SEED: u64 = 20240601;

struct Report {
    failed: usize,
    out: PathBuf,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} criterion {n}: {detail} [{:.0} s]",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) {
        let write = |path: &Path| -> Result<()> {
            let mut w = csv::Writer::from_path(path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        };
        if let Err(e) = write(&self.out.join(name)) {
            eprintln!("could not write {name}: {e:#}");
        }
    }
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or("none".into(), |v| format!("{v:.2} dB"))
}

fn base(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    }
}

fn criterion_1(r: &mut Report) {
    let t0 = Instant::now();
    let mut cfg = ExperimentConfig {
        dr_mix: DrMix::Both,
        trials: 56,
        duration_s: 3.0,
        noiseless: true,
        ..base(SEED)
    };
    let mut details = Vec::new();
    let mut pass = true;
    for (label, noiseless) in [("noiseless", true), ("+5 dB", false)] {
        cfg.noiseless = noiseless;
        cfg.loopback_snr_db = 5.0;
        match run_loopback(&cfg) {
            Ok(out) => {
                pass &= out.passed();
                details.push(format!("{label}: {}", out.checks[0].detail));
                if let Some(t) = out.table("loopback.csv") {
                    let _ = std::fs::write(r.out.join(format!("loopback_{}.csv", if noiseless { "clean" } else { "5db" })), t);
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("{label}: error {e:#}"));
            }
        }
    }
    let mins = t0.elapsed().as_secs_f64() / 60.0;
    pass &= mins <= 10.0;
    r.line(1, pass, format!("{}; runtime {mins:.1} min (limit 10)", details.join("; ")), t0);
}

/// PRR curve from `start`, moved down once if the first point already clears the target.
fn curve_from(cfg: &ExperimentConfig, dr: DataRate, start: f64, stop: f64) -> Result<Vec<PrrRow>> {
    let mut c = cfg.clone();
    c.snr_grid_db = SnrGrid { start, stop, step: 1.0 };
    let rows = prr_curve(&c, dr)?;
    if rows.first().is_some_and(|r| r.prr >= 0.9) {
        c.snr_grid_db.start = start - 6.0;
        return prr_curve(&c, dr);
    }
    Ok(rows)
}

fn criterion_2(r: &mut Report) -> Option<(f64, f64)> {
    let t0 = Instant::now();
    let cfg = ExperimentConfig {
        trials: 200,
        duration_s: 3.0,
        ..base(SEED + 2)
    };
    let (Ok(c8), Ok(c9)) = (curve_from(&cfg, DataRate::Dr8, -25.0, -10.0), curve_from(&cfg, DataRate::Dr9, -22.0, -7.0)) else {
        r.line(2, false, "sweep error".into(), t0);
        return None;
    };
    r.csv("prr_awgn.csv", &[c8.clone(), c9.clone()].concat());
    let (t8, t9) = (threshold_of(&c8), threshold_of(&c9));
    let gap = t8.zip(t9).map(|(a, b)| b - a);
    let inside = |v: Option<f64>, lo: f64, hi: f64| v.is_some_and(|v| (lo..=hi).contains(&v));
    let pass = inside(t8, -22.0, -16.0) && inside(t9, -19.0, -13.0) && inside(gap, 2.0, 4.0);
    r.line(
        2,
        pass,
        format!("DR8 {}, DR9 {}, gap {} (200 trials/point)", fmt_db(t8), fmt_db(t9), fmt_db(gap)),
        t0,
    );
    t8.zip(t9)
}

fn criterion_3(r: &mut Report, awgn: Option<(f64, f64)>) {
    let t0 = Instant::now();
    let Some((a8, a9)) = awgn else {
        r.line(3, false, "no AWGN reference thresholds".into(), t0);
        return;
    };
    let mut pass = true;
    let mut details = Vec::new();
    let mut rows = Vec::new();
    for (kind, label) in [(ChannelKind::BlockFading, "fading"), (ChannelKind::LosDoppler, "los")] {
        let cfg = ExperimentConfig {
            channel: kind,
            trials: 100,
            duration_s: 3.0,
            ..base(SEED + 3)
        };
        for (dr, a) in [(DataRate::Dr8, a8), (DataRate::Dr9, a9)] {
            let start = a.floor() - 5.0;
            match curve_from(&cfg, dr, start, a.ceil() + 8.0) {
                Ok(c) => {
                    let t = threshold_of(&c);
                    let ok = t.is_some_and(|t| (t - a).abs() <= 3.0);
                    pass &= ok;
                    details.push(format!("{label} {dr} {} (AWGN {a:.2})", fmt_db(t)));
                    rows.extend(c.into_iter().map(|mut row| {
                        row.data_rate = format!("{label}_{}", row.data_rate);
                        row
                    }));
                }
                Err(e) => {
                    pass = false;
                    details.push(format!("{label} {dr}: error {e:#}"));
                }
            }
        }
    }
    r.csv("prr_fading_los.csv", &rows);
    r.line(3, pass, format!("{} (2 antennas, 100 trials/point)", details.join(", ")), t0);
}

fn capacity_cfg(dr_mix: DrMix, variants: Vec<Variant>) -> ExperimentConfig {
    ExperimentConfig {
        dr_mix,
        duration_s: 10.0,
        trials: 5,
        load_kbps: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        variants,
        ..base(SEED + 4)
    }
}

fn criterion_4(r: &mut Report) -> Option<CapacityResult> {
    let t0 = Instant::now();
    let cfg = capacity_cfg(
        DrMix::Dr8,
        vec![Variant::AsIs, Variant::NoSic, Variant::NoCaed, Variant::IdealAcquisition],
    );
    let res = match capacity_sweep(&cfg) {
        Ok(res) => res,
        Err(e) => {
            r.line(4, false, format!("error {e:#}"), t0);
            return None;
        }
    };
    r.csv("capacity_dr8.csv", &res.rows);
    let (c, at) = capacity_of(&res.rows, Variant::AsIs);
    r.line(
        4,
        c >= 2.0,
        format!(
            "DR8 capacity {c:.2} kbps at offered {} kbps (limit 2.0; 10 s traces, 5 trials/point)",
            at.map_or("none".into(), |a| a.to_string())
        ),
        t0,
    );
    Some(res)
}

fn criterion_5(r: &mut Report, dr8: Option<&CapacityResult>) {
    let t0 = Instant::now();
    let Some(dr8) = dr8 else {
        r.line(5, false, "no DR8 capacity run".into(), t0);
        return;
    };
    let mut violations = Vec::new();
    for load in capacity_cfg(DrMix::Dr8, vec![]).load_kbps {
        let row = |v: Variant| dr8.rows.iter().find(|x| x.variant == v.name() && x.offered_kbps == load);
        for (hi, lo) in [(Variant::IdealAcquisition, Variant::AsIs), (Variant::AsIs, Variant::NoSic)] {
            if let (Some(h), Some(l)) = (row(hi), row(lo)) {
                // only a difference beyond both 95% intervals counts against the ordering
                if l.ci95_lo > h.ci95_hi {
                    violations.push(format!("{} < {} at {load} kbps", hi.name(), lo.name()));
                }
            }
        }
    }
    let c9 = capacity_sweep(&capacity_cfg(DrMix::Dr9, vec![Variant::AsIs]));
    let (c8, _) = capacity_of(&dr8.rows, Variant::AsIs);
    let (pass, detail) = match c9 {
        Ok(res) => {
            r.csv("capacity_dr9.csv", &res.rows);
            let (c9, _) = capacity_of(&res.rows, Variant::AsIs);
            (
                violations.is_empty() && c8 > c9,
                format!(
                    "ordering violations: {}; DR8 {c8:.2} kbps vs DR9 {c9:.2} kbps",
                    if violations.is_empty() { "none".into() } else { violations.join(", ") }
                ),
            )
        }
        Err(e) => (false, format!("DR9 error {e:#}")),
    };
    r.line(5, pass, detail, t0);
}

fn criterion_6(r: &mut Report) {
    let t0 = Instant::now();
    let cfg = ExperimentConfig {
        dr_mix: DrMix::Dr8,
        duration_s: 10.0,
        ..base(SEED + 6)
    };
    match caed_ensemble(&cfg, 4.0, 500) {
        Ok(c) => {
            r.csv("caed.csv", std::slice::from_ref(&c));
            r.line(
                6,
                c.gained >= c.lost && c.p_value < 0.05,
                format!(
                    "{} colliding packets: {} decoded with erasure marking, {} without ({} gained, {} lost, p = {:.2e})",
                    c.packets, c.with_caed, c.without_caed, c.gained, c.lost, c.p_value
                ),
                t0,
            );
        }
        Err(e) => r.line(6, false, format!("error {e:#}"), t0),
    }
}

fn criterion_7(r: &mut Report) {
    let t0 = Instant::now();
    let res = sic_residual(20.0, 40, SEED + 7);
    r.csv("sic_residual.csv", std::slice::from_ref(&res));
    let mut two = Vec::new();
    for s in 0..4 {
        match two_packet_case(SEED + 70 + s) {
            Ok(o) => two.push((o.with_sic, o.without_sic)),
            Err(_) => two.push((0, 0)),
        }
    }
    let pass = res.decoded == res.packets && res.mean_residual <= 0.05 && two.iter().all(|&t| t == (2, 1));
    r.line(
        7,
        pass,
        format!(
            "mean residual {:.4} (worst block {:.4}, {}/{} decoded) at 20 dB; two-packet (with, without) SIC: {two:?}",
            res.mean_residual, res.worst_block, res.decoded, res.packets
        ),
        t0,
    );
}

fn criterion_8(r: &mut Report) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut fails = Vec::new();
    let mut n = 0;
    for dr in DataRate::ALL {
        for k in [4, 8, 12, 16] {
            for _ in 0..3 {
                n += 1;
                let sent = data_input(rng.random_range(0..1u32 << k), k);
                let soft = observe(&conv_encode_data(&sent, dr).unwrap(), 0.9, 0.1, &mut rng);
                let (bits, c) = viterbi_data(&soft, dr);
                let (best, cb, second) = exhaustive_data(&soft, k, dr);
                if (c - cb).abs() > 1e-9 || (second - cb > 1e-9 && bits != best) {
                    fails.push(format!("data {dr} k={k}"));
                }
            }
        }
    }
    for k in [4, 8, 12] {
        for _ in 0..3 {
            n += 1;
            let state = rng.random_range(0..16u32);
            let msg: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
            let soft = observe(&encode(&msg, &HEADER_POLYS, HEADER_MEMORY, state), 0.9, 0.05, &mut rng);
            let (bits, s, c) = viterbi_header(&soft);
            let (best, sb, cb, second) = exhaustive_header(&soft, k);
            if (c - cb).abs() > 1e-9 || (second - cb > 1e-9 && (bits, s) != (best, sb)) {
                fails.push(format!("header k={k}"));
            }
        }
    }
    let deltas = linspace(-0.06, 0.06, 601);
    let thetas = linspace(-1.2, 1.2, 601);
    let (dstep, tstep) = (deltas[1] - deltas[0], thetas[1] - thetas[0]);
    for i in 0..20 {
        n += 1;
        let antennas = 1 + i % 2;
        let d0 = rng.random_range(-0.05..0.05);
        let w: Vec<f64> = if antennas == 1 {
            vec![1.0]
        } else {
            let w0 = rng.random_range(0.1..0.9);
            vec![w0, 1.0 - w0]
        };
        let theta: Vec<Vec<f64>> = (0..antennas)
            .map(|_| {
                let t = rng.random_range(-1.0..1.0);
                (1..=40).map(|i| d0 * i as f64 + t + rng.random_range(-0.05..0.05)).collect()
            })
            .collect();
        let (d, th) = estimate_delta_theta(&theta, &w).unwrap();
        let (dg, tg, gg) = grid_minimise_g(&theta, &w, &deltas, &thetas);
        let ok = objective_g(&theta, &w, d, &th) <= gg + 1e-12
            && (d - dg).abs() <= dstep
            && th.iter().zip(&tg).all(|(a, b)| (a - b).abs() <= tstep + 20.5 * dstep);
        if !ok {
            fails.push(format!("delta/theta instance {i}"));
        }
    }
    for _ in 0..200 {
        n += 2;
        let len = rng.random_range(0..80);
        let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2u8)).collect();
        if crc8(&bits) != crc8_division(&bits) {
            fails.push("crc8".into());
        }
        let bytes: Vec<u8> = (0..len / 4).map(|_| rng.random()).collect();
        if crc16(&bytes) != crc16_division(&bytes) {
            fails.push("crc16".into());
        }
        let rows = rng.random_range(1..12);
        let seq: Vec<u16> = (0..rng.random_range(1..600)).map(|_| rng.random()).collect();
        n += 1;
        if interleave(&seq, rows) != interleave_matrix(&seq, rows) {
            fails.push("interleaver".into());
        }
    }
    n += 1;
    if pn9_stream(4000) != pn9_recurrence(4000) {
        fails.push("pn9".into());
    }
    r.line(
        8,
        fails.is_empty(),
        format!("{} of {n} oracle comparisons disagree {fails:?}", fails.len()),
        t0,
    );
}

fn criterion_9(r: &mut Report) {
    let t0 = Instant::now();
    let s = sync_accuracy(-15.0, 200, SEED + 9);
    r.csv("sync_accuracy.csv", std::slice::from_ref(&s));
    r.line(
        9,
        s.fraction() >= 0.95,
        format!(
            "{}/{} trials within T/10 and 5 Hz at -15 dB (max errors {:.3} T, {:.2} Hz)",
            s.within, s.trials, s.max_time_error_symbols, s.max_freq_error_hz
        ),
        t0,
    );
}

fn criterion_10(r: &mut Report, dr8: Option<&CapacityResult>) {
    let t0 = Instant::now();
    let Some(dr8) = dr8 else {
        r.line(10, false, "no DR8 capacity run".into(), t0);
        return;
    };
    let (mut n, mut k) = (0, 0);
    for (v, _, m) in &dr8.metrics {
        if *v == Variant::AsIs {
            if let Some(&(bn, bk)) = m.dr8.collision_bins.get(2) {
                n += bn;
                k += bk;
            }
        }
    }
    let rate = if n == 0 { 0.0 } else { k as f64 / n as f64 };
    r.line(
        10,
        n > 0 && rate >= 0.6,
        format!("{k}/{n} DR8 packets with 20-30% of symbols collided decoded ({:.1}%)", 100.0 * rate),
        t0,
    );
}

fn main() -> ExitCode {
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("cannot create {}: {e}", out.display());
    }
    let mut r = Report { failed: 0, out };
    let total = Instant::now();
    criterion_1(&mut r);
    let awgn = criterion_2(&mut r);
    criterion_3(&mut r, awgn);
    let dr8 = criterion_4(&mut r);
    criterion_5(&mut r, dr8.as_ref());
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r, dr8.as_ref());
    println!(
        "acceptance: {} of 10 criteria failed, total {:.1} min, tables in {}",
        r.failed,
        total.elapsed().as_secs_f64() / 60.0,
        r.out.display()
    );
    let strict = std::env::var("LRFHSS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if r.failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
