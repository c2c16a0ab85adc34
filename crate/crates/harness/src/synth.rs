//! Trace synthesis: unit-power OCW noise plus randomly placed packets.

use anyhow::Result;
use lrfhss_core::channel::{apply_channel, GroundTruth, Placement, TraceBuilder};
use lrfhss_core::tx::packet::assemble_packet;
use lrfhss_core::{DataRate, IqTrace, PacketConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;

/// Packet count realising `load_kbps` of payload over the trace.
pub fn packet_count(cfg: &ExperimentConfig, load_kbps: f64) -> usize {
    (load_kbps * 1000.0 * cfg.duration_s / cfg.mean_payload_bits()).round() as usize
}

fn random_packet<R: Rng>(cfg: &ExperimentConfig, dr: DataRate, rng: &mut R) -> PacketConfig {
    let len = rng.random_range(cfg.payload_bytes[0]..=cfg.payload_bytes[1]);
    let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
    PacketConfig::new(dr, payload, rng.random_range(0..512), rng.random_range(1..=8)).expect("drawn in range")
}

/// Channel output placed at a uniform start that keeps the whole packet inside the trace.
fn place<R: Rng>(cfg: &ExperimentConfig, pc: PacketConfig, snr_db: f64, len: usize, rng: &mut R) -> Result<Placement> {
    let (pkt, plan) = assemble_packet(&pc)?;
    let pkt = apply_channel(&pkt, &plan, &cfg.channel_model(), rng);
    let room = len.saturating_sub(pkt.len());
    let start = rng.random_range(0..=room);
    let cfo = if cfg.cfo_max_hz > 0.0 {
        rng.random_range(-cfg.cfo_max_hz..=cfg.cfo_max_hz)
    } else {
        0.0
    };
    Ok(Placement {
        packet: pkt,
        cfg: pc,
        plan,
        start_sample: start,
        freq_offset_hz: cfo,
        snr_db,
    })
}

/// Multi-packet trace at the given offered load. Data rates are drawn uniformly from the
/// mix and SNRs uniformly from the per-rate range.
pub fn synthesize_trace(cfg: &ExperimentConfig, load_kbps: f64, seed: u64) -> Result<(IqTrace, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = cfg.channel_model();
    let mut b = TraceBuilder::new(cfg.duration_s, model.n_antennas, rng.random(), !cfg.noiseless);
    b.set_channel_label(model.label());
    let rates = cfg.dr_mix.rates();
    for _ in 0..packet_count(cfg, load_kbps) {
        let dr = rates[rng.random_range(0..rates.len())];
        let [lo, hi] = cfg.snr_range(dr);
        let snr = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let pc = random_packet(cfg, dr, &mut rng);
        let p = place(cfg, pc, snr, b.len(), &mut rng)?;
        b.add(&p)?;
    }
    Ok(b.finish()?)
}

/// One packet of the given rate at a fixed SNR.
pub fn single_packet_trace(cfg: &ExperimentConfig, dr: DataRate, snr_db: f64, seed: u64) -> Result<(IqTrace, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = cfg.channel_model();
    let mut b = TraceBuilder::new(cfg.duration_s, model.n_antennas, rng.random(), !cfg.noiseless);
    b.set_channel_label(model.label());
    let pc = random_packet(cfg, dr, &mut rng);
    let p = place(cfg, pc, snr_db, b.len(), &mut rng)?;
    b.add(&p)?;
    Ok(b.finish()?)
}
