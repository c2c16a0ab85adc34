//! Component-level measurements: synchronization accuracy, reconstruction residual and
//! the controlled two-packet cancellation case.

use anyhow::Result;
use lrfhss_core::channel::{apply_channel, mix_packets_with_noise, ChannelModel, Placement};
use lrfhss_core::dsp::ddc_window;
use lrfhss_core::params::{channel_center_freq, SAMPLES_PER_SYMBOL};
use lrfhss_core::receiver::sic_loop;
use lrfhss_core::rx::frontend::{acquisition_baseband, fine_sync_surface, CandidateHeader};
use lrfhss_core::rx::RxConfig;
use lrfhss_core::sic::{reconstruct_packet, subtract_packet};
use lrfhss_core::tx::packet::assemble_packet;
use lrfhss_core::{DataRate, IqTrace, PacketConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::trial_seed;

const T: f64 = SAMPLES_PER_SYMBOL as f64;

fn random_config<R: Rng>(dr: DataRate, rng: &mut R) -> PacketConfig {
    let len = rng.random_range(8..=16);
    let payload = (0..len).map(|_| rng.random()).collect();
    PacketConfig::new(dr, payload, rng.random_range(0..512), rng.random_range(1..=8)).expect("valid packet")
}

fn placement<R: Rng>(cfg: PacketConfig, start: usize, cfo_hz: f64, snr_db: f64, rng: &mut R) -> Placement {
    let (pkt, plan) = assemble_packet(&cfg).expect("valid packet");
    let packet = apply_channel(&pkt, &plan, &ChannelModel::awgn(1), rng);
    Placement {
        packet,
        cfg,
        plan,
        start_sample: start,
        freq_offset_hz: cfo_hz,
        snr_db,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SyncAccuracy {
    pub snr_db: f64,
    pub trials: usize,
    /// Trials with timing error ≤ T/10 and frequency error ≤ 5 Hz.
    pub within: usize,
    pub max_time_error_symbols: f64,
    pub max_freq_error_hz: f64,
}

impl SyncAccuracy {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.trials.max(1) as f64
    }
}

/// Fine search on the first header of a single packet with an off-grid start, a random
/// carrier offset within ±90 Hz and the coarse start displaced by up to ±4T.
pub fn sync_accuracy(snr_db: f64, trials: usize, seed: u64) -> SyncAccuracy {
    let rx = RxConfig::default();
    let errs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 0, t as u64));
            let cfg = random_config(DataRate::Dr8, &mut rng);
            let start = rng.random_range(100_000..200_000);
            let cfo = rng.random_range(-90.0..90.0);
            let p = placement(cfg, start, cfo, snr_db, &mut rng);
            let first = &p.plan.blocks[0];
            let f0 = channel_center_freq(first.channel_index).expect("valid channel");
            let (trace, _) = mix_packets_with_noise(&[p], 4.0, 1, rng.random(), true).expect("fits");
            let coarse = start as i64 + rng.random_range(-4..=4) * SAMPLES_PER_SYMBOL as i64;
            let cand = CandidateHeader {
                start_sample: coarse,
                freq_hz: f0,
                score: 0.0,
            };
            let bb = acquisition_baseband(&trace, &cand, &rx);
            match fine_sync_surface(&bb, coarse, &rx).best {
                Some(s) => ((s.start_sample - start as f64).abs() / T, (s.freq_hz - f0 - cfo).abs()),
                None => (f64::INFINITY, f64::INFINITY),
            }
        })
        .collect();
    SyncAccuracy {
        snr_db,
        trials,
        within: errs.iter().filter(|&&(dt, df)| dt <= 0.1 + 1e-9 && df <= 5.0 + 1e-9).count(),
        max_time_error_symbols: errs.iter().map(|e| e.0).fold(0.0, f64::max),
        max_freq_error_hz: errs.iter().map(|e| e.1).fold(0.0, f64::max),
    }
}

fn in_channel_energy(trace: &IqTrace, freq_hz: f64, start: i64, end: i64) -> f64 {
    let bb = ddc_window(trace, freq_hz, start, end);
    bb.antennas.iter().flatten().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualStats {
    pub snr_db: f64,
    pub packets: usize,
    /// Packets the receiver decoded (only those are reconstructed).
    pub decoded: usize,
    /// Mean over blocks of in-channel |signal − reconstruction|² / |signal|².
    pub mean_residual: f64,
    pub worst_block: f64,
}

/// Decodes single packets, reconstructs them from the noisy trace and compares the
/// reconstruction with the noise-free channel output, block by block.
pub fn sic_residual(snr_db: f64, packets: usize, seed: u64) -> ResidualStats {
    let per: Vec<Option<Vec<f64>>> = (0..packets)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 1, t as u64));
            let dr = if t % 2 == 0 { DataRate::Dr8 } else { DataRate::Dr9 };
            let cfg = random_config(dr, &mut rng);
            let start = rng.random_range(10_000..100_000);
            let cfo = rng.random_range(-20.0..20.0);
            let p = placement(cfg, start, cfo, snr_db, &mut rng);
            let noise_seed = rng.random();
            let (noisy, _) = mix_packets_with_noise(std::slice::from_ref(&p), 4.0, 1, noise_seed, true).ok()?;
            let (clean, truth) = mix_packets_with_noise(&[p], 4.0, 1, noise_seed, false).ok()?;
            let rep = sic_loop(&noisy, &RxConfig { sic: false, ..RxConfig::default() });
            let pkt = rep.packets.first()?;
            let recon = reconstruct_packet(&noisy, pkt);
            let mut diff = clean.clone();
            subtract_packet(&mut diff, &recon);
            let tp = &truth.packets[0];
            Some(
                tp.plan
                    .blocks
                    .iter()
                    .map(|b| {
                        let f = channel_center_freq(b.channel_index).expect("valid channel") + tp.freq_offset_hz;
                        let e = in_channel_energy(&clean, f, b.start_sample, b.end_sample());
                        in_channel_energy(&diff, f, b.start_sample, b.end_sample()) / e
                    })
                    .collect(),
            )
        })
        .collect();
    let decoded = per.iter().flatten().count();
    let all: Vec<f64> = per.into_iter().flatten().flatten().collect();
    ResidualStats {
        snr_db,
        packets,
        decoded,
        mean_residual: if all.is_empty() { f64::NAN } else { all.iter().sum::<f64>() / all.len() as f64 },
        worst_block: all.iter().cloned().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPacketOutcome {
    pub with_sic: usize,
    pub without_sic: usize,
}

/// Two DR8 packets on the same hop sequence and group, the weaker 10 dB below the stronger
/// and delayed by a few symbols, so every block of one lies on top of the other.
pub fn two_packet_case(seed: u64) -> Result<TwoPacketOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strong = random_config(DataRate::Dr8, &mut rng);
    let mut weak = random_config(DataRate::Dr8, &mut rng);
    weak.hop_sequence_id = strong.hop_sequence_id;
    weak.group = strong.group;
    let s0 = rng.random_range(50_000..100_000);
    let delay = (rng.random_range(3.0..6.0) * T) as usize;
    let a = placement(strong, s0, rng.random_range(-20.0..20.0), 0.0, &mut rng);
    let b = placement(weak, s0 + delay, rng.random_range(-20.0..20.0), -10.0, &mut rng);
    let (trace, truth) = mix_packets_with_noise(&[a, b], 4.0, 1, rng.random(), true)?;
    let count = |sic: bool| {
        let rep = sic_loop(&trace, &RxConfig { sic, ..RxConfig::default() });
        truth
            .packets
            .iter()
            .filter(|p| rep.packets.iter().any(|d| d.payload == p.payload()))
            .count()
    };
    Ok(TwoPacketOutcome {
        with_sic: count(true),
        without_sic: count(false),
    })
}
