#![allow(dead_code)]

pub mod oracles;

use lrfhss_core::channel::{apply_channel, mix_packets_with_noise, ChannelModel, GroundTruth, Placement};
use lrfhss_core::tx::packet::assemble_packet;
use lrfhss_core::{DataRate, IqTrace, PacketConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_config<R: Rng>(dr: DataRate, rng: &mut R) -> PacketConfig {
    let len = rng.random_range(8..=16);
    let payload = (0..len).map(|_| rng.random()).collect();
    PacketConfig::new(dr, payload, rng.random_range(0..512), rng.random_range(1..=8)).unwrap()
}

pub fn placement<R: Rng>(cfg: PacketConfig, model: &ChannelModel, start: usize, cfo_hz: f64, snr_db: f64, rng: &mut R) -> Placement {
    let (pkt, plan) = assemble_packet(&cfg).unwrap();
    Placement {
        packet: apply_channel(&pkt, &plan, model, rng),
        cfg,
        plan,
        start_sample: start,
        freq_offset_hz: cfo_hz,
        snr_db,
    }
}

/// One random packet in a 4 s trace.
pub fn single(dr: DataRate, snr_db: f64, cfo_hz: f64, seed: u64, noise: bool) -> (IqTrace, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = random_config(dr, &mut rng);
    let start = rng.random_range(50_000..200_000);
    let p = placement(cfg, &ChannelModel::awgn(1), start, cfo_hz, snr_db, &mut rng);
    mix_packets_with_noise(&[p], 4.0, 1, rng.random(), noise).unwrap()
}
