//! Full receiver: acquisition, decoding and the SIC round loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::params::SAMPLES_PER_SYMBOL;
use crate::rx::decode::{build_occupancy, consolidate_headers, decode_header, decode_packet, PacketRecord};
use crate::rx::frontend::{acquire, screen_headers};
use crate::rx::RxConfig;
use crate::sic::{reconstruct_packet, subtract_packet};
use crate::types::{DecodedPacket, DetectedHeader, IqTrace};

/// Where packet records come from in each round.
#[derive(Debug, Clone)]
pub enum Acquisition {
    /// Screening, coarse timing, fine search and header decoding on the residual trace.
    Blind,
    /// Perfectly known packets (ideal acquisition).
    Known(Vec<PacketRecord>),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RxReport {
    /// Packets with a passing CRC, in decode order.
    pub packets: Vec<DecodedPacket>,
    /// Last failed decode of every record that never passed.
    pub failed: Vec<DecodedPacket>,
    /// Every header with a passing CRC seen in any round.
    pub headers: Vec<DetectedHeader>,
    pub rounds: usize,
    pub candidates: usize,
}

/// All headers found by screening + acquisition, CRC pass or fail.
pub fn detect_headers(trace: &IqTrace, cfg: &RxConfig) -> (Vec<DetectedHeader>, usize) {
    let cands = screen_headers(trace, cfg);
    let n = cands.len();
    let headers = cands
        .par_iter()
        .filter_map(|c| acquire(trace, c, cfg).map(|s| decode_header(trace, &s)))
        .collect();
    (headers, n)
}

const SAME_PACKET_TOLERANCE: i64 = 2 * SAMPLES_PER_SYMBOL as i64;

fn same_record(d: &DecodedPacket, r: &PacketRecord) -> bool {
    d.hop_sequence_id == r.hop_sequence_id
        && d.data_rate == r.data_rate
        && d.payload.len() == r.payload_len
        && (d.start_sample() - r.start_sample).abs() <= SAME_PACKET_TOLERANCE
}

fn same_packet(a: &DecodedPacket, b: &DecodedPacket) -> bool {
    a.hop_sequence_id == b.hop_sequence_id
        && a.payload == b.payload
        && (a.start_sample() - b.start_sample()).abs() <= SAME_PACKET_TOLERANCE
}

fn same_header(a: &DetectedHeader, b: &DetectedHeader) -> bool {
    a.fields == b.fields && (a.start_sample_est - b.start_sample_est).abs() <= SAMPLES_PER_SYMBOL as i64
}

/// Detect → decode → reconstruct → subtract, until a round adds nothing (at most `max_rounds`).
/// With SIC disabled a single round is run.
pub fn sic_loop_with(trace: &IqTrace, cfg: &RxConfig, acq: &Acquisition) -> RxReport {
    let mut residual = trace.clone();
    let mut report = RxReport::default();
    let mut failed: Vec<DecodedPacket> = Vec::new();
    let max_rounds = if cfg.sic { cfg.max_rounds.max(1) } else { 1 };
    for _ in 0..max_rounds {
        report.rounds += 1;
        let records = match acq {
            Acquisition::Blind => {
                let (headers, n) = detect_headers(&residual, cfg);
                report.candidates += n;
                for h in headers.iter().filter(|h| h.crc_ok) {
                    if !report.headers.iter().any(|k| same_header(k, h)) {
                        report.headers.push(h.clone());
                    }
                }
                consolidate_headers(&headers)
            }
            Acquisition::Known(r) => r.clone(),
        };
        let occupancy = build_occupancy(&records);
        let results: Vec<DecodedPacket> = records
            .par_iter()
            .enumerate()
            .filter(|(_, r)| !report.packets.iter().any(|d| same_record(d, r)))
            .map(|(i, r)| decode_packet(r, i, &residual, &occupancy, cfg))
            .collect();
        let mut new: Vec<DecodedPacket> = Vec::new();
        for p in results {
            if p.crc_ok {
                if !new.iter().chain(&report.packets).any(|d| same_packet(d, &p)) {
                    new.push(p);
                }
            } else {
                failed.retain(|f| {
                    !(f.hop_sequence_id == p.hop_sequence_id
                        && (f.start_sample() - p.start_sample()).abs() <= SAME_PACKET_TOLERANCE)
                });
                failed.push(p);
            }
        }
        if new.is_empty() {
            break;
        }
        if cfg.sic {
            let mut order: Vec<&DecodedPacket> = new.iter().collect();
            order.sort_by(|a, b| b.energy.partial_cmp(&a.energy).unwrap().then(a.start_sample().cmp(&b.start_sample())));
            for p in order {
                let recon = reconstruct_packet(&residual, p);
                subtract_packet(&mut residual, &recon);
            }
        }
        report.packets.extend(new);
    }
    failed.retain(|f| {
        !report.packets.iter().any(|d| {
            d.hop_sequence_id == f.hop_sequence_id
                && (d.start_sample() - f.start_sample()).abs() <= SAME_PACKET_TOLERANCE
        })
    });
    report.failed = failed;
    report
}

pub fn sic_loop(trace: &IqTrace, cfg: &RxConfig) -> RxReport {
    sic_loop_with(trace, cfg, &Acquisition::Blind)
}
