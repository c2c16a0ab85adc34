//! Header decoding, replica consolidation, collision-aware erasure and packet decoding.

use serde::{Deserialize, Serialize};

use super::demod::demod_block;
use super::frontend::{fine_sync_surface, FineSync};
use super::RxConfig;
use crate::coding::bits_to_bytes;
use crate::coding::crc::crc16_verify;
use crate::coding::interleave::deinterleave;
use crate::coding::viterbi::{viterbi_data, viterbi_header};
use crate::coding::whiten::pn9_stream;
use crate::dsp::ddc_window;
use crate::params::{
    channel_center_freq, data_coded_bits, fragment_layout, group_of_channel, nearest_channel,
    DataRate, HEADER_SAMPLES, HEADER_SYMBOLS, MAX_PAYLOAD_BYTES, MIN_PAYLOAD_BYTES,
    SAMPLES_PER_SYMBOL,
};
use crate::tx::header::{
    coded_symbol_positions, default_initial_state, parse_header_bits, HEADER_INTERLEAVE_ROWS,
};
use crate::tx::hop::{hop_plan_for, HEADER_PITCH_SAMPLES};
use crate::tx::packet::DATA_INTERLEAVE_ROWS;
use crate::types::{
    BlockKind, DecodedPacket, DetectedHeader, HopPlan, IqTrace, OccupancyEntry, OccupancyMap,
    SoftSymbol,
};

/// Demodulates the 80 coded symbols around the SyncWord and runs the 16-state Viterbi search.
pub fn decode_header(trace: &IqTrace, sync: &FineSync) -> DetectedHeader {
    let start = sync.start_sample.round() as i64;
    let bb = ddc_window(trace, sync.freq_hz, start, start + HEADER_SAMPLES as i64);
    let (soft, _) = demod_block(&bb, 0, HEADER_SYMBOLS, HEADER_SYMBOLS);
    let coded: Vec<SoftSymbol> = coded_symbol_positions().into_iter().map(|p| soft[p]).collect();
    let coded = deinterleave(&coded, HEADER_INTERLEAVE_ROWS);
    let (bits, state, _) = viterbi_header(&coded);
    let (fields, crc_ok) = parse_header_bits(&bits);
    DetectedHeader {
        start_sample_est: start,
        freq_hz_est: sync.freq_hz,
        sync_score: sync.score,
        fields,
        crc_ok,
        energy: sync.energy,
        initial_state: state,
    }
}

/// A detected packet: header fields plus its predicted schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub data_rate: DataRate,
    pub payload_len: usize,
    pub hop_sequence_id: u16,
    pub group: u8,
    pub start_sample: i64,
    pub cfo_hz: f64,
    pub energy: f64,
    /// Absolute schedule.
    pub plan: HopPlan,
    pub headers: Vec<DetectedHeader>,
    pub header_initial_state: u8,
}

impl PacketRecord {
    pub fn block_freq(&self, i: usize) -> f64 {
        channel_center_freq(self.plan.blocks[i].channel_index).expect("plan channels valid") + self.cfo_hz
    }
}

/// Interprets a header against the hop plan; None if inconsistent.
fn header_placement(h: &DetectedHeader) -> Option<(DataRate, usize, u8, i64, f64)> {
    if !h.crc_ok {
        return None;
    }
    let dr = DataRate::from_coding_rate_field(h.fields.coding_rate)?;
    let len = h.fields.payload_len as usize;
    if !(MIN_PAYLOAD_BYTES..=MAX_PAYLOAD_BYTES).contains(&len) {
        return None;
    }
    let idx = h.fields.header_index as usize;
    if idx >= dr.header_replicas() {
        return None;
    }
    let ch = nearest_channel(h.freq_hz_est)?;
    let group = group_of_channel(ch);
    let plan = hop_plan_for(dr, len, h.fields.hop_sequence_id, group);
    if plan.blocks[idx].channel_index != ch {
        return None;
    }
    let start = h.start_sample_est - (idx * HEADER_PITCH_SAMPLES) as i64;
    let cfo = h.freq_hz_est - channel_center_freq(ch).ok()?;
    Some((dr, len, group, start, cfo))
}

/// Headers with equal fields whose back-computed packet starts agree within this tolerance
/// belong to one packet.
pub const REPLICA_TOLERANCE_SAMPLES: i64 = 2 * SAMPLES_PER_SYMBOL as i64;

pub fn consolidate_headers(headers: &[DetectedHeader]) -> Vec<PacketRecord> {
    let mut placed: Vec<(&DetectedHeader, (DataRate, usize, u8, i64, f64))> = headers
        .iter()
        .filter_map(|h| header_placement(h).map(|p| (h, p)))
        .collect();
    placed.sort_by(|a, b| {
        b.0.energy
            .partial_cmp(&a.0.energy)
            .unwrap()
            .then(a.1 .3.cmp(&b.1 .3))
    });
    struct Acc {
        key: (DataRate, usize, u16, u8),
        anchor: i64,
        members: Vec<(DetectedHeader, i64, f64)>,
    }
    let mut groups: Vec<Acc> = Vec::new();
    for (h, (dr, len, group, start, cfo)) in placed {
        let key = (dr, len, h.fields.hop_sequence_id, group);
        match groups
            .iter_mut()
            .find(|g| g.key == key && (g.anchor - start).abs() <= REPLICA_TOLERANCE_SAMPLES)
        {
            Some(g) => g.members.push((h.clone(), start, cfo)),
            None => groups.push(Acc {
                key,
                anchor: start,
                members: vec![(h.clone(), start, cfo)],
            }),
        }
    }
    let mut out: Vec<PacketRecord> = groups
        .into_iter()
        .map(|g| {
            let wsum: f64 = g.members.iter().map(|m| m.0.energy.max(1e-30)).sum();
            let start = g
                .members
                .iter()
                .map(|m| m.1 as f64 * m.0.energy.max(1e-30))
                .sum::<f64>()
                / wsum;
            let cfo = g.members.iter().map(|m| m.2 * m.0.energy.max(1e-30)).sum::<f64>() / wsum;
            let best = &g.members[0].0;
            let (dr, len, hop, group) = g.key;
            let start = start.round() as i64;
            let mut hs: Vec<DetectedHeader> = g.members.iter().map(|m| m.0.clone()).collect();
            hs.sort_by_key(|h| (h.fields.header_index, h.start_sample_est));
            PacketRecord {
                data_rate: dr,
                payload_len: len,
                hop_sequence_id: hop,
                group,
                start_sample: start,
                cfo_hz: cfo,
                energy: best.energy,
                plan: hop_plan_for(dr, len, hop, group).shifted(start),
                header_initial_state: best.initial_state,
                headers: hs,
            }
        })
        .collect();
    out.sort_by(|a, b| a.start_sample.cmp(&b.start_sample).then(a.hop_sequence_id.cmp(&b.hop_sequence_id)));
    out
}

/// Record from known packet parameters (ideal acquisition). The energy is the SyncWord
/// correlation at the true header positions, in the units blind acquisition reports.
pub fn known_record(
    trace: &IqTrace,
    dr: DataRate,
    payload_len: usize,
    hop_sequence_id: u16,
    group: u8,
    start_sample: i64,
    cfo_hz: f64,
) -> PacketRecord {
    let plan = hop_plan_for(dr, payload_len, hop_sequence_id, group).shifted(start_sample);
    let exact = RxConfig {
        fine_time_span_symbols: 0.0,
        fine_freq_span_hz: 0.0,
        ..RxConfig::default()
    };
    let t = SAMPLES_PER_SYMBOL as i64;
    let energy = plan
        .headers()
        .map(|b| {
            let f = channel_center_freq(b.channel_index).expect("plan channels valid") + cfo_hz;
            let bb = ddc_window(trace, f, b.start_sample - t, b.end_sample() + t);
            fine_sync_surface(&bb, b.start_sample, &exact).best.map_or(0.0, |s| s.energy)
        })
        .fold(0.0, f64::max);
    PacketRecord {
        data_rate: dr,
        payload_len,
        hop_sequence_id,
        group,
        start_sample,
        cfo_hz,
        energy,
        plan,
        headers: Vec::new(),
        header_initial_state: default_initial_state(hop_sequence_id),
    }
}

pub fn build_occupancy(records: &[PacketRecord]) -> OccupancyMap {
    let mut entries = Vec::new();
    for (owner, r) in records.iter().enumerate() {
        for (i, b) in r.plan.blocks.iter().enumerate() {
            entries.push(OccupancyEntry {
                start_sample: b.start_sample,
                end_sample: b.end_sample(),
                freq_hz: r.block_freq(i),
                energy: r.energy,
                owner,
            });
        }
    }
    OccupancyMap { entries }
}

/// Erasure flag per symbol of one block: interfering energy within `caed_freq_hz`
/// above `caed_energy_ratio` × own energy.
pub fn caed_mark(
    owner: usize,
    block_start: i64,
    n_symbols: usize,
    freq_hz: f64,
    occupancy: &OccupancyMap,
    energy: f64,
    cfg: &RxConfig,
) -> Vec<bool> {
    let t = SAMPLES_PER_SYMBOL as i64;
    let end = block_start + n_symbols as i64 * t;
    let near: Vec<&OccupancyEntry> = occupancy
        .entries
        .iter()
        .filter(|e| {
            e.owner != owner
                && (e.freq_hz - freq_hz).abs() <= cfg.caed_freq_hz
                && e.start_sample < end
                && e.end_sample > block_start
        })
        .collect();
    (0..n_symbols as i64)
        .map(|k| {
            let s0 = block_start + k * t;
            let s1 = s0 + t;
            let interf: f64 = near
                .iter()
                .filter(|e| e.start_sample < s1 && e.end_sample > s0)
                .map(|e| e.energy)
                .sum();
            interf > cfg.caed_energy_ratio * energy
        })
        .collect()
}

/// Demodulates every fragment, applies CAED, then deinterleaves, dewhitens and decodes.
pub fn decode_packet(
    record: &PacketRecord,
    owner: usize,
    trace: &IqTrace,
    occupancy: &OccupancyMap,
    cfg: &RxConfig,
) -> DecodedPacket {
    let n_coded = data_coded_bits(record.payload_len, record.data_rate);
    let layout = fragment_layout(n_coded);
    let mut stream: Vec<SoftSymbol> = Vec::with_capacity(n_coded);
    let mut collision_fraction = Vec::with_capacity(layout.len());
    let frag_blocks = record
        .plan
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == BlockKind::Fragment);
    for ((bi, b), range) in frag_blocks.zip(&layout) {
        let f = record.block_freq(bi);
        let bb = ddc_window(trace, f, b.start_sample, b.end_sample());
        let (mut soft, _) = demod_block(&bb, 1, range.len(), b.n_symbols);
        let mut erased = 0;
        if cfg.caed {
            let flags = caed_mark(owner, b.start_sample, b.n_symbols, f, occupancy, record.energy, cfg);
            for (s, &fl) in soft.iter_mut().zip(&flags[1..]) {
                if fl {
                    s.erase();
                    erased += 1;
                }
            }
        }
        collision_fraction.push(erased as f64 / range.len() as f64);
        stream.extend(soft);
    }
    let mut stream = deinterleave(&stream, DATA_INTERLEAVE_ROWS);
    for (s, w) in stream.iter_mut().zip(pn9_stream(n_coded)) {
        if w == 1 {
            s.value = -s.value;
        }
    }
    let (bits, _) = viterbi_data(&stream, record.data_rate);
    let n_bytes = record.payload_len + 2;
    let bytes = bits_to_bytes(&bits[..8 * n_bytes]);
    let crc_ok = crc16_verify(&bytes);
    DecodedPacket {
        payload: bytes[..record.payload_len].to_vec(),
        crc_ok,
        data_rate: record.data_rate,
        hop_sequence_id: record.hop_sequence_id,
        group: record.group,
        hop_plan: record.plan.clone(),
        cfo_hz: record.cfo_hz,
        energy: record.energy,
        collision_fraction,
        headers: record.headers.clone(),
        header_initial_state: record.header_initial_state,
    }
}
