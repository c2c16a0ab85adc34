//! Bit chains and full packet waveforms.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};

use super::gmsk::GmskModulator;
use super::header::{build_header_symbols_with_state, default_initial_state};
use super::hop::make_hop_plan;
use crate::coding::conv::conv_encode_data;
use crate::coding::crc::crc16;
use crate::coding::interleave::interleave;
use crate::coding::whiten::whiten;
use crate::coding::bytes_to_bits;
use crate::error::Result;
use crate::params::{
    channel_center_freq, fragment_layout, DataRate, FRAGMENT_GUARD_SYMBOLS, SAMPLE_RATE_HZ,
};
use crate::types::{HeaderFields, HopPlan, IqTrace, PacketConfig};

pub const DATA_INTERLEAVE_ROWS: usize = 10;

/// payload ∥ crc16 ∥ 6 zeros
pub fn data_encoder_input(payload: &[u8]) -> Vec<u8> {
    let mut bytes = payload.to_vec();
    bytes.extend_from_slice(&crc16(payload).to_be_bytes());
    let mut bits = bytes_to_bits(&bytes);
    bits.extend([0; 6]);
    bits
}

/// Coded, whitened and interleaved data bits in transmission order.
pub fn encode_data(payload: &[u8], dr: DataRate) -> Vec<u8> {
    let coded = conv_encode_data(&data_encoder_input(payload), dr).expect("terminated input");
    interleave(&whiten(&coded), DATA_INTERLEAVE_ROWS)
}

/// Splits the data stream into fragment symbol sequences: guard ∥ bits ∥ guard.
pub fn fragment_symbols(data: &[u8]) -> Vec<Vec<u8>> {
    fragment_layout(data.len())
        .into_iter()
        .map(|r| {
            let mut s = Vec::with_capacity(r.len() + FRAGMENT_GUARD_SYMBOLS);
            s.push(0);
            s.extend_from_slice(&data[r]);
            s.push(0);
            s
        })
        .collect()
}

pub fn header_fields(cfg: &PacketConfig, header_index: u8) -> HeaderFields {
    HeaderFields {
        coding_rate: cfg.data_rate.coding_rate_field(),
        payload_len: cfg.payload.len() as u8,
        hop_sequence_id: cfg.hop_sequence_id,
        header_index,
    }
}

/// Symbol bits of every block in plan order.
pub fn block_symbols(cfg: &PacketConfig, header_state: u8) -> Vec<Vec<u8>> {
    let mut blocks: Vec<Vec<u8>> = (0..cfg.data_rate.header_replicas())
        .map(|i| build_header_symbols_with_state(&header_fields(cfg, i as u8), header_state))
        .collect();
    blocks.extend(fragment_symbols(&encode_data(&cfg.payload, cfg.data_rate)));
    blocks
}

/// e^{j2π f n / fs} for n in `start..start+len`.
pub fn carrier(freq_hz: f64, start: i64, len: usize) -> impl Iterator<Item = Complex64> {
    // exact phasor every ANCHOR samples, recursive rotation in between
    const ANCHOR: usize = 1024;
    let w = 2.0 * PI * freq_hz / SAMPLE_RATE_HZ;
    let step = Complex64::from_polar(1.0, w);
    let anchor = move |i: usize| {
        // reduce the phase in cycles first to keep precision for large sample indices
        let cycles = freq_hz * (start + i as i64) as f64 / SAMPLE_RATE_HZ;
        Complex64::from_polar(1.0, 2.0 * PI * (cycles - cycles.floor()))
    };
    let mut z = Complex64::new(1.0, 0.0);
    (0..len).map(move |i| {
        if i % ANCHOR == 0 {
            z = anchor(i);
        }
        let out = z;
        z *= step;
        out
    })
}

/// Unit-envelope packet waveform starting at sample 0, with its plan.
pub fn assemble_packet(cfg: &PacketConfig) -> Result<(IqTrace, HopPlan)> {
    cfg.validate()?;
    let plan = make_hop_plan(cfg);
    let blocks = block_symbols(cfg, default_initial_state(cfg.hop_sequence_id));
    let m = GmskModulator::standard();
    let mut out = vec![Complex32::new(0.0, 0.0); plan.total_samples()];
    for (b, bits) in plan.blocks.iter().zip(&blocks) {
        let f = channel_center_freq(b.channel_index)?;
        let base = m.modulate(bits);
        let dst = &mut out[b.start_sample as usize..b.end_sample() as usize];
        for ((d, z), c) in dst.iter_mut().zip(&base).zip(carrier(f, b.start_sample, base.len())) {
            let v = z * c;
            *d = Complex32::new(v.re as f32, v.im as f32);
        }
    }
    Ok((IqTrace::single(out, SAMPLE_RATE_HZ)?, plan))
}
