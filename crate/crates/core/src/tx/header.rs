//! Header field layout and the 114-symbol header block.
//!
//! Info bits, MSB first: CR(2) payload_len(5) hop_id(9) header_index(2) reserved(14) crc8(8).

use crate::coding::conv::conv_encode_header;
use crate::coding::crc::crc8;
use crate::coding::interleave::interleave;
use crate::coding::{push_field, read_field};
use crate::params::{
    HEADER_CODED_BITS, HEADER_GUARD_SYMBOLS, HEADER_INFO_BITS, HEADER_SYMBOLS, SYNC_BITS,
    SYNC_OFFSET_SYMBOLS, SYNC_WORD,
};
use crate::types::HeaderFields;

pub const HEADER_INTERLEAVE_ROWS: usize = 8;

/// Encoder initial state used by the transmitter.
pub fn default_initial_state(hop_sequence_id: u16) -> u8 {
    (hop_sequence_id & 0xF) as u8
}

pub fn sync_word_bits() -> Vec<u8> {
    let mut v = Vec::with_capacity(SYNC_BITS);
    push_field(&mut v, SYNC_WORD, SYNC_BITS);
    v
}

/// The 40 info bits including crc8.
pub fn header_info_bits(f: &HeaderFields) -> Vec<u8> {
    let mut bits = Vec::with_capacity(HEADER_INFO_BITS);
    push_field(&mut bits, f.coding_rate as u32 & 0x3, 2);
    push_field(&mut bits, f.payload_len as u32 & 0x1F, 5);
    push_field(&mut bits, f.hop_sequence_id as u32 & 0x1FF, 9);
    push_field(&mut bits, f.header_index as u32 & 0x3, 2);
    push_field(&mut bits, 0, 14);
    let c = crc8(&bits);
    push_field(&mut bits, c as u32, 8);
    bits
}

/// Parses 40 info bits; the flag reports whether crc8 verifies.
pub fn parse_header_bits(bits: &[u8]) -> (HeaderFields, bool) {
    let f = HeaderFields {
        coding_rate: read_field(&bits[0..2]) as u8,
        payload_len: read_field(&bits[2..7]) as u8,
        hop_sequence_id: read_field(&bits[7..16]) as u16,
        header_index: read_field(&bits[16..18]) as u8,
    };
    let ok = bits.len() == HEADER_INFO_BITS && crc8(&bits[..32]) == read_field(&bits[32..40]) as u8;
    (f, ok)
}

/// Header symbols: coded half ∥ SyncWord ∥ coded half ∥ two zero guards.
pub fn build_header_symbols_with_state(f: &HeaderFields, initial_state: u8) -> Vec<u8> {
    let coded = conv_encode_header(&header_info_bits(f), initial_state).expect("40 info bits");
    let inter = interleave(&coded, HEADER_INTERLEAVE_ROWS);
    let half = HEADER_CODED_BITS / 2;
    let mut sym = Vec::with_capacity(HEADER_SYMBOLS);
    sym.extend_from_slice(&inter[..half]);
    sym.extend(sync_word_bits());
    sym.extend_from_slice(&inter[half..]);
    sym.extend(std::iter::repeat_n(0, HEADER_GUARD_SYMBOLS));
    sym
}

pub fn build_header_symbols(f: &HeaderFields) -> Vec<u8> {
    build_header_symbols_with_state(f, default_initial_state(f.hop_sequence_id))
}

/// Header symbol indices carrying coded bits, in interleaved-stream order.
pub fn coded_symbol_positions() -> Vec<usize> {
    let half = HEADER_CODED_BITS / 2;
    (0..half)
        .chain(SYNC_OFFSET_SYMBOLS + SYNC_BITS..SYNC_OFFSET_SYMBOLS + SYNC_BITS + half)
        .collect()
}
