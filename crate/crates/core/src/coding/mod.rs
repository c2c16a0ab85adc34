//! Bit-level codec: CRCs, convolutional codes, Viterbi decoding, whitening, interleaving.
//!
//! Bits are carried as `u8` values that are either 0 or 1.

pub mod conv;
pub mod crc;
pub mod interleave;
pub mod viterbi;
pub mod whiten;

/// MSB-first expansion of bytes into bits.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Packs MSB-first bits into bytes; a trailing partial byte is zero padded.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}

/// MSB-first `width`-bit field.
pub fn push_field(bits: &mut Vec<u8>, value: u32, width: usize) {
    for i in (0..width).rev() {
        bits.push(((value >> i) & 1) as u8);
    }
}

pub fn read_field(bits: &[u8]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}
