//! Convolutional encoders.
//!
//! Header: K=5, rate 1/2, polys 23/35 (octal), configurable initial state, unterminated.
//! Data: K=7, rate 1/3, polys 133/171/165 (octal); DR9 punctures to rate 2/3.

use crate::error::{Error, Result};
use crate::params::{DataRate, HEADER_INFO_BITS};

pub const HEADER_POLYS: [u32; 2] = [0o23, 0o35];
pub const HEADER_MEMORY: usize = 4;
pub const DATA_POLYS: [u32; 3] = [0o133, 0o171, 0o165];
pub const DATA_MEMORY: usize = 6;

/// Kept mother-code outputs per pair of input bits for DR9.
pub const DR9_PUNCTURE: [bool; 6] = [true, true, false, true, false, false];

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Shift-register encoder; the register holds (input << memory) | state.
pub fn encode(bits: &[u8], polys: &[u32], memory: usize, initial_state: u32) -> Vec<u8> {
    let mut state = initial_state & ((1 << memory) - 1);
    let mut out = Vec::with_capacity(bits.len() * polys.len());
    for &u in bits {
        let reg = ((u as u32 & 1) << memory) | state;
        for &p in polys {
            out.push(parity(reg & p));
        }
        state = reg >> 1;
    }
    out
}

/// Rate-1/2 header code with a 4-bit initial state.
pub fn conv_encode_header(info: &[u8], initial_state: u8) -> Result<Vec<u8>> {
    if info.len() != HEADER_INFO_BITS {
        return Err(Error::WrongInputLength {
            expected: HEADER_INFO_BITS,
            got: info.len(),
        });
    }
    Ok(encode(info, &HEADER_POLYS, HEADER_MEMORY, initial_state as u32))
}

/// Mask over the mother-code stream of `n_input` steps for the given rate.
pub fn puncture_mask(n_input: usize, dr: DataRate) -> Vec<bool> {
    let n = 3 * n_input;
    match dr {
        DataRate::Dr8 => vec![true; n],
        DataRate::Dr9 => (0..n).map(|i| DR9_PUNCTURE[i % 6]).collect(),
    }
}

/// Data code; input must be payload ∥ crc16 ∥ six zeros.
pub fn conv_encode_data(bits: &[u8], dr: DataRate) -> Result<Vec<u8>> {
    if bits.len() < DATA_MEMORY || bits[bits.len() - DATA_MEMORY..].iter().any(|&b| b != 0) {
        return Err(Error::BadTermination);
    }
    let mother = encode(bits, &DATA_POLYS, DATA_MEMORY, 0);
    let mask = puncture_mask(bits.len(), dr);
    Ok(mother
        .into_iter()
        .zip(mask)
        .filter_map(|(b, keep)| keep.then_some(b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Register as an explicit array of past inputs, newest first.
    fn oracle(bits: &[u8], polys: &[u32], memory: usize, init: u32) -> Vec<u8> {
        let mut past: Vec<u8> = (0..memory).map(|i| ((init >> (memory - 1 - i)) & 1) as u8).collect();
        let mut out = Vec::new();
        for &u in bits {
            for &p in polys {
                // tap for input at bit `memory`, tap for past[i] at bit memory-1-i
                let mut acc = ((p >> memory) & 1) as u8 & u;
                for (i, &b) in past.iter().enumerate() {
                    acc ^= ((p >> (memory - 1 - i)) & 1) as u8 & b;
                }
                out.push(acc);
            }
            past.insert(0, u);
            past.pop();
        }
        out
    }

    #[test]
    fn zero_in_zero_out() {
        assert_eq!(conv_encode_header(&[0; 40], 0).unwrap(), vec![0; 80]);
        for dr in DataRate::ALL {
            assert!(conv_encode_data(&[0; 102], dr).unwrap().iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn lengths() {
        assert_eq!(conv_encode_data(&[0; 102], DataRate::Dr8).unwrap().len(), 306);
        assert_eq!(conv_encode_data(&[0; 102], DataRate::Dr9).unwrap().len(), 153);
        assert_eq!(conv_encode_data(&[0; 103], DataRate::Dr9).unwrap().len(), 155);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(conv_encode_header(&[0; 39], 0).is_err());
        let mut bits = vec![0u8; 30];
        bits[27] = 1;
        assert_eq!(conv_encode_data(&bits, DataRate::Dr8), Err(Error::BadTermination));
    }

    proptest! {
        #[test]
        fn header_matches_register_oracle(info in proptest::collection::vec(0u8..2, 40), state in 0u8..16) {
            prop_assert_eq!(
                conv_encode_header(&info, state).unwrap(),
                oracle(&info, &HEADER_POLYS, HEADER_MEMORY, state as u32)
            );
        }

        #[test]
        fn data_matches_register_oracle(mut bits in proptest::collection::vec(0u8..2, 6..200)) {
            let n = bits.len();
            for b in &mut bits[n - 6..] { *b = 0; }
            let mother = oracle(&bits, &DATA_POLYS, DATA_MEMORY, 0);
            prop_assert_eq!(conv_encode_data(&bits, DataRate::Dr8).unwrap(), mother.clone());
            let punct: Vec<u8> = mother.iter().enumerate().filter(|(i, _)| DR9_PUNCTURE[i % 6]).map(|(_, &b)| b).collect();
            prop_assert_eq!(conv_encode_data(&bits, DataRate::Dr9).unwrap(), punct);
        }

        #[test]
        fn header_depends_on_state(info in proptest::collection::vec(0u8..2, 40), s1 in 0u8..16, s2 in 0u8..16) {
            prop_assume!(s1 != s2);
            prop_assert_ne!(conv_encode_header(&info, s1).unwrap(), conv_encode_header(&info, s2).unwrap());
        }
    }
}
