//! PN9 whitening (x⁹ + x⁵ + 1, seed 0x1FF).

pub const SEED: u16 = 0x1FF;

pub fn pn9_stream(n: usize) -> Vec<u8> {
    let mut s = SEED;
    (0..n)
        .map(|_| {
            let out = (s & 1) as u8;
            let fb = (s ^ (s >> 5)) & 1;
            s = (s >> 1) | (fb << 8);
            out
        })
        .collect()
}

/// XOR with the PN9 stream; its own inverse.
pub fn whiten(bits: &[u8]) -> Vec<u8> {
    bits.iter().zip(pn9_stream(bits.len())).map(|(&b, w)| b ^ w).collect()
}
