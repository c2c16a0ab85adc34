//! CRC-8 (poly 0x07, init 0) over bit sequences and CRC-16/CCITT-FALSE over bytes.

pub fn crc8(bits: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &b in bits {
        let top = (crc >> 7) ^ (b & 1);
        crc <<= 1;
        if top == 1 {
            crc ^= 0x07;
        }
    }
    crc
}

/// True when the trailing 8 bits are the CRC-8 of the bits before them.
pub fn crc8_verify(bits_with_crc: &[u8]) -> bool {
    bits_with_crc.len() >= 8 && crc8(bits_with_crc) == 0
}

pub fn crc16(bytes: &[u8]) -> u16 {
    let mut crc = 0xFFFFu16;
    for &byte in bytes {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

/// Checks a payload followed by its big-endian CRC-16.
pub fn crc16_verify(bytes_with_crc: &[u8]) -> bool {
    if bytes_with_crc.len() < 2 {
        return false;
    }
    let (body, tail) = bytes_with_crc.split_at(bytes_with_crc.len() - 2);
    crc16(body) == u16::from_be_bytes([tail[0], tail[1]])
}
