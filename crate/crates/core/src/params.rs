//! PHY constants for the EU 137 kHz operating channel and the channel grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_RATE_HZ: f64 = 500_000.0;
/// Symbol rate chosen so a symbol is exactly 1024 samples at 500 ksps.
pub const SYMBOL_RATE_HZ: f64 = 488.281_25;
pub const SAMPLES_PER_SYMBOL: usize = 1024;
/// Symbol time T in seconds (2.048 ms).
pub const SYMBOL_TIME_S: f64 = 1.0 / SYMBOL_RATE_HZ;

pub const OCW_HZ: f64 = 137_000.0;
pub const OBW_HZ: f64 = 488.0;
pub const N_CHANNELS: usize = 280;
pub const N_GROUPS: usize = 8;
pub const CHANNELS_PER_GROUP: usize = N_CHANNELS / N_GROUPS;

pub const SYNC_WORD: u32 = 0x2C0F_7995;
pub const SYNC_BITS: usize = 32;

/// Information bits (fields + crc8) carried by a header.
pub const HEADER_INFO_BITS: usize = 40;
pub const HEADER_CODED_BITS: usize = 80;
pub const HEADER_GUARD_SYMBOLS: usize = 2;
/// coded half ∥ SyncWord ∥ coded half ∥ guard
pub const HEADER_SYMBOLS: usize = HEADER_CODED_BITS + SYNC_BITS + HEADER_GUARD_SYMBOLS;
/// First header symbol carrying the SyncWord.
pub const SYNC_OFFSET_SYMBOLS: usize = HEADER_CODED_BITS / 2;

/// Coded data bits carried by a full fragment.
pub const FRAGMENT_DATA_BITS: usize = 48;
/// Zero-valued symbols framing the data bits of each fragment (one before, one after).
pub const FRAGMENT_GUARD_SYMBOLS: usize = 2;
pub const FRAGMENT_SYMBOLS: usize = FRAGMENT_DATA_BITS + FRAGMENT_GUARD_SYMBOLS;

/// Idle time between consecutive blocks of a packet (2 ms).
pub const BLOCK_GAP_SAMPLES: usize = 1000;

pub const HEADER_SAMPLES: usize = HEADER_SYMBOLS * SAMPLES_PER_SYMBOL;

pub const MIN_PAYLOAD_BYTES: usize = 8;
pub const MAX_PAYLOAD_BYTES: usize = 16;

/// Data rate of the EU LR-FHSS profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum DataRate {
    Dr8,
    Dr9,
}

impl DataRate {
    pub const ALL: [DataRate; 2] = [DataRate::Dr8, DataRate::Dr9];

    pub fn header_replicas(self) -> usize {
        match self {
            DataRate::Dr8 => 3,
            DataRate::Dr9 => 2,
        }
    }

    /// Value of the 2-bit coding-rate header field.
    pub fn coding_rate_field(self) -> u8 {
        match self {
            DataRate::Dr8 => 0,
            DataRate::Dr9 => 1,
        }
    }

    pub fn from_coding_rate_field(cr: u8) -> Option<Self> {
        match cr {
            0 => Some(DataRate::Dr8),
            1 => Some(DataRate::Dr9),
            _ => None,
        }
    }

    /// Coded data bits produced for `n_input` encoder input bits.
    pub fn coded_len(self, n_input: usize) -> usize {
        match self {
            DataRate::Dr8 => 3 * n_input,
            DataRate::Dr9 => (3 * n_input).div_ceil(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DataRate::Dr8 => "DR8",
            DataRate::Dr9 => "DR9",
        }
    }
}

impl std::fmt::Display for DataRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DataRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DR8" => Ok(DataRate::Dr8),
            "DR9" => Ok(DataRate::Dr9),
            _ => Err(Error::InvalidParameter(format!("unknown data rate {s}"))),
        }
    }
}

/// Encoder input bits for a payload: payload ∥ crc16 ∥ six zero bits.
pub fn data_input_bits(payload_len: usize) -> usize {
    8 * payload_len + 16 + 6
}

pub fn data_coded_bits(payload_len: usize, dr: DataRate) -> usize {
    dr.coded_len(data_input_bits(payload_len))
}

pub fn n_fragments(payload_len: usize, dr: DataRate) -> usize {
    data_coded_bits(payload_len, dr).div_ceil(FRAGMENT_DATA_BITS)
}

/// Coded-bit ranges carried by each fragment; the last one may be short.
pub fn fragment_layout(n_coded: usize) -> Vec<std::ops::Range<usize>> {
    (0..n_coded.div_ceil(FRAGMENT_DATA_BITS))
        .map(|i| {
            let start = i * FRAGMENT_DATA_BITS;
            start..(start + FRAGMENT_DATA_BITS).min(n_coded)
        })
        .collect()
}

/// The fixed EU parameter profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyParams {
    pub ocw_hz: f64,
    pub obw_hz: f64,
    pub symbol_rate_hz: f64,
    pub sample_rate_hz: f64,
    pub n_channels: usize,
    pub n_groups: usize,
    pub header_duration_s: f64,
    pub fragment_duration_s: f64,
    pub sync_word: u32,
}

impl PhyParams {
    pub fn eu() -> Self {
        PhyParams {
            ocw_hz: OCW_HZ,
            obw_hz: OBW_HZ,
            symbol_rate_hz: SYMBOL_RATE_HZ,
            sample_rate_hz: SAMPLE_RATE_HZ,
            n_channels: N_CHANNELS,
            n_groups: N_GROUPS,
            header_duration_s: 0.233,
            fragment_duration_s: 0.102,
            sync_word: SYNC_WORD,
        }
    }

    pub fn header_replicas(&self, dr: DataRate) -> usize {
        dr.header_replicas()
    }

    pub fn samples_per_symbol(&self) -> f64 {
        self.sample_rate_hz / self.symbol_rate_hz
    }
}

impl Default for PhyParams {
    fn default() -> Self {
        Self::eu()
    }
}

/// Center frequency of a channel relative to the OCW center.
///
/// The 280 channels sit on a uniform 488 Hz grid symmetric about 0 Hz, so
/// channel 139 is at −244 Hz and channel 140 at +244 Hz.
pub fn channel_center_freq(channel_index: usize) -> Result<f64> {
    if channel_index >= N_CHANNELS {
        return Err(Error::ChannelOutOfRange(channel_index));
    }
    Ok((channel_index as f64 - (N_CHANNELS as f64 - 1.0) / 2.0) * OBW_HZ)
}

/// Channel whose center is closest to `freq_hz`, if it lies on the grid.
pub fn nearest_channel(freq_hz: f64) -> Option<usize> {
    let idx = (freq_hz / OBW_HZ + (N_CHANNELS as f64 - 1.0) / 2.0).round();
    if idx < 0.0 || idx >= N_CHANNELS as f64 {
        None
    } else {
        Some(idx as usize)
    }
}

/// Group (1..=8) a channel belongs to.
pub fn group_of_channel(channel_index: usize) -> u8 {
    (channel_index % N_GROUPS) as u8 + 1
}
