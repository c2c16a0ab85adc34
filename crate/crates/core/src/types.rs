use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DataRate, MAX_PAYLOAD_BYTES, MIN_PAYLOAD_BYTES, N_GROUPS};

/// Multi-antenna complex sample buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    samples: Vec<Vec<Complex32>>,
    sample_rate_hz: f64,
}

impl IqTrace {
    pub fn new(samples: Vec<Vec<Complex32>>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("trace needs at least one antenna".into()));
        }
        let n = samples[0].len();
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::RaggedAntennas);
        }
        if samples
            .iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFiniteSample);
        }
        Ok(IqTrace {
            samples,
            sample_rate_hz,
        })
    }

    pub fn single(samples: Vec<Complex32>, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![samples], sample_rate_hz)
    }

    pub fn zeros(n_antennas: usize, len: usize, sample_rate_hz: f64) -> Self {
        IqTrace {
            samples: vec![vec![Complex32::new(0.0, 0.0); len]; n_antennas.max(1)],
            sample_rate_hz,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    pub fn antenna(&self, a: usize) -> &[Complex32] {
        &self.samples[a]
    }

    /// Mutable access; callers must keep samples finite.
    pub fn antenna_mut(&mut self, a: usize) -> &mut [Complex32] {
        &mut self.samples[a]
    }

    pub fn antennas(&self) -> &[Vec<Complex32>] {
        &self.samples
    }

    pub fn into_antennas(self) -> Vec<Vec<Complex32>> {
        self.samples
    }

    /// Mean |x|² over every antenna and sample.
    pub fn mean_power(&self) -> f64 {
        let n = (self.len() * self.n_antennas()).max(1) as f64;
        self.samples
            .iter()
            .flatten()
            .map(|z| z.norm_sqr() as f64)
            .sum::<f64>()
            / n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketConfig {
    pub data_rate: DataRate,
    pub payload: Vec<u8>,
    pub hop_sequence_id: u16,
    pub group: u8,
}

impl PacketConfig {
    pub fn new(data_rate: DataRate, payload: Vec<u8>, hop_sequence_id: u16, group: u8) -> Result<Self> {
        let cfg = PacketConfig {
            data_rate,
            payload,
            hop_sequence_id,
            group,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_PAYLOAD_BYTES..=MAX_PAYLOAD_BYTES).contains(&self.payload.len()) {
            return Err(Error::InvalidPayloadLength(self.payload.len()));
        }
        if self.hop_sequence_id >= 512 {
            return Err(Error::InvalidHopSequenceId(self.hop_sequence_id));
        }
        if !(1..=N_GROUPS as u8).contains(&self.group) {
            return Err(Error::InvalidGroup(self.group));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Header,
    Fragment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub channel_index: usize,
    /// Offset of the first sample, relative to the plan origin.
    pub start_sample: i64,
    pub n_symbols: usize,
}

impl Block {
    pub fn n_samples(&self) -> usize {
        self.n_symbols * crate::params::SAMPLES_PER_SYMBOL
    }

    pub fn end_sample(&self) -> i64 {
        self.start_sample + self.n_samples() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopPlan {
    pub blocks: Vec<Block>,
}

impl HopPlan {
    pub fn total_samples(&self) -> usize {
        self.blocks
            .last()
            .map(|b| (b.end_sample() - self.blocks[0].start_sample) as usize)
            .unwrap_or(0)
    }

    /// Same schedule moved by `offset` samples.
    pub fn shifted(&self, offset: i64) -> HopPlan {
        HopPlan {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    start_sample: b.start_sample + offset,
                    ..b.clone()
                })
                .collect(),
        }
    }

    pub fn headers(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| b.kind == BlockKind::Header)
    }

    pub fn fragments(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| b.kind == BlockKind::Fragment)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SoftSymbol {
    pub value: f64,
    pub erased: bool,
}

impl SoftSymbol {
    pub fn new(value: f64) -> Self {
        SoftSymbol {
            value,
            erased: false,
        }
    }

    pub fn erasure() -> Self {
        SoftSymbol {
            value: 0.0,
            erased: true,
        }
    }

    pub fn erase(&mut self) {
        self.value = 0.0;
        self.erased = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeaderFields {
    pub coding_rate: u8,
    pub payload_len: u8,
    pub hop_sequence_id: u16,
    pub header_index: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedHeader {
    pub start_sample_est: i64,
    pub freq_hz_est: f64,
    pub sync_score: f64,
    pub fields: HeaderFields,
    pub crc_ok: bool,
    /// |⟨r, ref⟩/32|², in received sample power units.
    pub energy: f64,
    pub initial_state: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedPacket {
    pub payload: Vec<u8>,
    pub crc_ok: bool,
    pub data_rate: DataRate,
    pub hop_sequence_id: u16,
    pub group: u8,
    /// Schedule in absolute trace samples.
    pub hop_plan: HopPlan,
    pub cfo_hz: f64,
    pub energy: f64,
    /// Fraction of erased symbols per fragment.
    pub collision_fraction: Vec<f64>,
    pub headers: Vec<DetectedHeader>,
    pub header_initial_state: u8,
}

impl DecodedPacket {
    pub fn start_sample(&self) -> i64 {
        self.hop_plan.blocks[0].start_sample
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub amplitude: f64,
    pub theta: Vec<f64>,
    pub delta_hz: f64,
    pub tau_s: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEntry {
    pub start_sample: i64,
    pub end_sample: i64,
    pub freq_hz: f64,
    pub energy: f64,
    pub owner: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMap {
    pub entries: Vec<OccupancyEntry>,
}
