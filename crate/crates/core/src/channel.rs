//! Channel models and mixing of many packets into one gateway trace.

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::ocw_noise;
use crate::error::{Error, Result};
use crate::params::SAMPLE_RATE_HZ;
use crate::tx::packet::carrier;
use crate::types::{HopPlan, IqTrace, PacketConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    /// Approximate urban channel: independent Rayleigh gain per hop block.
    BlockFading,
    /// Approximate satellite channel: Rician gain plus residual Doppler.
    LosDoppler,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "fading" | "block_fading" => Ok(ChannelKind::BlockFading),
            "los" | "los_doppler" => Ok(ChannelKind::LosDoppler),
            _ => Err(Error::InvalidParameter(format!("unknown channel {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub n_antennas: usize,
    pub rician_k_db: f64,
    /// Fixed residual carrier offset; drawn uniformly in ±max_doppler_hz when absent.
    pub doppler_hz: Option<f64>,
    pub max_doppler_hz: f64,
}

impl ChannelModel {
    pub fn awgn(n_antennas: usize) -> Self {
        ChannelModel {
            kind: ChannelKind::Awgn,
            n_antennas,
            rician_k_db: 10.0,
            doppler_hz: None,
            max_doppler_hz: 50.0,
        }
    }

    pub fn block_fading(n_antennas: usize) -> Self {
        ChannelModel {
            kind: ChannelKind::BlockFading,
            ..Self::awgn(n_antennas)
        }
    }

    pub fn los_doppler(n_antennas: usize, doppler_hz: Option<f64>) -> Self {
        ChannelModel {
            kind: ChannelKind::LosDoppler,
            doppler_hz,
            ..Self::awgn(n_antennas)
        }
    }

    /// Default antenna count per model: one for AWGN, two otherwise.
    pub fn for_kind(kind: ChannelKind) -> Self {
        match kind {
            ChannelKind::Awgn => Self::awgn(1),
            ChannelKind::BlockFading => Self::block_fading(2),
            ChannelKind::LosDoppler => Self::los_doppler(2, None),
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            ChannelKind::Awgn => "awgn",
            ChannelKind::BlockFading => "block_fading (approximate)",
            ChannelKind::LosDoppler => "los_doppler (approximate)",
        }
    }
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Scales a unit-envelope packet to `snr_db` against unit-power OCW noise.
pub fn scale_to_snr(packet: &IqTrace, snr_db: f64) -> IqTrace {
    let g = 10f64.powf(snr_db / 20.0) as f32;
    let ant = packet
        .antennas()
        .iter()
        .map(|s| s.iter().map(|z| z * g).collect())
        .collect();
    IqTrace::new(ant, packet.sample_rate_hz()).expect("scaling keeps samples finite")
}

/// Passes a single-antenna packet through the channel, returning one stream per antenna.
pub fn apply_channel<R: Rng + ?Sized>(
    packet: &IqTrace,
    plan: &HopPlan,
    model: &ChannelModel,
    rng: &mut R,
) -> IqTrace {
    let x = packet.antenna(0);
    let n_ant = model.n_antennas.max(1);
    let out: Vec<Vec<Complex32>> = match model.kind {
        ChannelKind::Awgn => vec![x.to_vec(); n_ant],
        ChannelKind::BlockFading => (0..n_ant)
            .map(|_| {
                let mut y = x.to_vec();
                for b in &plan.blocks {
                    let g = cn01(rng);
                    let g = Complex32::new(g.re as f32, g.im as f32);
                    let lo = (b.start_sample.max(0) as usize).min(y.len());
                    let hi = (b.end_sample().max(0) as usize).min(y.len());
                    y[lo..hi].iter_mut().for_each(|z| *z *= g);
                }
                y
            })
            .collect(),
        ChannelKind::LosDoppler => {
            let k = 10f64.powf(model.rician_k_db / 10.0);
            let fd = model
                .doppler_hz
                .unwrap_or_else(|| rng.random_range(-model.max_doppler_hz..=model.max_doppler_hz));
            (0..n_ant)
                .map(|_| {
                    let los = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
                    let g = los * (k / (k + 1.0)).sqrt() + cn01(rng) * (1.0 / (k + 1.0)).sqrt();
                    x.iter()
                        .zip(carrier(fd, 0, x.len()))
                        .map(|(z, c)| {
                            let v = Complex64::new(z.re as f64, z.im as f64) * c * g;
                            Complex32::new(v.re as f32, v.im as f32)
                        })
                        .collect()
                })
                .collect()
        }
    };
    IqTrace::new(out, packet.sample_rate_hz()).expect("finite gains")
}

/// One packet to be added to a trace.
#[derive(Debug, Clone)]
pub struct Placement {
    /// Channel output, unit nominal envelope, one stream per antenna.
    pub packet: IqTrace,
    pub cfg: PacketConfig,
    /// Packet-relative plan.
    pub plan: HopPlan,
    pub start_sample: usize,
    pub freq_offset_hz: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPacket {
    pub id: usize,
    pub data_rate: crate::params::DataRate,
    pub payload_hex: String,
    pub hop_sequence_id: u16,
    pub group: u8,
    pub start_sample: usize,
    pub freq_offset_hz: f64,
    pub snr_db: f64,
    /// Absolute schedule in trace samples.
    pub plan: HopPlan,
}

impl TruthPacket {
    pub fn payload(&self) -> Vec<u8> {
        (0..self.payload_hex.len() / 2)
            .map(|i| u8::from_str_radix(&self.payload_hex[2 * i..2 * i + 2], 16).unwrap_or(0))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub channel: String,
    pub packets: Vec<TruthPacket>,
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Unit-power OCW noise plus every placed packet, scaled to its SNR and shifted in frequency.
pub fn mix_packets(
    placements: &[Placement],
    duration_s: f64,
    n_antennas: usize,
    seed: u64,
) -> Result<(IqTrace, GroundTruth)> {
    mix_packets_with_noise(placements, duration_s, n_antennas, seed, true)
}

/// As `mix_packets`; `noise = false` gives a noiseless trace.
pub fn mix_packets_with_noise(
    placements: &[Placement],
    duration_s: f64,
    n_antennas: usize,
    seed: u64,
    noise: bool,
) -> Result<(IqTrace, GroundTruth)> {
    let mut b = TraceBuilder::new(duration_s, n_antennas, seed, noise);
    for p in placements {
        b.check(p)?;
    }
    for p in placements {
        b.add(p)?;
    }
    b.finish()
}

/// Accumulates packets into a trace one at a time, so large ensembles never hold every
/// packet waveform at once.
pub struct TraceBuilder {
    ant: Vec<Vec<Complex32>>,
    truth: GroundTruth,
}

impl TraceBuilder {
    pub fn new(duration_s: f64, n_antennas: usize, seed: u64, noise: bool) -> Self {
        let len = (duration_s * SAMPLE_RATE_HZ).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ant = (0..n_antennas)
            .map(|_| {
                if noise {
                    ocw_noise(len, &mut rng)
                } else {
                    vec![Complex32::new(0.0, 0.0); len]
                }
            })
            .collect();
        TraceBuilder {
            ant,
            truth: GroundTruth::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.ant.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set_channel_label(&mut self, label: &str) {
        self.truth.channel = label.to_string();
    }

    fn check(&self, p: &Placement) -> Result<()> {
        let len = self.len();
        if p.start_sample + p.packet.len() > len {
            return Err(Error::PlacementOverflow {
                start: p.start_sample,
                len: p.packet.len(),
                trace_len: len,
            });
        }
        if p.packet.n_antennas() != self.ant.len() {
            return Err(Error::AntennaMismatch {
                expected: self.ant.len(),
                got: p.packet.n_antennas(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, p: &Placement) -> Result<()> {
        self.check(p)?;
        let g = 10f64.powf(p.snr_db / 20.0);
        for (a, dst) in self.ant.iter_mut().enumerate() {
            let src = p.packet.antenna(a);
            let dst = &mut dst[p.start_sample..p.start_sample + src.len()];
            if p.freq_offset_hz == 0.0 {
                let g = g as f32;
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s * g);
            } else {
                let c = carrier(p.freq_offset_hz, p.start_sample as i64, src.len());
                for ((d, s), c) in dst.iter_mut().zip(src).zip(c) {
                    let v = Complex64::new(s.re as f64, s.im as f64) * c * g;
                    *d += Complex32::new(v.re as f32, v.im as f32);
                }
            }
        }
        self.truth.packets.push(TruthPacket {
            id: self.truth.packets.len(),
            data_rate: p.cfg.data_rate,
            payload_hex: to_hex(&p.cfg.payload),
            hop_sequence_id: p.cfg.hop_sequence_id,
            group: p.cfg.group,
            start_sample: p.start_sample,
            freq_offset_hz: p.freq_offset_hz,
            snr_db: p.snr_db,
            plan: p.plan.shifted(p.start_sample as i64),
        });
        Ok(())
    }

    pub fn finish(self) -> Result<(IqTrace, GroundTruth)> {
        Ok((IqTrace::new(self.ant, SAMPLE_RATE_HZ)?, self.truth))
    }
}
