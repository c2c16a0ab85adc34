//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lrfhss_core::channel::{ChannelKind, ChannelModel};
use lrfhss_core::rx::RxConfig;
use lrfhss_core::DataRate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Loopback,
    PrrSweep,
    Capacity,
    Decode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrMix {
    Dr8,
    Dr9,
    Both,
}

impl DrMix {
    pub fn rates(self) -> &'static [DataRate] {
        match self {
            DrMix::Dr8 => &[DataRate::Dr8],
            DrMix::Dr9 => &[DataRate::Dr9],
            DrMix::Both => &DataRate::ALL,
        }
    }
}

/// Receiver variants compared in capacity runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AsIs,
    NoSic,
    NoCaed,
    IdealAcquisition,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::AsIs => "as_is",
            Variant::NoSic => "no_sic",
            Variant::NoCaed => "no_caed",
            Variant::IdealAcquisition => "ideal_acquisition",
        }
    }

    pub fn rx(self, base: &RxConfig) -> RxConfig {
        let mut rx = base.clone();
        match self {
            Variant::NoSic => rx.sic = false,
            Variant::NoCaed => rx.caed = false,
            Variant::AsIs | Variant::IdealAcquisition => {}
        }
        rx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as i64;
        (0..=n.max(0)).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Pass/fail windows checked after a run; absent entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Expectations {
    /// Allowed SNR threshold window per data rate (dB).
    pub dr8_threshold_db: Option<[f64; 2]>,
    pub dr9_threshold_db: Option<[f64; 2]>,
    /// Allowed DR9 − DR8 threshold gap (dB).
    pub threshold_gap_db: Option<[f64; 2]>,
    /// Minimum capacity (kbps) of the as-is receiver.
    pub min_capacity_kbps: Option<f64>,
    /// Minimum PRR at every loopback or sweep point.
    pub min_prr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dr_mix: DrMix,
    pub channel: ChannelKind,
    /// Defaults to 1 for AWGN and 2 otherwise.
    pub antennas: Option<usize>,
    /// Fixed residual Doppler for the LOS channel; drawn per packet when absent.
    pub doppler_hz: Option<f64>,
    /// Per-packet SNR is uniform over this range (capacity) or fixed (loopback).
    pub dr8_snr_db: [f64; 2],
    pub dr9_snr_db: [f64; 2],
    pub snr_grid_db: SnrGrid,
    /// Offered load points, payload kbps.
    pub load_kbps: Vec<f64>,
    pub duration_s: f64,
    pub trials: usize,
    pub seed: u64,
    pub payload_bytes: [usize; 2],
    /// Carrier offset drawn uniformly in ±cfo_max_hz per packet.
    pub cfo_max_hz: f64,
    /// Noise-free trace (loopback only).
    pub noiseless: bool,
    /// Packet SNR of loopback runs with noise.
    pub loopback_snr_db: f64,
    pub variants: Vec<Variant>,
    pub ideal_acquisition: bool,
    /// Input trace for `decode`.
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub rx: RxConfig,
    pub expect: Expectations,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Loopback,
            dr_mix: DrMix::Both,
            channel: ChannelKind::Awgn,
            antennas: None,
            doppler_hz: None,
            dr8_snr_db: [-15.0, 5.0],
            dr9_snr_db: [-12.0, 2.0],
            snr_grid_db: SnrGrid {
                start: -24.0,
                stop: -10.0,
                step: 1.0,
            },
            load_kbps: vec![0.5, 1.0, 2.0, 3.0, 4.0],
            duration_s: 10.0,
            trials: 1,
            seed: 1,
            payload_bytes: [8, 16],
            cfo_max_hz: 20.0,
            noiseless: false,
            loopback_snr_db: 5.0,
            variants: vec![Variant::AsIs],
            ideal_acquisition: false,
            trace: None,
            out: None,
            rx: RxConfig::default(),
            expect: Expectations::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            bail!("trials must be at least 1");
        }
        if self.duration_s < 2.0 {
            bail!("duration_s must be at least 2 s");
        }
        let [lo, hi] = self.payload_bytes;
        if lo < lrfhss_core::params::MIN_PAYLOAD_BYTES || hi > lrfhss_core::params::MAX_PAYLOAD_BYTES || lo > hi {
            bail!("payload_bytes must lie within 8..=16");
        }
        if self.snr_grid_db.step <= 0.0 {
            bail!("snr_grid_db.step must be positive");
        }
        if self.load_kbps.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            bail!("load_kbps must be non-negative");
        }
        if self.variants.is_empty() {
            bail!("at least one receiver variant is required");
        }
        Ok(())
    }

    pub fn channel_model(&self) -> ChannelModel {
        let mut m = ChannelModel::for_kind(self.channel);
        if let Some(a) = self.antennas {
            m.n_antennas = a;
        }
        if self.doppler_hz.is_some() {
            m.doppler_hz = self.doppler_hz;
        }
        m
    }

    pub fn snr_range(&self, dr: DataRate) -> [f64; 2] {
        match dr {
            DataRate::Dr8 => self.dr8_snr_db,
            DataRate::Dr9 => self.dr9_snr_db,
        }
    }

    pub fn mean_payload_bits(&self) -> f64 {
        4.0 * (self.payload_bytes[0] + self.payload_bytes[1]) as f64
    }
}

/// Independent, order-free seed for one (point, trial) pair.
pub fn trial_seed(master: u64, point: u64, trial: u64) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(master);
    r.set_stream(point);
    r.set_word_pos(u128::from(trial) * 2);
    r.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_uses_defaults() {
        let cfg: ExperimentConfig = toml::from_str("experiment = \"capacity\"\ntrials = 3\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::Capacity);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.duration_s, 10.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_short_traces_and_zero_trials() {
        let cfg = ExperimentConfig {
            trials: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            duration_s: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_points_inclusive() {
        let g = SnrGrid {
            start: -3.0,
            stop: 0.0,
            step: 1.0,
        };
        assert_eq!(g.points(), vec![-3.0, -2.0, -1.0, 0.0]);
    }

    #[test]
    fn trial_seeds_distinct_and_stable() {
        let a = trial_seed(7, 0, 0);
        assert_eq!(a, trial_seed(7, 0, 0));
        assert_ne!(a, trial_seed(7, 0, 1));
        assert_ne!(a, trial_seed(7, 1, 0));
        assert_ne!(a, trial_seed(8, 0, 0));
    }

    #[test]
    fn nested_rx_section() {
        let cfg: ExperimentConfig = toml::from_str("[rx]\ncaed = false\nmax_rounds = 3\n").unwrap();
        assert!(!cfg.rx.caed);
        assert_eq!(cfg.rx.max_rounds, 3);
        assert!(cfg.rx.sic);
    }
}
