pub mod decode;
pub mod demod;
pub mod frontend;

use serde::{Deserialize, Serialize};

/// Receiver tuning; defaults are the values used throughout the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxConfig {
    pub segment_samples: usize,
    /// Gaussian smoothing of segment spectra, in FFT bins.
    pub smoothing_sigma_bins: f64,
    /// Peak threshold above the per-segment median of the smoothed spectrum.
    pub peak_threshold_db: f64,
    /// Peaks further than this below the segment maximum are ignored.
    pub dynamic_range_db: f64,
    /// Consecutive-segment peaks within this many bins extend a chain.
    pub chain_tolerance_bins: usize,
    pub min_chain_segments: usize,
    pub fine_time_span_symbols: f64,
    pub fine_time_steps_per_symbol: usize,
    pub fine_freq_span_hz: f64,
    pub fine_freq_step_hz: f64,
    pub sync_score_floor: f64,
    pub caed: bool,
    pub caed_energy_ratio: f64,
    pub caed_freq_hz: f64,
    pub sic: bool,
    pub max_rounds: usize,
}

impl Default for RxConfig {
    fn default() -> Self {
        RxConfig {
            segment_samples: 25_000,
            smoothing_sigma_bins: 5.0,
            peak_threshold_db: 3.0,
            dynamic_range_db: 60.0,
            chain_tolerance_bins: 12,
            min_chain_segments: 5,
            fine_time_span_symbols: 5.0,
            fine_time_steps_per_symbol: 10,
            fine_freq_span_hz: 100.0,
            fine_freq_step_hz: 5.0,
            sync_score_floor: 0.25,
            caed: true,
            caed_energy_ratio: 1.5,
            caed_freq_hz: 244.0,
            sic: true,
            max_rounds: 8,
        }
    }
}
