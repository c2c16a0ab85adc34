//! Trace files: 16-bit signed little-endian I then Q per sample, one planar block per
//! antenna, plus a JSON sidecar carrying the scale and ground truth.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lrfhss_core::channel::GroundTruth;
use lrfhss_core::IqTrace;
use num_complex::Complex32;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_rate_hz: f64,
    pub n_antennas: usize,
    pub n_samples: usize,
    /// Real value of one quantisation step.
    pub scale: f64,
    pub ground_truth: Option<GroundTruth>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Step size mapping the largest component to just below full scale.
fn quant_scale(trace: &IqTrace) -> f64 {
    let peak = trace
        .antennas()
        .iter()
        .flatten()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0f32, f32::max) as f64;
    if peak > 0.0 {
        peak / 32767.0
    } else {
        1.0
    }
}

fn quantise(x: f32, scale: f64) -> i16 {
    (x as f64 / scale).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_trace(path: &Path, trace: &IqTrace, truth: Option<&GroundTruth>) -> Result<Sidecar> {
    let scale = quant_scale(trace);
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for ant in trace.antennas() {
        for z in ant {
            w.write_all(&quantise(z.re, scale).to_le_bytes())?;
            w.write_all(&quantise(z.im, scale).to_le_bytes())?;
        }
    }
    w.flush()?;
    let side = Sidecar {
        sample_rate_hz: trace.sample_rate_hz(),
        n_antennas: trace.n_antennas(),
        n_samples: trace.len(),
        scale,
        ground_truth: truth.cloned(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(side)
}

pub fn read_trace(path: &Path) -> Result<(IqTrace, Sidecar)> {
    let side_path = sidecar_path(path);
    let side: Sidecar = serde_json::from_str(
        &std::fs::read_to_string(&side_path).with_context(|| format!("reading {}", side_path.display()))?,
    )?;
    let expected = 4 * side.n_samples * side.n_antennas;
    let mut raw = Vec::with_capacity(expected);
    BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?).read_to_end(&mut raw)?;
    if raw.len() != expected {
        bail!("{}: {} bytes, sidecar implies {}", path.display(), raw.len(), expected);
    }
    let s = side.scale as f32;
    let ant: Vec<Vec<Complex32>> = raw
        .chunks_exact(4 * side.n_samples.max(1))
        .map(|block| {
            block
                .chunks_exact(4)
                .map(|c| {
                    let i = i16::from_le_bytes([c[0], c[1]]) as f32;
                    let q = i16::from_le_bytes([c[2], c[3]]) as f32;
                    Complex32::new(i * s, q * s)
                })
                .collect()
        })
        .collect();
    let ant = if side.n_samples == 0 {
        vec![Vec::new(); side.n_antennas]
    } else {
        ant
    };
    Ok((IqTrace::new(ant, side.sample_rate_hz)?, side))
}
