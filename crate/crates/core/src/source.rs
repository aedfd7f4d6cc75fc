//! Stand-in estimators for the glottal source channels: F0, periodic energy
//! and aperiodic energy.
//!
//! Each 40 ms window is mean-removed and center-clipped at 30% of its peak
//! magnitude, then scanned with a normalized cross-correlation over lags
//! covering 50-500 Hz. The chosen peak gives both the period (refined by
//! parabolic interpolation) and the periodicity that splits the frame
//! energy into periodic and aperiodic parts.

use serde::{Deserialize, Serialize};

use crate::tv::{Channel, TractVariableMatrix, TV_RATE_HZ};

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 500.0;
pub const VOICING_THRESHOLD: f64 = 0.3;
pub const WINDOW_S: f64 = 0.040;
pub const HOP_S: f64 = 0.020;
const CLIP_RATIO: f64 = 0.3;
/// Smallest-lag peak within this fraction of the best one wins, which
/// keeps period doubling from being chosen.
const OCTAVE_RATIO: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SourceError {
    #[error("empty window")]
    Empty,
    #[error("window of {len} samples is shorter than two 50 Hz periods ({need}) at {fs} Hz")]
    TooShort { len: usize, need: usize, fs: f64 },
    #[error("sample rate {0} Hz is below 8000 Hz")]
    SampleRate(f64),
    #[error("non-finite sample")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, SourceError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceFrame {
    pub time: f64,
    /// Hz; 0 when unvoiced.
    pub f0: f64,
    pub periodic_energy: f64,
    pub aperiodic_energy: f64,
}

/// Periodicity analysis of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periodicity {
    /// Height of the selected correlation peak, clamped to [0, 1].
    pub strength: f64,
    /// Refined period in samples, if any peak was found.
    pub period: Option<f64>,
    /// Frame energy in [0, 1]: `sqrt(2)` times the Hann-weighted RMS, so a
    /// full-scale sinusoid is 1.
    pub energy: f64,
}

impl Periodicity {
    pub fn voiced(&self) -> bool {
        self.period.is_some() && self.strength >= VOICING_THRESHOLD
    }
}

fn check(window: &[f64], fs: f64) -> Result<()> {
    if window.is_empty() {
        return Err(SourceError::Empty);
    }
    if !(fs >= 8000.0) {
        return Err(SourceError::SampleRate(fs));
    }
    let need = (2.0 * fs / F0_MIN_HZ).ceil() as usize;
    if window.len() < need {
        return Err(SourceError::TooShort {
            len: window.len(),
            need,
            fs,
        });
    }
    if window.iter().any(|x| !x.is_finite()) {
        return Err(SourceError::NonFinite);
    }
    Ok(())
}

/// Mean-removed, center-clipped copy of the window and its Hann-weighted
/// RMS. The taper is applied only to the energy: tapering before the
/// correlation biases the period estimate and lowers the peak height.
fn prepare(window: &[f64]) -> (Vec<f64>, f64) {
    let n = window.len();
    let mean = window.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = window.iter().map(|x| x - mean).collect();
    let denom = (n - 1).max(1) as f64;
    let (mut num, mut wsum) = (0.0, 0.0);
    for (i, x) in centered.iter().enumerate() {
        let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / denom).cos();
        num += (w * x) * (w * x);
        wsum += w * w;
    }
    let rms = if wsum > 0.0 { (num / wsum).sqrt() } else { 0.0 };
    let peak = centered.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cl = CLIP_RATIO * peak;
    let clipped = centered
        .into_iter()
        .map(|x| {
            if x > cl {
                x - cl
            } else if x < -cl {
                x + cl
            } else {
                0.0
            }
        })
        .collect();
    (clipped, rms)
}

fn nccf(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    let (a, b) = (&x[..n - lag], &x[lag..]);
    let mut xy = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for (p, q) in a.iter().zip(b) {
        xy += p * q;
        xx += p * p;
        yy += q * q;
    }
    let d = (xx * yy).sqrt();
    if d == 0.0 {
        0.0
    } else {
        xy / d
    }
}

/// Correlation analysis of one window.
pub fn analyze(window: &[f64], fs: f64) -> Result<Periodicity> {
    check(window, fs)?;
    let (x, rms) = prepare(window);
    let energy = (std::f64::consts::SQRT_2 * rms).min(1.0);
    let lo = (fs / F0_MAX_HZ).floor() as usize;
    let hi = ((fs / F0_MIN_HZ).ceil() as usize).min(x.len() - 2);
    // r[k] holds the correlation at lag lo - 1 + k.
    let r: Vec<f64> = (lo - 1..=hi + 1).map(|lag| nccf(&x, lag)).collect();
    let peaks: Vec<usize> = (1..r.len() - 1)
        .filter(|&k| r[k] > 0.0 && r[k] >= r[k - 1] && r[k] >= r[k + 1])
        .collect();
    let best = peaks
        .iter()
        .map(|&k| r[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let Some(&k) = peaks.iter().find(|&&k| r[k] >= OCTAVE_RATIO * best) else {
        let strength = r.iter().copied().fold(0.0f64, f64::max).min(1.0);
        return Ok(Periodicity {
            strength,
            period: None,
            energy,
        });
    };
    let (a, b, c) = (r[k - 1], r[k], r[k + 1]);
    let curv = a - 2.0 * b + c;
    let (shift, height) = if curv < 0.0 {
        let s = 0.5 * (a - c) / curv;
        (s, b - 0.25 * (a - c) * s)
    } else {
        (0.0, b)
    };
    let period = (lo - 1 + k) as f64 + shift;
    Ok(Periodicity {
        strength: height.clamp(0.0, 1.0),
        period: Some(period),
        energy,
    })
}

/// F0 in Hz, or 0 when the window is unvoiced.
pub fn estimate_f0(window: &[f64], fs: f64) -> Result<f64> {
    let p = analyze(window, fs)?;
    Ok(match p.period {
        Some(t) if p.voiced() => (fs / t).clamp(F0_MIN_HZ, F0_MAX_HZ),
        _ => 0.0,
    })
}

/// `(periodic, aperiodic)` energies; they sum to the frame energy.
pub fn estimate_energies(window: &[f64], fs: f64) -> Result<(f64, f64)> {
    let p = analyze(window, fs)?;
    Ok((p.energy * p.strength, p.energy * (1.0 - p.strength)))
}

/// Frames at a 20 ms hop; frame `k` covers the 40 ms window centered at
/// `k * 20 ms`, zero-padded past the signal edges.
pub fn track(signal: &[f64], fs: f64) -> Result<Vec<SourceFrame>> {
    if signal.is_empty() {
        return Err(SourceError::Empty);
    }
    let win = (WINDOW_S * fs).round() as usize;
    let hop = HOP_S * fs;
    let frames = (signal.len() as f64 / hop).ceil() as usize;
    let mut buf = vec![0.0; win];
    (0..frames)
        .map(|k| {
            let start = (k as f64 * hop).round() as i64 - (win / 2) as i64;
            for (j, b) in buf.iter_mut().enumerate() {
                let i = start + j as i64;
                *b = if i >= 0 && (i as usize) < signal.len() {
                    signal[i as usize]
                } else {
                    0.0
                };
            }
            let p = analyze(&buf, fs)?;
            let f0 = match p.period {
                Some(t) if p.voiced() => (fs / t).clamp(F0_MIN_HZ, F0_MAX_HZ),
                _ => 0.0,
            };
            Ok(SourceFrame {
                time: k as f64 * HOP_S,
                f0,
                periodic_energy: p.energy * p.strength,
                aperiodic_energy: p.energy * (1.0 - p.strength),
            })
        })
        .collect()
}

/// Holds each 50 Hz frame for two 100 Hz samples and writes the result
/// into the PER, APER and F0 channels of `m` (up to its length).
pub fn fill_source_channels(m: &mut TractVariableMatrix, frames: &[SourceFrame]) {
    let per_frame = (TV_RATE_HZ * HOP_S).round() as usize;
    for t in 0..m.len() {
        let Some(f) = frames.get(t / per_frame).or(frames.last()) else {
            return;
        };
        m.set(Channel::Per, t, f.periodic_energy);
        m.set(Channel::Aper, t, f.aperiodic_energy);
        m.set(Channel::F0, t, f.f0);
    }
}
