use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the nine inversion targets.
///
/// Declaration order is the network output order: six oral tract variables
/// followed by aperiodic energy, periodic energy and F0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    La,
    Lp,
    Ttcl,
    Ttcd,
    Tbcl,
    Tbcd,
    Aper,
    Per,
    F0,
}

impl Channel {
    pub const ALL: [Channel; 9] = [
        Channel::La,
        Channel::Lp,
        Channel::Ttcl,
        Channel::Ttcd,
        Channel::Tbcl,
        Channel::Tbcd,
        Channel::Aper,
        Channel::Per,
        Channel::F0,
    ];

    pub const ORAL: [Channel; 6] = [
        Channel::La,
        Channel::Lp,
        Channel::Ttcl,
        Channel::Ttcd,
        Channel::Tbcl,
        Channel::Tbcd,
    ];

    /// Column order of the evaluation report (periodic before aperiodic).
    pub const REPORT_ORDER: [Channel; 9] = [
        Channel::La,
        Channel::Lp,
        Channel::Ttcl,
        Channel::Ttcd,
        Channel::Tbcl,
        Channel::Tbcd,
        Channel::Per,
        Channel::Aper,
        Channel::F0,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::La => "LA",
            Channel::Lp => "LP",
            Channel::Ttcl => "TTCL",
            Channel::Ttcd => "TTCD",
            Channel::Tbcl => "TBCL",
            Channel::Tbcd => "TBCD",
            Channel::Aper => "APER",
            Channel::Per => "PER",
            Channel::F0 => "F0",
        }
    }

    pub fn is_oral(self) -> bool {
        self.index() < 6
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tract variable channel `{0}`")]
pub struct UnknownChannel(pub String);

impl FromStr for Channel {
    type Err = UnknownChannel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownChannel(s.to_string()))
    }
}

/// Nine-channel time series sampled at 100 Hz, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TractVariableMatrix {
    len: usize,
    data: Vec<f64>,
}

pub const TV_RATE_HZ: f64 = 100.0;

impl TractVariableMatrix {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            data: vec![0.0; Channel::ALL.len() * len],
        }
    }

    /// Builds from channel-major data of length `9 * len`.
    pub fn from_channel_major(len: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            Channel::ALL.len() * len,
            "channel-major buffer has wrong size"
        );
        Self { len, data }
    }

    /// Builds from per-frame rows of nine values.
    pub fn from_frames(frames: &[[f64; 9]]) -> Self {
        let len = frames.len();
        let mut m = Self::zeros(len);
        for (t, row) in frames.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m.data[c * len + t] = *v;
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        let i = c.index();
        &self.data[i * self.len..(i + 1) * self.len]
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut [f64] {
        let i = c.index();
        &mut self.data[i * self.len..(i + 1) * self.len]
    }

    pub fn get(&self, c: Channel, t: usize) -> f64 {
        self.data[c.index() * self.len + t]
    }

    pub fn set(&mut self, c: Channel, t: usize, v: f64) {
        self.data[c.index() * self.len + t] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Time stamp of sample `t` in seconds.
    pub fn time_of(t: usize) -> f64 {
        t as f64 / TV_RATE_HZ
    }
}
