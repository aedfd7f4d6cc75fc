use serde::{Deserialize, Serialize};

use super::{KinematicsError, Result};
use crate::tv::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub channel: Channel,
    pub min: f64,
    pub max: f64,
}

/// Per-speaker minimum and maximum of each channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeakerRange {
    ranges: Vec<ChannelRange>,
}

impl SpeakerRange {
    /// Fits min/max per channel. Every channel needs at least one finite
    /// value; non-finite values are rejected as empty input.
    pub fn fit<'a, I>(series: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Channel, &'a [f64])>,
    {
        let mut ranges: Vec<ChannelRange> = Vec::new();
        for (channel, values) in series {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(KinematicsError::EmptyChannel(channel));
            }
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            match ranges.iter_mut().find(|r| r.channel == channel) {
                Some(r) => {
                    r.min = r.min.min(min);
                    r.max = r.max.max(max);
                }
                None => ranges.push(ChannelRange { channel, min, max }),
            }
        }
        Ok(Self { ranges })
    }

    pub fn from_ranges(ranges: Vec<ChannelRange>) -> Result<Self> {
        for r in &ranges {
            if !(r.max >= r.min) {
                return Err(KinematicsError::InvalidRange {
                    channel: r.channel,
                    min: r.min,
                    max: r.max,
                });
            }
        }
        Ok(Self { ranges })
    }

    /// Union of two ranges; channels present in either side are kept.
    pub fn merge(&self, other: &SpeakerRange) -> SpeakerRange {
        let mut out = self.clone();
        for r in &other.ranges {
            match out.ranges.iter_mut().find(|x| x.channel == r.channel) {
                Some(x) => {
                    x.min = x.min.min(r.min);
                    x.max = x.max.max(r.max);
                }
                None => out.ranges.push(*r),
            }
        }
        out
    }

    pub fn get(&self, channel: Channel) -> Result<ChannelRange> {
        self.ranges
            .iter()
            .find(|r| r.channel == channel)
            .copied()
            .ok_or(KinematicsError::MissingChannel(channel))
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.ranges.iter().map(|r| r.channel)
    }

    pub fn ranges(&self) -> &[ChannelRange] {
        &self.ranges
    }
}

/// Min-max maps `value` onto [-1, 1]. A degenerate range gives 0; values
/// outside the range are not clamped.
pub fn normalize(value: f64, range: ChannelRange) -> f64 {
    let span = range.max - range.min;
    if span == 0.0 {
        return 0.0;
    }
    2.0 * (value - range.min) / span - 1.0
}

/// Algebraic inverse of [`normalize`]. A degenerate range maps everything
/// back to its single value.
pub fn denormalize(value: f64, range: ChannelRange) -> f64 {
    let span = range.max - range.min;
    if span == 0.0 {
        return range.min;
    }
    (value + 1.0) * span / 2.0 + range.min
}
