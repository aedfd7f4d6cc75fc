use serde::{Deserialize, Serialize};

use super::loss::{pearson_r, rmse};
use super::model::{InversionModel, Mode};
use super::{InversionError, Result, Sample};
use crate::tv::Channel;

/// Published mean and standard deviation of r over the six oral channels,
/// printed next to results for orientation only.
pub const REFERENCE_ORAL_MEAN: f64 = 0.8440;
pub const REFERENCE_ORAL_STD: f64 = 0.076;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    pub channel: Channel,
    pub r: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// In reporting order: LA LP TTCL TTCD TBCL TBCD PER APER F0.
    pub channels: Vec<ChannelScore>,
    pub oral_mean_r: f64,
    /// Sample standard deviation across the six oral channels.
    pub oral_std_r: f64,
    pub utterances: usize,
}

impl EvalReport {
    pub fn get(&self, c: Channel) -> Option<&ChannelScore> {
        self.channels.iter().find(|s| s.channel == c)
    }

    pub fn from_channel_r(channels: Vec<ChannelScore>, utterances: usize) -> Self {
        let oral: Vec<f64> = channels
            .iter()
            .filter(|s| s.channel.is_oral())
            .map(|s| s.r)
            .collect();
        let (m, sd) = mean_std(&oral);
        Self {
            channels,
            oral_mean_r: m,
            oral_std_r: sd,
            utterances,
        }
    }

    pub fn to_table(&self) -> String {
        let mut header = String::new();
        let mut row = String::new();
        for s in &self.channels {
            header.push_str(&format!("{:>8}", s.channel.name()));
            row.push_str(&format!("{:>8.4}", s.r));
        }
        format!(
            "{header}  Mean (STD) Oral TVs\n{row}  {:.4} ({:.3})\nreference oral mean {:.4} ({:.3})\n",
            self.oral_mean_r, self.oral_std_r, REFERENCE_ORAL_MEAN, REFERENCE_ORAL_STD
        )
    }
}

/// Mean and sample (n - 1) standard deviation.
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Per-channel Pearson r and RMSE, each computed per utterance and then
/// averaged over utterances.
pub fn evaluate(model: &InversionModel, set: &[Sample]) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(InversionError::EmptySet("evaluation"));
    }
    let mut r = [0.0; 9];
    let mut e = [0.0; 9];
    for s in set {
        let pred = model.forward(&s.embedding, Mode::Eval)?;
        for c in Channel::ALL {
            r[c.index()] += pearson_r(pred.channel(c), s.target.channel(c))?;
            e[c.index()] += rmse(pred.channel(c), s.target.channel(c))?;
        }
    }
    let n = set.len() as f64;
    let channels = Channel::REPORT_ORDER
        .iter()
        .map(|&c| ChannelScore {
            channel: c,
            r: r[c.index()] / n,
            rmse: e[c.index()] / n,
        })
        .collect();
    Ok(EvalReport::from_channel_r(channels, set.len()))
}
