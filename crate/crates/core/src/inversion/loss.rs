use super::{InversionError, Result};

/// Sample Pearson correlation. A constant series on either side gives 0.
pub fn pearson_r(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(InversionError::Shape(format!(
            "series lengths {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 2 {
        return Err(InversionError::Shape(
            "correlation needs at least two samples".into(),
        ));
    }
    Ok(pearson_parts(pred, truth).0)
}

/// `(r, centered pred, centered truth, Saa, Sbb)`.
fn pearson_parts(p: &[f64], y: &[f64]) -> (f64, Vec<f64>, Vec<f64>, f64, f64) {
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let a: Vec<f64> = p.iter().map(|v| v - mp).collect();
    let b: Vec<f64> = y.iter().map(|v| v - my).collect();
    let saa: f64 = a.iter().map(|v| v * v).sum();
    let sbb: f64 = b.iter().map(|v| v * v).sum();
    let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let r = if saa > 0.0 && sbb > 0.0 {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    (r, a, b, saa, sbb)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(InversionError::Shape(format!(
            "series lengths {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len() as f64;
    Ok((pred
        .iter()
        .zip(truth)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub loss: f64,
    pub mean_r: f64,
    pub mean_rmse: f64,
}

/// `alpha * (1 - mean r) + (1 - alpha) * mean RMSE`, with r and RMSE
/// computed per channel and averaged over channels. Inputs are channel-major
/// `channels x len`.
pub fn loss(pred: &[f64], truth: &[f64], channels: usize, alpha: f64) -> Result<LossParts> {
    loss_impl(pred, truth, channels, alpha, None)
}

/// Same as [`loss`], also writing `dL/dpred` into `grad`.
pub fn loss_and_grad(
    pred: &[f64],
    truth: &[f64],
    channels: usize,
    alpha: f64,
    grad: &mut [f64],
) -> Result<LossParts> {
    loss_impl(pred, truth, channels, alpha, Some(grad))
}

fn loss_impl(
    pred: &[f64],
    truth: &[f64],
    channels: usize,
    alpha: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<LossParts> {
    if pred.len() != truth.len()
        || channels == 0
        || !pred.len().is_multiple_of(channels)
        || pred.is_empty()
    {
        return Err(InversionError::Shape(format!(
            "prediction {} vs truth {} over {channels} channels",
            pred.len(),
            truth.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(InversionError::Config(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let len = pred.len() / channels;
    let (mut sum_r, mut sum_rmse) = (0.0, 0.0);
    for c in 0..channels {
        let p = &pred[c * len..(c + 1) * len];
        let y = &truth[c * len..(c + 1) * len];
        let (r, a, b, saa, sbb) = pearson_parts(p, y);
        let e = rmse(p, y)?;
        sum_r += r;
        sum_rmse += e;
        if let Some(g) = grad.as_deref_mut() {
            let g = &mut g[c * len..(c + 1) * len];
            let kr = -alpha / channels as f64;
            let ke = (1.0 - alpha) / channels as f64;
            let defined = saa > 0.0 && sbb > 0.0;
            let root = (saa * sbb).sqrt();
            for t in 0..len {
                let mut v = 0.0;
                if defined {
                    v += kr * (b[t] / root - r * a[t] / saa);
                }
                if e > 0.0 {
                    v += ke * (p[t] - y[t]) / (len as f64 * e);
                }
                g[t] = v;
            }
        }
    }
    let mean_r = sum_r / channels as f64;
    let mean_rmse = sum_rmse / channels as f64;
    Ok(LossParts {
        loss: alpha * (1.0 - mean_r) + (1.0 - alpha) * mean_rmse,
        mean_r,
        mean_rmse,
    })
}
