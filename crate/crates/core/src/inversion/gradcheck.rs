//! Finite-difference verification of the hand-written backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::loss;
use super::model::{InversionModel, Mode};
use super::{EmbeddingTensor, Result, Sample};

/// Denominator floor for the relative error. With an O(1) loss and
/// epsilon 1e-5, central differences carry about 1e-11 of rounding error,
/// so gradients much below 1e-6 cannot be resolved to 1e-4 relative.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Tensor name and index of the worst parameter.
    pub worst: (&'static str, usize),
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

fn batch_loss(model: &InversionModel, batch: &[&Sample], alpha: f64) -> Result<f64> {
    let embs: Vec<&EmbeddingTensor> = batch.iter().map(|s| &s.embedding).collect();
    let out = model.forward_batch(&embs, Mode::Train, None)?;
    let mut total = 0.0;
    for (s, o) in batch.iter().zip(&out.outputs) {
        let pred = model.to_matrix(o);
        total += loss(
            pred.as_slice(),
            s.target.as_slice(),
            model.config.outputs,
            alpha,
        )?
        .loss;
    }
    Ok(total / batch.len() as f64)
}

/// Compares analytic gradients against central differences on `count`
/// randomly chosen parameters (every parameter if `count` exceeds the
/// total). Batch norm runs on batch statistics and dropout is off.
/// Relative error is `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn gradient_check(
    model: &InversionModel,
    batch: &[&Sample],
    alpha: f64,
    epsilon: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grads, _) = model.loss_and_gradient(batch, alpha, None)?;
    let analytic = grads.flatten();
    let names: Vec<(&'static str, usize)> =
        grads.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
    let total = analytic.len();

    let mut idx: Vec<usize> = if count >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < count {
            chosen.insert(rng.random_range(0..total));
        }
        chosen.into_iter().collect()
    };
    idx.sort_unstable();

    let base = model.params.flatten();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: ("", 0),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for &i in &idx {
        let mut flat = base.clone();
        flat[i] = base[i] + epsilon;
        probe.params.unflatten(&flat)?;
        let hi = batch_loss(&probe, batch, alpha)?;
        flat[i] = base[i] - epsilon;
        probe.params.unflatten(&flat)?;
        let lo = batch_loss(&probe, batch, alpha)?;
        let num = (hi - lo) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - num).abs() / a.abs().max(num.abs()).max(REL_FLOOR);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.0.is_empty() {
            let mut off = i;
            let mut name = "";
            for (n, len) in &names {
                if off < *len {
                    name = n;
                    break;
                }
                off -= len;
            }
            if rel >= report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (name, off);
                report.worst_analytic = a;
                report.worst_numeric = num;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::{ModelConfig, LAYER_COUNT};
    use crate::tv::TractVariableMatrix;

    fn sample(t: usize, d: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..LAYER_COUNT * t * d)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let emb = EmbeddingTensor::new(LAYER_COUNT, t, d, data).unwrap();
        let target = (0..9 * 2 * t)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Sample::new(emb, TractVariableMatrix::from_channel_major(2 * t, target)).unwrap()
    }

    #[test]
    fn tiny_model_gradients_match() {
        let cfg = ModelConfig {
            dropout: 0.0,
            ..ModelConfig::tiny(4)
        };
        let model = InversionModel::new(cfg, 3).unwrap();
        let a = sample(6, 4, 1);
        let b = sample(4, 4, 2);
        let rep = gradient_check(&model, &[&a, &b], 0.8, 1e-5, 250, 7).unwrap();
        assert_eq!(rep.checked, 250);
        assert!(rep.max_rel_error <= 1e-4, "{rep:?}");
    }

    #[test]
    fn output_bias_gradient_closed_form() {
        // RMSE-only loss: dL/db_c = (1/9) * mean(p - y) / rmse_c.
        let cfg = ModelConfig {
            dropout: 0.0,
            ..ModelConfig::tiny(3)
        };
        let model = InversionModel::new(cfg, 11).unwrap();
        let s = sample(5, 3, 4);
        let (_, g, fwd) = model.loss_and_gradient(&[&s], 0.0, None).unwrap();
        let pred = model.to_matrix(&fwd.outputs[0]);
        for c in crate::tv::Channel::ALL {
            let p = pred.channel(c);
            let y = s.target.channel(c);
            let n = p.len() as f64;
            let mean_err = p.iter().zip(y).map(|(a, b)| a - b).sum::<f64>() / n;
            let rmse = (p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
            let expect = mean_err / rmse / 9.0;
            assert!((g.out_b[c.index()] - expect).abs() < 1e-12);
        }
    }
}
