use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layers::{self, BnCache, GruCache};
use super::loss::loss_and_grad;
use super::params::{ModelConfig, Params};
use super::{EmbeddingTensor, InversionError, Result, Sample};
use crate::tv::TractVariableMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; dropout when an RNG is supplied.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionModel {
    pub config: ModelConfig,
    pub params: Params,
    pub bn_a_mean: Vec<f64>,
    pub bn_a_var: Vec<f64>,
    pub bn_b_mean: Vec<f64>,
    pub bn_b_var: Vec<f64>,
    pub seed: u64,
}

struct UttCache {
    t: usize,
    input: Vec<f64>,
    a_act: Vec<f64>,
    b_in: Vec<f64>,
    b_act: Vec<f64>,
    seq: Vec<f64>,
    gru1: GruCache,
    drop1: Option<Vec<f64>>,
    h1: Vec<f64>,
    gru2: GruCache,
    drop2: Option<Vec<f64>>,
    up: Vec<f64>,
    dense: Vec<f64>,
}

/// Forward results for a batch, kept for the backward pass.
pub struct BatchOutput {
    /// Per utterance, time-major `2T x outputs`.
    pub outputs: Vec<Vec<f64>>,
    caches: Vec<UttCache>,
    bn_a: Option<BnCache>,
    bn_b: Option<BnCache>,
    /// Batch means and unbiased variances for the running-stat update.
    pub bn_stats: Option<[Vec<f64>; 4]>,
}

fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

fn time_to_channel_major(x: &[f64], t: usize, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for s in 0..t {
        for k in 0..c {
            y[k * t + s] = x[s * c + k];
        }
    }
    y
}

fn channel_to_time_major(x: &[f64], t: usize, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for s in 0..t {
        for k in 0..c {
            y[s * c + k] = x[k * t + s];
        }
    }
    y
}

impl InversionModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, seed);
        let c = config.conv_channels;
        Ok(Self {
            params,
            bn_a_mean: vec![0.0; c],
            bn_a_var: vec![1.0; c],
            bn_b_mean: vec![0.0; 1],
            bn_b_var: vec![1.0; 1],
            seed,
            config,
        })
    }

    fn check(&self, emb: &EmbeddingTensor) -> Result<()> {
        if emb.layers() != self.config.layers || emb.dim() != self.config.dim {
            return Err(InversionError::Shape(format!(
                "embedding is {}x{}x{}, model expects {} layers of dim {}",
                emb.layers(),
                emb.frames(),
                emb.dim(),
                self.config.layers,
                self.config.dim
            )));
        }
        Ok(())
    }

    /// Forward pass over a batch. In `Train` mode batch-norm statistics
    /// pool every position of every utterance in the batch.
    pub fn forward_batch(
        &self,
        embs: &[&EmbeddingTensor],
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<BatchOutput> {
        for e in embs {
            self.check(e)?;
        }
        let cfg = &self.config;
        let p = &self.params;
        let (c, d) = (cfg.conv_channels, cfg.dim);

        let mut a_act = Vec::with_capacity(embs.len());
        for e in embs {
            let mut y = layers::conv3x3_forward(
                e.as_slice(),
                cfg.layers,
                e.frames(),
                d,
                &p.conv_a_w,
                &p.conv_a_b,
                c,
            );
            layers::relu_inplace(&mut y);
            a_act.push(y);
        }
        let (b_in, bn_a, stats_a) = match mode {
            Mode::Train => {
                let (ys, cache, m, v) =
                    layers::bn_forward_train(&a_act, c, &p.bn_a_gamma, &p.bn_a_beta, cfg.bn_eps);
                (ys, Some(cache), Some((m, v)))
            }
            Mode::Eval => (
                a_act
                    .iter()
                    .map(|x| {
                        layers::bn_forward_eval(
                            x,
                            c,
                            &p.bn_a_gamma,
                            &p.bn_a_beta,
                            &self.bn_a_mean,
                            &self.bn_a_var,
                            cfg.bn_eps,
                        )
                    })
                    .collect(),
                None,
                None,
            ),
        };
        let mut b_act = Vec::with_capacity(embs.len());
        for (e, x) in embs.iter().zip(&b_in) {
            let mut y = layers::conv3x3_forward(x, c, e.frames(), d, &p.conv_b_w, &p.conv_b_b, 1);
            layers::relu_inplace(&mut y);
            b_act.push(y);
        }
        let (seqs, bn_b, stats_b) = match mode {
            Mode::Train => {
                let (ys, cache, m, v) =
                    layers::bn_forward_train(&b_act, 1, &p.bn_b_gamma, &p.bn_b_beta, cfg.bn_eps);
                (ys, Some(cache), Some((m, v)))
            }
            Mode::Eval => (
                b_act
                    .iter()
                    .map(|x| {
                        layers::bn_forward_eval(
                            x,
                            1,
                            &p.bn_b_gamma,
                            &p.bn_b_beta,
                            &self.bn_b_mean,
                            &self.bn_b_var,
                            cfg.bn_eps,
                        )
                    })
                    .collect(),
                None,
                None,
            ),
        };

        let dropout = mode == Mode::Train && cfg.dropout > 0.0;
        let mut outputs = Vec::with_capacity(embs.len());
        let mut caches = Vec::with_capacity(embs.len());
        for (((e, input), (a, bi)), (ba, seq)) in embs
            .iter()
            .zip(embs.iter().map(|e| e.as_slice()))
            .zip(a_act.into_iter().zip(b_in))
            .zip(b_act.into_iter().zip(seqs))
        {
            let t = e.frames();
            let (mut h1, gru1) = layers::gru_forward(&p.gru1, &seq, t, d, cfg.gru1);
            let drop1 = match (dropout, rng.as_deref_mut()) {
                (true, Some(r)) => Some(dropout_mask(r, h1.len(), cfg.dropout)),
                _ => None,
            };
            apply_mask(&mut h1, &drop1);
            let (mut h2, gru2) = layers::gru_forward(&p.gru2, &h1, t, cfg.gru1, cfg.gru2);
            let drop2 = match (dropout, rng.as_deref_mut()) {
                (true, Some(r)) => Some(dropout_mask(r, h2.len(), cfg.dropout)),
                _ => None,
            };
            apply_mask(&mut h2, &drop2);
            let up = layers::upsample2(&h2, t, cfg.gru2);
            let mut dense =
                layers::dense_forward(&p.dense_w, &p.dense_b, &up, 2 * t, cfg.gru2, cfg.dense);
            layers::relu_inplace(&mut dense);
            let out =
                layers::dense_forward(&p.out_w, &p.out_b, &dense, 2 * t, cfg.dense, cfg.outputs);
            outputs.push(out);
            caches.push(UttCache {
                t,
                input: input.to_vec(),
                a_act: a,
                b_in: bi,
                b_act: ba,
                seq,
                gru1,
                drop1,
                h1,
                gru2,
                drop2,
                up,
                dense,
            });
        }
        let bn_stats = match (stats_a, stats_b) {
            (Some((ma, va)), Some((mb, vb))) => Some([ma, va, mb, vb]),
            _ => None,
        };
        Ok(BatchOutput {
            outputs,
            caches,
            bn_a,
            bn_b,
            bn_stats,
        })
    }

    /// Gradients of a batch loss given `dL/doutput` per utterance
    /// (time-major, like [`BatchOutput::outputs`]). Requires a `Train`-mode
    /// forward pass.
    pub fn backward_batch(&self, fwd: &BatchOutput, douts: &[Vec<f64>]) -> Params {
        let cfg = &self.config;
        let p = &self.params;
        let (c, d) = (cfg.conv_channels, cfg.dim);
        let mut g = Params::zeros(cfg);
        let bn_a = fwd
            .bn_a
            .as_ref()
            .expect("backward needs a Train-mode forward pass");
        let bn_b = fwd
            .bn_b
            .as_ref()
            .expect("backward needs a Train-mode forward pass");

        let mut dseqs = Vec::with_capacity(douts.len());
        for (cache, dout) in fwd.caches.iter().zip(douts) {
            let t = cache.t;
            let mut dd = layers::dense_backward(
                &p.out_w,
                &mut g.out_w,
                &mut g.out_b,
                &cache.dense,
                dout,
                2 * t,
                cfg.dense,
                cfg.outputs,
            );
            layers::relu_backward(&cache.dense, &mut dd);
            let dup = layers::dense_backward(
                &p.dense_w,
                &mut g.dense_w,
                &mut g.dense_b,
                &cache.up,
                &dd,
                2 * t,
                cfg.gru2,
                cfg.dense,
            );
            let mut dh2 = layers::upsample2_backward(&dup, t, cfg.gru2);
            apply_mask(&mut dh2, &cache.drop2);
            let mut dh1 = layers::gru_backward(
                &p.gru2,
                &mut g.gru2,
                &cache.h1,
                &cache.gru2,
                &dh2,
                t,
                cfg.gru1,
                cfg.gru2,
            );
            apply_mask(&mut dh1, &cache.drop1);
            let dseq = layers::gru_backward(
                &p.gru1,
                &mut g.gru1,
                &cache.seq,
                &cache.gru1,
                &dh1,
                t,
                d,
                cfg.gru1,
            );
            dseqs.push(dseq);
        }
        let mut db_act = layers::bn_backward(
            &dseqs,
            bn_b,
            1,
            &p.bn_b_gamma,
            &mut g.bn_b_gamma,
            &mut g.bn_b_beta,
        );
        let mut da_act = Vec::with_capacity(douts.len());
        for (cache, dba) in fwd.caches.iter().zip(db_act.iter_mut()) {
            layers::relu_backward(&cache.b_act, dba);
            let dbi = layers::conv3x3_backward(
                &cache.b_in,
                c,
                cache.t,
                d,
                &p.conv_b_w,
                1,
                dba,
                &mut g.conv_b_w,
                &mut g.conv_b_b,
                true,
            )
            .expect("input gradient requested");
            da_act.push(dbi);
        }
        let mut dconv_a = layers::bn_backward(
            &da_act,
            bn_a,
            c,
            &p.bn_a_gamma,
            &mut g.bn_a_gamma,
            &mut g.bn_a_beta,
        );
        for (cache, da) in fwd.caches.iter().zip(dconv_a.iter_mut()) {
            layers::relu_backward(&cache.a_act, da);
            layers::conv3x3_backward(
                &cache.input,
                cfg.layers,
                cache.t,
                d,
                &p.conv_a_w,
                c,
                da,
                &mut g.conv_a_w,
                &mut g.conv_a_b,
                false,
            );
        }
        g
    }

    /// Batch loss (mean over utterances) and its parameter gradient.
    pub fn loss_and_gradient(
        &self,
        batch: &[&Sample],
        alpha: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Params, BatchOutput)> {
        let embs: Vec<&EmbeddingTensor> = batch.iter().map(|s| &s.embedding).collect();
        let fwd = self.forward_batch(&embs, Mode::Train, rng)?;
        let outs = self.config.outputs;
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut douts = Vec::with_capacity(batch.len());
        for (s, out) in batch.iter().zip(&fwd.outputs) {
            let len = out.len() / outs;
            let pred = time_to_channel_major(out, len, outs);
            let mut g = vec![0.0; pred.len()];
            let parts = loss_and_grad(&pred, s.target.as_slice(), outs, alpha, &mut g)?;
            total += parts.loss * scale;
            for v in &mut g {
                *v *= scale;
            }
            douts.push(channel_to_time_major(&g, len, outs));
        }
        let grads = self.backward_batch(&fwd, &douts);
        Ok((total, grads, fwd))
    }

    /// Moves the batch-norm running statistics toward a batch's statistics.
    pub fn update_running_stats(&mut self, stats: &[Vec<f64>; 4]) {
        let m = self.config.bn_momentum;
        let blend = |run: &mut Vec<f64>, batch: &Vec<f64>| {
            for (r, b) in run.iter_mut().zip(batch) {
                *r = (1.0 - m) * *r + m * b;
            }
        };
        blend(&mut self.bn_a_mean, &stats[0]);
        blend(&mut self.bn_a_var, &stats[1]);
        blend(&mut self.bn_b_mean, &stats[2]);
        blend(&mut self.bn_b_var, &stats[3]);
    }

    /// Inference (or a single-utterance training-mode pass without dropout).
    pub fn forward(&self, emb: &EmbeddingTensor, mode: Mode) -> Result<TractVariableMatrix> {
        let out = self.forward_batch(&[emb], mode, None)?;
        Ok(self.to_matrix(&out.outputs[0]))
    }

    pub(crate) fn to_matrix(&self, out: &[f64]) -> TractVariableMatrix {
        let len = out.len() / self.config.outputs;
        TractVariableMatrix::from_channel_major(
            len,
            time_to_channel_major(out, len, self.config.outputs),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::LAYER_COUNT;

    fn emb(t: usize, d: usize, seed: u64) -> EmbeddingTensor {
        let data = (0..LAYER_COUNT * t * d)
            .map(|i| (((i as u64 + seed) * 2654435761) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        EmbeddingTensor::new(LAYER_COUNT, t, d, data).unwrap()
    }

    #[test]
    fn output_length_doubles() {
        let m = InversionModel::new(ModelConfig::tiny(4), 1).unwrap();
        for t in [1, 2, 7, 50] {
            let out = m.forward(&emb(t, 4, 3), Mode::Eval).unwrap();
            assert_eq!(out.len(), 2 * t);
        }
    }

    #[test]
    fn inference_is_deterministic() {
        let m = InversionModel::new(ModelConfig::tiny(4), 9).unwrap();
        let e = emb(12, 4, 1);
        assert_eq!(
            m.forward(&e, Mode::Eval).unwrap(),
            m.forward(&e, Mode::Eval).unwrap()
        );
    }

    #[test]
    fn zero_head_gives_zero_output() {
        let mut m = InversionModel::new(ModelConfig::tiny(4), 2).unwrap();
        m.params.out_w.fill(0.0);
        m.params.out_b.fill(0.0);
        let out = m.forward(&emb(6, 4, 5), Mode::Eval).unwrap();
        assert!(out.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wrong_layer_count_is_rejected() {
        let m = InversionModel::new(ModelConfig::tiny(4), 2).unwrap();
        let bad = EmbeddingTensor::new(24, 3, 4, vec![0.0; 24 * 12]).unwrap();
        assert!(matches!(
            m.forward(&bad, Mode::Eval),
            Err(InversionError::Shape(_))
        ));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let m = InversionModel::new(ModelConfig::tiny(3), 4).unwrap();
        let e = emb(5, 3, 8);
        let fwd = m.forward_batch(&[&e], Mode::Train, None).unwrap();
        let zero = vec![vec![0.0; fwd.outputs[0].len()]];
        let g = m.backward_batch(&fwd, &zero);
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }
}
