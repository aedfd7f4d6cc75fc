use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InversionError, Result, LAYER_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub dim: usize,
    pub conv_channels: usize,
    pub gru1: usize,
    pub gru2: usize,
    pub dense: usize,
    pub outputs: usize,
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl ModelConfig {
    /// Full-size network for `dim`-dimensional embeddings.
    pub fn full(dim: usize) -> Self {
        Self {
            layers: LAYER_COUNT,
            dim,
            conv_channels: 16,
            gru1: 256,
            gru2: 128,
            dense: 128,
            outputs: 9,
            dropout: 0.3,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }

    /// Small variant used for finite-difference checks.
    pub fn tiny(dim: usize) -> Self {
        Self {
            conv_channels: 3,
            gru1: 8,
            gru2: 4,
            dense: 6,
            ..Self::full(dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.layers,
            self.dim,
            self.conv_channels,
            self.gru1,
            self.gru2,
            self.dense,
            self.outputs,
        ];
        if sizes.contains(&0) {
            return Err(InversionError::Config(
                "layer sizes must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(InversionError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(InversionError::Config("bad batch-norm settings".into()));
        }
        Ok(())
    }
}

/// PyTorch-layout GRU weights; gate blocks are ordered reset, update, new.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

impl GruWeights {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: vec![0.0; 3 * hidden * input],
            w_hh: vec![0.0; 3 * hidden * hidden],
            b_ih: vec![0.0; 3 * hidden],
            b_hh: vec![0.0; 3 * hidden],
        }
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub conv_a_w: Vec<f64>,
    pub conv_a_b: Vec<f64>,
    pub bn_a_gamma: Vec<f64>,
    pub bn_a_beta: Vec<f64>,
    pub conv_b_w: Vec<f64>,
    pub conv_b_b: Vec<f64>,
    pub bn_b_gamma: Vec<f64>,
    pub bn_b_beta: Vec<f64>,
    pub gru1: GruWeights,
    pub gru2: GruWeights,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let c = cfg.conv_channels;
        Self {
            conv_a_w: vec![0.0; c * cfg.layers * 9],
            conv_a_b: vec![0.0; c],
            bn_a_gamma: vec![0.0; c],
            bn_a_beta: vec![0.0; c],
            conv_b_w: vec![0.0; c * 9],
            conv_b_b: vec![0.0; 1],
            bn_b_gamma: vec![0.0; 1],
            bn_b_beta: vec![0.0; 1],
            gru1: GruWeights::zeros(cfg.dim, cfg.gru1),
            gru2: GruWeights::zeros(cfg.gru1, cfg.gru2),
            dense_w: vec![0.0; cfg.dense * cfg.gru2],
            dense_b: vec![0.0; cfg.dense],
            out_w: vec![0.0; cfg.outputs * cfg.dense],
            out_b: vec![0.0; cfg.outputs],
        }
    }

    /// Uniform fan-in initialization as in common deep-learning defaults;
    /// batch-norm scales start at 1.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |v: &mut Vec<f64>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in v.iter_mut() {
                *x = rng.random_range(-bound..bound);
            }
        };
        fill(&mut p.conv_a_w, cfg.layers * 9);
        fill(&mut p.conv_a_b, cfg.layers * 9);
        fill(&mut p.conv_b_w, cfg.conv_channels * 9);
        fill(&mut p.conv_b_b, cfg.conv_channels * 9);
        for (g, h) in [(&mut p.gru1, cfg.gru1), (&mut p.gru2, cfg.gru2)] {
            fill(&mut g.w_ih, h);
            fill(&mut g.w_hh, h);
            fill(&mut g.b_ih, h);
            fill(&mut g.b_hh, h);
        }
        fill(&mut p.dense_w, cfg.gru2);
        fill(&mut p.dense_b, cfg.gru2);
        fill(&mut p.out_w, cfg.dense);
        fill(&mut p.out_b, cfg.dense);
        p.bn_a_gamma.fill(1.0);
        p.bn_b_gamma.fill(1.0);
        p
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Vec<f64>)> {
        vec![
            ("conv_a.weight", &self.conv_a_w),
            ("conv_a.bias", &self.conv_a_b),
            ("bn_a.weight", &self.bn_a_gamma),
            ("bn_a.bias", &self.bn_a_beta),
            ("conv_b.weight", &self.conv_b_w),
            ("conv_b.bias", &self.conv_b_b),
            ("bn_b.weight", &self.bn_b_gamma),
            ("bn_b.bias", &self.bn_b_beta),
            ("gru_1.weight_ih", &self.gru1.w_ih),
            ("gru_1.weight_hh", &self.gru1.w_hh),
            ("gru_1.bias_ih", &self.gru1.b_ih),
            ("gru_1.bias_hh", &self.gru1.b_hh),
            ("gru_2.weight_ih", &self.gru2.w_ih),
            ("gru_2.weight_hh", &self.gru2.w_hh),
            ("gru_2.bias_ih", &self.gru2.b_ih),
            ("gru_2.bias_hh", &self.gru2.b_hh),
            ("dense_1.weight", &self.dense_w),
            ("dense_1.bias", &self.dense_b),
            ("dense_out.weight", &self.out_w),
            ("dense_out.bias", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        let Params {
            conv_a_w,
            conv_a_b,
            bn_a_gamma,
            bn_a_beta,
            conv_b_w,
            conv_b_b,
            bn_b_gamma,
            bn_b_beta,
            gru1,
            gru2,
            dense_w,
            dense_b,
            out_w,
            out_b,
        } = self;
        vec![
            ("conv_a.weight", conv_a_w),
            ("conv_a.bias", conv_a_b),
            ("bn_a.weight", bn_a_gamma),
            ("bn_a.bias", bn_a_beta),
            ("conv_b.weight", conv_b_w),
            ("conv_b.bias", conv_b_b),
            ("bn_b.weight", bn_b_gamma),
            ("bn_b.bias", bn_b_beta),
            ("gru_1.weight_ih", &mut gru1.w_ih),
            ("gru_1.weight_hh", &mut gru1.w_hh),
            ("gru_1.bias_ih", &mut gru1.b_ih),
            ("gru_1.bias_hh", &mut gru1.b_hh),
            ("gru_2.weight_ih", &mut gru2.w_ih),
            ("gru_2.weight_hh", &mut gru2.w_hh),
            ("gru_2.bias_ih", &mut gru2.b_ih),
            ("gru_2.bias_hh", &mut gru2.b_hh),
            ("dense_1.weight", dense_w),
            ("dense_1.bias", dense_b),
            ("dense_out.weight", out_w),
            ("dense_out.bias", out_b),
        ]
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect()
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count() {
            return Err(InversionError::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.count()
            )));
        }
        let mut off = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}
