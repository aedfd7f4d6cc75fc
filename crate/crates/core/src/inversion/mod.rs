//! Speech inversion network: two 3x3 convolutions over the stacked layer
//! embeddings, two GRUs, linear x2 upsampling to 100 Hz and a two-layer
//! dense head producing nine channels. Forward and backward passes are
//! written out by hand in `f64`.

mod adam;
mod evaluate;
pub mod io;
mod layers;
mod loss;
mod model;
mod params;
mod train;

pub mod gradcheck;

pub use adam::Adam;
pub use evaluate::{evaluate, EvalReport, REFERENCE_ORAL_MEAN, REFERENCE_ORAL_STD};
pub use layers::upsample2;
pub use loss::{loss, loss_and_grad, pearson_r, rmse, LossParts};
pub use model::{BatchOutput, InversionModel, Mode};
pub use params::{GruWeights, ModelConfig, Params};
pub use train::{train, EarlyStopping, EpochRecord, PlateauScheduler, TrainConfig, TrainOutcome};

use crate::tv::TractVariableMatrix;

pub const LAYER_COUNT: usize = 25;
pub const EMBEDDING_RATE_HZ: f64 = 50.0;

#[derive(Debug, thiserror::Error)]
pub enum InversionError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch}: non-finite {what}")]
    Diverged { epoch: usize, what: &'static str },
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, InversionError>;

/// Stacked layer embeddings, `layers x frames x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTensor {
    layers: usize,
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTensor {
    pub fn new(layers: usize, frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if layers == 0 || frames == 0 || dim == 0 {
            return Err(InversionError::Shape(format!(
                "empty embedding {layers}x{frames}x{dim}"
            )));
        }
        if data.len() != layers * frames * dim {
            return Err(InversionError::Shape(format!(
                "{} values for a {layers}x{frames}x{dim} embedding",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(InversionError::Shape("non-finite embedding value".into()));
        }
        Ok(Self {
            layers,
            frames,
            dim,
            data,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, l: usize, t: usize, d: usize) -> f64 {
        self.data[(l * self.frames + t) * self.dim + d]
    }
}

/// One utterance: input embedding and its 100 Hz target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub embedding: EmbeddingTensor,
    pub target: TractVariableMatrix,
}

impl Sample {
    pub fn new(embedding: EmbeddingTensor, target: TractVariableMatrix) -> Result<Self> {
        if target.len() != 2 * embedding.frames() {
            return Err(InversionError::Shape(format!(
                "target has {} samples, expected {} for {} embedding frames",
                target.len(),
                2 * embedding.frames(),
                embedding.frames()
            )));
        }
        Ok(Self { embedding, target })
    }
}
