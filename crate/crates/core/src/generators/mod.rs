//! Latent-to-volume generators.
//!
//! Every backend is a deterministic pure function from a [`LatentVector`] to
//! a binary [`VoxelVolume`]; the conditioner only relies on that contract
//! through [`VolumeGenerator`].

mod grf;
mod neural;
mod postprocess;
mod weights;

pub use grf::{grf_generate, GrfGenerator, GrfGeneratorConfig};
pub use neural::{
    neural_generate, transposed_conv3d, NeuralBackend, NeuralGeneratorSpec, TransposedConvGeometry,
};
pub use postprocess::postprocess;
pub use weights::{
    load_weight_bundle, save_weight_bundle, LayerKind, LayerWeights, Tensor, WeightBundle,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageops::ImageError;
use crate::volume::{VolumeError, VoxelVolume};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("latent dimension {actual} does not match expected {expected}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed weight manifest: {0}")]
    MalformedManifest(String),
    #[error("checksum mismatch for tensor `{0}`")]
    ChecksumMismatch(String),
    #[error("non-finite activation after layer `{0}`")]
    NonFiniteActivation(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T, E = GeneratorError> = std::result::Result<T, E>;

/// A latent vector, intended to be drawn from N(0, I).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GeneratorError::InvalidConfig("latent dimension must be >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeneratorError::InvalidConfig("latent values must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    /// Standard-normal draw.
    pub fn sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self((0..dim.max(1)).map(|_| rng.sample(StandardNormal)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Deterministic map from latent vectors to binary volumes.
pub trait VolumeGenerator: Sync {
    fn latent_dim(&self) -> usize;
    fn generate(&self, z: &LatentVector) -> Result<VoxelVolume>;
}

fn check_dim(expected: usize, z: &LatentVector) -> Result<()> {
    if z.dim() != expected {
        return Err(GeneratorError::DimMismatch {
            expected,
            actual: z.dim(),
        });
    }
    Ok(())
}
