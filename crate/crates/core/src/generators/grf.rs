use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_dim, GeneratorError, LatentVector, Result, VolumeGenerator};
use crate::volume::{VoxelVolume, DEFAULT_VOXEL_SIZE_UM};

/// Gaussian random field by spectral randomization.
///
/// The latent vector holds the cosine/sine amplitudes of `mode_count / 2`
/// plane waves whose wave vectors are drawn once, from `seed_spectrum`, out
/// of the spectral density of a Gaussian covariance with the given
/// correlation length. The field is linear in the latent vector and has unit
/// variance at every voxel when the latent is N(0, I).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfGeneratorConfig {
    /// Output edge length in voxels.
    pub size: usize,
    /// Correlation length in voxels.
    pub correlation_length: f64,
    /// Pore where the field exceeds this level.
    pub threshold: f64,
    /// Latent dimension; must be even.
    pub mode_count: usize,
    pub seed_spectrum: u64,
    pub voxel_size_um: f64,
}

impl Default for GrfGeneratorConfig {
    fn default() -> Self {
        Self {
            size: 64,
            correlation_length: 8.0,
            // Upper-tail level for a mean porosity near 0.22.
            threshold: 0.77,
            mode_count: 64,
            seed_spectrum: 0x5eed,
            voxel_size_um: DEFAULT_VOXEL_SIZE_UM,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrfGenerator {
    config: GrfGeneratorConfig,
    /// Wave vectors in radians per voxel.
    waves: Vec<[f64; 3]>,
    /// `cos(kx * x)` and `sin(kx * x)` per mode, row-major by mode.
    cos_x: Vec<f64>,
    sin_x: Vec<f64>,
}

impl GrfGenerator {
    pub fn new(config: GrfGeneratorConfig) -> Result<Self> {
        if config.size == 0 {
            return Err(GeneratorError::InvalidConfig("size must be >= 1".into()));
        }
        if !(config.correlation_length > 0.0) {
            return Err(GeneratorError::InvalidConfig("correlation length must be > 0".into()));
        }
        if config.mode_count == 0 || config.mode_count % 2 != 0 {
            return Err(GeneratorError::InvalidConfig(
                "mode_count must be a positive even number".into(),
            ));
        }
        if !config.threshold.is_finite() {
            return Err(GeneratorError::InvalidConfig("threshold must be finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed_spectrum);
        let normal = Normal::new(0.0, 1.0 / config.correlation_length).expect("positive std");
        let waves: Vec<[f64; 3]> = (0..config.mode_count / 2)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        let n = config.size;
        let mut cos_x = Vec::with_capacity(waves.len() * n);
        let mut sin_x = Vec::with_capacity(waves.len() * n);
        for k in &waves {
            for x in 0..n {
                let (s, c) = (k[0] * x as f64).sin_cos();
                cos_x.push(c);
                sin_x.push(s);
            }
        }
        Ok(Self {
            config,
            waves,
            cos_x,
            sin_x,
        })
    }

    pub fn config(&self) -> &GrfGeneratorConfig {
        &self.config
    }

    /// Continuous field values in x-fastest order.
    pub fn field(&self, z: &LatentVector) -> Result<Vec<f64>> {
        check_dim(self.config.mode_count, z)?;
        let n = self.config.size;
        let modes = self.waves.len();
        let scale = 1.0 / (modes as f64).sqrt();
        let zv = z.values();
        let mut out = vec![0.0; n * n * n];
        let mut ar = vec![0.0; modes];
        let mut ai = vec![0.0; modes];
        for zz in 0..n {
            for y in 0..n {
                // Complex amplitude (a - i b) e^{i (ky y + kz z)} per mode.
                for (j, k) in self.waves.iter().enumerate() {
                    let (s, c) = (k[1] * y as f64 + k[2] * zz as f64).sin_cos();
                    let (a, b) = (zv[2 * j], zv[2 * j + 1]);
                    ar[j] = a * c + b * s;
                    ai[j] = a * s - b * c;
                }
                let row = &mut out[n * (y + n * zz)..n * (y + n * zz) + n];
                for j in 0..modes {
                    let (cx, sx) = (&self.cos_x[j * n..(j + 1) * n], &self.sin_x[j * n..(j + 1) * n]);
                    let (r, i) = (ar[j], ai[j]);
                    for x in 0..n {
                        row[x] += r * cx[x] - i * sx[x];
                    }
                }
                row.iter_mut().for_each(|v| *v *= scale);
            }
        }
        Ok(out)
    }

    pub fn generate(&self, z: &LatentVector) -> Result<VoxelVolume> {
        let field = self.field(z)?;
        let tau = self.config.threshold;
        let n = self.config.size;
        let data = field.iter().map(|&v| (v > tau) as u8).collect();
        Ok(VoxelVolume::binary([n; 3], self.config.voxel_size_um, data)?)
    }
}

impl VolumeGenerator for GrfGenerator {
    fn latent_dim(&self) -> usize {
        self.config.mode_count
    }

    fn generate(&self, z: &LatentVector) -> Result<VoxelVolume> {
        GrfGenerator::generate(self, z)
    }
}

/// One-shot generation; builds the spectrum for `config` on every call.
pub fn grf_generate(z: &LatentVector, config: GrfGeneratorConfig) -> Result<VoxelVolume> {
    GrfGenerator::new(config)?.generate(z)
}
