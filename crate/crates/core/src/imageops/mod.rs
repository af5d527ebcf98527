//! 3D image processing on voxel volumes: median filtering, multi-Otsu
//! thresholding, connected-component labeling, exact Euclidean distance
//! transform and separable Gaussian smoothing.

pub(crate) mod components;
mod edt;
mod median;
mod otsu;
mod smooth;

pub use components::{connected_components, Components, Connectivity};
pub use edt::{distance_transform_edt, distance_transform_edt_with, squared_edt, Exterior};
pub use median::median_filter_3d;
pub use otsu::{histogram, multi_otsu_cuts, multi_otsu_threshold, Histogram, OtsuResult};
pub use smooth::gaussian_smooth;

use thiserror::Error;

use crate::volume::VolumeError;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("median window edge {window} exceeds smallest dimension {min_dim}")]
    WindowTooLarge { window: usize, min_dim: usize },
    #[error("histogram is degenerate: no threshold separates {classes} classes")]
    DegenerateHistogram { classes: usize },
    #[error("distance transform undefined: volume has no solid voxel")]
    AllPore,
    #[error("operation requires a binary volume")]
    NotBinary,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T, E = ImageError> = std::result::Result<T, E>;
