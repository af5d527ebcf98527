//! Synthesis, conditioning and pore-scale analysis of 3D porous microstructures.
//!
//! The crate is organized bottom-up:
//!
//! * [`volume`]: voxel volumes, the VVOL container, subvolume cropping.
//! * [`imageops`]: median filter, multi-Otsu, connected components, exact EDT.
//! * [`morphometrics`]: porosity, specific surface area, Euler characteristic.
//! * [`network`]: watershed pore-network extraction and single-phase flow.
//! * [`generators`]: Gaussian-random-field and neural latent-to-volume generators.
//! * [`conditioner`]: gradual Gaussian deformation of the latent vector
//!   against a physical target.
//! * [`harness`]: population statistics and the command-line surface.

pub mod conditioner;
pub mod generators;
pub mod harness;
pub mod imageops;
pub mod morphometrics;
pub mod network;
pub mod volume;

pub use volume::{VoxelData, VoxelVolume};

/// Toolkit version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
