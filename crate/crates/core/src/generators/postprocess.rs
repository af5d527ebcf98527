use super::Result;
use crate::imageops::{median_filter_3d, multi_otsu_threshold};
use crate::volume::VoxelVolume;

/// Median filter (radius 1) followed by two-class Otsu on 256 bins.
/// The brighter class becomes pore.
pub fn postprocess(vol: &VoxelVolume) -> Result<VoxelVolume> {
    let smoothed = median_filter_3d(vol, 1)?;
    Ok(multi_otsu_threshold(&smoothed, 2, 256)?.binary)
}
