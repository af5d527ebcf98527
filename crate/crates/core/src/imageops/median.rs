use rayon::prelude::*;

use super::{ImageError, Result};
use crate::volume::{VoxelData, VoxelVolume};

/// Median over the `(2r+1)^3` neighborhood of every voxel, with replicated
/// borders. Binary volumes stay binary.
pub fn median_filter_3d(vol: &VoxelVolume, radius: usize) -> Result<VoxelVolume> {
    if radius == 0 {
        return Err(ImageError::InvalidParameter("median radius must be >= 1".into()));
    }
    let dims = vol.dims();
    let window = 2 * radius + 1;
    let min_dim = *dims.iter().min().unwrap();
    if window > min_dim {
        return Err(ImageError::WindowTooLarge { window, min_dim });
    }
    let data = match vol.data() {
        VoxelData::Binary(v) => VoxelData::Binary(filter(v, dims, radius)),
        VoxelData::Continuous(v) => VoxelData::Continuous(filter(v, dims, radius)),
    };
    Ok(VoxelVolume::new(dims, vol.voxel_size_um(), data)?)
}

fn filter<T: Copy + PartialOrd + Send + Sync>(src: &[T], dims: [usize; 3], r: usize) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let r = r as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = vec![src[0]; src.len()];
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, plane)| {
        let mut window = Vec::with_capacity(((2 * r + 1) as usize).pow(3));
        for y in 0..ny {
            for x in 0..nx {
                window.clear();
                for dz in -r..=r {
                    let zz = clamp(z as isize + dz, nz);
                    for dy in -r..=r {
                        let yy = clamp(y as isize + dy, ny);
                        let row = nx * (yy + ny * zz);
                        for dx in -r..=r {
                            window.push(src[row + clamp(x as isize + dx, nx)]);
                        }
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window
                    .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite voxel values"));
                plane[x + nx * y] = *m;
            }
        }
    });
    out
}
