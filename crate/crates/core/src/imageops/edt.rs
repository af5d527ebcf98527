use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImageError, Result};
use crate::volume::{ScalarField, VoxelVolume};

/// How the region outside the grid is treated by the distance transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Exterior {
    /// The grid is surrounded by a layer of solid voxels.
    #[default]
    Solid,
    /// Only solid voxels inside the grid count.
    Ignore,
}

/// Exact Euclidean distance (in voxels) from every pore voxel to the nearest
/// solid voxel, with a solid exterior. Solid voxels hold 0.
pub fn distance_transform_edt(vol: &VoxelVolume) -> Result<ScalarField> {
    distance_transform_edt_with(vol, Exterior::Solid)
}

pub fn distance_transform_edt_with(vol: &VoxelVolume, exterior: Exterior) -> Result<ScalarField> {
    let phase = vol.as_binary().ok_or(ImageError::NotBinary)?;
    let sq = squared_edt(phase, vol.dims(), exterior)?;
    Ok(ScalarField {
        dims: vol.dims(),
        voxel_size_um: vol.voxel_size_um(),
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

/// Squared distances via three separable lower-envelope passes
/// (Felzenszwalb & Huttenlocher). Results are exact integers.
pub fn squared_edt(phase: &[u8], dims: [usize; 3], exterior: Exterior) -> Result<Vec<f64>> {
    let (work_dims, pad) = match exterior {
        Exterior::Solid => (dims.map(|d| d + 2), 1),
        Exterior::Ignore => {
            if phase.iter().all(|&p| p != 0) {
                return Err(ImageError::AllPore);
            }
            (dims, 0)
        }
    };
    let [wx, wy, wz] = work_dims;
    let mut f = vec![0.0f64; wx * wy * wz];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if phase[x + dims[0] * (y + dims[1] * z)] != 0 {
                    f[(x + pad) + wx * ((y + pad) + wy * (z + pad))] = f64::INFINITY;
                }
            }
        }
    }

    // x pass: rows are contiguous.
    f.par_chunks_mut(wx).for_each(|row| {
        let mut scratch = Envelope::new(wx);
        scratch.transform(row);
    });
    // y pass, one z-plane at a time.
    f.par_chunks_mut(wx * wy).for_each(|plane| {
        let mut scratch = Envelope::new(wy);
        let mut line = vec![0.0; wy];
        for x in 0..wx {
            for y in 0..wy {
                line[y] = plane[x + wx * y];
            }
            scratch.transform(&mut line);
            for y in 0..wy {
                plane[x + wx * y] = line[y];
            }
        }
    });
    // z pass over columns; gather columns per y row to keep work independent.
    let columns: Vec<Vec<f64>> = (0..wx * wy)
        .into_par_iter()
        .map(|xy| {
            let mut scratch = Envelope::new(wz);
            let mut line: Vec<f64> = (0..wz).map(|z| f[xy + wx * wy * z]).collect();
            scratch.transform(&mut line);
            line
        })
        .collect();
    for (xy, col) in columns.into_iter().enumerate() {
        for (z, v) in col.into_iter().enumerate() {
            f[xy + wx * wy * z] = v;
        }
    }

    if pad == 0 {
        return Ok(f);
    }
    let mut out = Vec::with_capacity(phase.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            let start = 1 + wx * ((y + 1) + wy * (z + 1));
            out.extend_from_slice(&f[start..start + dims[0]]);
        }
    }
    Ok(out)
}

/// Scratch space for the 1D squared distance transform of a sampled function.
struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
    out: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self {
            v: vec![0; n],
            z: vec![0.0; n + 1],
            out: vec![0.0; n],
        }
    }

    /// `f[q] <- min_p (q - p)^2 + f[p]` over sites with finite `f[p]`.
    fn transform(&mut self, f: &mut [f64]) {
        let n = f.len();
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                if k < 0 {
                    k = 0;
                    self.v[0] = q;
                    self.z[0] = f64::NEG_INFINITY;
                    self.z[1] = f64::INFINITY;
                    break;
                }
                let p = self.v[k as usize];
                let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= self.z[k as usize] {
                    k -= 1;
                } else {
                    k += 1;
                    self.v[k as usize] = q;
                    self.z[k as usize] = s;
                    self.z[k as usize + 1] = f64::INFINITY;
                    break;
                }
            }
        }
        if k < 0 {
            f.fill(f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for q in 0..n {
            while self.z[j + 1] < q as f64 {
                j += 1;
            }
            let p = self.v[j];
            let d = q as f64 - p as f64;
            self.out[q] = d * d + f[p];
        }
        f.copy_from_slice(&self.out[..n]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pore_voxel() {
        let vol = VoxelVolume::from_fn([5, 5, 5], 1.0, |x, y, z| (x, y, z) == (2, 2, 2)).unwrap();
        let d = distance_transform_edt(&vol).unwrap();
        assert_eq!(d.at(2, 2, 2), 1.0);
        assert_eq!(d.values.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn slab_centerline() {
        // Pore slab z in 2..7 (thickness 5) inside a 9-deep volume.
        let vol = VoxelVolume::from_fn([6, 6, 9], 1.0, |_, _, z| (2..7).contains(&z)).unwrap();
        let d = distance_transform_edt(&vol).unwrap();
        assert_eq!(d.at(3, 3, 4), 3.0);
        assert_eq!(d.at(0, 3, 4), 1.0);
        // Without the solid exterior the centerline only sees the slab faces.
        let d = distance_transform_edt_with(&vol, Exterior::Ignore).unwrap();
        assert_eq!(d.at(0, 0, 4), 3.0);
    }

    #[test]
    fn all_solid_is_zero() {
        let vol = VoxelVolume::binary([4, 3, 2], 1.0, vec![0; 24]).unwrap();
        let d = distance_transform_edt(&vol).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_pore_needs_exterior() {
        let vol = VoxelVolume::binary([3, 3, 3], 1.0, vec![1; 27]).unwrap();
        assert!(matches!(
            distance_transform_edt_with(&vol, Exterior::Ignore),
            Err(ImageError::AllPore)
        ));
        let d = distance_transform_edt(&vol).unwrap();
        assert_eq!(d.at(1, 1, 1), 2.0);
    }
}
