use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ImageError, Result};
use crate::volume::VoxelVolume;

/// Voxel adjacency used for labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    Face6,
    Full26,
}

impl Connectivity {
    /// Neighbor offsets, excluding the origin.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Face6 => manhattan == 1,
                        Connectivity::Full26 => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Pore-phase labels: `0` for solid, `1..=count` for components in scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub dims: [usize; 3],
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Voxel count of each component, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

pub fn connected_components(vol: &VoxelVolume, connectivity: Connectivity) -> Result<Components> {
    let phase = vol.as_binary().ok_or(ImageError::NotBinary)?;
    Ok(label_mask(phase, vol.dims(), connectivity))
}

/// Label the non-zero entries of `mask`.
pub(crate) fn label_mask(mask: &[u8], dims: [usize; 3], connectivity: Connectivity) -> Components {
    let [nx, ny, nz] = dims;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; mask.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if mask[start] == 0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            for o in &offsets {
                let (xx, yy, zz) = (x as isize + o[0], y as isize + o[1], z as isize + o[2]);
                if xx < 0 || yy < 0 || zz < 0 || xx >= nx as isize || yy >= ny as isize || zz >= nz as isize {
                    continue;
                }
                let j = xx as usize + nx * (yy as usize + ny * zz as usize);
                if mask[j] != 0 && labels[j] == 0 {
                    labels[j] = count;
                    queue.push_back(j);
                }
            }
        }
    }
    Components {
        dims,
        labels,
        count: count as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pair() {
        let vol = VoxelVolume::from_fn([2, 2, 2], 1.0, |x, y, z| (x, y, z) == (0, 0, 0) || (x, y, z) == (1, 1, 1)).unwrap();
        assert_eq!(connected_components(&vol, Connectivity::Face6).unwrap().count, 2);
        assert_eq!(connected_components(&vol, Connectivity::Full26).unwrap().count, 1);
    }

    #[test]
    fn all_pore_and_empty() {
        let full = VoxelVolume::binary([3, 4, 5], 1.0, vec![1; 60]).unwrap();
        assert_eq!(connected_components(&full, Connectivity::Face6).unwrap().count, 1);
        let empty = VoxelVolume::binary([3, 4, 5], 1.0, vec![0; 60]).unwrap();
        let c = connected_components(&empty, Connectivity::Full26).unwrap();
        assert_eq!(c.count, 0);
        assert!(c.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn three_blocks() {
        let corners = [(1, 1, 1), (5, 5, 5), (1, 6, 2)];
        let vol = VoxelVolume::from_fn([10, 10, 10], 1.0, |x, y, z| {
            corners
                .iter()
                .any(|&(a, b, c)| (a..a + 2).contains(&x) && (b..b + 2).contains(&y) && (c..c + 2).contains(&z))
        })
        .unwrap();
        for conn in [Connectivity::Face6, Connectivity::Full26] {
            let c = connected_components(&vol, conn).unwrap();
            assert_eq!(c.count, 3);
            assert_eq!(c.sizes(), vec![8, 8, 8]);
        }
    }

    #[test]
    fn continuous_rejected() {
        let vol = VoxelVolume::continuous([1, 1, 1], 1.0, vec![0.0]).unwrap();
        assert!(matches!(connected_components(&vol, Connectivity::Face6), Err(ImageError::NotBinary)));
    }
}
