//! Minkowski-functional metrics of the pore phase: porosity, specific
//! surface area and Euler characteristic.

use serde::{Deserialize, Serialize};

use crate::imageops::{Connectivity, ImageError};
use crate::volume::VoxelVolume;

pub type Result<T, E = ImageError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphometryReport {
    pub phi: f64,
    pub specific_area_per_m: f64,
    pub euler_chi: i64,
    pub pore_voxels: u64,
    pub bulk_voxels: u64,
}

fn phase(vol: &VoxelVolume) -> Result<&[u8]> {
    vol.as_binary().ok_or(ImageError::NotBinary)
}

/// Pore voxel fraction. Independent of voxel size.
pub fn porosity(vol: &VoxelVolume) -> Result<f64> {
    let p = phase(vol)?;
    Ok(count_pores(p) as f64 / p.len() as f64)
}

fn count_pores(p: &[u8]) -> u64 {
    p.iter().map(|&b| b as u64).sum()
}

/// Number of pore voxel faces that touch a solid voxel or the domain boundary.
pub fn exposed_face_count(vol: &VoxelVolume) -> Result<u64> {
    let p = phase(vol)?;
    let [nx, ny, nz] = vol.dims();
    let strides = [1, nx, nx * ny];
    let dims = [nx, ny, nz];
    let mut faces = 0u64;
    for axis in 0..3 {
        let s = strides[axis];
        for (i, &v) in p.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let pos = (i / s) % dims[axis];
            // Lower neighbor.
            if pos == 0 || p[i - s] == 0 {
                faces += 1;
            }
            if pos + 1 == dims[axis] || p[i + s] == 0 {
                faces += 1;
            }
        }
    }
    Ok(faces)
}

/// Voxel-face surface area over bulk volume, in 1/m. Face counting carries
/// the usual staircase bias (about 1.5x on smooth surfaces).
pub fn specific_surface_area(vol: &VoxelVolume) -> Result<f64> {
    let faces = exposed_face_count(vol)? as f64;
    let a = vol.voxel_size_m();
    Ok(faces * a * a / vol.bulk_volume_m3())
}

/// Euler characteristic of the 6-connected pore phase.
pub fn euler_characteristic(vol: &VoxelVolume) -> Result<i64> {
    euler_characteristic_with(vol, Connectivity::Face6)
}

/// Euler characteristic `V - E + F - C` of the pore phase.
///
/// With `Face6` the complex has one vertex per pore voxel, one edge per
/// face-adjacent pair, one square per 2x2 block and one cube per 2x2x2 block.
/// With `Full26` it is the union of closed unit cubes.
pub fn euler_characteristic_with(vol: &VoxelVolume, connectivity: Connectivity) -> Result<i64> {
    let p = phase(vol)?;
    let dims = vol.dims();
    Ok(match connectivity {
        Connectivity::Face6 => euler_face6(p, dims),
        Connectivity::Full26 => euler_closed_cubes(p, dims),
    })
}

fn pore_fn(p: &[u8], dims: [usize; 3]) -> impl Fn(isize, isize, isize) -> bool + '_ {
    move |x, y, z| {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < dims[0]
            && (y as usize) < dims[1]
            && (z as usize) < dims[2]
            && p[x as usize + dims[0] * (y as usize + dims[1] * z as usize)] != 0
    }
}

fn euler_face6(p: &[u8], dims: [usize; 3]) -> i64 {
    let at = pore_fn(p, dims);
    let (mut v, mut e, mut f, mut c) = (0i64, 0i64, 0i64, 0i64);
    for z in 0..dims[2] as isize {
        for y in 0..dims[1] as isize {
            for x in 0..dims[0] as isize {
                if !at(x, y, z) {
                    continue;
                }
                v += 1;
                let (px, py, pz) = (at(x + 1, y, z), at(x, y + 1, z), at(x, y, z + 1));
                e += px as i64 + py as i64 + pz as i64;
                let pxy = px && py && at(x + 1, y + 1, z);
                let pxz = px && pz && at(x + 1, y, z + 1);
                let pyz = py && pz && at(x, y + 1, z + 1);
                f += pxy as i64 + pxz as i64 + pyz as i64;
                if pxy && pxz && pyz && at(x + 1, y + 1, z + 1) {
                    c += 1;
                }
            }
        }
    }
    v - e + f - c
}

fn euler_closed_cubes(p: &[u8], dims: [usize; 3]) -> i64 {
    let at = pore_fn(p, dims);
    let [nx, ny, nz] = dims.map(|d| d as isize);
    let any = |xs: &[isize], ys: &[isize], zs: &[isize]| {
        xs.iter()
            .any(|&x| ys.iter().any(|&y| zs.iter().any(|&z| at(x, y, z))))
    };
    let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
    // Lattice points (i, j, k) are cube corners; voxel (x, y, z) spans [x, x+1]^3.
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let (xs, ys, zs) = ([i - 1, i], [j - 1, j], [k - 1, k]);
                if any(&xs, &ys, &zs) {
                    v += 1;
                }
                if i < nx && any(&[i], &ys, &zs) {
                    e += 1;
                }
                if j < ny && any(&xs, &[j], &zs) {
                    e += 1;
                }
                if k < nz && any(&xs, &ys, &[k]) {
                    e += 1;
                }
                if j < ny && k < nz && any(&xs, &[j], &[k]) {
                    f += 1;
                }
                if i < nx && k < nz && any(&[i], &ys, &[k]) {
                    f += 1;
                }
                if i < nx && j < ny && any(&[i], &[j], &zs) {
                    f += 1;
                }
            }
        }
    }
    v - e + f - count_pores(p) as i64
}

pub fn minkowski_report(vol: &VoxelVolume) -> Result<MorphometryReport> {
    let p = phase(vol)?;
    let pore_voxels = count_pores(p);
    let bulk_voxels = p.len() as u64;
    Ok(MorphometryReport {
        phi: pore_voxels as f64 / bulk_voxels as f64,
        specific_area_per_m: specific_surface_area(vol)?,
        euler_chi: euler_characteristic(vol)?,
        pore_voxels,
        bulk_voxels,
    })
}
