//! Watershed segmentation of the pore space into pore bodies.
//!
//! Pipeline: exact distance map, light Gaussian smoothing, local maxima,
//! peak merging, marker-based flooding of the smoothed distance map, then
//! one pore per region and one throat per pair of face-adjacent regions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::{BoundaryLabel, FlowAxis, NetworkError, Pore, PoreNetwork, Result, Throat};
use crate::imageops::{
    distance_transform_edt, gaussian_smooth, Connectivity, ImageError,
};
use crate::imageops::components::label_mask;
use crate::volume::VoxelVolume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    /// Gaussian sigma applied to the distance map, in voxels.
    pub smoothing_sigma: f64,
    /// Peaks closer than this (voxels) are merged, keeping the deeper one.
    pub min_peak_separation: f64,
    /// Axis whose low/high faces define inlet/outlet pores.
    pub axis: FlowAxis,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            smoothing_sigma: 0.4,
            min_peak_separation: 4.0,
            axis: FlowAxis::Z,
        }
    }
}

/// Heap entry: highest smoothed distance first, then earliest push.
struct Entry {
    height: f64,
    seq: u64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.height
            .total_cmp(&other.height)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default, Clone)]
struct Region {
    voxels: usize,
    sum: [f64; 3],
    max_dt: f64,
    faces: [bool; 6],
}

pub fn extract_network(vol: &VoxelVolume, params: &ExtractionParams) -> Result<PoreNetwork> {
    let phase = vol.as_binary().ok_or(ImageError::NotBinary)?;
    if !(params.smoothing_sigma >= 0.0 && params.min_peak_separation >= 0.0) {
        return Err(NetworkError::InvalidParameter(
            "smoothing sigma and peak separation must be non-negative".into(),
        ));
    }
    if phase.iter().all(|&p| p == 0) {
        return Err(NetworkError::EmptyPorePhase);
    }
    let dims = vol.dims();
    let [nx, ny, nz] = dims;
    let dt = distance_transform_edt(vol)?;
    let mut sdt = gaussian_smooth(&dt, params.smoothing_sigma);
    for (s, &p) in sdt.values.iter_mut().zip(phase) {
        if p == 0 {
            *s = 0.0;
        }
    }
    let coords = |i: usize| [i % nx, (i / nx) % ny, i / (nx * ny)];

    // Local maxima of the smoothed map over the 26-neighborhood. A flat
    // plateau only counts if no equal-height path leads to a higher voxel,
    // which rejects ridges such as the middle of a uniform neck.
    let full = Connectivity::Full26.offsets();
    let neighbors = |i: usize| {
        let [x, y, z] = coords(i);
        full.iter().filter_map(move |o| {
            let (xx, yy, zz) = (x as isize + o[0], y as isize + o[1], z as isize + o[2]);
            if xx < 0 || yy < 0 || zz < 0 || xx >= nx as isize || yy >= ny as isize || zz >= nz as isize {
                None
            } else {
                Some(xx as usize + nx * (yy as usize + ny * zz as usize))
            }
        })
    };
    let candidate: Vec<bool> = (0..phase.len())
        .map(|i| phase[i] != 0 && neighbors(i).all(|j| sdt.values[j] <= sdt.values[i]))
        .collect();
    let mut visited = vec![false; phase.len()];
    let mut peaks = Vec::new();
    let mut plateau = Vec::new();
    for start in 0..phase.len() {
        if !candidate[start] || visited[start] {
            continue;
        }
        let h = sdt.values[start];
        plateau.clear();
        plateau.push(start);
        visited[start] = true;
        let mut genuine = true;
        let mut k = 0;
        while k < plateau.len() {
            let i = plateau[k];
            k += 1;
            for j in neighbors(i) {
                if sdt.values[j] == h && phase[j] != 0 && !visited[j] {
                    genuine &= candidate[j];
                    visited[j] = true;
                    plateau.push(j);
                }
            }
        }
        if genuine {
            peaks.extend(plateau.iter().copied().filter(|&i| dt.values[i] > 1.0));
        }
    }
    if peaks.is_empty() {
        return Err(NetworkError::NoPoresFound);
    }

    // Merge peaks within the same connected pore cluster, deepest first.
    let clusters = label_mask(phase, dims, Connectivity::Face6);
    peaks.sort_by(|&a, &b| {
        dt.values[b]
            .total_cmp(&dt.values[a])
            .then(sdt.values[b].total_cmp(&sdt.values[a]))
            .then(a.cmp(&b))
    });
    let sep = params.min_peak_separation;
    let cell = sep.max(1.0);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut markers = Vec::new();
    for &p in &peaks {
        let c = coords(p).map(|v| v as f64);
        let key = c.map(|v| (v / cell).floor() as i64);
        let mut blocked = false;
        'search: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let k = [key[0] + dx, key[1] + dy, key[2] + dz];
                    for &q in grid.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
                        if clusters.labels[q] != clusters.labels[p] {
                            continue;
                        }
                        let d = coords(q).map(|v| v as f64);
                        let dist2 = (0..3).map(|a| (c[a] - d[a]).powi(2)).sum::<f64>();
                        if dist2 < sep * sep {
                            blocked = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !blocked {
            grid.entry(key).or_default().push(p);
            markers.push(p);
        }
    }
    markers.sort_unstable();

    // Marker-controlled flooding from high to low smoothed distance.
    let face = Connectivity::Face6.offsets();
    let mut labels = vec![0u32; phase.len()];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for (k, &m) in markers.iter().enumerate() {
        labels[m] = k as u32 + 1;
        heap.push(Entry { height: sdt.values[m], seq, index: m });
        seq += 1;
    }
    while let Some(Entry { index, .. }) = heap.pop() {
        let [x, y, z] = coords(index);
        let l = labels[index];
        for o in &face {
            let (xx, yy, zz) = (x as isize + o[0], y as isize + o[1], z as isize + o[2]);
            if xx < 0 || yy < 0 || zz < 0 || xx >= nx as isize || yy >= ny as isize || zz >= nz as isize {
                continue;
            }
            let j = xx as usize + nx * (yy as usize + ny * zz as usize);
            if phase[j] != 0 && labels[j] == 0 {
                labels[j] = l;
                heap.push(Entry { height: sdt.values[j], seq, index: j });
                seq += 1;
            }
        }
    }

    // Region geometry.
    let a = vol.voxel_size_m();
    let mut regions = vec![Region::default(); markers.len()];
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let r = &mut regions[l as usize - 1];
        let c = coords(i);
        r.voxels += 1;
        for ax in 0..3 {
            r.sum[ax] += c[ax] as f64;
            if c[ax] == 0 {
                r.faces[2 * ax] = true;
            }
            if c[ax] + 1 == dims[ax] {
                r.faces[2 * ax + 1] = true;
            }
        }
        r.max_dt = r.max_dt.max(dt.values[i]);
    }
    let pores: Vec<Pore> = regions
        .iter()
        .enumerate()
        .map(|(id, r)| {
            let mut pore = Pore {
                id,
                center: r.sum.map(|s| (s / r.voxels as f64 + 0.5) * a),
                inscribed_diameter: 2.0 * r.max_dt * a,
                region_volume: r.voxels as f64 * a * a * a,
                boundary_label: BoundaryLabel::Interior,
                faces: r.faces,
            };
            pore.boundary_label = pore.label_for(params.axis);
            pore
        })
        .collect();

    // Throats from face-adjacent voxel pairs in different regions.
    let mut contacts: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let strides = [1, nx, nx * ny];
    for (i, &li) in labels.iter().enumerate() {
        if li == 0 {
            continue;
        }
        let c = coords(i);
        for ax in 0..3 {
            if c[ax] + 1 == dims[ax] {
                continue;
            }
            let j = i + strides[ax];
            let lj = labels[j];
            if lj == 0 || lj == li {
                continue;
            }
            let key = (li.min(lj), li.max(lj));
            let m = dt.values[i].max(dt.values[j]);
            let e = contacts.entry(key).or_insert(0.0);
            *e = e.max(m);
        }
    }
    let throats = contacts
        .into_iter()
        .map(|((la, lb), max_dt)| {
            let (pa, pb) = (la as usize - 1, lb as usize - 1);
            let dist = (0..3)
                .map(|ax| (pores[pa].center[ax] - pores[pb].center[ax]).powi(2))
                .sum::<f64>()
                .sqrt();
            Throat {
                pore_a: pa,
                pore_b: pb,
                diameter: 2.0 * max_dt * a,
                // Centroids of distinct regions closer than one voxel are clamped.
                length: dist.max(a),
            }
        })
        .collect();

    Ok(PoreNetwork {
        axis: params.axis,
        pores,
        throats,
    })
}
