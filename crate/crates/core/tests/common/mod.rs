//! Independent reference implementations shared by the integration suites.
//! Everything here favours obviousness over speed.

#![allow(dead_code)]

use std::collections::HashSet;

use poromorph::generators::TransposedConvGeometry;
use rand::Rng;

pub fn idx(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

pub fn random_phase(rng: &mut impl Rng, dims: [usize; 3], p: f64) -> Vec<u8> {
    (0..dims.iter().product::<usize>())
        .map(|_| rng.random_bool(p) as u8)
        .collect()
}

/// Euler characteristic of the union of closed unit cubes at pore voxels,
/// by listing every vertex, edge, square and cube exactly once. Cells are
/// keyed by doubled coordinates; a cell's dimension is its count of odd
/// coordinates.
pub fn euler_closed_cubes(phase: &[u8], dims: [usize; 3]) -> i64 {
    let mut cells: HashSet<[i64; 3]> = HashSet::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if phase[idx(dims, x, y, z)] == 0 {
                    continue;
                }
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            cells.insert([2 * x as i64 + a, 2 * y as i64 + b, 2 * z as i64 + c]);
                        }
                    }
                }
            }
        }
    }
    cells
        .iter()
        .map(|p| {
            let odd = p.iter().filter(|&&v| v % 2 != 0).count();
            if odd % 2 == 0 {
                1
            } else {
                -1
            }
        })
        .sum()
}

/// Complement inside a box grown by one solid voxel on every side.
pub fn padded_complement(phase: &[u8], dims: [usize; 3]) -> (Vec<u8>, [usize; 3]) {
    let pd = dims.map(|d| d + 2);
    let mut out = vec![1u8; pd.iter().product()];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                out[idx(pd, x + 1, y + 1, z + 1)] = 1 - phase[idx(dims, x, y, z)];
            }
        }
    }
    (out, pd)
}

/// Face-connected Euler characteristic through duality: the 6-connected
/// pore phase and the 26-connected closed complement of the padded box
/// satisfy `χ6(X) = χ26(complement) - 1`.
pub fn euler_face6_by_duality(phase: &[u8], dims: [usize; 3]) -> i64 {
    let (c, pd) = padded_complement(phase, dims);
    euler_closed_cubes(&c, pd) - 1
}

/// Squared distance from each pore voxel to the nearest solid voxel, where
/// the layer just outside the grid counts as solid. Solid voxels get 0.
pub fn edt_brute_squared(phase: &[u8], dims: [usize; 3]) -> Vec<f64> {
    let solids: Vec<[i64; 3]> = (0..dims[2])
        .flat_map(|z| (0..dims[1]).flat_map(move |y| (0..dims[0]).map(move |x| [x, y, z])))
        .filter(|&[x, y, z]| phase[idx(dims, x, y, z)] == 0)
        .map(|p| p.map(|v| v as i64))
        .collect();
    let mut out = vec![0.0; phase.len()];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let i = idx(dims, x, y, z);
                if phase[i] == 0 {
                    continue;
                }
                let p = [x as i64, y as i64, z as i64];
                // Nearest exterior voxel sits straight across the closest face.
                let mut best = (0..3)
                    .map(|a| (p[a] + 1).min(dims[a] as i64 - p[a]).pow(2))
                    .min()
                    .unwrap();
                for s in &solids {
                    let d = (0..3).map(|a| (p[a] - s[a]).pow(2)).sum::<i64>();
                    best = best.min(d);
                }
                out[i] = best as f64;
            }
        }
    }
    out
}

/// Two-class Otsu cut maximizing between-class variance, in exact integer
/// arithmetic over bin centers `i + 0.5`. Ties go to the smaller cut.
pub fn otsu_exact_cut(counts: &[u64]) -> Option<usize> {
    let n = counts.len();
    let mut best: Option<(u128, u128, usize)> = None;
    for c in 1..n {
        let w0: u128 = counts[..c].iter().map(|&v| v as u128).sum();
        let w1: u128 = counts[c..].iter().map(|&v| v as u128).sum();
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let s0: u128 = counts[..c].iter().enumerate().map(|(i, &v)| v as u128 * (2 * i as u128 + 1)).sum();
        let s1: u128 = counts[c..]
            .iter()
            .enumerate()
            .map(|(i, &v)| v as u128 * (2 * (i + c) as u128 + 1))
            .sum();
        // σ_B² ∝ (w1·s0 − w0·s1)² / (w0·w1)
        let diff = (w1 * s0).abs_diff(w0 * s1);
        let (num, den) = (diff * diff, w0 * w1);
        let better = match best {
            None => true,
            Some((bn, bd, _)) => num * bd > bn * den,
        };
        if better {
            best = Some((num, den, c));
        }
    }
    best.map(|(_, _, c)| c)
}

/// Transposed convolution straight from its scatter-add definition,
/// channel-major `[c, d, h, w]` throughout.
pub fn tconv_scatter(
    input: &[f32],
    [cin, d, h, w]: [usize; 4],
    weight: &[f32],
    bias: &[f32],
    g: TransposedConvGeometry,
) -> (Vec<f32>, [usize; 4]) {
    let cout = bias.len();
    let k = g.kernel;
    let (s, p) = (g.stride as i64, g.padding as i64);
    let o = |n: usize| (n - 1) * g.stride + k - 2 * g.padding;
    let (od, oh, ow) = (o(d), o(h), o(w));
    let mut out: Vec<f32> = (0..cout * od * oh * ow).map(|i| bias[i / (od * oh * ow)]).collect();
    for ci in 0..cin {
        for i in 0..d {
            for j in 0..h {
                for l in 0..w {
                    let xv = input[((ci * d + i) * h + j) * w + l];
                    for co in 0..cout {
                        for a in 0..k {
                            for b in 0..k {
                                for c in 0..k {
                                    let z = i as i64 * s - p + a as i64;
                                    let y = j as i64 * s - p + b as i64;
                                    let x = l as i64 * s - p + c as i64;
                                    if z < 0 || y < 0 || x < 0 || z >= od as i64 || y >= oh as i64 || x >= ow as i64 {
                                        continue;
                                    }
                                    let wv = weight[(((ci * cout + co) * k + a) * k + b) * k + c];
                                    out[((co * od + z as usize) * oh + y as usize) * ow + x as usize] += xv * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (out, [cout, od, oh, ow])
}
