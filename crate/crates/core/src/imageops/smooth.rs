use crate::volume::ScalarField;

/// Separable Gaussian blur with standard deviation `sigma` voxels, truncated
/// at four sigma, replicated borders. `sigma <= 0` returns a copy.
pub fn gaussian_smooth(field: &ScalarField, sigma: f64) -> ScalarField {
    if sigma <= 0.0 {
        return field.clone();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let dims = field.dims;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut cur = field.values.clone();
    let mut next = vec![0.0; cur.len()];
    for axis in 0..3 {
        let n = dims[axis] as isize;
        let stride = strides[axis];
        for (i, out) in next.iter_mut().enumerate() {
            let pos = ((i / stride) % dims[axis]) as isize;
            let base = i as isize - pos * stride as isize;
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let p = (pos + k as isize - radius).clamp(0, n - 1);
                acc += w * cur[(base + p * stride as isize) as usize];
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    ScalarField {
        dims,
        voxel_size_um: field.voxel_size_um,
        values: cur,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_constants_and_mass_center() {
        let f = ScalarField {
            dims: [5, 4, 3],
            voxel_size_um: 1.0,
            values: vec![2.5; 60],
        };
        let s = gaussian_smooth(&f, 0.8);
        assert!(s.values.iter().all(|v| (v - 2.5).abs() < 1e-12));

        let mut g = ScalarField {
            dims: [9, 9, 9],
            voxel_size_um: 1.0,
            values: vec![0.0; 729],
        };
        let c = g.index(4, 4, 4);
        g.values[c] = 1.0;
        let s = gaussian_smooth(&g, 0.4);
        assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s.max(), s.at(4, 4, 4));
        assert!((s.at(3, 4, 4) - s.at(5, 4, 4)).abs() < 1e-15);
    }
}
