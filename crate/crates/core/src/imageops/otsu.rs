use super::{ImageError, Result};
use crate::volume::VoxelVolume;

/// Equal-width histogram over the value range of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    /// Bin holding `v`; values at the upper edge fall in the last bin.
    pub fn bin_of(&self, v: f64) -> usize {
        let lo = self.bin_edges[0];
        let hi = *self.bin_edges.last().unwrap();
        let bins = self.bins();
        if hi <= lo {
            return 0;
        }
        let i = ((v - lo) / (hi - lo) * bins as f64).floor();
        (i.max(0.0) as usize).min(bins - 1)
    }
}

/// Histogram of raw voxel values with `bins` equal-width bins spanning `[min, max]`.
pub fn histogram(values: &[f32], bins: usize) -> Histogram {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v as f64), hi.max(v as f64))
    });
    let width = (hi - lo) / bins as f64;
    let bin_edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut hist = Histogram {
        bin_edges,
        counts: vec![0; bins],
    };
    for &v in values {
        let b = hist.bin_of(v as f64);
        hist.counts[b] += 1;
    }
    hist
}

/// Cut indices maximizing the between-class variance of `hist`.
///
/// A cut `c` starts a new class at bin `c`, so class `j` covers bins
/// `cuts[j-1]..cuts[j]`. Every class must be non-empty. On ties the
/// lexicographically smallest cut set wins.
pub fn multi_otsu_cuts(hist: &Histogram, classes: usize) -> Result<Vec<usize>> {
    let bins = hist.bins();
    // Prefix sums of weight and first moment over bin centers.
    let mut w = vec![0.0f64; bins + 1];
    let mut m = vec![0.0f64; bins + 1];
    for i in 0..bins {
        let c = hist.counts[i] as f64;
        w[i + 1] = w[i] + c;
        m[i + 1] = m[i] + c * hist.bin_center(i);
    }
    // Sum over classes of S_j^2 / W_j; the total mean term is constant.
    let term = |a: usize, b: usize| -> Option<f64> {
        let wc = w[b] - w[a];
        (wc > 0.0).then(|| {
            let mc = m[b] - m[a];
            mc * mc / wc
        })
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |score: f64, cuts: Vec<usize>| {
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cuts));
        }
    };
    match classes {
        2 => {
            for c in 1..bins {
                if let (Some(a), Some(b)) = (term(0, c), term(c, bins)) {
                    consider(a + b, vec![c]);
                }
            }
        }
        3 => {
            for c1 in 1..bins {
                let Some(a) = term(0, c1) else { continue };
                for c2 in c1 + 1..bins {
                    if let (Some(b), Some(c)) = (term(c1, c2), term(c2, bins)) {
                        consider(a + b + c, vec![c1, c2]);
                    }
                }
            }
        }
        _ => {
            return Err(ImageError::InvalidParameter(format!(
                "multi-Otsu supports 2 or 3 classes, got {classes}"
            )))
        }
    }
    best.map(|(_, cuts)| cuts)
        .ok_or(ImageError::DegenerateHistogram { classes })
}

#[derive(Debug, Clone)]
pub struct OtsuResult {
    /// Threshold values (lower edge of the first bin of each upper class), ascending.
    pub thresholds: Vec<f64>,
    pub cuts: Vec<usize>,
    pub histogram: Histogram,
    /// Pore = voxels in the top class.
    pub binary: VoxelVolume,
}

/// Multi-Otsu segmentation of a volume's raw values.
pub fn multi_otsu_threshold(vol: &VoxelVolume, classes: usize, bins: usize) -> Result<OtsuResult> {
    if bins < 8 {
        return Err(ImageError::InvalidParameter(format!("need at least 8 bins, got {bins}")));
    }
    let values = vol.values_f32();
    let hist = histogram(&values, bins);
    if hist.bin_edges[0] >= hist.bin_edges[bins] {
        return Err(ImageError::DegenerateHistogram { classes });
    }
    let cuts = multi_otsu_cuts(&hist, classes)?;
    let top = *cuts.last().unwrap();
    let labels = values
        .iter()
        .map(|&v| (hist.bin_of(v as f64) >= top) as u8)
        .collect();
    let binary = VoxelVolume::binary(vol.dims(), vol.voxel_size_um(), labels)?;
    Ok(OtsuResult {
        thresholds: cuts.iter().map(|&c| hist.bin_edges[c]).collect(),
        cuts,
        histogram: hist,
        binary,
    })
}
