use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};

/// Pearson correlation coefficient. `Ok(None)` when either input has zero
/// variance.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(HarnessError::LengthMismatch { x: x.len(), y: y.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Quantile of ascending `sorted` by linear interpolation between order
/// statistics at position `(n - 1)·q`.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl QuantileSummary {
    /// Five-number summary of the finite values; `None` if there are none.
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p| quantile(&v, p).unwrap();
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

/// RMSE of `achieved` against `targets`, divided by the width of the target range.
pub fn normalized_rmse(achieved: &[f64], targets: &[f64], range: (f64, f64)) -> Result<f64> {
    if achieved.len() != targets.len() || achieved.is_empty() {
        return Err(HarnessError::LengthMismatch {
            x: achieved.len(),
            y: targets.len(),
        });
    }
    let mse = achieved.iter().zip(targets).map(|(a, t)| (a - t).powi(2)).sum::<f64>() / achieved.len() as f64;
    Ok(mse.sqrt() / (range.1 - range.0))
}
