//! Gradual Gaussian deformation of a generator's latent vector.
//!
//! Each outer iteration draws a fresh Gaussian `u` and searches the circle
//! `z·cos t + u·sin t` for the `t` whose generated volume best matches the
//! target property. The search is a coarse grid over `[0, 2π)` that always
//! starts at `t = 0` (the current state), refined by golden-section around
//! the best grid point. Since `t = 0` is always a candidate the error never
//! increases from one iteration to the next.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{GeneratorError, LatentVector, VolumeGenerator};
use crate::morphometrics::porosity;
use crate::network::{
    extract_network, network_stats, simulate_permeability, Domain, ExtractionParams, FlowAxis, FlowConfig,
};
use crate::volume::VoxelVolume;

#[derive(Debug, Error)]
pub enum ConditionerError {
    #[error("latent dimension {actual} does not match expected {expected}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid conditioner config: {0}")]
    InvalidConfig(String),
    #[error("could not evaluate {kind}: {cause}")]
    EvaluationFailed { kind: PropertyKind, cause: String },
    #[error("generator failure: {0}")]
    Generator(#[from] GeneratorError),
}

pub type Result<T, E = ConditionerError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    Porosity,
    AbsolutePermeability,
    MeanPoreSize,
    MeanThroatSize,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 4] = [
        PropertyKind::Porosity,
        PropertyKind::AbsolutePermeability,
        PropertyKind::MeanPoreSize,
        PropertyKind::MeanThroatSize,
    ];

    pub fn units(self) -> &'static str {
        match self {
            PropertyKind::Porosity => "fraction",
            PropertyKind::AbsolutePermeability => "mD",
            PropertyKind::MeanPoreSize | PropertyKind::MeanThroatSize => "m",
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            PropertyKind::Porosity => 0.01,
            PropertyKind::AbsolutePermeability => 15.0,
            PropertyKind::MeanPoreSize => 1e-7,
            PropertyKind::MeanThroatSize => 5e-8,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            PropertyKind::Porosity => "porosity",
            PropertyKind::AbsolutePermeability => "absolute_permeability",
            PropertyKind::MeanPoreSize => "mean_pore_size",
            PropertyKind::MeanThroatSize => "mean_throat_size",
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertyKind {
    type Err = ConditionerError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConditionerError::InvalidTarget(format!("unknown property `{s}`")))
    }
}

/// Target value `R` and tolerance `γ`, both in `units`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTarget {
    pub kind: PropertyKind,
    pub value: f64,
    pub units: String,
    pub tolerance: f64,
}

impl PropertyTarget {
    /// Target with the kind's default tolerance.
    pub fn new(kind: PropertyKind, value: f64) -> Result<Self> {
        Self::with_tolerance(kind, value, kind.default_tolerance())
    }

    pub fn with_tolerance(kind: PropertyKind, value: f64, tolerance: f64) -> Result<Self> {
        let t = Self {
            kind,
            value,
            units: kind.units().to_string(),
            tolerance,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConditionerError::InvalidTarget(m));
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if !self.value.is_finite() {
            return bad("value must be finite".into());
        }
        if self.units != self.kind.units() {
            return bad(format!("{} is measured in {}, not {}", self.kind, self.kind.units(), self.units));
        }
        match self.kind {
            PropertyKind::Porosity if !(self.value > 0.0 && self.value < 1.0) => {
                bad(format!("porosity must lie in (0, 1), got {}", self.value))
            }
            PropertyKind::Porosity => Ok(()),
            _ if self.value <= 0.0 => bad(format!("{} must be positive, got {}", self.kind, self.value)),
            _ => Ok(()),
        }
    }

    /// Parses `{"kind", "value", "units"?, "tolerance"?}`; omitted fields take
    /// the kind's units and default tolerance.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            kind: PropertyKind,
            value: f64,
            units: Option<String>,
            tolerance: Option<f64>,
        }
        let r: Raw = serde_json::from_str(text).map_err(|e| ConditionerError::InvalidTarget(e.to_string()))?;
        let t = Self {
            kind: r.kind,
            value: r.value,
            units: r.units.unwrap_or_else(|| r.kind.units().to_string()),
            tolerance: r.tolerance.unwrap_or_else(|| r.kind.default_tolerance()),
        };
        t.validate()?;
        Ok(t)
    }
}

/// Measures `kind` on a binary volume. Network-based properties are extracted
/// with default parameters along `axis`.
pub fn evaluate_property_along(vol: &VoxelVolume, kind: PropertyKind, axis: FlowAxis) -> Result<f64> {
    let fail = |cause: String| ConditionerError::EvaluationFailed { kind, cause };
    if kind == PropertyKind::Porosity {
        return porosity(vol).map_err(|e| fail(e.to_string()));
    }
    let params = ExtractionParams {
        axis,
        ..ExtractionParams::default()
    };
    let net = extract_network(vol, &params).map_err(|e| fail(e.to_string()))?;
    match kind {
        PropertyKind::AbsolutePermeability => {
            let flow = FlowConfig {
                axis,
                ..FlowConfig::default()
            };
            simulate_permeability(&net, &flow, Domain::from_volume(vol, axis))
                .map(|r| r.k_md)
                .map_err(|e| fail(e.to_string()))
        }
        _ => {
            let stats = network_stats(&net).map_err(|e| fail(e.to_string()))?;
            if kind == PropertyKind::MeanPoreSize {
                Ok(stats.mean_pore_diameter)
            } else {
                stats
                    .mean_throat_diameter
                    .ok_or_else(|| fail("network has no throats".into()))
            }
        }
    }
}

pub fn evaluate_property(vol: &VoxelVolume, kind: PropertyKind) -> Result<f64> {
    evaluate_property_along(vol, kind, FlowAxis::default())
}

/// `z1·cos t + z2·sin t`, elementwise.
pub fn combine_gaussian(z1: &LatentVector, z2: &LatentVector, t: f64) -> Result<LatentVector> {
    if z1.dim() != z2.dim() {
        return Err(ConditionerError::DimMismatch {
            expected: z1.dim(),
            actual: z2.dim(),
        });
    }
    if !t.is_finite() {
        return Err(ConditionerError::InvalidConfig("t must be finite".into()));
    }
    let (s, c) = exact_sin_cos(t);
    let values = z1.values().iter().zip(z2.values()).map(|(a, b)| a * c + b * s).collect();
    Ok(LatentVector::new(values)?)
}

/// `sin_cos` that is exact at whole quarter turns, so `t = π/2` selects `z2`
/// without leaking a rounding residue of `z1`.
fn exact_sin_cos(t: f64) -> (f64, f64) {
    let q = t / std::f64::consts::FRAC_PI_2;
    if q == q.round() && q.abs() < 1e15 {
        match (q as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        t.sin_cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionerConfig {
    pub max_outer_iters: usize,
    /// Coarse samples of `t` over `[0, 2π)`.
    pub t_grid: usize,
    /// Golden-section evaluations around the best grid point.
    pub refine_iters: usize,
    pub rng_seed: u64,
    /// Reserved for a gradient-style step on `t`; the line search ignores it.
    pub learning_rate: Option<f64>,
    pub flow_axis: FlowAxis,
}

impl Default for ConditionerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            t_grid: 8,
            refine_iters: 6,
            rng_seed: 0,
            learning_rate: None,
            flow_axis: FlowAxis::Z,
        }
    }
}

impl ConditionerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(ConditionerError::InvalidConfig("max_outer_iters must be >= 1".into()));
        }
        if self.t_grid < 4 {
            return Err(ConditionerError::InvalidConfig("t_grid must be >= 4".into()));
        }
        Ok(())
    }

    pub fn calls_per_iteration(&self) -> usize {
        self.t_grid + self.refine_iters
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub best_t: f64,
    /// `|R - R̂|` of the accepted state; infinite (serialized as null) when
    /// no candidate could be evaluated.
    pub error: f64,
    pub simulator_calls: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionResult {
    pub target: PropertyTarget,
    pub z_final: LatentVector,
    #[serde(skip)]
    pub volume: VoxelVolume,
    /// `R̂` of the final volume; `None` if it could not be evaluated.
    pub achieved: Option<f64>,
    pub error_trace: Vec<TraceEntry>,
    pub outer_iterations: usize,
    pub total_simulator_calls: usize,
    pub converged: bool,
}

impl ConditionResult {
    pub fn final_error(&self) -> f64 {
        self.error_trace.last().map_or(f64::INFINITY, |e| e.error)
    }
}

struct Candidate {
    t: f64,
    z: LatentVector,
    volume: VoxelVolume,
    value: Option<f64>,
    error: f64,
}

impl Candidate {
    /// Errors within tolerance all rank equal so the earliest candidate wins.
    fn score(&self, tol: f64) -> f64 {
        if self.error <= tol {
            0.0
        } else {
            self.error
        }
    }
}

fn evaluate_at(
    generator: &dyn VolumeGenerator,
    target: &PropertyTarget,
    axis: FlowAxis,
    z: &LatentVector,
    u: &LatentVector,
    t: f64,
) -> Result<Candidate> {
    let zt = combine_gaussian(z, u, t)?;
    let volume = generator.generate(&zt)?;
    let value = match evaluate_property_along(&volume, target.kind, axis) {
        Ok(v) => Some(v),
        Err(ConditionerError::EvaluationFailed { .. }) => None,
        Err(e) => return Err(e),
    };
    let error = value.map_or(f64::INFINITY, |v| (target.value - v).abs());
    Ok(Candidate {
        t,
        z: zt,
        volume,
        value,
        error,
    })
}

/// Runs the deformation loop from `z0`, or from a draw seeded by
/// `config.rng_seed` when `z0` is `None`.
pub fn condition(
    generator: &dyn VolumeGenerator,
    target: &PropertyTarget,
    config: &ConditionerConfig,
    z0: Option<LatentVector>,
) -> Result<ConditionResult> {
    target.validate()?;
    config.validate()?;
    let dim = generator.latent_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut z = match z0 {
        Some(z) if z.dim() != dim => {
            return Err(ConditionerError::DimMismatch {
                expected: dim,
                actual: z.dim(),
            })
        }
        Some(z) => z,
        None => LatentVector::sample(dim, &mut rng),
    };
    let tol = target.tolerance;
    let axis = config.flow_axis;
    let mut trace = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut calls = 0;

    for iter in 1..=config.max_outer_iters {
        let u = LatentVector::sample(dim, &mut rng);
        let grid: Vec<f64> = (0..config.t_grid).map(|i| TAU * i as f64 / config.t_grid as f64).collect();
        let mut candidates = grid
            .par_iter()
            .map(|&t| evaluate_at(generator, target, axis, &z, &u, t))
            .collect::<Result<Vec<_>>>()?;

        let pick = |cands: &[Candidate]| {
            let mut b = 0;
            for (i, c) in cands.iter().enumerate() {
                if c.score(tol) < cands[b].score(tol) {
                    b = i;
                }
            }
            b
        };

        // Golden-section over one grid spacing either side of the best grid point.
        let t_b = candidates[pick(&candidates)].t;
        let delta = TAU / config.t_grid as f64;
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (t_b - delta, t_b + delta);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd): (Option<f64>, Option<f64>) = (None, None);
        for _ in 0..config.refine_iters {
            match (fc, fd) {
                (None, _) => {
                    let cand = evaluate_at(generator, target, axis, &z, &u, c)?;
                    fc = Some(cand.score(tol));
                    candidates.push(cand);
                }
                (Some(_), None) => {
                    let cand = evaluate_at(generator, target, axis, &z, &u, d)?;
                    fd = Some(cand.score(tol));
                    candidates.push(cand);
                }
                (Some(vc), Some(vd)) => {
                    if vc <= vd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - g * (b - a);
                        let cand = evaluate_at(generator, target, axis, &z, &u, c)?;
                        fc = Some(cand.score(tol));
                        candidates.push(cand);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + g * (b - a);
                        let cand = evaluate_at(generator, target, axis, &z, &u, d)?;
                        fd = Some(cand.score(tol));
                        candidates.push(cand);
                    }
                }
            }
        }
        calls += candidates.len();

        let chosen = candidates.swap_remove(pick(&candidates));
        z = chosen.z.clone();
        trace.push(TraceEntry {
            iter,
            best_t: chosen.t,
            error: chosen.error,
            simulator_calls: config.calls_per_iteration(),
        });
        let done = chosen.error <= tol;
        best = Some(chosen);
        if done {
            break;
        }
    }

    let best = best.expect("at least one iteration runs");
    Ok(ConditionResult {
        target: target.clone(),
        z_final: best.z,
        volume: best.volume,
        achieved: best.value,
        outer_iterations: trace.len(),
        converged: best.error <= tol,
        error_trace: trace,
        total_simulator_calls: calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{GrfGenerator, GrfGeneratorConfig};
    use rand::Rng;

    /// Voxel `i` is pore iff `z_i > 0`; porosity moves in steps of `1/d`.
    struct SignGenerator(usize);

    impl VolumeGenerator for SignGenerator {
        fn latent_dim(&self) -> usize {
            self.0
        }

        fn generate(&self, z: &LatentVector) -> Result<VoxelVolume, GeneratorError> {
            let data = z.values().iter().map(|&v| (v > 0.0) as u8).collect();
            Ok(VoxelVolume::binary([self.0, 1, 1], 1.0, data)?)
        }
    }

    fn grf(size: usize, threshold: f64) -> GrfGenerator {
        GrfGenerator::new(GrfGeneratorConfig {
            size,
            threshold,
            ..GrfGeneratorConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn combine_endpoints_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z1 = LatentVector::sample(16, &mut rng);
        let z2 = LatentVector::sample(16, &mut rng);
        assert_eq!(combine_gaussian(&z1, &z2, 0.0).unwrap(), z1);
        assert_eq!(combine_gaussian(&z1, &z2, std::f64::consts::FRAC_PI_2).unwrap(), z2);
        assert!(matches!(
            combine_gaussian(&z1, &LatentVector::zeros(3), 0.1),
            Err(ConditionerError::DimMismatch { .. })
        ));
    }

    #[test]
    fn target_validation_and_json() {
        assert!(PropertyTarget::new(PropertyKind::Porosity, 1.2).is_err());
        assert!(PropertyTarget::new(PropertyKind::AbsolutePermeability, -3.0).is_err());
        assert!(PropertyTarget::with_tolerance(PropertyKind::MeanPoreSize, 1e-5, 0.0).is_err());
        let t = PropertyTarget::from_json(
            r#"{"kind":"absolute_permeability","value":200.0,"units":"mD","tolerance":15.0}"#,
        )
        .unwrap();
        assert_eq!(t, PropertyTarget::new(PropertyKind::AbsolutePermeability, 200.0).unwrap());
        assert!(PropertyTarget::from_json(r#"{"kind":"porosity","value":0.2,"units":"mD","tolerance":0.01}"#).is_err());
        assert_eq!("mean_throat_size".parse::<PropertyKind>().unwrap(), PropertyKind::MeanThroatSize);
        let t = PropertyTarget::from_json(r#"{"kind":"absolute_permeability","value":300}"#).unwrap();
        assert_eq!((t.units.as_str(), t.tolerance), ("mD", 15.0));
    }

    #[test]
    fn all_pore_porosity_is_one() {
        let vol = VoxelVolume::binary([16; 3], 2.25, vec![1; 4096]).unwrap();
        assert_eq!(evaluate_property(&vol, PropertyKind::Porosity).unwrap(), 1.0);
    }

    #[test]
    fn all_solid_network_property_fails_softly() {
        let vol = VoxelVolume::binary([8; 3], 2.25, vec![0; 512]).unwrap();
        assert!(matches!(
            evaluate_property(&vol, PropertyKind::AbsolutePermeability),
            Err(ConditionerError::EvaluationFailed { .. })
        ));
    }

    #[test]
    fn satisfied_start_needs_no_perturbation() {
        let g = SignGenerator(20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z0 = LatentVector::sample(20, &mut rng);
        let phi = z0.values().iter().filter(|&&v| v > 0.0).count() as f64 / 20.0;
        let target = PropertyTarget::with_tolerance(PropertyKind::Porosity, phi.clamp(0.05, 0.95), 0.01).unwrap();
        let r = condition(&g, &target, &ConditionerConfig::default(), Some(z0.clone())).unwrap();
        assert!(r.converged);
        assert_eq!(r.outer_iterations, 1);
        assert_eq!(r.error_trace[0].best_t, 0.0);
        assert_eq!(r.z_final, z0);
        assert_eq!(r.total_simulator_calls, 14);
    }

    #[test]
    fn grf_porosity_converges() {
        let g = grf(32, 0.77);
        let target = PropertyTarget::new(PropertyKind::Porosity, 0.22).unwrap();
        let cfg = ConditionerConfig {
            rng_seed: 5,
            ..ConditionerConfig::default()
        };
        let r = condition(&g, &target, &cfg, None).unwrap();
        assert!(r.converged);
        assert!((r.achieved.unwrap() - 0.22).abs() <= 0.01);
        assert_eq!(porosity(&r.volume).unwrap(), r.achieved.unwrap());
        assert_eq!(r.total_simulator_calls, r.outer_iterations * 14);
    }

    #[test]
    fn unreachable_target_reports_monotone_trace() {
        let g = grf(64, 0.0);
        let target = PropertyTarget::with_tolerance(PropertyKind::Porosity, 0.99, 0.001).unwrap();
        let cfg = ConditionerConfig {
            max_outer_iters: 6,
            ..ConditionerConfig::default()
        };
        let r = condition(&g, &target, &cfg, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.outer_iterations, 6);
        assert!(r.error_trace.windows(2).all(|w| w[1].error <= w[0].error));
        assert!(r.error_trace.iter().all(|e| e.simulator_calls == 14));
    }

    #[test]
    fn reproducible() {
        let g = grf(16, 0.5);
        let target = PropertyTarget::new(PropertyKind::Porosity, 0.2).unwrap();
        let cfg = ConditionerConfig {
            rng_seed: 77,
            max_outer_iters: 5,
            ..ConditionerConfig::default()
        };
        let a = condition(&g, &target, &cfg, None).unwrap();
        let b = condition(&g, &target, &cfg, None).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.volume, b.volume);
    }

    #[test]
    fn bad_config_rejected() {
        let g = SignGenerator(4);
        let target = PropertyTarget::new(PropertyKind::Porosity, 0.5).unwrap();
        let cfg = ConditionerConfig {
            t_grid: 3,
            ..ConditionerConfig::default()
        };
        assert!(condition(&g, &target, &cfg, None).is_err());
        assert!(matches!(
            condition(&g, &target, &ConditionerConfig::default(), Some(LatentVector::zeros(5))),
            Err(ConditionerError::DimMismatch { .. })
        ));
    }

    /// One-sample Kolmogorov-Smirnov against N(0, 1), asymptotic p-value.
    fn ks_standard_normal_p(mut xs: Vec<f64>) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = xs.len() as f64;
        xs.sort_by(f64::total_cmp);
        let norm = Normal::standard();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = norm.cdf(x);
                (f - i as f64 / n).max((i + 1) as f64 / n - f)
            })
            .fold(0.0, f64::max);
        let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
        let p: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn combination_chain_stays_standard_normal() {
        let d = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let finals: Vec<LatentVector> = (0..1000)
            .map(|_| {
                let mut z = LatentVector::sample(d, &mut rng);
                for _ in 0..10 {
                    let u = LatentVector::sample(d, &mut rng);
                    z = combine_gaussian(&z, &u, rng.random_range(0.0..TAU)).unwrap();
                }
                z
            })
            .collect();
        for j in 0..d {
            let p = ks_standard_normal_p(finals.iter().map(|z| z.values()[j]).collect());
            assert!(p > 0.01, "component {j}: p = {p}");
        }
    }

    /// Pore pattern from the first half of the latent only.
    struct HalfSignGenerator;

    impl VolumeGenerator for HalfSignGenerator {
        fn latent_dim(&self) -> usize {
            20
        }

        fn generate(&self, z: &LatentVector) -> Result<VoxelVolume, GeneratorError> {
            let data = z.values()[..10].iter().map(|&v| (v > 0.0) as u8).collect();
            Ok(VoxelVolume::binary([10, 1, 1], 1.0, data)?)
        }
    }

    #[test]
    fn conditioning_keeps_unobserved_directions_standard_normal() {
        let target = PropertyTarget::with_tolerance(PropertyKind::Porosity, 0.5, 0.001).unwrap();
        let mut seeds = ChaCha8Rng::seed_from_u64(7);
        let mut finals = Vec::new();
        let mut steps = 0;
        for _ in 0..1000 {
            let cfg = ConditionerConfig {
                rng_seed: seeds.random(),
                max_outer_iters: 4,
                ..ConditionerConfig::default()
            };
            let r = condition(&HalfSignGenerator, &target, &cfg, None).unwrap();
            steps += r.error_trace.iter().filter(|e| e.best_t != 0.0).count();
            finals.push(r.z_final);
        }
        assert!(steps > 500, "too few accepted steps: {steps}");
        for j in 10..20 {
            let p = ks_standard_normal_p(finals.iter().map(|z| z.values()[j]).collect());
            assert!(p > 0.01, "component {j}: p = {p}");
        }
    }
}
