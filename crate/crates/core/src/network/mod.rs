//! Pore-throat networks: watershed extraction from binary volumes and
//! single-phase Hagen–Poiseuille flow for absolute permeability.

mod extract;
mod flow;
mod solver;

pub use extract::{extract_network, ExtractionParams};
pub use flow::{
    mass_balance_check, simulate_permeability, simulate_permeability_with, throat_conductance,
    Domain, FlowConfig, PermeabilityResult, SolverOptions, MILLIDARCY_M2,
};
pub use solver::{conjugate_gradient, CgOutcome, CsrMatrix};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageops::ImageError;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("volume has no pore voxels")]
    EmptyPorePhase,
    #[error("no distance-map maxima above one voxel")]
    NoPoresFound,
    #[error("network has no pores")]
    EmptyNetwork,
    #[error("no percolating path between inlet and outlet")]
    NoPercolatingPath,
    #[error("system is singular after pruning isolated clusters")]
    SingularSystem,
    #[error("conjugate gradient stopped at relative residual {residual:e} after {iterations} iterations")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T, E = NetworkError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FlowAxis {
    X,
    Y,
    #[default]
    Z,
}

impl FlowAxis {
    pub fn index(self) -> usize {
        match self {
            FlowAxis::X => 0,
            FlowAxis::Y => 1,
            FlowAxis::Z => 2,
        }
    }
}

impl std::str::FromStr for FlowAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(FlowAxis::X),
            "y" => Ok(FlowAxis::Y),
            "z" => Ok(FlowAxis::Z),
            _ => Err(format!("unknown axis `{s}`, expected x, y or z")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundaryLabel {
    #[default]
    Interior,
    Inlet,
    Outlet,
}

/// Domain faces a pore region touches, ordered `[x-, x+, y-, y+, z-, z+]`.
pub type FaceContacts = [bool; 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pore {
    pub id: usize,
    /// Region centroid in meters.
    pub center: [f64; 3],
    pub inscribed_diameter: f64,
    pub region_volume: f64,
    pub boundary_label: BoundaryLabel,
    #[serde(default)]
    pub faces: FaceContacts,
}

impl Pore {
    /// Boundary role for flow along `axis`, from the face contacts.
    /// A pore touching both ends is treated as an inlet.
    pub fn label_for(&self, axis: FlowAxis) -> BoundaryLabel {
        let a = axis.index();
        if self.faces[2 * a] {
            BoundaryLabel::Inlet
        } else if self.faces[2 * a + 1] {
            BoundaryLabel::Outlet
        } else {
            BoundaryLabel::Interior
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throat {
    pub pore_a: usize,
    pub pore_b: usize,
    pub diameter: f64,
    pub length: f64,
}

/// Pores and throats in SI units. `axis` is the flow axis the pore boundary
/// labels refer to.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoreNetwork {
    #[serde(default)]
    pub axis: FlowAxis,
    pub pores: Vec<Pore>,
    pub throats: Vec<Throat>,
}

impl PoreNetwork {
    /// Check ids, endpoints, duplicates and positivity.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NetworkError::InvalidNetwork(msg));
        for (i, p) in self.pores.iter().enumerate() {
            if p.id != i {
                return bad(format!("pore at position {i} has id {}", p.id));
            }
            if !(p.inscribed_diameter > 0.0 && p.inscribed_diameter.is_finite()) {
                return bad(format!("pore {i} has non-positive diameter"));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (i, t) in self.throats.iter().enumerate() {
            if t.pore_a >= self.pores.len() || t.pore_b >= self.pores.len() {
                return bad(format!("throat {i} references a missing pore"));
            }
            if t.pore_a == t.pore_b {
                return bad(format!("throat {i} is a self-loop"));
            }
            if !seen.insert((t.pore_a.min(t.pore_b), t.pore_a.max(t.pore_b))) {
                return bad(format!("throat {i} duplicates a pore pair"));
            }
            if !(t.diameter > 0.0 && t.length > 0.0 && t.diameter.is_finite() && t.length.is_finite()) {
                return bad(format!("throat {i} has non-positive geometry"));
            }
        }
        Ok(())
    }

    /// Boundary roles for flow along `axis`. Uses the stored labels when the
    /// axis matches the extraction axis.
    pub fn labels_for(&self, axis: FlowAxis) -> Vec<BoundaryLabel> {
        self.pores
            .iter()
            .map(|p| {
                if axis == self.axis {
                    p.boundary_label
                } else {
                    p.label_for(axis)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub mean_pore_diameter: f64,
    /// Absent for a throat-free network.
    pub mean_throat_diameter: Option<f64>,
    pub pore_count: usize,
    pub throat_count: usize,
    pub mean_coordination: f64,
}

/// Number-weighted mean sizes and coordination of a network.
pub fn network_stats(net: &PoreNetwork) -> Result<NetworkStats> {
    if net.pores.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }
    let n = net.pores.len();
    let e = net.throats.len();
    let mean_pore_diameter = net.pores.iter().map(|p| p.inscribed_diameter).sum::<f64>() / n as f64;
    let mean_throat_diameter =
        (e > 0).then(|| net.throats.iter().map(|t| t.diameter).sum::<f64>() / e as f64);
    Ok(NetworkStats {
        mean_pore_diameter,
        mean_throat_diameter,
        pore_count: n,
        throat_count: e,
        mean_coordination: 2.0 * e as f64 / n as f64,
    })
}
