use serde::{Deserialize, Serialize};

use super::solver::{conjugate_gradient, CsrMatrix};
use super::{BoundaryLabel, FlowAxis, NetworkError, PoreNetwork, Result};
use crate::volume::VoxelVolume;

/// One millidarcy in square meters.
pub const MILLIDARCY_M2: f64 = 9.869233e-16;

/// Fluid and boundary conditions for a single-phase solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub axis: FlowAxis,
    /// Pa·s
    pub viscosity: f64,
    /// Pa
    pub delta_p: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            axis: FlowAxis::Z,
            viscosity: 1.0e-3,
            delta_p: 101_325.0,
        }
    }
}

/// Sample length along the flow axis and cross-sectional area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub length: f64,
    pub area: f64,
}

impl Domain {
    pub fn from_volume(vol: &VoxelVolume, axis: FlowAxis) -> Self {
        let a = vol.voxel_size_m();
        let dims = vol.dims().map(|d| d as f64 * a);
        let i = axis.index();
        Self {
            length: dims[i],
            area: dims.iter().product::<f64>() / dims[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// `None` picks a bound proportional to the number of unknowns.
    pub max_iter: Option<usize>,
    /// Fail with `SolverDiverged` instead of returning an unconverged field.
    pub require_convergence: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: None,
            require_convergence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityResult {
    pub k_m2: f64,
    #[serde(rename = "k_mD")]
    pub k_md: f64,
    /// m³/s entering through the inlet pores.
    pub flow_rate: f64,
    /// m³/s leaving through the outlet pores.
    pub outflow_rate: f64,
    pub delta_p: f64,
    pub viscosity: f64,
    pub axis: FlowAxis,
    pub domain: Domain,
    /// Pore pressures in Pa; `None` for pores pruned from the solve.
    pub pressure: Vec<Option<f64>>,
    pub solver_iterations: usize,
    pub solver_relative_residual: f64,
}

/// Hagen–Poiseuille conductance of a circular tube, m³/(Pa·s).
pub fn throat_conductance(diameter: f64, length: f64, viscosity: f64) -> f64 {
    std::f64::consts::PI * diameter.powi(4) / (128.0 * viscosity * length)
}

pub fn simulate_permeability(
    net: &PoreNetwork,
    flow: &FlowConfig,
    domain: Domain,
) -> Result<PermeabilityResult> {
    simulate_permeability_with(net, flow, domain, &SolverOptions::default())
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Darcy permeability of `net` under a pressure drop along `flow.axis`.
///
/// Pores in clusters that do not reach both an inlet and an outlet are
/// pruned before assembly; the remaining interior pressures solve the
/// conductance-weighted Laplacian with Dirichlet inlet/outlet values.
pub fn simulate_permeability_with(
    net: &PoreNetwork,
    flow: &FlowConfig,
    domain: Domain,
    opts: &SolverOptions,
) -> Result<PermeabilityResult> {
    net.validate()?;
    if !(flow.viscosity > 0.0 && flow.delta_p > 0.0 && domain.length > 0.0 && domain.area > 0.0) {
        return Err(NetworkError::InvalidParameter(
            "viscosity, delta_p, length and area must be positive".into(),
        ));
    }
    let labels = net.labels_for(flow.axis);
    let n = net.pores.len();
    let g: Vec<f64> = net
        .throats
        .iter()
        .map(|t| throat_conductance(t.diameter, t.length, flow.viscosity))
        .collect();

    let mut uf = UnionFind((0..n).collect());
    for t in &net.throats {
        uf.union(t.pore_a, t.pore_b);
    }
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    let mut has_inlet = vec![false; n];
    let mut has_outlet = vec![false; n];
    for i in 0..n {
        match labels[i] {
            BoundaryLabel::Inlet => has_inlet[roots[i]] = true,
            BoundaryLabel::Outlet => has_outlet[roots[i]] = true,
            BoundaryLabel::Interior => {}
        }
    }
    let active: Vec<bool> = (0..n)
        .map(|i| has_inlet[roots[i]] && has_outlet[roots[i]])
        .collect();
    if !active.iter().any(|&a| a) {
        return Err(NetworkError::NoPercolatingPath);
    }

    // Unknown numbering over active interior pores.
    let mut unknown = vec![usize::MAX; n];
    let mut m = 0;
    for i in 0..n {
        if active[i] && labels[i] == BoundaryLabel::Interior {
            unknown[i] = m;
            m += 1;
        }
    }
    let fixed = |i: usize| match labels[i] {
        BoundaryLabel::Inlet => Some(flow.delta_p),
        BoundaryLabel::Outlet => Some(0.0),
        BoundaryLabel::Interior => None,
    };
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; m];
    for (t, &gt) in net.throats.iter().zip(&g) {
        let (a, b) = (t.pore_a, t.pore_b);
        if !active[a] {
            continue;
        }
        for (i, j) in [(a, b), (b, a)] {
            let ui = unknown[i];
            if ui == usize::MAX {
                continue;
            }
            triplets.push((ui, ui, gt));
            match fixed(j) {
                Some(pj) => rhs[ui] += gt * pj,
                None => triplets.push((ui, unknown[j], -gt)),
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(m, triplets);
    let max_iter = opts.max_iter.unwrap_or(10 * m + 100);
    let cg = conjugate_gradient(&matrix, &rhs, opts.rel_tol, max_iter);
    if cg.x.iter().any(|v| !v.is_finite())
        || (opts.require_convergence && !cg.converged)
    {
        return Err(NetworkError::SolverDiverged {
            iterations: cg.iterations,
            residual: cg.relative_residual,
        });
    }

    let pressure: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if !active[i] {
                None
            } else {
                fixed(i).or_else(|| Some(cg.x[unknown[i]]))
            }
        })
        .collect();

    let mut inflow = 0.0;
    let mut outflow = 0.0;
    for (t, &gt) in net.throats.iter().zip(&g) {
        let (a, b) = (t.pore_a, t.pore_b);
        let (Some(pa), Some(pb)) = (pressure[a], pressure[b]) else {
            continue;
        };
        for (i, pi, pj, j) in [(a, pa, pb, b), (b, pb, pa, a)] {
            if labels[i] == BoundaryLabel::Inlet && labels[j] != BoundaryLabel::Inlet {
                inflow += gt * (pi - pj);
            }
            if labels[i] == BoundaryLabel::Outlet && labels[j] != BoundaryLabel::Outlet {
                outflow += gt * (pj - pi);
            }
        }
    }
    let k_m2 = flow.viscosity * domain.length * inflow / (domain.area * flow.delta_p);
    Ok(PermeabilityResult {
        k_m2,
        k_md: k_m2 / MILLIDARCY_M2,
        flow_rate: inflow,
        outflow_rate: outflow,
        delta_p: flow.delta_p,
        viscosity: flow.viscosity,
        axis: flow.axis,
        domain,
        pressure,
        solver_iterations: cg.iterations,
        solver_relative_residual: cg.relative_residual,
    })
}

/// Largest flux imbalance over solved interior pores, relative to the inlet flow.
pub fn mass_balance_check(result: &PermeabilityResult, net: &PoreNetwork) -> f64 {
    let labels = net.labels_for(result.axis);
    let mut net_flux = vec![0.0f64; net.pores.len()];
    for t in &net.throats {
        let (Some(pa), Some(pb)) = (result.pressure[t.pore_a], result.pressure[t.pore_b]) else {
            continue;
        };
        let q = throat_conductance(t.diameter, t.length, result.viscosity) * (pa - pb);
        net_flux[t.pore_a] += q;
        net_flux[t.pore_b] -= q;
    }
    let scale = result.flow_rate.abs() + f64::MIN_POSITIVE;
    (0..net.pores.len())
        .filter(|&i| labels[i] == BoundaryLabel::Interior && result.pressure[i].is_some())
        .map(|i| net_flux[i].abs() / scale)
        .fold(0.0, f64::max)
}
