//! Discrete optimal transport with squared geodesic cost: exact network
//! simplex, log-domain Sinkhorn, displacement interpolation and barycentric
//! maps.

mod cost;
mod entropic;
mod exact;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{same_grid, Density};
use crate::error::{Error, Result};
use crate::sphere::{axpy, geodesic_point, log_map, scale, SphereGrid, TangentField, Vec3};

pub use cost::{cost_matrix, CostMatrix};
pub use entropic::SinkhornPotentials;

/// Largest grid handled by the exact solver.
pub const EXACT_CAP: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OtMethod {
    Exact,
    Entropic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtConfig {
    pub method: OtMethod,
    pub entropic_gamma: f64,
    pub max_iters: usize,
    /// L1 marginal violation accepted by the entropic solver.
    pub tolerance: f64,
}

impl Default for OtConfig {
    fn default() -> Self {
        Self { method: OtMethod::Exact, entropic_gamma: 1e-2, max_iters: 20_000, tolerance: 1e-9 }
    }
}

impl OtConfig {
    pub fn entropic(gamma: f64) -> Self {
        Self { method: OtMethod::Entropic, entropic_gamma: gamma, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == OtMethod::Entropic && !(self.entropic_gamma > 0.0) {
            return Err(Error::config("entropic_gamma must be positive"));
        }
        if !(self.tolerance > 0.0) || self.max_iters == 0 {
            return Err(Error::config("transport tolerance and max_iters must be positive"));
        }
        Ok(())
    }
}

/// A coupling between two densities, stored as its nonzero entries.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub source: Density,
    pub target: Density,
    /// `(i, j, mass)`: mass moved from node i to node j.
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.source.grid()
    }

    /// Transport cost `sum p_ij d_ij^2`.
    pub fn cost(&self) -> f64 {
        let c = grid_cost(self.grid());
        self.entries.iter().map(|(i, j, m)| m * c.get(*i, *j)).sum()
    }

    /// Row and column sums of the coupling (node masses).
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid().len();
        let mut r = vec![0.0; n];
        let mut c = vec![0.0; n];
        for (i, j, m) in &self.entries {
            r[*i] += m;
            c[*j] += m;
        }
        (r, c)
    }

    /// L1 distance between the coupling marginals and the source/target masses.
    pub fn marginal_violation(&self) -> f64 {
        let (r, c) = self.marginals();
        let a = self.source.masses();
        let b = self.target.masses();
        r.iter().zip(&a).map(|(x, y)| (x - y).abs()).sum::<f64>()
            + c.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }
}

/// Shared squared-distance matrix of a grid.
pub fn grid_cost(grid: &SphereGrid) -> Arc<CostMatrix> {
    Arc::clone(grid.cost_cache.get_or_init(|| Arc::new(cost_matrix(grid))))
}

/// Exact optimal plan and `W_2`.
pub fn solve_exact(mu: &Density, nu: &Density) -> Result<(TransportPlan, f64)> {
    same_grid(mu, nu)?;
    let n = mu.grid().len();
    if n > EXACT_CAP {
        return Err(Error::Capacity { nodes: n, cap: EXACT_CAP });
    }
    let cost = grid_cost(mu.grid());
    let a = mu.masses();
    let mut b = nu.masses();
    // Match totals to rounding so the tree carries no artificial flow.
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if sb > 0.0 {
        b.iter_mut().for_each(|x| *x *= sa / sb);
    }
    let entries = exact::network_simplex(&a, &b, &cost)?;
    let plan = TransportPlan { source: mu.clone(), target: nu.clone(), entries };
    let w2 = plan.cost().max(0.0).sqrt();
    Ok((plan, w2))
}

/// Entropic plan; reported `W_2` is the unregularised cost of that plan.
pub fn solve_entropic(mu: &Density, nu: &Density, config: &OtConfig) -> Result<(TransportPlan, f64)> {
    solve_entropic_warm(mu, nu, config, None).map(|(p, w, _)| (p, w))
}

/// [`solve_entropic`] with optional warm-start potentials, also returning the
/// final potentials.
pub fn solve_entropic_warm(
    mu: &Density,
    nu: &Density,
    config: &OtConfig,
    warm: Option<&SinkhornPotentials>,
) -> Result<(TransportPlan, f64, SinkhornPotentials)> {
    same_grid(mu, nu)?;
    if !(config.entropic_gamma > 0.0) {
        return Err(Error::config("entropic_gamma must be positive"));
    }
    let cost = grid_cost(mu.grid());
    let out = entropic::sinkhorn(
        &mu.masses(),
        &nu.masses(),
        &cost,
        config.entropic_gamma,
        config.tolerance,
        config.max_iters,
        warm,
    )?;
    let plan = TransportPlan { source: mu.clone(), target: nu.clone(), entries: out.entries };
    let w2 = plan.cost().max(0.0).sqrt();
    Ok((plan, w2, out.potentials))
}

/// Dispatches on `config.method`.
pub fn solve(mu: &Density, nu: &Density, config: &OtConfig) -> Result<(TransportPlan, f64)> {
    match config.method {
        OtMethod::Exact => solve_exact(mu, nu),
        OtMethod::Entropic => solve_entropic(mu, nu, config),
    }
}

/// `W_2` by the exact solver when the grid allows it, entropic otherwise.
pub fn wasserstein(mu: &Density, nu: &Density, fallback: &OtConfig) -> Result<f64> {
    if mu.grid().len() <= EXACT_CAP {
        solve_exact(mu, nu).map(|r| r.1)
    } else {
        solve_entropic(mu, nu, fallback).map(|r| r.1)
    }
}

/// Moves each atom a fraction `r` along its geodesic and bins it into the
/// containing cell.
pub fn displacement_interpolate(plan: &TransportPlan, r: f64) -> Result<Density> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("interpolation parameter {r} outside [0, 1]")));
    }
    if r == 0.0 {
        return Ok(plan.source.clone());
    }
    let g = plan.grid();
    let mut mass = vec![0.0; g.len()];
    for (i, j, m) in &plan.entries {
        let cell = if i == j {
            *i
        } else if r == 1.0 {
            *j
        } else {
            g.locate(&geodesic_point(&g.nodes[*i], &g.nodes[*j], r))
        };
        mass[cell] += m;
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|x| *x /= total);
    Ok(Density::from_masses(Arc::clone(g), &mass))
}

/// `v_i = sum_j p_ij log_i(w_j) / (w_i rho_i)`; rows without mass give zero.
pub fn barycentric_map(plan: &TransportPlan) -> TangentField {
    let g = plan.grid();
    let mut acc = vec![[0.0; 3]; g.len()];
    let mut row = vec![0.0; g.len()];
    for (i, j, m) in &plan.entries {
        if i != j {
            acc[*i] = axpy(&acc[*i], *m, &log_map(&g.nodes[*i], &g.nodes[*j]));
        }
        row[*i] += m;
    }
    let values: Vec<Vec3> = acc
        .iter()
        .zip(&row)
        .map(|(v, m)| if *m > 0.0 { scale(1.0 / m, v) } else { [0.0; 3] })
        .collect();
    TangentField { grid: Arc::clone(g), values }
}
