//! Probability densities on a grid and the free-energy functionals built on
//! them: momentum, alignment direction, Fisher-von Mises equilibria,
//! entropy, free energy, relative entropy, L1 distance and the metric slope.
//!
//! Densities are taken with respect to the quadrature measure, so the mass
//! of node `i` is `w_i rho_i`. Logarithms use the floor [`LOG_FLOOR`] so
//! that empty cells follow the `0 log 0 = 0` convention.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{axpy, dot, grad_raw, integrate, norm, scale, SphereGrid, TangentField, Vec3};

/// Values below this are clamped inside logarithms.
pub const LOG_FLOOR: f64 = 1e-300;
/// `|J|` below this makes the unregularised direction undefined.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;
/// Mass tolerance accepted by [`Density::new`].
pub const MASS_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Density {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl Density {
    /// Validates nonnegativity and unit mass.
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!("density value at node {i} is {}", values[i])));
        }
        let mass = integrate(&grid, &values);
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!("density has mass {mass}, expected 1")));
        }
        Ok(Self { grid, values })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: Arc<SphereGrid>, mut values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!("density value at node {i} is {}", values[i])));
        }
        let mass = integrate(&grid, &values);
        if !(mass > 0.0) {
            return Err(Error::domain("cannot normalise a density with zero mass"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { grid, values })
    }

    /// Builds a density from node masses `w_i rho_i` that already sum to one.
    pub(crate) fn from_masses(grid: Arc<SphereGrid>, masses: &[f64]) -> Self {
        let values = masses.iter().zip(&grid.weights).map(|(m, w)| m.max(0.0) / w).collect();
        Self { grid, values }
    }

    pub(crate) fn from_values_unchecked(grid: Arc<SphereGrid>, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn uniform(grid: Arc<SphereGrid>) -> Self {
        let v = 1.0 / grid.total_area();
        let n = grid.len();
        Self { grid, values: vec![v; n] }
    }

    /// All mass in cell `i`.
    pub fn point_mass(grid: Arc<SphereGrid>, i: usize) -> Result<Self> {
        if i >= grid.len() {
            return Err(Error::domain(format!("node {i} out of range")));
        }
        let mut values = vec![0.0; grid.len()];
        values[i] = 1.0 / grid.weights[i];
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.grid, &self.values)
    }

    /// Node masses `w_i rho_i`.
    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().zip(&self.grid.weights).map(|(v, w)| v * w).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_len(grid: &SphereGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::domain(format!(
            "density has {len} values but the grid has {} nodes",
            grid.len()
        )));
    }
    Ok(())
}

pub(crate) fn same_grid(a: &Density, b: &Density) -> Result<()> {
    if Arc::ptr_eq(&a.grid, &b.grid)
        || (a.grid.resolution == b.grid.resolution && a.grid.dim == b.grid.dim)
    {
        Ok(())
    } else {
        Err(Error::domain("densities live on different grids"))
    }
}

/// Regularisation parameter of the free energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyParams {
    pub epsilon: f64,
}

impl FreeEnergyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::config(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self { epsilon })
    }
}

#[inline]
fn safe_ln(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// `J = sum_i w_i rho_i omega_i`.
pub fn momentum(rho: &Density) -> Vec3 {
    let g = &rho.grid;
    let mut j = [0.0; 3];
    for ((v, w), x) in rho.values.iter().zip(&g.weights).zip(&g.nodes) {
        j = axpy(&j, v * w, x);
    }
    j
}

/// `J / sqrt(|J|^2 + eps)`.
pub fn omega_direction(rho: &Density, params: FreeEnergyParams) -> Result<Vec3> {
    direction_from_momentum(&momentum(rho), params.epsilon, 0.0)
}

pub(crate) fn direction_from_momentum(j: &Vec3, epsilon: f64, t: f64) -> Result<Vec3> {
    let n = norm(j);
    if epsilon == 0.0 && n < SINGULAR_THRESHOLD {
        return Err(Error::SingularMomentum { t, norm: n, threshold: SINGULAR_THRESHOLD });
    }
    Ok(scale(1.0 / (n * n + epsilon).sqrt(), j))
}

/// Grid-normalised `exp(omega . v)` for an arbitrary vector `v`.
pub fn gibbs_density(grid: &Arc<SphereGrid>, v: &Vec3) -> Density {
    let vals: Vec<f64> = grid.nodes.iter().map(|x| dot(x, v).exp()).collect();
    let z = integrate(grid, &vals);
    Density::from_values_unchecked(Arc::clone(grid), vals.into_iter().map(|e| e / z).collect())
}

/// Fisher-von Mises equilibrium `C_M exp(omega . Omega)` normalised on the grid.
pub fn fisher_von_mises(grid: &Arc<SphereGrid>, omega: &Vec3) -> Result<Density> {
    let n = norm(omega);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("Fisher-von Mises direction has norm {n}")));
    }
    Ok(gibbs_density(grid, omega))
}

/// Grid value of the normalising constant `C = 1 / sum_i w_i exp(omega_i . v)`.
pub fn gibbs_constant(grid: &SphereGrid, v: &Vec3) -> f64 {
    let z: f64 = grid.nodes.iter().zip(&grid.weights).map(|(x, w)| w * dot(x, v).exp()).sum();
    1.0 / z
}

/// `sum_i w_i rho_i log rho_i`.
pub fn entropy(rho: &Density) -> f64 {
    rho.values
        .iter()
        .zip(&rho.grid.weights)
        .map(|(v, w)| if *v > 0.0 { w * v * v.ln() } else { 0.0 })
        .sum()
}

/// `entropy - sqrt(|J|^2 + eps)`.
pub fn free_energy(rho: &Density, params: FreeEnergyParams) -> f64 {
    let j = momentum(rho);
    entropy(rho) - (dot(&j, &j) + params.epsilon).sqrt()
}

/// Kullback-Leibler divergence `sum_i w_i rho_i log(rho_i / m_i)`.
pub fn relative_entropy(rho: &Density, m: &Density) -> Result<f64> {
    same_grid(rho, m)?;
    if let Some(i) = m.values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::domain(format!("reference density vanishes at node {i}")));
    }
    Ok(rho
        .values
        .iter()
        .zip(&m.values)
        .zip(&rho.grid.weights)
        .map(|((r, q), w)| if *r > 0.0 { w * r * (r / q).ln() } else { 0.0 })
        .sum())
}

pub fn l1_distance(rho: &Density, sigma: &Density) -> Result<f64> {
    same_grid(rho, sigma)?;
    Ok(rho
        .values
        .iter()
        .zip(&sigma.values)
        .zip(&rho.grid.weights)
        .map(|((a, b), w)| w * (a - b).abs())
        .sum())
}

/// Alignment potential `V_i = omega_i . Omega^eps`.
pub fn alignment_potential(grid: &SphereGrid, omega: &Vec3) -> Vec<f64> {
    grid.nodes.iter().map(|x| dot(x, omega)).collect()
}

/// Chemical potential `log rho - omega . Omega^eps` (up to the constant 1).
pub fn chemical_potential(rho: &Density, params: FreeEnergyParams) -> Result<Vec<f64>> {
    let om = omega_direction(rho, params)?;
    Ok(rho
        .values
        .iter()
        .zip(&rho.grid.nodes)
        .map(|(v, x)| safe_ln(*v) - dot(x, &om))
        .collect())
}

/// Logarithmic mean `(x - y) / (ln x - ln y)`, zero if either argument is.
pub fn log_mean(x: f64, y: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    let r = y / x - 1.0;
    if r.abs() < 1e-4 {
        // Series of r / ln(1 + r) around r = 0.
        x * (1.0 + r / 2.0 - r * r / 12.0 + r * r * r / 24.0)
    } else {
        (x - y) / (x.ln() - y.ln())
    }
}

/// Interface density used by the exponentially fitted fluxes: with
/// `u = rho exp(-V)` it is `exp(V_a + V_b) L(u_a, u_b) / L(exp V_a, exp V_b)`
/// where `L` is the logarithmic mean. It reduces to `L(rho_a, rho_b)` when the
/// potential is flat.
pub(crate) fn interface_density(rho_a: f64, rho_b: f64, va: f64, vb: f64) -> f64 {
    let ua = rho_a * (-va).exp();
    let ub = rho_b * (-vb).exp();
    (va + vb).exp() * log_mean(ua, ub) / log_mean(va.exp(), vb.exp())
}

/// Metric slope of the free energy: `sqrt(sum_e T_e rho_e |xi_b - xi_a|^2)`
/// with `xi = log rho - omega . Omega^eps` and `rho_e` the interface density.
///
/// Its square is exactly the dissipation rate `-dE/dt` of the semi-discrete
/// finite-volume flow.
pub fn slope(rho: &Density, params: FreeEnergyParams) -> Result<f64> {
    let om = omega_direction(rho, params)?;
    Ok(slope_with_direction(rho, &om))
}

pub(crate) fn slope_with_direction(rho: &Density, om: &Vec3) -> f64 {
    let g = &rho.grid;
    let v = alignment_potential(g, om);
    let r = &rho.values;
    let mut s = 0.0;
    for e in &g.edges {
        let (a, b) = (e.a, e.b);
        let re = interface_density(r[a], r[b], v[a], v[b]);
        if re > 0.0 {
            let dxi = (safe_ln(r[b]) - v[b]) - (safe_ln(r[a]) - v[a]);
            s += e.transmissibility * re * dxi * dxi;
        }
    }
    s.sqrt()
}

/// Directional derivative of the free energy along the continuity-equation
/// push-forward by the tangent field `x`:
/// `sum_i w_i rho_i grad(log rho - omega . Omega^eps)_i . x_i`.
pub fn directional_derivative(rho: &Density, x: &TangentField, params: FreeEnergyParams) -> Result<f64> {
    if x.values.len() != rho.grid.len() {
        return Err(Error::domain("tangent field does not match the density grid"));
    }
    let xi = chemical_potential(rho, params)?;
    let g = grad_raw(&rho.grid, &xi);
    Ok(g.iter()
        .zip(&x.values)
        .zip(rho.values.iter().zip(&rho.grid.weights))
        .map(|((gi, xi), (r, w))| w * r * dot(gi, xi))
        .sum())
}

/// Linearised push-forward `rho - t div(rho x)`: a first-order transport of
/// mass along `x` that conserves total mass exactly.
pub fn transport_along(rho: &Density, x: &TangentField, t: f64) -> Result<Density> {
    if x.values.len() != rho.grid.len() {
        return Err(Error::domain("tangent field does not match the density grid"));
    }
    let flux: Vec<Vec3> = x.values.iter().zip(&rho.values).map(|(v, r)| scale(*r, v)).collect();
    let d = crate::sphere::div_raw(&rho.grid, &flux);
    let vals: Vec<f64> = rho.values.iter().zip(&d).map(|(r, dv)| r - t * dv).collect();
    if vals.iter().any(|v| *v < 0.0) {
        return Err(Error::domain("push-forward step too large: negative density"));
    }
    Ok(Density::from_values_unchecked(Arc::clone(&rho.grid), vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_grid, Resolution};

    fn sphere(nt: usize, np: usize) -> Arc<SphereGrid> {
        Arc::new(build_grid(3, Resolution::LatLon { n_theta: nt, n_phi: np }).unwrap())
    }

    #[test]
    fn uniform_has_zero_momentum_and_closed_form_entropy() {
        let g = sphere(16, 32);
        let u = Density::uniform(g);
        assert!(norm(&momentum(&u)) < 1e-14);
        assert!((entropy(&u) + (4.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn direction_examples() {
        let g = sphere(16, 32);
        let u = Density::uniform(g.clone());
        let p = FreeEnergyParams::new(0.25).unwrap();
        assert!(norm(&omega_direction(&u, p).unwrap()) < 1e-12);
        assert!(matches!(
            omega_direction(&u, FreeEnergyParams::new(0.0).unwrap()),
            Err(Error::SingularMomentum { .. })
        ));
        assert!(FreeEnergyParams::new(1.5).is_err());
    }

    #[test]
    fn log_mean_limits() {
        assert!((log_mean(2.0, 2.0) - 2.0).abs() < 1e-15);
        assert!((log_mean(1.0, std::f64::consts::E) - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        let a = log_mean(1.0, 1.0 + 1e-5);
        let b = 1e-5 / 1e-5f64.ln_1p();
        assert!((a - b).abs() < 1e-13);
        assert_eq!(log_mean(0.0, 3.0), 0.0);
    }

    #[test]
    fn interface_density_reduces_to_log_mean_without_potential() {
        assert!((interface_density(1.0, 3.0, 0.0, 0.0) - log_mean(1.0, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_has_zero_slope() {
        let g = sphere(16, 32);
        let m = fisher_von_mises(&g, &[0.0, 0.0, 1.0]).unwrap();
        assert!(slope(&m, FreeEnergyParams::new(0.0).unwrap()).unwrap() < 1e-12);
    }
}
