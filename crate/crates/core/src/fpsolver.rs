//! Finite-volume integration of the (regularised) Kolmogorov-Vicsek
//! Fokker-Planck equation.
//!
//! Fluxes are exponentially fitted (Scharfetter-Gummel): across an edge with
//! potential jump `delta = V_b - V_a`, `V = omega . Omega^eps`, the flux from
//! `a` to `b` is `T_e [B(-delta) rho_a - B(delta) rho_b]` with the Bernoulli
//! function `B(x) = x / (e^x - 1)`. This is the upwinded advection-diffusion
//! flux with an exact exponential profile along the edge: it is positive,
//! telescopes (mass is exact), and annihilates `exp(V)`, so Fisher-von Mises
//! states are discrete equilibria. The drift direction is frozen during a
//! step, which in turn makes every step a Markov transition that lowers the
//! free energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{
    direction_from_momentum, entropy, free_energy, gibbs_density, l1_distance, momentum,
    relative_entropy, slope_with_direction, Density, FreeEnergyParams,
};
use crate::error::{Error, Result};
use crate::sphere::{dot, norm, project_tangent, SphereGrid, TangentField, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Forward Euler under the CFL restriction.
    Explicit,
    /// Backward Euler with the drift direction frozen, solved by conjugate
    /// gradients to a relative residual of 1e-12.
    SemiImplicitDiffusion,
    /// Exact exponential of the frozen-direction generator by uniformisation.
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// `epsilon = 0` runs abort when `|J|` drops below this.
    pub momentum_guard: f64,
    /// Diagnostics are recorded every this many steps (and at the end).
    pub record_every: usize,
    /// Keep a density snapshot at every record.
    pub snapshots: bool,
    /// Alignment force on; off gives the pure heat flow.
    pub drift: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            dt: 5e-4,
            t_end: 5.0,
            scheme: Scheme::Exponential,
            momentum_guard: 1e-8,
            record_every: 20,
            snapshots: false,
            drift: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, grid: &SphereGrid) -> Result<()> {
        FreeEnergyParams::new(self.epsilon)?;
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || !self.dt.is_finite() || !self.t_end.is_finite() {
            return Err(Error::config("dt and t_end must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every must be at least 1"));
        }
        if !(self.momentum_guard >= 0.0) {
            return Err(Error::config("momentum_guard must be nonnegative"));
        }
        if self.scheme == Scheme::Explicit {
            let bound = cfl_bound(grid);
            if self.dt > bound {
                return Err(Error::config(format!(
                    "dt = {} exceeds the explicit CFL bound {bound:.3e}",
                    self.dt
                )));
            }
        }
        Ok(())
    }

    fn params(&self) -> FreeEnergyParams {
        FreeEnergyParams { epsilon: self.epsilon }
    }
}

/// `0.4 min(h^2 / 2, h / max|drift|)` with `h` the smallest centre spacing
/// and the drift bounded by 1.
pub fn cfl_bound(grid: &SphereGrid) -> f64 {
    let h = grid.min_spacing();
    0.4 * (h * h / 2.0).min(h)
}

/// One row of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub j: Vec3,
    pub j_norm: f64,
    pub energy: f64,
    pub rel_entropy: f64,
    pub l1_to_m: f64,
    pub slope: f64,
}

/// Diagnostics time series emitted by either solver.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub epsilon: f64,
    pub records: Vec<Diagnostics>,
    pub snapshots: Vec<(f64, Density)>,
    /// Largest step-to-step increase of the free energy.
    pub max_energy_increase: f64,
    /// Smallest node value seen over all steps.
    pub min_value: f64,
    pub steps: usize,
    pub final_density: Density,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn initial(&self) -> &Diagnostics {
        &self.records[0]
    }

    pub fn last(&self) -> &Diagnostics {
        self.records.last().expect("trajectories hold at least one record")
    }
}

/// Evaluates every diagnostic at one density. Quantities that need the
/// direction are NaN when the momentum vanishes and `epsilon = 0`.
pub fn diagnostics(rho: &Density, epsilon: f64, t: f64) -> Diagnostics {
    let j = momentum(rho);
    let params = FreeEnergyParams { epsilon };
    let energy = free_energy(rho, params);
    let (h, l1, s) = match direction_from_momentum(&j, epsilon, t) {
        Ok(om) => {
            let m = gibbs_density(rho.grid(), &om);
            (
                relative_entropy(rho, &m).unwrap_or(f64::NAN),
                l1_distance(rho, &m).unwrap_or(f64::NAN),
                slope_with_direction(rho, &om),
            )
        }
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };
    Diagnostics { t, mass: rho.mass(), j, j_norm: norm(&j), energy, rel_entropy: h, l1_to_m: l1, slope: s }
}

/// `P_{w^perp} Omega^eps` at every node.
pub fn drift_field(rho: &Density, epsilon: f64) -> Result<TangentField> {
    let om = direction_from_momentum(&momentum(rho), epsilon, 0.0)?;
    let g = rho.grid();
    let values = g.nodes.iter().map(|w| project_tangent(w, &om)).collect();
    Ok(TangentField { grid: Arc::clone(g), values })
}

/// `B(x) = x / (e^x - 1)`.
#[inline]
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x / 2.0 + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// Mass-transfer rates of the frozen-direction generator.
struct Generator {
    /// Per edge: rate a->b per unit mass at a, rate b->a per unit mass at b.
    rates: Vec<(usize, usize, f64, f64)>,
    /// Total outflow rate per node.
    out: Vec<f64>,
    /// Symmetrised edge conductance `T_e c_e` in the variable `u = rho e^{-V}`.
    conductance: Vec<f64>,
    expv: Vec<f64>,
}

impl Generator {
    fn new(grid: &SphereGrid, v: &[f64]) -> Self {
        let mut rates = Vec::with_capacity(grid.edges.len());
        let mut out = vec![0.0; grid.len()];
        let mut conductance = Vec::with_capacity(grid.edges.len());
        let expv: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        for e in &grid.edges {
            let d = v[e.b] - v[e.a];
            let kab = e.transmissibility * bernoulli(-d) / grid.weights[e.a];
            let kba = e.transmissibility * bernoulli(d) / grid.weights[e.b];
            out[e.a] += kab;
            out[e.b] += kba;
            rates.push((e.a, e.b, kab, kba));
            conductance.push(e.transmissibility * bernoulli(-d) * expv[e.a]);
        }
        Self { rates, out, conductance, expv }
    }

    /// `dm/dt` for node masses `m`.
    fn apply(&self, m: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &(a, b, kab, kba) in &self.rates {
            let f = kab * m[a] - kba * m[b];
            out[a] -= f;
            out[b] += f;
        }
    }

    fn max_rate(&self) -> f64 {
        self.out.iter().copied().fold(0.0, f64::max)
    }
}

fn potential(grid: &SphereGrid, om: &Vec3) -> Vec<f64> {
    grid.nodes.iter().map(|w| dot(w, om)).collect()
}

/// Integrator state for one trajectory.
pub struct Stepper {
    grid: Arc<SphereGrid>,
    config: SolverConfig,
    masses: Vec<f64>,
    t: f64,
    work: Vec<f64>,
}

impl Stepper {
    pub fn new(rho0: &Density, config: &SolverConfig) -> Result<Self> {
        config.validate(rho0.grid())?;
        Ok(Self {
            grid: Arc::clone(rho0.grid()),
            config: config.clone(),
            masses: rho0.masses(),
            t: 0.0,
            work: vec![0.0; rho0.grid().len()],
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> Density {
        Density::from_masses(Arc::clone(&self.grid), &self.masses)
    }

    fn direction(&self) -> Result<Vec3> {
        let g = &self.grid;
        let mut j = [0.0; 3];
        for (m, w) in self.masses.iter().zip(&g.nodes) {
            j = crate::sphere::axpy(&j, *m, w);
        }
        if self.config.epsilon == 0.0 && norm(&j) < self.config.momentum_guard {
            return Err(Error::SingularMomentum {
                t: self.t,
                norm: norm(&j),
                threshold: self.config.momentum_guard,
            });
        }
        direction_from_momentum(&j, self.config.epsilon, self.t)
    }

    /// Advances by `dt`.
    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        let v = if self.config.drift {
            let om = self.direction()?;
            potential(&self.grid, &om)
        } else {
            vec![0.0; self.grid.len()]
        };
        let gen = Generator::new(&self.grid, &v);
        match self.config.scheme {
            Scheme::Explicit => self.explicit(&gen, dt),
            Scheme::Exponential => self.exponential(&gen, dt),
            Scheme::SemiImplicitDiffusion => self.implicit(&gen, dt)?,
        }
        self.t += dt;
        Ok(())
    }

    fn explicit(&mut self, gen: &Generator, dt: f64) {
        gen.apply(&self.masses, &mut self.work);
        for (m, d) in self.masses.iter_mut().zip(&self.work) {
            *m = (*m + dt * d).max(0.0);
        }
    }

    fn exponential(&mut self, gen: &Generator, dt: f64) {
        let c = gen.max_rate();
        if c == 0.0 {
            return;
        }
        let total = c * dt;
        let nsub = (total / 30.0).ceil().max(1.0) as usize;
        let lam = total / nsub as f64;
        let n = self.masses.len();
        let mut term = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..nsub {
            term.copy_from_slice(&self.masses);
            let mut wk = (-lam).exp();
            let mut wsum = wk;
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a = wk * t);
            let mut k = 0usize;
            // Past the mode the Poisson weights decay geometrically; stop once
            // they fall below rounding.
            while (k as f64) < lam || wk > 1e-18 * wsum {
                gen.apply(&term, &mut self.work);
                for (t, d) in term.iter_mut().zip(&self.work) {
                    *t += d / c;
                }
                k += 1;
                wk *= lam / k as f64;
                wsum += wk;
                acc.iter_mut().zip(&term).for_each(|(a, t)| *a += wk * t);
                if k > 10_000 {
                    break;
                }
            }
            let mass_before: f64 = self.masses.iter().sum();
            let mass_after: f64 = acc.iter().map(|x| x.max(0.0)).sum();
            for (m, a) in self.masses.iter_mut().zip(&acc) {
                *m = a.max(0.0) * mass_before / mass_after;
            }
        }
    }

    /// Backward Euler in `u = rho e^{-V}`: `(diag(w e^V) + dt L) u' = m`,
    /// with `L` the weighted graph Laplacian of the edge conductances.
    fn implicit(&mut self, gen: &Generator, dt: f64) -> Result<()> {
        let g = &self.grid;
        let n = g.len();
        let diag: Vec<f64> = (0..n).map(|i| g.weights[i] * gen.expv[i]).collect();
        let apply = |u: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = diag[i] * u[i];
            }
            for (k, e) in g.edges.iter().enumerate() {
                let f = dt * gen.conductance[k] * (u[e.a] - u[e.b]);
                out[e.a] += f;
                out[e.b] -= f;
            }
        };
        let mut jac = vec![0.0; n];
        for i in 0..n {
            jac[i] = diag[i];
        }
        for (k, e) in g.edges.iter().enumerate() {
            jac[e.a] += dt * gen.conductance[k];
            jac[e.b] += dt * gen.conductance[k];
        }
        let rhs = self.masses.clone();
        let mut u: Vec<f64> = (0..n).map(|i| rhs[i] / diag[i]).collect();
        let mut au = vec![0.0; n];
        apply(&u, &mut au);
        let mut r: Vec<f64> = (0..n).map(|i| rhs[i] - au[i]).collect();
        let mut z: Vec<f64> = (0..n).map(|i| r[i] / jac[i]).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let bnorm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut ap = vec![0.0; n];
        let mut it = 0;
        loop {
            let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rn <= 1e-12 * bnorm {
                break;
            }
            if it >= 10 * n + 100 {
                return Err(Error::Iteration { what: "conjugate gradients".into(), iters: it, residual: rn / bnorm });
            }
            apply(&p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                u[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] / jac[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            it += 1;
        }
        let mass_before: f64 = self.masses.iter().sum();
        let new: Vec<f64> = (0..n).map(|i| (diag[i] * u[i]).max(0.0)).collect();
        let mass_after: f64 = new.iter().sum();
        for (m, x) in self.masses.iter_mut().zip(&new) {
            *m = x * mass_before / mass_after;
        }
        Ok(())
    }
}

/// One step of length `config.dt`.
pub fn step(rho: &Density, config: &SolverConfig) -> Result<Density> {
    let mut s = Stepper::new(rho, config)?;
    s.step_by(config.dt)?;
    Ok(s.density())
}

/// Integrates from `rho0` to `config.t_end`.
pub fn run(rho0: &Density, config: &SolverConfig) -> Result<TrajectoryRecord> {
    let mut s = Stepper::new(rho0, config)?;
    if config.drift && config.epsilon == 0.0 {
        // The unregularised flow needs a nonzero initial momentum.
        s.direction()?;
    }
    let params = config.params();
    let nsteps = (config.t_end / config.dt).round().max(1.0) as usize;
    let mut records = vec![diagnostics(rho0, config.epsilon, 0.0)];
    let mut snapshots = Vec::new();
    if config.snapshots {
        snapshots.push((0.0, rho0.clone()));
    }
    let mut e_prev = free_energy(rho0, params);
    let mut max_inc = f64::NEG_INFINITY;
    let mut min_value = rho0.min_value();
    for k in 1..=nsteps {
        s.step_by(config.dt)?;
        let t = k as f64 * config.dt;
        s.t = t;
        let rho = s.density();
        let e = entropy(&rho) - {
            let j = momentum(&rho);
            (dot(&j, &j) + config.epsilon).sqrt()
        };
        max_inc = max_inc.max(e - e_prev);
        e_prev = e;
        min_value = min_value.min(rho.min_value());
        if k % config.record_every == 0 || k == nsteps {
            records.push(diagnostics(&rho, config.epsilon, t));
            if config.snapshots {
                snapshots.push((t, rho));
            }
        }
    }
    Ok(TrajectoryRecord {
        dim: rho0.grid().dim,
        epsilon: config.epsilon,
        records,
        snapshots,
        max_energy_increase: max_inc,
        min_value,
        steps: nsteps,
        final_density: s.density(),
    })
}
