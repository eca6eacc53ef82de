//! Minimizing-movement (JKO) scheme for the regularised free energy:
//! `rho_n = argmin W_2^2(., rho_{n-1}) / (2 tau) + E^eps`.
//!
//! Each step alternates between freezing `Omega^eps` at the current iterate,
//! which turns the free energy into entropy plus the linear potential
//! `-omega . Omega^eps`, and solving the resulting convex problem with the
//! entropic transport cost. With `pi = diag(u) K diag(v)`, `K = exp(-C/gamma)`,
//! that problem is solved by the scaling iteration
//! `u = a / (K v)`, `v = prox(K^T u) / (K^T u)`, where the Kullback-Leibler
//! proximal map of the frozen energy has the closed form
//! `b = (q^(1) (w exp(V - 1))^s)^(1/(1+s))`, `s = 2 tau / gamma`.
//! Everything runs on dual potentials in the log domain.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{direction_from_momentum, free_energy, momentum, Density, FreeEnergyParams};
use crate::error::{Error, Result};
use crate::fpsolver::{diagnostics, TrajectoryRecord};
use crate::sphere::dot;
use crate::transport::{grid_cost, solve_entropic, solve_exact, OtConfig, OtMethod, TransportPlan, EXACT_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JkoConfig {
    pub tau: f64,
    pub epsilon: f64,
    /// Entropic transport used inside the step (`entropic_gamma`,
    /// `max_iters` and `tolerance` apply to the scaling iteration).
    pub inner: OtConfig,
    /// Stop once the objective changes by less than this between outer
    /// iterations.
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    /// Transport method for objective evaluations.
    pub objective_method: OtMethod,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            tau: 1e-2,
            epsilon: 1e-4,
            inner: OtConfig {
                method: OtMethod::Entropic,
                entropic_gamma: 1e-2,
                max_iters: 5_000,
                tolerance: 1e-10,
            },
            outer_tol: 1e-9,
            max_outer_iters: 30,
            objective_method: OtMethod::Exact,
        }
    }
}

impl JkoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::config("tau must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("the JKO scheme needs 0 < epsilon <= 1"));
        }
        if !(self.inner.entropic_gamma > 0.0) {
            return Err(Error::config("inner entropic_gamma must be positive"));
        }
        if self.max_outer_iters == 0 || !(self.outer_tol > 0.0) {
            return Err(Error::config("outer_tol and max_outer_iters must be positive"));
        }
        self.inner.validate()
    }

    pub fn params(&self) -> FreeEnergyParams {
        FreeEnergyParams { epsilon: self.epsilon }
    }
}

/// `W_2^2(sigma, rho_prev) / (2 tau) + E^eps(sigma)`.
pub fn jko_objective(sigma: &Density, rho_prev: &Density, config: &JkoConfig) -> Result<f64> {
    let w2 = step_distance(sigma, rho_prev, config)?;
    Ok(w2 * w2 / (2.0 * config.tau) + free_energy(sigma, config.params()))
}

fn step_distance(sigma: &Density, rho_prev: &Density, config: &JkoConfig) -> Result<f64> {
    step_plan(sigma, rho_prev, config).map(|r| r.1)
}

fn step_plan(sigma: &Density, rho_prev: &Density, config: &JkoConfig) -> Result<(TransportPlan, f64)> {
    let exact = config.objective_method == OtMethod::Exact && sigma.grid().len() <= EXACT_CAP;
    if exact {
        solve_exact(sigma, rho_prev)
    } else {
        let inner = OtConfig { method: OtMethod::Entropic, ..config.inner };
        solve_entropic(sigma, rho_prev, &inner)
    }
}

/// One outer iteration in the step log. `objective` is the regularised
/// objective that the iteration minimises.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OuterIterate {
    pub iteration: usize,
    pub objective: f64,
    pub scaling_iters: usize,
    pub marginal_residual: f64,
}

/// Result of [`jko_step_detailed`].
#[derive(Clone, Debug)]
pub struct JkoStep {
    pub density: Density,
    pub objective: f64,
    pub previous_energy: f64,
    pub w2: f64,
    pub log: Vec<OuterIterate>,
    /// Plan from the returned density to `rho_prev` used for `w2`.
    pub plan: TransportPlan,
    /// Regularised coupling of the final inner solve, oriented the same way.
    pub coupling: TransportPlan,
}

impl JkoStep {
    /// `objective - E(rho_prev)`; positive values mean the trivial
    /// competitor `rho_prev` beats the returned density.
    pub fn minimality_gap(&self) -> f64 {
        self.objective - self.previous_energy
    }
}

/// Dual potentials carried between steps as a warm start.
#[derive(Clone, Debug, Default)]
pub struct JkoWarmStart {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn lse(buf: &[f64]) -> f64 {
    let m = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + buf.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct ProxOutput {
    masses: Vec<f64>,
    iters: usize,
    change: f64,
    /// `<C, pi> + gamma sum pi (log pi - 1)` of the final coupling.
    reg_cost: f64,
    /// Coupling entries `(i, j, p)`, `i` indexing `rho_prev`.
    entries: Vec<(usize, usize, f64)>,
}

/// Solves the frozen-direction proximal problem for potential `v`.
fn prox_solve(
    a: &[f64],
    weights: &[f64],
    v: &[f64],
    cost: &crate::transport::CostMatrix,
    tau: f64,
    inner: &OtConfig,
    warm: &mut JkoWarmStart,
) -> ProxOutput {
    let n = a.len();
    let gamma = inner.entropic_gamma;
    let s = 2.0 * tau / gamma;
    if warm.alpha.len() != n {
        warm.alpha = vec![0.0; n];
        warm.beta = vec![0.0; n];
    }
    let rows: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
    let la: Vec<f64> = a.iter().map(|x| if *x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();
    // log of the proximal anchor w exp(V - 1)
    let lanchor: Vec<f64> = (0..n).map(|j| weights[j].ln() + v[j] - 1.0).collect();
    let mut lb = vec![0.0; n];
    let mut lb_prev = vec![f64::NEG_INFINITY; n];
    let mut buf = vec![0.0; n];
    let mut iters = 0;
    let mut change = f64::INFINITY;
    let (alpha, beta) = (&mut warm.alpha, &mut warm.beta);
    while iters < inner.max_iters {
        // Row update: exact first marginal.
        for &i in &rows {
            let row = cost.row(i);
            for j in 0..n {
                buf[j] = (beta[j] - row[j]) / gamma;
            }
            alpha[i] = gamma * (la[i] - lse(&buf));
        }
        // Column update through the proximal map.
        for j in 0..n {
            let mut k = 0;
            for &i in &rows {
                buf[k] = (alpha[i] - cost.get(i, j)) / gamma;
                k += 1;
            }
            let lq = lse(&buf[..k]);
            lb[j] = (lq + s * lanchor[j]) / (1.0 + s);
            beta[j] = gamma * (lb[j] - lq);
        }
        iters += 1;
        change = lb
            .iter()
            .zip(&lb_prev)
            .map(|(x, y)| (x.exp() - y.exp()).abs())
            .sum::<f64>();
        lb_prev.copy_from_slice(&lb);
        if change <= inner.tolerance {
            break;
        }
    }
    let mut reg_cost = 0.0;
    let mut entries = Vec::new();
    for &i in &rows {
        let row = cost.row(i);
        for j in 0..n {
            let lp = (alpha[i] + beta[j] - row[j]) / gamma;
            let p = lp.exp();
            if p > 0.0 {
                reg_cost += p * (row[j] + gamma * (lp - 1.0));
                if p > 1e-18 {
                    entries.push((i, j, p));
                }
            }
        }
    }
    let masses = lb.iter().map(|x| x.exp()).collect();
    ProxOutput { masses, iters, change, reg_cost, entries }
}

/// One JKO step; see [`jko_step_detailed`].
pub fn jko_step(rho_prev: &Density, config: &JkoConfig) -> Result<Density> {
    jko_step_detailed(rho_prev, config, &mut JkoWarmStart::default()).map(|s| s.density)
}

/// One JKO step with its outer-iteration log.
pub fn jko_step_detailed(
    rho_prev: &Density,
    config: &JkoConfig,
    warm: &mut JkoWarmStart,
) -> Result<JkoStep> {
    config.validate()?;
    let grid = Arc::clone(rho_prev.grid());
    let cost = grid_cost(&grid);
    let a = rho_prev.masses();
    let e_prev = free_energy(rho_prev, config.params());
    let mut sigma = rho_prev.clone();
    let mut log: Vec<OuterIterate> = Vec::new();
    let mut last_obj = f64::INFINITY;
    let mut converged = false;
    let mut entries = Vec::new();
    for it in 0..config.max_outer_iters {
        let om = direction_from_momentum(&momentum(&sigma), config.epsilon, 0.0)?;
        let v: Vec<f64> = grid.nodes.iter().map(|w| dot(w, &om)).collect();
        let out = prox_solve(&a, &grid.weights, &v, &cost, config.tau, &config.inner, warm);
        let total: f64 = out.masses.iter().sum();
        let masses: Vec<f64> = out.masses.iter().map(|x| x / total).collect();
        sigma = Density::from_masses(Arc::clone(&grid), &masses);
        entries = out.entries;
        let obj = out.reg_cost / (2.0 * config.tau) + free_energy(&sigma, config.params());
        log.push(OuterIterate {
            iteration: it,
            objective: obj,
            scaling_iters: out.iters,
            marginal_residual: out.change,
        });
        if (last_obj - obj).abs() < config.outer_tol {
            converged = true;
            break;
        }
        last_obj = obj;
    }
    if !converged {
        let k = log.len();
        return Err(Error::Iteration {
            what: "JKO outer iteration".into(),
            iters: k,
            residual: (log[k - 1].objective - log[k - 2].objective).abs(),
        });
    }
    let (plan, w2) = step_plan(&sigma, rho_prev, config)?;
    let objective = w2 * w2 / (2.0 * config.tau) + free_energy(&sigma, config.params());
    let total: f64 = entries.iter().map(|e| e.2).sum();
    let coupling = TransportPlan {
        source: sigma.clone(),
        target: rho_prev.clone(),
        entries: entries.into_iter().map(|(i, j, p)| (j, i, p / total)).collect(),
    };
    let density = sigma;
    Ok(JkoStep { density, objective, previous_energy: e_prev, w2, log, plan, coupling })
}

/// Per-step record of a JKO run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JkoStepLog {
    pub n: usize,
    pub t: f64,
    pub energy: f64,
    pub objective: f64,
    pub previous_energy: f64,
    /// `W_2(rho_n, rho_{n-1})` from the objective transport method.
    pub w2: f64,
    pub slope: f64,
    pub outer: Vec<OuterIterate>,
}

/// JKO trajectory: diagnostics at `t_n = n tau` plus the step log.
#[derive(Clone, Debug)]
pub struct JkoTrajectory {
    pub record: TrajectoryRecord,
    pub steps: Vec<JkoStepLog>,
    pub densities: Vec<Density>,
}

pub fn jko_run(rho0: &Density, t_end: f64, config: &JkoConfig) -> Result<JkoTrajectory> {
    config.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::config("t_end must be positive"));
    }
    let n_steps = (t_end / config.tau).round().max(1.0) as usize;
    let mut warm = JkoWarmStart::default();
    let mut rho = rho0.clone();
    let mut records = vec![diagnostics(rho0, config.epsilon, 0.0)];
    let mut steps = Vec::with_capacity(n_steps);
    let mut densities = vec![rho0.clone()];
    let mut max_inc = f64::NEG_INFINITY;
    let mut min_value = rho0.min_value();
    for n in 1..=n_steps {
        let st = jko_step_detailed(&rho, config, &mut warm)?;
        let t = n as f64 * config.tau;
        let d = diagnostics(&st.density, config.epsilon, t);
        max_inc = max_inc.max(d.energy - st.previous_energy);
        min_value = min_value.min(st.density.min_value());
        steps.push(JkoStepLog {
            n,
            t,
            energy: d.energy,
            objective: st.objective,
            previous_energy: st.previous_energy,
            w2: st.w2,
            slope: d.slope,
            outer: st.log,
        });
        records.push(d);
        rho = st.density;
        densities.push(rho.clone());
    }
    let record = TrajectoryRecord {
        dim: rho0.grid().dim,
        epsilon: config.epsilon,
        records,
        snapshots: Vec::new(),
        max_energy_increase: max_inc,
        min_value,
        steps: n_steps,
        final_density: rho,
    };
    Ok(JkoTrajectory { record, steps, densities })
}
