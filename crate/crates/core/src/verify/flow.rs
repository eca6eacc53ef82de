//! Checks on direct-solver trajectories.

use std::sync::Arc;

use super::constants::*;
use super::report::{lsq_line, lsq_slope, orders, ReportBuilder, VerificationReport};
use crate::density::{
    fisher_von_mises, gibbs_density, l1_distance, momentum, omega_direction, relative_entropy, Density,
    FreeEnergyParams,
};
use crate::error::Result;
use crate::fpsolver::{run, step, SolverConfig, TrajectoryRecord};
use crate::sphere::{norm, normalize, sub, SphereGrid};
use crate::transport::solve_exact;

/// `|J(t)|^2 >= |J_0|^2 exp(-2(d-1)t) (1 - slack)` at every record.
pub fn check_momentum_bound(traj: &TrajectoryRecord, slack: f64) -> VerificationReport {
    let d = traj.dim;
    let mut r = ReportBuilder::new(
        "momentum_bound",
        "momentum lower bound: |J(t)|^2 >= |J_0|^2 exp(-2(d-1) t) for all t > 0",
    );
    let rate = momentum_rate(d);
    let j0 = traj.initial().j_norm;
    r.bound("rate", rate, "2(d-1), momentum lower bound");
    r.bound("slack", slack, "discretisation allowance");
    let mut margin = f64::INFINITY;
    for rec in &traj.records {
        let floor = j0 * j0 * (-rate * rec.t).exp();
        margin = margin.min((rec.j_norm * rec.j_norm - floor * (1.0 - slack)) / floor);
    }
    let jt = traj.last().j_norm;
    r.measure("j0", j0).measure("j_final", jt).measure("records", traj.records.len() as f64);
    r.measure("min_relative_gap", margin);
    r.finish(margin, 0.0)
}

/// Heat-flow control: without drift the bound is an equality.
pub fn check_pure_diffusion_equality(traj: &TrajectoryRecord, tol: f64) -> VerificationReport {
    let mut r = ReportBuilder::new(
        "pure_diffusion_equality",
        "momentum lower bound is attained by the heat flow, |J(t)|^2 = |J_0|^2 exp(-2(d-1) t)",
    );
    let rate = momentum_rate(traj.dim);
    let j0 = traj.initial().j_norm;
    r.bound("rate", rate, "2(d-1), first spherical-harmonic eigenvalue");
    r.bound("relative_tolerance", tol, "equality case within 1%");
    let worst = traj
        .records
        .iter()
        .map(|rec| (rec.j_norm * rec.j_norm / (j0 * j0 * (-rate * rec.t).exp()) - 1.0).abs())
        .fold(0.0, f64::max);
    r.measure("max_relative_deviation", worst);
    r.finish(tol - worst, 0.0)
}

/// `H(rho(t) | M_{Omega(t)}) <= exp(-C_1 t) H_0 + atol (+ sqrt(eps))` and a
/// fitted decay rate at most `-C_1` on `t >= 1`.
pub fn check_entropy_decay(traj: &TrajectoryRecord, atol: f64) -> VerificationReport {
    let d = traj.dim;
    let mut r = ReportBuilder::new(
        "entropy_decay",
        "entropy decay: H(rho(t)|M) <= exp(-2(d-2) t / e^2) H_0 (+ sqrt(eps) when regularised), d >= 3",
    );
    if d < 3 {
        return r.not_applicable("the decay rate requires d >= 3");
    }
    let c1 = entropy_rate(d);
    let extra = traj.epsilon.sqrt();
    r.bound("c1", c1, "2(d-2)/e^2");
    r.bound("atol", atol, "absolute tolerance");
    r.bound("sqrt_eps", extra, "regularisation slack");
    let h0 = traj.initial().rel_entropy;
    let mut margin = f64::INFINITY;
    for rec in &traj.records {
        let b = (-c1 * rec.t).exp() * h0 + atol + extra;
        margin = margin.min(b - rec.rel_entropy);
    }
    // fitted rate where H is above round-off
    let (ts, ls): (Vec<f64>, Vec<f64>) = traj
        .records
        .iter()
        .filter(|x| x.t >= 1.0 && x.rel_entropy > 1e-13)
        .map(|x| (x.t, x.rel_entropy.ln()))
        .unzip();
    let rate = lsq_slope(&ts, &ls);
    r.measure("h0", h0).measure("h_final", traj.last().rel_entropy).measure("fitted_rate", rate);
    r.measure("fit_points", ts.len() as f64);
    let rate_margin = if traj.epsilon == 0.0 { -c1 - rate } else { f64::INFINITY };
    r.measure("bound_margin", margin).measure("rate_margin", rate_margin);
    r.finish(margin.min(rate_margin), 0.0)
}

/// `||rho(t) - M_{Omega_inf}||_1 <= C exp(-C_1 t)` for `t >= 1` with `C`
/// fitted at `t = 0` and `Omega_inf` from the final state; likewise for
/// `|J(t) - J(t_end)|`. Needs snapshots.
pub fn check_l1_convergence(traj: &TrajectoryRecord) -> VerificationReport {
    let d = traj.dim;
    let mut r = ReportBuilder::new(
        "l1_convergence",
        "convergence to steady state: ||rho(t) - M_{Omega_inf}||_1 <= C exp(-2(d-2) t / e^2)",
    );
    if traj.snapshots.is_empty() {
        return r.not_applicable("trajectory has no snapshots");
    }
    if d < 3 {
        return r.not_applicable("the decay rate requires d >= 3");
    }
    let c1 = entropy_rate(d);
    r.bound("c1", c1, "2(d-2)/e^2");
    let jend = traj.last().j;
    let om_inf = normalize(&jend);
    let m_inf = match fisher_von_mises(traj.final_density.grid(), &om_inf) {
        Ok(m) => m,
        Err(e) => return r.not_applicable(format!("no limiting direction: {e}")),
    };
    let dist: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|(t, rho)| (*t, l1_distance(rho, &m_inf).unwrap_or(f64::NAN)))
        .collect();
    let c = dist[0].1;
    let mut margin = f64::INFINITY;
    for (t, l1) in dist.iter().filter(|x| x.0 >= 1.0) {
        margin = margin.min(c * (-c1 * t).exp() - l1);
    }
    let jc = norm(&sub(&traj.initial().j, &jend));
    let mut jmargin = f64::INFINITY;
    for rec in traj.records.iter().filter(|x| x.t >= 1.0) {
        jmargin = jmargin.min(jc * (-c1 * rec.t).exp() - norm(&sub(&rec.j, &jend)));
    }
    let (ts, ls): (Vec<f64>, Vec<f64>) = dist.iter().filter(|x| x.0 >= 1.0 && x.1 > 1e-12).map(|x| (x.0, x.1.ln())).unzip();
    r.measure("c_fitted", c).measure("l1_final", dist[dist.len() - 1].1);
    r.measure("fitted_rate", lsq_slope(&ts, &ls));
    r.measure("l1_margin", margin).measure("momentum_margin", jmargin);
    let (tj, lj): (Vec<f64>, Vec<f64>) = traj
        .records
        .iter()
        .filter(|x| x.t >= 1.0)
        .map(|x| (x.t, norm(&sub(&x.j, &jend))))
        .filter(|x| x.1 > 1e-13)
        .map(|x| (x.0, x.1.ln()))
        .unzip();
    r.measure("momentum_fitted_rate", lsq_slope(&tj, &lj));
    r.finish(margin.min(jmargin), 0.0)
}

/// `min |J(t)|` stays above the continuity floor `|J_0| exp(-(d-1) t_end)`
/// and above the fitted approach to the equilibrium momentum.
pub fn check_momentum_positivity(traj: &TrajectoryRecord, slack: f64, control: bool) -> VerificationReport {
    let d = traj.dim;
    let check = if control { "control_pure_diffusion_positivity" } else { "momentum_positivity" };
    let mut r = ReportBuilder::new(check, "momentum positivity: |J_rho(t)| > C(rho_0) > 0 for all t");
    if control {
        r = r.control();
    }
    let grid = traj.final_density.grid();
    let jm = match d {
        3 => equilibrium_momentum_s2(),
        _ => norm(&momentum(&gibbs_density(grid, &[1.0, 0.0, 0.0]))),
    };
    let j0 = traj.initial().j_norm;
    let t_end = traj.last().t;
    let floor = j0 * (-(d as f64 - 1.0) * t_end).exp();
    r.bound("continuity_floor", floor, "|J_0| exp(-(d-1) t_end), momentum ODE");
    r.bound("equilibrium_momentum", jm, "momentum of the Fisher-von Mises equilibrium");
    // fit |J| = jm - A exp(-k t) on t >= 1
    let pts: Vec<(f64, f64)> = traj.records.iter().filter(|x| x.t >= 1.0).map(|x| (x.t, jm - x.j_norm)).collect();
    let signed: Vec<(f64, f64)> = pts.iter().filter(|p| p.1.abs() > 1e-13).copied().collect();
    let (ts, ls): (Vec<f64>, Vec<f64>) = signed.iter().map(|p| (p.0, p.1.abs().ln())).unzip();
    let (a, b) = if ts.len() >= 2 { lsq_line(&ts, &ls) } else { (f64::NEG_INFINITY, -1.0) };
    let k = -b;
    let sign = if signed.iter().map(|p| p.1).sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
    let r_fit = (jm - sign * (a - k).exp()).min(jm) * (1.0 - slack);
    r.measure("fitted_transient_rate", k).measure("r_fit", r_fit);
    let min_all = traj.records.iter().map(|x| x.j_norm).fold(f64::INFINITY, f64::min);
    let min_late = pts.iter().map(|p| jm - p.1).fold(f64::INFINITY, f64::min);
    r.measure("min_j", min_all).measure("min_j_after_1", min_late).measure("j0", j0);
    let margin = if k > 0.0 && r_fit > 0.0 {
        (min_all - floor * (1.0 - slack)).min(min_late - r_fit)
    } else {
        r.note("no decaying transient towards the equilibrium momentum was found");
        -1.0
    };
    r.finish(margin, 0.0)
}

fn paired_run(a: &Density, b: &Density, cfg: &SolverConfig) -> Result<(TrajectoryRecord, TrajectoryRecord, Vec<(f64, f64)>)> {
    let cfg = SolverConfig { snapshots: true, ..cfg.clone() };
    let ta = run(a, &cfg)?;
    let tb = run(b, &cfg)?;
    let mut w = Vec::with_capacity(ta.snapshots.len());
    for ((t, x), (_, y)) in ta.snapshots.iter().zip(&tb.snapshots) {
        w.push((*t, solve_exact(x, y)?.1));
    }
    Ok((ta, tb, w))
}

/// Local stability for `epsilon = 0`: inside the closeness radius,
/// `W_2(t) <= exp(lambda t) W_2(0) (1 + slack)` for `t < delta`.
pub fn check_stability(
    rho0: &Density,
    rhobar0: &Density,
    horizon: f64,
    cfg: &SolverConfig,
    slack: f64,
) -> Result<(VerificationReport, Vec<TrajectoryRecord>)> {
    let d = rho0.grid().dim;
    let mut r = ReportBuilder::new(
        "stability",
        "local stability: W_2(rho(t), rhobar(t)) <= exp(lambda t) W_2(rho_0, rhobar_0), lambda = 1 + 2/|J_0| - (d-2), for t < delta",
    );
    let j0 = norm(&momentum(rho0));
    let w0 = solve_exact(rho0, rhobar0)?.1;
    let (radius, quadratic) = closeness_radius(j0);
    let h_of = |rho: &Density| -> Result<f64> {
        let om = omega_direction(rho, FreeEnergyParams { epsilon: 0.0 })?;
        relative_entropy(rho, &fisher_von_mises(rho.grid(), &om)?)
    };
    let hmax = h_of(rho0)?.max(h_of(rhobar0)?);
    let lambda = lambda_stability(j0, d);
    let delta = stability_window(j0, hmax);
    r.bound("lambda", lambda, "1 + 2/|J_0| - (d-2)");
    r.bound("closeness_radius", radius, "min(|J_0|, |J_0|^2)/16");
    r.bound("delta", delta, "|J_0|^4 / (2^8 max H(rho_0|M))");
    r.bound("slack", slack, "discretisation allowance");
    r.measure("j0", j0).measure("w0", w0).measure("max_h0", hmax);
    r.note(if quadratic { "closeness radius bound by |J_0|^2" } else { "closeness radius bound by |J_0|" });
    if w0 > radius {
        return Ok((r.not_applicable(format!("W_2(rho_0, rhobar_0) = {w0:.3e} exceeds the closeness radius")), vec![]));
    }
    let window = delta.min(horizon);
    let steps = (window / cfg.dt).floor() as usize;
    if steps == 0 {
        return Ok((r.not_applicable("stability window shorter than one time step"), vec![]));
    }
    let cfg = SolverConfig {
        epsilon: 0.0,
        t_end: steps as f64 * cfg.dt,
        record_every: (steps / 12).max(1),
        ..cfg.clone()
    };
    let (ta, tb, w) = paired_run(rho0, rhobar0, &cfg)?;
    let mut margin = f64::INFINITY;
    for (t, wt) in &w {
        let b = (lambda * t).exp() * w0 * (1.0 + slack);
        margin = margin.min((b - wt) / b.max(1e-300));
    }
    r.measure("window", window).measure("pairs", w.len() as f64);
    r.measure("w_final", w.last().map_or(f64::NAN, |x| x.1));
    Ok((r.finish(margin, 0.0), vec![ta, tb]))
}

/// Global contraction for `epsilon > 0`: `W_2(t) <= exp(lambda(eps) t) W_2(0) (1 + slack)`.
pub fn check_epsilon_contraction(
    rho0: &Density,
    rhobar0: &Density,
    cfg: &SolverConfig,
    slack: f64,
) -> Result<(VerificationReport, Vec<TrajectoryRecord>)> {
    let d = rho0.grid().dim;
    let mut r = ReportBuilder::new(
        "epsilon_contraction",
        "uniqueness for the regularised flow: W_2(t) <= exp(lambda t) W_2(0), lambda = (1 + eps^{-1/2}) - (d-2)",
    );
    let lambda = lambda_epsilon(cfg.epsilon, d);
    r.bound("lambda", lambda, "(1 + eps^{-1/2}) - (d-2)");
    r.bound("slack", slack, "discretisation allowance");
    let (ta, tb, w) = paired_run(rho0, rhobar0, cfg)?;
    let w0 = w[0].1;
    let mut margin = f64::INFINITY;
    for (t, wt) in &w {
        let b = (lambda * t).exp() * w0 * (1.0 + slack);
        margin = margin.min((b - wt) / b.max(1e-300));
    }
    r.measure("epsilon", cfg.epsilon).measure("w0", w0).measure("pairs", w.len() as f64);
    r.measure("w_final", w.last().map_or(f64::NAN, |x| x.1));
    r.measure("max_ratio_w_over_w0", w.iter().map(|x| x.1 / w0).fold(0.0, f64::max));
    Ok((r.finish(margin, 0.0), vec![ta, tb]))
}

/// One step from `M_Omega` changes the density by `O(dt h^2)`.
pub fn check_stationarity(grids: &[Arc<SphereGrid>], omega: &[f64; 3], cfg: &SolverConfig) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "stationarity",
        "the Fisher-von Mises distributions are the equilibrium states",
    );
    let om = normalize(omega);
    let mut cs = Vec::new();
    let cfg = SolverConfig { epsilon: 0.0, ..cfg.clone() };
    for g in grids {
        let m = fisher_von_mises(g, &om)?;
        let next = step(&m, &cfg)?;
        let res = l1_distance(&next, &m)?;
        let h = g.mesh_width();
        let c = res / (cfg.dt * h * h);
        r.measure(format!("residual_{}", g.len()), res);
        r.measure(format!("c_{}", g.len()), c);
        cs.push(c);
    }
    let cmax = cs.iter().copied().fold(0.0, f64::max);
    let cbound = 1.0;
    r.bound("c_max", cbound, "O(dt h^2) residual constant");
    r.note("the Scharfetter-Gummel flux vanishes identically on Gibbs states, so residuals reflect only the grid momentum direction");
    Ok(r.finish(cbound - cmax, 0.0))
}

/// `|dE/dt + slope^2| / slope^2` along a trajectory by central differences.
pub fn dissipation_mismatch(traj: &TrajectoryRecord) -> f64 {
    let rec = &traj.records;
    let mut worst: f64 = 0.0;
    for k in 1..rec.len().saturating_sub(1) {
        let dt = rec[k + 1].t - rec[k - 1].t;
        let de = (rec[k + 1].energy - rec[k - 1].energy) / dt;
        let s2 = rec[k].slope * rec[k].slope;
        if s2 > 1e-6 {
            worst = worst.max((de + s2).abs() / s2);
        }
    }
    worst
}

/// Refinement orders of `| |J_{M_Omega}| - 2e^{-1}/(e - e^{-1}) |` on S^2.
pub fn check_jm_quadrature(grids: &[Arc<SphereGrid>], omega: &[f64; 3]) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "jm_quadrature",
        "explicit momentum of the equilibrium: |J_{M_Omega}| = 2 e^{-1} / (e - e^{-1}) on S^2",
    );
    let exact = equilibrium_momentum_s2();
    r.bound("j_m", exact, "2 e^{-1}/(e - e^{-1})");
    r.bound("min_order", 2.0, "second-order quadrature");
    r.bound("finest_error", 1e-5, "absolute error at 64x128");
    let om = normalize(omega);
    let mut h = Vec::new();
    let mut err = Vec::new();
    for g in grids {
        let m = fisher_von_mises(g, &om)?;
        let e = (norm(&momentum(&m)) - exact).abs();
        r.measure(format!("error_{}", g.len()), e);
        let cm = crate::density::gibbs_constant(g, &om);
        r.measure(format!("normalizer_error_{}", g.len()), (cm - normalizer_s2()).abs());
        h.push(g.mesh_width());
        err.push(e);
    }
    let ord = orders(&h, &err);
    let min_order = ord.iter().copied().fold(f64::INFINITY, f64::min);
    r.measure("min_order", min_order);
    let finest = *err.last().unwrap_or(&f64::NAN);
    Ok(r.finish((min_order - 2.0).min((1e-5 - finest) / 1e-5), 0.0))
}

pub(crate) fn max_mass_drift(traj: &TrajectoryRecord) -> f64 {
    traj.records.iter().map(|x| (x.mass - 1.0).abs()).fold(0.0, f64::max)
}
