//! Checks of the minimizing-movement scheme against its a priori estimates
//! and against the direct solver.

use super::constants::STEP_SUM_CONSTANT;
use super::report::{ReportBuilder, VerificationReport};
use crate::density::{chemical_potential, slope, Density, FreeEnergyParams};
use crate::error::Result;
use crate::fpsolver::{run, SolverConfig};
use crate::jko::{jko_run, jko_step_detailed, JkoConfig, JkoTrajectory, JkoWarmStart};
use crate::sphere::{grad, TangentField};
use crate::transport::{barycentric_map, solve_exact, TransportPlan};

/// Most indices used for the all-pairs equicontinuity test per run.
const EQUICONT_POINTS: usize = 11;

/// Energy monotonicity, the step-sum estimates with the stated constants,
/// minimality against the previous iterate, and contraction of the gap to
/// the direct solver as `tau` is halved.
pub fn check_jko_consistency(
    rho0: &Density,
    taus: &[f64],
    t_end: f64,
    base: &JkoConfig,
    direct: &SolverConfig,
) -> Result<(VerificationReport, Vec<JkoTrajectory>)> {
    let mut r = ReportBuilder::new(
        "jko_consistency",
        "minimizing movements: (1/2) sum W^2/tau + (tau/2) sum |grad E|^2 <= E(rho_n) - E(rho_m), sum W^2/tau <= 2(E(rho_0) + sqrt 2), W(rho(t), rho(s)) <= sqrt(2(E(rho_0) + sqrt 2)(t - s + tau))",
    );
    let p = FreeEnergyParams { epsilon: base.epsilon };
    let e0 = crate::density::free_energy(rho0, p);
    let c = e0 + STEP_SUM_CONSTANT;
    r.bound("step_sum", 2.0 * c, "2(E(rho_0) + sqrt 2)");
    r.bound("telescoping_tolerance_per_step", 1e-6, "per-step allowance");
    r.bound("contraction_factor", 0.75, "gap reduction when tau is halved");
    r.measure("e0", e0).measure("e0_plus_sqrt2", c);
    if c < 0.0 {
        r.note("E(rho_0) + sqrt 2 < 0: the step-sum and equicontinuity bounds are negative for this datum");
    }
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let every = ((tau_min / direct.dt).round() as usize).max(1);
    let fv = run(rho0, &SolverConfig { epsilon: base.epsilon, record_every: every, snapshots: true, t_end, ..direct.clone() })?;
    let fv_at = |t: f64| -> &Density {
        &fv.snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .expect("direct run has snapshots")
            .1
    };
    let mut margin = f64::INFINITY;
    let mut gaps = Vec::new();
    let mut runs = Vec::new();
    for &tau in taus {
        let cfg = JkoConfig { tau, ..base.clone() };
        let tr = jko_run(rho0, t_end, &cfg)?;
        let tag = format!("tau_{tau}");
        let n = tr.steps.len();
        let mut mono: f64 = f64::NEG_INFINITY;
        let mut minimality: f64 = f64::NEG_INFINITY;
        let mut sum_w2 = 0.0;
        let mut sum_slope2 = 0.0;
        for (k, s) in tr.steps.iter().enumerate() {
            mono = mono.max(s.energy - s.previous_energy);
            minimality = minimality.max(s.objective - s.previous_energy);
            sum_w2 += s.w2 * s.w2 / tau;
            sum_slope2 += tau * tr.record.records[k].slope.powi(2);
        }
        let en = tr.steps.last().map_or(e0, |s| s.energy);
        let tele_lhs = 0.5 * sum_w2 + 0.5 * sum_slope2;
        let tele_rhs = e0 - en + 1e-6 * n as f64;
        // all pairs on a subsampled index set
        let stride = n.div_ceil(EQUICONT_POINTS - 1).max(1);
        let idx: Vec<usize> = (0..=n).step_by(stride).chain(std::iter::once(n)).collect();
        let mut equi = f64::INFINITY;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                if j == i {
                    continue;
                }
                let w = solve_exact(&tr.densities[j], &tr.densities[i])?.1;
                let dt = (j - i) as f64 * tau;
                let b = (2.0 * c * (dt + tau)).sqrt();
                equi = equi.min(if b.is_nan() { -w } else { b - w });
            }
        }
        let mut gap: f64 = 0.0;
        for (k, rho) in tr.densities.iter().enumerate().skip(1) {
            gap = gap.max(solve_exact(rho, fv_at(k as f64 * tau))?.1);
        }
        r.measure(format!("{tag}_max_energy_increase"), mono);
        r.measure(format!("{tag}_max_minimality_excess"), minimality);
        r.measure(format!("{tag}_telescoping_lhs"), tele_lhs);
        r.measure(format!("{tag}_telescoping_rhs"), tele_rhs);
        r.measure(format!("{tag}_step_sum"), sum_w2);
        r.measure(format!("{tag}_equicontinuity_margin"), equi);
        r.measure(format!("{tag}_gap_to_direct"), gap);
        margin = margin
            .min(1e-8 - mono)
            .min(tele_rhs - tele_lhs)
            .min(2.0 * c - sum_w2)
            .min(equi);
        gaps.push(gap);
        runs.push(tr);
    }
    for (k, w) in gaps.windows(2).enumerate() {
        let ratio = w[1] / w[0];
        r.measure(format!("gap_ratio_{k}"), ratio);
        margin = margin.min(0.75 - ratio);
    }
    Ok((r.finish(margin, 0.0), runs))
}

fn map_residual(plan: &TransportPlan, tau: f64, p: FreeEnergyParams) -> Result<(f64, f64)> {
    let rho = &plan.source;
    let g = rho.grid();
    let xi = chemical_potential(rho, p)?;
    let gx: TangentField = grad(g, &xi)?;
    let b = barycentric_map(plan);
    let mut s = 0.0;
    for i in 0..g.len() {
        let d: f64 = (0..3).map(|k| (b.values[i][k] - tau * gx.values[i][k]).powi(2)).sum();
        s += g.weights[i] * rho.values()[i] * d;
    }
    Ok((s.sqrt(), tau * slope(rho, p)?))
}

/// The barycentric map of the step plan against `tau grad(log rho - w.Omega)`.
pub fn check_optimal_map(rho_prev: &Density, cfg: &JkoConfig, factor: f64) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "optimal_map",
        "the optimal map from the step output back to the previous state is exp(tau grad(log rho_tau - w.Omega_tau))",
    );
    let st = jko_step_detailed(rho_prev, cfg, &mut JkoWarmStart::default())?;
    let p = FreeEnergyParams { epsilon: cfg.epsilon };
    let (res, scale) = map_residual(&st.plan, cfg.tau, p)?;
    let (res_c, _) = map_residual(&st.coupling, cfg.tau, p)?;
    r.bound("relative_residual", factor, "0.1 tau slope(rho)");
    r.measure("residual", res).measure("tau_slope", scale);
    r.measure("relative_residual", res / scale);
    r.measure("relative_residual_regularised_coupling", res_c / scale);
    r.measure("minimality_excess", st.minimality_gap());
    Ok(r.finish(factor - res / scale, 0.0))
}
