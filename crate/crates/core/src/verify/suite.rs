use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flow::*;
use super::identities::*;
use super::jko_checks::*;
use super::report::{ReportBuilder, VerificationReport};
use crate::density::{fisher_von_mises, omega_direction, FreeEnergyParams};
use crate::error::Result;
use crate::fpsolver::{run, SolverConfig, TrajectoryRecord};
use crate::jko::JkoConfig;
use crate::presets::{random_direction, standard_presets, Preset, VmfComponent};
use crate::sphere::{build_grid, normalize, Resolution, SphereGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Reduced 16x32 reference grid and shorter JKO horizon.
    pub quick: bool,
    /// Run only checks whose name (or criterion number) is listed.
    pub only: Vec<String>,
    pub seed: u64,
    /// Record wall-clock runtimes; off gives byte-identical JSON across runs.
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { quick: false, only: Vec::new(), seed: 20240917, timing: true }
    }
}

/// One acceptance criterion and the checks it consists of.
#[derive(Clone, Copy, Debug)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub checks: &'static [&'static str],
}

/// Criterion 0 holds supplementary checks outside the numbered list.
pub const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "equilibrium momentum quadrature", checks: &["jm_quadrature"] },
    Criterion { id: 2, name: "stationarity of the equilibria", checks: &["stationarity"] },
    Criterion { id: 3, name: "momentum lower bound", checks: &["momentum_bound", "pure_diffusion_equality"] },
    Criterion { id: 4, name: "entropy decay", checks: &["entropy_decay"] },
    Criterion { id: 5, name: "L1 convergence", checks: &["l1_convergence"] },
    Criterion { id: 6, name: "JKO consistency", checks: &["jko_consistency"] },
    Criterion { id: 7, name: "optimal-map identity", checks: &["optimal_map"] },
    Criterion { id: 8, name: "epsilon contraction", checks: &["epsilon_contraction"] },
    Criterion { id: 9, name: "local stability", checks: &["stability"] },
    Criterion { id: 10, name: "momentum continuity", checks: &["momentum_continuity"] },
    Criterion { id: 11, name: "sphere identities", checks: &["sphere_identities"] },
    Criterion { id: 12, name: "lambda-convexity probe", checks: &["lambda_convexity"] },
    Criterion {
        id: 13,
        name: "invariant suite",
        checks: &[
            "mass_conservation",
            "positivity",
            "energy_monotonicity",
            "ckp_inequality",
            "relation_one",
            "control_pure_diffusion_positivity",
        ],
    },
    Criterion { id: 0, name: "supplementary", checks: &["momentum_positivity", "dissipation_identity"] },
];

/// Shared grids and trajectories for one suite run.
pub struct Suite {
    pub config: SuiteConfig,
    grids: Mutex<Vec<((usize, usize), Arc<SphereGrid>)>>,
    flows: OnceLock<Vec<(String, TrajectoryRecord)>>,
    diffusion: OnceLock<TrajectoryRecord>,
    paired: Mutex<Vec<TrajectoryRecord>>,
}

fn solver() -> SolverConfig {
    SolverConfig { epsilon: 0.0, dt: 5e-4, t_end: 5.0, record_every: 20, ..Default::default() }
}

impl Suite {
    pub fn new(config: SuiteConfig) -> Self {
        Self {
            config,
            grids: Mutex::new(Vec::new()),
            flows: OnceLock::new(),
            diffusion: OnceLock::new(),
            paired: Mutex::new(Vec::new()),
        }
    }

    pub fn grid(&self, n_theta: usize, n_phi: usize) -> Arc<SphereGrid> {
        let mut g = self.grids.lock().expect("grid cache");
        if let Some((_, grid)) = g.iter().find(|(k, _)| *k == (n_theta, n_phi)) {
            return Arc::clone(grid);
        }
        let grid = Arc::new(build_grid(3, Resolution::LatLon { n_theta, n_phi }).expect("suite grids are valid"));
        g.push(((n_theta, n_phi), Arc::clone(&grid)));
        grid
    }

    /// Reference grid: 32x64, or 16x32 in quick mode.
    pub fn main_grid(&self) -> Arc<SphereGrid> {
        if self.config.quick {
            self.grid(16, 32)
        } else {
            self.grid(32, 64)
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// The three epsilon = 0 preset runs with snapshots.
    pub fn flows(&self) -> Result<&[(String, TrajectoryRecord)]> {
        if let Some(f) = self.flows.get() {
            return Ok(f);
        }
        let grid = self.main_grid();
        let cfg = SolverConfig { snapshots: true, ..solver() };
        let mut out = Vec::new();
        for (name, p) in standard_presets() {
            out.push((name.to_string(), run(&p.density(&grid)?, &cfg)?));
        }
        Ok(self.flows.get_or_init(|| out))
    }

    /// Heat flow from the first preset.
    pub fn diffusion(&self) -> Result<&TrajectoryRecord> {
        if let Some(f) = self.diffusion.get() {
            return Ok(f);
        }
        let grid = self.main_grid();
        let rho = standard_presets()[0].1.density(&grid)?;
        let tr = run(&rho, &SolverConfig { drift: false, ..solver() })?;
        Ok(self.diffusion.get_or_init(|| tr))
    }

    fn selected(&self, check: &str, id: u8) -> bool {
        let only = &self.config.only;
        only.is_empty() || only.iter().any(|o| o == check || o.parse::<u8>().map_or(false, |k| k == id))
    }

    /// Reports of one criterion, honouring `only`.
    pub fn criterion(&self, id: u8) -> Result<Vec<VerificationReport>> {
        let crit = CRITERIA.iter().find(|c| c.id == id).expect("known criterion");
        let mut out = Vec::new();
        for &check in crit.checks {
            if self.selected(check, id) {
                out.extend(self.run_check(check)?);
            }
        }
        if !self.config.timing {
            out.iter_mut().for_each(|r| r.runtime_seconds = 0.0);
        }
        Ok(out)
    }

    fn run_check(&self, check: &str) -> Result<Vec<VerificationReport>> {
        let main = self.main_grid();
        let three = || vec![self.grid(16, 32), self.grid(32, 64), self.grid(64, 128)];
        let generic = [0.36, -0.48, 0.8];
        let named = |name: &str, mut r: VerificationReport| {
            r.check = format!("{}/{name}", r.check);
            r
        };
        Ok(match check {
            "jm_quadrature" => vec![check_jm_quadrature(&three(), &[0.0, 0.0, 1.0])?],
            "stationarity" => vec![check_stationarity(&three(), &generic, &solver())?],
            "momentum_bound" => {
                self.flows()?.iter().map(|(n, t)| named(n, check_momentum_bound(t, 0.05))).collect()
            }
            "pure_diffusion_equality" => vec![check_pure_diffusion_equality(self.diffusion()?, 0.01)],
            "entropy_decay" => self.flows()?.iter().map(|(n, t)| named(n, check_entropy_decay(t, 1e-3))).collect(),
            "l1_convergence" => self.flows()?.iter().map(|(n, t)| named(n, check_l1_convergence(t))).collect(),
            "momentum_positivity" => {
                self.flows()?.iter().map(|(n, t)| named(n, check_momentum_positivity(t, 0.05, false))).collect()
            }
            "control_pure_diffusion_positivity" => vec![check_momentum_positivity(self.diffusion()?, 0.05, true)],
            "dissipation_identity" => self.flows()?.iter().map(|(n, t)| named(n, dissipation_report(t))).collect(),
            "jko_consistency" => {
                let grid = self.grid(16, 32);
                let rho0 = jko_preset().density(&grid)?;
                let t_end = if self.config.quick { 0.2 } else { 0.4 };
                let (rep, _) = check_jko_consistency(&rho0, &[4e-2, 2e-2, 1e-2], t_end, &JkoConfig::default(), &solver())?;
                vec![rep]
            }
            "optimal_map" => {
                let grid = self.grid(16, 32);
                let rho = standard_presets()[0].1.density(&grid)?;
                vec![check_optimal_map(&rho, &JkoConfig { tau: 1e-2, ..JkoConfig::default() }, 0.1)?]
            }
            "epsilon_contraction" => {
                let p = standard_presets()[2].1.clone();
                let q = p.rotated(&main, &[0.2, 0.9, 0.4], 0.05)?;
                let cfg = SolverConfig { epsilon: 0.25, t_end: 1.0, record_every: 100, ..solver() };
                let (rep, runs) = check_epsilon_contraction(&p.density(&main)?, &q.density(&main)?, &cfg, 0.05)?;
                self.paired.lock().expect("paired runs").extend(runs);
                vec![rep]
            }
            "stability" => {
                let p = stability_preset();
                let q = p.rotated(&main, &[1.0, 0.0, 0.0], 2e-4)?;
                let (rep, runs) = check_stability(&p.density(&main)?, &q.density(&main)?, 1.0, &solver(), 0.05)?;
                self.paired.lock().expect("paired runs").extend(runs);
                vec![rep]
            }
            "momentum_continuity" => {
                let grid = self.grid(16, 32);
                let mut rng = self.rng(10);
                let mut pairs = Vec::new();
                for k in 0..200 {
                    let a = Preset::random_smooth(&grid, &mut rng);
                    let b = if k % 2 == 0 {
                        Preset::random_smooth(&grid, &mut rng)
                    } else {
                        let axis = random_direction(&grid, &mut rng);
                        a.rotated(&grid, &axis, rand::Rng::gen_range(&mut rng, 0.01..0.3))?
                    };
                    pairs.push((a.density(&grid)?, b.density(&grid)?));
                }
                vec![check_momentum_continuity(&pairs, 1e-6)?]
            }
            "sphere_identities" => {
                vec![check_sphere_identities(&three(), 5, &mut self.rng(11))]
            }
            "lambda_convexity" => {
                let mut rng = self.rng(12);
                let pairs = (0..50)
                    .map(|_| {
                        let a = Preset::random_smooth(&main, &mut rng).density(&main)?;
                        let b = Preset::random_smooth(&main, &mut rng).density(&main)?;
                        Ok((a, b))
                    })
                    .collect::<Result<Vec<_>>>()?;
                vec![check_lambda_convexity(&pairs, &[1e-2, 1.0], 5.0)?]
            }
            "mass_conservation" => vec![self.mass_report()?],
            "positivity" => vec![self.positivity_report()?],
            "energy_monotonicity" => vec![self.monotonicity_report()?],
            "ckp_inequality" => {
                let mut rng = self.rng(13);
                let mut pairs = Vec::new();
                for k in 0..120 {
                    let rho = Preset::random_smooth(&main, &mut rng).density(&main)?;
                    let m = if k % 2 == 0 {
                        let om = omega_direction(&rho, FreeEnergyParams { epsilon: 0.0 })?;
                        fisher_von_mises(&main, &om)?
                    } else {
                        Preset::random_smooth(&main, &mut rng).density(&main)?
                    };
                    pairs.push((rho, m));
                }
                vec![check_ckp(&pairs)?]
            }
            "relation_one" => {
                let mut rng = self.rng(14);
                let rhos = (0..20)
                    .map(|_| Preset::random_smooth(&main, &mut rng).density(&main))
                    .collect::<Result<Vec<_>>>()?;
                vec![check_relation_one(&rhos, &[0.0, 1e-4, 1e-2, 1.0])?]
            }
            other => panic!("unknown check {other}"),
        })
    }

    fn mass_report(&self) -> Result<VerificationReport> {
        let mut r = ReportBuilder::new("mass_conservation", "the flow conserves mass");
        let tol = 1e-10;
        r.bound("tolerance", tol, "mass drift over 10^4 steps");
        let mut worst: f64 = 0.0;
        let mut steps = 0;
        for (_, t) in self.flows()? {
            worst = worst.max(max_mass_drift(t));
            steps = steps.max(t.steps);
        }
        r.measure("max_mass_drift", worst).measure("steps", steps as f64);
        Ok(r.finish(tol - worst, 0.0))
    }

    fn all_runs(&self) -> Result<Vec<TrajectoryRecord>> {
        if self.paired.lock().expect("paired runs").is_empty() {
            self.run_check("epsilon_contraction")?;
            self.run_check("stability")?;
        }
        let mut runs: Vec<TrajectoryRecord> = self.flows()?.iter().map(|x| x.1.clone()).collect();
        runs.extend(self.paired.lock().expect("paired runs").iter().cloned());
        Ok(runs)
    }

    fn positivity_report(&self) -> Result<VerificationReport> {
        let mut r = ReportBuilder::new("positivity", "densities stay nonnegative");
        let mut runs = self.all_runs()?;
        runs.push(self.diffusion()?.clone());
        let min = runs.iter().map(|t| t.min_value).fold(f64::INFINITY, f64::min);
        r.measure("min_value", min).measure("runs", runs.len() as f64);
        r.bound("floor", 0.0, "nonnegativity");
        Ok(r.finish(min, 0.0))
    }

    fn monotonicity_report(&self) -> Result<VerificationReport> {
        let mut r = ReportBuilder::new("energy_monotonicity", "the free energy is a Lyapunov functional");
        let tol = 1e-8;
        r.bound("tolerance", tol, "per-step allowance");
        let runs = self.all_runs()?;
        let worst = runs.iter().map(|t| t.max_energy_increase).fold(f64::NEG_INFINITY, f64::max);
        r.measure("max_step_increase", worst).measure("runs", runs.len() as f64);
        Ok(r.finish(tol - worst, 0.0))
    }
}

fn dissipation_report(t: &TrajectoryRecord) -> VerificationReport {
    let mut r = ReportBuilder::new(
        "dissipation_identity",
        "energy dissipation: dE/dt = -int |grad(log rho - w.Omega)|^2 rho",
    );
    let m = dissipation_mismatch(t);
    r.bound("relative_tolerance", 0.05, "central differences within 5%");
    r.measure("max_relative_mismatch", m);
    r.finish(0.05 - m, 0.0)
}

/// Concentrated datum with `E(rho_0) + sqrt 2 > 0` for the JKO estimates.
pub(crate) fn jko_preset() -> Preset {
    Preset::RotatedVmf { kappa: 12.0, direction: [0.0, 0.0, 1.0], axis: [1.0, 2.0, 0.0], angle: 0.9 }
}

/// Small perturbation of an equilibrium, so the stability window is long.
pub(crate) fn stability_preset() -> Preset {
    Preset::UniformPlusVmfMixture {
        uniform_weight: 0.0,
        components: vec![
            VmfComponent { direction: normalize(&[0.3, -0.2, 0.9]), kappa: 1.0, weight: 0.97 },
            VmfComponent { direction: [1.0, 0.0, 0.0], kappa: 3.0, weight: 0.03 },
        ],
    }
}

/// Runs every selected criterion in order.
pub fn run_all(config: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let suite = Suite::new(config.clone());
    let mut out = Vec::new();
    for c in CRITERIA {
        out.extend(suite.criterion(c.id)?);
    }
    Ok(out)
}

/// Pretty JSON array of reports.
pub fn reports_to_json(reports: &[VerificationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialise")
}

