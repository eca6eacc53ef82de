//! Experiment configuration files (TOML with flat sections).
//!
//! ```toml
//! seed = 7
//! solver = "both"            # direct | jko | both
//!
//! [grid]
//! dim = 3
//! n_theta = 32
//! n_phi = 64                 # circles use `n = 128`
//!
//! [initial]
//! kind = "rotated-vmf"
//! kappa = 2.5
//! direction = [0.0, 0.0, 1.0]
//! axis = [1.0, 1.0, 0.0]
//! angle = 0.7
//!
//! [direct]
//! epsilon = 0.0
//! dt = 5e-4
//! t_end = 5.0
//!
//! [jko]
//! tau = 1e-2
//! t_end = 0.5
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{momentum, Density, SINGULAR_THRESHOLD};
use crate::error::{Error, Result};
use crate::fpsolver::SolverConfig;
use crate::io::MAX_GRID_NODES;
use crate::jko::JkoConfig;
use crate::presets::Preset;
use crate::sphere::{build_grid, norm, Resolution, SphereGrid};
use crate::transport::{OtConfig, OtMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverSelection {
    #[default]
    Direct,
    Jko,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phi: Option<usize>,
}

impl GridSection {
    pub fn resolution(&self) -> Result<Resolution> {
        match (self.dim, self.n, self.n_theta, self.n_phi) {
            (2, Some(n), None, None) => Ok(Resolution::Circle { n }),
            (3, None, Some(n_theta), Some(n_phi)) => Ok(Resolution::LatLon { n_theta, n_phi }),
            _ => Err(Error::config("grid needs dim = 2 with n, or dim = 3 with n_theta and n_phi")),
        }
    }

    pub fn build(&self) -> Result<SphereGrid> {
        let res = self.resolution()?;
        let nodes = match res {
            Resolution::Circle { n } => n,
            Resolution::LatLon { n_theta, n_phi } => n_theta.saturating_mul(n_phi),
        };
        if nodes > MAX_GRID_NODES {
            return Err(Error::config(format!("grid with {nodes} nodes is too large")));
        }
        build_grid(self.dim, res)
    }
}

/// JKO settings with the inner transport options flattened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JkoSection {
    pub tau: f64,
    pub epsilon: f64,
    pub t_end: f64,
    pub gamma: f64,
    pub inner_max_iters: usize,
    pub inner_tolerance: f64,
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    pub objective_method: OtMethod,
}

impl Default for JkoSection {
    fn default() -> Self {
        let c = JkoConfig::default();
        Self {
            tau: c.tau,
            epsilon: c.epsilon,
            t_end: 0.5,
            gamma: c.inner.entropic_gamma,
            inner_max_iters: c.inner.max_iters,
            inner_tolerance: c.inner.tolerance,
            outer_tol: c.outer_tol,
            max_outer_iters: c.max_outer_iters,
            objective_method: c.objective_method,
        }
    }
}

impl JkoSection {
    pub fn config(&self) -> JkoConfig {
        JkoConfig {
            tau: self.tau,
            epsilon: self.epsilon,
            inner: OtConfig {
                method: OtMethod::Entropic,
                entropic_gamma: self.gamma,
                max_iters: self.inner_max_iters,
                tolerance: self.inner_tolerance,
            },
            outer_tol: self.outer_tol,
            max_outer_iters: self.max_outer_iters,
            objective_method: self.objective_method,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSelection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub grid: GridSection,
    pub initial: Preset,
    #[serde(default)]
    pub direct: SolverConfig,
    #[serde(default)]
    pub jko: JkoSection,
}

/// A validated experiment ready to run.
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub grid: Arc<SphereGrid>,
    pub initial: Density,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Canonical JSON of the resolved settings, used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// Checks everything that does not need the grid.
    pub fn validate_static(&self) -> Result<()> {
        self.grid.resolution()?;
        self.initial.validate()?;
        let uses_direct = self.solver != SolverSelection::Jko;
        let uses_jko = self.solver != SolverSelection::Direct;
        if uses_direct {
            if !(self.direct.epsilon >= 0.0 && self.direct.epsilon <= 1.0) {
                return Err(Error::config("direct.epsilon must lie in [0, 1]"));
            }
            if !(self.direct.dt > 0.0 && self.direct.t_end > 0.0) {
                return Err(Error::config("direct.dt and direct.t_end must be positive"));
            }
        }
        if uses_jko {
            self.jko.config().validate()?;
            if !(self.jko.t_end > 0.0) {
                return Err(Error::config("jko.t_end must be positive"));
            }
        }
        Ok(())
    }

    /// Builds the grid and initial density and validates the solver setup,
    /// refusing `epsilon = 0` runs whose initial momentum vanishes.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        self.validate_static()?;
        let grid = Arc::new(self.grid.build()?);
        let initial = self.initial.density(&grid)?;
        if self.solver != SolverSelection::Jko {
            self.direct.validate(&grid)?;
            let j = norm(&momentum(&initial));
            if self.direct.epsilon == 0.0 && self.direct.drift && j <= SINGULAR_THRESHOLD {
                return Err(Error::config(format!(
                    "epsilon = 0 needs a nonzero initial momentum, |J0| = {j:e}"
                )));
            }
        }
        Ok(ResolvedExperiment { config: self.clone(), grid, initial })
    }
}
