//! Initial-condition presets. All presets are evaluated analytically at the
//! grid nodes and normalised with the quadrature weights, so rotating a
//! preset rotates its parameters rather than interpolating node values.

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::sphere::{dot, mat_vec, norm, normalize, rotation_matrix, SphereGrid, Vec3};

/// One von Mises-Fisher component `weight * exp(kappa w.direction)`
/// (normalised per component before weighting).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmfComponent {
    pub direction: Vec3,
    pub kappa: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preset {
    Uniform,
    /// `uniform_weight * uniform + sum of weighted vMF components`.
    UniformPlusVmfMixture { uniform_weight: f64, components: Vec<VmfComponent> },
    /// vMF with concentration `kappa` about `direction` rotated by `angle`
    /// around `axis`.
    RotatedVmf { kappa: f64, direction: Vec3, axis: Vec3, angle: f64 },
    /// Two equal-concentration bumps with the given mass split.
    TwoBump { first: Vec3, second: Vec3, kappa: f64, first_weight: f64 },
    /// Density file; its grid must match the experiment grid.
    FromFile { path: PathBuf },
}

fn check_dir(grid: &SphereGrid, v: &Vec3) -> Result<Vec3> {
    let mut v = *v;
    if grid.dim == 2 {
        v[2] = 0.0;
    }
    if !(norm(&v) > 1e-12) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config("preset direction must be a nonzero finite vector in the ambient space"));
    }
    Ok(normalize(&v))
}

/// Node masses of a normalised vMF component.
fn vmf_masses(grid: &SphereGrid, mu: &Vec3, kappa: f64) -> Vec<f64> {
    // shift by kappa to avoid overflow for large concentrations
    let raw: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .map(|(w, a)| a * (kappa * (dot(w, mu) - 1.0)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|m| m / s).collect()
}

impl Preset {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, what: &str| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be finite and nonnegative")))
            }
        };
        match self {
            Preset::Uniform | Preset::FromFile { .. } => Ok(()),
            Preset::UniformPlusVmfMixture { uniform_weight, components } => {
                pos(*uniform_weight, "uniform_weight")?;
                let mut total = *uniform_weight;
                for c in components {
                    pos(c.kappa, "kappa")?;
                    pos(c.weight, "weight")?;
                    total += c.weight;
                }
                if !(total > 0.0) {
                    return Err(Error::config("mixture weights sum to zero"));
                }
                Ok(())
            }
            Preset::RotatedVmf { kappa, angle, .. } => {
                pos(*kappa, "kappa")?;
                if !angle.is_finite() {
                    return Err(Error::config("angle must be finite"));
                }
                Ok(())
            }
            Preset::TwoBump { kappa, first_weight, .. } => {
                pos(*kappa, "kappa")?;
                if !(0.0..=1.0).contains(first_weight) {
                    return Err(Error::config("first_weight must lie in [0, 1]"));
                }
                Ok(())
            }
        }
    }

    pub fn density(&self, grid: &Arc<SphereGrid>) -> Result<Density> {
        self.validate()?;
        let n = grid.len();
        let mut masses = vec![0.0; n];
        let mut add = |m: Vec<f64>, wt: f64| {
            for (x, y) in masses.iter_mut().zip(m) {
                *x += wt * y;
            }
        };
        match self {
            Preset::Uniform => return Ok(Density::uniform(Arc::clone(grid))),
            Preset::FromFile { path } => {
                let text = std::fs::read_to_string(path)?;
                return crate::io::density_from_csv_on(&text, grid);
            }
            Preset::UniformPlusVmfMixture { uniform_weight, components } => {
                add(vmf_masses(grid, &[0.0, 0.0, 1.0], 0.0), *uniform_weight);
                for c in components {
                    add(vmf_masses(grid, &check_dir(grid, &c.direction)?, c.kappa), c.weight);
                }
            }
            Preset::RotatedVmf { kappa, direction, axis, angle } => {
                let d = check_dir(grid, direction)?;
                let d = if *angle == 0.0 { d } else { rotate(grid, &d, axis, *angle)? };
                add(vmf_masses(grid, &d, *kappa), 1.0);
            }
            Preset::TwoBump { first, second, kappa, first_weight } => {
                add(vmf_masses(grid, &check_dir(grid, first)?, *kappa), *first_weight);
                add(vmf_masses(grid, &check_dir(grid, second)?, *kappa), 1.0 - first_weight);
            }
        }
        let values: Vec<f64> = masses.iter().zip(&grid.weights).map(|(m, w)| m / w).collect();
        Density::normalized(Arc::clone(grid), values)
    }

    /// The same preset rotated by `angle` about `axis` (in the plane for
    /// circles, where the axis is ignored).
    pub fn rotated(&self, grid: &SphereGrid, axis: &Vec3, angle: f64) -> Result<Preset> {
        let r = |v: &Vec3| rotate(grid, v, axis, angle);
        Ok(match self {
            Preset::Uniform => Preset::Uniform,
            Preset::FromFile { .. } => return Err(Error::config("file presets cannot be rotated")),
            Preset::UniformPlusVmfMixture { uniform_weight, components } => Preset::UniformPlusVmfMixture {
                uniform_weight: *uniform_weight,
                components: components
                    .iter()
                    .map(|c| Ok(VmfComponent { direction: r(&c.direction)?, ..c.clone() }))
                    .collect::<Result<_>>()?,
            },
            Preset::RotatedVmf { kappa, direction, axis: a0, angle: t0 } => {
                let d = if *t0 == 0.0 { *direction } else { rotate(grid, direction, a0, *t0)? };
                Preset::RotatedVmf { kappa: *kappa, direction: r(&d)?, axis: *axis, angle: 0.0 }
            }
            Preset::TwoBump { first, second, kappa, first_weight } => Preset::TwoBump {
                first: r(first)?,
                second: r(second)?,
                kappa: *kappa,
                first_weight: *first_weight,
            },
        })
    }

    /// Random smooth preset: uniform floor plus a few random vMF bumps.
    pub fn random_smooth<R: Rng + ?Sized>(grid: &SphereGrid, rng: &mut R) -> Preset {
        let k = rng.gen_range(1..=3);
        let components = (0..k)
            .map(|_| VmfComponent {
                direction: random_direction(grid, rng),
                kappa: rng.gen_range(0.5..6.0),
                weight: rng.gen_range(0.2..1.0),
            })
            .collect();
        Preset::UniformPlusVmfMixture { uniform_weight: rng.gen_range(0.05..0.5), components }
    }
}

/// Uniformly distributed unit vector (in the plane for circles).
pub fn random_direction<R: Rng + ?Sized>(grid: &SphereGrid, rng: &mut R) -> Vec3 {
    loop {
        let mut v: Vec3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if grid.dim == 2 {
            v[2] = 0.0;
        }
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return normalize(&v);
        }
    }
}

fn rotate(grid: &SphereGrid, v: &Vec3, axis: &Vec3, angle: f64) -> Result<Vec3> {
    let axis = if grid.dim == 2 { [0.0, 0.0, 1.0] } else { *axis };
    if !(norm(&axis) > 1e-12) {
        return Err(Error::config("rotation axis must be nonzero"));
    }
    Ok(mat_vec(&rotation_matrix(&normalize(&axis), angle), v))
}

/// Some fixed presets with nonzero momentum used by tests and the suite.
pub fn standard_presets() -> Vec<(&'static str, Preset)> {
    vec![
        (
            "uniform-plus-vmf-mixture",
            Preset::UniformPlusVmfMixture {
                uniform_weight: 0.3,
                components: vec![
                    VmfComponent { direction: [0.3, -0.5, 0.8], kappa: 3.0, weight: 0.5 },
                    VmfComponent { direction: [-0.6, 0.7, -0.2], kappa: 5.0, weight: 0.2 },
                ],
            },
        ),
        (
            "rotated-vmf",
            Preset::RotatedVmf { kappa: 2.5, direction: [0.0, 0.0, 1.0], axis: [1.0, 1.0, 0.0], angle: 0.7 },
        ),
        (
            "two-bump",
            Preset::TwoBump { first: [1.0, 0.2, 0.3], second: [-0.3, 0.9, -0.4], kappa: 4.0, first_weight: 0.65 },
        ),
    ]
}
