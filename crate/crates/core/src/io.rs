//! Plain-text file formats.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which is enough
//! for an exact round trip. Density files start with a `# grid ` comment line
//! carrying the grid spec as JSON, followed by a `node_index,value` table.
//! Every parser takes `&str` and never panics on malformed input.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::fpsolver::{Diagnostics, TrajectoryRecord};
use crate::sphere::{build_grid, Resolution, SphereGrid};
use crate::transport::TransportPlan;

/// Largest node count accepted from a grid spec.
pub const MAX_GRID_NODES: usize = 1 << 22;

/// Serialisable grid description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub kind: GridKind,
    pub resolution: Resolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Circle,
    Latlon,
}

impl GridSpec {
    pub fn of(grid: &SphereGrid) -> Self {
        let kind = match grid.resolution {
            Resolution::Circle { .. } => GridKind::Circle,
            Resolution::LatLon { .. } => GridKind::Latlon,
        };
        GridSpec { dim: grid.dim, kind, resolution: grid.resolution }
    }

    /// Checks consistency and size, then builds the grid.
    pub fn build(&self) -> Result<SphereGrid> {
        let nodes = match (self.kind, self.resolution) {
            (GridKind::Circle, Resolution::Circle { n }) if self.dim == 2 => n,
            (GridKind::Latlon, Resolution::LatLon { n_theta, n_phi }) if self.dim == 3 => {
                n_theta.saturating_sub(2).saturating_mul(n_phi).saturating_add(2)
            }
            _ => return Err(Error::Parse("grid spec kind, dim and resolution disagree".into())),
        };
        if nodes > MAX_GRID_NODES {
            return Err(Error::Parse(format!("grid with {nodes} nodes exceeds {MAX_GRID_NODES}")));
        }
        build_grid(self.dim, self.resolution)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid spec serialises")
    }
}

pub fn parse_grid_spec(text: &str) -> Result<GridSpec> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("grid spec: {e}")))
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad number {field:?}")))
}

fn parse_idx(field: &str, line: usize) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| Error::Parse(format!("line {line}: bad index {field:?}")))
}

/// Data lines of a CSV with the expected header, as trimmed field lists.
fn csv_rows<'a>(text: &'a str, header: &[&str]) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_header {
            if fields != header {
                return Err(Error::Parse(format!("expected header {:?}, found {line:?}", header.join(","))));
            }
            seen_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(Error::Parse(format!("line {}: expected {} fields", k + 1, header.len())));
        }
        rows.push((k + 1, fields));
    }
    if !seen_header {
        return Err(Error::Parse("missing header".into()));
    }
    Ok(rows)
}

const DENSITY_HEADER: [&str; 2] = ["node_index", "value"];

pub fn density_to_csv(rho: &Density) -> String {
    let mut out = format!("# grid {}\n{}\n", GridSpec::of(rho.grid()).to_json(), DENSITY_HEADER.join(","));
    for (i, v) in rho.values().iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_f(*v));
    }
    out
}

/// Parsed density file: the embedded grid spec and node values in index
/// order. Every index must appear exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityFile {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

pub fn parse_density_csv(text: &str) -> Result<DensityFile> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| Error::Parse("empty density file".into()))?;
    let spec_json = first
        .strip_prefix("# grid ")
        .ok_or_else(|| Error::Parse("density file must start with a '# grid {...}' line".into()))?;
    let grid = parse_grid_spec(spec_json)?;
    let rows = csv_rows(text, &DENSITY_HEADER)?;
    let n = rows.len();
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (line, f) in rows {
        let i = parse_idx(f[0], line)?;
        if i >= n || seen[i] {
            return Err(Error::Parse(format!("line {line}: node index {i} out of range or repeated")));
        }
        seen[i] = true;
        values[i] = parse_f(f[1], line)?;
    }
    Ok(DensityFile { grid, values })
}

/// Builds the grid and validates the density against it.
pub fn density_from_csv(text: &str) -> Result<Density> {
    let file = parse_density_csv(text)?;
    let grid = Arc::new(file.grid.build()?);
    if grid.len() != file.values.len() {
        return Err(Error::Parse(format!("{} values for a grid of {} nodes", file.values.len(), grid.len())));
    }
    Density::new(grid, file.values)
}

/// Reads a density, reusing `grid` when the file's spec matches it.
pub fn density_from_csv_on(text: &str, grid: &Arc<SphereGrid>) -> Result<Density> {
    let file = parse_density_csv(text)?;
    if file.grid != GridSpec::of(grid) {
        return Err(Error::Parse("density file was written on a different grid".into()));
    }
    if grid.len() != file.values.len() {
        return Err(Error::Parse(format!("{} values for a grid of {} nodes", file.values.len(), grid.len())));
    }
    Density::new(Arc::clone(grid), file.values)
}

pub fn read_density(path: &Path) -> Result<Density> {
    density_from_csv(&std::fs::read_to_string(path)?)
}

pub fn write_density(path: &Path, rho: &Density) -> Result<()> {
    Ok(std::fs::write(path, density_to_csv(rho))?)
}

pub fn nodes_to_csv(grid: &SphereGrid) -> String {
    let mut out = String::from("index,x,y,z,weight\n");
    for (i, (p, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{}", fmt_f(p[0]), fmt_f(p[1]), fmt_f(p[2]), fmt_f(*w));
    }
    out
}

const PLAN_HEADER: [&str; 3] = ["i", "j", "mass"];

pub fn plan_to_csv(plan: &TransportPlan) -> String {
    let mut out = format!("{}\n", PLAN_HEADER.join(","));
    for (i, j, m) in &plan.entries {
        let _ = writeln!(out, "{i},{j},{}", fmt_f(*m));
    }
    out
}

/// Sparse plan triples; masses must be finite and nonnegative.
pub fn parse_plan_csv(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    csv_rows(text, &PLAN_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let m = parse_f(f[2], line)?;
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Parse(format!("line {line}: plan mass must be finite and nonnegative")));
            }
            Ok((parse_idx(f[0], line)?, parse_idx(f[1], line)?, m))
        })
        .collect()
}

pub const TRAJECTORY_HEADER: [&str; 10] = ["t", "mass", "Jx", "Jy", "Jz", "J_norm", "E", "H", "L1_to_M", "slope"];

pub fn trajectory_to_csv(records: &[Diagnostics]) -> String {
    let mut out = format!("{}\n", TRAJECTORY_HEADER.join(","));
    for r in records {
        let vals = [r.t, r.mass, r.j[0], r.j[1], r.j[2], r.j_norm, r.energy, r.rel_entropy, r.l1_to_m, r.slope];
        let row: Vec<String> = vals.iter().map(|v| fmt_f(*v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Trajectory rows; `NaN` fields (singular direction) are allowed, time
/// must be finite and nondecreasing.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<Diagnostics>> {
    let mut out: Vec<Diagnostics> = Vec::new();
    for (line, f) in csv_rows(text, &TRAJECTORY_HEADER)? {
        let v: Vec<f64> = f.iter().map(|x| parse_f(x, line)).collect::<Result<_>>()?;
        if !v[0].is_finite() || out.last().map_or(false, |p| v[0] < p.t) {
            return Err(Error::Parse(format!("line {line}: time must be finite and nondecreasing")));
        }
        out.push(Diagnostics {
            t: v[0],
            mass: v[1],
            j: [v[2], v[3], v[4]],
            j_norm: v[5],
            energy: v[6],
            rel_entropy: v[7],
            l1_to_m: v[8],
            slope: v[9],
        });
    }
    Ok(out)
}

/// Writes `trajectory.csv`, `final_density.csv` and, when present,
/// numbered snapshot files indexed by `snapshots.csv` (`k,t`).
pub fn write_trajectory(dir: &Path, record: &TrajectoryRecord) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trajectory.csv"), trajectory_to_csv(&record.records))?;
    if !record.snapshots.is_empty() {
        let mut index = String::from("k,t\n");
        for (k, (t, rho)) in record.snapshots.iter().enumerate() {
            let _ = writeln!(index, "{k},{}", fmt_f(*t));
            write_density(&dir.join(format!("snapshot_{k:05}.csv")), rho)?;
        }
        std::fs::write(dir.join("snapshots.csv"), index)?;
    }
    write_density(&dir.join("final_density.csv"), &record.final_density)
}
