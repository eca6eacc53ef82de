//! Discrete calculus on a [`SphereGrid`].
//!
//! `grad` reconstructs node tangent vectors from edge differences with a
//! face-weighted stencil; `div` is its exact negative adjoint in the quadrature inner
//! product, so summation by parts holds to rounding. `laplace_beltrami` is
//! the compact two-point-flux operator shared with the time steppers.

use std::sync::Arc;

use super::geometry::{axpy, dot, project_tangent, Vec3};
use super::grid::SphereGrid;
use crate::error::{Error, Result};

/// Per-node tangent vectors on a grid.
#[derive(Clone, Debug)]
pub struct TangentField {
    pub grid: Arc<SphereGrid>,
    pub values: Vec<Vec3>,
}

impl TangentField {
    /// Wraps values after projecting each onto its tangent plane.
    pub fn from_vectors(grid: Arc<SphereGrid>, values: Vec<Vec3>) -> Result<Self> {
        check_len(&grid, values.len())?;
        let values = values
            .iter()
            .zip(&grid.nodes)
            .map(|(v, w)| project_tangent(w, v))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SphereGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![[0.0; 3]; n] }
    }

    /// Largest normal component `|v_i . w_i|`.
    pub fn max_normal_component(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.nodes)
            .map(|(v, w)| dot(v, w).abs())
            .fold(0.0, f64::max)
    }
}

fn check_len(grid: &SphereGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::domain(format!(
            "grid function has {len} entries but the grid has {} nodes",
            grid.len()
        )));
    }
    Ok(())
}

/// Node-wise tangent gradient.
pub fn grad(grid: &Arc<SphereGrid>, f: &[f64]) -> Result<TangentField> {
    check_len(grid, f.len())?;
    Ok(TangentField { grid: Arc::clone(grid), values: grad_raw(grid, f) })
}

pub(crate) fn grad_raw(grid: &SphereGrid, f: &[f64]) -> Vec<Vec3> {
    grid.grad_stencil
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let mut g = [0.0; 3];
            for (j, c) in st {
                g = axpy(&g, f[*j] - f[i], c);
            }
            project_tangent(&grid.nodes[i], &g)
        })
        .collect()
}

/// Negative quadrature adjoint of [`grad`].
pub fn div(grid: &SphereGrid, field: &TangentField) -> Result<Vec<f64>> {
    check_len(grid, field.values.len())?;
    Ok(div_raw(grid, &field.values))
}

pub(crate) fn div_raw(grid: &SphereGrid, v: &[Vec3]) -> Vec<f64> {
    let n = grid.len();
    let mut acc = vec![0.0; n];
    for (i, st) in grid.grad_stencil.iter().enumerate() {
        // Only the tangent part of v_i is seen by grad, so project first.
        let vi = project_tangent(&grid.nodes[i], &v[i]);
        let wi = grid.weights[i];
        for (j, c) in st {
            let s = wi * dot(c, &vi);
            acc[*j] += s;
            acc[i] -= s;
        }
    }
    acc.iter().zip(&grid.weights).map(|(a, w)| -a / w).collect()
}

/// Laplace-Beltrami operator: the compact two-point-flux form
/// `(1/w_i) sum_e T_e (f_j - f_i)`.
///
/// The flux coefficients are calibrated so that the first spherical
/// harmonics are exact eigenvectors with eigenvalue `-(d-1)`. The wide
/// composition `div(grad f)` is available as [`div_grad`]; it satisfies
/// summation by parts as well but is not pointwise consistent.
pub fn laplace_beltrami(grid: &SphereGrid, f: &[f64]) -> Result<Vec<f64>> {
    check_len(grid, f.len())?;
    let mut out = vec![0.0; grid.len()];
    for e in &grid.edges {
        let flux = e.transmissibility * (f[e.b] - f[e.a]);
        out[e.a] += flux;
        out[e.b] -= flux;
    }
    for (o, w) in out.iter_mut().zip(&grid.weights) {
        *o /= w;
    }
    Ok(out)
}

/// `div(grad f)` with the node operators.
pub fn div_grad(grid: &Arc<SphereGrid>, f: &[f64]) -> Result<Vec<f64>> {
    let g = grad(grid, f)?;
    div(grid, &g)
}

/// Quadrature `sum_i w_i f_i`.
pub fn integrate(grid: &SphereGrid, f: &[f64]) -> f64 {
    f.iter().zip(&grid.weights).map(|(a, w)| a * w).sum()
}

/// Quadrature of a vector-valued grid function.
pub fn integrate_vec(grid: &SphereGrid, f: &[Vec3]) -> Vec3 {
    let mut acc = [0.0; 3];
    for (v, w) in f.iter().zip(&grid.weights) {
        acc = axpy(&acc, *w, v);
    }
    acc
}
