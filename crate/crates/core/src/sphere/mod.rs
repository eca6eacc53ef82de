//! Grids on S^1 and S^2 with their discrete Riemannian calculus.

mod geometry;
mod grid;
mod ops;

pub use geometry::*;
pub use grid::{build_grid, Edge, Neighbor, Resolution, SphereGrid};
pub use ops::{div, div_grad, grad, integrate, integrate_vec, laplace_beltrami, TangentField};
pub(crate) use ops::{div_raw, grad_raw};
