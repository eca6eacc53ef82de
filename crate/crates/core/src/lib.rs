//! Numerical laboratory for the spatially homogeneous Kolmogorov-Vicsek
//! Fokker-Planck equation on the circle and the two-sphere.
//!
//! The crate is organised bottom-up: [`sphere`] builds grids and the discrete
//! calculus, [`density`] evaluates the free-energy functionals, [`transport`]
//! computes optimal couplings, [`fpsolver`] and [`jko`] integrate the flow in
//! two independent ways, and [`verify`] turns the analytical estimates into
//! executable checks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod density;
pub mod error;
pub mod fpsolver;
pub mod io;
pub mod jko;
pub mod presets;
pub mod sphere;
pub mod transport;
pub mod verify;


pub use density::{Density, FreeEnergyParams};
pub use error::{Error, Result};
pub use sphere::{build_grid, Resolution, SphereGrid, TangentField, Vec3};
