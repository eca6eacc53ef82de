//! Constants of the theory, evaluated from their closed forms at runtime.

use std::f64::consts::{E, PI};

/// Rate `2(d-1)` of the momentum lower bound.
pub fn momentum_rate(d: usize) -> f64 {
    2.0 * (d as f64 - 1.0)
}

/// Entropy decay rate `C_1 = 2(d-2)/e^2`.
pub fn entropy_rate(d: usize) -> f64 {
    2.0 * (d as f64 - 2.0) / (E * E)
}

/// Convexity defect `lambda(eps) = 1 + eps^{-1/2} - (d-2)` of the regularised
/// energy.
pub fn lambda_epsilon(epsilon: f64, d: usize) -> f64 {
    1.0 + epsilon.powf(-0.5) - (d as f64 - 2.0)
}

/// Local stability rate `1 + 2/|J_0| - (d-2)`.
pub fn lambda_stability(j0: f64, d: usize) -> f64 {
    1.0 + 2.0 / j0 - (d as f64 - 2.0)
}

/// Stability window `|J_0|^4 / (2^8 max H)`.
pub fn stability_window(j0: f64, max_h: f64) -> f64 {
    j0.powi(4) / (256.0 * max_h)
}

/// Closeness radius `min(|J_0|, |J_0|^2) / 16`; the flag tells whether the
/// quadratic term binds.
pub fn closeness_radius(j0: f64) -> (f64, bool) {
    let quad = j0 * j0 < j0;
    (j0.min(j0 * j0) / 16.0, quad)
}

/// `|J_{M_Omega}| = 2 e^{-1} / (e - e^{-1})` on S^2.
pub fn equilibrium_momentum_s2() -> f64 {
    2.0 / E / (E - 1.0 / E)
}

/// Normaliser `C_M = 1 / (2 pi (e - e^{-1}))` on S^2.
pub fn normalizer_s2() -> f64 {
    1.0 / (2.0 * PI * (E - 1.0 / E))
}

/// Lower bound `|S| e^{-1} log e^{-1} - sqrt(1 + eps)` on the free energy.
pub fn energy_floor(area: f64, epsilon: f64) -> f64 {
    -area / E - (1.0 + epsilon).sqrt()
}

/// The constant used in the step-sum and equicontinuity estimates in place
/// of minus the energy floor.
pub const STEP_SUM_CONSTANT: f64 = std::f64::consts::SQRT_2;
