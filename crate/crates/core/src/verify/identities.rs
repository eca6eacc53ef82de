//! Static checks: calculus identities on the sphere, functional
//! inequalities and the interpolation convexity probe.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::constants::lambda_epsilon;
use super::report::{orders, ReportBuilder, VerificationReport};
use crate::density::{
    free_energy, gibbs_constant, gibbs_density, l1_distance, momentum, omega_direction, relative_entropy, Density,
    FreeEnergyParams,
};
use crate::error::Result;
use crate::sphere::{add, div_raw, dot, grad_raw, norm, project_tangent, scale, SphereGrid, Vec3};
use crate::transport::{displacement_interpolate, solve_exact};

/// Quadratic test function `c + b.w + w^T A w` with its tangent gradient.
#[derive(Clone, Debug)]
struct Quadratic {
    c: f64,
    b: Vec3,
    a: [[f64; 3]; 3],
}

impl Quadratic {
    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let mut u = || rng.gen_range(-1.0..1.0);
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                a[i][j] = u();
                a[j][i] = a[i][j];
            }
        }
        let mut b = [u(), u(), u()];
        if dim == 2 {
            b[2] = 0.0;
            for k in 0..3 {
                a[2][k] = 0.0;
                a[k][2] = 0.0;
            }
        }
        Self { c: u(), b, a }
    }

    fn value(&self, w: &Vec3) -> f64 {
        let aw = mat(&self.a, w);
        self.c + dot(&self.b, w) + dot(w, &aw)
    }

    fn grad(&self, w: &Vec3) -> Vec3 {
        project_tangent(w, &add(&self.b, &scale(2.0, &mat(&self.a, w))))
    }
}

fn mat(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// Linear ambient field `v + B w`.
#[derive(Clone, Debug)]
struct LinearField {
    v: Vec3,
    b: [[f64; 3]; 3],
}

impl LinearField {
    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let mut u = || rng.gen_range(-1.0..1.0);
        let mut b = [[0.0; 3]; 3];
        for row in b.iter_mut() {
            for x in row.iter_mut() {
                *x = u();
            }
        }
        let mut v = [u(), u(), u()];
        if dim == 2 {
            v[2] = 0.0;
            for k in 0..3 {
                b[2][k] = 0.0;
                b[k][2] = 0.0;
            }
        }
        Self { v, b }
    }

    fn at(&self, w: &Vec3) -> Vec3 {
        add(&self.v, &mat(&self.b, w))
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Product quadrature exact for polynomials of moderate degree, independent
/// of the finite-volume grid.
fn oracle_points(dim: usize) -> Vec<(Vec3, f64)> {
    let nphi = 64;
    if dim == 2 {
        return (0..nphi)
            .map(|k| {
                let p = 2.0 * PI * k as f64 / nphi as f64;
                ([p.cos(), p.sin(), 0.0], 2.0 * PI / nphi as f64)
            })
            .collect();
    }
    let mut pts = Vec::new();
    for (z, wz) in gauss_legendre(24) {
        let s = (1.0 - z * z).sqrt();
        for k in 0..nphi {
            let p = 2.0 * PI * k as f64 / nphi as f64;
            pts.push(([s * p.cos(), s * p.sin(), z], wz * 2.0 * PI / nphi as f64));
        }
    }
    pts
}

/// Ambient divergence `div(P F) + (d-1) w.F` on the grid.
fn ambient_div(grid: &SphereGrid, f: &[Vec3]) -> Vec<f64> {
    let tang: Vec<Vec3> = f.iter().zip(&grid.nodes).map(|(v, w)| project_tangent(w, v)).collect();
    let dm1 = grid.dim as f64 - 1.0;
    div_raw(grid, &tang)
        .into_iter()
        .zip(f.iter().zip(&grid.nodes))
        .map(|(d, (v, w))| d + dm1 * dot(v, w))
        .collect()
}

/// Residuals of the integration-by-parts identities on one grid, maximised
/// over the trial functions.
fn identity_residuals(grid: &SphereGrid, trials: &[(Quadratic, LinearField, Vec3)]) -> [f64; 4] {
    let dm1 = grid.dim as f64 - 1.0;
    let oracle = oracle_points(grid.dim);
    let mut out = [0.0f64; 4];
    let w = &grid.weights;
    for (q, lf, v) in trials {
        let f: Vec<f64> = grid.nodes.iter().map(|x| q.value(x)).collect();
        let ff: Vec<Vec3> = grid.nodes.iter().map(|x| lf.at(x)).collect();
        let divf = ambient_div(grid, &ff);
        // int f div F = -int F.(grad f - (d-1) w f), exact side by the oracle
        let exact: f64 = oracle
            .iter()
            .map(|(x, wt)| {
                let g = q.grad(x);
                let fx = q.value(x);
                -wt * dot(&lf.at(x), &[g[0] - dm1 * x[0] * fx, g[1] - dm1 * x[1] * fx, g[2] - dm1 * x[2] * fx])
            })
            .sum();
        let disc: f64 = (0..grid.len()).map(|i| w[i] * f[i] * divf[i]).sum();
        out[0] = out[0].max((disc - exact).abs());
        // int w div F = -int F for tangent F
        let tf: Vec<Vec3> = ff.iter().zip(&grid.nodes).map(|(v, x)| project_tangent(x, v)).collect();
        let divt = div_raw(grid, &tf);
        let mut acc = [0.0; 3];
        for i in 0..grid.len() {
            for k in 0..3 {
                acc[k] += w[i] * (grid.nodes[i][k] * divt[i] + tf[i][k]);
            }
        }
        out[1] = out[1].max(norm(&acc));
        // int grad f = (d-1) int w f
        let gf = grad_raw(grid, &f);
        let mut acc = [0.0; 3];
        for i in 0..grid.len() {
            for k in 0..3 {
                acc[k] += w[i] * (gf[i][k] - dm1 * grid.nodes[i][k] * f[i]);
            }
        }
        out[2] = out[2].max(norm(&acc));
        // div(P v) = -(d-1) w.v node-wise
        let pv: Vec<Vec3> = grid.nodes.iter().map(|x| project_tangent(x, v)).collect();
        let dv = div_raw(grid, &pv);
        let worst = (0..grid.len()).map(|i| (dv[i] + dm1 * dot(&grid.nodes[i], v)).abs()).fold(0.0, f64::max);
        out[3] = out[3].max(worst);
    }
    out
}

/// Integration-by-parts identities under refinement.
pub fn check_sphere_identities(grids: &[Arc<SphereGrid>], trials: usize, rng: &mut ChaCha8Rng) -> VerificationReport {
    let mut r = ReportBuilder::new(
        "sphere_identities",
        "integration by parts on the sphere: int f div F = -int F.(grad f - (d-1) w f), int w div F = -int F (F tangent), int grad f = (d-1) int w f, div(P v) = -(d-1) w.v",
    );
    let dim = grids[0].dim;
    let fns: Vec<_> = (0..trials)
        .map(|_| {
            let q = Quadratic::random(rng, dim);
            let lf = LinearField::random(rng, dim);
            let mut v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if dim == 2 {
                v[2] = 0.0;
            }
            (q, lf, v)
        })
        .collect();
    let names = ["weak_divergence", "first_moment_of_divergence", "integrated_gradient", "projected_constant_divergence"];
    let res: Vec<[f64; 4]> = grids.iter().map(|g| identity_residuals(g, &fns)).collect();
    let h: Vec<f64> = grids.iter().map(|g| g.mesh_width()).collect();
    r.bound("min_order", 1.0, "integrated identities converge at first order or better");
    r.bound("pointwise_constant_growth", POINTWISE_C_SLACK, "pointwise residual <= C h with C from the coarsest grid");
    let mut min_order = f64::INFINITY;
    let mut margin = f64::INFINITY;
    for (k, name) in names.iter().enumerate() {
        let errs: Vec<f64> = res.iter().map(|x| x[k]).collect();
        for (g, e) in grids.iter().zip(&errs) {
            r.measure(format!("{name}_{}", g.len()), *e);
        }
        if errs[0] < 1e-12 {
            r.measure(format!("{name}_order"), f64::INFINITY);
            continue;
        }
        let o = orders(&h, &errs).into_iter().fold(f64::INFINITY, f64::min);
        r.measure(format!("{name}_order"), o);
        let decreasing = errs.windows(2).all(|p| p[1] < p[0]);
        if !decreasing {
            margin = margin.min(-1.0);
        }
        if k == 3 {
            // node-wise identity: first-order consistency, err / h bounded
            let c: Vec<f64> = errs.iter().zip(&h).map(|(e, hh)| e / hh).collect();
            let growth = c.iter().skip(1).fold(0.0f64, |m, x| m.max(x / c[0]));
            r.measure("pointwise_constant_growth", growth);
            margin = margin.min(POINTWISE_C_SLACK - growth);
        } else {
            min_order = min_order.min(o);
        }
    }
    r.measure("min_order", min_order);
    r.finish(margin.min(min_order - 1.0), 0.0)
}

/// Allowed growth of `err / h` for the node-wise identity.
const POINTWISE_C_SLACK: f64 = 1.1;

/// `| |J_bar| - |J| | <= 2 W_2 / |J_bar|` with exact transport.
pub fn check_momentum_continuity(pairs: &[(Density, Density)], slack: f64) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "momentum_continuity",
        "continuity of the momentum: | |J_rhobar| - |J_rho| | <= 2 W_2(rhobar, rho) / |J_rhobar|",
    );
    r.bound("slack", slack, "absolute allowance");
    let mut margin = f64::INFINITY;
    let mut used = 0;
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for (rho, bar) in pairs {
        let jb = norm(&momentum(bar));
        if jb <= 0.05 {
            continue;
        }
        used += 1;
        let j = norm(&momentum(rho));
        let w = solve_exact(bar, rho)?.1;
        let lhs = (jb - j).abs();
        let rhs = 2.0 * w / jb;
        if lhs > rhs + slack {
            violations += 1;
        }
        tightest = tightest.max(lhs / rhs.max(1e-300));
        margin = margin.min(rhs + slack - lhs);
    }
    r.measure("pairs_checked", used as f64).measure("violations", violations as f64);
    r.measure("max_lhs_over_rhs", tightest);
    Ok(r.finish(margin, 0.0))
}

/// `E(alpha_r) <= (1-r) E(rho) + r E(rhobar) + (lambda/2) r (1-r) W_2^2 + tol`
/// along displacement interpolations.
pub fn check_lambda_convexity(
    pairs: &[(Density, Density)],
    epsilons: &[f64],
    tol_factor: f64,
) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "lambda_convexity",
        "the regularised free energy is (-lambda)-convex along geodesics, lambda = (1 + eps^{-1/2}) - (d-2)",
    );
    let Some((first, _)) = pairs.first() else {
        return Ok(r.not_applicable("no pairs"));
    };
    let grid = Arc::clone(first.grid());
    let d = grid.dim;
    let tol = tol_factor * grid.mesh_width();
    r.bound("grid_tolerance", tol, "5 h interpolation binning allowance");
    for &e in epsilons {
        r.bound(format!("lambda_eps_{e}"), lambda_epsilon(e, d), "(1 + eps^{-1/2}) - (d-2)");
    }
    let mut margin = f64::INFINITY;
    let mut raw = f64::INFINITY;
    for (rho, bar) in pairs {
        let (plan, w) = solve_exact(rho, bar)?;
        let alphas: Vec<(f64, Density)> =
            [0.25, 0.5, 0.75].iter().map(|&s| Ok((s, displacement_interpolate(&plan, s)?))).collect::<Result<_>>()?;
        for &e in epsilons {
            let p = FreeEnergyParams { epsilon: e };
            let lam = lambda_epsilon(e, d);
            let (e0, e1) = (free_energy(rho, p), free_energy(bar, p));
            for (s, a) in &alphas {
                let rhs = (1.0 - s) * e0 + s * e1 + 0.5 * lam * s * (1.0 - s) * w * w;
                let lhs = free_energy(a, p);
                raw = raw.min(rhs - lhs);
                margin = margin.min(rhs + tol - lhs);
            }
        }
    }
    r.measure("pairs", pairs.len() as f64).measure("worst_slack_without_tolerance", raw);
    Ok(r.finish(margin, 0.0))
}

/// `||rho - M||_1 <= sqrt(2 H(rho | M))` on the given pairs.
pub fn check_ckp(pairs: &[(Density, Density)]) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "ckp_inequality",
        "Csiszar-Kullback-Pinsker inequality: ||rho - M||_1 <= sqrt(2 H(rho | M))",
    );
    let mut margin = f64::INFINITY;
    for (rho, m) in pairs {
        let h = relative_entropy(rho, m)?;
        margin = margin.min((2.0 * h).sqrt() - l1_distance(rho, m)?);
    }
    r.bound("rounding", 1e-10, "floating-point allowance");
    r.measure("pairs", pairs.len() as f64);
    Ok(r.finish(margin, 1e-10))
}

/// `E(rho) = H(rho | M_{Omega^eps}) - eps / sqrt(|J|^2 + eps) + log C` with
/// the grid-normalised Gibbs state.
pub fn check_relation_one(densities: &[Density], epsilons: &[f64]) -> Result<VerificationReport> {
    let mut r = ReportBuilder::new(
        "relation_one",
        "free energy rewritten as E = H(rho | M_{Omega}) - eps / sqrt(|J|^2 + eps) + log C_M",
    );
    let tol = 1e-10;
    r.bound("tolerance", tol, "identity up to rounding");
    let mut worst: f64 = 0.0;
    for rho in densities {
        let j = momentum(rho);
        for &e in epsilons {
            let p = FreeEnergyParams { epsilon: e };
            let om = omega_direction(rho, p)?;
            let m = gibbs_density(rho.grid(), &om);
            let s = (dot(&j, &j) + e).sqrt();
            let rhs = relative_entropy(rho, &m)? - e / s + gibbs_constant(rho.grid(), &om).ln();
            worst = worst.max((free_energy(rho, p) - rhs).abs());
        }
    }
    r.measure("max_deviation", worst).measure("densities", densities.len() as f64);
    Ok(r.finish(tol - worst, 0.0))
}
