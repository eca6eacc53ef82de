//! Point-level geometry on the unit sphere: distances, exponential and
//! logarithmic maps, tangent projection. Vectors are stored in R^3; circle
//! points simply carry a zero third coordinate.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

const UNIT_TOL: f64 = 1e-10;

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalize(a: &Vec3) -> Vec3 {
    let n = norm(a);
    scale(1.0 / n, a)
}

fn check_unit(x: &Vec3, name: &str) -> Result<()> {
    let n = norm(x);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::domain(format!("{name} is not a unit vector (|{name}| = {n})")));
    }
    Ok(())
}

/// Great-circle distance between two unit vectors.
pub fn geodesic_distance(x: &Vec3, y: &Vec3) -> Result<f64> {
    check_unit(x, "x")?;
    check_unit(y, "y")?;
    Ok(distance_unchecked(x, y))
}

/// Distance without input validation, for inner loops over grid nodes.
///
/// The clamped arccos loses accuracy near coincident points, so small angles
/// go through the chord length instead.
#[inline]
pub fn distance_unchecked(x: &Vec3, y: &Vec3) -> f64 {
    let c = dot(x, y).clamp(-1.0, 1.0);
    if c > 0.9 {
        let chord = norm(&sub(x, y));
        2.0 * (0.5 * chord).min(1.0).asin()
    } else {
        c.acos()
    }
}

/// Riemannian exponential map `exp_x(v)`.
pub fn exp_map(x: &Vec3, v: &Vec3) -> Result<Vec3> {
    check_unit(x, "x")?;
    if dot(x, v).abs() > UNIT_TOL * (1.0 + norm(v)) {
        return Err(Error::domain("exp_map: v is not tangent at x"));
    }
    Ok(exp_unchecked(x, v))
}

#[inline]
pub fn exp_unchecked(x: &Vec3, v: &Vec3) -> Vec3 {
    let t = norm(v);
    if t < 1e-14 {
        return *x;
    }
    let p = axpy(&scale(t.cos(), x), t.sin() / t, v);
    normalize(&p)
}

/// Removes the normal component: `V - (V.w) w`.
#[inline]
pub fn project_tangent(w: &Vec3, v: &Vec3) -> Vec3 {
    axpy(v, -dot(v, w), w)
}

/// Unit tangent direction at `x` used when `y = -x`: the projection of the
/// lowest-index coordinate axis that is not parallel to `x`.
pub fn antipodal_direction(x: &Vec3) -> Vec3 {
    for k in 0..3 {
        if x[k].abs() < 1.0 - 1e-9 {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            return normalize(&project_tangent(x, &e));
        }
    }
    unreachable!("a unit vector is parallel to at most one axis")
}

/// Riemannian logarithm `log_x(y)`: the tangent vector at `x` whose
/// exponential is `y`, with length `d(x, y)`.
pub fn log_map(x: &Vec3, y: &Vec3) -> Vec3 {
    let theta = distance_unchecked(x, y);
    if theta < 1e-15 {
        return [0.0; 3];
    }
    let u = project_tangent(x, y);
    let un = norm(&u);
    if un < 1e-12 && dot(x, y) < 0.0 {
        return scale(theta, &antipodal_direction(x));
    }
    scale(theta / un, &u)
}

/// Point a fraction `r` along the geodesic from `x` to `y`.
pub fn geodesic_point(x: &Vec3, y: &Vec3, r: f64) -> Vec3 {
    let v = log_map(x, y);
    exp_unchecked(x, &scale(r, &v))
}

/// Orthonormal basis of the tangent plane at `x` (one vector for circle points).
pub fn tangent_basis(x: &Vec3, dim: usize) -> Vec<Vec3> {
    if dim == 2 {
        return vec![[-x[1], x[0], 0.0]];
    }
    let a = antipodal_direction(x);
    let b = cross(x, &a);
    vec![a, b]
}

/// Rotation matrix about a unit axis by `angle` (Rodrigues formula).
pub fn rotation_matrix(axis: &Vec3, angle: f64) -> [[f64; 3]; 3] {
    let k = normalize(axis);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + t * k[0] * k[0], t * k[0] * k[1] - s * k[2], t * k[0] * k[2] + s * k[1]],
        [t * k[1] * k[0] + s * k[2], c + t * k[1] * k[1], t * k[1] * k[2] - s * k[0]],
        [t * k[2] * k[0] - s * k[1], t * k[2] * k[1] + s * k[0], c + t * k[2] * k[2]],
    ]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}
