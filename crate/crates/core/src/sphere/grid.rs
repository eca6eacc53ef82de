//! Grid construction for the circle and the latitude-longitude sphere.
//!
//! Sphere layout: the colatitude range is cut at `0`, `(k + 1/2) h` for
//! `k = 0..n_theta-2` and `pi`, with `h = pi / (n_theta - 1)`. The first and
//! last bands are polar caps of angular radius `h/2` holding a single cell
//! each; the remaining `n_theta - 2` bands are rings of `n_phi` cells. Node 0
//! is the north cap, the last node the south cap, and ring cells are stored
//! band by band in increasing longitude.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::geometry::{distance_unchecked, log_map, scale, Vec3};
use crate::error::{Error, Result};
use crate::transport::CostMatrix;

/// Grid parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Circle { n: usize },
    LatLon { n_theta: usize, n_phi: usize },
}

/// One finite-volume interface between two neighbouring cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Length of the shared cell boundary (1 on the circle).
    pub length: f64,
    /// Geodesic distance between the two cell centres.
    pub distance: f64,
    /// Two-point flux coefficient used by the finite-volume operators.
    pub transmissibility: f64,
    /// Fraction of `distance` between centre `a` and the shared face.
    pub split: f64,
}

/// Neighbour entry in the per-node adjacency list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub dim: usize,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub edges: Vec<Edge>,
    pub adjacency: Vec<Vec<Neighbor>>,
    pub resolution: Resolution,
    /// Colatitude band boundaries (sphere only).
    theta_edges: Vec<f64>,
    /// Gradient stencils: `grad_i = sum_j c_ij (f_j - f_i)`.
    pub(crate) grad_stencil: Vec<Vec<(usize, Vec3)>>,
    /// Squared-distance matrix, built on first use.
    pub(crate) cost_cache: OnceLock<Arc<CostMatrix>>,
}

/// Builds a grid on S^{dim-1}.
pub fn build_grid(dim: usize, resolution: Resolution) -> Result<SphereGrid> {
    match (dim, resolution) {
        (2, Resolution::Circle { n }) => {
            if n < 3 {
                return Err(Error::config(format!("circle grid needs n >= 3, got {n}")));
            }
            Ok(build_circle(n))
        }
        (3, Resolution::LatLon { n_theta, n_phi }) => {
            if n_theta < 4 || n_phi < 8 {
                return Err(Error::config(format!(
                    "sphere grid needs n_theta >= 4 and n_phi >= 8, got {n_theta} x {n_phi}"
                )));
            }
            Ok(build_latlon(n_theta, n_phi))
        }
        (d, r) => Err(Error::config(format!("resolution {r:?} does not fit dimension {d}"))),
    }
}

fn build_circle(n: usize) -> SphereGrid {
    let h = 2.0 * PI / n as f64;
    let nodes: Vec<Vec3> = (0..n)
        .map(|k| {
            let a = h * k as f64;
            [a.cos(), a.sin(), 0.0]
        })
        .collect();
    let weights = vec![h; n];
    // Calibrated so that cos and sin are exact eigenvectors with eigenvalue -1.
    let t = h / (2.0 * (1.0 - h.cos()));
    let edges = (0..n)
        .map(|k| Edge {
            a: k,
            b: (k + 1) % n,
            length: 1.0,
            distance: h,
            transmissibility: t,
            split: 0.5,
        })
        .collect();
    finish(2, nodes, weights, edges, Resolution::Circle { n }, Vec::new())
}

fn build_latlon(nt: usize, np: usize) -> SphereGrid {
    let h = PI / (nt - 1) as f64;
    let dphi = 2.0 * PI / np as f64;
    let mut te = Vec::with_capacity(nt + 1);
    te.push(0.0);
    for k in 0..nt - 1 {
        te.push((k as f64 + 0.5) * h);
    }
    te.push(PI);

    let rings = nt - 2;
    let n = rings * np + 2;
    let south = n - 1;
    let ring_node = |b: usize, j: usize| 1 + (b - 1) * np + (j % np);

    // Node colatitudes: caps sit at the poles, ring nodes blend the
    // area-midpoint and angle-midpoint so that one-point quadrature of smooth
    // functions is fourth-order accurate in the colatitude direction.
    let mut z_band = vec![1.0; nt];
    z_band[nt - 1] = -1.0;
    for b in 1..=rings {
        let z_mid = 0.5 * (te[b].cos() + te[b + 1].cos());
        let th_mid = 0.5 * (te[b] + te[b + 1]);
        z_band[b] = z_mid / 3.0 + 2.0 * th_mid.cos() / 3.0;
    }
    let theta_band: Vec<f64> = z_band.iter().map(|z: &f64| z.clamp(-1.0, 1.0).acos()).collect();
    let s_band: Vec<f64> = z_band.iter().map(|z: &f64| (1.0 - z * z).max(0.0).sqrt()).collect();

    let mut nodes = vec![[0.0; 3]; n];
    let mut weights = vec![0.0; n];
    nodes[0] = [0.0, 0.0, 1.0];
    nodes[south] = [0.0, 0.0, -1.0];
    weights[0] = 2.0 * PI * (1.0 - te[1].cos());
    weights[south] = 2.0 * PI * (1.0 + te[nt - 1].cos());
    for b in 1..=rings {
        let area = dphi * (te[b].cos() - te[b + 1].cos());
        for j in 0..np {
            let phi = (j as f64 + 0.5) * dphi;
            let i = ring_node(b, j);
            nodes[i] = [s_band[b] * phi.cos(), s_band[b] * phi.sin(), z_band[b]];
            weights[i] = area;
        }
    }
    // The two caps are equal by symmetry; rounding aside, fix them so the
    // weights sum to 4 pi as closely as floating point allows.
    let ring_total: f64 = weights[1..south].iter().sum();
    let cap = 0.5 * (4.0 * PI - ring_total);
    weights[0] = cap;
    weights[south] = cap;

    // Band-level weights for the transmissibility calibration.
    let mut w_band = vec![0.0; nt];
    w_band[0] = cap;
    w_band[nt - 1] = cap;
    for b in 1..=rings {
        w_band[b] = weights[ring_node(b, 0)] * np as f64;
    }

    // North-south totals T_k between band k and k+1, calibrated so that
    // z = cos(theta) satisfies L z = -2 z exactly.
    let mut t_ns = vec![0.0; nt - 1];
    for k in 0..nt - 1 {
        let prev = if k == 0 { 0.0 } else { t_ns[k - 1] * (z_band[k - 1] - z_band[k]) };
        t_ns[k] = (-2.0 * z_band[k] * w_band[k] - prev) / (z_band[k + 1] - z_band[k]);
    }
    for k in 0..(nt - 1) / 2 {
        let m = 0.5 * (t_ns[k] + t_ns[nt - 2 - k]);
        t_ns[k] = m;
        t_ns[nt - 2 - k] = m;
    }

    let mut edges = Vec::new();
    // Caps to first/last ring.
    for j in 0..np {
        let i = ring_node(1, j);
        edges.push(Edge {
            a: 0,
            b: i,
            length: te[1].sin() * dphi,
            distance: distance_unchecked(&nodes[0], &nodes[i]),
            transmissibility: t_ns[0] / np as f64,
            split: te[1] / theta_band[1],
        });
    }
    for b in 1..=rings {
        // East-west interfaces, calibrated on the sin(theta) cos(phi) harmonic.
        let w_cell = w_band[b] / np as f64;
        let ns = (t_ns[b] * (s_band[b + 1] - s_band[b]) + t_ns[b - 1] * (s_band[b - 1] - s_band[b]))
            / np as f64;
        let t_ew = (-2.0 * s_band[b] * w_cell - ns) / (2.0 * (dphi.cos() - 1.0) * s_band[b]);
        for j in 0..np {
            let i = ring_node(b, j);
            let k = ring_node(b, j + 1);
            edges.push(Edge {
                a: i,
                b: k,
                length: te[b + 1] - te[b],
                distance: distance_unchecked(&nodes[i], &nodes[k]),
                transmissibility: t_ew,
                split: 0.5,
            });
        }
        if b < rings {
            for j in 0..np {
                let i = ring_node(b, j);
                let k = ring_node(b + 1, j);
                edges.push(Edge {
                    a: i,
                    b: k,
                    length: te[b + 1].sin() * dphi,
                    distance: distance_unchecked(&nodes[i], &nodes[k]),
                    transmissibility: t_ns[b] / np as f64,
                    split: (te[b + 1] - theta_band[b]) / (theta_band[b + 1] - theta_band[b]),
                });
            }
        }
    }
    for j in 0..np {
        let i = ring_node(rings, j);
        edges.push(Edge {
            a: i,
            b: south,
            length: te[nt - 1].sin() * dphi,
            distance: distance_unchecked(&nodes[i], &nodes[south]),
            transmissibility: t_ns[nt - 2] / np as f64,
            split: (te[nt - 1] - theta_band[rings]) / (PI - theta_band[rings]),
        });
    }
    // Calibration keeps every coefficient within a few percent of the
    // geometric ratio; fall back to it if a degenerate grid ever breaks that.
    for e in &mut edges {
        if !(e.transmissibility > 0.0) {
            e.transmissibility = e.length / e.distance;
        }
    }
    finish(3, nodes, weights, edges, Resolution::LatLon { n_theta: nt, n_phi: np }, te)
}

fn finish(
    dim: usize,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    edges: Vec<Edge>,
    resolution: Resolution,
    theta_edges: Vec<f64>,
) -> SphereGrid {
    let n = nodes.len();
    let mut adjacency = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.a].push(Neighbor { node: e.b, edge: k });
        adjacency[e.b].push(Neighbor { node: e.a, edge: k });
    }
    let grad_stencil = (0..n)
        .map(|i| gradient_stencil(&nodes, &edges, &adjacency[i], i, weights[i]))
        .collect();
    SphereGrid {
        dim,
        nodes,
        weights,
        edges,
        adjacency,
        resolution,
        theta_edges,
        grad_stencil,
        cost_cache: OnceLock::new(),
    }
}

/// Gradient stencil `c_ij = l_ij (1 - s_ij) u_ij / w_i`, where `u_ij` is the
/// unit direction at node i towards node j and `s_ij` the fraction of the
/// way from i to the shared face.
///
/// This is the negative adjoint of the flux-form divergence that
/// interpolates normal components linearly to the true face position, so
/// the divergence stays consistent even where faces are not halfway between
/// centres (the polar caps).
fn gradient_stencil(nodes: &[Vec3], edges: &[Edge], nbrs: &[Neighbor], i: usize, w: f64) -> Vec<(usize, Vec3)> {
    nbrs.iter()
        .map(|nb| {
            let e = &edges[nb.edge];
            let s_i = if e.a == i { e.split } else { 1.0 - e.split };
            let u = scale(1.0 / e.distance, &log_map(&nodes[i], &nodes[nb.node]));
            (nb.node, scale(e.length * (1.0 - s_i) / w, &u))
        })
        .collect()
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// |S^{d-1}|: 2 pi or 4 pi.
    pub fn total_area(&self) -> f64 {
        if self.dim == 2 {
            2.0 * PI
        } else {
            4.0 * PI
        }
    }

    /// Largest centre-to-centre neighbour distance.
    pub fn mesh_width(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).fold(0.0, f64::max)
    }

    /// Smallest centre-to-centre neighbour distance.
    pub fn min_spacing(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).fold(f64::INFINITY, f64::min)
    }

    /// Index of the cell containing the unit vector `p`.
    pub fn locate(&self, p: &Vec3) -> usize {
        match self.resolution {
            Resolution::Circle { n } => {
                let h = 2.0 * PI / n as f64;
                let a = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                ((a / h + 0.5).floor() as usize) % n
            }
            Resolution::LatLon { n_theta, n_phi } => {
                let theta = p[2].clamp(-1.0, 1.0).acos();
                let te = &self.theta_edges;
                if theta < te[1] {
                    return 0;
                }
                if theta >= te[n_theta - 1] {
                    return self.len() - 1;
                }
                // Bands are uniform between the caps.
                let h = PI / (n_theta - 1) as f64;
                let b = (((theta - te[1]) / h).floor() as usize + 1).min(n_theta - 2);
                let dphi = 2.0 * PI / n_phi as f64;
                let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                let j = ((phi / dphi).floor() as usize).min(n_phi - 1);
                1 + (b - 1) * n_phi + j
            }
        }
    }

    /// Human-readable label of the grid kind.
    pub fn kind(&self) -> &'static str {
        match self.resolution {
            Resolution::Circle { .. } => "circle",
            Resolution::LatLon { .. } => "latlon",
        }
    }
}
