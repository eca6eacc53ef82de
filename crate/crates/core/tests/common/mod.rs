//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vicsek_core::sphere::{build_grid, Resolution, SphereGrid};
use vicsek_core::Density;

pub fn sphere(nt: usize, np: usize) -> Arc<SphereGrid> {
    Arc::new(build_grid(3, Resolution::LatLon { n_theta: nt, n_phi: np }).unwrap())
}

pub fn circle(n: usize) -> Arc<SphereGrid> {
    Arc::new(build_grid(2, Resolution::Circle { n }).unwrap())
}

/// Random density with independent node masses in [0.05, 1).
pub fn rough_density(grid: &Arc<SphereGrid>, rng: &mut ChaCha8Rng) -> Density {
    let v = (0..grid.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
    Density::normalized(Arc::clone(grid), v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Min-cost transport by successive shortest augmenting paths (Bellman-Ford
/// on the residual graph); an oracle independent of the simplex code.
pub fn ssp_transport(a: &[f64], b: &[f64], c: &dyn Fn(usize, usize) -> f64) -> f64 {
    let n = a.len();
    let m = b.len();
    let mut flow = vec![vec![0.0f64; m]; n];
    let mut sa: Vec<f64> = a.to_vec();
    let mut sb: Vec<f64> = b.to_vec();
    let eps = 1e-15;
    loop {
        // Nodes: sources 0..n, sinks n..n+m. Multi-source Bellman-Ford.
        let total = n + m;
        let mut dist = vec![f64::INFINITY; total];
        let mut prev = vec![usize::MAX; total];
        for i in 0..n {
            if sa[i] > eps {
                dist[i] = 0.0;
            }
        }
        if dist.iter().all(|d| d.is_infinite()) {
            break;
        }
        for _ in 0..total {
            let mut changed = false;
            for i in 0..n {
                for j in 0..m {
                    // Forward arc always available.
                    if dist[i] + c(i, j) < dist[n + j] - 1e-15 {
                        dist[n + j] = dist[i] + c(i, j);
                        prev[n + j] = i;
                        changed = true;
                    }
                    if flow[i][j] > eps && dist[n + j] - c(i, j) < dist[i] - 1e-15 {
                        dist[i] = dist[n + j] - c(i, j);
                        prev[i] = n + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // Pick the reachable sink with remaining demand and smallest distance.
        let t = (0..m)
            .filter(|&j| sb[j] > eps && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].partial_cmp(&dist[n + y]).unwrap());
        let Some(t) = t else { break };
        let mut path = vec![n + t];
        let mut u = n + t;
        while prev[u] != usize::MAX {
            u = prev[u];
            path.push(u);
        }
        path.reverse();
        let s = path[0];
        let mut amount = sa[s].min(sb[t]);
        for w in path.windows(2) {
            if w[0] >= n {
                amount = amount.min(flow[w[1]][w[0] - n]);
            }
        }
        for w in path.windows(2) {
            if w[0] < n {
                flow[w[0]][w[1] - n] += amount;
            } else {
                flow[w[1]][w[0] - n] -= amount;
            }
        }
        sa[s] -= amount;
        sb[t] -= amount;
    }
    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            cost += flow[i][j] * c(i, j);
        }
    }
    cost
}
