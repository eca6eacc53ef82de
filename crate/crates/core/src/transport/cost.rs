use crate::sphere::{distance_unchecked, SphereGrid};

/// Dense matrix of squared geodesic distances between grid nodes.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Entry `(i, j)` is `d(w_i, w_j)^2`.
pub fn cost_matrix(grid: &SphereGrid) -> CostMatrix {
    let n = grid.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance_unchecked(&grid.nodes[i], &grid.nodes[j]);
            data[i * n + j] = d * d;
            data[j * n + i] = d * d;
        }
    }
    CostMatrix { n, data }
}
