//! Envelope (skyline) Cholesky factorization under a reverse Cuthill-McKee
//! ordering. Mesh Laplacians have small profile after RCM, which keeps the
//! dense envelope cheap.

use std::collections::VecDeque;

use crate::geometry::SparseSymMatrix;

/// Reverse Cuthill-McKee permutation; `order[new] = old`.
pub fn reverse_cuthill_mckee(neighbours: &[Vec<usize>]) -> Vec<usize> {
    let n = neighbours.len();
    let degree: Vec<usize> = neighbours.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (usize, usize) {
        // Returns (eccentricity, a min-degree node in the last level).
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut q = VecDeque::from([start]);
        let mut last = start;
        while let Some(v) = q.pop_front() {
            if dist[v] > dist[last] || (dist[v] == dist[last] && degree[v] < degree[last]) {
                last = v;
            }
            for &w in &neighbours[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        (dist[last], last)
    };

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start node.
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start);
        for _ in 0..4 {
            let (e2, f2) = bfs_levels(far);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        visited[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = neighbours[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            next.dedup();
            for w in next {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

impl SkylineCholesky {
    pub fn factor(a: &SparseSymMatrix<f64>) -> Result<Self, NotPositiveDefinite> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(&a.neighbours());
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in &a.entries {
            let (pi, pj) = (inv[i], inv[j]);
            let (lo, hi) = (pi.min(pj), pi.max(pj));
            first[hi] = first[hi].min(lo);
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offset[n]];
        for &(i, j, v) in &a.entries {
            let (pi, pj) = (inv[i], inv[j]);
            let (lo, hi) = (pi.min(pj), pi.max(pj));
            values[offset[hi] + lo - first[hi]] += v;
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = offset[i];
            for j in fi..=i {
                let fj = first[j];
                let row_j = offset[j];
                let k0 = fi.max(fj);
                let mut s = values[row_i + j - fi];
                for k in k0..j {
                    s -= values[row_i + k - fi] * values[row_j + k - fj];
                }
                if j < i {
                    values[row_i + j - fi] = s / values[row_j + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(NotPositiveDefinite { row: i, pivot: s });
                    }
                    values[row_i + i - fi] = s.sqrt();
                }
            }
        }
        Ok(SkylineCholesky {
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries in the factor envelope.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}
