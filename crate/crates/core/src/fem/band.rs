//! Symmetric banded LDL^T with reverse Cuthill–McKee ordering. The FEM
//! systems here are either SPD after pinning one node (Poisson solves) or
//! symmetric quasi-definite (Newton systems); pivots are monitored and a
//! breakdown is reported rather than patched.

use crate::{Error, Result};

/// Sparsity-derived ordering shared by all matrices on a mesh.
#[derive(Debug, Clone)]
pub struct BandLayout {
    pub perm: Vec<usize>,  // perm[new] = old
    pub iperm: Vec<usize>, // iperm[old] = new
    pub bandwidth: usize,
    pub n: usize,
}

impl BandLayout {
    /// Build from an adjacency list (graph of the matrix).
    pub fn from_adjacency(adj: &[Vec<usize>]) -> BandLayout {
        let n = adj.len();
        let start = pseudo_peripheral(adj);
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !seen[v]).collect();
            nbrs.sort_by_key(|&v| adj[v].len());
            for v in nbrs {
                seen[v] = true;
                queue.push_back(v);
            }
        }
        // pick up disconnected leftovers (should not happen on a mesh)
        for u in 0..n {
            if !seen[u] {
                order.push(u);
            }
        }
        order.reverse();
        let mut iperm = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            iperm[old] = new;
        }
        let mut bw = 0usize;
        for u in 0..n {
            for &v in &adj[u] {
                bw = bw.max(iperm[u].abs_diff(iperm[v]));
            }
        }
        BandLayout { perm: order, iperm, bandwidth: bw, n }
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    if n == 0 {
        return 0;
    }
    let mut start = (0..n).min_by_key(|&u| adj[u].len()).unwrap_or(0);
    let mut last_ecc = 0usize;
    for _ in 0..4 {
        let (far, ecc) = bfs_farthest(adj, start);
        if ecc <= last_ecc {
            break;
        }
        last_ecc = ecc;
        start = far;
    }
    start
}

fn bfs_farthest(adj: &[Vec<usize>], s: usize) -> (usize, usize) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[s] = 0;
    queue.push_back(s);
    let mut far = (s, 0);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                if dist[v] > far.1 {
                    far = (v, dist[v]);
                }
                queue.push_back(v);
            }
        }
    }
    far
}

/// Banded LDL^T factorization in the layout ordering.
pub struct BandFactor {
    layout: BandLayout,
    /// row-major lower band: band[i * (bw+1) + d] = L[i][i-d] (d = 0 is D)
    band: Vec<f64>,
    bw: usize,
}

impl BandFactor {
    /// Factor a symmetric matrix given by a lookup of entries. `entry(i, j)`
    /// is the matrix value in ORIGINAL indices.
    pub fn factor<F: Fn(usize, usize) -> f64>(layout: &BandLayout, entry: F) -> Result<BandFactor> {
        let n = layout.n;
        let bw = layout.bandwidth;
        let w = bw + 1;
        let mut band = vec![0.0f64; n * w];
        for i in 0..n {
            for d in 0..=bw.min(i) {
                let j = i - d;
                band[i * w + d] = entry(layout.perm[i], layout.perm[j]);
            }
        }
        let mut scale: f64 = 0.0;
        for i in 0..n {
            scale = scale.max(band[i * w].abs());
        }
        let tiny = 1e-14 * scale.max(1e-300);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                let mut sum = band[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= band[i * w + (i - k)] * band[j * w + (j - k)] * band[k * w];
                }
                band[i * w + (i - j)] = sum / band[j * w];
            }
            let mut d = band[i * w];
            for k in j0..i {
                let l = band[i * w + (i - k)];
                d -= l * l * band[k * w];
            }
            if d.abs() < tiny {
                return Err(Error::SolverBreakdown(format!(
                    "LDL^T pivot {d:.3e} at row {i} (scale {scale:.3e})"
                )));
            }
            band[i * w] = d;
        }
        Ok(BandFactor { layout: layout.clone(), band, bw })
    }

    /// Solve A x = b (original index order).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.layout.n;
        let w = self.bw + 1;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = b[self.layout.perm[i]];
        }
        // forward: L z = b
        for i in 0..n {
            let j0 = i.saturating_sub(self.bw);
            let mut s = y[i];
            for k in j0..i {
                s -= self.band[i * w + (i - k)] * y[k];
            }
            y[i] = s;
        }
        // diagonal
        for i in 0..n {
            y[i] /= self.band[i * w];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let top = (i + self.bw).min(n - 1);
            let mut s = y[i];
            for k in (i + 1)..=top {
                s -= self.band[k * w + (k - i)] * y[k];
            }
            y[i] = s;
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.layout.perm[i]] = y[i];
        }
        x
    }

    /// Number of negative pivots (discrete Morse index of the operator).
    pub fn negative_pivots(&self) -> usize {
        let w = self.bw + 1;
        (0..self.layout.n).filter(|&i| self.band[i * w] < 0.0).count()
    }

    /// Smallest pivot magnitude relative to the largest (conditioning hint).
    pub fn pivot_ratio(&self) -> f64 {
        let w = self.bw + 1;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.layout.n {
            let d = self.band[i * w].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        lo / hi.max(1e-300)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // 1D Laplacian with Dirichlet ends
        let n = 40;
        let mut adj = vec![Vec::new(); n];
        for i in 0..n - 1 {
            adj[i].push(i + 1);
            adj[i + 1].push(i);
        }
        let layout = BandLayout::from_adjacency(&adj);
        assert!(layout.bandwidth >= 1);
        let entry = |i: usize, j: usize| -> f64 {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        };
        let f = BandFactor::factor(&layout, entry).unwrap();
        let b = vec![1.0; n];
        let x = f.solve(&b);
        // residual
        for i in 0..n {
            let mut r = 2.0 * x[i] - b[i];
            if i > 0 {
                r -= x[i - 1];
            }
            if i + 1 < n {
                r -= x[i + 1];
            }
            assert!(r.abs() < 1e-10, "residual {r} at {i}");
        }
        assert_eq!(f.negative_pivots(), 0);
    }

    #[test]
    fn indefinite_pivots_counted() {
        let mut adj = vec![Vec::new(); 3];
        adj[0].push(1);
        adj[1].push(0);
        adj[1].push(2);
        adj[2].push(1);
        let layout = BandLayout::from_adjacency(&adj);
        let entry = |i: usize, j: usize| -> f64 {
            match (i, j) {
                (0, 0) => 2.0,
                (1, 1) => -1.5,
                (2, 2) => 3.0,
                _ if i.abs_diff(j) == 1 => 0.25,
                _ => 0.0,
            }
        };
        let f = BandFactor::factor(&layout, entry).unwrap();
        assert_eq!(f.negative_pivots(), 1);
    }
}
