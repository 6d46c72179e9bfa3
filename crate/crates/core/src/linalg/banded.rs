//! Banded Cholesky for the P¹ stiffness systems of the dense oracles, with a
//! reverse Cuthill–McKee ordering to keep the band narrow.

use super::dense::dot;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Reverse Cuthill–McKee permutation of a structurally symmetric matrix.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs: Vec<usize> = Vec::new();
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node");
        let root = pseudo_peripheral(a, start, &degree);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&u| !visited[u]));
            nbrs.sort_by_key(|&u| (degree[u], u));
            for &u in &nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(a: &CsrMatrix, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let (levels, last) = bfs_levels(a, root);
        let far = last
            .into_iter()
            .min_by_key(|&u| degree[u])
            .unwrap_or(root);
        if levels <= ecc {
            break;
        }
        ecc = levels;
        root = far;
    }
    root
}

fn bfs_levels(a: &CsrMatrix, root: usize) -> (usize, Vec<usize>) {
    let n = a.rows();
    let mut dist = vec![usize::MAX; n];
    dist[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in a.row(v).0 {
                if dist[u] == usize::MAX {
                    dist[u] = depth + 1;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

/// Cholesky factor of a symmetrically permuted SPD band matrix.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// Row `i` stores L[i][i−bw ..= i] (leading slots unused near the top).
    band: Vec<f64>,
}

impl BandCholesky {
    /// Factors `a` after an RCM reordering.
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch(format!("{what} is not square")));
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0;
        for i in 0..n {
            for &j in a.row(i).0 {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let (idx, val) = a.row(i);
            let pi = inv[i];
            for (&j, &v) in idx.iter().zip(val) {
                let pj = inv[j];
                if pj <= pi {
                    band[pi * w + (bw - (pi - pj))] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let len = j - jlo;
                let a0 = i * w + (bw - (i - jlo));
                let b0 = j * w + (bw - (j - jlo));
                let s = band[i * w + (bw - (i - j))] - dot(&band[a0..a0 + len], &band[b0..b0 + len]);
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite {
                            what: what.to_string(),
                            pivot: perm[i],
                            value: s,
                        });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (bw - (i - j))] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, perm, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves A X = B for `k` right-hand sides stored row-major in `rhs`
    /// (row i holds the k values of unknown i). Overwrites `rhs`.
    pub fn solve_many(&self, rhs: &mut [f64], k: usize) {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        assert_eq!(rhs.len(), n * k);
        let mut x = vec![0.0; n * k];
        for (new, &old) in self.perm.iter().enumerate() {
            x[new * k..(new + 1) * k].copy_from_slice(&rhs[old * k..(old + 1) * k]);
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let (head, tail) = x.split_at_mut(i * k);
            let xi = &mut tail[..k];
            for j in lo..i {
                let l = self.band[i * w + (bw - (i - j))];
                if l != 0.0 {
                    let xj = &head[j * k..(j + 1) * k];
                    for (a, b) in xi.iter_mut().zip(xj) {
                        *a -= l * b;
                    }
                }
            }
            let inv = 1.0 / self.band[i * w + bw];
            xi.iter_mut().for_each(|v| *v *= inv);
        }
        for i in (0..n).rev() {
            let inv = 1.0 / self.band[i * w + bw];
            let (head, tail) = x.split_at_mut(i * k);
            let xi = &mut tail[..k];
            xi.iter_mut().for_each(|v| *v *= inv);
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let l = self.band[i * w + (bw - (i - j))];
                if l != 0.0 {
                    let xj = &mut head[j * k..(j + 1) * k];
                    for (a, b) in xj.iter_mut().zip(xi.iter()) {
                        *a -= l * b;
                    }
                }
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            rhs[old * k..(old + 1) * k].copy_from_slice(&x[new * k..(new + 1) * k]);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_many(&mut x, 1);
        x
    }
}
