//! Cubic barycentric moments ∫_T φ λ^α (|α| = 3) of a fine piecewise
//! constant φ for every element of the hierarchy, computed bottom-up.
//!
//! All lower moments follow from Σλ_i = 1: ∫φλ_i and ∫φ are fixed linear
//! combinations of the ten cubic ones, and the bubble moment is M[(1,1,1)].

use super::OpCounter;
use crate::error::Result;
use crate::mesh::MeshHierarchy;
use crate::spaces::{prolong, P0Fn};

/// Multi-indices with |α| = 3.
pub(crate) const CUBIC: [[usize; 3]; 10] = [
    [3, 0, 0],
    [0, 3, 0],
    [0, 0, 3],
    [2, 1, 0],
    [2, 0, 1],
    [1, 2, 0],
    [0, 2, 1],
    [1, 0, 2],
    [0, 1, 2],
    [1, 1, 1],
];

const BUBBLE: usize = 9;

#[inline]
fn cubic_index(a: [usize; 3]) -> usize {
    match a {
        [3, 0, 0] => 0,
        [0, 3, 0] => 1,
        [0, 0, 3] => 2,
        [2, 1, 0] => 3,
        [2, 0, 1] => 4,
        [1, 2, 0] => 5,
        [0, 2, 1] => 6,
        [1, 0, 2] => 7,
        [0, 1, 2] => 8,
        _ => BUBBLE,
    }
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Exact ∫_T λ^α / |T| = 2·α!/(|α|+2)!.
fn unit_moment(a: [usize; 3]) -> f64 {
    2.0 * fact(a[0]) * fact(a[1]) * fact(a[2]) / fact(a[0] + a[1] + a[2] + 2)
}

/// Cubic moments per lineage id.
#[derive(Clone, Debug)]
pub struct Moments {
    m: Vec<[f64; 10]>,
}

impl Moments {
    /// Moments of φ, which is first prolonged to the finest level.
    pub fn new(h: &MeshHierarchy, phi: &P0Fn, ops: Option<&OpCounter>) -> Result<Self> {
        super::dual_constants_verified()?;
        let lf = h.finest_level();
        let fine = if phi.level == lf {
            phi.check(h)?;
            phi.clone()
        } else {
            prolong(h, phi, lf)?
        };
        let mut m = vec![[0.0; 10]; h.total_elements()];
        let leaf: [f64; 10] = CUBIC.map(unit_moment);
        let mesh = h.finest();
        for (t, el) in mesh.elements.iter().enumerate() {
            let s = fine.coeffs[t] * mesh.area[t];
            m[el.lineage] = leaf.map(|u| u * s);
        }
        OpCounter::add(ops, mesh.num_elements());
        for l in (0..lf).rev() {
            let coarse = h.mesh(l);
            let finer = h.mesh(l + 1);
            for t in 0..coarse.num_elements() {
                if !h.is_refined(l, t) {
                    continue;
                }
                let mut acc = [0.0; 10];
                for &c in h.children(l, t) {
                    let tr = restriction_transform(h.child_bary(l + 1, c));
                    let mc = &m[finer.elements[c].lineage];
                    for (a, row) in acc.iter_mut().zip(&tr) {
                        *a += row.iter().zip(mc).map(|(x, y)| x * y).sum::<f64>();
                    }
                    OpCounter::add(ops, 1);
                }
                m[coarse.elements[t].lineage] = acc;
            }
        }
        Ok(Self { m })
    }

    pub fn cubic(&self, lineage: usize) -> &[f64; 10] {
        &self.m[lineage]
    }

    /// ∫_T φ.
    pub fn integral(&self, lineage: usize) -> f64 {
        let m = &self.m[lineage];
        m[0] + m[1] + m[2] + 3.0 * (m[3] + m[4] + m[5] + m[6] + m[7] + m[8]) + 6.0 * m[BUBBLE]
    }

    /// ∫_T φ λ_i for the three local vertices.
    pub fn first(&self, lineage: usize) -> [f64; 3] {
        let m = &self.m[lineage];
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..3 {
                for k in j..3 {
                    let mut a = [0usize; 3];
                    a[i] += 1;
                    a[j] += 1;
                    a[k] += 1;
                    let w = if j == k { 1.0 } else { 2.0 };
                    s += w * m[cubic_index(a)];
                }
            }
            *o = s;
        }
        out
    }

    /// ∫_T φ λ_1λ_2λ_3.
    pub fn bubble(&self, lineage: usize) -> f64 {
        self.m[lineage][BUBBLE]
    }
}

/// Matrix R with M_father[α] = Σ_γ R[α][γ] M_child[γ] for one child whose
/// vertices have father barycentrics `bary` (row k = child vertex k).
pub(crate) fn restriction_transform(bary: &[[f64; 3]; 3]) -> [[f64; 10]; 10] {
    let mut r = [[0.0; 10]; 10];
    for (ai, a) in CUBIC.iter().enumerate() {
        let mut factors = [0usize; 3];
        let mut n = 0;
        for (i, &p) in a.iter().enumerate() {
            for _ in 0..p {
                factors[n] = i;
                n += 1;
            }
        }
        // λ^T_i = Σ_k bary[k][i] λ^C_k.
        for k1 in 0..3 {
            let c1 = bary[k1][factors[0]];
            if c1 == 0.0 {
                continue;
            }
            for k2 in 0..3 {
                let c2 = c1 * bary[k2][factors[1]];
                if c2 == 0.0 {
                    continue;
                }
                for k3 in 0..3 {
                    let c3 = c2 * bary[k3][factors[2]];
                    if c3 == 0.0 {
                        continue;
                    }
                    let mut g = [0usize; 3];
                    g[k1] += 1;
                    g[k2] += 1;
                    g[k3] += 1;
                    r[ai][cubic_index(g)] += c3;
                }
            }
        }
    }
    r
}
