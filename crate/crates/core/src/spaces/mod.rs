//! Discrete functions on hierarchy levels, Haar facet atoms, reduced facet
//! sets, transfers and exact inner products.

mod haar;
pub mod quadrature;
mod star;
mod tilde;

pub use haar::{haar, HaarAtom};
pub use star::{lagrange_eval, lagrange_nodes, to_reference, StarBasis, StarSplit};
pub use tilde::{tilde_facet_sets, TildeFacetSets};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, MeshHierarchy};

/// Piecewise constant function on level ℓ, one coefficient per element.
#[derive(Clone, Debug, PartialEq)]
pub struct P0Fn {
    pub level: usize,
    pub coeffs: Vec<f64>,
}

impl P0Fn {
    pub fn new(level: usize, coeffs: Vec<f64>) -> Self {
        Self { level, coeffs }
    }

    pub fn zeros(h: &MeshHierarchy, level: usize) -> Self {
        Self::new(level, vec![0.0; h.mesh(level).num_elements()])
    }

    pub fn constant(h: &MeshHierarchy, level: usize, c: f64) -> Self {
        Self::new(level, vec![c; h.mesh(level).num_elements()])
    }

    /// Checks the coefficient count against the hierarchy.
    pub fn check(&self, h: &MeshHierarchy) -> Result<()> {
        h.check_level(self.level)?;
        let n = h.mesh(self.level).num_elements();
        if self.coeffs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "P0 function on level {} has {} coefficients, mesh has {n} elements",
                self.level,
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}

/// Discontinuous piecewise linear function: values at the three local
/// vertices of every element.
#[derive(Clone, Debug, PartialEq)]
pub struct P1DiscFn {
    pub level: usize,
    pub values: Vec<[f64; 3]>,
}

impl P1DiscFn {
    pub fn zeros(level: usize, n: usize) -> Self {
        Self {
            level,
            values: vec![[0.0; 3]; n],
        }
    }

    /// Elementwise constant function as a P1DiscFn.
    pub fn from_p0(phi: &P0Fn) -> Self {
        Self {
            level: phi.level,
            values: phi.coeffs.iter().map(|&c| [c; 3]).collect(),
        }
    }

    /// Elementwise means.
    pub fn means(&self) -> P0Fn {
        P0Fn::new(
            self.level,
            self.values.iter().map(|v| (v[0] + v[1] + v[2]) / 3.0).collect(),
        )
    }
}

/// ∫_T u v for linear u, v given by vertex values on a triangle of area `area`.
#[inline]
pub fn p1_local_inner(area: f64, u: &[f64; 3], v: &[f64; 3]) -> f64 {
    let su = u[0] + u[1] + u[2];
    let sv = v[0] + v[1] + v[2];
    area / 12.0 * (u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + su * sv)
}

/// Exact L² inner product of two P1DiscFn on the same mesh.
pub fn l2_inner_p1(mesh: &Mesh, u: &P1DiscFn, v: &P1DiscFn) -> f64 {
    u.values
        .iter()
        .zip(&v.values)
        .zip(&mesh.area)
        .map(|((a, b), &t)| p1_local_inner(t, a, b))
        .sum()
}

pub fn l2_norm_p1(mesh: &Mesh, u: &P1DiscFn) -> f64 {
    l2_inner_p1(mesh, u, u).sqrt()
}

/// Restriction of a linear function on a father to a child with the given
/// vertex barycentrics.
#[inline]
pub fn restrict_linear(bary: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    let f = |b: &[f64; 3]| b[0] * v[0] + b[1] * v[1] + b[2] * v[2];
    [f(&bary[0]), f(&bary[1]), f(&bary[2])]
}

/// The same P1DiscFn on the next finer level.
pub fn lift_p1(h: &MeshHierarchy, u: &P1DiscFn) -> Result<P1DiscFn> {
    let l = u.level + 1;
    h.check_level(l)?;
    let n = h.mesh(l).num_elements();
    let values = (0..n)
        .map(|t| restrict_linear(h.child_bary(l, t), &u.values[h.parent(l, t)]))
        .collect();
    Ok(P1DiscFn { level: l, values })
}

/// Injection P⁰(T_ℓ) → P⁰(T_m) for m ≥ ℓ.
pub fn prolong(h: &MeshHierarchy, phi: &P0Fn, to: usize) -> Result<P0Fn> {
    phi.check(h)?;
    h.check_level(to)?;
    if to < phi.level {
        return Err(Error::InvalidArgument(format!(
            "cannot prolong from level {} to coarser level {to}",
            phi.level
        )));
    }
    let mut c = phi.coeffs.clone();
    for l in phi.level + 1..=to {
        c = h.parents(l).iter().map(|&p| c[p]).collect();
    }
    Ok(P0Fn::new(to, c))
}

/// Transpose of [`prolong`] from level ℓ+1 to ℓ: sums child entries.
pub fn restrict_dual(h: &MeshHierarchy, fine_level: usize, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h.mesh(fine_level - 1).num_elements()];
    for (t, &p) in h.parents(fine_level).iter().enumerate() {
        out[p] += r[t];
    }
    out
}

/// Sparse injection matrix from level ℓ to level ℓ+1.
pub fn transfer_matrix(h: &MeshHierarchy, level: usize) -> Result<CsrMatrix> {
    h.check_level(level + 1)?;
    let p = h.parents(level + 1);
    let trip: Vec<(usize, usize, f64)> = p.iter().enumerate().map(|(t, &f)| (t, f, 1.0)).collect();
    CsrMatrix::from_triplets(p.len(), h.mesh(level).num_elements(), &trip)
}

/// Exact ∫φχ, evaluated on the finer of the two levels.
pub fn l2_inner_p0(h: &MeshHierarchy, phi: &P0Fn, chi: &P0Fn) -> Result<f64> {
    let lv = phi.level.max(chi.level);
    let a = prolong(h, phi, lv)?;
    let b = prolong(h, chi, lv)?;
    let m = h.mesh(lv);
    Ok(a.coeffs.iter().zip(&b.coeffs).zip(&m.area).map(|((x, y), t)| x * y * t).sum())
}

pub fn l2_norm_p0(h: &MeshHierarchy, phi: &P0Fn) -> Result<f64> {
    Ok(l2_inner_p0(h, phi, phi)?.sqrt())
}

/// Area-weighted ∫φ² for coefficient vectors on one mesh.
pub fn mass_norm_sq(mesh: &Mesh, x: &[f64]) -> f64 {
    x.iter().zip(&mesh.area).map(|(v, a)| v * v * a).sum()
}
