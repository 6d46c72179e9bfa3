//! Local operators on P⁰ data: the coarse L² projection Π⁰_ℓ, the adjoint
//! Scott–Zhang operator J′_ℓ (averaged over the vertex patch), the bubble
//! adjoint B′_ℓ, the quasi-projection adjoint P′_ℓ = J′_ℓ + (1 − J′_ℓ)B′_ℓ,
//! Q_ℓ = Π⁰_ℓP′_ℓ, and localized differences P′_ℓ − P′_{ℓ−1}.
//!
//! The plain variant sums J′ over interior vertices, the tilde variant over
//! all vertices. With γ_z = ω(z) the dual functions are
//! φ_z = (α η_z + β)/|Ω(z)| on Ω(z), so on an element T with vertices
//! z_0, z_1, z_2 and a_z = ⟨·, η_z⟩/|Ω(z)| the value of J′ at vertex k is
//! α a_{z_k} + β Σ_i a_{z_i}.

mod moments;

pub use moments::Moments;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::mesh::{Mesh, MeshHierarchy};
use crate::spaces::{restrict_linear, P0Fn, P1DiscFn};
use crate::Variant;
use std::cell::Cell;
use std::sync::OnceLock;

/// Dual-basis constants for d = 2.
pub const ALPHA: f64 = 12.0;
pub const BETA: f64 = -3.0;

/// Counts local kernel evaluations, one per kernel on one mesh entity
/// (vertex coefficient, element value, child moment transfer, atom scaling).
#[derive(Debug, Default)]
pub struct OpCounter(Cell<u64>);

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn get(&self) -> u64 {
        self.0.get()
    }
    pub fn reset(&self) {
        self.0.set(0)
    }
    #[inline]
    pub fn add(c: Option<&OpCounter>, n: usize) {
        if let Some(c) = c {
            c.0.set(c.0.get() + n as u64);
        }
    }
}

/// Recovers (α, β) from the inverse of the P¹ mass matrix on a reference
/// triangle: |T|ψ_{T,z} = α λ_z + β.
pub fn derive_dual_constants() -> Result<(f64, f64)> {
    let area = 0.5;
    let m = DenseMatrix::from_fn(3, 3, |i, j| area / 12.0 * if i == j { 2.0 } else { 1.0 });
    let ch = Cholesky::new(&m, "reference P1 mass")?;
    // ψ_0 = Σ_j (M⁻¹)_{0j} λ_j: diagonal entry a, off-diagonal b ⇒ |T|ψ_0 = |T|(a−b)λ_0 + |T|b.
    let c = ch.solve(&[1.0, 0.0, 0.0]);
    Ok((area * (c[0] - c[1]), area * c[1]))
}

static DUAL_OK: OnceLock<bool> = OnceLock::new();

pub(crate) fn dual_constants_verified() -> Result<()> {
    let ok = *DUAL_OK.get_or_init(|| match derive_dual_constants() {
        Ok((a, b)) => (a - ALPHA).abs() < 1e-12 && (b - BETA).abs() < 1e-12,
        Err(_) => false,
    });
    if ok {
        Ok(())
    } else {
        Err(Error::Audit("dual-basis constants do not match the reference mass inverse".into()))
    }
}

/// Π⁰_ℓ: area-weighted averages over descendants.
pub fn l2_project_p0(h: &MeshHierarchy, phi: &P0Fn, level: usize) -> Result<P0Fn> {
    phi.check(h)?;
    h.check_level(level)?;
    if level > phi.level {
        return crate::spaces::prolong(h, phi, level);
    }
    let mut integ: Vec<f64> = phi.coeffs.iter().zip(&h.mesh(phi.level).area).map(|(c, a)| c * a).collect();
    for l in (level + 1..=phi.level).rev() {
        integ = crate::spaces::restrict_dual(h, l, &integ);
    }
    let m = h.mesh(level);
    Ok(P0Fn::new(level, integ.iter().zip(&m.area).map(|(s, a)| s / a).collect()))
}

#[inline]
fn vertex_active(mesh: &Mesh, z: usize, variant: Variant) -> bool {
    match variant {
        Variant::Plain => !mesh.is_boundary_vertex[z],
        Variant::Tilde => true,
    }
}

/// B′ coefficient of element t: ⟨φ, η_b⟩/⟨η_b, 1⟩ with ⟨η_b, 1⟩ = |T|/60.
#[inline]
fn beta_coeff(mesh: &Mesh, t: usize, mom: &Moments) -> f64 {
    mom.bubble(mesh.elements[t].lineage) / (mesh.area[t] / 60.0)
}

/// Patch coefficient of vertex z. With `with_bubble` this is the P′
/// coefficient ⟨φ − B′φ, η_z⟩/|Ω(z)|, otherwise the J′ coefficient.
fn vertex_coeff(mesh: &Mesh, z: usize, mom: &Moments, variant: Variant, with_bubble: bool) -> f64 {
    if !vertex_active(mesh, z, variant) {
        return 0.0;
    }
    let mut s = 0.0;
    let mut patch = 0.0;
    for &t in mesh.vertex_elements.get(z) {
        let k = mesh.local_index(t, z).unwrap();
        let mut v = mom.first(mesh.elements[t].lineage)[k];
        if with_bubble {
            v -= beta_coeff(mesh, t, mom) * mesh.area[t] / 3.0;
        }
        s += v;
        patch += mesh.area[t];
    }
    s / patch
}

#[inline]
fn combine(a: [f64; 3], base: f64) -> [f64; 3] {
    let sum = a[0] + a[1] + a[2];
    [
        base + ALPHA * a[0] + BETA * sum,
        base + ALPHA * a[1] + BETA * sum,
        base + ALPHA * a[2] + BETA * sum,
    ]
}

/// Per-vertex coefficient cache for one level; entries computed on demand.
struct VertexCache<'a> {
    mesh: &'a Mesh,
    mom: &'a Moments,
    variant: Variant,
    with_bubble: bool,
    a: Vec<f64>,
    ops: Option<&'a OpCounter>,
}

impl<'a> VertexCache<'a> {
    fn new(mesh: &'a Mesh, mom: &'a Moments, variant: Variant, with_bubble: bool, ops: Option<&'a OpCounter>) -> Self {
        Self {
            mesh,
            mom,
            variant,
            with_bubble,
            a: vec![f64::NAN; mesh.num_vertices()],
            ops,
        }
    }

    fn get(&mut self, z: usize) -> f64 {
        if self.a[z].is_nan() {
            self.a[z] = vertex_coeff(self.mesh, z, self.mom, self.variant, self.with_bubble);
            OpCounter::add(self.ops, 1);
        }
        self.a[z]
    }

    /// Vertex values of the operator output on element t.
    fn element(&mut self, t: usize) -> [f64; 3] {
        let v = self.mesh.elements[t].vertices;
        let a = [self.get(v[0]), self.get(v[1]), self.get(v[2])];
        let base = if self.with_bubble {
            beta_coeff(self.mesh, t, self.mom)
        } else {
            0.0
        };
        OpCounter::add(self.ops, 1);
        combine(a, base)
    }
}

/// J′_ℓφ.
pub fn sz_dual_apply(h: &MeshHierarchy, level: usize, phi: &P0Fn, variant: Variant) -> Result<P1DiscFn> {
    h.check_level(level)?;
    let mom = Moments::new(h, phi, None)?;
    let mesh = h.mesh(level);
    let mut c = VertexCache::new(mesh, &mom, variant, false, None);
    Ok(P1DiscFn {
        level,
        values: (0..mesh.num_elements()).map(|t| c.element(t)).collect(),
    })
}

/// B′_ℓφ.
pub fn bubble_dual_apply(h: &MeshHierarchy, level: usize, phi: &P0Fn) -> Result<P0Fn> {
    h.check_level(level)?;
    let mom = Moments::new(h, phi, None)?;
    let mesh = h.mesh(level);
    Ok(P0Fn::new(
        level,
        (0..mesh.num_elements()).map(|t| beta_coeff(mesh, t, &mom)).collect(),
    ))
}

/// P′_ℓφ on every element of level ℓ from precomputed moments.
pub fn p_dual_with(h: &MeshHierarchy, level: usize, mom: &Moments, variant: Variant, ops: Option<&OpCounter>) -> P1DiscFn {
    let mesh = h.mesh(level);
    let mut c = VertexCache::new(mesh, mom, variant, true, ops);
    P1DiscFn {
        level,
        values: (0..mesh.num_elements()).map(|t| c.element(t)).collect(),
    }
}

/// P′_ℓφ = J′_ℓφ + B′_ℓφ − J′_ℓB′_ℓφ.
pub fn p_dual_apply(h: &MeshHierarchy, level: usize, phi: &P0Fn, variant: Variant) -> Result<P1DiscFn> {
    h.check_level(level)?;
    let mom = Moments::new(h, phi, None)?;
    Ok(p_dual_with(h, level, &mom, variant, None))
}

/// Q_ℓφ = Π⁰_ℓP′_ℓφ (Q̃_ℓ in the tilde variant).
pub fn q_apply(h: &MeshHierarchy, level: usize, phi: &P0Fn, variant: Variant) -> Result<P0Fn> {
    h.check_level(level)?;
    let mom = Moments::new(h, phi, None)?;
    Ok(q_with(h, level, &mom, variant))
}

/// Q_ℓ from precomputed moments: β_T + Σ_i a_{z_i} per element.
pub fn q_with(h: &MeshHierarchy, level: usize, mom: &Moments, variant: Variant) -> P0Fn {
    let p = p_dual_with(h, level, mom, variant, None);
    p.means()
}

/// (P′_ℓ − P′_{ℓ−1})φ on level ℓ, computed on `mask` only.
#[derive(Clone, Debug)]
pub struct MlDifference {
    pub values: P1DiscFn,
    /// Elements of level ℓ where the difference was evaluated, ascending.
    pub mask: Vec<usize>,
}

/// Localized multilevel difference; ℓ = 0 gives P′_0φ on all of T_0.
pub fn ml_difference(h: &MeshHierarchy, level: usize, phi: &P0Fn, variant: Variant) -> Result<MlDifference> {
    h.check_level(level)?;
    let mom = Moments::new(h, phi, None)?;
    Ok(ml_difference_with(h, level, &mom, variant, None))
}

/// Order-2 patch of the new elements of level ℓ ≥ 1.
pub fn difference_mask(h: &MeshHierarchy, level: usize) -> Vec<usize> {
    if level == 0 {
        return (0..h.mesh(0).num_elements()).collect();
    }
    h.mesh(level).element_patch(&h.new_elements(level), 2)
}

pub fn ml_difference_with(
    h: &MeshHierarchy,
    level: usize,
    mom: &Moments,
    variant: Variant,
    ops: Option<&OpCounter>,
) -> MlDifference {
    let mesh = h.mesh(level);
    let mask = difference_mask(h, level);
    let mut values = P1DiscFn::zeros(level, mesh.num_elements());
    let mut fine = VertexCache::new(mesh, mom, variant, true, ops);
    if level == 0 {
        for &t in &mask {
            values.values[t] = fine.element(t);
        }
        return MlDifference { values, mask };
    }
    let cmesh = h.mesh(level - 1);
    let mut coarse = VertexCache::new(cmesh, mom, variant, true, ops);
    for &t in &mask {
        let pf = fine.element(t);
        let f = h.parent(level, t);
        let pc = restrict_linear(h.child_bary(level, t), &coarse.element(f));
        values.values[t] = [pf[0] - pc[0], pf[1] - pc[1], pf[2] - pc[2]];
    }
    MlDifference { values, mask }
}

/// Unlocalized (P′_ℓ − P′_{ℓ−1})φ: both operators on their full levels.
pub fn ml_difference_full(h: &MeshHierarchy, level: usize, mom: &Moments, variant: Variant) -> P1DiscFn {
    let fine = p_dual_with(h, level, mom, variant, None);
    if level == 0 {
        return fine;
    }
    let coarse = p_dual_with(h, level - 1, mom, variant, None);
    let values = fine
        .values
        .iter()
        .enumerate()
        .map(|(t, pf)| {
            let pc = restrict_linear(h.child_bary(level, t), &coarse.values[h.parent(level, t)]);
            [pf[0] - pc[0], pf[1] - pc[1], pf[2] - pc[2]]
        })
        .collect();
    P1DiscFn { level, values }
}
