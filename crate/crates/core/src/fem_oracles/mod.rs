//! Dense reference computations: the discrete H⁻¹ and H̃⁻¹ dual norms of
//! elementwise polynomials on the finest level, the spectral interpolation
//! norm between them and L², the H⁻¹-orthogonal projection onto coarse P⁰
//! spaces, and minimal-norm Raviart–Thomas lifts.
//!
//! The dual norms are computed with conforming P¹ test functions on a
//! companion mesh obtained from T_L by `depth` further uniform refinements:
//! W = Bᵀ A⁻¹ B where A is the Dirichlet stiffness (plain) or the full H¹
//! matrix with natural boundary (tilde) and B holds the loads of the basis.

mod mixed;

pub use mixed::{mixed_lift, MixedLiftResult};

use crate::error::{Error, Result};
use crate::linalg::{dot, BandCholesky, Cholesky, CsrMatrix, DenseMatrix, generalized_sym_eig_t};
use crate::mesh::{Mesh, MeshHierarchy};
use crate::spaces::quadrature::integrate;
use crate::spaces::{lagrange_eval, to_reference, P0Fn};
use crate::Variant;

/// Largest oracle dimension handled densely.
pub const DENSE_CAP: usize = 3000;

/// Default number of extra uniform refinements of the oracle mesh. One
/// refinement leaves P⁰(T_L) functions orthogonal to every P¹ test function
/// on uniform bisection meshes, so W would be singular.
pub const DEFAULT_DEPTH: usize = 2;

/// Deepest oracle mesh; one beyond the default for self-convergence checks.
pub const MAX_DEPTH: usize = 3;

/// Right-hand sides per banded solve sweep when assembling W.
const BLOCK: usize = 32;

/// Number of local basis functions for elementwise degree p.
pub fn local_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Local basis of degree p at reference coordinates: 1 for p = 0, the
/// Lagrange basis otherwise.
fn local_basis(degree: usize, a: usize, xi: f64, eta: f64) -> f64 {
    if degree == 0 {
        1.0
    } else {
        lagrange_eval(degree, a, xi, eta)
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > 2 {
        return Err(Error::Unsupported(format!("polynomial degree {degree} (supported: 0, 1, 2)")));
    }
    Ok(())
}

/// Conforming P¹ stiffness (plus mass for the tilde variant) on `mesh`,
/// restricted to the free vertices. Returns the matrix and the vertex→dof map.
pub fn p1_energy_matrix(mesh: &Mesh, variant: Variant) -> Result<(CsrMatrix, Vec<Option<usize>>)> {
    let mut dof = vec![None; mesh.num_vertices()];
    let mut n = 0;
    for (v, d) in dof.iter_mut().enumerate() {
        if variant == Variant::Tilde || !mesh.is_boundary_vertex[v] {
            *d = Some(n);
            n += 1;
        }
    }
    let mut trip = Vec::with_capacity(9 * mesh.num_elements());
    for (t, el) in mesh.elements.iter().enumerate() {
        let p = mesh.element_points(t);
        let area = mesh.area[t];
        // ∇λ_i = rot(p_{i+2} − p_{i+1}) / (2|T|) for counter-clockwise p.
        let g: [[f64; 2]; 3] = std::array::from_fn(|i| {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
        });
        for i in 0..3 {
            let Some(di) = dof[el.vertices[i]] else { continue };
            for j in 0..3 {
                let Some(dj) = dof[el.vertices[j]] else { continue };
                let mut v = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                if variant == Variant::Tilde {
                    v += area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
                trip.push((di, dj, v));
            }
        }
    }
    Ok((CsrMatrix::from_triplets(n, n, &trip)?, dof))
}

/// Factored dual-norm problem for elementwise polynomials on T_L.
#[derive(Clone, Debug)]
pub struct DualNormSolver {
    pub variant: Variant,
    pub degree: usize,
    pub level: usize,
    pub depth: usize,
    n_elements: usize,
    /// free P¹ dofs × basis functions.
    load: CsrMatrix,
    load_t: CsrMatrix,
    chol: BandCholesky,
}

impl DualNormSolver {
    pub fn new(h: &MeshHierarchy, variant: Variant, depth: usize, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        if depth > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!("oracle depth {depth} exceeds {MAX_DEPTH}")));
        }
        let fine = h.finest();
        let oh = MeshHierarchy::uniform(fine.clone(), depth)?;
        let om = oh.finest();
        let anc = oh.ancestor_map(depth, 0);
        let (a, dof) = p1_energy_matrix(om, variant)?;
        if a.rows() == 0 {
            return Err(Error::InvalidArgument("oracle mesh has no free vertices".into()));
        }
        let k = local_dim(degree);
        let mut trip = Vec::with_capacity(3 * k * om.num_elements());
        for (c, el) in om.elements.iter().enumerate() {
            let t = anc[c];
            let ct = om.element_points(c);
            let tt = fine.element_points(t);
            for (kv, &v) in el.vertices.iter().enumerate() {
                let Some(d) = dof[v] else { continue };
                for b in 0..k {
                    let val = if degree == 0 {
                        om.area[c] / 3.0
                    } else {
                        integrate(ct, |bary, x| {
                            let (xi, eta, _) = to_reference(tt, x);
                            local_basis(degree, b, xi, eta) * bary[kv]
                        })
                    };
                    trip.push((d, t * k + b, val));
                }
            }
        }
        let load = CsrMatrix::from_triplets(a.rows(), fine.num_elements() * k, &trip)?;
        let chol = BandCholesky::new(&a, "oracle P1 energy matrix")?;
        Ok(Self {
            variant,
            degree,
            level: h.finest_level(),
            depth,
            n_elements: fine.num_elements(),
            load_t: load.transpose(),
            load,
            chol,
        })
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.load.cols()
    }

    pub fn num_elements(&self) -> usize {
        self.n_elements
    }

    /// Free P¹ unknowns on the oracle mesh.
    pub fn oracle_dofs(&self) -> usize {
        self.load.rows()
    }

    /// xᵀWx = (Bx)ᵀA⁻¹(Bx).
    pub fn norm_sq(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for oracle of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let b = self.load.matvec(x);
        let u = self.chol.solve(&b);
        Ok(dot(&b, &u))
    }

    /// Dense W, assembled by blocked solves.
    pub fn gram(&self) -> Result<DenseMatrix> {
        let n = self.dim();
        if n > DENSE_CAP {
            return Err(Error::OracleTooLarge { dofs: n, cap: DENSE_CAP });
        }
        let nd = self.oracle_dofs();
        let mut w = DenseMatrix::zeros(n, n);
        let mut j0 = 0;
        while j0 < n {
            let kb = BLOCK.min(n - j0);
            let mut rhs = vec![0.0; nd * kb];
            for j in 0..kb {
                let (idx, val) = self.load_t.row(j0 + j);
                for (&d, &v) in idx.iter().zip(val) {
                    rhs[d * kb + j] = v;
                }
            }
            self.chol.solve_many(&mut rhs, kb);
            for i in 0..n {
                let (idx, val) = self.load_t.row(i);
                for j in 0..kb {
                    let s: f64 = idx.iter().zip(val).map(|(&d, &v)| v * rhs[d * kb + j]).sum();
                    w.set(i, j0 + j, s);
                }
            }
            j0 += kb;
        }
        w.symmetrize();
        Ok(w)
    }
}

/// Dense W of P⁰(T_L) for oracle level M = L + depth.
pub fn hminus1_gram(h: &MeshHierarchy, variant: Variant, oracle_level: usize) -> Result<DenseMatrix> {
    let depth = oracle_level
        .checked_sub(h.finest_level())
        .ok_or_else(|| Error::InvalidArgument(format!("oracle level {oracle_level} below L = {}", h.finest_level())))?;
    DualNormSolver::new(h, variant, depth, 0)?.gram()
}

/// Elementwise L² Gram blocks of the degree-p basis on `mesh`.
fn mass_blocks(mesh: &Mesh, degree: usize) -> Vec<f64> {
    let k = local_dim(degree);
    let mut out = Vec::with_capacity(mesh.num_elements() * k * k);
    for t in 0..mesh.num_elements() {
        if degree == 0 {
            out.push(mesh.area[t]);
            continue;
        }
        let tri = mesh.element_points(t);
        for a in 0..k {
            for b in 0..k {
                out.push(integrate(tri, |bary, _| {
                    let (xi, eta) = (bary[1], bary[2]);
                    local_basis(degree, a, xi, eta) * local_basis(degree, b, xi, eta)
                }));
            }
        }
    }
    out
}

/// Dense discrete norms on the degree-p space of T_L with the generalized
/// eigenpairs of W y = μ Mass y (Mass-orthonormal y).
///
/// With λ = 1/μ and z = y/√μ this is Mass z = λ W z with ZᵀWZ = I, and
/// ‖x‖²_{-s} = Σ λ_i^{1−s}(z_iᵀWx)² = Σ μ_i^s (y_iᵀ Mass x)².
#[derive(Clone, Debug)]
pub struct NormOracle {
    pub variant: Variant,
    pub degree: usize,
    pub level: usize,
    pub depth: usize,
    n_elements: usize,
    mass: Vec<f64>,
    w: DenseMatrix,
    mu: Vec<f64>,
    /// Eigenvectors y_i as rows.
    yt: DenseMatrix,
}

impl NormOracle {
    pub fn new(h: &MeshHierarchy, variant: Variant, depth: usize) -> Result<Self> {
        Self::with_degree(h, variant, depth, 0)
    }

    pub fn with_degree(h: &MeshHierarchy, variant: Variant, depth: usize, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let n = h.finest().num_elements() * local_dim(degree);
        if n > DENSE_CAP {
            return Err(Error::OracleTooLarge { dofs: n, cap: DENSE_CAP });
        }
        let solver = DualNormSolver::new(h, variant, depth, degree)?;
        let w = solver.gram()?;
        let mass = mass_blocks(h.finest(), degree);
        let mut me = Self {
            variant,
            degree,
            level: h.finest_level(),
            depth,
            n_elements: h.finest().num_elements(),
            mass,
            w,
            mu: Vec::new(),
            yt: DenseMatrix::zeros(0, 0),
        };
        let eig = generalized_sym_eig_t(&me.w, &me.mass_matrix())?;
        if let Some(&m0) = eig.values.first() {
            if !(m0 > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    what: "oracle dual Gram W".into(),
                    pivot: 0,
                    value: m0,
                });
            }
        }
        me.mu = eig.values;
        me.yt = eig.vectors_t;
        Ok(me)
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn num_elements(&self) -> usize {
        self.n_elements
    }

    /// Checks that the oracle belongs to the finest level of `h`.
    pub fn check_hierarchy(&self, h: &MeshHierarchy) -> Result<()> {
        if h.finest_level() != self.level || h.finest().num_elements() != self.n_elements {
            return Err(Error::InvalidArgument(format!(
                "oracle built for level {} with {} elements",
                self.level, self.n_elements
            )));
        }
        Ok(())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for oracle of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    /// μ_i ascending; the spectral λ_i are their reciprocals.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// λ_i = 1/μ_i of Mass z = λ W z, in the order of [`mu`](Self::mu).
    pub fn lambdas(&self) -> Vec<f64> {
        self.mu.iter().map(|m| 1.0 / m).collect()
    }

    /// Z with columns z_i = y_i/√μ_i; ZᵀWZ = I.
    pub fn z(&self) -> DenseMatrix {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |r, c| self.yt.get(c, r) / self.mu[c].sqrt())
    }

    pub fn mass_apply(&self, x: &[f64]) -> Vec<f64> {
        let k = local_dim(self.degree);
        let mut y = vec![0.0; x.len()];
        for t in 0..self.n_elements {
            let blk = &self.mass[t * k * k..(t + 1) * k * k];
            for a in 0..k {
                y[t * k + a] = (0..k).map(|b| blk[a * k + b] * x[t * k + b]).sum();
            }
        }
        y
    }

    pub fn mass_matrix(&self) -> DenseMatrix {
        let k = local_dim(self.degree);
        let mut m = DenseMatrix::zeros(self.dim(), self.dim());
        for t in 0..self.n_elements {
            for a in 0..k {
                for b in 0..k {
                    m.set(t * k + a, t * k + b, self.mass[(t * k + a) * k + b]);
                }
            }
        }
        m
    }

    /// y_iᵀ Mass x for all i.
    pub fn spectral_coeffs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.yt.matvec(&self.mass_apply(x)))
    }

    /// ‖x‖²_{-s}; s = 0 gives the L² norm, s = 1 the W norm.
    pub fn interp_norm_sq(&self, x: &[f64], s: f64) -> Result<f64> {
        check_s_closed(s)?;
        let c = self.spectral_coeffs(x)?;
        Ok(c.iter().zip(&self.mu).map(|(c, m)| m.powf(s) * c * c).sum())
    }

    pub fn w_norm_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.w.quad_form(x))
    }

    pub fn l2_norm_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(dot(x, &self.mass_apply(x)))
    }

    /// y = A_s x with A_s = Mass·Y·diag(μ^s)·Yᵀ·Mass.
    pub fn apply_sriesz(&self, s: f64, x: &[f64], y: &mut [f64]) {
        let mut c = self.yt.matvec(&self.mass_apply(x));
        for (ci, m) in c.iter_mut().zip(&self.mu) {
            *ci *= m.powf(s);
        }
        let v = self.yt.matvec_t(&c);
        y.copy_from_slice(&self.mass_apply(&v));
    }

    /// y = A_s⁻¹ x = Y·diag(μ^{−s})·Yᵀ x.
    pub fn apply_sriesz_inv(&self, s: f64, x: &[f64], y: &mut [f64]) {
        let mut c = self.yt.matvec(x);
        for (ci, m) in c.iter_mut().zip(&self.mu) {
            *ci *= m.powf(-s);
        }
        y.copy_from_slice(&self.yt.matvec_t(&c));
    }

    /// Dense A_s.
    pub fn sriesz_matrix(&self, s: f64) -> DenseMatrix {
        let n = self.dim();
        // A_s = G Gᵀ with G = Mass·Y·diag(μ^{s/2}).
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let col: Vec<f64> = self.yt.row(i).iter().map(|v| v * self.mu[i].powf(0.5 * s)).collect();
            let mc = self.mass_apply(&col);
            for r in 0..n {
                g.set(r, i, mc[r]);
            }
        }
        let mut a = g.matmul(&g.transpose());
        a.symmetrize();
        a
    }
}

fn check_s_closed(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// ‖φ‖_{-s} of a finest-level P⁰ function.
pub fn interp_norm(oracle: &NormOracle, phi: &P0Fn, s: f64) -> Result<f64> {
    if oracle.degree != 0 || phi.level != oracle.level {
        return Err(Error::InvalidArgument(format!(
            "P0 function on level {} for a degree-{} oracle on level {}",
            phi.level, oracle.degree, oracle.level
        )));
    }
    Ok(oracle.interp_norm_sq(&phi.coeffs, s)?.sqrt())
}

/// W-orthogonal projection of φ onto P⁰(T_ℓ).
pub fn hminus1_project(h: &MeshHierarchy, oracle: &NormOracle, phi: &P0Fn, level: usize) -> Result<P0Fn> {
    oracle.check_hierarchy(h)?;
    if oracle.degree != 0 || phi.level != oracle.level {
        return Err(Error::InvalidArgument("projection needs a P0 oracle and a finest-level φ".into()));
    }
    h.check_level(level)?;
    let anc = h.ancestor_map(oracle.level, level);
    let nc = h.mesh(level).num_elements();
    let n = oracle.dim();
    let w = oracle.w();
    // WR row-wise, then Rᵀ(WR).
    let mut wr = DenseMatrix::zeros(n, nc);
    for i in 0..n {
        let row = w.row(i);
        let out = wr.row_mut(i);
        for (j, &a) in anc.iter().enumerate() {
            out[a] += row[j];
        }
    }
    let mut g = DenseMatrix::zeros(nc, nc);
    for (i, &a) in anc.iter().enumerate() {
        let src = wr.row(i).to_vec();
        for (o, v) in g.row_mut(a).iter_mut().zip(&src) {
            *o += v;
        }
    }
    g.symmetrize();
    let wx = w.matvec(&phi.coeffs);
    let mut rhs = vec![0.0; nc];
    for (i, &a) in anc.iter().enumerate() {
        rhs[a] += wx[i];
    }
    let y = Cholesky::new(&g, "coarse W Gram")?.solve(&rhs);
    Ok(P0Fn::new(level, y))
}

#[cfg(test)]
mod tests;
