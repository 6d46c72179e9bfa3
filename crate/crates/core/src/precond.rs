//! Multilevel diagonal additive Schwarz preconditioner on P⁰(T_L).
//!
//! Subspaces are spanned by the Haar atoms ψ_{ℓ,E}, E ∈ Ẽ_ℓ (plain) or
//! E ∈ Ẽ_ℓ^Ω plus the constant (tilde). For a residual r given as a dual
//! vector (r_t = ⟨r, χ_t⟩ for the indicators χ_t of T_L)
//!
//!   B r = Σ_{ℓ,E} ψ_{ℓ,E} ⟨r, ψ_{ℓ,E}⟩ / d_{ℓ,E}  (+ 1·⟨r, 1⟩/d_Ω),
//!
//! computed with one restriction sweep, one diagonal scaling per facet and
//! one prolongation sweep.

use crate::error::{Error, Result};
use crate::fem_oracles::{NormOracle, DEFAULT_DEPTH};
use crate::linalg::{
    dot, krylov::LANCZOS_MAX_ITERS, lanczos_extreme_eigs, min_norm_solve, norm2, pcg_solve, sym_eigvals, Cholesky,
    DenseMatrix, LinearOperator,
};
use crate::mesh::MeshHierarchy;
use crate::mlnorm::check_s_open;
use crate::model_problems::build_sriesz;
use crate::operators::OpCounter;
use crate::sampling::normal_vector;
use crate::spaces::{lagrange_nodes, prolong, restrict_dual, tilde_facet_sets, HaarAtom, P0Fn, StarBasis};
use crate::Variant;
use std::time::Instant;

/// How the diagonal weights are obtained.
#[derive(Clone, Copy)]
pub enum WeightMode<'a> {
    /// d = h_E^{2s}‖ψ‖²; d_Ω = diam(Ω)^{2s}|Ω|.
    Surrogate,
    /// d = ⟨Aψ, ψ⟩ for an SPD operator on P⁰(T_L) coefficients.
    Exact(&'a dyn LinearOperator),
}

impl std::fmt::Debug for WeightMode<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightMode::Surrogate => f.write_str("Surrogate"),
            WeightMode::Exact(_) => f.write_str("Exact"),
        }
    }
}

#[derive(Clone, Debug)]
struct LevelAtoms {
    atoms: Vec<HaarAtom>,
    weights: Vec<f64>,
}

/// Diagonal multilevel preconditioner bound to a hierarchy.
#[derive(Clone, Debug)]
pub struct MLDiagPrecond<'a> {
    h: &'a MeshHierarchy,
    pub s: f64,
    pub variant: Variant,
    levels: Vec<LevelAtoms>,
    /// Weight of the constant function (tilde without coarse space).
    constant_weight: Option<f64>,
    /// Factor of the s-Gram matrix on P⁰(T_0) in coarse-space mode.
    coarse: Option<Cholesky>,
}

/// Prolongs a level-ℓ coefficient vector to level L.
fn to_finest(h: &MeshHierarchy, level: usize, coeffs: Vec<f64>) -> Vec<f64> {
    prolong(h, &P0Fn::new(level, coeffs), h.finest_level()).unwrap().coeffs
}

fn exact_weight(a: &dyn LinearOperator, x: &[f64]) -> Result<f64> {
    let d = dot(x, &a.apply_vec(x));
    if !(d > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: "weight operator".into(),
            pivot: 0,
            value: d,
        });
    }
    Ok(d)
}

/// Builds the preconditioner. `coarse_space` replaces the level-0 atoms
/// (and the constant) by the full P⁰(T_0) with its s-Gram inverse.
pub fn build_precond<'a>(
    h: &'a MeshHierarchy,
    s: f64,
    variant: Variant,
    mode: WeightMode<'_>,
    coarse_space: bool,
) -> Result<MLDiagPrecond<'a>> {
    check_s_open(s)?;
    let nl = h.finest().num_elements();
    if let WeightMode::Exact(a) = mode {
        if a.dim() != nl {
            return Err(Error::DimensionMismatch(format!(
                "weight operator of dimension {} for {nl} elements",
                a.dim()
            )));
        }
    }
    let sets = tilde_facet_sets(h);
    let interior = variant == Variant::Tilde;
    let mut levels = Vec::with_capacity(h.num_levels());
    let mut count = 0;
    for l in 0..h.num_levels() {
        let m = h.mesh(l);
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        if !(coarse_space && l == 0) {
            for &f in sets.level(l, interior) {
                let a = HaarAtom::from_mesh(m, l, f)?;
                let d = match mode {
                    WeightMode::Surrogate => a.h_e().powf(2.0 * s) * a.l2_norm_sq(),
                    WeightMode::Exact(op) => exact_weight(op, &to_finest(h, l, a.to_p0(m.num_elements()).coeffs))?,
                };
                atoms.push(a);
                weights.push(d);
            }
        }
        count += atoms.len();
        levels.push(LevelAtoms { atoms, weights });
    }
    let m0 = h.mesh(0);
    let constant_weight = if interior && !coarse_space {
        count += 1;
        Some(match mode {
            WeightMode::Surrogate => m0.domain_diameter().powf(2.0 * s) * m0.total_area(),
            WeightMode::Exact(op) => exact_weight(op, &vec![1.0; nl])?,
        })
    } else {
        None
    };
    let coarse = if coarse_space {
        let n0 = m0.num_elements();
        count += n0;
        let g = match mode {
            WeightMode::Exact(op) => {
                let cols: Vec<Vec<f64>> = (0..n0)
                    .map(|j| {
                        let mut e = vec![0.0; n0];
                        e[j] = 1.0;
                        to_finest(h, 0, e)
                    })
                    .collect();
                let acols: Vec<Vec<f64>> = cols.iter().map(|c| op.apply_vec(c)).collect();
                DenseMatrix::from_fn(n0, n0, |i, j| dot(&cols[i], &acols[j]))
            }
            WeightMode::Surrogate => {
                let h0 = MeshHierarchy::new(m0.clone());
                let o = NormOracle::new(&h0, variant, DEFAULT_DEPTH)?;
                o.sriesz_matrix(s)
            }
        };
        let mut g = g;
        g.symmetrize();
        Some(Cholesky::new(&g, "coarse s-Gram")?)
    } else {
        None
    };
    if count == 0 {
        return Err(Error::InvalidArgument("the hierarchy yields no subspaces".into()));
    }
    Ok(MLDiagPrecond {
        h,
        s,
        variant,
        levels,
        constant_weight,
        coarse,
    })
}

impl<'a> MLDiagPrecond<'a> {
    pub fn hierarchy(&self) -> &'a MeshHierarchy {
        self.h
    }

    /// Number of one-dimensional subspaces (coarse block counted per element).
    pub fn num_atoms(&self) -> usize {
        self.levels.iter().map(|l| l.atoms.len()).sum::<usize>()
            + usize::from(self.constant_weight.is_some())
            + self.coarse.as_ref().map_or(0, |c| c.dim())
    }

    pub fn num_facet_atoms(&self) -> usize {
        self.levels.iter().map(|l| l.atoms.len()).sum()
    }

    /// (level, facet, weight) of every facet atom.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.levels
            .iter()
            .flat_map(|l| l.atoms.iter().zip(&l.weights).map(|(a, &w)| (a.level, a.facet, w)))
    }

    pub fn constant_weight(&self) -> Option<f64> {
        self.constant_weight
    }

    pub fn has_coarse_space(&self) -> bool {
        self.coarse.is_some()
    }

    /// B r for a fine dual vector r.
    pub fn apply_precond(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.apply_counted(r, None)
    }

    pub fn apply_counted(&self, r: &[f64], ops: Option<&OpCounter>) -> Result<Vec<f64>> {
        let h = self.h;
        let lf = h.finest_level();
        let n = h.finest().num_elements();
        if r.len() != n {
            return Err(Error::DimensionMismatch(format!("residual of length {} for {n} elements", r.len())));
        }
        let mut duals: Vec<Vec<f64>> = vec![Vec::new(); lf + 1];
        duals[lf] = r.to_vec();
        for l in (1..=lf).rev() {
            duals[l - 1] = restrict_dual(h, l, &duals[l]);
            OpCounter::add(ops, duals[l].len());
        }
        let mut u: Vec<f64> = Vec::new();
        for l in 0..=lf {
            if l == 0 {
                u = vec![0.0; h.mesh(0).num_elements()];
                if let Some(c) = &self.coarse {
                    let y = c.solve(&duals[0]);
                    u.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                    OpCounter::add(ops, u.len());
                }
                if let Some(d) = self.constant_weight {
                    let c = duals[0].iter().sum::<f64>() / d;
                    u.iter_mut().for_each(|a| *a += c);
                    OpCounter::add(ops, u.len());
                }
            } else {
                u = h.parents(l).iter().map(|&p| u[p]).collect();
                OpCounter::add(ops, u.len());
            }
            let lv = &self.levels[l];
            for (a, &d) in lv.atoms.iter().zip(&lv.weights) {
                let c = a.pair_dual(&duals[l]) / d;
                for (t, w) in a.entries() {
                    u[t] += c * w;
                }
            }
            OpCounter::add(ops, lv.atoms.len());
        }
        Ok(u)
    }

    /// Fine coefficient vectors of all facet atoms (columns) and their weights.
    pub fn atom_matrix(&self) -> (DenseMatrix, Vec<f64>) {
        let h = self.h;
        let n = h.finest().num_elements();
        let mut cols = Vec::new();
        let mut w = Vec::new();
        for lv in &self.levels {
            for (a, &d) in lv.atoms.iter().zip(&lv.weights) {
                let ne = h.mesh(a.level).num_elements();
                cols.push(to_finest(h, a.level, a.to_p0(ne).coeffs));
                w.push(d);
            }
        }
        if let Some(d) = self.constant_weight {
            cols.push(vec![1.0; n]);
            w.push(d);
        }
        (DenseMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]), w)
    }

    /// Dense B assembled from the subspaces.
    pub fn dense_matrix(&self) -> DenseMatrix {
        let h = self.h;
        let n = h.finest().num_elements();
        let (psi, w) = self.atom_matrix();
        let mut b = DenseMatrix::zeros(n, n);
        for (j, &d) in w.iter().enumerate() {
            let col = psi.column(j);
            let nz: Vec<usize> = (0..n).filter(|&i| col[i] != 0.0).collect();
            for &i in &nz {
                for &k in &nz {
                    b.add_to(i, k, col[i] * col[k] / d);
                }
            }
        }
        if let Some(c) = &self.coarse {
            let n0 = c.dim();
            let anc = h.ancestor_map(h.finest_level(), 0);
            let mut ginv = DenseMatrix::zeros(n0, n0);
            for j in 0..n0 {
                let mut e = vec![0.0; n0];
                e[j] = 1.0;
                let y = c.solve(&e);
                for i in 0..n0 {
                    ginv.set(i, j, y[i]);
                }
            }
            for i in 0..n {
                for k in 0..n {
                    b.add_to(i, k, ginv.get(anc[i], anc[k]));
                }
            }
        }
        b
    }
}

impl LinearOperator for MLDiagPrecond<'_> {
    fn dim(&self) -> usize {
        self.h.finest().num_elements()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.apply_precond(x).expect("dimension checked by caller"));
    }
}

/// Additive Schwarz norm inf{Σ c_i² d_i : Σ c_i ψ_i = x} by two routes:
/// xᵀ(ΨD⁻¹Ψᵀ)⁻¹x via Cholesky and the minimal-norm solution of
/// ΨD^{-1/2} e = x via QR.
#[derive(Clone, Copy, Debug)]
pub struct AsNorm {
    pub inverse_route: f64,
    pub qp_route: f64,
}

pub fn additive_schwarz_norm(psi: &DenseMatrix, d: &[f64], x: &[f64]) -> Result<AsNorm> {
    let n = psi.rows();
    let m = psi.cols();
    if d.len() != m || x.len() != n {
        return Err(Error::DimensionMismatch(format!("{n}x{m} atoms, {} weights, x of {}", d.len(), x.len())));
    }
    let scaled = DenseMatrix::from_fn(n, m, |i, j| psi.get(i, j) / d[j].sqrt());
    let deficient = || Error::RankDeficient("the atoms do not span the space: decomposition fails".into());
    let inverse_route = if m >= n {
        let mut b = scaled.matmul(&scaled.transpose());
        b.symmetrize();
        let c = Cholesky::new(&b, "atom operator").map_err(|_| deficient())?;
        dot(x, &c.solve(x))
    } else {
        // Fewer atoms than unknowns: the decomposition of x ∈ span Ψ is
        // unique, c = (ΨᵀΨ)⁻¹Ψᵀx.
        let mut g = psi.transpose().matmul(psi);
        g.symmetrize();
        let ch = Cholesky::new(&g, "atom Gram").map_err(|_| deficient())?;
        let c = ch.solve(&psi.matvec_t(x));
        let r: Vec<f64> = psi.matvec(&c).iter().zip(x).map(|(a, b)| a - b).collect();
        if norm2(&r) > 1e-9 * norm2(x).max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient("x is not in the span of the atoms".into()));
        }
        c.iter().zip(d).map(|(c, d)| c * c * d).sum()
    };
    let e = min_norm_solve(&scaled, x)
        .map_err(|_| Error::RankDeficient("the atoms do not span the space: decomposition fails".into()))?;
    Ok(AsNorm {
        inverse_route,
        qp_route: dot(&e, &e),
    })
}

/// Largest element count for [`as_norm_exact`].
pub const AS_NORM_CAP: usize = 200;

/// |||φ|||² with d_i = ‖ψ_i‖²_{-s} from the oracle.
pub fn as_norm_exact(
    h: &MeshHierarchy,
    s: f64,
    variant: Variant,
    phi: &P0Fn,
    oracle: &NormOracle,
) -> Result<AsNorm> {
    check_s_open(s)?;
    oracle.check_hierarchy(h)?;
    let n = h.finest().num_elements();
    if n > AS_NORM_CAP {
        return Err(Error::OracleTooLarge { dofs: n, cap: AS_NORM_CAP });
    }
    if oracle.variant != variant {
        return Err(Error::InvalidArgument("oracle variant differs".into()));
    }
    let a = build_sriesz(oracle, s)?;
    let p = build_precond(h, s, variant, WeightMode::Exact(&a), false)?;
    let (psi, d) = p.atom_matrix();
    let x = prolong(h, phi, h.finest_level())?.coeffs;
    additive_schwarz_norm(&psi, &d, &x)
}

/// Extreme eigenvalues of B A, κ and the PCG iteration count.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub finest_level: usize,
    pub n: usize,
    pub s: f64,
    pub variant: Variant,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub pcg_iterations: usize,
    pub pcg_converged: bool,
    /// "dense" or "lanczos".
    pub method: &'static str,
    pub seconds: f64,
}

pub const CONDITION_CSV_HEADER: &str = "L,n,s,variant,method,lambda_min,lambda_max,kappa,pcg_iterations";

impl ConditionReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{:e},{:e},{}",
            self.finest_level,
            self.n,
            self.s,
            self.variant,
            self.method,
            self.lambda_min,
            self.lambda_max,
            self.kappa,
            self.pcg_iterations
        )
    }
}

/// Largest dimension for the dense eigenvalue path.
pub const DENSE_KAPPA_CAP: usize = 512;
pub const PCG_RTOL: f64 = 1e-8;

fn densify(op: &dyn LinearOperator) -> DenseMatrix {
    let n = op.dim();
    let mut m = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        for i in 0..n {
            m.set(i, j, y[i]);
        }
        e[j] = 0.0;
    }
    m.symmetrize();
    m
}

/// Condition of the preconditioned operator B A and PCG on A x = b for a
/// seeded normal b.
pub fn condition_study(
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    finest_level: usize,
    s: f64,
    variant: Variant,
    seed: u64,
) -> Result<ConditionReport> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch(format!("operator {n}, preconditioner {}", b.dim())));
    }
    let start = Instant::now();
    let (lo, hi, method) = if n <= DENSE_KAPPA_CAP {
        let ad = densify(a);
        let bd = densify(b);
        let lb = Cholesky::new(&bd, "preconditioner")?;
        // eig(BA) = eig(L_Bᵀ A L_B).
        let l = lb.factor();
        let mut c = l.transpose().matmul(&ad.matmul(l));
        c.symmetrize();
        let ev = sym_eigvals(&c)?;
        (ev[0], ev[n - 1], "dense")
    } else {
        let (lo, hi) = lanczos_extreme_eigs(a, b, LANCZOS_MAX_ITERS)?;
        (lo, hi, "lanczos")
    };
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: "preconditioned operator".into(),
            pivot: 0,
            value: lo,
        });
    }
    let rhs = normal_vector(n, seed);
    let pcg = pcg_solve(a, b, &rhs, PCG_RTOL, 20 * n.max(50))?;
    Ok(ConditionReport {
        finest_level,
        n,
        s,
        variant,
        lambda_min: lo,
        lambda_max: hi,
        kappa: hi / lo,
        pcg_iterations: pcg.iterations,
        pcg_converged: pcg.converged,
        method,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Preconditioner for elementwise degree-p functions in the Lagrange basis:
/// the P⁰ part through [`MLDiagPrecond`] plus one atom per element and star
/// function χ_{T,j} with weight h_T^{2s}‖χ_{T,j}‖² = h_T^{2s}.
#[derive(Clone, Debug)]
pub struct HigherOrderPrecond<'a> {
    pub base: MLDiagPrecond<'a>,
    pub p: usize,
    dp: usize,
    star_dim: usize,
    /// χ_{T,j} at the Lagrange nodes, per element (star_dim × d_p row-major).
    star_nodal: Vec<f64>,
    star_weights: Vec<f64>,
}

pub fn build_precond_higher_order<'a>(
    h: &'a MeshHierarchy,
    s: f64,
    p: usize,
    variant: Variant,
) -> Result<HigherOrderPrecond<'a>> {
    let basis = StarBasis::new(p)?;
    let base = build_precond(h, s, variant, WeightMode::Surrogate, false)?;
    let m = h.finest();
    let nodes = lagrange_nodes(p);
    let dp = nodes.len();
    let sd = basis.star_dim();
    let mut star_nodal = Vec::with_capacity(m.num_elements() * sd * dp);
    let mut star_weights = Vec::with_capacity(m.num_elements() * sd);
    for t in 0..m.num_elements() {
        let scale = 1.0 / (2.0 * m.area[t]).sqrt();
        for j in 0..sd {
            for nd in &nodes {
                star_nodal.push(scale * basis.eval_ref(j, nd[0], nd[1]));
            }
            star_weights.push(m.diameter[t].powf(2.0 * s));
        }
    }
    Ok(HigherOrderPrecond {
        base,
        p,
        dp,
        star_dim: sd,
        star_nodal,
        star_weights,
    })
}

impl HigherOrderPrecond<'_> {
    pub fn num_atoms(&self) -> usize {
        self.base.num_atoms() + self.star_weights.len()
    }

    /// B r for a dual vector r in the Lagrange basis.
    pub fn apply_precond(&self, r: &[f64]) -> Result<Vec<f64>> {
        let ne = self.base.h.finest().num_elements();
        let (dp, sd) = (self.dp, self.star_dim);
        if r.len() != ne * dp {
            return Err(Error::DimensionMismatch(format!("residual of length {} for {} unknowns", r.len(), ne * dp)));
        }
        // The constant on T is Σ_a L_a.
        let r0: Vec<f64> = (0..ne).map(|t| r[t * dp..(t + 1) * dp].iter().sum()).collect();
        let u0 = self.base.apply_precond(&r0)?;
        let mut u: Vec<f64> = u0.iter().flat_map(|&c| std::iter::repeat_n(c, dp)).collect();
        for t in 0..ne {
            let rt = &r[t * dp..(t + 1) * dp];
            for j in 0..sd {
                let chi = &self.star_nodal[(t * sd + j) * dp..(t * sd + j + 1) * dp];
                let c = dot(rt, chi) / self.star_weights[t * sd + j];
                for (a, x) in chi.iter().enumerate() {
                    u[t * dp + a] += c * x;
                }
            }
        }
        Ok(u)
    }
}

impl LinearOperator for HigherOrderPrecond<'_> {
    fn dim(&self) -> usize {
        self.base.h.finest().num_elements() * self.dp
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.apply_precond(x).expect("dimension checked by caller"));
    }
}

#[cfg(test)]
mod tests;
