//! Linear operator abstraction, preconditioned CG and Lanczos extreme
//! eigenvalue estimation.

use super::dense::{axpy, dot, norm2, DenseMatrix};
use super::eig::tridiagonal_eigvals;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A square linear map.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Identity map scaled by a constant.
#[derive(Clone, Copy, Debug)]
pub struct ScaledIdentity {
    pub n: usize,
    pub scale: f64,
}

impl LinearOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.scale * xi;
        }
    }
}

/// Operator backed by a closure.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Outcome of [`pcg_solve`].
#[derive(Clone, Debug)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients on A x = b with preconditioner M ≈ A⁻¹.
pub fn pcg_solve(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    rtol: f64,
    maxit: usize,
) -> Result<PcgResult> {
    let n = a.dim();
    if b.len() != n || m.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator {n}, preconditioner {}, rhs {}",
            m.dim(),
            b.len()
        )));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(PcgResult {
            x,
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::Breakdown("preconditioner".into()));
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut it = 0;
    let mut rel = 1.0;
    while it < maxit {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown("operator".into()));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        it += 1;
        rel = norm2(&r) / bnorm;
        if rel <= rtol {
            return Ok(PcgResult {
                x,
                iterations: it,
                converged: true,
                relative_residual: rel,
            });
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::Breakdown("preconditioner".into()));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgResult {
        x,
        iterations: it,
        converged: false,
        relative_residual: rel,
    })
}

/// Iteration cap of [`lanczos_extreme_eigs`].
pub const LANCZOS_MAX_ITERS: usize = 200;

/// Extreme Ritz values of M A via Lanczos in the A-inner product with full
/// reorthogonalization. `iters` is capped at [`LANCZOS_MAX_ITERS`] and at
/// the dimension.
pub fn lanczos_extreme_eigs(a: &dyn LinearOperator, m: &dyn LinearOperator, iters: usize) -> Result<(f64, f64)> {
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator {n}, preconditioner {}",
            m.dim()
        )));
    }
    let k = iters.min(LANCZOS_MAX_ITERS).min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_05);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut av = a.apply_vec(&v);
    let nv = dot(&v, &av);
    if !(nv > 0.0) {
        return Err(Error::Breakdown("operator".into()));
    }
    let s = 1.0 / nv.sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    av.iter_mut().for_each(|x| *x *= s);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut abasis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut alphas = Vec::with_capacity(k);
    let mut betas: Vec<f64> = Vec::with_capacity(k);
    let mut w = vec![0.0; n];
    for j in 0..k {
        m.apply(&av, &mut w);
        let alpha = dot(&w, &av);
        alphas.push(alpha);
        basis.push(v.clone());
        abasis.push(av.clone());
        if j + 1 == k {
            break;
        }
        // Full Gram–Schmidt in the A-inner product, applied twice.
        for _ in 0..2 {
            for (q, aq) in basis.iter().zip(&abasis) {
                let c = dot(&w, aq);
                axpy(-c, q, &mut w);
            }
        }
        let aw = a.apply_vec(&w);
        let beta2 = dot(&w, &aw);
        let scale = alphas.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if !(beta2 > (1e-14 * scale).powi(2)) {
            break;
        }
        let beta = beta2.sqrt();
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
        av = aw.iter().map(|x| x / beta).collect();
    }
    let ritz = tridiagonal_eigvals(&alphas, &betas_padded(&betas, alphas.len()))?;
    Ok((ritz[0], *ritz.last().unwrap()))
}

fn betas_padded(b: &[f64], n: usize) -> Vec<f64> {
    let mut e = b.to_vec();
    e.resize(n, 0.0);
    e
}
