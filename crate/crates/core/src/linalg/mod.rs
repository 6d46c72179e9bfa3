//! Dense and sparse numerical kernels.
//!
//! Everything here is self-contained: the oracles need a symmetric
//! eigensolver up to a few thousand unknowns, banded solves for P¹
//! stiffness matrices, and Krylov methods for the preconditioner studies.

pub mod banded;
pub mod dense;
pub mod eig;
pub mod krylov;
pub mod qr;
pub mod sparse;

pub use banded::BandCholesky;
pub use dense::{axpy, cholesky_solve, dot, norm2, Cholesky, DenseMatrix};
pub use eig::{generalized_sym_eig, generalized_sym_eig_t, sym_eig, sym_eigvals, tridiagonal_eigvals, SymEig};
pub use krylov::{lanczos_extreme_eigs, pcg_solve, FnOperator, LinearOperator, PcgResult, ScaledIdentity};
pub use qr::min_norm_solve;
pub use sparse::CsrMatrix;

#[cfg(test)]
pub(crate) mod testutil {
    use super::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random SPD matrix GᵀG + n·I.
    pub fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let mut a = g.transpose().matmul(&g);
        for i in 0..n {
            a.add_to(i, i, 0.1 * n as f64);
        }
        a.symmetrize();
        a
    }
}
