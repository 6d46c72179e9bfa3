//! Symmetric eigensolvers: Householder tridiagonalization followed by the
//! implicit QL iteration, plus the Cholesky reduction of the generalized
//! problem A z = λ B z.

use super::dense::{axpy, dot, Cholesky, DenseMatrix};
use crate::error::{Error, Result};

/// Largest accepted dense eigenproblem.
pub const MAX_EIG_DIM: usize = 4096;

/// Eigen-decomposition with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Eigenvectors stored one per row: `vectors_t.row(i)` pairs with `values[i]`.
    pub vectors_t: DenseMatrix,
}

impl SymEig {
    /// Eigenvectors as columns.
    pub fn vectors(&self) -> DenseMatrix {
        self.vectors_t.transpose()
    }
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric matrix.
pub fn sym_eig(a: &DenseMatrix) -> Result<SymEig> {
    let n = a.rows();
    check_square(a, "A")?;
    if n == 0 {
        return Ok(SymEig {
            values: vec![],
            vectors_t: DenseMatrix::zeros(0, 0),
        });
    }
    let mut work = a.clone();
    let (mut d, mut e, taus) = tridiagonalize(&mut work);
    let q = accumulate_reflectors(&work, &taus);
    // Rotations act on eigenvector columns; keeping them as rows makes each
    // rotation a pair of contiguous slices.
    let mut zt = q.transpose();
    tql(&mut d, &mut e, Some(&mut zt))?;
    Ok(sort_pairs(d, zt))
}

/// Eigenvalues only.
pub fn sym_eigvals(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_square(a, "A")?;
    if a.rows() == 0 {
        return Ok(vec![]);
    }
    let mut work = a.clone();
    let (mut d, mut e, _) = tridiagonalize(&mut work);
    tql(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(d)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i+1`).
pub fn tridiagonal_eigvals(d: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut dd = d.to_vec();
    let mut ee = vec![0.0; n];
    ee[..n - 1].copy_from_slice(&e[..n - 1]);
    tql(&mut dd, &mut ee, None)?;
    dd.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(dd)
}

/// Solves A z = λ B z for symmetric A and SPD B. Returns eigenvalues
/// ascending with B-orthonormal eigenvectors (columns).
pub fn generalized_sym_eig(a: &DenseMatrix, b: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let g = generalized_sym_eig_t(a, b)?;
    Ok((g.values, g.vectors_t.transpose()))
}

/// As [`generalized_sym_eig`] but with eigenvectors stored as rows.
pub fn generalized_sym_eig_t(a: &DenseMatrix, b: &DenseMatrix) -> Result<SymEig> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    let n = a.rows();
    if b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{n} but B is {}x{}",
            b.rows(),
            b.rows()
        )));
    }
    if b.is_diagonal() {
        let mut sq = Vec::with_capacity(n);
        for i in 0..n {
            let v = b.get(i, i);
            if !(v > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    what: "B".into(),
                    pivot: i,
                    value: v,
                });
            }
            sq.push(v.sqrt());
        }
        let mut c = DenseMatrix::from_fn(n, n, |i, j| a.get(i, j) / (sq[i] * sq[j]));
        c.symmetrize();
        let mut eig = sym_eig(&c)?;
        for k in 0..n {
            let row = eig.vectors_t.row_mut(k);
            for (i, v) in row.iter_mut().enumerate() {
                *v /= sq[i];
            }
        }
        return Ok(eig);
    }
    let ch = Cholesky::new(b, "B")?;
    // C = L⁻¹ A L⁻ᵀ
    let x = ch.forward_matrix(a);
    let mut c = ch.forward_matrix(&x.transpose());
    c.symmetrize();
    let eig = sym_eig(&c)?;
    // z = L⁻ᵀ y; with y as rows this is Z = (L⁻ᵀ Yᵀ)ᵀ.
    let z = ch.backward_matrix(&eig.vectors_t.transpose());
    Ok(SymEig {
        values: eig.values,
        vectors_t: z.transpose(),
    })
}

fn check_square(a: &DenseMatrix, what: &str) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, not square",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() > MAX_EIG_DIM {
        return Err(Error::OracleTooLarge {
            dofs: a.rows(),
            cap: MAX_EIG_DIM,
        });
    }
    Ok(())
}

/// Reduces the full symmetric matrix `a` to tridiagonal form T = Qᵀ A Q.
/// Householder vectors are left in the strict upper part of row k
/// (implicit unit leading entry). Returns (diagonal, off-diagonal, taus).
fn tridiagonalize(a: &mut DenseMatrix) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut taus = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        d[k] = a.get(k, k);
        let m = n - k - 1;
        let (tau, beta) = {
            let x = &mut a.row_mut(k)[k + 1..];
            householder(x)
        };
        e[k] = beta;
        taus[k] = tau;
        if tau == 0.0 || m < 2 {
            continue;
        }
        let v: Vec<f64> = {
            let mut v = a.row(k)[k + 1..].to_vec();
            v[0] = 1.0;
            v
        };
        // p = τ A22 v, w = p − (τ/2)(pᵀv) v, A22 −= v wᵀ + w vᵀ
        let p = &mut p[..m];
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = tau * dot(&a.row(k + 1 + i)[k + 1..], &v);
        }
        let kk = 0.5 * tau * dot(p, &v);
        for (pi, vi) in p.iter_mut().zip(&v) {
            *pi -= kk * vi;
        }
        for i in 0..m {
            let row = &mut a.row_mut(k + 1 + i)[k + 1..];
            let vi = v[i];
            let wi = p[i];
            for j in 0..m {
                row[j] -= vi * p[j] + wi * v[j];
            }
        }
    }
    d[n - 1] = a.get(n - 1, n - 1);
    e[n - 1] = 0.0;
    (d, e, taus)
}

/// Generates a reflector H = I − τ v vᵀ with H x = β e₁, v₀ = 1.
/// Overwrites x[1..] with v[1..]. Returns (τ, β).
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let xnorm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if xnorm == 0.0 {
        return (0.0, alpha);
    }
    let beta = -alpha.signum() * alpha.hypot(xnorm);
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in x[1..].iter_mut() {
        *v *= scale;
    }
    x[0] = beta;
    (tau, beta)
}

/// Forms Q = H₀ H₁ ⋯ H_{n−2} by backward accumulation.
fn accumulate_reflectors(a: &DenseMatrix, taus: &[f64]) -> DenseMatrix {
    let n = a.rows();
    let mut q = DenseMatrix::identity(n);
    let mut u = vec![0.0; n];
    for k in (0..n.saturating_sub(1)).rev() {
        let tau = taus[k];
        if tau == 0.0 {
            continue;
        }
        let m = n - k - 1;
        let mut v = a.row(k)[k + 1..].to_vec();
        v[0] = 1.0;
        let u = &mut u[..m];
        u.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            axpy(v[i], &q.row(k + 1 + i)[k + 1..], u);
        }
        for i in 0..m {
            let c = -tau * v[i];
            if c != 0.0 {
                axpy(c, u, &mut q.row_mut(k + 1 + i)[k + 1..]);
            }
        }
    }
    q
}

/// Implicit QL on a symmetric tridiagonal matrix (`e[i]` couples i, i+1,
/// `e[n−1] = 0`). If `zt` is given, its rows are rotated along.
fn tql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut DenseMatrix>) -> Result<()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::InvalidArgument(
                        "QL iteration did not converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        rotate_rows(z, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(z: &mut DenseMatrix, i: usize, c: f64, s: f64) {
    let cols = z.cols();
    let (head, tail) = z.as_mut_slice().split_at_mut((i + 1) * cols);
    let ri = &mut head[i * cols..];
    let ri1 = &mut tail[..cols];
    for (a, b) in ri.iter_mut().zip(ri1.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

fn sort_pairs(d: Vec<f64>, zt: DenseMatrix) -> SymEig {
    let n = d.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let mut vt = DenseMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &i) in idx.iter().enumerate() {
        values.push(d[i]);
        vt.row_mut(k).copy_from_slice(zt.row(i));
    }
    SymEig {
        values,
        vectors_t: vt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_spd;

    fn residual(a: &DenseMatrix, b: &DenseMatrix, vals: &[f64], z: &DenseMatrix) -> f64 {
        let az = a.matmul(z);
        let bz = b.matmul(z);
        let mut r = 0.0;
        for i in 0..a.rows() {
            for j in 0..vals.len() {
                let v = az.get(i, j) - bz.get(i, j) * vals[j];
                r += v * v;
            }
        }
        r.sqrt()
    }

    #[test]
    fn identity_pair() {
        let (vals, z) = generalized_sym_eig(&DenseMatrix::identity(2), &DenseMatrix::identity(2)).unwrap();
        assert_eq!(vals.len(), 2);
        for v in &vals {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let ztz = z.transpose().matmul(&z);
        assert!(ztz.sub(&DenseMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn diagonal_pair() {
        let a = DenseMatrix::from_diag(&[2.0, 8.0]);
        let b = DenseMatrix::from_diag(&[1.0, 2.0]);
        let (vals, _) = generalized_sym_eig(&a, &b).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14 && (vals[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn random_pair_residual_and_b_orthonormality() {
        let a = random_spd(6, 1);
        let b = random_spd(6, 2);
        let (vals, z) = generalized_sym_eig(&a, &b).unwrap();
        assert!(residual(&a, &b, &vals, &z) < 1e-8);
        let ztbz = z.transpose().matmul(&b).matmul(&z);
        assert!(ztbz.sub(&DenseMatrix::identity(6)).max_abs() < 1e-8);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn reconstruction_up_to_200() {
        for &n in &[1usize, 2, 3, 17, 64, 200] {
            let a = random_spd(n, 10 + n as u64);
            let b = random_spd(n, 20 + n as u64);
            let (vals, z) = generalized_sym_eig(&a, &b).unwrap();
            // A = B Z Λ Zᵀ B
            let bz = b.matmul(&z);
            let mut bzl = bz.clone();
            for i in 0..n {
                for j in 0..n {
                    bzl.set(i, j, bz.get(i, j) * vals[j]);
                }
            }
            let rec = bzl.matmul(&bz.transpose());
            let err = rec.sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(err < 1e-8, "n={n} err={err}");
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        // Block structure with exact multiplicities stresses deflation.
        let n = 12;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            a.set(i, i, (i / 4) as f64 + 1.0);
        }
        let vals = sym_eigvals(&a).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert!((v - ((i / 4) as f64 + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn non_spd_b_is_named() {
        let a = DenseMatrix::identity(2);
        let mut b = DenseMatrix::identity(2);
        b.set(0, 1, 2.0);
        b.set(1, 0, 2.0);
        match generalized_sym_eig(&a, &b) {
            Err(Error::NotPositiveDefinite { what, .. }) => assert_eq!(what, "B"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tridiagonal_values_match_dense() {
        let d = [2.0, 3.0, -1.0, 4.0];
        let e = [0.5, -0.25, 1.5];
        let t = DenseMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                d[i]
            } else if i + 1 == j {
                e[i]
            } else if j + 1 == i {
                e[j]
            } else {
                0.0
            }
        });
        let a = tridiagonal_eigvals(&d, &e).unwrap();
        let b = sym_eigvals(&t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
