//! Householder QR and the minimum-norm solution of an underdetermined or
//! overdetermined consistent system.

use super::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Thin Householder QR of an r×c matrix with r ≥ c.
struct Qr {
    /// Reflector vectors (column k stored in `v[k]`, length r − k).
    v: Vec<Vec<f64>>,
    tau: Vec<f64>,
    /// Upper-triangular c×c factor, row-major.
    r: Vec<f64>,
    c: usize,
}

impl Qr {
    fn new(a: &DenseMatrix) -> Self {
        let rows = a.rows();
        let c = a.cols();
        assert!(rows >= c);
        // Column-major working copy.
        let mut cols: Vec<Vec<f64>> = (0..c).map(|j| a.column(j)).collect();
        let mut vs = Vec::with_capacity(c);
        let mut taus = Vec::with_capacity(c);
        let mut r = vec![0.0; c * c];
        for k in 0..c {
            let x = &cols[k][k..];
            let alpha = x[0];
            let xnorm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            let (tau, beta, v) = if xnorm == 0.0 {
                let mut v = vec![0.0; rows - k];
                v[0] = 1.0;
                (0.0, alpha, v)
            } else {
                let beta = -alpha.signum() * alpha.hypot(xnorm);
                let tau = (beta - alpha) / beta;
                let s = 1.0 / (alpha - beta);
                let mut v: Vec<f64> = x.iter().map(|t| t * s).collect();
                v[0] = 1.0;
                (tau, beta, v)
            };
            r[k * c + k] = beta;
            for j in k + 1..c {
                let col = &mut cols[j][k..];
                let w = tau * dot(&v, col);
                for (ci, vi) in col.iter_mut().zip(&v) {
                    *ci -= w * vi;
                }
                r[k * c + j] = col[0];
            }
            vs.push(v);
            taus.push(tau);
        }
        Self {
            v: vs,
            tau: taus,
            r,
            c,
        }
    }

    /// y ← Qᵀ y
    fn apply_qt(&self, y: &mut [f64]) {
        for k in 0..self.c {
            let seg = &mut y[k..];
            let w = self.tau[k] * dot(&self.v[k], seg);
            for (si, vi) in seg.iter_mut().zip(&self.v[k]) {
                *si -= w * vi;
            }
        }
    }

    /// y ← Q y (y of length r, first c entries meaningful on input)
    fn apply_q(&self, y: &mut [f64]) {
        for k in (0..self.c).rev() {
            let seg = &mut y[k..];
            let w = self.tau[k] * dot(&self.v[k], seg);
            for (si, vi) in seg.iter_mut().zip(&self.v[k]) {
                *si -= w * vi;
            }
        }
    }

    fn min_abs_diag_ratio(&self) -> f64 {
        let d: Vec<f64> = (0..self.c).map(|k| self.r[k * self.c + k].abs()).collect();
        let mx = d.iter().cloned().fold(0.0, f64::max);
        if mx == 0.0 {
            return 0.0;
        }
        d.iter().cloned().fold(f64::INFINITY, f64::min) / mx
    }
}

/// Minimum Euclidean-norm c with A c = x, for A of size n×m. Uses QR of A
/// when m ≤ n (consistency checked) and QR of Aᵀ when m > n.
pub fn min_norm_solve(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    let m = a.cols();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for {n}x{m}",
            x.len()
        )));
    }
    const RANK_TOL: f64 = 1e-12;
    if m <= n {
        let qr = Qr::new(a);
        if qr.min_abs_diag_ratio() < RANK_TOL {
            return Err(Error::RankDeficient("columns are linearly dependent".into()));
        }
        let mut y = x.to_vec();
        qr.apply_qt(&mut y);
        let tail = y[m..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if tail > 1e-9 * xn.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(format!(
                "right-hand side not in the range (residual {tail:e})"
            )));
        }
        let mut c = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = y[i];
            for j in i + 1..m {
                s -= qr.r[i * m + j] * c[j];
            }
            c[i] = s / qr.r[i * m + i];
        }
        Ok(c)
    } else {
        // Aᵀ = Q R ⇒ A = Rᵀ Qᵀ; c = Q [R⁻ᵀ x; 0].
        let qr = Qr::new(&a.transpose());
        if qr.min_abs_diag_ratio() < RANK_TOL {
            return Err(Error::RankDeficient("rows are linearly dependent".into()));
        }
        let mut y = vec![0.0; m];
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= qr.r[j * n + i] * y[j];
            }
            y[i] = s / qr.r[i * n + i];
        }
        qr.apply_q(&mut y);
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underdetermined_minimum_norm() {
        // x + y = 2 → minimum norm (1, 1)
        let a = DenseMatrix::from_fn(1, 2, |_, _| 1.0);
        let c = min_norm_solve(&a, &[2.0]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_consistent() {
        let a = DenseMatrix::from_fn(3, 1, |i, _| (i + 1) as f64);
        let c = min_norm_solve(&a, &[2.0, 4.0, 6.0]).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-14);
        assert!(min_norm_solve(&a, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn wide_random_matches_normal_equations() {
        let a = DenseMatrix::from_fn(4, 9, |i, j| (((i * 9 + j) * (i * 9 + j)) as f64 * 0.37).sin());
        let x = [1.0, -2.0, 0.5, 3.0];
        let c = min_norm_solve(&a, &x).unwrap();
        let ac = a.matvec(&c);
        for (p, q) in ac.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
        // c must lie in the row space: c = Aᵀ y
        let aat = a.matmul(&a.transpose());
        let y = crate::linalg::dense::cholesky_solve(&aat, &x).unwrap();
        let c2 = a.matvec_t(&y);
        for (p, q) in c.iter().zip(&c2) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_rows_rejected() {
        let a = DenseMatrix::from_fn(2, 3, |_, j| j as f64 + 1.0);
        assert!(min_norm_solve(&a, &[1.0, 1.0]).is_err());
    }
}
