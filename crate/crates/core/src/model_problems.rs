//! SPD operators on P⁰(T_L): the s-Riesz matrix of a [`NormOracle`] and
//! externally assembled Galerkin matrices read from text files.
//!
//! Matrix file format: the first token is n, followed by the n(n+1)/2
//! lower-triangular entries in row-major order, separated by whitespace.

use crate::error::{Error, Result};
use crate::fem_oracles::NormOracle;
use crate::linalg::{dot, DenseMatrix, LinearOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::path::Path;

/// A_s = W(W⁻¹Mass)^{1−s}, applied through the oracle's eigenpairs.
#[derive(Clone, Copy, Debug)]
pub struct SRieszOperator<'a> {
    oracle: &'a NormOracle,
    pub s: f64,
}

pub fn build_sriesz(oracle: &NormOracle, s: f64) -> Result<SRieszOperator<'_>> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("s = {s} outside (0, 1)")));
    }
    Ok(SRieszOperator { oracle, s })
}

impl SRieszOperator<'_> {
    pub fn oracle(&self) -> &NormOracle {
        self.oracle
    }

    pub fn dense(&self) -> DenseMatrix {
        self.oracle.sriesz_matrix(self.s)
    }

    /// xᵀA_s x.
    pub fn energy(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply_vec(x))
    }

    /// The exact inverse A_s⁻¹ as an operator.
    pub fn inverse(&self) -> SRieszInverse<'_> {
        SRieszInverse { op: *self }
    }
}

impl LinearOperator for SRieszOperator<'_> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.oracle.apply_sriesz(self.s, x, y)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SRieszInverse<'a> {
    op: SRieszOperator<'a>,
}

impl LinearOperator for SRieszInverse<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.oracle.apply_sriesz_inv(self.op.s, x, y)
    }
}

/// Number of random Rayleigh quotients in the SPD probe.
pub const SPD_PROBES: usize = 20;

/// True when xᵀAx > 0 for `samples` seeded standard normal x.
pub fn spd_probe(a: &dyn LinearOperator, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.dim();
    (0..samples).all(|_| {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        dot(&x, &a.apply_vec(&x)) > 0.0
    })
}

/// Imported symmetric matrix with the outcome of its SPD probe.
#[derive(Clone, Debug)]
pub struct UserOperator {
    pub matrix: DenseMatrix,
    pub spd_probe_passed: bool,
    pub warning: Option<String>,
}

impl LinearOperator for UserOperator {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec_into(x, y)
    }
}

pub fn format_user_matrix(a: &DenseMatrix) -> String {
    let n = a.rows();
    let mut out = format!("{n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..=i).map(|j| format!("{:e}", a.get(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_user_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch("matrix is not square".into()));
    }
    std::fs::write(path, format_user_matrix(a))?;
    Ok(())
}

pub fn parse_user_matrix(text: &str) -> Result<DenseMatrix> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let (line, first) = tokens.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty matrix file".into(),
    })?;
    let n: usize = first.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected dimension, found `{first}`"),
    })?;
    let mut a = DenseMatrix::zeros(n, n);
    let mut last = line;
    for i in 0..n {
        for j in 0..=i {
            let (line, t) = tokens.next().ok_or(Error::Parse {
                line: last,
                msg: format!("expected {} values, file ends early", n * (n + 1) / 2),
            })?;
            last = line;
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: `{t}`"),
            })?;
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    if let Some((line, t)) = tokens.next() {
        return Err(Error::Parse {
            line,
            msg: format!("trailing token `{t}`"),
        });
    }
    Ok(a)
}

/// Reads a matrix file and probes it for positive definiteness. A failed
/// probe sets a warning instead of failing.
pub fn load_user_operator(path: &Path, expected_dim: Option<usize>) -> Result<UserOperator> {
    let matrix = parse_user_matrix(&std::fs::read_to_string(path)?)?;
    if let Some(n) = expected_dim {
        if matrix.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix has dimension {}, the finest mesh has {n} elements",
                matrix.rows()
            )));
        }
    }
    let ok = spd_probe(&matrix, SPD_PROBES, 0x5eed);
    let warning = (!ok).then(|| format!("{}: SPD probe found a non-positive Rayleigh quotient", path.display()));
    Ok(UserOperator {
        matrix,
        spd_probe_passed: ok,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem_oracles::DEFAULT_DEPTH;
    use crate::linalg::sym_eigvals;
    use crate::mesh::{builtin, MeshHierarchy};
    use crate::Variant;

    fn oracle() -> NormOracle {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 2).unwrap();
        NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap()
    }

    #[test]
    fn energy_matches_interp_norm() {
        let o = oracle();
        let a = build_sriesz(&o, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..o.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let q = o.interp_norm_sq(&x, 0.5).unwrap();
            assert!(((a.energy(&x) - q) / q).abs() < 1e-10);
        }
        assert!(build_sriesz(&o, 1.0).is_err());
    }

    #[test]
    fn dense_is_spd_and_commuting() {
        let o = oracle();
        let a = build_sriesz(&o, 0.5).unwrap().dense();
        let b = build_sriesz(&o, 0.25).unwrap().dense();
        assert!(a.is_symmetric(1e-12 * a.max_abs()));
        assert!(sym_eigvals(&a).unwrap()[0] > 0.0);
        let c = a.matmul(&b).sub(&b.matmul(&a));
        assert!(c.frobenius_norm() < 1e-8 * a.frobenius_norm() * b.frobenius_norm());
    }

    #[test]
    fn round_trip_and_probe() {
        let o = oracle();
        let a = build_sriesz(&o, 0.5).unwrap().dense();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_user_matrix(&p, &a).unwrap();
        let u = load_user_operator(&p, Some(a.rows())).unwrap();
        assert!(u.spd_probe_passed && u.warning.is_none());
        assert_eq!(u.matrix, a);
        assert!(load_user_operator(&p, Some(3)).is_err());
        let mut bad = DenseMatrix::identity(4);
        bad.set(2, 2, -5.0);
        write_user_matrix(&p, &bad).unwrap();
        let u = load_user_operator(&p, None).unwrap();
        assert!(!u.spd_probe_passed && u.warning.is_some());
    }

    #[test]
    fn parse_errors_carry_lines() {
        assert!(matches!(parse_user_matrix("2\n1\n0 x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_user_matrix("2\n1\n0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_user_matrix("1\n1 2\n"), Err(Error::Parse { line: 2, .. })));
    }
}
