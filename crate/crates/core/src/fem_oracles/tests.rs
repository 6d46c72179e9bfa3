use super::*;
use crate::linalg::generalized_sym_eig;
use crate::mesh::builtin;
use crate::spaces::haar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(l: usize) -> MeshHierarchy {
    MeshHierarchy::uniform(builtin("square2").unwrap(), l).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Dense Cholesky route for W on a small mesh.
#[test]
fn gram_matches_dense_solve() {
    let h = square(2);
    for variant in [Variant::Plain, Variant::Tilde] {
        let sol = DualNormSolver::new(&h, variant, 1, 0).unwrap();
        let w = sol.gram().unwrap();
        let oh = MeshHierarchy::uniform(h.finest().clone(), 1).unwrap();
        let (a, _) = p1_energy_matrix(oh.finest(), variant).unwrap();
        let ad = DenseMatrix::from_fn(a.rows(), a.rows(), |i, j| a.get(i, j));
        let ch = Cholesky::new(&ad, "A").unwrap();
        for i in [0, 5, 17] {
            let bi: Vec<f64> = (0..a.rows()).map(|d| sol.load.get(d, i)).collect();
            let ui = ch.solve(&bi);
            for j in [0, 3, 31] {
                let bj: Vec<f64> = (0..a.rows()).map(|d| sol.load.get(d, j)).collect();
                assert!((w.get(i, j) - dot(&bj, &ui)).abs() < 1e-14);
            }
        }
        let x = random_vec(w.rows(), 1);
        assert!((sol.norm_sq(&x).unwrap() - w.quad_form(&x)).abs() < 1e-14);
    }
}

#[test]
fn endpoint_identities() {
    let h = square(2);
    for variant in [Variant::Plain, Variant::Tilde] {
        let o = NormOracle::new(&h, variant, DEFAULT_DEPTH).unwrap();
        for seed in 0..5 {
            let x = random_vec(o.dim(), seed);
            let l2 = o.l2_norm_sq(&x).unwrap();
            let w = o.w_norm_sq(&x).unwrap();
            assert!(((o.interp_norm_sq(&x, 0.0).unwrap() - l2) / l2).abs() < 1e-10);
            assert!(((o.interp_norm_sq(&x, 1.0).unwrap() - w) / w).abs() < 1e-10);
            // Log-convexity.
            let half = o.interp_norm_sq(&x, 0.5).unwrap();
            assert!(half <= (w * l2).sqrt() * (1.0 + 1e-12));
        }
        assert!(o.interp_norm_sq(&[0.0; 32], 1.5).is_err());
    }
}

#[test]
fn z_is_w_orthonormal() {
    let h = square(1);
    let o = NormOracle::new(&h, Variant::Tilde, DEFAULT_DEPTH).unwrap();
    let z = o.z();
    let ztwz = z.transpose().matmul(&o.w().matmul(&z));
    let n = o.dim();
    for i in 0..n {
        for j in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((ztwz.get(i, j) - e).abs() < 1e-10);
        }
    }
}

#[test]
fn tilde_constant_bounded_by_l2() {
    let h = square(2);
    let o = NormOracle::new(&h, Variant::Tilde, DEFAULT_DEPTH).unwrap();
    let one = vec![1.0; o.dim()];
    let w = o.w_norm_sq(&one).unwrap();
    assert!(w > 0.0 && w <= 1.0);
}

/// ‖ψ‖_{-1}/(h_E‖ψ‖) on interior atoms of uniform meshes stays in a
/// level-independent window.
#[test]
fn atom_scaling_window() {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for l in 1..=3 {
        let h = square(l);
        let sol = DualNormSolver::new(&h, Variant::Plain, DEFAULT_DEPTH, 0).unwrap();
        let m = h.finest();
        for &f in &m.interior_facets {
            let (a, p) = haar(&h, l, f).unwrap();
            let r = sol.norm_sq(&p.coeffs).unwrap().sqrt() / (a.h_e() * a.l2_norm_sq().sqrt());
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    assert!(hi / lo < 10.0, "{lo} {hi}");
}

/// Self-convergence of the oracle depth on the L = 2 square hierarchy.
/// Measured at M = L+2 → L+3: diagonal change 8.9% (plain) and 0.6%
/// (tilde), generalized eigenvalues in [0.68, 1] and [0.73, 1].
#[test]
fn deeper_oracle_is_spectrally_close() {
    let h = square(2);
    for variant in [Variant::Plain, Variant::Tilde] {
        let w1 = hminus1_gram(&h, variant, 2 + DEFAULT_DEPTH).unwrap();
        let w2 = hminus1_gram(&h, variant, 3 + DEFAULT_DEPTH).unwrap();
        for i in 0..w1.rows() {
            assert!(((w2.get(i, i) - w1.get(i, i)) / w1.get(i, i)).abs() < 0.10);
        }
        let (ev, _) = generalized_sym_eig(&w1, &w2).unwrap();
        assert!(ev[0] >= 0.65 && *ev.last().unwrap() <= 1.25, "{} {}", ev[0], ev.last().unwrap());
    }
}

#[test]
fn projection_properties() {
    let h = square(2);
    let o = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    for l in 0..=1 {
        // Fixes the coarse subspace.
        let c = P0Fn::new(l, random_vec(h.mesh(l).num_elements(), 40 + l as u64));
        let fine = crate::spaces::prolong(&h, &c, 2).unwrap();
        let p = hminus1_project(&h, &o, &fine, l).unwrap();
        for (a, b) in p.coeffs.iter().zip(&c.coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
        for seed in 0..10 {
            let x = P0Fn::new(2, random_vec(o.dim(), seed));
            let p = hminus1_project(&h, &o, &x, l).unwrap();
            let pf = crate::spaces::prolong(&h, &p, 2).unwrap();
            let pp = hminus1_project(&h, &o, &pf, l).unwrap();
            for (a, b) in p.coeffs.iter().zip(&pp.coeffs) {
                assert!((a - b).abs() < 1e-10);
            }
            let r: Vec<f64> = x.coeffs.iter().zip(&pf.coeffs).map(|(a, b)| a - b).collect();
            let (nx, np, nr) = (
                o.w_norm_sq(&x.coeffs).unwrap(),
                o.w_norm_sq(&pf.coeffs).unwrap(),
                o.w_norm_sq(&r).unwrap(),
            );
            assert!(((np + nr - nx) / nx).abs() < 1e-10);
        }
    }
}

#[test]
fn sriesz_consistent() {
    let h = square(2);
    let o = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    let a = o.sriesz_matrix(0.5);
    let mut y = vec![0.0; o.dim()];
    let mut z = vec![0.0; o.dim()];
    for seed in 0..5 {
        let x = random_vec(o.dim(), seed);
        let q = o.interp_norm_sq(&x, 0.5).unwrap();
        assert!(((a.quad_form(&x) - q) / q).abs() < 1e-10);
        o.apply_sriesz(0.5, &x, &mut y);
        o.apply_sriesz_inv(0.5, &y, &mut z);
        for (u, v) in x.iter().zip(&z) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}

/// A piecewise constant written in the degree-1 Lagrange basis has the
/// same norms as in the P0 oracle.
#[test]
fn degree_one_oracle_extends_p0() {
    let h = square(1);
    let o0 = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    let o1 = NormOracle::with_degree(&h, Variant::Plain, DEFAULT_DEPTH, 1).unwrap();
    let x = random_vec(o0.dim(), 3);
    let x1: Vec<f64> = x.iter().flat_map(|&v| [v; 3]).collect();
    for s in [0.0, 0.3, 1.0] {
        let a = o0.interp_norm_sq(&x, s).unwrap();
        let b = o1.interp_norm_sq(&x1, s).unwrap();
        if s == 0.0 || s == 1.0 {
            assert!(((a - b) / a).abs() < 1e-10);
        } else {
            // The larger space can only lower the interpolated norm.
            assert!(b <= a * (1.0 + 1e-10));
        }
    }
}
