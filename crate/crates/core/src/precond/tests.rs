use super::*;
use crate::linalg::ScaledIdentity;
use crate::mesh::builtin;
use crate::sampling::normal_vector;

fn square(l: usize) -> MeshHierarchy {
    MeshHierarchy::uniform(builtin("square2").unwrap(), l).unwrap()
}

#[test]
fn coarse_square_atom_counts() {
    let h = square(0);
    let p = build_precond(&h, 0.5, Variant::Plain, WeightMode::Surrogate, false).unwrap();
    assert_eq!(p.num_atoms(), 5);
    let p = build_precond(&h, 0.5, Variant::Tilde, WeightMode::Surrogate, false).unwrap();
    assert_eq!(p.num_facet_atoms(), 1);
    assert_eq!(p.num_atoms(), 2);
    let d = p.constant_weight().unwrap();
    assert!((d - 2f64.sqrt().powf(1.0)).abs() < 1e-14);
    assert!(build_precond(&h, 1.0, Variant::Plain, WeightMode::Surrogate, false).is_err());
}

#[test]
fn apply_matches_dense_and_is_symmetric() {
    let h = square(2);
    let n = h.finest().num_elements();
    for variant in [Variant::Plain, Variant::Tilde] {
        for coarse in [false, true] {
            let p = build_precond(&h, 0.4, variant, WeightMode::Surrogate, coarse).unwrap();
            let b = p.dense_matrix();
            assert!(b.is_symmetric(1e-12 * b.max_abs()));
            assert!(sym_eigvals(&b).unwrap()[0] > 0.0, "{variant} {coarse}");
            for seed in 0..3 {
                let r = normal_vector(n, seed);
                let u = p.apply_precond(&r).unwrap();
                let v = b.matvec(&r);
                for (a, c) in u.iter().zip(&v) {
                    assert!((a - c).abs() < 1e-11 * b.max_abs());
                }
            }
        }
    }
    let p = build_precond(&h, 0.4, Variant::Plain, WeightMode::Surrogate, false).unwrap();
    assert!(p.apply_precond(&[1.0; 3]).is_err());
}

#[test]
fn apply_cost_is_linear() {
    for l in [3, 5] {
        let h = square(l);
        let p = build_precond(&h, 0.5, Variant::Tilde, WeightMode::Surrogate, false).unwrap();
        let ops = OpCounter::new();
        p.apply_counted(&normal_vector(h.finest().num_elements(), 1), Some(&ops)).unwrap();
        assert!(ops.get() as usize <= 40 * h.total_elements());
    }
}

#[test]
fn exact_weights_are_energies() {
    let h = square(1);
    let o = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    let a = build_sriesz(&o, 0.5).unwrap();
    let p = build_precond(&h, 0.5, Variant::Plain, WeightMode::Exact(&a), false).unwrap();
    let (psi, w) = p.atom_matrix();
    for j in 0..w.len() {
        let c = psi.column(j);
        assert!(((a.energy(&c) - w[j]) / w[j]).abs() < 1e-12);
    }
    let small = ScaledIdentity { n: 3, scale: 1.0 };
    assert!(build_precond(&h, 0.5, Variant::Plain, WeightMode::Exact(&small), false).is_err());
}

#[test]
fn as_norm_routes_agree_and_bound_the_norm() {
    for l in 1..=2 {
        let h = square(l);
        let n = h.finest().num_elements();
        for variant in [Variant::Plain, Variant::Tilde] {
            let o = NormOracle::new(&h, variant, DEFAULT_DEPTH).unwrap();
            for seed in 0..5 {
                let x = P0Fn::new(l, normal_vector(n, seed));
                let r = as_norm_exact(&h, 0.5, variant, &x, &o).unwrap();
                assert!(((r.inverse_route - r.qp_route) / r.qp_route).abs() < 1e-8);
                // Any single decomposition bounds the norm from below by
                // the Cauchy–Schwarz argument; here only the window.
                let q = o.interp_norm_sq(&x.coeffs, 0.5).unwrap();
                let ratio = r.qp_route / q;
                assert!(ratio > 0.2 && ratio < 25.0, "{variant} L={l} {ratio}");
            }
        }
    }
}

#[test]
fn single_atom_as_norm_is_its_norm() {
    let h = square(1);
    let o = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    let a = build_sriesz(&o, 0.3).unwrap();
    let p = build_precond(&h, 0.3, Variant::Plain, WeightMode::Exact(&a), false).unwrap();
    let (psi, w) = p.atom_matrix();
    for j in [0, 3, w.len() - 1] {
        let col = psi.column(j);
        let one = DenseMatrix::from_fn(psi.rows(), 1, |i, _| col[i]);
        let r = additive_schwarz_norm(&one, &w[j..j + 1], &col).unwrap();
        let q = a.energy(&col);
        assert!(((r.inverse_route - q) / q).abs() < 1e-12);
        assert!(((r.qp_route - q) / q).abs() < 1e-12);
    }
}

#[test]
fn non_spanning_atoms_are_rejected() {
    let h = square(1);
    let o = NormOracle::new(&h, Variant::Tilde, DEFAULT_DEPTH).unwrap();
    let a = build_sriesz(&o, 0.5).unwrap();
    let p = build_precond(&h, 0.5, Variant::Tilde, WeightMode::Exact(&a), false).unwrap();
    let (psi, w) = p.atom_matrix();
    // Dropping the constant leaves mean-zero atoms only.
    let m = w.len() - 1;
    let sub = DenseMatrix::from_fn(psi.rows(), m, |i, j| psi.get(i, j));
    let x = vec![1.0; psi.rows()];
    assert!(matches!(additive_schwarz_norm(&sub, &w[..m], &x), Err(Error::RankDeficient(_))));
}

#[test]
fn preconditioning_reduces_condition() {
    let h = square(3);
    let o = NormOracle::new(&h, Variant::Plain, DEFAULT_DEPTH).unwrap();
    let a = build_sriesz(&o, 0.5).unwrap();
    let b = build_precond(&h, 0.5, Variant::Plain, WeightMode::Surrogate, false).unwrap();
    let with = condition_study(&a, &b, 3, 0.5, Variant::Plain, 7).unwrap();
    let id = ScaledIdentity { n: a.dim(), scale: 1.0 };
    let without = condition_study(&a, &id, 3, 0.5, Variant::Plain, 7).unwrap();
    assert_eq!(with.method, "dense");
    assert!(with.pcg_converged && without.pcg_converged);
    assert!(with.kappa < 20.0, "{}", with.kappa);
    assert!(without.kappa > 2.0 * with.kappa);
    assert!(with.pcg_iterations < without.pcg_iterations);
    // Lanczos on the same pair agrees with the dense eigenvalues.
    let (lo, hi) = lanczos_extreme_eigs(&a, &b, LANCZOS_MAX_ITERS).unwrap();
    assert!(((lo - with.lambda_min) / with.lambda_min).abs() < 1e-6);
    assert!(((hi - with.lambda_max) / with.lambda_max).abs() < 1e-6);
}

/// Measured κ at s = 1/2: 40.3, 50.0, 56.0 (p = 1) for L = 1, 2, 3.
#[test]
fn higher_order_precond_is_spd_and_effective() {
    let mut kappas = Vec::new();
    for l in 1..=2 {
        let h = square(l);
        let b = build_precond_higher_order(&h, 0.5, 1, Variant::Plain).unwrap();
        let bd = densify(&b);
        assert!(bd.is_symmetric(1e-12 * bd.max_abs()));
        let o = NormOracle::with_degree(&h, Variant::Plain, DEFAULT_DEPTH, 1).unwrap();
        let a = build_sriesz(&o, 0.5).unwrap();
        kappas.push(condition_study(&a, &b, l, 0.5, Variant::Plain, 3).unwrap().kappa);
    }
    assert!(kappas.iter().all(|&k| k < 80.0) && kappas[1] < 1.4 * kappas[0], "{kappas:?}");
    let h = square(1);
    assert!(build_precond_higher_order(&h, 0.5, 3, Variant::Plain).is_err());
}

#[test]
fn higher_order_counts_and_constants() {
    let h = square(2);
    let n = h.finest().num_elements();
    for p in [1, 2] {
        let b = build_precond_higher_order(&h, 0.5, p, Variant::Tilde).unwrap();
        let dp = (p + 1) * (p + 2) / 2;
        assert_eq!(b.num_atoms(), b.base.num_atoms() + (dp - 1) * n);
        // Dual of a piecewise constant in the Lagrange basis: ⟨φ, L_a⟩_T.
        let phi = normal_vector(n, 9);
        let m = h.finest();
        let mut r = Vec::with_capacity(n * dp);
        for t in 0..n {
            for a in 0..dp {
                let w = crate::spaces::quadrature::integrate(m.element_points(t), |bary, _| {
                    crate::spaces::lagrange_eval(p, a, bary[1], bary[2])
                });
                r.push(phi[t] * w);
            }
        }
        let r0: Vec<f64> = (0..n).map(|t| r[t * dp..(t + 1) * dp].iter().sum()).collect();
        let u0 = b.base.apply_precond(&r0).unwrap();
        let u = b.apply_precond(&r).unwrap();
        for t in 0..n {
            for a in 0..dp {
                assert!((u[t * dp + a] - u0[t]).abs() < 1e-10 * u0[t].abs().max(1.0), "p={p}");
            }
        }
    }
}

#[test]
fn condition_csv_row() {
    let r = ConditionReport {
        finest_level: 2,
        n: 32,
        s: 0.5,
        variant: Variant::Tilde,
        lambda_min: 0.5,
        lambda_max: 2.0,
        kappa: 4.0,
        pcg_iterations: 9,
        pcg_converged: true,
        method: "dense",
        seconds: 0.0,
    };
    assert_eq!(CONDITION_CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
    assert!(r.csv_row().starts_with("2,32,0.5,tilde,dense,"));
}

#[test]
fn apply_is_symmetric_on_random_pairs() {
    let h = MeshHierarchy::corner_adaptive(builtin("square2").unwrap(), [0.0, 0.0], 0.5, 300, 20).unwrap();
    let n = h.finest().num_elements();
    let p = build_precond(&h, 0.6, Variant::Tilde, WeightMode::Surrogate, false).unwrap();
    for seed in 0..20 {
        let r = normal_vector(n, 2 * seed);
        let q = normal_vector(n, 2 * seed + 1);
        let a = dot(&p.apply_precond(&r).unwrap(), &q);
        let b = dot(&r, &p.apply_precond(&q).unwrap());
        assert!((a - b).abs() < 1e-12 * a.abs().max(b.abs()));
    }
}

#[test]
fn exact_inverse_gives_unit_condition() {
    let h = square(2);
    let o = NormOracle::new(&h, Variant::Tilde, DEFAULT_DEPTH).unwrap();
    let a = build_sriesz(&o, 0.5).unwrap();
    let r = condition_study(&a, &a.inverse(), 2, 0.5, Variant::Tilde, 1).unwrap();
    assert!((r.kappa - 1.0).abs() < 1e-8, "{}", r.kappa);
    assert!(r.pcg_iterations <= 2);
}
