//! Reference-element basis of P^p_*: polynomials of degree ≤ p with zero
//! mean, L²-orthonormal on the reference triangle {(0,0),(1,0),(0,1)}.

use super::P0Fn;
use crate::error::{Error, Result};
use crate::linalg::{min_norm_solve, DenseMatrix};
use crate::mesh::Point;

const MONOMIALS: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

fn fact(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// ∫_T̂ ξ^a η^b = a! b! / (a+b+2)!.
fn ref_moment(a: u32, b: u32) -> f64 {
    fact(a) * fact(b) / fact(a + b + 2)
}

/// Orthonormal star basis for degree p and Lagrange-node transforms.
#[derive(Clone, Debug)]
pub struct StarBasis {
    pub p: usize,
    /// Monomial coefficients of each star function (rows).
    coeffs: Vec<Vec<f64>>,
    /// 2∫_T̂ L_k: contribution of Lagrange node k to the mean.
    node_mean: Vec<f64>,
    /// ⟨L_k, b̂_j⟩_T̂ for star function j (rows) and node k.
    node_star: Vec<Vec<f64>>,
}

/// Degree-p function split into its elementwise mean and star part.
#[derive(Clone, Debug)]
pub struct StarSplit {
    pub p0: P0Fn,
    /// Coefficients w.r.t. the L²(T)-orthonormal χ_{T,j}, row-major per element.
    pub star: Vec<f64>,
    pub star_dim: usize,
}

impl StarBasis {
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=2).contains(&p) {
            return Err(Error::Unsupported(format!("polynomial degree {p} (supported: 1, 2)")));
        }
        let nm = (p + 1) * (p + 2) / 2;
        let mono = &MONOMIALS[..nm];
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, &(a1, b1)) in mono.iter().enumerate() {
                for (j, &(a2, b2)) in mono.iter().enumerate() {
                    s += u[i] * v[j] * ref_moment(a1 + a2, b1 + b2);
                }
            }
            s
        };
        // Gram–Schmidt with constants first; the constant is then dropped.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(nm);
        for k in 0..nm {
            let mut v = vec![0.0; nm];
            v[k] = 1.0;
            for _ in 0..2 {
                for q in &basis {
                    let c = inner(&v, q);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
            let n = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        let coeffs: Vec<Vec<f64>> = basis[1..].to_vec();
        let nodes = lagrange_nodes(p);
        let vand = DenseMatrix::from_fn(nm, nm, |i, j| {
            let (a, b) = mono[j];
            nodes[i][0].powi(a as i32) * nodes[i][1].powi(b as i32)
        });
        let mut node_mean = Vec::with_capacity(nm);
        let mut lag: Vec<Vec<f64>> = Vec::with_capacity(nm);
        for k in 0..nm {
            let mut e = vec![0.0; nm];
            e[k] = 1.0;
            let c = min_norm_solve(&vand, &e)?;
            let mut mean = 0.0;
            for (i, &(a, b)) in mono.iter().enumerate() {
                mean += c[i] * ref_moment(a, b);
            }
            node_mean.push(2.0 * mean);
            lag.push(c);
        }
        let node_star = coeffs
            .iter()
            .map(|b| lag.iter().map(|l| inner(l, b)).collect())
            .collect();
        Ok(Self {
            p,
            coeffs,
            node_mean,
            node_star,
        })
    }

    /// dim P^p(T).
    pub fn d_p(&self) -> usize {
        (self.p + 1) * (self.p + 2) / 2
    }

    /// Number of star functions, d_p − 1.
    pub fn star_dim(&self) -> usize {
        self.d_p() - 1
    }

    /// Star function j at reference coordinates.
    pub fn eval_ref(&self, j: usize, xi: f64, eta: f64) -> f64 {
        self.coeffs[j]
            .iter()
            .zip(&MONOMIALS)
            .map(|(c, &(a, b))| c * xi.powi(a as i32) * eta.powi(b as i32))
            .sum()
    }

    /// χ_{T,j}(x) = b̂_j(F⁻¹x)/√(2|T|), orthonormal in L²(T).
    pub fn eval(&self, j: usize, tri: [Point; 3], x: Point) -> f64 {
        let (xi, eta, area) = to_reference(tri, x);
        self.eval_ref(j, xi, eta) / (2.0 * area).sqrt()
    }

    /// Gram matrix of the star functions on T̂ (identity up to round-off).
    pub fn reference_gram(&self) -> DenseMatrix {
        let nm = self.d_p();
        let mono = &MONOMIALS[..nm];
        DenseMatrix::from_fn(self.star_dim(), self.star_dim(), |i, j| {
            let mut s = 0.0;
            for (a, &(a1, b1)) in mono.iter().enumerate() {
                for (b, &(a2, b2)) in mono.iter().enumerate() {
                    s += self.coeffs[i][a] * self.coeffs[j][b] * ref_moment(a1 + a2, b1 + b2);
                }
            }
            s
        })
    }

    /// Means of the star functions on T̂ (zero up to round-off).
    pub fn reference_means(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.iter().zip(&MONOMIALS).map(|(v, &(a, b))| v * ref_moment(a, b)).sum())
            .collect()
    }

    /// Splits elementwise Lagrange data (`d_p` values per element, nodes as
    /// in [`lagrange_nodes`]) into means and star coefficients.
    pub fn split(&self, level: usize, areas: &[f64], nodal: &[f64]) -> Result<StarSplit> {
        let dp = self.d_p();
        if nodal.len() != dp * areas.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodal values for {} elements of degree {}",
                nodal.len(),
                areas.len(),
                self.p
            )));
        }
        let sd = self.star_dim();
        let mut means = Vec::with_capacity(areas.len());
        let mut star = Vec::with_capacity(sd * areas.len());
        for (t, &area) in areas.iter().enumerate() {
            let v = &nodal[t * dp..(t + 1) * dp];
            means.push(v.iter().zip(&self.node_mean).map(|(a, b)| a * b).sum());
            let scale = (2.0 * area).sqrt();
            for j in 0..sd {
                star.push(scale * v.iter().zip(&self.node_star[j]).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        Ok(StarSplit {
            p0: P0Fn::new(level, means),
            star,
            star_dim: sd,
        })
    }

    /// Inverse of [`split`](Self::split): nodal values from mean and star coefficients.
    pub fn reconstruct(&self, split: &StarSplit, areas: &[f64]) -> Vec<f64> {
        let nodes = lagrange_nodes(self.p);
        let sd = self.star_dim();
        let mut out = Vec::with_capacity(nodes.len() * areas.len());
        for (t, &area) in areas.iter().enumerate() {
            let scale = 1.0 / (2.0 * area).sqrt();
            for n in &nodes {
                let mut v = split.p0.coeffs[t];
                for j in 0..sd {
                    v += split.star[t * sd + j] * scale * self.eval_ref(j, n[0], n[1]);
                }
                out.push(v);
            }
        }
        out
    }
}

/// Lagrange nodes in reference coordinates: the three vertices, then for
/// p = 2 the midpoints of edges 01, 12, 20.
pub fn lagrange_nodes(p: usize) -> Vec<[f64; 2]> {
    let mut n = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    if p == 2 {
        n.extend_from_slice(&[[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]);
    }
    n
}

/// Lagrange basis function k of degree p at reference coordinates.
pub fn lagrange_eval(p: usize, k: usize, xi: f64, eta: f64) -> f64 {
    let l = [1.0 - xi - eta, xi, eta];
    match (p, k) {
        (1, _) => l[k],
        (2, 0..=2) => l[k] * (2.0 * l[k] - 1.0),
        (2, _) => {
            let (a, b) = [(0, 1), (1, 2), (2, 0)][k - 3];
            4.0 * l[a] * l[b]
        }
        _ => panic!("lagrange_eval: degree {p}, node {k}"),
    }
}

/// Reference coordinates (ξ, η) of x in tri and the triangle's area.
pub fn to_reference(tri: [Point; 3], x: Point) -> (f64, f64, f64) {
    let [a, b, c] = tri;
    let (e1, e2) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let d = [x[0] - a[0], x[1] - a[1]];
    let xi = (d[0] * e2[1] - d[1] * e2[0]) / det;
    let eta = (e1[0] * d[1] - e1[1] * d[0]) / det;
    (xi, eta, 0.5 * det.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lagrange_is_nodal() {
        for p in [1, 2] {
            let nodes = lagrange_nodes(p);
            for (i, n) in nodes.iter().enumerate() {
                for k in 0..nodes.len() {
                    let v = lagrange_eval(p, k, n[0], n[1]);
                    assert!((v - if i == k { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn dimensions() {
        assert_eq!(StarBasis::new(1).unwrap().star_dim(), 2);
        assert_eq!(StarBasis::new(2).unwrap().star_dim(), 5);
        assert!(StarBasis::new(3).is_err());
        assert!(StarBasis::new(0).is_err());
    }

    #[test]
    fn orthonormal_and_mean_free() {
        for p in 1..=2 {
            let s = StarBasis::new(p).unwrap();
            let g = s.reference_gram();
            for i in 0..s.star_dim() {
                for j in 0..s.star_dim() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g.get(i, j) - e).abs() < 1e-12);
                }
            }
            assert!(s.reference_means().iter().all(|m| m.abs() < 1e-12));
        }
    }

    #[test]
    fn constants_have_no_star_part() {
        let s = StarBasis::new(2).unwrap();
        let sp = s.split(0, &[0.5, 0.25], &[3.0; 12]).unwrap();
        assert!(sp.star.iter().all(|c| c.abs() < 1e-13));
        assert!(sp.p0.coeffs.iter().all(|c| (c - 3.0).abs() < 1e-13));
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in 1..=2 {
            let s = StarBasis::new(p).unwrap();
            let areas = [0.5, 0.125, 0.03];
            let v: Vec<f64> = (0..s.d_p() * 3).map(|_| rng.random::<f64>() - 0.5).collect();
            let sp = s.split(0, &areas, &v).unwrap();
            let w = s.reconstruct(&sp, &areas);
            for (a, b) in v.iter().zip(&w) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn physical_orthonormality_by_quadrature() {
        let s = StarBasis::new(2).unwrap();
        let tri = [[0.2, 0.1], [1.3, 0.4], [0.5, 0.9]];
        for i in 0..5 {
            for j in 0..5 {
                let g = crate::spaces::quadrature::integrate(tri, |_, x| s.eval(i, tri, x) * s.eval(j, tri, x));
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-12);
            }
        }
    }
}
