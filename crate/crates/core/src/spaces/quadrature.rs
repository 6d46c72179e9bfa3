//! Symmetric 7-point triangle quadrature, exact for polynomials of degree 5.

use crate::mesh::Point;

/// Barycentric points and weights (weights sum to 1).
pub fn rule() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let b1 = (9.0 + 2.0 * s) / 21.0;
    let a2 = (6.0 + s) / 21.0;
    let b2 = (9.0 - 2.0 * s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let w2 = (155.0 + s) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

/// ∫_T f, where f receives barycentric coordinates and the physical point.
pub fn integrate(tri: [Point; 3], f: impl Fn([f64; 3], Point) -> f64) -> f64 {
    let area = crate::mesh::signed_area(tri[0], tri[1], tri[2]).abs();
    let mut s = 0.0;
    for (b, w) in rule() {
        let x = [
            b[0] * tri[0][0] + b[1] * tri[1][0] + b[2] * tri[2][0],
            b[0] * tri[0][1] + b[1] * tri[1][1] + b[2] * tri[2][1],
        ];
        s += w * f(b, x);
    }
    s * area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn exact_for_degree_five_monomials() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let q = integrate(tri, |_, x| x[0].powi(a as i32) * x[1].powi(b as i32));
                assert!((q - exact).abs() < 1e-15, "{a} {b}");
            }
        }
    }

    #[test]
    fn bubble_integral() {
        let tri = [[0.3, 0.1], [2.0, 0.4], [0.7, 1.9]];
        let area = crate::mesh::signed_area(tri[0], tri[1], tri[2]);
        let q = integrate(tri, |b, _| b[0] * b[1] * b[2]);
        assert!((q - area / 60.0).abs() < 1e-15);
    }
}
