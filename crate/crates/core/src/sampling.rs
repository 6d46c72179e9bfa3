//! Seeded random test functions.

use crate::mesh::MeshHierarchy;
use crate::spaces::{mass_norm_sq, P0Fn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent standard normal entries.
pub fn normal_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Standard normal coefficients on level ℓ, optionally scaled to unit L² norm.
pub fn random_phi(h: &MeshHierarchy, level: usize, seed: u64, normalize: bool) -> P0Fn {
    let m = h.mesh(level);
    let mut c = normal_vector(m.num_elements(), seed);
    if normalize {
        let n = mass_norm_sq(m, &c).sqrt();
        if n > 0.0 {
            c.iter_mut().for_each(|v| *v /= n);
        }
    }
    P0Fn::new(level, c)
}
