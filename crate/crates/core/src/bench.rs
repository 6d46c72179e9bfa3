//! Operation counts and wall times of the linear-cost paths.

use crate::error::Result;
use crate::mesh::MeshHierarchy;
use crate::mlnorm::multilevel_norm_counted;
use crate::operators::OpCounter;
use crate::precond::{build_precond, WeightMode};
use crate::sampling::{normal_vector, random_phi};
use crate::Variant;
use std::time::Instant;

/// Budget factor for both counted paths: ops ≤ 40·Σ_ℓ#T_ℓ.
pub const OPS_PER_ELEMENT: u64 = 40;

#[derive(Clone, Debug)]
pub struct CostSample {
    pub finest_level: usize,
    pub n: usize,
    pub total_elements: usize,
    pub apply_ops: u64,
    pub norm_ops: u64,
    /// Seconds per preconditioner apply (best of repeated batches).
    pub apply_seconds: f64,
    /// Seconds per multilevel-norm evaluation.
    pub norm_seconds: f64,
}

impl CostSample {
    pub fn ops_bound(&self) -> u64 {
        OPS_PER_ELEMENT * self.total_elements as u64
    }

    pub fn within_budget(&self) -> bool {
        self.apply_ops <= self.ops_bound() && self.norm_ops <= self.ops_bound()
    }
}

/// Best per-call time of `f` over three batches of `reps` calls.
fn best_time(reps: usize, mut f: impl FnMut()) -> f64 {
    (0..3)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..reps {
                f();
            }
            t.elapsed().as_secs_f64() / reps as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Counts and times one preconditioner apply and one multilevel norm.
pub fn measure_costs(h: &MeshHierarchy, s: f64, variant: Variant, seed: u64) -> Result<CostSample> {
    let lf = h.finest_level();
    let n = h.finest().num_elements();
    let phi = random_phi(h, lf, seed, true);
    let r = normal_vector(n, seed ^ 0x9e37);
    let p = build_precond(h, s, variant, WeightMode::Surrogate, false)?;
    let ops = OpCounter::new();
    p.apply_counted(&r, Some(&ops))?;
    let apply_ops = ops.get();
    ops.reset();
    multilevel_norm_counted(h, &phi, s, variant, Some(&ops))?;
    let norm_ops = ops.get();
    // Roughly 2·10⁵ element visits per batch keeps timer noise small.
    let reps = (200_000 / h.total_elements()).max(1);
    let apply_seconds = best_time(reps, || {
        std::hint::black_box(p.apply_precond(std::hint::black_box(&r)).unwrap());
    });
    let norm_seconds = best_time(reps, || {
        std::hint::black_box(multilevel_norm_counted(h, std::hint::black_box(&phi), s, variant, None).unwrap());
    });
    Ok(CostSample {
        finest_level: lf,
        n,
        total_elements: h.total_elements(),
        apply_ops,
        norm_ops,
        apply_seconds,
        norm_seconds,
    })
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
