//! Multilevel norms Σ_ℓ ‖h_ℓ^s (P′_ℓ − P′_{ℓ−1})φ‖² (P′_{−1} = 0) with the
//! elementwise mesh size h_ℓ, the Oswald baseline on uniform hierarchies,
//! and the extension to elementwise polynomials of degree p.

use crate::error::{Error, Result};
use crate::mesh::MeshHierarchy;
use crate::operators::{ml_difference_full, ml_difference_with, Moments, OpCounter};
use crate::spaces::{p1_local_inner, P0Fn, StarBasis};
use crate::Variant;
use std::time::Instant;

/// Per-level contributions of one evaluation.
#[derive(Clone, Debug)]
pub struct MLNormReport {
    pub s: f64,
    pub variant: Variant,
    pub finest_level: usize,
    pub contributions: Vec<f64>,
    pub active_elements: Vec<usize>,
    pub total: f64,
    pub seconds: f64,
}

/// CSV header matching [`MLNormReport::csv_rows`].
pub const CSV_HEADER: &str = "L,s,variant,level,contribution,active_elems,total";

impl MLNormReport {
    pub fn csv_rows(&self) -> Vec<String> {
        self.contributions
            .iter()
            .zip(&self.active_elements)
            .enumerate()
            .map(|(l, (c, a))| {
                format!(
                    "{},{},{},{l},{c:e},{a},{:e}",
                    self.finest_level, self.s, self.variant, self.total
                )
            })
            .collect()
    }
}

pub(crate) fn check_s_open(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("s = {s} outside (0, 1)")));
    }
    Ok(())
}

/// Multilevel norm of φ (prolonged to the finest level when coarser).
pub fn multilevel_norm(h: &MeshHierarchy, phi: &P0Fn, s: f64, variant: Variant) -> Result<MLNormReport> {
    multilevel_norm_counted(h, phi, s, variant, None)
}

/// As [`multilevel_norm`], charging local kernels to `ops`.
pub fn multilevel_norm_counted(
    h: &MeshHierarchy,
    phi: &P0Fn,
    s: f64,
    variant: Variant,
    ops: Option<&OpCounter>,
) -> Result<MLNormReport> {
    check_s_open(s)?;
    let start = Instant::now();
    let mom = Moments::new(h, phi, ops)?;
    let mut contributions = Vec::with_capacity(h.num_levels());
    let mut active = Vec::with_capacity(h.num_levels());
    for l in 0..h.num_levels() {
        let d = ml_difference_with(h, l, &mom, variant, ops);
        let m = h.mesh(l);
        let c: f64 = d
            .mask
            .iter()
            .map(|&t| {
                let v = &d.values.values[t];
                m.diameter[t].powf(2.0 * s) * p1_local_inner(m.area[t], v, v)
            })
            .sum();
        OpCounter::add(ops, d.mask.len());
        contributions.push(c);
        active.push(d.mask.len());
    }
    Ok(MLNormReport {
        s,
        variant,
        finest_level: h.finest_level(),
        total: contributions.iter().sum(),
        contributions,
        active_elements: active,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Reference evaluation with unlocalized differences on every element.
pub fn multilevel_norm_full(h: &MeshHierarchy, phi: &P0Fn, s: f64, variant: Variant) -> Result<f64> {
    check_s_open(s)?;
    let mom = Moments::new(h, phi, None)?;
    let mut total = 0.0;
    for l in 0..h.num_levels() {
        let d = ml_difference_full(h, l, &mom, variant);
        let m = h.mesh(l);
        total += d
            .values
            .iter()
            .enumerate()
            .map(|(t, v)| m.diameter[t].powf(2.0 * s) * p1_local_inner(m.area[t], v, v))
            .sum::<f64>();
    }
    Ok(total)
}

/// Oswald baseline Σ_ℓ h_ℓ^{2s}‖(Π⁰_ℓ − Π⁰_{ℓ−1})φ‖² with the scalar
/// h_ℓ = max_T diam T; Π⁰_{−1} = 0.
#[derive(Clone, Debug)]
pub struct OswaldReport {
    pub s: f64,
    pub contributions: Vec<f64>,
    pub total: f64,
}

pub fn oswald_norm(h: &MeshHierarchy, phi: &P0Fn, s: f64) -> Result<OswaldReport> {
    check_s_open(s)?;
    if !h.is_uniform() {
        return Err(Error::Unsupported(
            "the Oswald baseline is defined for uniform hierarchies only".into(),
        ));
    }
    let lf = h.finest_level();
    let fine = crate::spaces::prolong(h, phi, lf)?;
    // Π⁰_ℓφ for all levels via integrals.
    let mut integ: Vec<f64> = fine.coeffs.iter().zip(&h.finest().area).map(|(c, a)| c * a).collect();
    let mut means: Vec<Vec<f64>> = vec![Vec::new(); lf + 1];
    for l in (0..=lf).rev() {
        means[l] = integ.iter().zip(&h.mesh(l).area).map(|(s, a)| s / a).collect();
        if l > 0 {
            integ = crate::spaces::restrict_dual(h, l, &integ);
        }
    }
    let mut contributions = Vec::with_capacity(lf + 1);
    for l in 0..=lf {
        let m = h.mesh(l);
        let hl = m.diameter.iter().cloned().fold(0.0, f64::max);
        let sq: f64 = (0..m.num_elements())
            .map(|t| {
                let coarse = if l == 0 { 0.0 } else { means[l - 1][h.parent(l, t)] };
                let d = means[l][t] - coarse;
                d * d * m.area[t]
            })
            .sum();
        contributions.push(hl.powf(2.0 * s) * sq);
    }
    Ok(OswaldReport {
        s,
        total: contributions.iter().sum(),
        contributions,
    })
}

/// Multilevel norm of an elementwise degree-p function on the finest level,
/// given by Lagrange values (`d_p` per element): the P⁰ part through
/// [`multilevel_norm`] plus Σ_T h_T^{2s} Σ_j |φ_{T,j}|² for the star part.
pub fn higher_order_norm(h: &MeshHierarchy, nodal: &[f64], p: usize, s: f64, variant: Variant) -> Result<f64> {
    check_s_open(s)?;
    let basis = StarBasis::new(p)?;
    let m = h.finest();
    let split = basis.split(h.finest_level(), &m.area, nodal)?;
    let base = multilevel_norm(h, &split.p0, s, variant)?.total;
    let sd = split.star_dim;
    let star: f64 = (0..m.num_elements())
        .map(|t| {
            let c = &split.star[t * sd..(t + 1) * sd];
            m.diameter[t].powf(2.0 * s) * c.iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    Ok(base + star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;
    use crate::sampling::random_phi;

    fn adaptive() -> MeshHierarchy {
        MeshHierarchy::corner_adaptive(builtin("lshape6").unwrap(), [0.0, 0.0], 0.5, 300, 14).unwrap()
    }

    #[test]
    fn tilde_constant_collapses() {
        let h = adaptive();
        let one = P0Fn::constant(&h, h.finest_level(), 1.0);
        let s = 0.4;
        let r = multilevel_norm(&h, &one, s, Variant::Tilde).unwrap();
        let m0 = h.mesh(0);
        let expect: f64 = (0..m0.num_elements()).map(|t| m0.diameter[t].powf(2.0 * s) * m0.area[t]).sum();
        assert!((r.total - expect).abs() < 1e-12 * expect);
        assert!(r.contributions[1..].iter().all(|&c| c < 1e-24));
    }

    #[test]
    fn single_level_and_homogeneity() {
        let h = MeshHierarchy::new(builtin("square4").unwrap());
        let phi = random_phi(&h, 0, 1, false);
        let r = multilevel_norm(&h, &phi, 0.5, Variant::Plain).unwrap();
        assert_eq!(r.contributions.len(), 1);
        let h = adaptive();
        let phi = random_phi(&h, h.finest_level(), 2, false);
        let a = multilevel_norm(&h, &phi, 0.5, Variant::Plain).unwrap().total;
        let scaled = P0Fn::new(phi.level, phi.coeffs.iter().map(|c| -3.0 * c).collect());
        let b = multilevel_norm(&h, &scaled, 0.5, Variant::Plain).unwrap().total;
        assert!((b - 9.0 * a).abs() < 1e-12 * b);
        let zero = P0Fn::zeros(&h, phi.level);
        assert_eq!(multilevel_norm(&h, &zero, 0.5, Variant::Tilde).unwrap().total, 0.0);
        assert!(multilevel_norm(&h, &phi, 1.0, Variant::Plain).is_err());
    }

    #[test]
    fn localized_equals_full() {
        let h = adaptive();
        for seed in 0..3 {
            let phi = random_phi(&h, h.finest_level(), seed, true);
            for variant in [Variant::Plain, Variant::Tilde] {
                let a = multilevel_norm(&h, &phi, 0.3, variant).unwrap().total;
                let b = multilevel_norm_full(&h, &phi, 0.3, variant).unwrap();
                assert!(((a - b) / b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn op_count_linear() {
        let h = adaptive();
        let phi = random_phi(&h, h.finest_level(), 5, false);
        let ops = OpCounter::new();
        multilevel_norm_counted(&h, &phi, 0.5, Variant::Plain, Some(&ops)).unwrap();
        let sum: usize = h.meshes().iter().map(|m| m.num_elements()).sum();
        assert!(ops.get() <= 40 * sum as u64, "{} vs {}", ops.get(), sum);
    }

    #[test]
    fn csv_rows_follow_schema() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 1).unwrap();
        let phi = random_phi(&h, 1, 1, false);
        let r = multilevel_norm(&h, &phi, 0.5, Variant::Plain).unwrap();
        let rows = r.csv_rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].split(',').count(), CSV_HEADER.split(',').count());
        assert!(rows[1].starts_with("1,0.5,plain,1,"));
    }

    #[test]
    fn oswald_collapses_on_coarse_functions() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 3).unwrap();
        let s = 0.5;
        let one = P0Fn::constant(&h, 3, 1.0);
        let r = oswald_norm(&h, &one, s).unwrap();
        let h0 = h.mesh(0).diameter.iter().cloned().fold(0.0, f64::max);
        assert!((r.total - h0.powf(2.0 * s)).abs() < 1e-14);
        let c = random_phi(&h, 0, 3, false);
        let r = oswald_norm(&h, &c, s).unwrap();
        assert!((r.total - r.contributions[0]).abs() < 1e-14 * r.total);
        assert!(r.contributions[1..].iter().all(|&v| v < 1e-28));
        assert!(oswald_norm(&adaptive(), &one, s).is_err());
    }

    #[test]
    fn higher_order_parts() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 2).unwrap();
        let phi = random_phi(&h, 2, 4, false);
        for p in [1, 2] {
            let dp = (p + 1) * (p + 2) / 2;
            let nodal: Vec<f64> = phi.coeffs.iter().flat_map(|&c| vec![c; dp]).collect();
            let a = higher_order_norm(&h, &nodal, p, 0.5, Variant::Plain).unwrap();
            let b = multilevel_norm(&h, &phi, 0.5, Variant::Plain).unwrap().total;
            assert!((a - b).abs() < 1e-12 * b);
        }
        // Zero mean on every element: the star sum alone.
        let m = h.finest();
        let nodal: Vec<f64> = (0..m.num_elements()).flat_map(|t| [t as f64, -(t as f64), 0.0]).collect();
        let a = higher_order_norm(&h, &nodal, 1, 0.5, Variant::Plain).unwrap();
        let split = StarBasis::new(1).unwrap().split(2, &m.area, &nodal).unwrap();
        let star: f64 = (0..m.num_elements())
            .map(|t| m.diameter[t] * (split.star[2 * t].powi(2) + split.star[2 * t + 1].powi(2)))
            .sum();
        assert!((a - star).abs() < 1e-12 * star);
        assert!(higher_order_norm(&h, &nodal, 3, 0.5, Variant::Plain).is_err());
    }
}
