//! Constructive stable splitting φ = Σ_{ℓ,E} α_{ℓ,E}ψ_{ℓ,E} (+ c·1 in the
//! tilde variant).
//!
//! The increments φ_ℓ = (Q_ℓ − Q_{ℓ−1})φ are split into
//! φ_{ℓ,1} = (Π⁰_ℓ − Π⁰_{ℓ−1})P′_ℓφ, lifted on each refined coarse element
//! with its boundary clamped, and φ_{ℓ,2} = Π⁰_{ℓ−1}(P′_ℓ − P′_{ℓ−1})φ,
//! split by the level ℓ−1 hats into patch pieces Π⁰_{ℓ−1}(η_z g) and lifted
//! on Ω_{ℓ−1}(z). Lifts are minimal-norm RT⁰ fields whose facet
//! coefficients are the atom coefficients. A level ℓ−1 facet outside Ẽ_{ℓ−1}
//! is moved to the latest level k where it lies in Ẽ_k; its atom there is
//! the same function.

use crate::error::{Error, Result};
use crate::fem_oracles::{mixed_lift, NormOracle};
use crate::mesh::MeshHierarchy;
use crate::mlnorm::{check_s_open, multilevel_norm};
use crate::operators::{ml_difference_with, q_with, Moments};
use crate::sampling::random_phi;
use crate::spaces::{p1_local_inner, prolong, tilde_facet_sets, HaarAtom, P0Fn, TildeFacetSets};
use crate::Variant;
use std::collections::{BTreeMap, BTreeSet};

/// Largest number of source levels merged into one (level, facet) atom.
pub const MAX_MULTIPLICITY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitAtom {
    pub level: usize,
    pub facet: usize,
    pub coeff: f64,
}

/// Norms used in the stability ratio.
#[derive(Clone, Copy, Debug)]
pub enum SplitNorms<'a> {
    /// Atoms by h_E^{2s}‖·‖², the constant by diam(Ω)^{2s}|Ω|, φ by the
    /// multilevel norm.
    Surrogate,
    /// Everything by the dense oracle on the finest level.
    Oracle(&'a NormOracle),
}

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub s: f64,
    pub variant: Variant,
    /// Ascending by (level, facet).
    pub atoms: Vec<SplitAtom>,
    /// Coefficient of the constant (tilde only).
    pub constant: Option<f64>,
    /// max |Σ α ψ + c − φ| on the finest level.
    pub reconstruction_residual: f64,
    /// Σ‖α ψ‖²_{-s} / ‖φ‖²_{-s}.
    pub stability_ratio: f64,
    /// Per-level share Σ_E‖α_{ℓ,E}ψ_{ℓ,E}‖²_{-s} of the numerator.
    pub level_energy: Vec<f64>,
    pub max_multiplicity: usize,
    /// Largest |⟨φ_{ℓ,1}, 1⟩_T| over refined coarse elements.
    pub max_element_mean: f64,
}

/// Facet-coefficient accumulator keyed by (level, facet).
struct Harvest {
    coeffs: BTreeMap<(usize, usize), f64>,
    sources: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

impl Harvest {
    fn add(&mut self, sets: &TildeFacetSets, h: &MeshHierarchy, source: usize, level: usize, facet: usize, c: f64) {
        let (mut k, mut f) = (level, facet);
        while !sets.contains(k, f) {
            // Not in Ẽ_k, so it survives unchanged from level k−1.
            f = h.facet_prev(k, f).expect("facet outside Ẽ_k has a predecessor");
            k -= 1;
        }
        *self.coeffs.entry((k, f)).or_insert(0.0) += c;
        self.sources.entry((k, f)).or_default().insert(source);
    }
}

pub fn constructive_split(h: &MeshHierarchy, phi: &P0Fn, s: f64, variant: Variant) -> Result<SplitResult> {
    constructive_split_with(h, phi, s, variant, SplitNorms::Surrogate)
}

pub fn constructive_split_with(
    h: &MeshHierarchy,
    phi: &P0Fn,
    s: f64,
    variant: Variant,
    norms: SplitNorms<'_>,
) -> Result<SplitResult> {
    check_s_open(s)?;
    phi.check(h)?;
    let lf = h.finest_level();
    if phi.level != lf {
        return Err(Error::InvalidArgument(format!(
            "the splitting takes a function on the finest level {lf}, got level {}",
            phi.level
        )));
    }
    let tilde = variant == Variant::Tilde;
    let sets = tilde_facet_sets(h);
    let mom = Moments::new(h, phi, None)?;
    let q: Vec<P0Fn> = (0..=lf).map(|l| q_with(h, l, &mom, variant)).collect();
    let mut harvest = Harvest {
        coeffs: BTreeMap::new(),
        sources: BTreeMap::new(),
    };
    let scale = phi.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    // Level 0: one global lift.
    let m0 = h.mesh(0);
    let all0: Vec<usize> = (0..m0.num_elements()).collect();
    let mut rhs0 = q[0].coeffs.clone();
    let mut constant = None;
    let mut clamped0 = Vec::new();
    if tilde {
        let c = rhs0.iter().zip(&m0.area).map(|(v, a)| v * a).sum::<f64>() / m0.total_area();
        rhs0.iter_mut().for_each(|v| *v -= c);
        constant = Some(c);
        clamped0 = m0.boundary_facets.clone();
    }
    if rhs0.iter().any(|r| r.abs() > 1e-14 * scale) {
        let lift = mixed_lift(h, 0, &all0, &rhs0, &clamped0).map_err(|e| context(e, 0, "coarse mesh"))?;
        for (&f, &c) in lift.facets.iter().zip(&lift.coeffs) {
            harvest.add(&sets, h, 0, 0, f, c);
        }
    }

    let mut max_element_mean: f64 = 0.0;
    for l in 1..=lf {
        let fine = h.mesh(l);
        let coarse = h.mesh(l - 1);
        // φ_{ℓ,1} on refined coarse elements.
        for tc in 0..coarse.num_elements() {
            if !h.is_refined(l - 1, tc) {
                continue;
            }
            let kids = h.children(l - 1, tc);
            let mean = kids.iter().map(|&t| q[l].coeffs[t] * fine.area[t]).sum::<f64>() / coarse.area[tc];
            let rhs: Vec<f64> = kids.iter().map(|&t| q[l].coeffs[t] - mean).collect();
            let integral: f64 = kids.iter().zip(&rhs).map(|(&t, r)| r * fine.area[t]).sum();
            max_element_mean = max_element_mean.max(integral.abs());
            if rhs.iter().all(|r| r.abs() <= 1e-14 * scale) {
                continue;
            }
            let clamp: Vec<usize> = kids.iter().flat_map(|&t| fine.element_facets[t]).collect();
            let lift = mixed_lift(h, l, kids, &rhs, &clamp)
                .map_err(|e| context(e, l, &format!("refined element {tc}")))?;
            for (&f, &c) in lift.facets.iter().zip(&lift.coeffs) {
                harvest.add(&sets, h, l, l, f, c);
            }
        }
        // φ_{ℓ,2} through the level ℓ−1 partition of unity.
        let g = ml_difference_with(h, l, &mom, variant, None);
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        for &t in &g.mask {
            touched.extend(coarse.elements[h.parent(l, t)].vertices);
        }
        for z in touched {
            let patch = coarse.vertex_elements.get(z).to_vec();
            let mut rhs = Vec::with_capacity(patch.len());
            for &tc in &patch {
                let kz = coarse.local_index(tc, z).expect("patch element contains its vertex");
                let mut acc = 0.0;
                for &t in h.children(l - 1, tc) {
                    let b = h.child_bary(l, t);
                    let eta = [b[0][kz], b[1][kz], b[2][kz]];
                    acc += p1_local_inner(fine.area[t], &eta, &g.values.values[t]);
                }
                rhs.push(acc / coarse.area[tc]);
            }
            if rhs.iter().all(|r| r.abs() <= 1e-14 * scale) {
                continue;
            }
            let clamp: Vec<usize> = patch
                .iter()
                .flat_map(|&t| coarse.element_facets[t])
                .filter(|&f| tilde || !coarse.facets[f].is_boundary())
                .collect();
            let lift = mixed_lift(h, l - 1, &patch, &rhs, &clamp)
                .map_err(|e| context(e, l, &format!("patch of vertex {z} on level {}", l - 1)))?;
            for (&f, &c) in lift.facets.iter().zip(&lift.coeffs) {
                harvest.add(&sets, h, l, l - 1, f, c);
            }
        }
    }

    let max_multiplicity = harvest.sources.values().map(BTreeSet::len).max().unwrap_or(0);
    if max_multiplicity > MAX_MULTIPLICITY {
        return Err(Error::Audit(format!(
            "a facet collects coefficients from {max_multiplicity} levels (bound {MAX_MULTIPLICITY})"
        )));
    }
    let atoms: Vec<SplitAtom> = harvest
        .coeffs
        .iter()
        .map(|(&(level, facet), &coeff)| SplitAtom { level, facet, coeff })
        .collect();
    if tilde && atoms.iter().any(|a| h.mesh(a.level).facets[a.facet].is_boundary()) {
        return Err(Error::Audit("boundary facet harvested in the tilde variant".into()));
    }

    let recon = reconstruct(h, &atoms, constant)?;
    let reconstruction_residual = recon
        .iter()
        .zip(&phi.coeffs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let mut level_energy = vec![0.0; lf + 1];
    for a in &atoms {
        level_energy[a.level] += atom_energy(h, a, s, norms)?;
    }
    let mut numer: f64 = level_energy.iter().sum();
    let m0 = h.mesh(0);
    if let Some(c) = constant {
        numer += match norms {
            SplitNorms::Surrogate => c * c * m0.domain_diameter().powf(2.0 * s) * m0.total_area(),
            SplitNorms::Oracle(o) => o.interp_norm_sq(&vec![c; h.finest().num_elements()], s)?,
        };
    }
    let denom = match norms {
        SplitNorms::Surrogate => multilevel_norm(h, phi, s, variant)?.total,
        SplitNorms::Oracle(o) => o.interp_norm_sq(&phi.coeffs, s)?,
    };
    let stability_ratio = if denom > 0.0 { numer / denom } else { 0.0 };
    Ok(SplitResult {
        s,
        variant,
        atoms,
        constant,
        reconstruction_residual,
        stability_ratio,
        level_energy,
        max_multiplicity,
        max_element_mean,
    })
}

fn context(e: Error, level: usize, what: &str) -> Error {
    match e {
        Error::Incompatible(m) => Error::Incompatible(format!("level {level}, {what}: {m}")),
        other => other,
    }
}

fn atom_energy(h: &MeshHierarchy, a: &SplitAtom, s: f64, norms: SplitNorms<'_>) -> Result<f64> {
    let m = h.mesh(a.level);
    let psi = HaarAtom::from_mesh(m, a.level, a.facet)?;
    Ok(match norms {
        SplitNorms::Surrogate => a.coeff * a.coeff * psi.h_e().powf(2.0 * s) * psi.l2_norm_sq(),
        SplitNorms::Oracle(o) => {
            let mut p = psi.to_p0(m.num_elements());
            p.coeffs.iter_mut().for_each(|v| *v *= a.coeff);
            o.interp_norm_sq(&prolong(h, &p, h.finest_level())?.coeffs, s)?
        }
    })
}

/// Σ α ψ_{ℓ,E} + c on the finest level.
pub fn reconstruct(h: &MeshHierarchy, atoms: &[SplitAtom], constant: Option<f64>) -> Result<Vec<f64>> {
    let mut u = vec![constant.unwrap_or(0.0); h.mesh(0).num_elements()];
    for l in 0..=h.finest_level() {
        if l > 0 {
            u = h.parents(l).iter().map(|&p| u[p]).collect();
        }
        for a in atoms.iter().filter(|a| a.level == l) {
            let psi = HaarAtom::from_mesh(h.mesh(l), l, a.facet)?;
            for (t, w) in psi.entries() {
                u[t] += a.coeff * w;
            }
        }
    }
    Ok(u)
}

/// One CSV row of [`split_stability_report`].
#[derive(Clone, Debug)]
pub struct StabilityRow {
    pub sample: usize,
    pub s: f64,
    pub variant: Variant,
    pub finest_level: usize,
    pub ratio: f64,
    pub reconstruction_residual: f64,
    pub atoms_total: usize,
    pub level_energy: Vec<f64>,
}

pub const STABILITY_CSV_HEADER: &str = "sample,s,variant,L,ratio,reconstruction_residual,atoms_total";

impl StabilityRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{:e},{}",
            self.sample,
            self.s,
            self.variant,
            self.finest_level,
            self.ratio,
            self.reconstruction_residual,
            self.atoms_total
        )
    }
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// Mean over samples of each level's share of the atom energy.
    pub level_share: Vec<f64>,
}

/// Splits `samples` seeded random functions (unit L² norm) of the finest level.
pub fn split_stability_report(
    h: &MeshHierarchy,
    s: f64,
    variant: Variant,
    samples: usize,
    seed: u64,
    norms: SplitNorms<'_>,
) -> Result<StabilityReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let lf = h.finest_level();
    let mut rows = Vec::with_capacity(samples);
    let mut level_share = vec![0.0; lf + 1];
    for i in 0..samples {
        let phi = random_phi(h, lf, seed.wrapping_add(i as u64), true);
        let r = constructive_split_with(h, &phi, s, variant, norms)?;
        let tot: f64 = r.level_energy.iter().sum();
        if tot > 0.0 {
            for (a, e) in level_share.iter_mut().zip(&r.level_energy) {
                *a += e / tot / samples as f64;
            }
        }
        rows.push(StabilityRow {
            sample: i,
            s,
            variant,
            finest_level: lf,
            ratio: r.stability_ratio,
            reconstruction_residual: r.reconstruction_residual,
            atoms_total: r.atoms.len() + usize::from(r.constant.is_some()),
            level_energy: r.level_energy,
        });
    }
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = if samples % 2 == 1 {
        ratios[samples / 2]
    } else {
        0.5 * (ratios[samples / 2 - 1] + ratios[samples / 2])
    };
    Ok(StabilityReport {
        max_ratio: *ratios.last().unwrap(),
        median_ratio,
        rows,
        level_share,
    })
}
