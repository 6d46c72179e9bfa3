//! Consistency and shape checks for hierarchies.

use super::{dist, MeshHierarchy, Q_REF};
use crate::error::{Error, Result};
use std::collections::HashSet;

const REL_TOL: f64 = 1e-12;

/// Observed mesh constants.
#[derive(Clone, Debug)]
pub struct AuditReport {
    /// max h_T²/|T| per level.
    pub c_reg_per_level: Vec<f64>,
    pub c_reg: f64,
    /// Range of h_T / q_ref^gen(T) over all levels.
    pub h_over_qgen: (f64, f64),
    /// Smallest C with C⁻¹h_T ≤ q_ref^gen ≤ C h_T.
    pub c_ref: f64,
    /// Range of gen(T) − gen(father) over new elements.
    pub delta_gen: (u32, u32),
    /// Largest gen gap between the enclosing uniform ancestor and descendant.
    pub k_unif_observed: u32,
    /// Distinct rounded angle triples over all levels.
    pub similarity_classes: usize,
    pub total_elements: usize,
}

/// Checks area conservation, facet tables, conformity, father/child
/// partitions and the generation bounds; reports the observed constants.
pub fn audit_hierarchy(h: &MeshHierarchy) -> Result<AuditReport> {
    let m0 = h.mesh(0);
    let omega = m0.total_area();
    let boundary0: f64 = m0.boundary_facets.iter().map(|&f| m0.facet_length(f)).sum();
    let mut c_reg_per_level = Vec::with_capacity(h.num_levels());
    let mut hq = (f64::INFINITY, 0.0f64);
    let mut dg = (u32::MAX, 0u32);
    let mut k_unif = 0u32;
    let mut classes: HashSet<[i64; 3]> = HashSet::new();
    for (l, m) in h.meshes().iter().enumerate() {
        let a = m.total_area();
        if ((a - omega) / omega).abs() > REL_TOL {
            return Err(Error::Audit(format!("level {l}: area {a} differs from |Ω| = {omega}")));
        }
        let nb = m.boundary_facets.len();
        let ni = m.interior_facets.len();
        if 3 * m.num_elements() != 2 * ni + nb {
            return Err(Error::Audit(format!("level {l}: facet count identity violated")));
        }
        for &f in &m.interior_facets {
            let fc = &m.facets[f];
            if fc.minus == Some(fc.plus) {
                return Err(Error::Audit(format!("level {l}: facet {f} has identical neighbors")));
            }
        }
        let bl: f64 = m.boundary_facets.iter().map(|&f| m.facet_length(f)).sum();
        if ((bl - boundary0) / boundary0).abs() > REL_TOL {
            return Err(Error::Audit(format!(
                "level {l}: boundary length {bl} differs from {boundary0} (hanging node)"
            )));
        }
        let mut creg: f64 = 0.0;
        for (t, el) in m.elements.iter().enumerate() {
            let ht = m.diameter[t];
            creg = creg.max(ht * ht / m.area[t]);
            let r = ht / Q_REF.powi(el.generation as i32);
            hq.0 = hq.0.min(r);
            hq.1 = hq.1.max(r);
            let g = el.generation;
            k_unif = k_unif.max(2 * g.div_ceil(2) - 2 * (g / 2));
            if h.is_uniform() && g as usize != 2 * l {
                return Err(Error::Audit(format!(
                    "element {t} of uniform level {l} has generation {g}"
                )));
            }
            classes.insert(angle_key(m.element_points(t)));
        }
        c_reg_per_level.push(creg);
        if l == 0 {
            continue;
        }
        let prev = h.mesh(l - 1);
        for t in 0..prev.num_elements() {
            let ch = h.children(l - 1, t);
            let s: f64 = ch.iter().map(|&c| m.area[c]).sum();
            if ((s - prev.area[t]) / prev.area[t]).abs() > REL_TOL {
                return Err(Error::Audit(format!(
                    "element {t} of level {}: children do not partition it",
                    l - 1
                )));
            }
            let gf = prev.elements[t].generation;
            if h.is_refined(l - 1, t) {
                for &c in ch {
                    let d = m.elements[c].generation.checked_sub(gf).unwrap_or(0);
                    if d < 1 {
                        return Err(Error::Audit(format!(
                            "element {c} of level {l}: generation did not increase"
                        )));
                    }
                    dg.0 = dg.0.min(d);
                    dg.1 = dg.1.max(d);
                }
            } else if ch.len() != 1 || m.elements[ch[0]].lineage != prev.elements[t].lineage {
                return Err(Error::Audit(format!(
                    "element {t} of level {}: carried-over copy lost its identity",
                    l - 1
                )));
            }
        }
    }
    if dg.0 == u32::MAX {
        dg = (0, 0);
    }
    let c_reg = c_reg_per_level.iter().cloned().fold(0.0, f64::max);
    let c_ref = hq.1.max(1.0 / hq.0);
    Ok(AuditReport {
        c_reg_per_level,
        c_reg,
        h_over_qgen: hq,
        c_ref,
        delta_gen: dg,
        k_unif_observed: k_unif,
        similarity_classes: classes.len(),
        total_elements: h.total_elements(),
    })
}

/// Sorted interior angles rounded to 1e-6.
fn angle_key(p: [[f64; 2]; 3]) -> [i64; 3] {
    let mut k = [0i64; 3];
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let (ab, ac, bc) = (dist(a, b), dist(a, c), dist(b, c));
        let cos = ((ab * ab + ac * ac - bc * bc) / (2.0 * ab * ac)).clamp(-1.0, 1.0);
        k[i] = (cos.acos() * 1e6).round() as i64;
    }
    k.sort_unstable();
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn uniform_square_audit() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 3).unwrap();
        let r = audit_hierarchy(&h).unwrap();
        assert_eq!(r.delta_gen, (2, 2));
        assert_eq!(r.k_unif_observed, 0);
        let lo = r.c_reg_per_level.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(r.c_reg / lo < 1.01);
    }

    #[test]
    fn similarity_classes_bounded() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 8).unwrap();
        let r = audit_hierarchy(&h).unwrap();
        assert!(r.similarity_classes <= 16, "{}", r.similarity_classes);
    }

    #[test]
    fn adaptive_corner_audit() {
        let h = MeshHierarchy::corner_adaptive(builtin("square2").unwrap(), [0.0, 0.0], 0.3, 300, 30).unwrap();
        let r = audit_hierarchy(&h).unwrap();
        assert!(r.delta_gen.0 >= 1 && r.delta_gen.1 <= 2);
        assert!(r.c_ref < 4.0);
    }
}
