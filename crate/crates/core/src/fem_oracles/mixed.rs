//! Minimal-norm RT⁰ lifts: σ with div σ = r on a set of elements, zero
//! normal trace on clamped facets, and smallest L² norm.
//!
//! The RT⁰ field of facet E, oriented from T⁺ to T⁻, is
//! ±|E|/(2|T|)(x − p_E) on T^±, where p_E is the vertex opposite E. Its
//! divergence is the Haar atom of E, so the lift coefficients are the
//! facet coefficients of r in the atom basis.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::mesh::{Mesh, MeshHierarchy};
use std::collections::{HashMap, HashSet};

/// Result of [`mixed_lift`].
#[derive(Clone, Debug)]
pub struct MixedLiftResult {
    pub level: usize,
    /// Submesh elements in input order.
    pub elements: Vec<usize>,
    /// Free RT⁰ facets (level facet ids), ascending.
    pub facets: Vec<usize>,
    /// Coefficient of each free facet's field, w.r.t. the plus→minus orientation.
    pub coeffs: Vec<f64>,
    /// div σ per submesh element.
    pub divergence: Vec<f64>,
    pub sigma_norm: f64,
    /// Whether the zero-mean constraint was active (all boundary facets clamped).
    pub fully_clamped: bool,
}

impl MixedLiftResult {
    /// max |div σ − r| / max |r| (absolute when r = 0).
    pub fn divergence_residual(&self, rhs: &[f64]) -> f64 {
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = self
            .divergence
            .iter()
            .zip(rhs)
            .fold(0.0f64, |m, (d, r)| m.max((d - r).abs()));
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }
}

/// Lift on level ℓ of a hierarchy.
pub fn mixed_lift(
    h: &MeshHierarchy,
    level: usize,
    submesh: &[usize],
    rhs: &[f64],
    clamped: &[usize],
) -> Result<MixedLiftResult> {
    h.check_level(level)?;
    mixed_lift_on(h.mesh(level), level, submesh, rhs, clamped)
}

/// Local RT⁰ mass entry ∫_T (x − p_i)·(x − p_j) from vertex values.
fn local_mass(p: [[f64; 2]; 3], area: f64, i: usize, j: usize) -> f64 {
    let d = |k: usize, a: usize| [p[k][0] - p[a][0], p[k][1] - p[a][1]];
    let mut s = 0.0;
    let mut si = [0.0; 2];
    let mut sj = [0.0; 2];
    for k in 0..3 {
        let (u, v) = (d(k, i), d(k, j));
        s += u[0] * v[0] + u[1] * v[1];
        si[0] += u[0];
        si[1] += u[1];
        sj[0] += v[0];
        sj[1] += v[1];
    }
    area / 12.0 * (s + si[0] * sj[0] + si[1] * sj[1])
}

/// Lift on an explicit mesh.
pub fn mixed_lift_on(
    mesh: &Mesh,
    level: usize,
    submesh: &[usize],
    rhs: &[f64],
    clamped: &[usize],
) -> Result<MixedLiftResult> {
    let nt = submesh.len();
    if rhs.len() != nt {
        return Err(Error::DimensionMismatch(format!("{} rhs values for {nt} elements", rhs.len())));
    }
    if nt == 0 {
        return Err(Error::InvalidArgument("empty submesh".into()));
    }
    let mut local: HashMap<usize, usize> = HashMap::with_capacity(nt);
    for (i, &t) in submesh.iter().enumerate() {
        if t >= mesh.num_elements() {
            return Err(Error::InvalidArgument(format!("element {t} not on level {level}")));
        }
        if local.insert(t, i).is_some() {
            return Err(Error::InvalidArgument(format!("element {t} listed twice")));
        }
    }
    let clamp: HashSet<usize> = clamped.iter().copied().collect();
    // Facets touched by the submesh and whether both neighbors are inside.
    let mut touched: Vec<usize> = submesh.iter().flat_map(|&t| mesh.element_facets[t]).collect();
    touched.sort_unstable();
    touched.dedup();
    let mut parent: Vec<usize> = (0..nt).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut free = Vec::new();
    let mut any_open = false;
    for &f in &touched {
        let fc = &mesh.facets[f];
        let a = local.get(&fc.plus).copied();
        let b = fc.minus.and_then(|m| local.get(&m).copied());
        match (a, b) {
            (Some(x), Some(y)) => {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
                free.push(f);
            }
            _ => {
                if !clamp.contains(&f) {
                    any_open = true;
                    free.push(f);
                }
            }
        }
    }
    let root = find(&mut parent, 0);
    if (1..nt).any(|i| find(&mut parent, i) != root) {
        return Err(Error::InvalidArgument(format!("submesh on level {level} is not edge-connected")));
    }
    let areas: Vec<f64> = submesh.iter().map(|&t| mesh.area[t]).collect();
    let fully_clamped = !any_open;
    if fully_clamped {
        let mean: f64 = areas.iter().zip(rhs).map(|(a, r)| a * r).sum();
        let scale: f64 = areas.iter().zip(rhs).map(|(a, r)| a * r.abs()).sum();
        if mean.abs() > 1e-10 * scale + 1e-300 {
            return Err(Error::Incompatible(format!(
                "rhs has integral {mean:e} on a fully clamped submesh of level {level}"
            )));
        }
    }
    let nd = free.len();
    if nd == 0 {
        return Ok(MixedLiftResult {
            level,
            elements: submesh.to_vec(),
            facets: free,
            coeffs: vec![],
            divergence: vec![0.0; nt],
            sigma_norm: 0.0,
            fully_clamped,
        });
    }
    let dof: HashMap<usize, usize> = free.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut m = DenseMatrix::zeros(nd, nd);
    let mut d = DenseMatrix::zeros(nt, nd);
    for (i, &t) in submesh.iter().enumerate() {
        let p = mesh.element_points(t);
        let area = mesh.area[t];
        // (dof, local facet index, signed scale |E|/(2|T|)).
        let mut loc = Vec::with_capacity(3);
        for (k, &f) in mesh.element_facets[t].iter().enumerate() {
            if let Some(&j) = dof.get(&f) {
                let sign = if mesh.facets[f].plus == t { 1.0 } else { -1.0 };
                let c = sign * mesh.facet_length(f) / (2.0 * area);
                loc.push((j, k, c));
                d.add_to(i, j, 2.0 * c);
            }
        }
        for &(ja, ka, ca) in &loc {
            for &(jb, kb, cb) in &loc {
                m.add_to(ja, jb, ca * cb * local_mass(p, area, ka, kb));
            }
        }
    }
    m.symmetrize();
    let mch = Cholesky::new(&m, "RT0 mass")?;
    // S = D M⁻¹ Dᵀ = (L⁻¹Dᵀ)ᵀ(L⁻¹Dᵀ).
    let g = mch.forward_matrix(&d.transpose());
    let mut s = g.transpose().matmul(&g);
    if fully_clamped {
        let aa: f64 = areas.iter().map(|a| a * a).sum();
        let tr: f64 = (0..nt).map(|i| s.get(i, i)).sum::<f64>() / nt as f64;
        let c = tr.max(1.0) / aa;
        for i in 0..nt {
            for j in 0..nt {
                s.add_to(i, j, c * areas[i] * areas[j]);
            }
        }
    }
    s.symmetrize();
    let sch = Cholesky::new(&s, "RT0 Schur complement")?;
    let mut coeffs = vec![0.0; nd];
    let mut divergence = vec![0.0; nt];
    // Graded submeshes make S ill-conditioned; two refinement sweeps on the
    // divergence residual recover machine precision.
    for _ in 0..3 {
        let res: Vec<f64> = rhs.iter().zip(&divergence).map(|(r, v)| r - v).collect();
        let dc = mch.solve(&d.matvec_t(&sch.solve(&res)));
        coeffs.iter_mut().zip(&dc).for_each(|(c, v)| *c += v);
        divergence = d.matvec(&coeffs);
    }
    let sigma_norm = m.quad_form(&coeffs).max(0.0).sqrt();
    Ok(MixedLiftResult {
        level,
        elements: submesh.to_vec(),
        facets: free,
        coeffs,
        divergence,
        sigma_norm,
        fully_clamped,
    })
}
