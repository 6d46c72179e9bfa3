//! Haar facet atoms ψ_{ℓ,E} = |E|/|T⁺|·χ⁺ − |E|/|T⁻|·χ⁻.

use super::P0Fn;
use crate::error::{Error, Result};
use crate::mesh::MeshHierarchy;

/// The divergence of the lowest-order Raviart–Thomas field of facet E.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarAtom {
    pub level: usize,
    pub facet: usize,
    pub plus: usize,
    pub minus: Option<usize>,
    pub w_plus: f64,
    /// Zero for boundary facets.
    pub w_minus: f64,
    /// Facet length |E| (= h_E in 2D).
    pub length: f64,
}

impl HaarAtom {
    pub fn from_mesh(mesh: &crate::mesh::Mesh, level: usize, facet: usize) -> Result<Self> {
        let f = mesh
            .facets
            .get(facet)
            .ok_or(Error::UnknownFacet { level, facet })?;
        let len = mesh.facet_length(facet);
        Ok(Self {
            level,
            facet,
            plus: f.plus,
            minus: f.minus,
            w_plus: len / mesh.area[f.plus],
            w_minus: f.minus.map_or(0.0, |m| -len / mesh.area[m]),
            length: len,
        })
    }

    pub fn h_e(&self) -> f64 {
        self.length
    }

    /// ‖ψ‖²_{L²} = w⁺²|T⁺| + w⁻²|T⁻|.
    pub fn l2_norm_sq(&self) -> f64 {
        // w⁺²|T⁺| = |E|²/|T⁺|.
        self.length * self.w_plus + self.w_minus.abs() * self.length
    }

    /// Nonzero (element, value) pairs.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        std::iter::once((self.plus, self.w_plus)).chain(self.minus.map(|m| (m, self.w_minus)))
    }

    /// ⟨r, ψ⟩ for a dual vector r (already area-weighted).
    pub fn pair_dual(&self, r: &[f64]) -> f64 {
        self.entries().map(|(t, w)| w * r[t]).sum()
    }

    pub fn to_p0(&self, n: usize) -> P0Fn {
        let mut c = vec![0.0; n];
        for (t, w) in self.entries() {
            c[t] = w;
        }
        P0Fn::new(self.level, c)
    }
}

/// Atom of facet E on level ℓ and its coefficient vector.
pub fn haar(h: &MeshHierarchy, level: usize, facet: usize) -> Result<(HaarAtom, P0Fn)> {
    h.check_level(level)?;
    let m = h.mesh(level);
    let a = HaarAtom::from_mesh(m, level, facet)?;
    let p = a.to_p0(m.num_elements());
    Ok((a, p))
}
