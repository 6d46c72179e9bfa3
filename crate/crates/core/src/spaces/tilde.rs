//! Reduced facet sets Ẽ_ℓ: new facets plus surviving facets whose atom
//! support strictly shrank.

use crate::mesh::MeshHierarchy;

/// Per-level membership in Ẽ_ℓ and Ẽ_ℓ^Ω.
#[derive(Clone, Debug)]
pub struct TildeFacetSets {
    /// Facet ids of Ẽ_ℓ, ascending.
    pub all: Vec<Vec<usize>>,
    /// Facet ids of Ẽ_ℓ^Ω, ascending.
    pub interior: Vec<Vec<usize>>,
    member: Vec<Vec<bool>>,
}

impl TildeFacetSets {
    pub fn contains(&self, level: usize, facet: usize) -> bool {
        self.member[level][facet]
    }

    /// Σ_ℓ #Ẽ_ℓ.
    pub fn total(&self) -> usize {
        self.all.iter().map(Vec::len).sum()
    }

    pub fn total_interior(&self) -> usize {
        self.interior.iter().map(Vec::len).sum()
    }

    /// Ẽ_ℓ^Ω when `interior_only`, else Ẽ_ℓ.
    pub fn level(&self, level: usize, interior_only: bool) -> &[usize] {
        if interior_only {
            &self.interior[level]
        } else {
            &self.all[level]
        }
    }
}

/// Computes Ẽ_ℓ for every level. A surviving facet belongs to Ẽ_ℓ iff one
/// of its adjacent elements is new on level ℓ.
pub fn tilde_facet_sets(h: &MeshHierarchy) -> TildeFacetSets {
    let mut all = Vec::with_capacity(h.num_levels());
    let mut interior = Vec::with_capacity(h.num_levels());
    let mut member = Vec::with_capacity(h.num_levels());
    for l in 0..h.num_levels() {
        let m = h.mesh(l);
        let mut flag = vec![false; m.num_facets()];
        if l == 0 {
            flag.iter_mut().for_each(|x| *x = true);
        } else {
            let mut is_new = vec![false; m.num_elements()];
            for t in h.new_elements(l) {
                is_new[t] = true;
            }
            for (f, facet) in m.facets.iter().enumerate() {
                flag[f] = h.facet_prev(l, f).is_none()
                    || is_new[facet.plus]
                    || facet.minus.is_some_and(|t| is_new[t]);
            }
        }
        let a: Vec<usize> = (0..flag.len()).filter(|&f| flag[f]).collect();
        let i: Vec<usize> = a.iter().copied().filter(|&f| !m.facets[f].is_boundary()).collect();
        all.push(a);
        interior.push(i);
        member.push(flag);
    }
    TildeFacetSets {
        all,
        interior,
        member,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn uniform_is_everything() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 2).unwrap();
        let t = tilde_facet_sets(&h);
        for l in 0..3 {
            assert_eq!(t.all[l].len(), h.mesh(l).num_facets());
            assert_eq!(t.interior[l], h.mesh(l).interior_facets);
        }
    }

    #[test]
    fn empty_step_is_empty() {
        let mut h = MeshHierarchy::new(builtin("square2").unwrap());
        h.push_adaptive(&[]).unwrap();
        let t = tilde_facet_sets(&h);
        assert!(t.all[1].is_empty());
    }

    #[test]
    fn one_bisection_of_square() {
        // Refining element 0 bisects the shared diagonal, so both triangles
        // split: 8 facets, all new or adjacent to new elements.
        let mut h = MeshHierarchy::new(builtin("square2").unwrap());
        h.push_adaptive(&[0]).unwrap();
        let t = tilde_facet_sets(&h);
        assert_eq!(t.all[1].len(), 8);
        // Next step: refine one quarter only; the two far boundary edges survive untouched.
        let m = h.finest();
        let q = (0..4).find(|&e| m.elements[e].vertices.contains(&0)).unwrap();
        h.push_adaptive(&[q]).unwrap();
        let t = tilde_facet_sets(&h);
        let m2 = h.finest();
        for f in 0..m2.num_facets() {
            let fc = &m2.facets[f];
            let untouched = h.facet_prev(2, f).is_some()
                && !h.new_elements(2).contains(&fc.plus)
                && fc.minus.is_none_or(|x| !h.new_elements(2).contains(&x));
            assert_eq!(t.contains(2, f), !untouched);
        }
        assert!(t.all[2].len() < m2.num_facets());
    }
}
