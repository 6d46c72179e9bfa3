//! Nested sequences T_0 ⊂ … ⊂ T_L with father/child tables.

use super::{refine_adaptive, refine_uniform, Mesh, Point, Refinement};
use crate::error::{Error, Result};

/// A nested mesh sequence. Level ℓ+1 arises from level ℓ by one uniform or
/// adaptive refinement step; unrefined elements are carried over and keep
/// their lineage id.
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    meshes: Vec<Mesh>,
    /// parent[ℓ][t]: father (level ℓ−1) of element t of level ℓ; empty for ℓ = 0.
    parent: Vec<Vec<usize>>,
    child_bary: Vec<Vec<[[f64; 3]; 3]>>,
    /// children of level-ℓ elements in level ℓ+1, compressed.
    child_offsets: Vec<Vec<usize>>,
    child_items: Vec<Vec<usize>>,
    /// refined[ℓ][t]: element t of level ℓ was bisected going to ℓ+1.
    refined: Vec<Vec<bool>>,
    /// facet_prev[ℓ][f]: the same facet in level ℓ−1, if it exists there.
    facet_prev: Vec<Vec<Option<usize>>>,
    uniform: bool,
}

/// Bisection factor of newest-vertex bisection: h shrinks by 1/√2 per
/// bisection on average over generations.
pub const Q_REF: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl MeshHierarchy {
    pub fn new(mesh0: Mesh) -> Self {
        let nf = mesh0.num_facets();
        Self {
            meshes: vec![mesh0],
            parent: vec![Vec::new()],
            child_bary: vec![Vec::new()],
            child_offsets: Vec::new(),
            child_items: Vec::new(),
            refined: Vec::new(),
            facet_prev: vec![vec![None; nf]],
            uniform: true,
        }
    }

    /// `levels` uniform refinement steps.
    pub fn uniform(mesh0: Mesh, levels: usize) -> Result<Self> {
        let mut h = Self::new(mesh0);
        for _ in 0..levels {
            h.push_uniform()?;
        }
        Ok(h)
    }

    /// Repeated corner refinement until the finest mesh has at least
    /// `target_elements` elements or `max_levels` is reached.
    ///
    /// An element is marked when its distance to `corner` is below
    /// `radius_factor`·√h_T, which produces a strongly graded mesh.
    pub fn corner_adaptive(
        mesh0: Mesh,
        corner: Point,
        radius_factor: f64,
        target_elements: usize,
        max_levels: usize,
    ) -> Result<Self> {
        let mut h = Self::new(mesh0);
        while h.finest().num_elements() < target_elements && h.num_levels() - 1 < max_levels {
            let marked = corner_marking(h.finest(), corner, radius_factor);
            h.push_adaptive(&marked)?;
        }
        Ok(h)
    }

    pub fn push_uniform(&mut self) -> Result<()> {
        let lvl = self.meshes.len();
        let r = refine_uniform(self.finest(), lvl)?;
        self.push(r);
        Ok(())
    }

    /// Adaptive step; an empty marking repeats the finest mesh.
    pub fn push_adaptive(&mut self, marked: &[usize]) -> Result<()> {
        let lvl = self.meshes.len();
        let r = refine_adaptive(self.finest(), marked, lvl)?;
        if r.refined.iter().any(|&x| !x) {
            self.uniform = false;
        }
        self.push(r);
        Ok(())
    }

    fn push(&mut self, r: Refinement) {
        let coarse_n = self.finest().num_elements();
        let mut counts = vec![0usize; coarse_n + 1];
        for &p in &r.parent {
            counts[p + 1] += 1;
        }
        for i in 0..coarse_n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; r.parent.len()];
        for (t, &p) in r.parent.iter().enumerate() {
            items[fill[p]] = t;
            fill[p] += 1;
        }
        let prev = self.finest();
        let fp: Vec<Option<usize>> = r
            .mesh
            .facets
            .iter()
            .map(|f| prev.facet_between(f.vertices[0], f.vertices[1]))
            .collect();
        self.child_offsets.push(counts);
        self.child_items.push(items);
        self.refined.push(r.refined);
        self.facet_prev.push(fp);
        self.parent.push(r.parent);
        self.child_bary.push(r.child_bary);
        self.meshes.push(r.mesh);
    }

    /// Number of meshes, L + 1.
    pub fn num_levels(&self) -> usize {
        self.meshes.len()
    }

    /// Index L of the finest level.
    pub fn finest_level(&self) -> usize {
        self.meshes.len() - 1
    }

    pub fn finest(&self) -> &Mesh {
        self.meshes.last().unwrap()
    }

    pub fn mesh(&self, level: usize) -> &Mesh {
        &self.meshes[level]
    }

    pub fn meshes(&self) -> &[Mesh] {
        &self.meshes
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level > self.finest_level() {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.finest_level(),
            });
        }
        Ok(())
    }

    /// True when every step refined every element.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn q_ref(&self) -> f64 {
        Q_REF
    }

    /// Father in level ℓ−1 of element t of level ℓ ≥ 1.
    pub fn parent(&self, level: usize, t: usize) -> usize {
        self.parent[level][t]
    }

    pub fn parents(&self, level: usize) -> &[usize] {
        &self.parent[level]
    }

    /// Barycentric coordinates of the vertices of element t (level ℓ ≥ 1)
    /// with respect to its father.
    pub fn child_bary(&self, level: usize, t: usize) -> &[[f64; 3]; 3] {
        &self.child_bary[level][t]
    }

    /// Children in level ℓ+1 of element t of level ℓ < L.
    pub fn children(&self, level: usize, t: usize) -> &[usize] {
        let o = &self.child_offsets[level];
        &self.child_items[level][o[t]..o[t + 1]]
    }

    /// Whether element t of level ℓ < L is bisected going to ℓ+1.
    pub fn is_refined(&self, level: usize, t: usize) -> bool {
        self.refined[level][t]
    }

    /// The same facet one level coarser.
    pub fn facet_prev(&self, level: usize, f: usize) -> Option<usize> {
        self.facet_prev[level][f]
    }

    /// Ancestor in level `coarse` of every element of level `fine`.
    pub fn ancestor_map(&self, fine: usize, coarse: usize) -> Vec<usize> {
        assert!(coarse <= fine && fine <= self.finest_level());
        let mut map: Vec<usize> = (0..self.meshes[fine].num_elements()).collect();
        for l in (coarse + 1..=fine).rev() {
            let p = &self.parent[l];
            for m in map.iter_mut() {
                *m = p[*m];
            }
        }
        map
    }

    /// Number of distinct elements over all levels, #T_tot.
    pub fn total_elements(&self) -> usize {
        self.finest().elements.iter().map(|e| e.lineage).max().map_or(0, |m| m + 1)
    }

    /// Elements of level ℓ ≥ 1 that are new, i.e. in T_ℓ \ T_{ℓ−1}.
    pub fn new_elements(&self, level: usize) -> Vec<usize> {
        if level == 0 {
            return (0..self.meshes[0].num_elements()).collect();
        }
        let p = &self.parent[level];
        let r = &self.refined[level - 1];
        (0..p.len()).filter(|&t| r[p[t]]).collect()
    }
}

/// Elements whose closure lies within `radius_factor`·√h_T of `corner`.
pub fn corner_marking(mesh: &Mesh, corner: Point, radius_factor: f64) -> Vec<usize> {
    (0..mesh.num_elements())
        .filter(|&t| {
            let d = point_triangle_distance(corner, mesh.element_points(t));
            d < radius_factor * mesh.diameter[t].sqrt()
        })
        .collect()
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    super::dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Euclidean distance from a point to a closed triangle.
pub(crate) fn point_triangle_distance(p: Point, tri: [Point; 3]) -> f64 {
    let [a, b, c] = tri;
    let s1 = super::signed_area(a, b, p);
    let s2 = super::signed_area(b, c, p);
    let s3 = super::signed_area(c, a, p);
    if s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0 {
        return 0.0;
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, c, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn uniform_tables() {
        let h = MeshHierarchy::uniform(builtin("square2").unwrap(), 3).unwrap();
        assert!(h.is_uniform());
        assert_eq!(h.finest().num_elements(), 128);
        assert_eq!(h.total_elements(), 2 + 8 + 32 + 128);
        for l in 0..3 {
            for t in 0..h.mesh(l).num_elements() {
                let ch = h.children(l, t);
                assert_eq!(ch.len(), 4);
                let a: f64 = ch.iter().map(|&c| h.mesh(l + 1).area[c]).sum();
                assert!((a - h.mesh(l).area[t]).abs() < 1e-15);
                for &c in ch {
                    assert_eq!(h.parent(l + 1, c), t);
                }
            }
        }
        let anc = h.ancestor_map(3, 0);
        assert_eq!(anc.iter().filter(|&&a| a == 0).count(), 64);
    }

    #[test]
    fn empty_step_is_copy() {
        let mut h = MeshHierarchy::new(builtin("square2").unwrap());
        h.push_adaptive(&[]).unwrap();
        assert!(!h.is_uniform());
        assert!(h.new_elements(1).is_empty());
        for f in 0..h.finest().num_facets() {
            assert_eq!(h.facet_prev(1, f), Some(f));
        }
        assert_eq!(h.total_elements(), 2);
    }

    #[test]
    fn corner_grading() {
        let h = MeshHierarchy::corner_adaptive(builtin("square2").unwrap(), [0.0, 0.0], 0.3, 400, 40).unwrap();
        let m = h.finest();
        assert!(m.num_elements() >= 400);
        let near = (0..m.num_elements()).min_by(|&a, &b| {
            let da = super::super::dist(m.centroid(a), [0.0, 0.0]);
            let db = super::super::dist(m.centroid(b), [0.0, 0.0]);
            da.partial_cmp(&db).unwrap()
        });
        let hmin = m.diameter[near.unwrap()];
        let hmax = m.diameter.iter().cloned().fold(0.0, f64::max);
        assert!(hmax / hmin > 8.0);
    }

    #[test]
    fn triangle_distance() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(point_triangle_distance([0.2, 0.2], tri), 0.0);
        assert!((point_triangle_distance([2.0, 0.0], tri) - 1.0).abs() < 1e-15);
        assert!((point_triangle_distance([-1.0, -1.0], tri) - 2f64.sqrt()).abs() < 1e-15);
    }
}
