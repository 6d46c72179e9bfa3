//! Conforming triangulations, newest-vertex bisection and mesh hierarchies.
//!
//! Elements store counterclockwise vertex ids and the local index of their
//! refinement edge (the edge opposite local vertex `refinement_edge`).
//! Facets are keyed by sorted endpoint ids; for an interior facet the plus
//! element lies to the left of the directed edge from the smaller to the
//! larger id, which keeps atom signs consistent across levels.

mod audit;
mod builtin;
mod hierarchy;
mod io;
mod refine;

pub use audit::{audit_hierarchy, AuditReport};
pub use builtin::{builtin, BUILTIN_NAMES};
pub use hierarchy::{corner_marking, MeshHierarchy, Q_REF};
pub use io::{parse_mesh, read_mesh, write_mesh};
pub use refine::{refine_adaptive, refine_uniform, Refinement};

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Absolute tolerance for geometric predicates on signed areas.
pub const GEOM_TOL: f64 = 1e-14;

/// A vertex position.
pub type Point = [f64; 2];

/// Triangle of a mesh level.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    /// Counterclockwise vertex ids.
    pub vertices: [usize; 3],
    /// Local index i: the refinement edge is the one opposite `vertices[i]`.
    pub refinement_edge: u8,
    pub generation: u32,
    /// Father element index in the previous level.
    pub father: Option<usize>,
    pub birth_level: usize,
    /// Hierarchy-wide id; carried-over elements keep it.
    pub lineage: usize,
}

impl Element {
    /// Vertex ids of local edge i (opposite vertex i), in counterclockwise order.
    #[inline]
    pub fn edge(&self, i: usize) -> (usize, usize) {
        (self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])
    }
}

/// Edge of a mesh level.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    /// Endpoint ids, ascending.
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    /// Local edge index of this facet in the plus element.
    pub plus_local: u8,
    pub minus_local: Option<u8>,
}

impl Facet {
    #[inline]
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

/// Vertex-to-element incidence in compressed form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Incidence {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Incidence {
    pub fn get(&self, i: usize) -> &[usize] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }
    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One level of a hierarchy.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub level: usize,
    pub vertices: Vec<Point>,
    pub elements: Vec<Element>,
    pub facets: Vec<Facet>,
    /// Facet id of each local edge.
    pub element_facets: Vec<[usize; 3]>,
    pub vertex_elements: Incidence,
    pub interior_facets: Vec<usize>,
    pub boundary_facets: Vec<usize>,
    pub interior_vertices: Vec<usize>,
    pub boundary_vertices: Vec<usize>,
    pub is_boundary_vertex: Vec<bool>,
    pub area: Vec<f64>,
    pub diameter: Vec<f64>,
    facet_index: HashMap<(usize, usize), usize>,
}

#[inline]
pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds connectivity and geometry. Elements must be counterclockwise.
    pub fn new(level: usize, vertices: Vec<Point>, elements: Vec<Element>) -> Result<Self> {
        let nv = vertices.len();
        let mut area = Vec::with_capacity(elements.len());
        let mut diameter = Vec::with_capacity(elements.len());
        for (t, el) in elements.iter().enumerate() {
            if el.vertices.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("element {t} references a missing vertex")));
            }
            let [a, b, c] = el.vertices.map(|v| vertices[v]);
            let s = signed_area(a, b, c);
            if s <= GEOM_TOL {
                return Err(Error::InvalidMesh(format!(
                    "element {t} has non-positive area {s:e}"
                )));
            }
            area.push(s);
            diameter.push(dist(a, b).max(dist(b, c)).max(dist(c, a)));
        }

        let mut facet_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(elements.len() * 2);
        let mut facets: Vec<Facet> = Vec::with_capacity(elements.len() * 3 / 2 + 4);
        let mut element_facets = vec![[0usize; 3]; elements.len()];
        // Which element sits left of the ascending direction of each facet.
        let mut left: Vec<Option<(usize, u8)>> = Vec::with_capacity(facets.capacity());
        let mut right: Vec<Option<(usize, u8)>> = Vec::with_capacity(facets.capacity());
        for (t, el) in elements.iter().enumerate() {
            for i in 0..3 {
                let (u, v) = el.edge(i);
                let key = (u.min(v), u.max(v));
                let f = *facet_index.entry(key).or_insert_with(|| {
                    facets.push(Facet {
                        vertices: [key.0, key.1],
                        plus: usize::MAX,
                        minus: None,
                        plus_local: 0,
                        minus_local: None,
                    });
                    left.push(None);
                    right.push(None);
                    facets.len() - 1
                });
                element_facets[t][i] = f;
                let slot = if u < v { &mut left[f] } else { &mut right[f] };
                if slot.is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "facet ({},{}) has more than two elements or inconsistent orientation (element {t})",
                        key.0, key.1
                    )));
                }
                *slot = Some((t, i as u8));
            }
        }
        let mut interior_facets = Vec::new();
        let mut boundary_facets = Vec::new();
        let mut is_boundary_vertex = vec![false; nv];
        for (f, facet) in facets.iter_mut().enumerate() {
            match (left[f], right[f]) {
                (Some((a, ia)), Some((b, ib))) => {
                    facet.plus = a;
                    facet.plus_local = ia;
                    facet.minus = Some(b);
                    facet.minus_local = Some(ib);
                    interior_facets.push(f);
                }
                (Some((a, ia)), None) | (None, Some((a, ia))) => {
                    facet.plus = a;
                    facet.plus_local = ia;
                    boundary_facets.push(f);
                    is_boundary_vertex[facet.vertices[0]] = true;
                    is_boundary_vertex[facet.vertices[1]] = true;
                }
                (None, None) => unreachable!(),
            }
        }

        let mut counts = vec![0usize; nv + 1];
        for el in &elements {
            for &v in &el.vertices {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nv {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; counts[nv]];
        for (t, el) in elements.iter().enumerate() {
            for &v in &el.vertices {
                items[fill[v]] = t;
                fill[v] += 1;
            }
        }
        let vertex_elements = Incidence {
            offsets: counts,
            items,
        };
        let mut interior_vertices = Vec::new();
        let mut boundary_vertices = Vec::new();
        for v in 0..nv {
            if vertex_elements.get(v).is_empty() {
                return Err(Error::InvalidMesh(format!("vertex {v} belongs to no element")));
            }
            if is_boundary_vertex[v] {
                boundary_vertices.push(v);
            } else {
                interior_vertices.push(v);
            }
        }
        Ok(Self {
            level,
            vertices,
            elements,
            facets,
            element_facets,
            vertex_elements,
            interior_facets,
            boundary_facets,
            interior_vertices,
            boundary_vertices,
            is_boundary_vertex,
            area,
            diameter,
            facet_index,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// Facet id joining two vertices.
    pub fn facet_between(&self, a: usize, b: usize) -> Option<usize> {
        self.facet_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    /// Vertex coordinates of an element.
    pub fn element_points(&self, t: usize) -> [Point; 3] {
        self.elements[t].vertices.map(|v| self.vertices[v])
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Diameter of the bounding point set.
    pub fn domain_diameter(&self) -> f64 {
        let pts: Vec<Point> = self.boundary_vertices.iter().map(|&v| self.vertices[v]).collect();
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in 0..i {
                d = d.max(dist(pts[i], pts[j]));
            }
        }
        d
    }

    /// Local index of vertex `v` in element `t`.
    #[inline]
    pub fn local_index(&self, t: usize, v: usize) -> Option<usize> {
        self.elements[t].vertices.iter().position(|&w| w == v)
    }

    /// Order-k element patch of a vertex.
    pub fn vertex_patch(&self, z: usize, k: usize) -> Vec<usize> {
        let seed: Vec<usize> = self.vertex_elements.get(z).to_vec();
        if k <= 1 {
            let mut s = seed;
            s.sort_unstable();
            return s;
        }
        self.element_patch(&seed, k - 1)
    }

    /// Order-k element patch of a set of elements (k = 0 returns the set).
    pub fn element_patch(&self, seeds: &[usize], k: usize) -> Vec<usize> {
        let mut inside = vec![false; self.num_elements()];
        let mut current: Vec<usize> = Vec::new();
        for &t in seeds {
            if !inside[t] {
                inside[t] = true;
                current.push(t);
            }
        }
        let mut vmark = vec![false; self.num_vertices()];
        let mut frontier = current.clone();
        for _ in 0..k {
            let mut next = Vec::new();
            for &t in &frontier {
                for &v in &self.elements[t].vertices {
                    if vmark[v] {
                        continue;
                    }
                    vmark[v] = true;
                    for &u in self.vertex_elements.get(v) {
                        if !inside[u] {
                            inside[u] = true;
                            next.push(u);
                        }
                    }
                }
            }
            current.extend_from_slice(&next);
            frontier = next;
        }
        current.sort_unstable();
        current
    }

    /// Area-weighted centroid of element `t`.
    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.element_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triangle_square_facets() {
        let m = builtin("square2").unwrap();
        assert_eq!(m.boundary_facets.len(), 4);
        assert_eq!(m.interior_facets.len(), 1);
        assert_eq!(m.interior_vertices.len(), 0);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_triangle() {
        let m = parse_mesh("v 0 0\nv 1 0\nv 0 1\nt 0 1 2\n").unwrap();
        assert_eq!(m.boundary_facets.len(), 3);
        assert_eq!(m.interior_facets.len(), 0);
    }

    #[test]
    fn lshape_euler_characteristic() {
        let m = builtin("lshape6").unwrap();
        let v = m.num_vertices() as i64;
        let e = m.num_facets() as i64;
        let f = m.num_elements() as i64;
        assert_eq!(v - e + f, 1);
        assert_eq!(3 * f as usize, 2 * m.interior_facets.len() + m.boundary_facets.len());
        assert!((m.total_area() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn interior_facet_orientation() {
        let m = builtin("square2").unwrap();
        let f = m.interior_facets[0];
        let facet = &m.facets[f];
        assert_eq!(facet.vertices, [0, 2]);
        // Element 0 = (0,1,2) lies right of 0→2; element 1 = (0,2,3) left.
        assert_eq!(facet.plus, 1);
        assert_eq!(facet.minus, Some(0));
    }

    #[test]
    fn patches() {
        let m = refine_uniform(&builtin("square2").unwrap(), 1).unwrap().mesh;
        let center = m
            .vertices
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15)
            .unwrap();
        let star = m.vertex_patch(center, 1);
        assert_eq!(star.len(), 8);
        let c = builtin("square2").unwrap();
        assert_eq!(c.element_patch(&[0], 1), vec![0, 1]);
    }
}
