//! Newest-vertex bisection with closure.

use super::{Element, Mesh, Point};
use crate::error::{Error, Result};

/// Result of one refinement step from level ℓ to ℓ+1.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: Mesh,
    /// Father index (in the coarse mesh) of each fine element.
    pub parent: Vec<usize>,
    /// Barycentric coordinates of each fine element's vertices with respect
    /// to its father, row i for fine local vertex i.
    pub child_bary: Vec<[[f64; 3]; 3]>,
    /// Whether each coarse element was bisected.
    pub refined: Vec<bool>,
}

/// Refines every element into 4 children (two bisection sweeps).
pub fn refine_uniform(mesh: &Mesh, level: usize) -> Result<Refinement> {
    let marks = vec![true; mesh.num_facets()];
    bisect_marked_edges(mesh, marks, level)
}

/// Bisects every marked element at least once plus the closure needed to
/// keep the mesh conforming.
pub fn refine_adaptive(mesh: &Mesh, marked: &[usize], level: usize) -> Result<Refinement> {
    let nf = mesh.num_facets();
    let mut marks = vec![false; nf];
    let mut work = Vec::new();
    for &t in marked {
        if t >= mesh.num_elements() {
            return Err(Error::InvalidArgument(format!(
                "marked element {t} out of range ({} elements)",
                mesh.num_elements()
            )));
        }
        let f = mesh.element_facets[t][mesh.elements[t].refinement_edge as usize];
        if !marks[f] {
            marks[f] = true;
            work.push(f);
        }
    }
    let budget = mesh.num_elements() * 64;
    let mut steps = 0usize;
    while let Some(f) = work.pop() {
        steps += 1;
        if steps > budget {
            return Err(Error::ClosureBudget { budget });
        }
        let facet = &mesh.facets[f];
        for t in std::iter::once(facet.plus).chain(facet.minus) {
            let rf = mesh.element_facets[t][mesh.elements[t].refinement_edge as usize];
            if !marks[rf] {
                marks[rf] = true;
                work.push(rf);
            }
        }
    }
    bisect_marked_edges(mesh, marks, level)
}

const E: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mid(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

/// Performs the bisections implied by a closed edge marking: every element
/// with a marked edge has its refinement edge marked.
fn bisect_marked_edges(mesh: &Mesh, marks: Vec<bool>, level: usize) -> Result<Refinement> {
    let mut vertices: Vec<Point> = mesh.vertices.clone();
    let mut midpoint = vec![usize::MAX; mesh.num_facets()];
    for (f, &m) in marks.iter().enumerate() {
        if m {
            let [a, b] = mesh.facets[f].vertices;
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            midpoint[f] = vertices.len();
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
    }
    let mut next_lineage = mesh.elements.iter().map(|e| e.lineage).max().map_or(0, |m| m + 1);
    let mut elements = Vec::with_capacity(mesh.num_elements() * 2);
    let mut parent = Vec::with_capacity(mesh.num_elements() * 2);
    let mut child_bary = Vec::with_capacity(mesh.num_elements() * 2);
    let mut refined = vec![false; mesh.num_elements()];

    for (t, el) in mesh.elements.iter().enumerate() {
        let r = el.refinement_edge as usize;
        let fe = mesh.element_facets[t];
        if !marks[fe[r]] {
            for i in 0..3 {
                if marks[fe[i]] {
                    return Err(Error::Audit(format!(
                        "element {t}: edge {i} marked without its refinement edge"
                    )));
                }
            }
            let mut copy = el.clone();
            copy.father = Some(t);
            elements.push(copy);
            parent.push(t);
            child_bary.push(E);
            continue;
        }
        refined[t] = true;
        // Rotate so that p is opposite the refinement edge q–r.
        let (ip, iq, ir) = (r, (r + 1) % 3, (r + 2) % 3);
        let (p, q, rr) = (el.vertices[ip], el.vertices[iq], el.vertices[ir]);
        let (bp, bq, br) = (E[ip], E[iq], E[ir]);
        let m = midpoint[fe[r]];
        let bm = mid(bq, br);
        // Edge p–q is opposite r; edge r–p is opposite q.
        let f_pq = fe[ir];
        let f_rp = fe[iq];
        let mut push = |verts: [usize; 3], bary: [[f64; 3]; 3], gen: u32| {
            elements.push(Element {
                vertices: verts,
                refinement_edge: 0,
                generation: gen,
                father: Some(t),
                birth_level: level,
                lineage: next_lineage,
            });
            next_lineage += 1;
            parent.push(t);
            child_bary.push(bary);
        };
        let g = el.generation;
        if marks[f_pq] {
            let m1 = midpoint[f_pq];
            let b1 = mid(bp, bq);
            push([m1, m, p], [b1, bm, bp], g + 2);
            push([m1, q, m], [b1, bq, bm], g + 2);
        } else {
            push([m, p, q], [bm, bp, bq], g + 1);
        }
        if marks[f_rp] {
            let m2 = midpoint[f_rp];
            let b2 = mid(br, bp);
            push([m2, m, rr], [b2, bm, br], g + 2);
            push([m2, p, m], [b2, bp, bm], g + 2);
        } else {
            push([m, rr, p], [bm, br, bp], g + 1);
        }
    }
    let mesh = Mesh::new(level, vertices, elements)?;
    Ok(Refinement {
        mesh,
        parent,
        child_bary,
        refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin;

    #[test]
    fn uniform_square_counts() {
        let m0 = builtin("square2").unwrap();
        let r1 = refine_uniform(&m0, 1).unwrap();
        assert_eq!(r1.mesh.num_elements(), 8);
        assert_eq!(r1.mesh.interior_facets.len(), 8);
        for (t, el) in r1.mesh.elements.iter().enumerate() {
            assert_eq!(el.generation, 2);
            let f = r1.parent[t];
            assert!((r1.mesh.area[t] - m0.area[f] / 4.0).abs() < 1e-15);
            assert!((r1.mesh.diameter[t] - m0.diameter[f] / 2.0).abs() < 1e-15);
        }
        let r2 = refine_uniform(&r1.mesh, 2).unwrap();
        assert_eq!(r2.mesh.num_elements(), 32);
    }

    #[test]
    fn empty_marking_copies() {
        let m0 = builtin("lshape6").unwrap();
        let r = refine_adaptive(&m0, &[], 1).unwrap();
        assert_eq!(r.mesh.vertices, m0.vertices);
        for (a, b) in r.mesh.elements.iter().zip(&m0.elements) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.lineage, b.lineage);
        }
        assert!(r.refined.iter().all(|x| !x));
    }

    #[test]
    fn closure_bisects_neighbor() {
        let m0 = builtin("square2").unwrap();
        let r = refine_adaptive(&m0, &[0], 1).unwrap();
        // Shared diagonal is the refinement edge of both triangles.
        assert_eq!(r.refined, vec![true, true]);
        assert_eq!(r.mesh.num_elements(), 4);
        assert_eq!(r.mesh.num_vertices(), 5);
        assert!((r.mesh.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closure_propagates_through_chain() {
        let m0 = builtin("square2").unwrap();
        let mut m = refine_adaptive(&m0, &[0], 1).unwrap().mesh;
        // Mark the element at the origin repeatedly.
        for lvl in 2..12 {
            let t = (0..m.num_elements())
                .find(|&t| m.elements[t].vertices.iter().any(|&v| v == 0))
                .unwrap();
            m = refine_adaptive(&m, &[t], lvl).unwrap().mesh;
            assert!((m.total_area() - 1.0).abs() < 1e-13);
            let blen: f64 = m.boundary_facets.iter().map(|&f| m.facet_length(f)).sum();
            assert!((blen - 4.0).abs() < 1e-13, "hanging node at level {lvl}");
        }
        let gmax = m.elements.iter().map(|e| e.generation).max().unwrap();
        let gmin = m.elements.iter().map(|e| e.generation).min().unwrap();
        assert!(gmax > gmin + 4);
    }

    #[test]
    fn child_barycentrics_reproduce_vertices() {
        let m0 = builtin("lshape6").unwrap();
        let r = refine_adaptive(&m0, &[0, 3], 1).unwrap();
        for (t, el) in r.mesh.elements.iter().enumerate() {
            let fp = m0.element_points(r.parent[t]);
            for i in 0..3 {
                let b = r.child_bary[t][i];
                let x = b[0] * fp[0][0] + b[1] * fp[1][0] + b[2] * fp[2][0];
                let y = b[0] * fp[0][1] + b[1] * fp[1][1] + b[2] * fp[2][1];
                let p = r.mesh.vertices[el.vertices[i]];
                assert!((x - p[0]).abs() < 1e-15 && (y - p[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn out_of_range_mark_rejected() {
        let m0 = builtin("square2").unwrap();
        assert!(refine_adaptive(&m0, &[7], 1).is_err());
    }
}
