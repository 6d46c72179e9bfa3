//! Plain-text mesh format.
//!
//! ```text
//! # comment
//! v <x> <y>
//! t <i> <j> <k> [r <local-edge>]
//! ```
//! Vertex indices are 0-based. Clockwise triangles are flipped. Without an
//! `r` suffix the refinement edge is the longest edge, ties going to the
//! smallest opposite vertex id.

use super::{dist, signed_area, Element, Mesh, Point, GEOM_TOL};
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

/// Relative tolerance for comparing edge lengths.
const LENGTH_TIE: f64 = 1e-12;

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut tris: Vec<([usize; 3], Option<u8>, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tok = content.split_whitespace();
        let Some(head) = tok.next() else { continue };
        let perr = |msg: String| Error::Parse { line, msg };
        let num = |s: Option<&str>, what: &str| -> Result<f64> {
            let s = s.ok_or_else(|| perr(format!("missing {what}")))?;
            let v: f64 = s.parse().map_err(|_| perr(format!("bad {what} `{s}`")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite {what}")));
            }
            Ok(v)
        };
        let idx = |s: Option<&str>, what: &str| -> Result<usize> {
            let s = s.ok_or_else(|| perr(format!("missing {what}")))?;
            s.parse().map_err(|_| perr(format!("bad {what} `{s}`")))
        };
        match head {
            "v" => {
                if !tris.is_empty() {
                    return Err(perr("vertex after triangles".into()));
                }
                let x = num(tok.next(), "x")?;
                let y = num(tok.next(), "y")?;
                vertices.push([x, y]);
            }
            "t" => {
                let i = idx(tok.next(), "vertex index")?;
                let j = idx(tok.next(), "vertex index")?;
                let k = idx(tok.next(), "vertex index")?;
                let mut r = None;
                if let Some(flag) = tok.next() {
                    if flag != "r" {
                        return Err(perr(format!("unexpected token `{flag}`")));
                    }
                    let e = idx(tok.next(), "refinement edge")?;
                    if e > 2 {
                        return Err(perr(format!("refinement edge {e} not in 0..3")));
                    }
                    r = Some(e as u8);
                }
                if tok.next().is_some() {
                    return Err(perr("trailing tokens".into()));
                }
                for v in [i, j, k] {
                    if v >= vertices.len() {
                        return Err(perr(format!("vertex {v} not defined")));
                    }
                }
                tris.push(([i, j, k], r, line));
            }
            other => return Err(perr(format!("unknown record `{other}`"))),
        }
        if tok.next().is_some() {
            return Err(perr("trailing tokens".into()));
        }
    }
    if tris.is_empty() {
        return Err(Error::InvalidMesh("no triangles".into()));
    }
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        // Normalize signed zero so that -0 and 0 collide.
        let key = ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits());
        if let Some(j) = seen.insert(key, i) {
            return Err(Error::InvalidMesh(format!("vertex {i} duplicates vertex {j}")));
        }
    }
    let mut elements = Vec::with_capacity(tris.len());
    for (t, (mut v, mut r, _)) in tris.into_iter().enumerate() {
        let s = signed_area(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
        if s.abs() <= GEOM_TOL {
            return Err(Error::InvalidMesh(format!("triangle {t} has zero area")));
        }
        if s < 0.0 {
            v.swap(1, 2);
            r = r.map(|e| [0u8, 2, 1][e as usize]);
        }
        let refinement_edge = r.unwrap_or_else(|| longest_edge(&vertices, v));
        elements.push(Element {
            vertices: v,
            refinement_edge,
            generation: 0,
            father: None,
            birth_level: 0,
            lineage: t,
        });
    }
    Mesh::new(0, vertices, elements)
}

/// Local index of the vertex opposite the longest edge.
pub(crate) fn longest_edge(vertices: &[Point], v: [usize; 3]) -> u8 {
    let len = |i: usize| dist(vertices[v[(i + 1) % 3]], vertices[v[(i + 2) % 3]]);
    let mut best = 0usize;
    for i in 1..3 {
        let (li, lb) = (len(i), len(best));
        if li > lb * (1.0 + LENGTH_TIE) || (li >= lb * (1.0 - LENGTH_TIE) && v[i] < v[best]) {
            best = i;
        }
    }
    best as u8
}

/// Serializes a mesh, including refinement edges, with a level header.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# level {}", mesh.level);
    for p in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?}", p[0], p[1]);
    }
    for el in &mesh.elements {
        let [a, b, c] = el.vertices;
        let _ = writeln!(s, "t {a} {b} {c} r {}", el.refinement_edge);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = crate::mesh::builtin("lshape6").unwrap();
        let text = write_mesh(&m);
        let m2 = parse_mesh(&text).unwrap();
        assert_eq!(m.vertices, m2.vertices);
        for (a, b) in m.elements.iter().zip(&m2.elements) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.refinement_edge, b.refinement_edge);
        }
    }

    #[test]
    fn clockwise_flipped() {
        let m = parse_mesh("v 0 0\nv 1 0\nv 0 1\nt 0 2 1 r 1\n").unwrap();
        assert_eq!(m.elements[0].vertices, [0, 1, 2]);
        // Edge opposite vertex 2 (original slot 1) stays the refinement edge.
        assert_eq!(m.elements[0].refinement_edge, 2);
    }

    #[test]
    fn errors_name_entity() {
        let e = parse_mesh("v 0 0\nv 1 0\nv 0 0\nt 0 1 2\n").unwrap_err();
        assert!(e.to_string().contains("vertex 2"), "{e}");
        let e = parse_mesh("v 0 0\nv 1 0\nv 2 0\nt 0 1 2\n").unwrap_err();
        assert!(e.to_string().contains("triangle 0"), "{e}");
        let e = parse_mesh("v 0 0\nv 1 0\nv 0 1\nv 0.5 2\nv 0 -1\nt 0 1 2\nt 1 0 4\nt 0 1 3\n").unwrap_err();
        assert!(e.to_string().contains("facet (0,1)"), "{e}");
        let e = parse_mesh("v 0 0\nq 1 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn longest_edge_ties() {
        // Right isosceles: hypotenuse 1–2 is opposite vertex 0.
        let vs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(longest_edge(&vs, [0, 1, 2]), 0);
        // Equilateral-ish ties go to the smallest opposite id.
        let eq = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        assert_eq!(longest_edge(&eq, [1, 2, 0]), 2);
    }
}
