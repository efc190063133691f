//! Uniform triangulations of the unit square.
//!
//! Vertex `(i, j)` sits at `(i/n, j/n)` and has index `j*(n+1) + i`. Cell
//! `(i, j)` is split along its lower-left to upper-right diagonal into
//! triangles `2c` (below the diagonal) and `2c+1` (above), `c = j*n + i`.
//! All triangles are counterclockwise.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const LOCATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// The moving top side `y = 1`.
    Lid,
    /// The three remaining sides.
    Wall,
}

impl BoundaryTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryTag::Lid => "LID",
            BoundaryTag::Wall => "WALL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    /// Index into [`TriMesh::edges`].
    pub edge: usize,
    pub tag: BoundaryTag,
}

/// Containing triangle and barycentric coordinates of a located point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    n: usize,
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// For each triangle, the edge opposite each local vertex.
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
}

impl TriMesh {
    /// Builds the `n x n` uniform mesh of the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMesh("grid resolution must be at least 1".into()));
        }
        let np = n + 1;
        let nf = n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push(Point2::new(i as f64 / nf, j as f64 / nf));
            }
        }

        let vid = |i: usize, j: usize| j * np + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v01 = vid(i, j + 1);
                let v11 = vid(i + 1, j + 1);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::with_capacity(3 * n * n + 2 * n);
        let mut edge_count: Vec<u8> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut te = [0usize; 3];
            for (local, slot) in te.iter_mut().enumerate() {
                let a = tri[(local + 1) % 3];
                let b = tri[(local + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_count[id] += 1;
                *slot = id;
            }
            triangle_edges.push(te);
        }

        let boundary_edges = edges
            .iter()
            .enumerate()
            .filter(|(id, _)| edge_count[*id] == 1)
            .map(|(id, e)| {
                let on_lid = vertices[e[0]].y == 1.0 && vertices[e[1]].y == 1.0;
                BoundaryEdge {
                    vertices: *e,
                    edge: id,
                    tag: if on_lid { BoundaryTag::Lid } else { BoundaryTag::Wall },
                }
            })
            .collect();

        Ok(Self { n, vertices, triangles, edges, triangle_edges, boundary_edges })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Index of the first edge-midpoint node when vertices and midpoints
    /// share one numbering.
    pub fn midpoint_offset(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y))
    }

    pub fn edge_midpoint(&self, e: usize) -> Point2 {
        let [a, b] = self.edges[e];
        self.vertices[a].midpoint(&self.vertices[b])
    }

    /// Longest edge over all triangles.
    pub fn mesh_size(&self) -> f64 {
        self.edges
            .iter()
            .map(|[a, b]| self.vertices[*a].distance(&self.vertices[*b]))
            .fold(0.0, f64::max)
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        let l1 = ((p.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p.y - p0.y)) / det;
        let l2 = ((p1.x - p0.x) * (p.y - p0.y) - (p.x - p0.x) * (p1.y - p0.y)) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Finds the lowest-index triangle containing `p`.
    pub fn locate(&self, p: Point2) -> Result<Location> {
        if !(p.x.is_finite() && p.y.is_finite())
            || p.x < -LOCATE_TOL
            || p.x > 1.0 + LOCATE_TOL
            || p.y < -LOCATE_TOL
            || p.y > 1.0 + LOCATE_TOL
        {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        let n = self.n;
        let nf = n as f64;
        // candidate cell columns/rows whose closure may contain p
        let span = |c: f64| -> (usize, usize) {
            let s = c * nf;
            let lo = (s - 1e-9).floor().clamp(0.0, nf - 1.0) as usize;
            let hi = (s + 1e-9).floor().clamp(0.0, nf - 1.0) as usize;
            (lo, hi)
        };
        let (i0, i1) = span(p.x);
        let (j0, j1) = span(p.y);
        let mut candidates = Vec::with_capacity(8);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let c = j * n + i;
                candidates.push(2 * c);
                candidates.push(2 * c + 1);
            }
        }
        candidates.sort_unstable();
        for &t in &candidates {
            let l = self.barycentric(t, p);
            if l.iter().all(|&v| v >= -LOCATE_TOL) {
                let mut l = l.map(|v| v.max(0.0));
                let s: f64 = l.iter().sum();
                l.iter_mut().for_each(|v| *v /= s);
                return Ok(Location { triangle: t, barycentric: l });
            }
        }
        Err(Error::OutsideDomain { x: p.x, y: p.y })
    }

    pub fn write_vertices_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,x,y")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{i},{},{}", v.x, v.y)?;
        }
        Ok(())
    }

    pub fn write_triangles_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,v0,v1,v2")?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn write_boundary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "v0,v1,tag")?;
        for e in &self.boundary_edges {
            writeln!(w, "{},{},{}", e.vertices[0], e.vertices[1], e.tag.as_str())?;
        }
        Ok(())
    }
}
