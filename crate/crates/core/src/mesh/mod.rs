//! Fine triangulations with a conforming fracture network, the rectangular
//! coarse grid, coarse-vertex patches and the bilinear partition of unity.

mod coarse;
mod format;
mod structured;

use std::collections::HashSet;
use std::fmt;

pub use coarse::{build_patches, partition_of_unity, CoarseGrid, PartitionOfUnity, Patch};
pub use format::{load_fine_mesh, parse_mesh, save_fine_mesh, write_mesh};
pub use structured::{structured_mesh, FractureDirection, LatticeFracture};

use crate::error::{Error, Result};

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.xmin - tol
            && p[0] <= self.xmax + tol
            && p[1] >= self.ymin - tol
            && p[1] <= self.ymax + tol
    }

    pub fn on_boundary(&self, p: [f64; 2], tol: f64) -> bool {
        self.contains(p, tol)
            && ((p[0] - self.xmin).abs() <= tol
                || (p[0] - self.xmax).abs() <= tol
                || (p[1] - self.ymin).abs() <= tol
                || (p[1] - self.ymax).abs() <= tol)
    }
}

/// Set of domain sides Γ_L, Γ_R, Γ_B, Γ_T a boundary node lies on.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct BoundaryTags(u8);

impl BoundaryTags {
    pub const NONE: Self = Self(0);
    pub const LEFT: Self = Self(1);
    pub const RIGHT: Self = Self(2);
    pub const BOTTOM: Self = Self(4);
    pub const TOP: Self = Self(8);
    pub const ALL: Self = Self(15);

    pub fn contains(self, other: Self) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn intersects(self, other: Self) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn sides(self) -> impl Iterator<Item = Self> {
        [Self::LEFT, Self::RIGHT, Self::BOTTOM, Self::TOP]
            .into_iter()
            .filter(move |s| self.contains(*s))
    }

    pub fn letter(self) -> &'static str {
        match self {
            Self::LEFT => "L",
            Self::RIGHT => "R",
            Self::BOTTOM => "B",
            Self::TOP => "T",
            _ => "?",
        }
    }

    /// Parses `L`/`R`/`B`/`T` or `left`/`right`/`bottom`/`top` (any case).
    pub fn parse_side(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l" | "left" => Some(Self::LEFT),
            "r" | "right" => Some(Self::RIGHT),
            "b" | "bottom" => Some(Self::BOTTOM),
            "t" | "top" => Some(Self::TOP),
            _ => None,
        }
    }
}

impl std::ops::BitOr for BoundaryTags {
    type Output = Self;
    fn bitor(self, rhs: Self) -> Self {
        self.union(rhs)
    }
}

impl fmt::Debug for BoundaryTags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<_> = self.sides().map(|s| s.letter()).collect();
        write!(f, "BoundaryTags({})", s.join("|"))
    }
}

/// Conforming triangulation of a rectangle with tagged fracture edges.
///
/// Fracture pressure degrees of freedom live at the distinct endpoints of the
/// fracture edges, numbered in increasing node order; nodes shared by several
/// fracture edges carry a single fracture unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct FineMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<u32>,
    fracture_edges: Vec<[usize; 2]>,
    boundary: Vec<BoundaryTags>,
    fracture_nodes: Vec<usize>,
    fracture_dof: Vec<Option<usize>>,
    bounds: Rect,
}

impl FineMesh {
    /// Validates and builds a mesh. Clockwise triangles are reoriented.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        regions: Vec<u32>,
        fracture_edges: Vec<[usize; 2]>,
        boundary: Vec<BoundaryTags>,
    ) -> Result<Self> {
        let n = nodes.len();
        if n < 3 || triangles.is_empty() {
            return Err(Error::Validation(
                "mesh needs at least 3 nodes and 1 triangle".into(),
            ));
        }
        if nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Validation("non-finite node coordinate".into()));
        }
        if regions.len() != triangles.len() {
            return Err(Error::Validation(format!(
                "{} region ids for {} triangles",
                regions.len(),
                triangles.len()
            )));
        }
        if boundary.len() != n {
            return Err(Error::Validation(format!(
                "{} boundary tag entries for {n} nodes",
                boundary.len()
            )));
        }
        let mut bounds = Rect::new(
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &nodes {
            bounds.xmin = bounds.xmin.min(p[0]);
            bounds.ymin = bounds.ymin.min(p[1]);
            bounds.xmax = bounds.xmax.max(p[0]);
            bounds.ymax = bounds.ymax.max(p[1]);
        }
        let diam = bounds.diameter();
        let area_tol = 1e-14 * diam * diam;

        let mut referenced = vec![false; n];
        let mut edges = HashSet::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(Error::Validation(format!(
                    "triangle {t} references node {bad} of a {n}-node mesh"
                )));
            }
            let a2 = signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if a2.abs() <= 2.0 * area_tol {
                return Err(Error::Validation(format!("triangle {t} has zero area")));
            }
            if a2 < 0.0 {
                tri.swap(1, 2);
            }
            for k in 0..3 {
                referenced[tri[k]] = true;
                edges.insert(edge_key(tri[k], tri[(k + 1) % 3]));
            }
        }
        if let Some(v) = referenced.iter().position(|r| !r) {
            return Err(Error::Validation(format!(
                "node {v} belongs to no triangle"
            )));
        }

        let mut seen = HashSet::new();
        for (e, edge) in fracture_edges.iter().enumerate() {
            if let Some(&bad) = edge.iter().find(|&&v| v >= n) {
                return Err(Error::Validation(format!(
                    "fracture edge {e} ({}, {}) references node {bad} of a {n}-node mesh",
                    edge[0], edge[1]
                )));
            }
            if edge[0] == edge[1] {
                return Err(Error::Validation(format!(
                    "fracture edge {e} is degenerate"
                )));
            }
            let key = edge_key(edge[0], edge[1]);
            if !edges.contains(&key) {
                return Err(Error::Validation(format!(
                    "fracture edge {e} ({}, {}) is not an edge of any triangle",
                    edge[0], edge[1]
                )));
            }
            if !seen.insert(key) {
                return Err(Error::Validation(format!(
                    "fracture edge {e} is listed twice"
                )));
            }
        }

        let tol = 1e-9 * diam;
        for (v, (&p, &tags)) in nodes.iter().zip(&boundary).enumerate() {
            if bounds.on_boundary(p, tol) && tags.is_empty() {
                return Err(Error::Validation(format!(
                    "boundary node {v} at ({}, {}) carries no side tag",
                    p[0], p[1]
                )));
            }
            for side in tags.sides() {
                let ok = match side {
                    BoundaryTags::LEFT => (p[0] - bounds.xmin).abs() <= tol,
                    BoundaryTags::RIGHT => (p[0] - bounds.xmax).abs() <= tol,
                    BoundaryTags::BOTTOM => (p[1] - bounds.ymin).abs() <= tol,
                    _ => (p[1] - bounds.ymax).abs() <= tol,
                };
                if !ok {
                    return Err(Error::Validation(format!(
                        "node {v} tagged {} does not lie on that side",
                        side.letter()
                    )));
                }
            }
        }

        let mut fracture_nodes: Vec<usize> = fracture_edges.iter().flatten().copied().collect();
        fracture_nodes.sort_unstable();
        fracture_nodes.dedup();
        let mut fracture_dof = vec![None; n];
        for (k, &v) in fracture_nodes.iter().enumerate() {
            fracture_dof[v] = Some(k);
        }

        Ok(Self {
            nodes,
            triangles,
            regions,
            fracture_edges,
            boundary,
            fracture_nodes,
            fracture_dof,
            bounds,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> [f64; 2] {
        self.nodes[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * signed_area2(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn regions(&self) -> &[u32] {
        &self.regions
    }

    pub fn fracture_edges(&self) -> &[[usize; 2]] {
        &self.fracture_edges
    }

    pub fn fracture_edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.fracture_edges[e];
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn total_fracture_length(&self) -> f64 {
        (0..self.fracture_edges.len())
            .map(|e| self.fracture_edge_length(e))
            .sum()
    }

    /// Nodes carrying a fracture unknown, ascending.
    pub fn fracture_nodes(&self) -> &[usize] {
        &self.fracture_nodes
    }

    pub fn fracture_dof(&self, node: usize) -> Option<usize> {
        self.fracture_dof[node]
    }

    pub fn fracture_dof_count(&self) -> usize {
        self.fracture_nodes.len()
    }

    pub fn boundary_tags(&self, v: usize) -> BoundaryTags {
        self.boundary[v]
    }

    pub fn boundary(&self) -> &[BoundaryTags] {
        &self.boundary
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }
}

pub(crate) fn signed_area2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}


#[cfg(test)]
mod tests {
    use super::test_meshes::unit_square;
    use super::*;

    #[test]
    fn diagonal_fracture_length() {
        let m = unit_square(true);
        assert_eq!(m.fracture_edges().len(), 1);
        assert!((m.fracture_edge_length(0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.fracture_nodes(), &[0, 2]);
        assert_eq!(m.fracture_dof(2), Some(1));
        assert_eq!(m.fracture_dof(1), None);
    }

    #[test]
    fn rejects_bad_meshes() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tags = vec![
            BoundaryTags::LEFT | BoundaryTags::BOTTOM,
            BoundaryTags::RIGHT,
            BoundaryTags::RIGHT,
            BoundaryTags::LEFT,
        ];
        let tris = vec![[0, 1, 2], [0, 2, 3]];
        let err = FineMesh::new(
            nodes.clone(),
            tris.clone(),
            vec![0, 0],
            vec![[0, 99]],
            tags.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        // 1–3 is the other diagonal, not a mesh edge
        let err = FineMesh::new(
            nodes.clone(),
            tris.clone(),
            vec![0, 0],
            vec![[1, 3]],
            tags.clone(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("not an edge"));
        let flat = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        let err = FineMesh::new(
            flat,
            vec![[0, 1, 2], [0, 1, 3]],
            vec![0, 0],
            vec![],
            tags.clone(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("zero area"));
        let mut untagged = tags.clone();
        untagged[2] = BoundaryTags::NONE;
        assert!(FineMesh::new(nodes, tris, vec![0, 0], vec![], untagged).is_err());
    }

    #[test]
    fn clockwise_triangles_are_reoriented() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tags = vec![
            BoundaryTags::LEFT,
            BoundaryTags::RIGHT,
            BoundaryTags::RIGHT,
            BoundaryTags::LEFT,
        ];
        let m = FineMesh::new(nodes, vec![[0, 2, 1], [0, 2, 3]], vec![0, 0], vec![], tags).unwrap();
        assert!((0..2).all(|t| m.triangle_area(t) > 0.0));
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }
}
