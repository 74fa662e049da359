use super::{FineMesh, Rect};
use crate::error::{Error, Result};

/// Uniform rectangular coarse grid. Vertices are numbered `j * (nx + 1) + i`
/// and cells `j * nx + i`, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    domain: Rect,
    nx: usize,
    ny: usize,
}

impl CoarseGrid {
    pub fn new(domain: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!(
                "coarse grid needs positive cell counts, got {nx}x{ny}"
            )));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) || !domain.diameter().is_finite() {
            return Err(Error::Config(
                "coarse grid needs a non-degenerate finite domain".into(),
            ));
        }
        Ok(Self { domain, nx, ny })
    }

    /// Grid over `(0, lx) x (0, ly)`.
    pub fn from_extents(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(Rect::new(0.0, 0.0, lx, ly), nx, ny)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn hx(&self) -> f64 {
        self.domain.width() / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.domain.height() / self.ny as f64
    }

    pub fn vertex_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn vertex_ij(&self, l: usize) -> (usize, usize) {
        (l % (self.nx + 1), l / (self.nx + 1))
    }

    pub fn vertex(&self, l: usize) -> [f64; 2] {
        let (i, j) = self.vertex_ij(l);
        [self.x_line(i), self.y_line(j)]
    }

    fn x_line(&self, i: usize) -> f64 {
        if i == self.nx {
            self.domain.xmax
        } else {
            self.domain.xmin + i as f64 * self.hx()
        }
    }

    fn y_line(&self, j: usize) -> f64 {
        if j == self.ny {
            self.domain.ymax
        } else {
            self.domain.ymin + j as f64 * self.hy()
        }
    }

    pub fn cell_rect(&self, c: usize) -> Rect {
        let (i, j) = (c % self.nx, c / self.nx);
        Rect::new(
            self.x_line(i),
            self.y_line(j),
            self.x_line(i + 1),
            self.y_line(j + 1),
        )
    }

    /// Counter-clockwise vertices of a cell, starting bottom-left.
    pub fn cell_vertices(&self, c: usize) -> [usize; 4] {
        let (i, j) = (c % self.nx, c / self.nx);
        let v = |i: usize, j: usize| j * (self.nx + 1) + i;
        [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]
    }

    /// Cells sharing vertex `l` (one to four).
    pub fn vertex_cells(&self, l: usize) -> Vec<usize> {
        let (i, j) = self.vertex_ij(l);
        let mut cells = Vec::with_capacity(4);
        for cj in j.saturating_sub(1)..=j.min(self.ny - 1) {
            for ci in i.saturating_sub(1)..=i.min(self.nx - 1) {
                cells.push(cj * self.nx + ci);
            }
        }
        cells
    }

    /// Closure of the union of the cells around vertex `l`.
    pub fn patch_rect(&self, l: usize) -> Rect {
        let (i, j) = self.vertex_ij(l);
        Rect::new(
            self.x_line(i.saturating_sub(1)),
            self.y_line(j.saturating_sub(1)),
            self.x_line((i + 1).min(self.nx)),
            self.y_line((j + 1).min(self.ny)),
        )
    }

    /// Bilinear hat function of vertex `l` evaluated at `p`.
    pub fn hat(&self, l: usize, p: [f64; 2]) -> f64 {
        let c = self.vertex(l);
        // round-off on a neighbouring coarse line must not widen the support
        let snap = |s: f64| if s < 1e-12 { 0.0 } else { s };
        let sx = snap(1.0 - (p[0] - c[0]).abs() / self.hx());
        let sy = snap(1.0 - (p[1] - c[1]).abs() / self.hy());
        sx * sy
    }

    /// Cell containing `p` (points on shared lines go to the lower index).
    pub fn locate(&self, p: [f64; 2]) -> usize {
        let fx = ((p[0] - self.domain.xmin) / self.hx()).floor();
        let fy = ((p[1] - self.domain.ymin) / self.hy()).floor();
        let i = (fx.max(0.0) as usize).min(self.nx - 1);
        let j = (fy.max(0.0) as usize).min(self.ny - 1);
        j * self.nx + i
    }
}

/// Fine-mesh restriction to the neighbourhood of one coarse vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub vertex: usize,
    pub rect: Rect,
    pub cells: Vec<usize>,
    /// Fine triangles inside the patch, ascending.
    pub triangles: Vec<usize>,
    /// Fine nodes of those triangles, ascending.
    pub nodes: Vec<usize>,
    /// Whether each entry of `nodes` lies on the patch boundary.
    pub on_boundary: Vec<bool>,
    /// Fracture edges inside the patch (indices into the mesh list).
    pub fracture_edges: Vec<usize>,
}

impl Patch {
    pub fn local_index(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .zip(&self.on_boundary)
            .filter(|(_, &b)| b)
            .map(|(&v, _)| v)
    }

    pub fn boundary_count(&self) -> usize {
        self.on_boundary.iter().filter(|&&b| b).count()
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len() - self.boundary_count()
    }
}

/// Builds the patch of every coarse vertex.
///
/// Fails with a geometry error when the fine mesh does not cover the coarse
/// domain or a fine triangle straddles a coarse cell boundary.
pub fn build_patches(grid: &CoarseGrid, mesh: &FineMesh) -> Result<Vec<Patch>> {
    let dom = grid.domain();
    let tol = 1e-9 * dom.diameter();
    let b = mesh.bounds();
    if (b.xmin - dom.xmin).abs() > tol
        || (b.ymin - dom.ymin).abs() > tol
        || (b.xmax - dom.xmax).abs() > tol
        || (b.ymax - dom.ymax).abs() > tol
    {
        return Err(Error::Geometry(format!(
            "fine mesh spans [{}, {}] x [{}, {}] but the coarse grid covers [{}, {}] x [{}, {}]",
            b.xmin, b.xmax, b.ymin, b.ymax, dom.xmin, dom.xmax, dom.ymin, dom.ymax
        )));
    }

    let mut cell_triangles = vec![Vec::new(); grid.cell_count()];
    for t in 0..mesh.triangle_count() {
        let c = grid.locate(mesh.centroid(t));
        let rect = grid.cell_rect(c);
        if let Some(p) = mesh
            .triangle_points(t)
            .iter()
            .find(|p| !rect.contains(**p, tol))
        {
            return Err(Error::Geometry(format!(
                "fine triangle {t} crosses a coarse cell boundary (vertex ({}, {}) outside cell {c})",
                p[0], p[1]
            )));
        }
        cell_triangles[c].push(t);
    }

    (0..grid.vertex_count())
        .map(|l| {
            let rect = grid.patch_rect(l);
            let cells = grid.vertex_cells(l);
            let mut triangles: Vec<usize> = cells
                .iter()
                .flat_map(|&c| cell_triangles[c].iter().copied())
                .collect();
            triangles.sort_unstable();
            let mut nodes: Vec<usize> = triangles.iter().flat_map(|&t| mesh.triangle(t)).collect();
            nodes.sort_unstable();
            nodes.dedup();
            if nodes.is_empty() {
                return Err(Error::Geometry(format!(
                    "coarse vertex {l} has no fine triangles in its patch"
                )));
            }
            let on_boundary = nodes
                .iter()
                .map(|&v| rect.on_boundary(mesh.node(v), tol))
                .collect();
            let fracture_edges = (0..mesh.fracture_edges().len())
                .filter(|&e| {
                    let [a, b] = mesh.fracture_edges()[e];
                    let (p, q) = (mesh.node(a), mesh.node(b));
                    rect.contains([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])], tol)
                        && nodes.binary_search(&a).is_ok()
                        && nodes.binary_search(&b).is_ok()
                })
                .collect();
            Ok(Patch {
                vertex: l,
                rect,
                cells,
                triangles,
                nodes,
                on_boundary,
                fracture_edges,
            })
        })
        .collect()
}

/// Nodal values of the bilinear hat functions on each patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    values: Vec<Vec<f64>>,
}

impl PartitionOfUnity {
    /// χ^l at the nodes of patch `l`, aligned with `Patch::nodes`.
    pub fn patch_values(&self, l: usize) -> &[f64] {
        &self.values[l]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn partition_of_unity(
    grid: &CoarseGrid,
    mesh: &FineMesh,
    patches: &[Patch],
) -> PartitionOfUnity {
    let values = patches
        .iter()
        .map(|p| {
            p.nodes
                .iter()
                .map(|&v| grid.hat(p.vertex, mesh.node(v)))
                .collect()
        })
        .collect();
    PartitionOfUnity { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_mesh;

    #[test]
    fn grid_counts_and_cells() {
        let g = CoarseGrid::from_extents(50.0, 50.0, 10, 10).unwrap();
        assert_eq!(g.vertex_count(), 121);
        assert_eq!(g.vertex_cells(0), vec![0]);
        assert_eq!(g.vertex_cells(12).len(), 4);
        assert_eq!(g.vertex_cells(120), vec![99]);
        assert_eq!(g.cell_vertices(0), [0, 1, 12, 11]);
        assert!(CoarseGrid::from_extents(1.0, 1.0, 0, 3).is_err());
    }

    #[test]
    fn four_by_four_patches() {
        let m = structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), 4, 4, &[]).unwrap();
        let g = CoarseGrid::from_extents(1.0, 1.0, 2, 2).unwrap();
        let patches = build_patches(&g, &m).unwrap();
        assert_eq!(patches.len(), 9);
        let centre = &patches[4];
        assert_eq!(centre.nodes.len(), 25);
        assert_eq!(centre.boundary_count(), 16);
        let corner = &patches[0];
        assert_eq!(corner.nodes.len(), 9);
        let pou = partition_of_unity(&g, &m, &patches);
        assert_eq!(pou.patch_values(4)[12], 1.0);
        // domain-boundary nodes of a corner patch are still patch-boundary nodes
        assert!(corner.on_boundary[0]);
    }

    #[test]
    fn nonconforming_mesh_is_a_geometry_error() {
        let m = structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), 3, 3, &[]).unwrap();
        let g = CoarseGrid::from_extents(1.0, 1.0, 2, 2).unwrap();
        assert!(matches!(build_patches(&g, &m), Err(Error::Geometry(_))));
        let g2 = CoarseGrid::from_extents(2.0, 1.0, 1, 1).unwrap();
        assert!(matches!(build_patches(&g2, &m), Err(Error::Geometry(_))));
    }
}
