use super::{BoundaryTags, FineMesh, Rect};
use crate::error::{Error, Result};

/// Direction of a fracture drawn on the structured lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractureDirection {
    /// +x
    Horizontal,
    /// +y
    Vertical,
    /// +x, +y
    Diagonal,
    /// +x, -y
    AntiDiagonal,
}

/// Fracture of `length` lattice steps starting at lattice point `start = [i, j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeFracture {
    pub start: [usize; 2],
    pub direction: FractureDirection,
    pub length: usize,
}

impl LatticeFracture {
    pub fn new(start: [usize; 2], direction: FractureDirection, length: usize) -> Self {
        Self {
            start,
            direction,
            length,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Split {
    Free,
    Slash,
    Backslash,
}

/// Uniform `nx` x `ny` grid of squares, each cut into two triangles.
///
/// Squares default to the `/` diagonal; squares crossed by an anti-diagonal
/// fracture use `\`. Fracture edges follow lattice lines, so the mesh is
/// conforming by construction.
pub fn structured_mesh(
    domain: Rect,
    nx: usize,
    ny: usize,
    fractures: &[LatticeFracture],
) -> Result<FineMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(format!(
            "structured mesh needs positive cell counts, got {nx}x{ny}"
        )));
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::Config(
            "structured mesh needs a non-degenerate domain".into(),
        ));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut split = vec![Split::Free; nx * ny];
    let mut edges = Vec::new();
    for (f, fr) in fractures.iter().enumerate() {
        let [mut i, mut j] = fr.start;
        for _ in 0..fr.length {
            let (ni, nj) = match fr.direction {
                FractureDirection::Horizontal => (i + 1, j),
                FractureDirection::Vertical => (i, j + 1),
                FractureDirection::Diagonal => (i + 1, j + 1),
                FractureDirection::AntiDiagonal => (i + 1, j.wrapping_sub(1)),
            };
            if i > nx || j > ny || ni > nx || nj > ny {
                return Err(Error::Config(format!(
                    "fracture {f} leaves the {nx}x{ny} lattice"
                )));
            }
            let want = match fr.direction {
                FractureDirection::Diagonal => Some((j * nx + i, Split::Slash)),
                FractureDirection::AntiDiagonal => Some((nj * nx + i, Split::Backslash)),
                _ => None,
            };
            if let Some((sq, s)) = want {
                if split[sq] != Split::Free && split[sq] != s {
                    return Err(Error::Config(format!(
                        "fracture {f} crosses another fracture inside a lattice square"
                    )));
                }
                split[sq] = s;
            }
            let e = [id(i, j), id(ni, nj)];
            if !edges.contains(&e) && !edges.contains(&[e[1], e[0]]) {
                edges.push(e);
            }
            i = ni;
            j = nj;
        }
    }

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity(nodes.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx {
                domain.xmax
            } else {
                domain.xmin + domain.width() * i as f64 / nx as f64
            };
            let y = if j == ny {
                domain.ymax
            } else {
                domain.ymin + domain.height() * j as f64 / ny as f64
            };
            nodes.push([x, y]);
            let mut tags = BoundaryTags::NONE;
            if i == 0 {
                tags = tags | BoundaryTags::LEFT;
            }
            if i == nx {
                tags = tags | BoundaryTags::RIGHT;
            }
            if j == 0 {
                tags = tags | BoundaryTags::BOTTOM;
            }
            if j == ny {
                tags = tags | BoundaryTags::TOP;
            }
            boundary.push(tags);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if split[j * nx + i] == Split::Backslash {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
    }
    let regions = vec![0; triangles.len()];
    FineMesh::new(nodes, triangles, regions, edges, boundary)
}
