use crate::assembly::{
    assemble_system_on, assemble_vector_mass, permeability_mass, Constraints, DofLayout, Elements,
    PoroModel, Support,
};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, SparseLu};
use crate::mesh::{FineMesh, Patch};
use crate::sparse::{dot, CsrMatrix, TripletList};

/// Local unknowns of one patch and its local operators.
#[derive(Debug, Clone)]
pub struct PatchSystem {
    pub vertex: usize,
    /// Pressure DOFs (indices into the pressure part of the fine layout).
    pub pressure_dofs: Vec<usize>,
    /// Continuum of each local pressure DOF.
    pub pressure_block: Vec<usize>,
    pub pressure_boundary: Vec<bool>,
    pub pressure_constrained: Vec<bool>,
    /// Mesh node carrying each local pressure DOF.
    pub pressure_node: Vec<usize>,
    /// Displacement DOFs (indices into the displacement block, `2v + c`).
    pub displacement_dofs: Vec<usize>,
    pub displacement_boundary: Vec<bool>,
    pub displacement_constrained: Vec<bool>,
    /// Coupled stiffness plus exchange over the patch.
    pub a_p: CsrMatrix,
    /// Block-diagonal permeability-weighted mass.
    pub s_p: CsrMatrix,
    pub a_u: CsrMatrix,
    /// (λ + 2μ)-weighted vector mass.
    pub s_u: CsrMatrix,
}

fn local_select(m: &CsrMatrix, dofs: &[usize]) -> CsrMatrix {
    let mut map = vec![None; m.ncols()];
    for (k, &d) in dofs.iter().enumerate() {
        map[d] = Some(k);
    }
    m.select(dofs, &map, dofs.len())
}

/// Restricts the model to the elements of `patch`.
pub fn patch_system(
    mesh: &FineMesh,
    model: &PoroModel,
    layout: &DofLayout,
    constraints: &Constraints,
    patch: &Patch,
) -> Result<PatchSystem> {
    let el = Elements {
        triangles: &patch.triangles,
        fracture_edges: &patch.fracture_edges,
    };
    let sys = assemble_system_on(model, mesh, el)?;

    let mut frac_nodes: Vec<usize> = patch
        .fracture_edges
        .iter()
        .flat_map(|&e| mesh.fracture_edges()[e])
        .collect();
    frac_nodes.sort_unstable();
    frac_nodes.dedup();

    let mut pressure_dofs = Vec::new();
    let mut pressure_block = Vec::new();
    let mut pressure_boundary = Vec::new();
    let mut pressure_node = Vec::new();
    for (i, c) in model.continua.iter().enumerate() {
        let off = layout.pressure_offset(i);
        match c.support {
            Support::Bulk => {
                for (k, &v) in patch.nodes.iter().enumerate() {
                    pressure_dofs.push(off + v);
                    pressure_block.push(i);
                    pressure_boundary.push(patch.on_boundary[k]);
                    pressure_node.push(v);
                }
            }
            Support::Fracture => {
                for &v in &frac_nodes {
                    let k = patch.local_index(v).expect("fracture node inside patch");
                    pressure_dofs.push(off + mesh.fracture_dof(v).unwrap());
                    pressure_block.push(i);
                    pressure_boundary.push(patch.on_boundary[k]);
                    pressure_node.push(v);
                }
            }
        }
    }
    let pressure_constrained = pressure_dofs
        .iter()
        .map(|&d| constraints.is_constrained(d))
        .collect();

    let ou = layout.displacement_offset();
    let mut displacement_dofs = Vec::with_capacity(2 * patch.nodes.len());
    let mut displacement_boundary = Vec::with_capacity(2 * patch.nodes.len());
    for (k, &v) in patch.nodes.iter().enumerate() {
        for c in 0..2 {
            displacement_dofs.push(2 * v + c);
            displacement_boundary.push(patch.on_boundary[k]);
        }
    }
    let displacement_constrained = displacement_dofs
        .iter()
        .map(|&d| constraints.is_constrained(ou + d))
        .collect();

    let a_p = local_select(&sys.coupled_flow(), &pressure_dofs);
    let np = layout.pressure_total();
    let mut s = TripletList::new(np, np);
    for (i, c) in model.continua.iter().enumerate() {
        let o = layout.pressure_offset(i);
        s.add_block(o, o, &permeability_mass(c, mesh, el), 1.0);
    }
    let s_p = local_select(&s.build(), &pressure_dofs);
    let a_u = local_select(&sys.elasticity, &displacement_dofs);
    let s_u = local_select(
        &assemble_vector_mass(mesh, &model.elasticity.p_wave_modulus(), el),
        &displacement_dofs,
    );

    Ok(PatchSystem {
        vertex: patch.vertex,
        pressure_dofs,
        pressure_block,
        pressure_boundary,
        pressure_constrained,
        pressure_node,
        displacement_dofs,
        displacement_boundary,
        displacement_constrained,
        a_p,
        s_p,
        a_u,
        s_u,
    })
}

/// Local solutions with one nodal delta on the patch boundary each.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub vertex: usize,
    /// Local vectors, one per snapshot.
    pub columns: Vec<Vec<f64>>,
    /// Local index of the boundary DOF carrying each delta.
    pub sources: Vec<usize>,
    /// Largest relative interior residual over all snapshots.
    pub max_residual: f64,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Solves `A_II ψ_I = −A_IB δ_b` for every unconstrained boundary DOF `b`.
pub fn local_snapshots(
    vertex: usize,
    a: &CsrMatrix,
    boundary: &[bool],
    constrained: &[bool],
) -> Result<SnapshotSet> {
    let n = a.nrows();
    let interior: Vec<usize> = (0..n).filter(|&k| !boundary[k]).collect();
    let bnd: Vec<usize> = (0..n).filter(|&k| boundary[k]).collect();
    let mut imap = vec![None; n];
    for (k, &d) in interior.iter().enumerate() {
        imap[d] = Some(k);
    }
    let mut bmap = vec![None; n];
    for (k, &d) in bnd.iter().enumerate() {
        bmap[d] = Some(k);
    }
    let sources: Vec<usize> = bnd.iter().copied().filter(|&b| !constrained[b]).collect();
    let lu =
        if interior.is_empty() {
            None
        } else {
            let a_ii = a.select(&interior, &imap, interior.len());
            Some(SparseLu::new(a_ii).map_err(|e| {
                Error::Data(format!("singular local system on patch {vertex}: {e}"))
            })?)
        };
    let a_bi = a.select(&bnd, &imap, interior.len());
    let mut columns = Vec::with_capacity(sources.len());
    let mut max_residual = 0.0f64;
    for &b in &sources {
        let mut col = vec![0.0; n];
        col[b] = 1.0;
        if let Some(lu) = &lu {
            // column b of A_IB is row b of A_BI by symmetry
            let mut rhs = vec![0.0; interior.len()];
            let (idx, vals) = a_bi.row(bmap[b].unwrap());
            for (&j, &v) in idx.iter().zip(vals) {
                rhs[j] = -v;
            }
            let (x, res) = lu.solve(&rhs).map_err(|e| {
                Error::Data(format!("singular local system on patch {vertex}: {e}"))
            })?;
            max_residual = max_residual.max(res);
            for (&d, &v) in interior.iter().zip(&x) {
                col[d] = v;
            }
        }
        columns.push(col);
    }
    Ok(SnapshotSet {
        vertex,
        columns,
        sources,
        max_residual,
    })
}

pub fn compute_pressure_snapshots(ps: &PatchSystem) -> Result<SnapshotSet> {
    local_snapshots(
        ps.vertex,
        &ps.a_p,
        &ps.pressure_boundary,
        &ps.pressure_constrained,
    )
}

pub fn compute_displacement_snapshots(ps: &PatchSystem) -> Result<SnapshotSet> {
    local_snapshots(
        ps.vertex,
        &ps.a_u,
        &ps.displacement_boundary,
        &ps.displacement_constrained,
    )
}

/// Solution of the snapshot-space eigenproblem `Ã φ = λ S̃ φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub vertex: usize,
    /// All eigenvalues of the reduced pencil, ascending.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenvectors as local fine vectors (snapshot combinations).
    pub vectors: Vec<Vec<f64>>,
    /// `‖Ãφ − λS̃φ‖ / ‖S̃φ‖` per retained pair.
    pub residuals: Vec<f64>,
    /// `φᵀ S̃ φ` per retained pair.
    pub s_norms: Vec<f64>,
    /// Snapshot directions dropped as numerically dependent.
    pub filtered: usize,
}

const SNAPSHOT_FILTER: f64 = 1e-12;

/// Projects `a` and `s` onto the snapshot span, removes numerically dependent
/// directions and returns the `keep` smallest eigenpairs.
pub fn spectral_problem(
    vertex: usize,
    a: &CsrMatrix,
    s: &CsrMatrix,
    snaps: &SnapshotSet,
    keep: usize,
) -> Result<SpectralBasis> {
    // scale snapshots to unit S-norm; exact zeros are dropped
    let mut cols = Vec::with_capacity(snaps.len());
    for c in &snaps.columns {
        let nrm = s.quadratic_form(c);
        if nrm > 0.0 {
            let f = 1.0 / nrm.sqrt();
            cols.push(c.iter().map(|v| v * f).collect::<Vec<f64>>());
        }
    }
    let dropped = snaps.len() - cols.len();
    let l = cols.len();
    if l == 0 {
        return Ok(SpectralBasis {
            vertex,
            eigenvalues: vec![],
            vectors: vec![],
            residuals: vec![],
            s_norms: vec![],
            filtered: dropped,
        });
    }
    let a_cols: Vec<Vec<f64>> = cols.iter().map(|c| a.mul_vec(c)).collect();
    let s_cols: Vec<Vec<f64>> = cols.iter().map(|c| s.mul_vec(c)).collect();
    let mut at = vec![0.0; l * l];
    let mut st = vec![0.0; l * l];
    for i in 0..l {
        for j in i..l {
            let av = dot(&cols[i], &a_cols[j]);
            let sv = dot(&cols[i], &s_cols[j]);
            at[i * l + j] = av;
            at[j * l + i] = av;
            st[i * l + j] = sv;
            st[j * l + i] = sv;
        }
    }
    let (sig, v) = symmetric_eigen(l, &st)?;
    let smax = sig[l - 1];
    let kept: Vec<usize> = (0..l)
        .filter(|&k| sig[k] > SNAPSHOT_FILTER * smax)
        .collect();
    let r = kept.len();
    // W = V_k Σ_k^{-1/2}, columns indexed by kept directions
    let w: Vec<Vec<f64>> = kept
        .iter()
        .map(|&k| v[k].iter().map(|x| x / sig[k].sqrt()).collect())
        .collect();
    let mut b = vec![0.0; r * r];
    let aw: Vec<Vec<f64>> = w.iter().map(|wc| mat_vec(&at, l, wc)).collect();
    for i in 0..r {
        for j in i..r {
            let val = dot(&w[i], &aw[j]);
            b[i * r + j] = val;
            b[j * r + i] = val;
        }
    }
    let (lam, y) = symmetric_eigen(r, &b)?;
    let take = keep.min(r);
    let mut vectors = Vec::with_capacity(take);
    let mut residuals = Vec::with_capacity(take);
    let mut s_norms = Vec::with_capacity(take);
    for k in 0..take {
        let mut coef = vec![0.0; l];
        for (wc, &yk) in w.iter().zip(&y[k]) {
            for (c, x) in coef.iter_mut().zip(wc) {
                *c += yk * x;
            }
        }
        let ac = mat_vec(&at, l, &coef);
        let sc = mat_vec(&st, l, &coef);
        let res: Vec<f64> = ac.iter().zip(&sc).map(|(p, q)| p - lam[k] * q).collect();
        residuals.push(crate::sparse::norm2(&res) / crate::sparse::norm2(&sc));
        s_norms.push(dot(&coef, &sc));
        let mut vec_local = vec![0.0; a.nrows()];
        for (c, col) in coef.iter().zip(&cols) {
            for (o, x) in vec_local.iter_mut().zip(col) {
                *o += c * x;
            }
        }
        vectors.push(vec_local);
    }
    Ok(SpectralBasis {
        vertex,
        eigenvalues: lam,
        vectors,
        residuals,
        s_norms,
        filtered: dropped + (l - r),
    })
}

fn mat_vec(m: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], x)).collect()
}

pub fn pressure_spectral_problem(
    ps: &PatchSystem,
    snaps: &SnapshotSet,
    keep: usize,
) -> Result<SpectralBasis> {
    spectral_problem(ps.vertex, &ps.a_p, &ps.s_p, snaps, keep)
}

pub fn displacement_spectral_problem(
    ps: &PatchSystem,
    snaps: &SnapshotSet,
    keep: usize,
) -> Result<SpectralBasis> {
    spectral_problem(ps.vertex, &ps.a_u, &ps.s_u, snaps, keep)
}
