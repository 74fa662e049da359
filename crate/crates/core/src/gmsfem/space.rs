use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use super::OfflineBases;
use crate::assembly::{Constraints, DofLayout, ExchangeBlocks, SystemMatrices};
use crate::error::{Error, Result};
use crate::fine_solver::{BlockSystem, Integrator, NoForcing, RunStats};
use crate::fractional::TimeGrid;
use crate::linalg::{symmetric_eigen, SparseLu};
use crate::sparse::{dot, CsrMatrix, TripletList};

const GROUP_RANK_TOL: f64 = 1e-12;
/// A row is dropped when its distance to the span of the earlier rows, squared
/// and relative to its own squared norm, falls below this.
const GLOBAL_RANK_TOL: f64 = 1e-4;

/// Indices of a maximal linearly independent subset of the rows of `e`,
/// chosen greedily in row order.
///
/// Runs an incremental Cholesky factorization of the Gram matrix `E Eᵀ`,
/// which is banded in the vertex ordering. A row whose pivot collapses is
/// skipped. Groups of different vertices can be dependent: restricted to a
/// straight fracture, hats of vertices on either side of it are proportional.
pub(crate) fn independent_rows(e: &CsrMatrix) -> Vec<usize> {
    let n = e.nrows();
    let g = e.matmul(&e.transpose());
    let b = g.iter().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0);
    // l[i * (b + 1) + (i - j)] holds L[i][j] for i - b <= j <= i
    let w = b + 1;
    let mut l = vec![0.0; n * w];
    let mut kept = Vec::with_capacity(n);
    let mut is_kept = vec![false; n];
    for i in 0..n {
        let lo = i.saturating_sub(b);
        let mut gi = vec![0.0; i - lo + 1];
        let (cols, vals) = g.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j >= lo && j <= i {
                gi[j - lo] = v;
            }
        }
        for j in lo..i {
            if !is_kept[j] {
                continue;
            }
            let jlo = j.saturating_sub(b).max(lo);
            let mut s = gi[j - lo];
            for k in jlo..j {
                s -= l[i * w + (i - k)] * l[j * w + (j - k)];
            }
            l[i * w + (i - j)] = s / l[j * w];
        }
        let mut d = gi[i - lo];
        for k in lo..i {
            d -= l[i * w + (i - k)].powi(2);
        }
        if gi[i - lo] > 0.0 && d > GLOBAL_RANK_TOL * gi[i - lo] {
            l[i * w] = d.sqrt();
            is_kept[i] = true;
            kept.push(i);
        } else {
            l[i * w..(i + 1) * w].fill(0.0);
        }
    }
    kept
}

/// Coarse space for one basis count `M`.
///
/// Fields are the pressure continua in layout order followed by the
/// displacement. `nominal[f]` holds one row per (coarse vertex, eigenvector):
/// the partition-of-unity weighted eigenvector restricted to field `f`, so the
/// nominal dimension is `(fields) · M · N_v`. Rows of a (vertex, field) group
/// can be linearly dependent (a patch without fractures has only zero
/// fracture rows), so the solver works with `effective[f] = transforms[f] ·
/// nominal[f]`: rows orthonormal within each group, with rows that depend
/// on earlier groups removed, so the coarse matrices stay nonsingular.
#[derive(Debug, Clone)]
pub struct MultiscaleSpace {
    pub m: usize,
    pub vertices: usize,
    pub fine_layout: DofLayout,
    pub coarse_layout: DofLayout,
    pub nominal: Vec<CsrMatrix>,
    pub effective: Vec<CsrMatrix>,
    pub transforms: Vec<CsrMatrix>,
}

impl MultiscaleSpace {
    pub fn fields(&self) -> usize {
        self.nominal.len()
    }

    /// Nominal coarse dimension `DOF_H`.
    pub fn dof_h(&self) -> usize {
        self.nominal.iter().map(|r| r.nrows()).sum()
    }

    /// Dimension of the coarse system actually solved.
    pub fn effective_dofs(&self) -> usize {
        self.coarse_layout.total()
    }

    fn fine_range(&self, f: usize) -> std::ops::Range<usize> {
        if f < self.fine_layout.continua() {
            self.fine_layout.pressure_range(f)
        } else {
            self.fine_layout.displacement_range()
        }
    }

    fn coarse_range(&self, f: usize) -> std::ops::Range<usize> {
        if f < self.coarse_layout.continua() {
            self.coarse_layout.pressure_range(f)
        } else {
            self.coarse_layout.displacement_range()
        }
    }

    /// Effective prolongation as one block-diagonal matrix (coarse × fine).
    pub fn prolongation(&self) -> CsrMatrix {
        let mut t = TripletList::new(self.coarse_layout.total(), self.fine_layout.total());
        for f in 0..self.fields() {
            t.add_block(
                self.coarse_range(f).start,
                self.fine_range(f).start,
                &self.effective[f],
                1.0,
            );
        }
        t.build()
    }

    /// Coordinates of an effective coarse vector in the nominal basis.
    pub fn nominal_coordinates(&self, y: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dof_h());
        for f in 0..self.fields() {
            out.extend(self.transforms[f].mul_transpose_vec(&y[self.coarse_range(f)]));
        }
        out
    }

    /// Fine vector `Σ_f R_fᵀ y_f` for nominal coordinates.
    pub fn downscale_nominal(&self, y_nominal: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.fine_layout.total()];
        let mut start = 0;
        for f in 0..self.fields() {
            let n = self.nominal[f].nrows();
            let part = self.nominal[f].mul_transpose_vec(&y_nominal[start..start + n]);
            x[self.fine_range(f)].copy_from_slice(&part);
            start += n;
        }
        x
    }
}

/// Glues the first `m` eigenvectors of every patch with the partition of unity.
pub fn build_multiscale_space(
    off: &OfflineBases,
    fine_layout: &DofLayout,
    m: usize,
) -> Result<MultiscaleSpace> {
    if m == 0 || m > off.max_m {
        return Err(Error::Config(format!(
            "basis count {m} outside 1..={} computed offline",
            off.max_m
        )));
    }
    let nv = off.patches.len();
    for l in 0..nv {
        let (np, nu) = (
            off.pressure[l].vectors.len(),
            off.displacement[l].vectors.len(),
        );
        if np < m || nu < m {
            return Err(Error::Config(format!(
                "basis count {m} exceeds the eigenpairs available on patch {l} (pressure {np}, displacement {nu})"
            )));
        }
    }
    let npf = fine_layout.continua();
    let mut nominal = Vec::with_capacity(npf + 1);
    let mut effective = Vec::with_capacity(npf + 1);
    let mut transforms = Vec::with_capacity(npf + 1);
    let mut eff_sizes = Vec::with_capacity(npf + 1);

    for f in 0..=npf {
        let is_disp = f == npf;
        let ncols = if is_disp {
            fine_layout.displacement_size()
        } else {
            fine_layout.pressure_size(f)
        };
        let col_off = if is_disp {
            0
        } else {
            fine_layout.pressure_offset(f)
        };
        let mut nom_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nv * m);
        let mut eff_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut tr = Vec::new();
        for l in 0..nv {
            let patch = &off.patches[l];
            let chi = off.pou.patch_values(l);
            let dofs = &off.dofs[l];
            // local positions belonging to this field, with global column and χ
            let sel: Vec<(usize, usize, f64)> = if is_disp {
                dofs.displacement_dofs
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| (k, d, chi[k / 2]))
                    .collect()
            } else {
                dofs.pressure_dofs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| dofs.pressure_block[*k] == f)
                    .map(|(k, &d)| {
                        (
                            k,
                            d - col_off,
                            chi[patch.local_index(dofs.pressure_node[k]).unwrap()],
                        )
                    })
                    .collect()
            };
            let basis = if is_disp {
                &off.displacement[l]
            } else {
                &off.pressure[l]
            };
            let group: Vec<Vec<f64>> = (0..m)
                .map(|j| {
                    sel.iter()
                        .map(|&(k, _, c)| c * basis.vectors[j][k])
                        .collect()
                })
                .collect();
            for g in &group {
                nom_rows.push(
                    sel.iter()
                        .zip(g)
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(&(_, col, _), &v)| (col, v))
                        .collect(),
                );
            }
            // orthonormal basis of the group's row span
            let mut gram = vec![0.0; m * m];
            for a in 0..m {
                for b in a..m {
                    let v = dot(&group[a], &group[b]);
                    gram[a * m + b] = v;
                    gram[b * m + a] = v;
                }
            }
            let (lam, u) = symmetric_eigen(m, &gram)?;
            let lmax = lam[m - 1];
            for k in (0..m).rev() {
                if !(lmax > 0.0 && lam[k] > GROUP_RANK_TOL * lmax) {
                    continue;
                }
                let s = 1.0 / lam[k].sqrt();
                let coef: Vec<f64> = u[k].iter().map(|x| x * s).collect();
                let mut row = vec![0.0; sel.len()];
                for (c, g) in coef.iter().zip(&group) {
                    for (r, v) in row.iter_mut().zip(g) {
                        *r += c * v;
                    }
                }
                let r_index = eff_rows.len();
                eff_rows.push(
                    sel.iter()
                        .zip(&row)
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(&(_, col, _), &v)| (col, v))
                        .collect(),
                );
                for (j, &c) in coef.iter().enumerate() {
                    tr.push((r_index, l * m + j, c));
                }
            }
        }
        let all = CsrMatrix::from_rows(ncols, &eff_rows);
        let keep = independent_rows(&all);
        let mut new_index = vec![None; eff_rows.len()];
        for (k, &r) in keep.iter().enumerate() {
            new_index[r] = Some(k);
        }
        let tr: Vec<_> = tr
            .into_iter()
            .filter_map(|(r, c, v)| new_index[r].map(|k| (k, c, v)))
            .collect();
        let eff_rows: Vec<_> = keep
            .iter()
            .map(|&r| std::mem::take(&mut eff_rows[r]))
            .collect();
        eff_sizes.push(eff_rows.len());
        transforms.push(CsrMatrix::from_triplets(eff_rows.len(), nv * m, &tr));
        nominal.push(CsrMatrix::from_rows(ncols, &nom_rows));
        effective.push(CsrMatrix::from_rows(ncols, &eff_rows));
    }
    let disp = eff_sizes.pop().unwrap();
    let coarse_layout = DofLayout::from_sizes(eff_sizes, disp);
    Ok(MultiscaleSpace {
        m,
        vertices: nv,
        fine_layout: fine_layout.clone(),
        coarse_layout,
        nominal,
        effective,
        transforms,
    })
}

/// Galerkin projection `R K Rᵀ` of every fine matrix.
pub fn assemble_coarse_system(
    fine: &SystemMatrices,
    ms: &MultiscaleSpace,
) -> Result<SystemMatrices> {
    if fine.layout != ms.fine_layout {
        return Err(Error::Contract(
            "fine matrices and multiscale space use different layouts".into(),
        ));
    }
    let npf = fine.layout.continua();
    let r = &ms.effective;
    let ru = &r[npf];
    let stiffness = (0..npf)
        .map(|i| fine.stiffness[i].project(&r[i], &r[i]))
        .collect();
    let mass = (0..npf)
        .map(|i| fine.mass[i].project(&r[i], &r[i]))
        .collect();
    let plain_mass = (0..npf)
        .map(|i| fine.plain_mass[i].project(&r[i], &r[i]))
        .collect();
    let coupling = (0..npf)
        .map(|i| fine.coupling[i].project(&r[i], ru))
        .collect();
    let exchange = fine
        .exchange
        .iter()
        .map(|ex| ExchangeBlocks {
            first: ex.first,
            second: ex.second,
            diag_first: ex.diag_first.project(&r[ex.first], &r[ex.first]),
            diag_second: ex.diag_second.project(&r[ex.second], &r[ex.second]),
            cross: ex.cross.project(&r[ex.first], &r[ex.second]),
        })
        .collect();
    let elasticity = fine.elasticity.project(ru, ru);
    Ok(SystemMatrices {
        layout: ms.coarse_layout.clone(),
        stiffness,
        mass,
        plain_mass,
        coupling,
        exchange,
        elasticity,
    })
}

/// Coarse run: every level as an effective coarse vector.
#[derive(Debug, Clone)]
pub struct CoarseTrajectory {
    pub layout: DofLayout,
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
    pub stats: RunStats,
}

/// Runs the reduced model from the L2 projection of the fine initial
/// pressures. The coarse displacement starts from the coarse elastostatic
/// solution.
pub fn coarse_run(
    fine: &SystemMatrices,
    ms: &MultiscaleSpace,
    orders: &[(f64, f64)],
    grid: TimeGrid,
    fine_initial: &[f64],
) -> Result<CoarseTrajectory> {
    let start = Instant::now();
    let coarse = assemble_coarse_system(fine, ms)?;
    let cl = coarse.layout.clone();
    let mut p0 = vec![0.0; cl.pressure_total()];
    for i in 0..cl.continua() {
        if cl.pressure_size(i) == 0 {
            continue;
        }
        let r = &ms.effective[i];
        let mp = fine.plain_mass[i].mul_vec(&fine_initial[fine.layout.pressure_range(i)]);
        let b = r.mul_vec(&mp);
        let lu = SparseLu::new(coarse.plain_mass[i].clone())?;
        let (x, _) = lu.solve(&b)?;
        p0[cl.pressure_range(i)].copy_from_slice(&x);
    }
    let system = BlockSystem::new(coarse, orders, &grid, Constraints::none(cl.total()))?;
    let mut integ = Integrator::new(system, grid, Arc::new(NoForcing), &p0)?;
    let setup = start.elapsed().as_secs_f64();
    integ.run()?;
    let (_, history, mut stats) = integ.into_parts();
    stats.setup_seconds = setup;
    Ok(CoarseTrajectory {
        layout: cl,
        grid,
        states: history.levels().to_vec(),
        stats,
    })
}

/// Fine-grid fields `R_fᵀ y_f` of an effective coarse vector.
pub fn downscale(ms: &MultiscaleSpace, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != ms.coarse_layout.total() {
        return Err(Error::Contract(format!(
            "coarse vector of length {} for space of size {}",
            y.len(),
            ms.coarse_layout.total()
        )));
    }
    let mut x = vec![0.0; ms.fine_layout.total()];
    for f in 0..ms.fields() {
        let part = ms.effective[f].mul_transpose_vec(&y[ms.coarse_range(f)]);
        x[ms.fine_range(f)].copy_from_slice(&part);
    }
    Ok(x)
}

/// Writes a sparse matrix in Matrix Market coordinate format (1-based).
pub fn write_matrix_market(m: &CsrMatrix, out: &mut impl Write, comment: &str) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    for line in comment.lines() {
        writeln!(out, "% {line}")?;
    }
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.iter() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
