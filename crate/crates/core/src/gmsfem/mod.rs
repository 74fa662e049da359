//! Generalized multiscale finite elements: local snapshot spaces on coarse
//! vertex patches, spectral selection, partition-of-unity gluing and the
//! reduced L1 time stepping on the resulting coarse space.

mod local;
mod space;

pub use local::{
    compute_displacement_snapshots, compute_pressure_snapshots, displacement_spectral_problem,
    local_snapshots, patch_system, pressure_spectral_problem, spectral_problem, PatchSystem,
    SnapshotSet, SpectralBasis,
};
pub use space::{
    assemble_coarse_system, build_multiscale_space, coarse_run, downscale, write_matrix_market,
    CoarseTrajectory, MultiscaleSpace,
};

use rayon::prelude::*;

use crate::assembly::{Constraints, DofLayout, PoroModel};
use crate::error::{Error, Result};
use crate::mesh::{
    build_patches, partition_of_unity, CoarseGrid, FineMesh, PartitionOfUnity, Patch,
};

/// Local DOF lists kept after the offline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDofs {
    pub pressure_dofs: Vec<usize>,
    pub pressure_block: Vec<usize>,
    pub pressure_node: Vec<usize>,
    pub displacement_dofs: Vec<usize>,
    pub interior: bool,
}

/// Diagnostics of one patch's offline work.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchReport {
    pub vertex: usize,
    pub pressure_snapshots: usize,
    pub displacement_snapshots: usize,
    pub max_snapshot_residual: f64,
}

/// Spectral bases of every patch, computed once for the largest basis count.
#[derive(Debug, Clone)]
pub struct OfflineBases {
    pub grid: CoarseGrid,
    pub patches: Vec<Patch>,
    pub pou: PartitionOfUnity,
    pub dofs: Vec<PatchDofs>,
    pub pressure: Vec<SpectralBasis>,
    pub displacement: Vec<SpectralBasis>,
    pub reports: Vec<PatchReport>,
    pub max_m: usize,
}

/// Builds patches and, for each (in parallel), snapshots and spectral bases
/// keeping `max_m` eigenvectors. Results are ordered by coarse vertex.
pub fn compute_offline(
    mesh: &FineMesh,
    model: &PoroModel,
    layout: &DofLayout,
    constraints: &Constraints,
    grid: &CoarseGrid,
    max_m: usize,
) -> Result<OfflineBases> {
    if max_m == 0 {
        return Err(Error::Config("basis count must be at least 1".into()));
    }
    let patches = build_patches(grid, mesh)?;
    let pou = partition_of_unity(grid, mesh, &patches);
    let per_patch: Vec<_> = patches
        .par_iter()
        .map(|patch| -> Result<_> {
            let ps = patch_system(mesh, model, layout, constraints, patch)?;
            let psnap = compute_pressure_snapshots(&ps)?;
            let usnap = compute_displacement_snapshots(&ps)?;
            let pb = pressure_spectral_problem(&ps, &psnap, max_m)?;
            let ub = displacement_spectral_problem(&ps, &usnap, max_m)?;
            let interior = !patch
                .boundary_nodes()
                .any(|v| !mesh.boundary_tags(v).is_empty());
            let dofs = PatchDofs {
                pressure_dofs: ps.pressure_dofs,
                pressure_block: ps.pressure_block,
                pressure_node: ps.pressure_node,
                displacement_dofs: ps.displacement_dofs,
                interior,
            };
            let report = PatchReport {
                vertex: patch.vertex,
                pressure_snapshots: psnap.len(),
                displacement_snapshots: usnap.len(),
                max_snapshot_residual: psnap.max_residual.max(usnap.max_residual),
            };
            Ok((dofs, pb, ub, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dofs = Vec::with_capacity(patches.len());
    let mut pressure = Vec::with_capacity(patches.len());
    let mut displacement = Vec::with_capacity(patches.len());
    let mut reports = Vec::with_capacity(patches.len());
    for (d, p, u, r) in per_patch {
        dofs.push(d);
        pressure.push(p);
        displacement.push(u);
        reports.push(r);
    }
    Ok(OfflineBases {
        grid: grid.clone(),
        patches,
        pou,
        dofs,
        pressure,
        displacement,
        reports,
        max_m,
    })
}

#[cfg(test)]
mod tests;
