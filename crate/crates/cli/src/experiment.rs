//! Scenario instantiation and the experiment pipelines behind `run`, `fine`
//! and `basis`.
//!
//! All files are written by the calling thread after the numerical work, and
//! nothing time-dependent goes into them, so two runs of the same scenario
//! produce identical bytes.

use std::collections::BTreeMap;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use fracporo::analysis::{
    export_vtk, format_time_series, state_errors, write_error_table, ErrorReport, ErrorRow,
    StateErrors, TimeSeries,
};
use fracporo::assembly::{
    apply_boundary_conditions, ContinuumSpec, DofLayout, ElasticitySpec, ExchangeSpec, PoroModel,
    Support,
};
use fracporo::fine_solver::{self, FineProblem, FineTrajectory, NoForcing};
use fracporo::fractional::TimeGrid;
use fracporo::gmsfem::{
    build_multiscale_space, coarse_run, compute_offline, downscale, write_matrix_market,
    MultiscaleSpace, OfflineBases,
};
use fracporo::mesh::{load_fine_mesh, structured_mesh, CoarseGrid, FineMesh, Rect};
use serde::Serialize;

use crate::scenario::{Coefficient, Eta, MeshSource, Scenario};
use crate::synthetic::generate_synthetic_field;
use crate::{CliError, CliResult, Stage};

/// A scenario turned into meshes and coefficient arrays.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mesh: Arc<FineMesh>,
    pub model: PoroModel,
    pub coarse: CoarseGrid,
    pub problem: FineProblem,
    pub fields: BTreeMap<String, Vec<f64>>,
}

fn build_mesh(source: &MeshSource) -> CliResult<FineMesh> {
    match source {
        MeshSource::File(p) => load_fine_mesh(p).stage("loading the fine mesh"),
        MeshSource::Structured {
            origin,
            extents,
            cells,
            fractures,
        } => {
            let rect = Rect::new(
                origin[0],
                origin[1],
                origin[0] + extents[0],
                origin[1] + extents[1],
            );
            structured_mesh(rect, cells[0], cells[1], fractures)
                .stage("building the structured mesh")
        }
    }
}

fn coefficient(c: &Coefficient, len: usize, fields: &BTreeMap<String, Vec<f64>>) -> Vec<f64> {
    match c {
        Coefficient::Constant(v) => vec![*v; len],
        Coefficient::Field { base, field } => fields[field].iter().map(|v| base * v).collect(),
    }
}

/// Builds the mesh, generates the synthetic fields and assembles the model
/// description of a scenario.
pub fn instantiate(sc: &Scenario) -> CliResult<Instance> {
    let mesh = build_mesh(&sc.mesh)?;
    let nt = mesh.triangle_count();
    let ne = mesh.fracture_edges().len();
    let fields: BTreeMap<String, Vec<f64>> = sc
        .fields
        .iter()
        .map(|(name, d)| {
            let seed = sc.seed.wrapping_add(d.seed_offset);
            (
                name.clone(),
                generate_synthetic_field(seed, &mesh, d.contrast, d.style, d.correlation_length),
            )
        })
        .collect();
    let continua: Vec<ContinuumSpec> = sc
        .continua
        .iter()
        .map(|c| {
            let spec = match c.support {
                Support::Bulk => ContinuumSpec::bulk(
                    c.name.clone(),
                    c.storage,
                    coefficient(&c.permeability, nt, &fields),
                    c.biot,
                ),
                Support::Fracture => {
                    let mut s = ContinuumSpec::fracture(
                        c.name.clone(),
                        c.storage,
                        coefficient(&c.permeability, ne, &fields),
                    );
                    s.biot = c.biot;
                    s
                }
            };
            spec.with_orders(c.alpha, c.beta)
        })
        .collect();
    let exchanges = sc
        .exchanges
        .iter()
        .map(|ex| {
            let on_edges = continua[ex.first].is_fracture() || continua[ex.second].is_fracture();
            let eta = match ex.eta {
                Eta::Constant(v) => vec![v; if on_edges { ne } else { nt }],
                Eta::PermeabilityMultiple { factor, continuum } => continua[continuum]
                    .permeability
                    .iter()
                    .map(|k| factor * k)
                    .collect(),
            };
            ExchangeSpec::new(ex.first, ex.second, eta)
        })
        .collect();
    let model = PoroModel {
        continua,
        exchanges,
        elasticity: ElasticitySpec {
            young: coefficient(&sc.young, nt, &fields),
            poisson: sc.poisson,
        },
    };
    let coarse = CoarseGrid::new(mesh.bounds(), sc.coarse[0], sc.coarse[1])
        .stage("building the coarse grid")?;
    let mesh = Arc::new(mesh);
    let problem = FineProblem {
        mesh: mesh.clone(),
        model: model.clone(),
        boundary: sc.boundary.clone(),
        grid: TimeGrid::new(sc.final_time, sc.steps).stage("building the time grid")?,
        initial_pressure: sc.initial_pressure.clone(),
        forcing: Arc::new(NoForcing),
    };
    Ok(Instance {
        mesh,
        model,
        coarse,
        problem,
        fields,
    })
}

/// Per-case label used in file names: `base`, or `alpha<value>` in a sweep.
pub fn case_label(order: Option<f64>) -> String {
    match order {
        None => "base".into(),
        Some(a) => format!("alpha{a}"),
    }
}

/// Offline stage for a scenario: the spectral bases at the largest basis count.
pub fn offline(inst: &Instance, max_m: usize) -> CliResult<(DofLayout, OfflineBases)> {
    let layout = DofLayout::new(&inst.mesh, &inst.model.continua);
    let cons = apply_boundary_conditions(&inst.model, &layout, &inst.mesh, &inst.problem.boundary)
        .stage("applying boundary conditions")?;
    if cons.values().iter().any(|&v| v != 0.0) {
        return Err(CliError::Scenario(
            "multiscale runs need homogeneous Dirichlet data (the coarse space vanishes on Dirichlet nodes)".into(),
        ));
    }
    let off = compute_offline(&inst.mesh, &inst.model, &layout, &cons, &inst.coarse, max_m)
        .stage("computing multiscale basis functions")?;
    Ok((layout, off))
}

/// Results for one set of fractional orders.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub label: String,
    pub order: Option<f64>,
    /// Final-time table over the selected continua.
    pub report: ErrorReport,
    /// Final-time errors over every continuum, one entry per basis count.
    pub all_fields: Vec<StateErrors>,
    /// Per-step errors, one series per basis count.
    pub series: Vec<TimeSeries>,
    pub fine_final: Vec<f64>,
}

/// Everything a `run` produced.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub cases: Vec<CaseResult>,
    /// `(M, DOF_H, effective coarse size)`.
    pub dofs: Vec<(usize, usize, usize)>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    mesh: MeshInfo,
    coarse_grid: [usize; 2],
    final_time: f64,
    steps: usize,
    continua: Vec<ContinuumInfo>,
    basis_counts: &'a [usize],
    dofs: Vec<DofInfo>,
    cases: Vec<CaseInfo>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct MeshInfo {
    nodes: usize,
    triangles: usize,
    fracture_edges: usize,
}

#[derive(Serialize)]
struct ContinuumInfo {
    name: String,
    support: &'static str,
    dofs: usize,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize)]
struct DofInfo {
    m: usize,
    dof_h: usize,
    effective: usize,
}

#[derive(Serialize)]
struct CaseInfo {
    label: String,
    alpha: Option<f64>,
    final_errors: Vec<RowInfo>,
}

#[derive(Serialize)]
struct RowInfo {
    m: usize,
    e_l2_u: f64,
    e_h1_u: f64,
    e_l2_p: Vec<f64>,
    e_h1_p: Vec<f64>,
}

fn manifest<'a>(
    sc: &'a Scenario,
    inst: &Instance,
    command: &'a str,
    dofs: &[(usize, usize, usize)],
    cases: &[CaseResult],
    files: &[PathBuf],
    out: &Path,
) -> Manifest<'a> {
    Manifest {
        schema_version: crate::scenario::SCHEMA_VERSION,
        command,
        seed: sc.seed,
        mesh: MeshInfo {
            nodes: inst.mesh.node_count(),
            triangles: inst.mesh.triangle_count(),
            fracture_edges: inst.mesh.fracture_edges().len(),
        },
        coarse_grid: sc.coarse,
        final_time: sc.final_time,
        steps: sc.steps,
        continua: inst
            .model
            .continua
            .iter()
            .map(|c| ContinuumInfo {
                name: c.name.clone(),
                support: if c.is_fracture() { "fracture" } else { "bulk" },
                dofs: c.dof_count(&inst.mesh),
                alpha: c.alpha,
                beta: c.beta,
            })
            .collect(),
        basis_counts: &sc.basis_counts,
        dofs: dofs
            .iter()
            .map(|&(m, dof_h, effective)| DofInfo {
                m,
                dof_h,
                effective,
            })
            .collect(),
        cases: cases
            .iter()
            .map(|c| CaseInfo {
                label: c.label.clone(),
                alpha: c.order,
                final_errors: c
                    .report
                    .rows
                    .iter()
                    .map(|r| RowInfo {
                        m: r.m,
                        e_l2_u: r.errors.displacement.l2,
                        e_h1_u: r.errors.displacement.h1,
                        e_l2_p: r.errors.pressures.iter().map(|p| p.l2).collect(),
                        e_h1_p: r.errors.pressures.iter().map(|p| p.h1).collect(),
                    })
                    .collect(),
            })
            .collect(),
        files: files
            .iter()
            .map(|f| f.strip_prefix(out).unwrap_or(f).display().to_string())
            .collect(),
    }
}

fn write_manifest(m: &Manifest<'_>, out: &Path) -> CliResult<PathBuf> {
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

fn field_names(inst: &Instance) -> (Vec<String>, Vec<Support>) {
    (
        inst.model.continua.iter().map(|c| c.name.clone()).collect(),
        inst.model.continua.iter().map(|c| c.support).collect(),
    )
}

fn export_states(
    inst: &Instance,
    layout: &DofLayout,
    states: &[(usize, &[f64])],
    prefix: &str,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> CliResult<()> {
    let (names, supports) = field_names(inst);
    for &(n, state) in states {
        let path = out.join(format!("{prefix}_n{n}.vtk"));
        let title = format!("{prefix} step {n} t={}", inst.problem.grid.time(n));
        export_vtk(&inst.mesh, layout, &names, &supports, state, &title, &path)
            .stage("writing VTK output")?;
        files.push(path);
    }
    Ok(())
}

fn fine_run(inst: &Instance) -> CliResult<(FineTrajectory, fracporo::fine_solver::BlockSystem)> {
    let start = Instant::now();
    let r = fine_solver::run(&inst.problem).stage("fine reference solve")?;
    log(&format!(
        "fine solve: {:.2} s",
        start.elapsed().as_secs_f64()
    ));
    Ok(r)
}

fn log(msg: &str) {
    if std::env::var_os("FRACPORO_QUIET").is_none() {
        eprintln!("[fracporo] {msg}");
    }
}

fn prepare_out(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

/// Runs one set of fractional orders against precomputed spaces.
pub fn run_case(
    inst: &Instance,
    spaces: &[MultiscaleSpace],
    error_continua: &[usize],
    order: Option<f64>,
) -> CliResult<(CaseResult, FineTrajectory, Vec<Vec<Vec<f64>>>)> {
    let label = case_label(order);
    let (traj, system) = fine_run(inst)?;
    let fine = system.matrices();
    let orders = fine_solver::orders_of(&inst.model);
    let all: Vec<usize> = (0..inst.model.continua.len()).collect();
    let mut report = ErrorReport::default();
    let mut all_fields = Vec::new();
    let mut series = Vec::new();
    let mut downscaled = Vec::new();
    for ms in spaces {
        let start = Instant::now();
        let ct = coarse_run(fine, ms, &orders, traj.grid, &traj.states[0]).stage("coarse solve")?;
        let xs: Vec<Vec<f64>> = ct
            .states
            .iter()
            .map(|y| downscale(ms, y))
            .collect::<Result<_, _>>()
            .stage("downscaling")?;
        let last = traj.states.len() - 1;
        let errors = state_errors(fine, &traj.states[last], &xs[last], error_continua)
            .stage("error evaluation")?;
        report.rows.push(ErrorRow {
            m: ms.m,
            dof_h: ms.dof_h(),
            errors,
        });
        all_fields.push(
            state_errors(fine, &traj.states[last], &xs[last], &all).stage("error evaluation")?,
        );
        let mut ts = TimeSeries::default();
        for n in 1..=last {
            let e = state_errors(fine, &traj.states[n], &xs[n], error_continua)
                .stage("error evaluation")?;
            ts.rows.push((n, traj.grid.time(n), e));
        }
        series.push(ts);
        log(&format!(
            "{label} M={}: coarse solve {:.2} s",
            ms.m,
            start.elapsed().as_secs_f64()
        ));
        downscaled.push(xs);
    }
    let fine_final = traj.states.last().cloned().unwrap_or_default();
    Ok((
        CaseResult {
            label,
            order,
            report,
            all_fields,
            series,
            fine_final,
        },
        traj,
        downscaled,
    ))
}

/// Offline bases at the largest basis count, then spaces for each count.
pub fn spaces_for(
    inst: &Instance,
    counts: &[usize],
) -> CliResult<(DofLayout, OfflineBases, Vec<MultiscaleSpace>)> {
    let start = Instant::now();
    let max_m = *counts
        .iter()
        .max()
        .ok_or_else(|| CliError::Scenario("no basis counts".into()))?;
    let (layout, off) = offline(inst, max_m)?;
    let spaces = counts
        .iter()
        .map(|&m| build_multiscale_space(&off, &layout, m))
        .collect::<Result<Vec<_>, _>>()
        .stage("building multiscale spaces")?;
    log(&format!(
        "offline stage: {:.2} s",
        start.elapsed().as_secs_f64()
    ));
    Ok((layout, off, spaces))
}

/// Full experiment: fine reference and multiscale sweep for every case, with
/// error tables, time series, VTK snapshots and a manifest under `out`.
pub fn run_experiment(sc: &Scenario, out: &Path) -> CliResult<ExperimentSummary> {
    prepare_out(out)?;
    let base = instantiate(sc)?;
    let (layout, _off, spaces) = spaces_for(&base, &sc.basis_counts)?;
    let dofs: Vec<_> = spaces
        .iter()
        .map(|s| (s.m, s.dof_h(), s.effective_dofs()))
        .collect();
    let orders: Vec<Option<f64>> = if sc.alpha_sweep.is_empty() {
        vec![None]
    } else {
        sc.alpha_sweep.iter().map(|&a| Some(a)).collect()
    };
    let mut files = Vec::new();
    let mut cases = Vec::new();
    for order in orders {
        let inst = match order {
            None => base.clone(),
            Some(a) => {
                let mut i = base.clone();
                for c in &mut i.model.continua {
                    c.alpha = a;
                    c.beta = a;
                }
                i.problem.model = i.model.clone();
                i
            }
        };
        let (case, traj, downscaled) = run_case(&inst, &spaces, &sc.error_continua, order)?;
        let table = out.join(format!("errors_{}.csv", case.label));
        write_error_table(&case.report, &table).stage("writing the error table")?;
        files.push(table);
        for (ms, ts) in spaces.iter().zip(&case.series) {
            let path = out.join(format!("timeseries_{}_M{}.csv", case.label, ms.m));
            std::fs::write(&path, format_time_series(ts))?;
            files.push(path);
        }
        let fine_states: Vec<(usize, &[f64])> = sc
            .export_steps
            .iter()
            .map(|&n| (n, traj.states[n].as_slice()))
            .collect();
        export_states(
            &inst,
            &layout,
            &fine_states,
            &format!("fine_{}", case.label),
            out,
            &mut files,
        )?;
        let last = downscaled.last().expect("at least one basis count");
        let ms_states: Vec<(usize, &[f64])> = sc
            .export_steps
            .iter()
            .map(|&n| (n, last[n].as_slice()))
            .collect();
        let prefix = format!("ms_{}_M{}", case.label, sc.max_basis_count());
        export_states(&inst, &layout, &ms_states, &prefix, out, &mut files)?;
        cases.push(case);
    }
    let m = manifest(sc, &base, "run", &dofs, &cases, &files, out);
    files.push(write_manifest(&m, out)?);
    Ok(ExperimentSummary { cases, dofs, files })
}

/// Fine reference only, with VTK snapshots at the export steps.
pub fn run_fine(sc: &Scenario, out: &Path) -> CliResult<Vec<PathBuf>> {
    prepare_out(out)?;
    let inst = instantiate(sc)?;
    let (traj, _) = fine_run(&inst)?;
    let mut files = Vec::new();
    let states: Vec<(usize, &[f64])> = sc
        .export_steps
        .iter()
        .map(|&n| (n, traj.states[n].as_slice()))
        .collect();
    export_states(&inst, &traj.layout, &states, "fine", out, &mut files)?;
    let m = manifest(sc, &inst, "fine", &[], &[], &files, out);
    files.push(write_manifest(&m, out)?);
    Ok(files)
}

/// Multiscale spaces for every basis count: prolongation matrices in Matrix
/// Market format plus the local spectra of every patch.
pub fn run_basis(sc: &Scenario, out: &Path) -> CliResult<Vec<PathBuf>> {
    prepare_out(out)?;
    let inst = instantiate(sc)?;
    let (_, off, spaces) = spaces_for(&inst, &sc.basis_counts)?;
    let mut files = Vec::new();
    for ms in &spaces {
        let path = out.join(format!("basis_M{}.mtx", ms.m));
        let mut w = BufWriter::new(std::fs::File::create(&path)?);
        let comment = format!(
            "multiscale prolongation, M={} DOF_H={} rows={} (orthonormalized per vertex and field)",
            ms.m,
            ms.dof_h(),
            ms.effective_dofs()
        );
        write_matrix_market(&ms.prolongation(), &mut w, &comment).stage("writing the basis")?;
        files.push(path);
    }
    let path = out.join("spectra.csv");
    let mut text = String::from("vertex,field,index,eigenvalue\n");
    for l in 0..off.patches.len() {
        for (field, basis) in [
            ("pressure", &off.pressure[l]),
            ("displacement", &off.displacement[l]),
        ] {
            for (k, ev) in basis.eigenvalues.iter().take(off.max_m).enumerate() {
                text.push_str(&format!("{l},{field},{k},{ev:e}\n"));
            }
        }
    }
    std::fs::write(&path, text)?;
    files.push(path);
    let dofs: Vec<_> = spaces
        .iter()
        .map(|s| (s.m, s.dof_h(), s.effective_dofs()))
        .collect();
    let m = manifest(sc, &inst, "basis", &dofs, &[], &files, out);
    files.push(write_manifest(&m, out)?);
    Ok(files)
}
