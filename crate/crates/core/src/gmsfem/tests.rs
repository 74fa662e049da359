use std::sync::Arc;

use super::*;
use crate::assembly::{
    apply_boundary_conditions, assemble_scalar_stiffness, assemble_system, BoundarySpec,
    ContinuumSpec, ElasticitySpec, Elements, ExchangeSpec, PressureDirichlet,
};
use crate::fine_solver::{self, FineProblem, NoForcing};
use crate::fractional::TimeGrid;
use crate::linalg::symmetric_eigen;
use crate::mesh::{structured_mesh, BoundaryTags, FractureDirection, LatticeFracture, Rect};
use crate::sparse::{norm2, CsrMatrix};

fn field(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

fn fractured_mesh(n: usize) -> FineMesh {
    let fr = [
        LatticeFracture::new([1, n / 2], FractureDirection::Horizontal, n - 3),
        LatticeFracture::new([n / 3, 1], FractureDirection::Diagonal, n / 2),
    ];
    structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), n, n, &fr).unwrap()
}

fn model(mesh: &FineMesh, bulk: usize, eta: f64) -> PoroModel {
    let nt = mesh.triangle_count();
    let ne = mesh.fracture_edges().len();
    let mut continua: Vec<ContinuumSpec> = (0..bulk)
        .map(|b| {
            ContinuumSpec::bulk(
                format!("p{}", b + 1),
                0.1,
                field(nt, 7 + b as u64, 1e-3, 1e-1),
                0.1,
            )
        })
        .collect();
    let mut exchanges = Vec::new();
    for a in 0..bulk {
        for b in a + 1..bulk {
            exchanges.push(ExchangeSpec::new(a, b, vec![eta; nt]));
        }
    }
    if ne > 0 {
        continua.push(ContinuumSpec::fracture("f", 1e-3, vec![1.0; ne]));
        for a in 0..bulk {
            exchanges.push(ExchangeSpec::new(a, bulk, vec![eta; ne]));
        }
    }
    PoroModel {
        continua,
        exchanges,
        elasticity: ElasticitySpec {
            young: field(nt, 99, 1.0, 50.0),
            poisson: 0.3,
        },
    }
}

fn interior_patch(grid: &CoarseGrid, patches: &[Patch]) -> Patch {
    let l = grid.nx() + 2;
    patches[l].clone()
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

struct Setup {
    mesh: FineMesh,
    model: PoroModel,
    grid: CoarseGrid,
    patches: Vec<Patch>,
}

fn setup(n: usize, coarse: usize, bulk: usize, eta: f64) -> Setup {
    let mesh = fractured_mesh(n);
    let model = model(&mesh, bulk, eta);
    let grid = CoarseGrid::from_extents(1.0, 1.0, coarse, coarse).unwrap();
    let patches = build_patches(&grid, &mesh).unwrap();
    Setup {
        mesh,
        model,
        grid,
        patches,
    }
}

fn free(s: &Setup) -> (DofLayout, Constraints) {
    let layout = DofLayout::new(&s.mesh, &s.model.continua);
    let c = Constraints::none(layout.total());
    (layout, c)
}

#[test]
fn pressure_snapshots_superpose_to_constants() {
    let s = setup(12, 3, 1, 0.5);
    let (layout, cons) = free(&s);
    let patch = interior_patch(&s.grid, &s.patches);
    let ps = patch_system(&s.mesh, &s.model, &layout, &cons, &patch).unwrap();
    let snaps = compute_pressure_snapshots(&ps).unwrap();
    assert_eq!(
        snaps.len(),
        ps.pressure_boundary.iter().filter(|&&b| b).count()
    );
    assert!(snaps.max_residual < 1e-10);
    let mut sum = vec![0.0; ps.pressure_dofs.len()];
    for c in &snaps.columns {
        for (a, b) in sum.iter_mut().zip(c) {
            *a += b;
        }
    }
    assert!(sum.iter().all(|v| (v - 1.0).abs() < 1e-10), "{sum:?}");
    for (c, &b) in snaps.columns.iter().zip(&snaps.sources) {
        for (k, v) in c.iter().enumerate() {
            if ps.pressure_boundary[k] {
                assert_eq!(*v, if k == b { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn triple_continuum_has_three_snapshots_per_boundary_node() {
    let mesh = structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), 9, 9, &[]).unwrap();
    let m = model(&mesh, 3, 2.0);
    let grid = CoarseGrid::from_extents(1.0, 1.0, 3, 3).unwrap();
    let patches = build_patches(&grid, &mesh).unwrap();
    let layout = DofLayout::new(&mesh, &m.continua);
    let patch = interior_patch(&grid, &patches);
    let ps = patch_system(
        &mesh,
        &m,
        &layout,
        &Constraints::none(layout.total()),
        &patch,
    )
    .unwrap();
    let snaps = compute_pressure_snapshots(&ps).unwrap();
    assert_eq!(snaps.len(), 3 * patch.boundary_count());
    assert_eq!(patch.boundary_count(), 24);
}

#[test]
fn uncoupled_snapshots_are_scalar_harmonic_extensions() {
    let s = setup(12, 3, 2, 0.0);
    let (layout, cons) = free(&s);
    let patch = interior_patch(&s.grid, &s.patches);
    let ps = patch_system(&s.mesh, &s.model, &layout, &cons, &patch).unwrap();
    let snaps = compute_pressure_snapshots(&ps).unwrap();
    // independent scalar solve for continuum 1 (second bulk block)
    let k = &s.model.continua[1].permeability;
    let a = assemble_scalar_stiffness(
        &s.mesh,
        k,
        Elements {
            triangles: &patch.triangles,
            fracture_edges: &[],
        },
    )
    .to_dense();
    let nodes = &patch.nodes;
    let interior: Vec<usize> = (0..nodes.len())
        .filter(|&i| !patch.on_boundary[i])
        .collect();
    let offset = nodes.len();
    let mut checked = 0;
    for (col, &src) in snaps.columns.iter().zip(&snaps.sources) {
        if ps.pressure_block[src] != 1 {
            continue;
        }
        let b_local = src - offset;
        let mat: Vec<Vec<f64>> = interior
            .iter()
            .map(|&i| interior.iter().map(|&j| a[nodes[i]][nodes[j]]).collect())
            .collect();
        let rhs: Vec<f64> = interior
            .iter()
            .map(|&i| -a[nodes[i]][nodes[b_local]])
            .collect();
        let x = dense_solve(mat, rhs);
        for (&i, &xi) in interior.iter().zip(&x) {
            assert!((col[offset + i] - xi).abs() < 1e-10);
        }
        // other blocks stay zero
        assert!(col[..offset].iter().all(|&v| v == 0.0));
        checked += 1;
    }
    assert_eq!(checked, patch.boundary_count());
}

#[test]
fn pressure_spectrum_has_constant_zero_mode() {
    let s = setup(12, 3, 1, 0.5);
    let (layout, cons) = free(&s);
    let patch = interior_patch(&s.grid, &s.patches);
    let ps = patch_system(&s.mesh, &s.model, &layout, &cons, &patch).unwrap();
    let snaps = compute_pressure_snapshots(&ps).unwrap();
    let basis = pressure_spectral_problem(&ps, &snaps, 6).unwrap();
    let lmax = *basis.eigenvalues.last().unwrap();
    assert!(basis
        .eigenvalues
        .iter()
        .all(|&l| l >= -1e-10 * lmax.max(1.0)));
    assert!(basis.eigenvalues[0].abs() < 1e-10 * lmax);
    assert!(basis.eigenvalues[1] > 1e-6 * lmax);
    let v0 = &basis.vectors[0];
    assert!(v0.iter().all(|v| (v - v0[0]).abs() < 1e-8 * v0[0].abs()));
    assert!(
        basis.residuals.iter().all(|&r| r < 1e-8),
        "{:?}",
        basis.residuals
    );
    assert!(basis.s_norms.iter().all(|&n| (n - 1.0).abs() < 1e-10));
    // the S̃-orthonormality in fine coordinates
    let sv = ps.s_p.mul_vec(&basis.vectors[1]);
    assert!(crate::sparse::dot(&basis.vectors[0], &sv).abs() < 1e-10);
}

#[test]
fn displacement_snapshots_and_spectrum() {
    let s = setup(12, 3, 1, 0.5);
    let (layout, cons) = free(&s);
    let patch = interior_patch(&s.grid, &s.patches);
    let ps = patch_system(&s.mesh, &s.model, &layout, &cons, &patch).unwrap();
    let snaps = compute_displacement_snapshots(&ps).unwrap();
    assert_eq!(snaps.len(), 2 * patch.boundary_count());
    assert!(snaps.max_residual < 1e-10);
    let mut sum = vec![0.0; ps.displacement_dofs.len()];
    for (c, &src) in snaps.columns.iter().zip(&snaps.sources) {
        if src % 2 == 0 {
            for (a, b) in sum.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    for (k, v) in sum.iter().enumerate() {
        let expect = if k % 2 == 0 { 1.0 } else { 0.0 };
        assert!((v - expect).abs() < 1e-10);
    }
    let basis = displacement_spectral_problem(&ps, &snaps, 6).unwrap();
    let lmax = *basis.eigenvalues.last().unwrap();
    let zeros = basis
        .eigenvalues
        .iter()
        .filter(|&&l| l.abs() < 1e-10 * lmax)
        .count();
    assert_eq!(zeros, 3);
    assert!(basis.residuals.iter().all(|&r| r < 1e-8));
    assert!(basis.s_norms.iter().all(|&n| (n - 1.0).abs() < 1e-10));
}

fn offline_for(s: &Setup, max_m: usize) -> (DofLayout, Constraints, OfflineBases) {
    let layout = DofLayout::new(&s.mesh, &s.model.continua);
    let spec = BoundarySpec {
        pressure: vec![PressureDirichlet {
            continuum: 0,
            sides: BoundaryTags::LEFT,
            value: 0.0,
        }],
        displacement: BoundarySpec::roller(),
    };
    let cons = apply_boundary_conditions(&s.model, &layout, &s.mesh, &spec).unwrap();
    let off = compute_offline(&s.mesh, &s.model, &layout, &cons, &s.grid, max_m).unwrap();
    (layout, cons, off)
}

#[test]
fn dof_accounting_on_ten_by_ten_grid() {
    for (bulk, per_m) in [(1, 363), (2, 484)] {
        let s = setup(20, 10, bulk, 0.5);
        let (layout, _, off) = offline_for(&s, 2);
        for m in [1, 2] {
            let ms = build_multiscale_space(&off, &layout, m).unwrap();
            assert_eq!(ms.dof_h(), per_m * m);
            assert!(ms.effective_dofs() <= ms.dof_h());
        }
        assert!(matches!(
            build_multiscale_space(&off, &layout, 3),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn basis_rows_are_patch_local() {
    let s = setup(12, 3, 1, 0.5);
    let (layout, _, off) = offline_for(&s, 3);
    let ms = build_multiscale_space(&off, &layout, 3).unwrap();
    let disp = layout.continua();
    for (f, r) in ms.nominal.iter().enumerate() {
        for row in 0..r.nrows() {
            let l = row / ms.m;
            let rect = s.patches[l].rect;
            for &c in r.row(row).0 {
                let node = if f == disp {
                    c / 2
                } else if s.model.continua[f].is_fracture() {
                    s.mesh.fracture_nodes()[c]
                } else {
                    c
                };
                assert!(rect.contains(s.mesh.node(node), 1e-12));
            }
        }
    }
    // Dirichlet DOFs are never touched by a basis function
    let left: Vec<usize> = (0..s.mesh.node_count())
        .filter(|&v| s.mesh.boundary_tags(v).contains(BoundaryTags::LEFT))
        .collect();
    for row in 0..ms.nominal[0].nrows() {
        for &v in &left {
            assert_eq!(ms.nominal[0].get(row, v), 0.0);
        }
    }
}

#[test]
fn coarse_matrices_stay_symmetric_and_semidefinite() {
    let s = setup(12, 3, 1, 0.5);
    let (layout, _, off) = offline_for(&s, 4);
    let fine = assemble_system(&s.model, &s.mesh).unwrap();
    let ms = build_multiscale_space(&off, &layout, 4).unwrap();
    let coarse = assemble_coarse_system(&fine, &ms).unwrap();
    let min_eig = |m: &CsrMatrix| {
        let n = m.nrows();
        let d: Vec<f64> = m.to_dense().into_iter().flatten().collect();
        let (v, _) = symmetric_eigen(n, &d).unwrap();
        (v[0], v[n - 1])
    };
    for m in coarse
        .stiffness
        .iter()
        .chain(&coarse.mass)
        .chain([&coarse.elasticity])
    {
        assert!(m.asymmetry() <= 1e-12 * m.max_abs());
        let (lo, hi) = min_eig(m);
        assert!(lo >= -1e-10 * hi.max(1.0));
    }
    let wrong = crate::assembly::DofLayout::from_sizes(vec![3], 4);
    let mut bad = ms.clone();
    bad.fine_layout = wrong;
    assert!(matches!(
        assemble_coarse_system(&fine, &bad),
        Err(Error::Contract(_))
    ));
}

#[test]
fn downscale_definitions() {
    let s = setup(12, 3, 1, 0.5);
    let (layout, _, off) = offline_for(&s, 2);
    let ms = build_multiscale_space(&off, &layout, 2).unwrap();
    let z = downscale(&ms, &vec![0.0; ms.effective_dofs()]).unwrap();
    assert!(z.iter().all(|&v| v == 0.0));
    let k = 5;
    let mut e = vec![0.0; ms.dof_h()];
    e[k] = 1.0;
    let x = ms.downscale_nominal(&e);
    let row = ms.nominal[0].to_dense()[k].clone();
    assert_eq!(&x[layout.pressure_range(0)], &row[..]);
    // effective and nominal coordinates describe the same fine field
    let y: Vec<f64> = (0..ms.effective_dofs())
        .map(|i| (i as f64 * 0.37).sin())
        .collect();
    let a = downscale(&ms, &y).unwrap();
    let b = ms.downscale_nominal(&ms.nominal_coordinates(&y));
    for (p, q) in a.iter().zip(&b) {
        assert!((p - q).abs() < 1e-12);
    }
    // a field already in the span is reproduced by least squares
    let p = ms.prolongation();
    let coarse_y: Vec<f64> = (0..ms.effective_dofs())
        .map(|i| ((i * 7 % 11) as f64) - 5.0)
        .collect();
    let fine = p.mul_transpose_vec(&coarse_y);
    let gram = p.matmul(&p.transpose());
    let (back, _) = crate::linalg::SparseLu::new(gram)
        .unwrap()
        .solve(&p.mul_vec(&fine))
        .unwrap();
    let again = p.mul_transpose_vec(&back);
    let err: f64 = fine
        .iter()
        .zip(&again)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-10 * norm2(&fine));
}

#[test]
fn full_snapshot_space_reproduces_fine_solution() {
    // every fine node is a coarse vertex, so each χ^l is a nodal indicator
    let mesh = structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 2, &[]).unwrap();
    let m = model(&mesh, 1, 0.0);
    let grid = CoarseGrid::from_extents(1.0, 1.0, 2, 2).unwrap();
    let problem = FineProblem {
        mesh: Arc::new(mesh.clone()),
        model: m.clone(),
        boundary: BoundarySpec {
            pressure: vec![PressureDirichlet {
                continuum: 0,
                sides: BoundaryTags::LEFT,
                value: 0.0,
            }],
            displacement: BoundarySpec::roller(),
        },
        grid: TimeGrid::new(1.0, 5).unwrap(),
        initial_pressure: vec![1.0],
        forcing: Arc::new(NoForcing),
    };
    let (traj, system) = fine_solver::run(&problem).unwrap();
    let off = compute_offline(&mesh, &m, &traj.layout, system.constraints(), &grid, 2).unwrap();
    let ms = build_multiscale_space(&off, &traj.layout, 2).unwrap();
    let free = system.constraints().free().len();
    assert_eq!(ms.effective_dofs(), free);
    let ct = coarse_run(
        system.matrices(),
        &ms,
        &fine_solver::orders_of(&m),
        problem.grid,
        &traj.states[0],
    )
    .unwrap();
    assert_eq!(ct.states.len(), 6);
    for (yc, xf) in ct.states.iter().zip(&traj.states) {
        let x = downscale(&ms, yc).unwrap();
        let err: f64 = x
            .iter()
            .zip(xf)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * norm2(xf), "{err}");
    }
}

#[test]
fn offline_work_is_deterministic_across_thread_counts() {
    let s = setup(12, 3, 2, 0.5);
    let (_, _, a) = offline_for(&s, 3);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let (_, _, b) = pool.install(|| offline_for(&s, 3));
    assert_eq!(a.pressure, b.pressure);
    assert_eq!(a.displacement, b.displacement);
}

#[test]
fn proportional_rows_across_groups_are_dropped() {
    // rows 0 and 2 are proportional, row 3 is the sum of rows 1 and 2
    let e = CsrMatrix::from_triplets(
        4,
        3,
        &[
            (0, 0, 1.0),
            (0, 1, 2.0),
            (1, 2, 1.0),
            (2, 0, -3.0),
            (2, 1, -6.0),
            (3, 0, -3.0),
            (3, 1, -6.0),
            (3, 2, 1.0),
        ],
    );
    assert_eq!(super::space::independent_rows(&e), vec![0, 1]);
    assert_eq!(
        super::space::independent_rows(&CsrMatrix::identity(5)),
        vec![0, 1, 2, 3, 4]
    );
}

#[test]
fn fracture_rows_stay_independent() {
    // a horizontal fracture strictly between coarse lines
    let mesh = structured_mesh(
        Rect::new(0.0, 0.0, 1.0, 1.0),
        12,
        12,
        &[LatticeFracture::new(
            [1, 5],
            FractureDirection::Horizontal,
            10,
        )],
    )
    .unwrap();
    let m = model(&mesh, 1, 0.5);
    let grid = CoarseGrid::from_extents(1.0, 1.0, 3, 3).unwrap();
    let layout = DofLayout::new(&mesh, &m.continua);
    let off = compute_offline(
        &mesh,
        &m,
        &layout,
        &Constraints::none(layout.total()),
        &grid,
        2,
    )
    .unwrap();
    let ms = build_multiscale_space(&off, &layout, 2).unwrap();
    let fine = assemble_system(&m, &mesh).unwrap();
    let coarse = assemble_coarse_system(&fine, &ms).unwrap();
    let mf = &coarse.plain_mass[1];
    let n = mf.nrows();
    let (ev, _) =
        symmetric_eigen(n, &mf.to_dense().into_iter().flatten().collect::<Vec<_>>()).unwrap();
    assert!(ev[0] > 1e-10 * ev[n - 1], "{:?}", &ev[..3]);
    assert!(n < ms.nominal[1].nrows());
}
