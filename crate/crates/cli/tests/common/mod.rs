//! Independent classical Biot stepper used as an oracle.
//!
//! Everything here is assembled from scratch: P1 triangles, 1D fracture
//! segments, plane strain, backward Euler multiplied through by τ, and
//! Dirichlet rows replaced by identity rows. Only mesh and coefficient data
//! are taken from the library types.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use fracporo::assembly::{BoundarySpec, PoroModel, Support};
use fracporo::fine_solver;
use fracporo::mesh::FineMesh;
use fracporo_cli::experiment::instantiate;
use fracporo_cli::scenario::parse_scenario_str;

#[derive(Default)]
struct Builder {
    entries: BTreeMap<(usize, usize), f64>,
}

impl Builder {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        *self.entries.entry((i, j)).or_insert(0.0) += v;
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (&(i, j), &v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

fn grads(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let (x, y) = ([p[0][0], p[1][0], p[2][0]], [p[0][1], p[1][1], p[2][1]]);
    let two_a = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(y[b] - y[c]) / two_a, (x[c] - x[b]) / two_a];
    }
    (g, 0.5 * two_a.abs())
}

struct Blocks {
    n: usize,
    offsets: Vec<usize>,
    disp: usize,
    total: usize,
    frac_index: Vec<Option<usize>>,
}

impl Blocks {
    fn new(mesh: &FineMesh, model: &PoroModel) -> Self {
        let n = mesh.node_count();
        let mut frac_index = vec![None; n];
        let mut nf = 0;
        let mut seen: Vec<usize> = mesh.fracture_edges().iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        for v in seen {
            frac_index[v] = Some(nf);
            nf += 1;
        }
        let mut offsets = Vec::new();
        let mut o = 0;
        for c in &model.continua {
            offsets.push(o);
            o += if c.support == Support::Fracture {
                nf
            } else {
                n
            };
        }
        Self {
            n,
            offsets,
            disp: o,
            total: o + 2 * n,
            frac_index,
        }
    }

    fn pressure_dof(&self, model: &PoroModel, i: usize, v: usize) -> Option<usize> {
        match model.continua[i].support {
            Support::Bulk => Some(self.offsets[i] + v),
            Support::Fracture => self.frac_index[v].map(|k| self.offsets[i] + k),
        }
    }
}

/// The τ-scaled stepping matrix and the matrix applied to the previous
/// level (storage and coupling rows only).
fn assemble(mesh: &FineMesh, model: &PoroModel, blocks: &Blocks, tau: f64) -> (Builder, Builder) {
    let mut lhs = Builder::default();
    let mut hist = Builder::default();
    let d = blocks.disp;
    for t in 0..mesh.triangle_count() {
        let ids = mesh.triangle(t);
        let (g, area) = grads(mesh.triangle_points(t));
        for (i, c) in model.continua.iter().enumerate() {
            if c.support != Support::Bulk {
                continue;
            }
            let o = blocks.offsets[i];
            for a in 0..3 {
                for b in 0..3 {
                    let m = c.storage * area * if a == b { 2.0 } else { 1.0 } / 12.0;
                    let k = c.permeability[t] * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    lhs.add(o + ids[a], o + ids[b], m + tau * k);
                    hist.add(o + ids[a], o + ids[b], m);
                    // γ ∫ div u φ_a, with φ_a integrating to area / 3
                    for comp in 0..2 {
                        let v = c.biot * area / 3.0 * g[b][comp];
                        lhs.add(o + ids[a], d + 2 * ids[b] + comp, v);
                        hist.add(o + ids[a], d + 2 * ids[b] + comp, v);
                        lhs.add(d + 2 * ids[b] + comp, o + ids[a], -v);
                    }
                }
            }
        }
        for ex in &model.exchanges {
            let (ca, cb) = (&model.continua[ex.first], &model.continua[ex.second]);
            if ca.support != Support::Bulk || cb.support != Support::Bulk {
                continue;
            }
            let (oa, ob) = (blocks.offsets[ex.first], blocks.offsets[ex.second]);
            for a in 0..3 {
                for b in 0..3 {
                    let q = tau * ex.eta[t] * area * if a == b { 2.0 } else { 1.0 } / 12.0;
                    lhs.add(oa + ids[a], oa + ids[b], q);
                    lhs.add(ob + ids[a], ob + ids[b], q);
                    lhs.add(oa + ids[a], ob + ids[b], -q);
                    lhs.add(ob + ids[a], oa + ids[b], -q);
                }
            }
        }
        let e = model.elasticity.young[t];
        let nu = model.elasticity.poisson;
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        // σ(φ_a e_i) : ε(φ_b e_j) = λ ∂_i φ_a ∂_j φ_b + μ (δ_ij ∇φ_a·∇φ_b + ∂_j φ_a ∂_i φ_b)
        for a in 0..3 {
            for b in 0..3 {
                let dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { dot } else { 0.0 };
                        let v = area * (lam * g[a][i] * g[b][j] + mu * (delta + g[a][j] * g[b][i]));
                        lhs.add(d + 2 * ids[a] + i, d + 2 * ids[b] + j, v);
                    }
                }
            }
        }
    }
    for (e, edge) in mesh.fracture_edges().iter().enumerate() {
        let (p, q) = (mesh.node(edge[0]), mesh.node(edge[1]));
        let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        for (i, c) in model.continua.iter().enumerate() {
            if c.support != Support::Fracture {
                continue;
            }
            let dofs = edge.map(|v| blocks.pressure_dof(model, i, v).unwrap());
            for a in 0..2 {
                for b in 0..2 {
                    let m = c.storage * len * if a == b { 2.0 } else { 1.0 } / 6.0;
                    let k = c.permeability[e] / len * if a == b { 1.0 } else { -1.0 };
                    lhs.add(dofs[a], dofs[b], m + tau * k);
                    hist.add(dofs[a], dofs[b], m);
                }
            }
        }
        for ex in &model.exchanges {
            let (ca, cb) = (&model.continua[ex.first], &model.continua[ex.second]);
            if (ca.support == Support::Fracture) == (cb.support == Support::Fracture) {
                continue;
            }
            let fa = edge.map(|v| blocks.pressure_dof(model, ex.first, v).unwrap());
            let fb = edge.map(|v| blocks.pressure_dof(model, ex.second, v).unwrap());
            for a in 0..2 {
                for b in 0..2 {
                    let q = tau * ex.eta[e] * len * if a == b { 2.0 } else { 1.0 } / 6.0;
                    lhs.add(fa[a], fa[b], q);
                    lhs.add(fb[a], fb[b], q);
                    lhs.add(fa[a], fb[b], -q);
                    lhs.add(fb[a], fa[b], -q);
                }
            }
        }
    }
    (lhs, hist)
}

struct Factored {
    rows: Builder,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl Factored {
    fn new(rows: Builder, n: usize) -> Self {
        let trip: Vec<_> = rows
            .entries
            .iter()
            .map(|(&(i, j), &v)| Triplet::new(i, j, v))
            .collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip).unwrap();
        let lu = m.sp_lu().unwrap();
        Self { rows, lu }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let raw = |r: &[f64]| {
            let mut col = Mat::<f64>::zeros(n, 1);
            for i in 0..n {
                col[(i, 0)] = r[i];
            }
            self.lu.solve_in_place(col.as_mut());
            (0..n).map(|i| col[(i, 0)]).collect::<Vec<f64>>()
        };
        let mut x = raw(b);
        for _ in 0..3 {
            let ax = self.rows.mul(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let dx = raw(&r);
            for (a, c) in x.iter_mut().zip(&dx) {
                *a += c;
            }
        }
        x
    }
}

/// Dirichlet DOFs and values of the monolithic vector.
fn dirichlet(
    mesh: &FineMesh,
    model: &PoroModel,
    blocks: &Blocks,
    bc: &BoundarySpec,
) -> BTreeMap<usize, f64> {
    let mut fixed = BTreeMap::new();
    for v in 0..mesh.node_count() {
        let tags = mesh.boundary_tags(v);
        for pd in &bc.pressure {
            if tags.intersects(pd.sides) {
                if let Some(d) = blocks.pressure_dof(model, pd.continuum, v) {
                    fixed.insert(d, pd.value);
                }
            }
        }
        for dd in &bc.displacement {
            if tags.intersects(dd.sides) {
                for c in 0..2 {
                    if dd.components[c] {
                        fixed.insert(blocks.disp + 2 * v + c, dd.value[c]);
                    }
                }
            }
        }
    }
    fixed
}

fn replace_rows(
    b: &Builder,
    fixed: &BTreeMap<usize, f64>,
    keep: impl Fn(usize) -> bool,
) -> Builder {
    let mut out = Builder::default();
    for (&(i, j), &v) in &b.entries {
        if !fixed.contains_key(&i) && keep(i) {
            out.add(i, j, v);
        }
    }
    for &d in fixed.keys() {
        out.add(d, d, 1.0);
    }
    out
}

/// Backward-Euler Biot trajectory (levels `0..=steps`) in the monolithic
/// ordering: pressures by continuum, then interleaved displacement.
pub fn backward_euler(
    mesh: &FineMesh,
    model: &PoroModel,
    bc: &BoundarySpec,
    tau: f64,
    steps: usize,
    initial_pressure: &[f64],
) -> Vec<Vec<f64>> {
    let blocks = Blocks::new(mesh, model);
    let (lhs, hist) = assemble(mesh, model, &blocks, tau);
    let fixed = dirichlet(mesh, model, &blocks, bc);
    let n = blocks.total;

    let mut x = vec![0.0; n];
    for (i, &p) in initial_pressure.iter().enumerate() {
        let end = if i + 1 < blocks.offsets.len() {
            blocks.offsets[i + 1]
        } else {
            blocks.disp
        };
        x[blocks.offsets[i]..end].fill(p);
    }
    for (&d, &v) in &fixed {
        if d < blocks.disp {
            x[d] = v;
        }
    }
    // u⁰: the mechanics rows with the pressures pinned
    let pin: BTreeMap<usize, f64> = (0..blocks.disp)
        .map(|d| (d, x[d]))
        .chain(fixed.iter().map(|(&d, &v)| (d, v)))
        .collect();
    let init = Factored::new(replace_rows(&lhs, &pin, |i| i >= blocks.disp), n);
    let mut b = vec![0.0; n];
    for (&d, &v) in &pin {
        b[d] = v;
    }
    x = init.solve(&b);

    let step = Factored::new(replace_rows(&lhs, &fixed, |_| true), n);
    let mut out = vec![x.clone()];
    for _ in 0..steps {
        let mut b = hist.mul(&x);
        for (&d, &v) in &fixed {
            b[d] = v;
        }
        x = step.solve(&b);
        out.push(x.clone());
    }
    out
}

/// Largest per-field relative difference `‖a − b‖ / ‖b‖` over the pressure
/// blocks and the displacement.
pub fn max_field_difference(mesh: &FineMesh, model: &PoroModel, a: &[f64], b: &[f64]) -> f64 {
    let blocks = Blocks::new(mesh, model);
    let mut bounds = blocks.offsets.clone();
    bounds.push(blocks.disp);
    bounds.push(blocks.total);
    bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let num: f64 = (w[0]..w[1])
                .map(|k| (a[k] - b[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = (w[0]..w[1]).map(|k| b[k].powi(2)).sum::<f64>().sqrt();
            if den == 0.0 {
                num
            } else {
                num / den
            }
        })
        .fold(0.0, f64::max)
}

/// Fractured scenario on (0,50)² with `cells`² squares and the given bulk
/// continua, run at α = β = 1.
fn classical_scenario(cells: usize, bulk: &str) -> String {
    format!(
        r#"
schema_version = 1
[mesh.structured]
extents = [50.0, 50.0]
cells = [{cells}, {cells}]
fractures = [
    {{ start = [2, {h}], direction = "horizontal", length = {l} }},
    {{ start = [{h}, 3], direction = "vertical", length = {l} }},
    {{ start = [3, 4], direction = "diagonal", length = {d} }},
]
[coarse]
nx = 2
ny = 2
[time]
final_time = 86400.0
steps = 6
[fields.k]
style = "lognormal-blobs"
contrast = 1000.0
[fields.E]
style = "layered"
contrast = 100.0
seed_offset = 1
{bulk}
[[continuum]]
name = "f"
kind = "fracture"
storage = 1e-3
permeability = 1.0
[elasticity]
young = {{ base = 1.0, field = "E" }}
poisson = 0.3
[boundary]
displacement = "roller"
pressure = [{{ continua = ["m"], sides = ["left"], value = 0.0 }}]
[experiment]
basis_counts = [1]
"#,
        h = cells / 2 + 1,
        l = cells - 6,
        d = cells / 4,
    )
}

pub const SINGLE: &str = r#"
[[continuum]]
name = "m"
kind = "bulk"
storage = 0.1
permeability = { base = 1e-5, field = "k" }
biot = 0.1
[[exchange]]
between = ["m", "f"]
eta = 1e-2
"#;

pub const DOUBLE: &str = r#"
[[continuum]]
name = "m"
kind = "bulk"
storage = 0.1
permeability = { base = 1e-5, field = "k" }
biot = 0.1
[[continuum]]
name = "v"
kind = "bulk"
storage = 0.2
permeability = 1e-3
biot = 0.3
[[exchange]]
between = ["m", "v"]
eta = "5*k2"
[[exchange]]
between = ["v", "f"]
eta = 1e-2
"#;

/// Triangle count and the worst per-step, per-field relative difference
/// between the fine solver and [`backward_euler`].
pub fn max_step_difference(cells: usize, bulk: &str) -> (usize, f64) {
    let sc = parse_scenario_str(&classical_scenario(cells, bulk), Path::new(".")).unwrap();
    let inst = instantiate(&sc).unwrap();
    let (traj, _) = fine_solver::run(&inst.problem).unwrap();
    let p = &inst.problem;
    let oracle = backward_euler(
        &inst.mesh,
        &p.model,
        &p.boundary,
        p.grid.tau(),
        p.grid.steps,
        &p.initial_pressure,
    );
    assert_eq!(traj.states.len(), oracle.len());
    let worst = traj
        .states
        .iter()
        .zip(&oracle)
        .map(|(a, b)| max_field_difference(&inst.mesh, &p.model, a, b))
        .fold(0.0, f64::max);
    (inst.mesh.triangle_count(), worst)
}
