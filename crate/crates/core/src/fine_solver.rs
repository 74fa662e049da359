//! Monolithic implicit L1 time stepping of the coupled flow–mechanics system.
//!
//! Unknown ordering follows [`DofLayout`]. Row block `i` (pressure of
//! continuum `i`) reads
//!
//! ```text
//! (M_i/d_αi + A_i + Σ_j Q_ii^j) p_i − Σ_j Q_ij p_j + D_i u / d_βi
//!     = M_i m_αi(p_i) / d_αi + D_i m_βi(u) / d_βi + f_i
//! ```
//!
//! and the mechanics row is `A_u u − Σ_i D_iᵀ p_i = f_u`, where `d` is the L1
//! denominator and `m` the history part of the scheme (see
//! [`L1Weights::memory_term`]). Dirichlet DOFs are eliminated from the
//! factored matrix and their values lifted to the right-hand side.

use std::sync::Arc;
use std::time::Instant;

use crate::assembly::{
    apply_boundary_conditions, assemble_system, check_flow_solvable, check_rigid_modes,
    BoundarySpec, Constraints, DofLayout, PoroModel, SystemMatrices,
};
use crate::error::{Error, Result};
use crate::fractional::{L1Weights, TimeGrid, TimeHistory};
use crate::linalg::SparseLu;
use crate::mesh::FineMesh;
use crate::sparse::{CsrMatrix, TripletList};

/// Time-dependent sources and Dirichlet data. The default is none, with the
/// static Dirichlet values of the boundary specification.
pub trait Forcing: Send + Sync {
    /// Load vector over the full layout at time `t`, or `None` for zero.
    fn load(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// Value of constrained DOF `dof` at time `t`.
    fn dirichlet(&self, _t: f64, _dof: usize, static_value: f64) -> f64 {
        static_value
    }
}

/// No sources, constant Dirichlet data.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {}

/// Pressures and displacement at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub n: usize,
    pub time: f64,
    pub vector: Vec<f64>,
}

impl SolutionState {
    pub fn pressure<'a>(&'a self, layout: &DofLayout, i: usize) -> &'a [f64] {
        &self.vector[layout.pressure_range(i)]
    }

    pub fn displacement<'a>(&'a self, layout: &DofLayout) -> &'a [f64] {
        &self.vector[layout.displacement_range()]
    }
}

/// Fractional orders `(α_i, β_i)` per continuum.
pub fn orders_of(model: &PoroModel) -> Vec<(f64, f64)> {
    model.continua.iter().map(|c| (c.alpha, c.beta)).collect()
}

/// The constant left-hand matrix, its factorization over the free DOFs and
/// the data needed to form right-hand sides.
pub struct BlockSystem {
    matrices: SystemMatrices,
    alpha: Vec<L1Weights>,
    beta: Vec<L1Weights>,
    lhs: CsrMatrix,
    constraints: Constraints,
    k_fc: CsrMatrix,
    lu: SparseLu,
}

impl std::fmt::Debug for BlockSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockSystem")
            .field("dim", &self.lhs.nrows())
            .field("nnz", &self.lhs.nnz())
            .finish()
    }
}

/// Assembles the monolithic left-hand matrix for the given L1 weights.
pub fn block_matrix(sys: &SystemMatrices, alpha: &[L1Weights], beta: &[L1Weights]) -> CsrMatrix {
    let l = &sys.layout;
    let n = l.total();
    let ou = l.displacement_offset();
    let mut t = TripletList::new(n, n);
    for i in 0..l.continua() {
        let o = l.pressure_offset(i);
        t.add_block(o, o, &sys.mass[i], 1.0 / alpha[i].denominator());
        t.add_block(o, o, &sys.flow_diagonal(i), 1.0);
        t.add_block(o, ou, &sys.coupling[i], 1.0 / beta[i].denominator());
        t.add_block_transposed(ou, o, &sys.coupling[i], -1.0);
    }
    for ex in &sys.exchange {
        let (oa, ob) = (l.pressure_offset(ex.first), l.pressure_offset(ex.second));
        t.add_block(oa, ob, &ex.cross, -1.0);
        t.add_block_transposed(ob, oa, &ex.cross, -1.0);
    }
    t.add_block(ou, ou, &sys.elasticity, 1.0);
    t.build()
}

impl BlockSystem {
    pub fn new(
        matrices: SystemMatrices,
        orders: &[(f64, f64)],
        grid: &TimeGrid,
        constraints: Constraints,
    ) -> Result<Self> {
        let l = &matrices.layout;
        if orders.len() != l.continua() {
            return Err(Error::Contract(format!(
                "{} order pairs for {} continua",
                orders.len(),
                l.continua()
            )));
        }
        if constraints.dim() != l.total() {
            return Err(Error::Contract(format!(
                "constraints of size {} for system of size {}",
                constraints.dim(),
                l.total()
            )));
        }
        let tau = grid.tau();
        let alpha = orders
            .iter()
            .map(|o| L1Weights::new(o.0, tau, grid.steps))
            .collect::<Result<Vec<_>>>()?;
        let beta = orders
            .iter()
            .map(|o| L1Weights::new(o.1, tau, grid.steps))
            .collect::<Result<Vec<_>>>()?;
        let lhs = block_matrix(&matrices, &alpha, &beta);
        let (k_ff, k_fc) = constraints.reduce(&lhs);
        let lu = SparseLu::new(k_ff)?;
        Ok(Self {
            matrices,
            alpha,
            beta,
            lhs,
            constraints,
            k_fc,
            lu,
        })
    }

    pub fn layout(&self) -> &DofLayout {
        &self.matrices.layout
    }

    pub fn matrices(&self) -> &SystemMatrices {
        &self.matrices
    }

    pub fn lhs(&self) -> &CsrMatrix {
        &self.lhs
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn alpha_weights(&self) -> &[L1Weights] {
        &self.alpha
    }

    pub fn beta_weights(&self) -> &[L1Weights] {
        &self.beta
    }

    /// History part of the right-hand side for level `n = history.len()`,
    /// without sources.
    pub fn build_rhs(&self, history: &TimeHistory) -> Result<Vec<f64>> {
        let l = self.layout();
        if history.is_empty() {
            return Err(Error::Contract(
                "right-hand side needs the initial state in the history".into(),
            ));
        }
        if history.dim() != l.total() {
            return Err(Error::Contract(format!(
                "history of dimension {} for system of size {}",
                history.dim(),
                l.total()
            )));
        }
        let mut rhs = vec![0.0; l.total()];
        for i in 0..l.continua() {
            let r = l.pressure_range(i);
            let out = &mut rhs[r.clone()];
            let mp = self.alpha[i].memory_term(history, r)?;
            self.matrices.mass[i].mul_vec_acc(&mp, 1.0 / self.alpha[i].denominator(), out);
            if self.matrices.coupling[i].nnz() > 0 {
                let mu = self.beta[i].memory_term(history, l.displacement_range())?;
                self.matrices.coupling[i].mul_vec_acc(&mu, 1.0 / self.beta[i].denominator(), out);
            }
        }
        Ok(rhs)
    }

    /// Solves `lhs x = rhs` with constrained entries of `x` set to `g`.
    /// Returns the full solution and the relative residual.
    pub fn solve(&self, rhs: &[f64], g: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut b = self.constraints.restrict(rhs);
        if !g.is_empty() {
            self.k_fc.mul_vec_acc(g, -1.0, &mut b);
        }
        let (x, res) = self.lu.solve(&b)?;
        Ok((self.constraints.expand(&x, g), res))
    }

    /// Solves the mechanics rows alone: `A_u u = Σ D_iᵀ p_i + f_u` for the
    /// pressures in `x`, with displacement Dirichlet values from `g`.
    pub fn elastostatic(
        &self,
        x: &[f64],
        load: Option<&[f64]>,
        g: &[f64],
    ) -> Result<(Vec<f64>, f64)> {
        let l = self.layout();
        let ou = l.displacement_offset();
        let nu = l.displacement_size();
        let mut pairs = Vec::new();
        let mut gu = Vec::new();
        for (k, &d) in self.constraints.dofs().iter().enumerate() {
            if d >= ou {
                pairs.push((d - ou, g[k]));
                gu.push(g[k]);
            }
        }
        let cons = Constraints::new(nu, pairs)?;
        let mut f = vec![0.0; nu];
        for i in 0..l.continua() {
            let p = &x[l.pressure_range(i)];
            let dtp = self.matrices.coupling[i].mul_transpose_vec(p);
            for (a, b) in f.iter_mut().zip(&dtp) {
                *a += b;
            }
        }
        if let Some(load) = load {
            for (a, b) in f.iter_mut().zip(&load[l.displacement_range()]) {
                *a += b;
            }
        }
        let (k_ff, k_fc) = cons.reduce(&self.matrices.elasticity);
        let mut b = cons.restrict(&f);
        k_fc.mul_vec_acc(&gu, -1.0, &mut b);
        let lu = SparseLu::new(k_ff).map_err(|e| match e {
            Error::Numerical(m) => Error::Config(format!(
                "elasticity block is singular under the displacement conditions: {m}"
            )),
            other => other,
        })?;
        let (u, res) = lu.solve(&b)?;
        Ok((cons.expand(&u, &gu), res))
    }
}

/// Per-run diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub setup_seconds: f64,
    pub step_seconds: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// L1 time integrator over a [`BlockSystem`] with full history.
pub struct Integrator {
    system: BlockSystem,
    grid: TimeGrid,
    forcing: Arc<dyn Forcing>,
    history: TimeHistory,
    stats: RunStats,
}

impl Integrator {
    /// Sets the initial state: pressures from `pressure` (constrained DOFs
    /// overwritten by their Dirichlet values) and the displacement from the
    /// elastostatic problem driven by those pressures.
    pub fn new(
        system: BlockSystem,
        grid: TimeGrid,
        forcing: Arc<dyn Forcing>,
        pressure: &[f64],
    ) -> Result<Self> {
        let l = system.layout();
        if pressure.len() != l.pressure_total() {
            return Err(Error::Contract(format!(
                "initial pressure of length {} for {} DOFs",
                pressure.len(),
                l.pressure_total()
            )));
        }
        let mut x = vec![0.0; l.total()];
        x[..l.pressure_total()].copy_from_slice(pressure);
        let g = dirichlet_values(&system, forcing.as_ref(), 0.0);
        for (&d, &v) in system.constraints.dofs().iter().zip(&g) {
            x[d] = v;
        }
        let load = forcing.load(0.0);
        let (u, res) = system.elastostatic(&x, load.as_deref(), &g)?;
        let ou = l.displacement_offset();
        x[ou..].copy_from_slice(&u[..]);
        let stats = RunStats {
            residuals: vec![res],
            ..Default::default()
        };
        Ok(Self {
            system,
            grid,
            forcing,
            history: TimeHistory::new(x),
            stats,
        })
    }

    pub fn system(&self) -> &BlockSystem {
        &self.system
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn history(&self) -> &TimeHistory {
        &self.history
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn level(&self) -> usize {
        self.history.len() - 1
    }

    pub fn state(&self, n: usize) -> SolutionState {
        SolutionState {
            n,
            time: self.grid.time(n),
            vector: self.history.get(n).to_vec(),
        }
    }

    pub fn current(&self) -> SolutionState {
        self.state(self.level())
    }

    /// Advances one step; returns the relative residual of the solve.
    pub fn step(&mut self) -> Result<f64> {
        let n = self.history.len();
        if n > self.grid.steps {
            return Err(Error::Contract(format!(
                "time grid has only {} steps",
                self.grid.steps
            )));
        }
        let start = Instant::now();
        let t = self.grid.time(n);
        let mut rhs = self.system.build_rhs(&self.history)?;
        if let Some(f) = self.forcing.load(t) {
            for (a, b) in rhs.iter_mut().zip(&f) {
                *a += b;
            }
        }
        let g = dirichlet_values(&self.system, self.forcing.as_ref(), t);
        let (x, res) = self.system.solve(&rhs, &g)?;
        self.history.push(x)?;
        self.stats.residuals.push(res);
        self.stats.step_seconds.push(start.elapsed().as_secs_f64());
        Ok(res)
    }

    pub fn run(&mut self) -> Result<()> {
        while self.history.len() <= self.grid.steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (BlockSystem, TimeHistory, RunStats) {
        (self.system, self.history, self.stats)
    }
}

fn dirichlet_values(system: &BlockSystem, forcing: &dyn Forcing, t: f64) -> Vec<f64> {
    let c = &system.constraints;
    c.dofs()
        .iter()
        .zip(c.values())
        .map(|(&d, &v)| forcing.dirichlet(t, d, v))
        .collect()
}

/// Everything the fine reference solver needs.
#[derive(Clone)]
pub struct FineProblem {
    pub mesh: Arc<FineMesh>,
    pub model: PoroModel,
    pub boundary: BoundarySpec,
    pub grid: TimeGrid,
    /// Initial pressure value per continuum.
    pub initial_pressure: Vec<f64>,
    pub forcing: Arc<dyn Forcing>,
}

impl std::fmt::Debug for FineProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FineProblem")
            .field("nodes", &self.mesh.node_count())
            .field("continua", &self.model.continua.len())
            .field("grid", &self.grid)
            .finish()
    }
}

/// Finished fine run: all states `0..=N` as full vectors.
#[derive(Debug, Clone)]
pub struct FineTrajectory {
    pub layout: DofLayout,
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
    pub stats: RunStats,
}

impl FineTrajectory {
    pub fn state(&self, n: usize) -> SolutionState {
        SolutionState {
            n,
            time: self.grid.time(n),
            vector: self.states[n].clone(),
        }
    }

    pub fn last(&self) -> SolutionState {
        self.state(self.states.len() - 1)
    }
}

/// Validates the problem, assembles, applies boundary conditions and factors.
pub fn prepare(problem: &FineProblem) -> Result<(BlockSystem, Vec<f64>)> {
    let mesh = problem.mesh.as_ref();
    problem.model.validate(mesh)?;
    if problem.initial_pressure.len() != problem.model.continua.len() {
        return Err(Error::Config(format!(
            "{} initial pressure values for {} continua",
            problem.initial_pressure.len(),
            problem.model.continua.len()
        )));
    }
    let matrices = assemble_system(&problem.model, mesh)?;
    let layout = matrices.layout.clone();
    let constraints = apply_boundary_conditions(&problem.model, &layout, mesh, &problem.boundary)?;
    check_rigid_modes(mesh, &layout, &constraints)?;
    check_flow_solvable(&problem.model, &layout, &constraints)?;
    let system = BlockSystem::new(
        matrices,
        &orders_of(&problem.model),
        &problem.grid,
        constraints,
    )?;
    let mut p0 = vec![0.0; layout.pressure_total()];
    for (i, &v) in problem.initial_pressure.iter().enumerate() {
        p0[layout.pressure_range(i)].fill(v);
    }
    Ok((system, p0))
}

/// Sets up the integrator at level 0.
pub fn initialize(problem: &FineProblem) -> Result<Integrator> {
    let start = Instant::now();
    let (system, p0) = prepare(problem)?;
    let mut integ = Integrator::new(system, problem.grid, problem.forcing.clone(), &p0)?;
    integ.stats.setup_seconds = start.elapsed().as_secs_f64();
    Ok(integ)
}

/// Runs all `N_T` steps of the fine reference solver.
pub fn run(problem: &FineProblem) -> Result<(FineTrajectory, BlockSystem)> {
    let mut integ = initialize(problem)?;
    integ.run()?;
    let grid = problem.grid;
    let (system, history, stats) = integ.into_parts();
    let layout = system.layout().clone();
    Ok((
        FineTrajectory {
            layout,
            grid,
            states: history.levels().to_vec(),
            stats,
        },
        system,
    ))
}
