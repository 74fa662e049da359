//! Self-checks run by `fracporo verify`.
//!
//! * Fractional decay: the L1 scheme for `D^α y = −y`, `y(0) = 1` on `[0, 1]`
//!   against `E_α(−t^α)`, with observed orders between consecutive step
//!   sizes.
//! * Manufactured solution: `p = t·x`, `u = (t·x, 0)` solves the classical
//!   (α = β = 1) single-continuum problem with sources `f_p = c·x + γ`,
//!   `f_u = (γ·t, 0)` and Dirichlet data on the whole boundary. P1 in space
//!   and backward Euler in time are exact for it.

use std::sync::Arc;

use fracporo::assembly::{
    assemble_manufactured_source, BoundarySpec, ContinuumSpec, DisplacementDirichlet,
    ElasticitySpec, PoroModel, PressureDirichlet,
};
use fracporo::fine_solver::{self, FineProblem, Forcing};
use fracporo::fractional::{mittag_leffler, solve_scalar_fractional_decay, TimeGrid};
use fracporo::mesh::{structured_mesh, BoundaryTags, FineMesh, Rect};

use crate::{CliResult, Stage};

/// Final-time errors of the scalar decay for each step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeConvergence {
    pub alpha: f64,
    pub steps: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive halvings.
    pub orders: Vec<f64>,
}

impl OdeConvergence {
    /// Smallest observed order.
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap_or(&f64::NAN)
    }
}

/// Runs the decay problem `c D^α y + λ y = 0` on `[0, T]` for each step count.
pub fn ode_convergence(
    alpha: f64,
    c: f64,
    lambda: f64,
    final_time: f64,
    steps: &[usize],
) -> CliResult<OdeConvergence> {
    let exact = mittag_leffler(alpha, -(lambda / c) * final_time.powf(alpha))
        .stage("Mittag-Leffler evaluation")?;
    let mut errors = Vec::with_capacity(steps.len());
    for &n in steps {
        let y = solve_scalar_fractional_decay(alpha, c, lambda, final_time / n as f64, n)
            .stage("L1 decay solve")?;
        errors.push((y[n] - exact).abs());
    }
    let orders = errors
        .windows(2)
        .zip(steps.windows(2))
        .map(|(e, s)| (e[0] / e[1]).ln() / (s[1] as f64 / s[0] as f64).ln())
        .collect();
    Ok(OdeConvergence {
        alpha,
        steps: steps.to_vec(),
        errors,
        orders,
    })
}

/// Storage, Biot coefficient, permeability, Young's modulus and Poisson ratio
/// of the manufactured problem.
#[derive(Debug, Clone, Copy)]
pub struct MmsParameters {
    pub storage: f64,
    pub biot: f64,
    pub permeability: f64,
    pub young: f64,
    pub poisson: f64,
}

impl Default for MmsParameters {
    fn default() -> Self {
        Self {
            storage: 0.1,
            biot: 0.8,
            permeability: 2.0,
            young: 10.0,
            poisson: 0.3,
        }
    }
}

struct MmsForcing {
    mesh: Arc<FineMesh>,
    params: MmsParameters,
    flow_source: Vec<f64>,
    unit_load: Vec<f64>,
}

impl Forcing for MmsForcing {
    fn load(&self, t: f64) -> Option<Vec<f64>> {
        let n = self.mesh.node_count();
        let mut f = vec![0.0; 3 * n];
        f[..n].copy_from_slice(&self.flow_source);
        for (v, &w) in self.unit_load.iter().enumerate() {
            f[n + 2 * v] = self.params.biot * t * w;
        }
        Some(f)
    }

    fn dirichlet(&self, t: f64, dof: usize, _static_value: f64) -> f64 {
        let n = self.mesh.node_count();
        if dof < n {
            t * self.mesh.node(dof)[0]
        } else {
            let d = dof - n;
            if d.is_multiple_of(2) {
                t * self.mesh.node(d / 2)[0]
            } else {
                0.0
            }
        }
    }
}

/// Result of the manufactured-solution run.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsOutcome {
    pub steps: usize,
    /// Largest nodal error over all levels and unknowns.
    pub max_error: f64,
}

/// Runs the manufactured problem on an `n × n` mesh of `(0,1)²` for `steps`
/// steps up to `t = 1`.
pub fn manufactured_solution(
    n: usize,
    steps: usize,
    params: MmsParameters,
) -> CliResult<MmsOutcome> {
    let mesh =
        Arc::new(structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), n, n, &[]).stage("MMS mesh")?);
    let nt = mesh.triangle_count();
    let model = PoroModel {
        continua: vec![ContinuumSpec::bulk(
            "p",
            params.storage,
            vec![params.permeability; nt],
            params.biot,
        )],
        exchanges: vec![],
        elasticity: ElasticitySpec {
            young: vec![params.young; nt],
            poisson: params.poisson,
        },
    };
    let c = params.storage;
    let g = params.biot;
    let forcing = MmsForcing {
        mesh: mesh.clone(),
        params,
        flow_source: assemble_manufactured_source(&mesh, |p| c * p[0] + g),
        unit_load: assemble_manufactured_source(&mesh, |_| 1.0),
    };
    let problem = FineProblem {
        mesh: mesh.clone(),
        model,
        boundary: BoundarySpec {
            pressure: vec![PressureDirichlet {
                continuum: 0,
                sides: BoundaryTags::ALL,
                value: 0.0,
            }],
            displacement: vec![DisplacementDirichlet {
                sides: BoundaryTags::ALL,
                components: [true, true],
                value: [0.0; 2],
            }],
        },
        grid: TimeGrid::new(1.0, steps).stage("MMS time grid")?,
        initial_pressure: vec![0.0],
        forcing: Arc::new(forcing),
    };
    let (traj, _) = fine_solver::run(&problem).stage("MMS solve")?;
    let nn = mesh.node_count();
    let mut max_error = 0.0f64;
    for (k, x) in traj.states.iter().enumerate() {
        let t = traj.grid.time(k);
        for v in 0..nn {
            let xv = mesh.node(v)[0];
            max_error = max_error.max((x[v] - t * xv).abs());
            max_error = max_error.max((x[nn + 2 * v] - t * xv).abs());
            max_error = max_error.max(x[nn + 2 * v + 1].abs());
        }
    }
    Ok(MmsOutcome { steps, max_error })
}

/// One line of the `verify` report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The default verification suite.
pub fn run_checks() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for alpha in [0.5, 0.8, 0.9] {
        let conv = ode_convergence(alpha, 1.0, 1.0, 1.0, &[40, 80, 160])?;
        let target = 2.0 - alpha - 0.2;
        let order_ok = conv.min_order() >= target;
        let err_ok = conv.final_error() < 5e-3;
        checks.push(Check {
            name: format!("fractional decay alpha={alpha}"),
            passed: order_ok && err_ok,
            detail: format!(
                "errors {:?}, observed orders {:?} (need >= {target:.2}), final error {:.3e} (need < 5e-3)",
                conv.errors,
                conv.orders.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                conv.final_error()
            ),
        });
    }
    let mms = manufactured_solution(8, 10, MmsParameters::default())?;
    checks.push(Check {
        name: "manufactured solution".into(),
        passed: mms.max_error < 1e-9,
        detail: format!(
            "max nodal error {:.3e} after {} steps (need < 1e-9)",
            mms.max_error, mms.steps
        ),
    });
    Ok(checks)
}
