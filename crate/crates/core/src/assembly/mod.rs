//! P1 finite-element matrices of the multicontinuum poroelastic system.
//!
//! Bulk continua carry one unknown per mesh node; a fracture continuum carries
//! one unknown per fracture node (see [`FineMesh::fracture_nodes`]). The
//! displacement is interleaved per node: `(u_x, u_y)` of node `k` sit at
//! `2k, 2k + 1` of the displacement block.

mod boundary;
mod element;

pub use boundary::{
    apply_boundary_conditions, check_flow_solvable, check_rigid_modes, BoundarySpec, Constraints,
    DisplacementDirichlet, PressureDirichlet,
};
pub use element::{element_mass, element_stiffness, gradients, lame};

use crate::error::{Error, Result};
use crate::mesh::FineMesh;
use crate::sparse::{CsrMatrix, TripletList};

/// Where a continuum lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// The 2D domain.
    Bulk,
    /// The 1D fracture network.
    Fracture,
}

/// Coefficients of one pressure continuum.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumSpec {
    pub name: String,
    pub support: Support,
    /// Storage coefficient c = 1/M.
    pub storage: f64,
    /// Permeability over viscosity, per triangle (bulk) or per fracture edge.
    pub permeability: Vec<f64>,
    /// Biot coefficient γ.
    pub biot: f64,
    /// Order of the pressure time derivative.
    pub alpha: f64,
    /// Order of the volumetric-strain time derivative.
    pub beta: f64,
}

impl ContinuumSpec {
    pub fn bulk(name: impl Into<String>, storage: f64, permeability: Vec<f64>, biot: f64) -> Self {
        Self {
            name: name.into(),
            support: Support::Bulk,
            storage,
            permeability,
            biot,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn fracture(name: impl Into<String>, storage: f64, permeability: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            support: Support::Fracture,
            storage,
            permeability,
            biot: 0.0,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn with_orders(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn is_fracture(&self) -> bool {
        self.support == Support::Fracture
    }

    /// Number of pressure unknowns on `mesh`.
    pub fn dof_count(&self, mesh: &FineMesh) -> usize {
        match self.support {
            Support::Bulk => mesh.node_count(),
            Support::Fracture => mesh.fracture_dof_count(),
        }
    }

    fn element_count(&self, mesh: &FineMesh) -> usize {
        match self.support {
            Support::Bulk => mesh.triangle_count(),
            Support::Fracture => mesh.fracture_edges().len(),
        }
    }

    pub fn validate(&self, mesh: &FineMesh) -> Result<()> {
        for (what, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Domain(format!(
                    "continuum `{}`: {what} = {v} outside (0, 1]",
                    self.name
                )));
            }
        }
        if !(self.storage >= 0.0 && self.storage.is_finite()) {
            return Err(Error::Data(format!(
                "continuum `{}`: storage {} must be >= 0",
                self.name, self.storage
            )));
        }
        if !self.biot.is_finite() {
            return Err(Error::Data(format!(
                "continuum `{}`: non-finite Biot coefficient",
                self.name
            )));
        }
        if self.is_fracture() && self.biot != 0.0 {
            return Err(Error::Config(format!(
                "continuum `{}`: the fracture continuum is mechanically passive, Biot coefficient must be 0",
                self.name
            )));
        }
        let n = self.element_count(mesh);
        if self.permeability.len() != n {
            return Err(Error::Contract(format!(
                "continuum `{}`: {} permeability values for {n} elements",
                self.name,
                self.permeability.len()
            )));
        }
        if let Some(e) = self
            .permeability
            .iter()
            .position(|&k| !(k > 0.0 && k.is_finite()))
        {
            return Err(Error::Data(format!(
                "continuum `{}`: permeability {} on element {e} must be positive",
                self.name, self.permeability[e]
            )));
        }
        Ok(())
    }
}

/// Mass transfer between two continua, η per triangle (bulk–bulk) or per
/// fracture edge (bulk–fracture, per unit length).
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeSpec {
    pub first: usize,
    pub second: usize,
    pub eta: Vec<f64>,
}

impl ExchangeSpec {
    pub fn new(first: usize, second: usize, eta: Vec<f64>) -> Self {
        Self { first, second, eta }
    }
}

/// Plane-strain isotropic elasticity with a per-triangle Young's modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticitySpec {
    pub young: Vec<f64>,
    pub poisson: f64,
}

impl ElasticitySpec {
    pub fn validate(&self, mesh: &FineMesh) -> Result<()> {
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::Data(format!(
                "Poisson ratio {} outside (0, 0.5)",
                self.poisson
            )));
        }
        if self.young.len() != mesh.triangle_count() {
            return Err(Error::Contract(format!(
                "{} Young's modulus values for {} triangles",
                self.young.len(),
                mesh.triangle_count()
            )));
        }
        if let Some(t) = self.young.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Data(format!(
                "Young's modulus {} on triangle {t} must be positive",
                self.young[t]
            )));
        }
        Ok(())
    }

    /// λ + 2μ per triangle.
    pub fn p_wave_modulus(&self) -> Vec<f64> {
        self.young
            .iter()
            .map(|&e| {
                let (l, m) = lame(e, self.poisson);
                l + 2.0 * m
            })
            .collect()
    }
}

/// Continua, exchanges and elasticity of one poroelastic model.
#[derive(Debug, Clone, PartialEq)]
pub struct PoroModel {
    pub continua: Vec<ContinuumSpec>,
    pub exchanges: Vec<ExchangeSpec>,
    pub elasticity: ElasticitySpec,
}

impl PoroModel {
    pub fn validate(&self, mesh: &FineMesh) -> Result<()> {
        if self.continua.is_empty() {
            return Err(Error::Config(
                "model needs at least one pressure continuum".into(),
            ));
        }
        if self.continua.iter().all(|c| c.is_fracture()) {
            return Err(Error::Config(
                "model needs at least one bulk continuum".into(),
            ));
        }
        if self.continua.iter().filter(|c| c.is_fracture()).count() > 1 {
            return Err(Error::Config(
                "at most one fracture continuum is supported".into(),
            ));
        }
        for (i, c) in self.continua.iter().enumerate() {
            c.validate(mesh)?;
            if self.continua[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Config(format!(
                    "continuum name `{}` used twice",
                    c.name
                )));
            }
        }
        let mut pairs = Vec::new();
        for ex in &self.exchanges {
            let m = self.continua.len();
            if ex.first >= m || ex.second >= m {
                return Err(Error::Config(format!(
                    "exchange references continuum {} of {m}",
                    ex.first.max(ex.second)
                )));
            }
            if ex.first == ex.second {
                return Err(Error::Contract(format!(
                    "exchange of continuum {} with itself is undefined",
                    ex.first
                )));
            }
            let key = (ex.first.min(ex.second), ex.first.max(ex.second));
            if pairs.contains(&key) {
                return Err(Error::Config(format!(
                    "exchange between {} and {} given twice",
                    key.0, key.1
                )));
            }
            pairs.push(key);
            let (a, b) = (&self.continua[ex.first], &self.continua[ex.second]);
            let expected = match (a.support, b.support) {
                (Support::Bulk, Support::Bulk) => mesh.triangle_count(),
                (Support::Fracture, Support::Fracture) => {
                    return Err(Error::Contract(
                        "fracture-fracture exchange is undefined".into(),
                    ))
                }
                _ => mesh.fracture_edges().len(),
            };
            if ex.eta.len() != expected {
                return Err(Error::Contract(format!(
                    "exchange {}-{}: {} η values for {expected} elements",
                    a.name,
                    b.name,
                    ex.eta.len()
                )));
            }
            if let Some(e) = ex.eta.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Data(format!(
                    "exchange {}-{}: η = {} on element {e}",
                    a.name, b.name, ex.eta[e]
                )));
            }
        }
        self.elasticity.validate(mesh)
    }

    pub fn continuum_index(&self, name: &str) -> Option<usize> {
        self.continua.iter().position(|c| c.name == name)
    }
}

/// Offsets of the pressure blocks (in continuum order) and the displacement
/// block inside the monolithic unknown vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    displacement: usize,
}

impl DofLayout {
    pub fn new(mesh: &FineMesh, continua: &[ContinuumSpec]) -> Self {
        Self::from_sizes(
            continua.iter().map(|c| c.dof_count(mesh)).collect(),
            2 * mesh.node_count(),
        )
    }

    pub fn from_sizes(sizes: Vec<usize>, displacement: usize) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        for s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        offsets.push(acc);
        Self {
            sizes,
            offsets,
            displacement,
        }
    }

    pub fn continua(&self) -> usize {
        self.sizes.len()
    }

    pub fn pressure_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn pressure_size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn pressure_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn pressure_total(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    pub fn displacement_offset(&self) -> usize {
        self.pressure_total()
    }

    pub fn displacement_size(&self) -> usize {
        self.displacement
    }

    pub fn displacement_range(&self) -> std::ops::Range<usize> {
        self.pressure_total()..self.total()
    }

    pub fn total(&self) -> usize {
        self.pressure_total() + self.displacement_size()
    }
}

/// Exchange contribution between continua `first` and `second`:
/// row `first` gets `diag_first · p_first − cross · p_second`, row `second`
/// gets `diag_second · p_second − crossᵀ · p_first`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeBlocks {
    pub first: usize,
    pub second: usize,
    pub diag_first: CsrMatrix,
    pub diag_second: CsrMatrix,
    pub cross: CsrMatrix,
}

/// Every fine matrix of the discrete system.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub layout: DofLayout,
    /// A_i.
    pub stiffness: Vec<CsrMatrix>,
    /// M_i, weighted by c_i.
    pub mass: Vec<CsrMatrix>,
    /// Unweighted mass per continuum, the L2 inner product.
    pub plain_mass: Vec<CsrMatrix>,
    /// D_i: pressure rows, displacement columns.
    pub coupling: Vec<CsrMatrix>,
    pub exchange: Vec<ExchangeBlocks>,
    /// A_u.
    pub elasticity: CsrMatrix,
}

/// Subset of mesh elements an assembly loop visits.
#[derive(Debug, Clone, Copy)]
pub struct Elements<'a> {
    pub triangles: &'a [usize],
    pub fracture_edges: &'a [usize],
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn with_all<T>(mesh: &FineMesh, f: impl FnOnce(Elements<'_>) -> T) -> T {
    let t = all(mesh.triangle_count());
    let e = all(mesh.fracture_edges().len());
    f(Elements {
        triangles: &t,
        fracture_edges: &e,
    })
}

/// Bulk stiffness `∫ k ∇φ_l · ∇φ_n` with `k` per triangle.
pub fn assemble_scalar_stiffness(mesh: &FineMesh, k: &[f64], el: Elements<'_>) -> CsrMatrix {
    let n = mesh.node_count();
    let mut t = TripletList::with_capacity(n, n, 9 * el.triangles.len());
    for &tri in el.triangles {
        let local = element_stiffness(mesh.triangle_points(tri), k[tri]);
        let ids = mesh.triangle(tri);
        for a in 0..3 {
            for b in 0..3 {
                t.push(ids[a], ids[b], local[a][b]);
            }
        }
    }
    t.build()
}

/// Bulk mass `∫ w φ_l φ_n` with `w` per triangle.
pub fn assemble_weighted_mass(mesh: &FineMesh, w: &[f64], el: Elements<'_>) -> CsrMatrix {
    let n = mesh.node_count();
    let mut t = TripletList::with_capacity(n, n, 9 * el.triangles.len());
    for &tri in el.triangles {
        let local = element_mass(mesh.triangle_area(tri), w[tri]);
        let ids = mesh.triangle(tri);
        for a in 0..3 {
            for b in 0..3 {
                t.push(ids[a], ids[b], local[a][b]);
            }
        }
    }
    t.build()
}

/// Fracture stiffness `∫_γ k_f φ_l' φ_n'` over fracture DOFs.
pub fn assemble_fracture_stiffness_with(mesh: &FineMesh, k: &[f64], el: Elements<'_>) -> CsrMatrix {
    fracture_edge_loop(mesh, el, |e, len| {
        let s = k[e] / len;
        [[s, -s], [-s, s]]
    })
}

/// Fracture mass `∫_γ w φ_l φ_n` over fracture DOFs.
pub fn assemble_fracture_mass_with(mesh: &FineMesh, w: &[f64], el: Elements<'_>) -> CsrMatrix {
    fracture_edge_loop(mesh, el, |e, len| {
        let s = w[e] * len / 6.0;
        [[2.0 * s, s], [s, 2.0 * s]]
    })
}

fn fracture_edge_loop(
    mesh: &FineMesh,
    el: Elements<'_>,
    local: impl Fn(usize, f64) -> [[f64; 2]; 2],
) -> CsrMatrix {
    let nf = mesh.fracture_dof_count();
    let mut t = TripletList::with_capacity(nf, nf, 4 * el.fracture_edges.len());
    for &e in el.fracture_edges {
        let m = local(e, mesh.fracture_edge_length(e));
        let [a, b] = mesh.fracture_edges()[e];
        let ids = [mesh.fracture_dof(a).unwrap(), mesh.fracture_dof(b).unwrap()];
        for i in 0..2 {
            for j in 0..2 {
                t.push(ids[i], ids[j], m[i][j]);
            }
        }
    }
    t.build()
}

/// Node-to-fracture-DOF embedding `P` (nodes × fracture DOFs).
pub fn fracture_embedding(mesh: &FineMesh) -> CsrMatrix {
    let entries: Vec<_> = mesh
        .fracture_nodes()
        .iter()
        .enumerate()
        .map(|(k, &v)| (v, k, 1.0))
        .collect();
    CsrMatrix::from_triplets(mesh.node_count(), mesh.fracture_dof_count(), &entries)
}

pub fn assemble_stiffness(spec: &ContinuumSpec, mesh: &FineMesh) -> Result<CsrMatrix> {
    spec.validate(mesh)?;
    Ok(with_all(mesh, |el| stiffness_on(spec, mesh, el)))
}

pub fn assemble_fracture_stiffness(spec: &ContinuumSpec, mesh: &FineMesh) -> Result<CsrMatrix> {
    if !spec.is_fracture() {
        return Err(Error::Contract(format!(
            "`{}` is not a fracture continuum",
            spec.name
        )));
    }
    assemble_stiffness(spec, mesh)
}

pub fn assemble_mass(spec: &ContinuumSpec, mesh: &FineMesh) -> Result<CsrMatrix> {
    spec.validate(mesh)?;
    Ok(with_all(mesh, |el| mass_on(spec, mesh, spec.storage, el)))
}

fn stiffness_on(spec: &ContinuumSpec, mesh: &FineMesh, el: Elements<'_>) -> CsrMatrix {
    match spec.support {
        Support::Bulk => assemble_scalar_stiffness(mesh, &spec.permeability, el),
        Support::Fracture => assemble_fracture_stiffness_with(mesh, &spec.permeability, el),
    }
}

fn mass_on(spec: &ContinuumSpec, mesh: &FineMesh, c: f64, el: Elements<'_>) -> CsrMatrix {
    match spec.support {
        Support::Bulk => assemble_weighted_mass(mesh, &vec![c; mesh.triangle_count()], el),
        Support::Fracture => {
            assemble_fracture_mass_with(mesh, &vec![c; mesh.fracture_edges().len()], el)
        }
    }
}

/// k-weighted mass of a continuum, the spectral-problem weight.
pub fn permeability_mass(spec: &ContinuumSpec, mesh: &FineMesh, el: Elements<'_>) -> CsrMatrix {
    match spec.support {
        Support::Bulk => assemble_weighted_mass(mesh, &spec.permeability, el),
        Support::Fracture => assemble_fracture_mass_with(mesh, &spec.permeability, el),
    }
}

/// Exchange blocks for one pair of continua.
pub fn assemble_exchange(
    model: &PoroModel,
    ex: &ExchangeSpec,
    mesh: &FineMesh,
) -> Result<ExchangeBlocks> {
    model.validate(mesh)?;
    with_all(mesh, |el| exchange_on(model, ex, mesh, el))
}

fn exchange_on(
    model: &PoroModel,
    ex: &ExchangeSpec,
    mesh: &FineMesh,
    el: Elements<'_>,
) -> Result<ExchangeBlocks> {
    let (a, b) = (&model.continua[ex.first], &model.continua[ex.second]);
    match (a.support, b.support) {
        (Support::Bulk, Support::Bulk) => {
            let q = assemble_weighted_mass(mesh, &ex.eta, el);
            Ok(ExchangeBlocks {
                first: ex.first,
                second: ex.second,
                diag_first: q.clone(),
                diag_second: q.clone(),
                cross: q,
            })
        }
        (Support::Fracture, Support::Fracture) => Err(Error::Contract(
            "fracture-fracture exchange is undefined".into(),
        )),
        _ => {
            let e = assemble_fracture_mass_with(mesh, &ex.eta, el);
            let p = fracture_embedding(mesh);
            let bulk_diag = p.matmul(&e).matmul(&p.transpose());
            let bulk_cross = p.matmul(&e);
            if a.is_fracture() {
                Ok(ExchangeBlocks {
                    first: ex.first,
                    second: ex.second,
                    diag_first: e,
                    diag_second: bulk_diag,
                    cross: bulk_cross.transpose(),
                })
            } else {
                Ok(ExchangeBlocks {
                    first: ex.first,
                    second: ex.second,
                    diag_first: bulk_diag,
                    diag_second: e,
                    cross: bulk_cross,
                })
            }
        }
    }
}

/// `D` with entries `∫ γ div Φ_l φ_n`: pressure rows, displacement columns.
pub fn assemble_coupling(spec: &ContinuumSpec, mesh: &FineMesh) -> CsrMatrix {
    with_all(mesh, |el| coupling_on(spec, mesh, el))
}

fn coupling_on(spec: &ContinuumSpec, mesh: &FineMesh, el: Elements<'_>) -> CsrMatrix {
    let n = mesh.node_count();
    let rows = spec.dof_count(mesh);
    if spec.biot == 0.0 || spec.is_fracture() {
        return CsrMatrix::zeros(rows, 2 * n);
    }
    let mut t = TripletList::with_capacity(rows, 2 * n, 18 * el.triangles.len());
    for &tri in el.triangles {
        let g = gradients(mesh.triangle_points(tri));
        let s = spec.biot * mesh.triangle_area(tri) / 3.0;
        let ids = mesh.triangle(tri);
        for &row in &ids {
            for (b, &col) in ids.iter().enumerate() {
                t.push(row, 2 * col, s * g[b][0]);
                t.push(row, 2 * col + 1, s * g[b][1]);
            }
        }
    }
    t.build()
}

/// Plane-strain stiffness `∫ σ(Φ_l) : ε(Φ_n)`.
pub fn assemble_elasticity(spec: &ElasticitySpec, mesh: &FineMesh) -> Result<CsrMatrix> {
    spec.validate(mesh)?;
    Ok(with_all(mesh, |el| elasticity_on(spec, mesh, el)))
}

pub fn elasticity_on(spec: &ElasticitySpec, mesh: &FineMesh, el: Elements<'_>) -> CsrMatrix {
    let n = 2 * mesh.node_count();
    let mut t = TripletList::with_capacity(n, n, 36 * el.triangles.len());
    for &tri in el.triangles {
        let (l, m) = lame(spec.young[tri], spec.poisson);
        let local = element::element_elasticity(mesh.triangle_points(tri), l, m);
        let ids = mesh.triangle(tri);
        for a in 0..6 {
            for b in 0..6 {
                t.push(2 * ids[a / 2] + a % 2, 2 * ids[b / 2] + b % 2, local[a][b]);
            }
        }
    }
    t.build()
}

/// Vector mass `∫ w Φ_l · Φ_n` on interleaved displacement DOFs.
pub fn assemble_vector_mass(mesh: &FineMesh, w: &[f64], el: Elements<'_>) -> CsrMatrix {
    let n = 2 * mesh.node_count();
    let mut t = TripletList::with_capacity(n, n, 18 * el.triangles.len());
    for &tri in el.triangles {
        let local = element_mass(mesh.triangle_area(tri), w[tri]);
        let ids = mesh.triangle(tri);
        for a in 0..3 {
            for b in 0..3 {
                t.push(2 * ids[a], 2 * ids[b], local[a][b]);
                t.push(2 * ids[a] + 1, 2 * ids[b] + 1, local[a][b]);
            }
        }
    }
    t.build()
}

/// Assembles every matrix of the model over the selected elements.
pub fn assemble_system_on(
    model: &PoroModel,
    mesh: &FineMesh,
    el: Elements<'_>,
) -> Result<SystemMatrices> {
    let layout = DofLayout::new(mesh, &model.continua);
    let stiffness = model
        .continua
        .iter()
        .map(|c| stiffness_on(c, mesh, el))
        .collect();
    let mass = model
        .continua
        .iter()
        .map(|c| mass_on(c, mesh, c.storage, el))
        .collect();
    let plain_mass = model
        .continua
        .iter()
        .map(|c| mass_on(c, mesh, 1.0, el))
        .collect();
    let coupling = model
        .continua
        .iter()
        .map(|c| coupling_on(c, mesh, el))
        .collect();
    let exchange = model
        .exchanges
        .iter()
        .map(|ex| exchange_on(model, ex, mesh, el))
        .collect::<Result<_>>()?;
    let elasticity = elasticity_on(&model.elasticity, mesh, el);
    let sys = SystemMatrices {
        layout,
        stiffness,
        mass,
        plain_mass,
        coupling,
        exchange,
        elasticity,
    };
    sys.debug_check();
    Ok(sys)
}

/// Validates the model and assembles every matrix on the whole mesh.
pub fn assemble_system(model: &PoroModel, mesh: &FineMesh) -> Result<SystemMatrices> {
    model.validate(mesh)?;
    with_all(mesh, |el| assemble_system_on(model, mesh, el))
}

impl SystemMatrices {
    fn debug_check(&self) {
        if cfg!(debug_assertions) {
            for m in self
                .stiffness
                .iter()
                .chain(&self.mass)
                .chain(std::iter::once(&self.elasticity))
            {
                debug_assert!(m.is_symmetric(1e-12), "assembled matrix is not symmetric");
            }
            for ex in &self.exchange {
                debug_assert!(
                    ex.diag_first.is_symmetric(1e-12) && ex.diag_second.is_symmetric(1e-12)
                );
            }
        }
    }

    /// Flow operator of continuum `i` without storage: A_i plus its exchange
    /// diagonal contributions.
    pub fn flow_diagonal(&self, i: usize) -> CsrMatrix {
        let mut m = self.stiffness[i].clone();
        for ex in &self.exchange {
            if ex.first == i {
                m = m.linear_combination(1.0, &ex.diag_first, 1.0);
            } else if ex.second == i {
                m = m.linear_combination(1.0, &ex.diag_second, 1.0);
            }
        }
        m
    }

    /// Coupled steady flow operator over all pressure blocks (stiffness plus
    /// exchange), in the pressure part of the layout.
    pub fn coupled_flow(&self) -> CsrMatrix {
        let np = self.layout.pressure_total();
        let mut t = TripletList::new(np, np);
        for i in 0..self.layout.continua() {
            let o = self.layout.pressure_offset(i);
            t.add_block(o, o, &self.flow_diagonal(i), 1.0);
        }
        for ex in &self.exchange {
            let (oa, ob) = (
                self.layout.pressure_offset(ex.first),
                self.layout.pressure_offset(ex.second),
            );
            t.add_block(oa, ob, &ex.cross, -1.0);
            t.add_block_transposed(ob, oa, &ex.cross, -1.0);
        }
        t.build()
    }
}

/// Consistent load vector `∫ f φ_l` by 3-point Gauss quadrature.
pub fn assemble_manufactured_source(mesh: &FineMesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.node_count()];
    for tri in 0..mesh.triangle_count() {
        let local = element::element_load(mesh.triangle_points(tri), &f);
        for (a, &v) in mesh.triangle(tri).iter().enumerate() {
            b[v] += local[a];
        }
    }
    b
}

#[cfg(test)]
mod tests;
