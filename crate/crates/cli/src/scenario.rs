//! Scenario files (TOML, `schema_version = 1`).
//!
//! ```toml
//! schema_version = 1
//! seed = 0
//! output = "out/seed0"              # optional, relative to the file
//!
//! [mesh]                            # exactly one of `path` / `structured`
//! path = "fine.mesh"
//! [mesh.structured]
//! extents = [50.0, 50.0]
//! cells = [110, 110]
//! fractures = [{ start = [10, 20], direction = "horizontal", length = 30 }]
//!
//! [coarse]
//! nx = 10
//! ny = 10
//!
//! [time]
//! final_time = 86400.0
//! steps = 10
//!
//! [fields.k1]                       # named synthetic fields
//! style = "lognormal-blobs"         # or "layered"
//! contrast = 1000.0
//! correlation_length = 2.5          # optional, default extent / 20
//! seed_offset = 0                   # optional
//!
//! [[continuum]]
//! name = "p1"
//! kind = "bulk"                     # or "fracture"
//! storage = 0.1                     # c = 1/M
//! permeability = { base = 1e-5, field = "k1" }   # or a number
//! biot = 0.1                        # default 0
//!
//! [[exchange]]
//! between = ["p1", "p2"]
//! eta = "5*k2"                      # or a number; "k<i>" is the i-th continuum's permeability
//!
//! [elasticity]
//! young = { base = 1.0, field = "E" }
//! poisson = 0.3
//!
//! [boundary]
//! displacement = "roller"           # or { clamped = ["left"] }
//! pressure = [{ continua = ["p1"], sides = ["left"], value = 0.0 }]
//!
//! [initial]
//! pressure = 1.0                    # or { p1 = 1.0, f = 0.5 }
//!
//! [fractional]                      # α, β: a number or a per-continuum table
//! alpha = 0.9
//! beta = { p1 = 0.9, f = 1.0 }
//!
//! [experiment]
//! basis_counts = [1, 2, 4, 8, 12]
//! alpha_sweep = [0.8, 0.9, 1.0]     # optional: runs with α = β = value for every continuum
//! export_steps = [0, 10]            # optional, default the final step
//! error_continua = ["p1"]           # optional, default every bulk continuum
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fracporo::assembly::{BoundarySpec, PressureDirichlet, Support};
use fracporo::mesh::{BoundaryTags, FractureDirection, LatticeFracture};
use serde::Deserialize;

use crate::synthetic::FieldStyle;
use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    schema_version: u32,
    #[serde(default)]
    seed: u64,
    output: Option<PathBuf>,
    mesh: MeshSection,
    coarse: CoarseSection,
    time: TimeSection,
    #[serde(default)]
    fields: BTreeMap<String, FieldSection>,
    continuum: Vec<ContinuumSection>,
    #[serde(default)]
    exchange: Vec<ExchangeSection>,
    elasticity: ElasticitySection,
    #[serde(default)]
    boundary: BoundarySection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    fractional: FractionalSection,
    experiment: ExperimentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshSection {
    path: Option<PathBuf>,
    structured: Option<StructuredSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredSection {
    extents: [f64; 2],
    #[serde(default)]
    origin: [f64; 2],
    cells: [usize; 2],
    #[serde(default)]
    fractures: Vec<FractureSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FractureSection {
    start: [usize; 2],
    direction: String,
    length: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoarseSection {
    nx: usize,
    ny: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    final_time: f64,
    steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldSection {
    style: String,
    contrast: f64,
    correlation_length: Option<f64>,
    #[serde(default)]
    seed_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Coefficient {
    Constant(f64),
    Field { base: f64, field: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuumSection {
    name: String,
    kind: String,
    storage: f64,
    permeability: Coefficient,
    #[serde(default)]
    biot: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EtaSection {
    Value(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExchangeSection {
    between: [String; 2],
    eta: EtaSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElasticitySection {
    young: Coefficient,
    poisson: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DisplacementSection {
    Named(String),
    Clamped { clamped: Vec<String> },
}

impl Default for DisplacementSection {
    fn default() -> Self {
        DisplacementSection::Named("roller".into())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundarySection {
    #[serde(default)]
    displacement: DisplacementSection,
    #[serde(default)]
    pressure: Vec<PressureSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PressureSection {
    continua: Option<Vec<String>>,
    sides: Vec<String>,
    #[serde(default)]
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerContinuum {
    Uniform(f64),
    Table(BTreeMap<String, f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    pressure: Option<PerContinuum>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FractionalSection {
    alpha: Option<PerContinuum>,
    beta: Option<PerContinuum>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    basis_counts: Vec<usize>,
    #[serde(default)]
    alpha_sweep: Vec<f64>,
    export_steps: Option<Vec<usize>>,
    error_continua: Option<Vec<String>>,
}

/// Where the fine mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Structured {
        origin: [f64; 2],
        extents: [f64; 2],
        cells: [usize; 2],
        fractures: Vec<LatticeFracture>,
    },
}

/// Parameters of a synthetic coefficient field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDef {
    pub style: FieldStyle,
    pub contrast: f64,
    pub correlation_length: Option<f64>,
    pub seed_offset: u64,
}

/// Exchange coefficient: a constant or a multiple of a continuum's permeability.
#[derive(Debug, Clone, PartialEq)]
pub enum Eta {
    Constant(f64),
    PermeabilityMultiple { factor: f64, continuum: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumDef {
    pub name: String,
    pub support: Support,
    pub storage: f64,
    pub permeability: Coefficient,
    pub biot: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeDef {
    pub first: usize,
    pub second: usize,
    pub eta: Eta,
}

/// A validated scenario with defaults filled in and names resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    /// Directory of the scenario file; relative paths are resolved against it.
    pub base_dir: PathBuf,
    pub output: Option<PathBuf>,
    pub mesh: MeshSource,
    pub coarse: [usize; 2],
    pub final_time: f64,
    pub steps: usize,
    pub fields: BTreeMap<String, FieldDef>,
    pub continua: Vec<ContinuumDef>,
    pub exchanges: Vec<ExchangeDef>,
    pub young: Coefficient,
    pub poisson: f64,
    pub boundary: BoundarySpec,
    pub initial_pressure: Vec<f64>,
    pub basis_counts: Vec<usize>,
    pub alpha_sweep: Vec<f64>,
    pub export_steps: Vec<usize>,
    pub error_continua: Vec<usize>,
}

impl Scenario {
    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn max_basis_count(&self) -> usize {
        *self.basis_counts.last().expect("validated non-empty")
    }

    /// Copy with α = β = `order` for every continuum.
    pub fn with_uniform_order(&self, order: f64) -> Scenario {
        let mut s = self.clone();
        for c in &mut s.continua {
            c.alpha = order;
            c.beta = order;
        }
        s
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| self.base_dir.join("out"))
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Scenario(msg.into())
}

fn side_tags(sides: &[String]) -> CliResult<BoundaryTags> {
    if sides.is_empty() {
        return Err(invalid("boundary condition lists no sides"));
    }
    sides.iter().try_fold(BoundaryTags::NONE, |acc, s| {
        if s == "all" {
            return Ok(BoundaryTags::ALL);
        }
        BoundaryTags::parse_side(s)
            .map(|t| acc | t)
            .ok_or_else(|| invalid(format!("unknown boundary side '{s}'")))
    })
}

fn direction(s: &str) -> CliResult<FractureDirection> {
    Ok(match s {
        "horizontal" => FractureDirection::Horizontal,
        "vertical" => FractureDirection::Vertical,
        "diagonal" => FractureDirection::Diagonal,
        "anti-diagonal" | "antidiagonal" => FractureDirection::AntiDiagonal,
        other => return Err(invalid(format!("unknown fracture direction '{other}'"))),
    })
}

fn parse_eta(text: &str, names: &[String]) -> CliResult<Eta> {
    let bad = || {
        invalid(format!("exchange coefficient '{text}' is not of the form '<factor>*k<i>' or '<factor>*k:<name>'"))
    };
    let (factor, field) = text.split_once('*').ok_or_else(bad)?;
    let factor: f64 = factor.trim().parse().map_err(|_| bad())?;
    let field = field.trim();
    let continuum = if let Some(name) = field.strip_prefix("k:") {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown continuum '{name}' in '{text}'")))?
    } else {
        let i: usize = field
            .strip_prefix('k')
            .and_then(|s| s.parse().ok())
            .ok_or_else(bad)?;
        if i == 0 || i > names.len() {
            return Err(invalid(format!(
                "'{text}' refers to continuum {i} of {}",
                names.len()
            )));
        }
        i - 1
    };
    Ok(Eta::PermeabilityMultiple { factor, continuum })
}

fn per_continuum(
    v: &Option<PerContinuum>,
    names: &[String],
    default: f64,
    what: &str,
) -> CliResult<Vec<f64>> {
    match v {
        None => Ok(vec![default; names.len()]),
        Some(PerContinuum::Uniform(x)) => Ok(vec![*x; names.len()]),
        Some(PerContinuum::Table(t)) => {
            if let Some(k) = t.keys().find(|k| !names.contains(k)) {
                return Err(invalid(format!("{what} given for unknown continuum '{k}'")));
            }
            Ok(names
                .iter()
                .map(|n| t.get(n).copied().unwrap_or(default))
                .collect())
        }
    }
}

fn check_order(x: f64, what: &str) -> CliResult<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} = {x} is outside (0, 1]")))
    }
}

/// Parses and validates scenario text. `base_dir` anchors relative paths.
pub fn parse_scenario_str(text: &str, base_dir: &Path) -> CliResult<Scenario> {
    let f: File = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
    if f.schema_version != SCHEMA_VERSION {
        return Err(invalid(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            f.schema_version
        )));
    }
    let mesh = match (f.mesh.path, f.mesh.structured) {
        (Some(p), None) => {
            let p = base_dir.join(p);
            if !p.is_file() {
                return Err(invalid(format!("mesh file {} does not exist", p.display())));
            }
            MeshSource::File(p)
        }
        (None, Some(s)) => {
            if s.cells[0] == 0 || s.cells[1] == 0 || !(s.extents[0] > 0.0 && s.extents[1] > 0.0) {
                return Err(invalid("structured mesh needs positive cells and extents"));
            }
            let fractures = s
                .fractures
                .iter()
                .map(|fr| {
                    Ok(LatticeFracture::new(
                        fr.start,
                        direction(&fr.direction)?,
                        fr.length,
                    ))
                })
                .collect::<CliResult<_>>()?;
            MeshSource::Structured {
                origin: s.origin,
                extents: s.extents,
                cells: s.cells,
                fractures,
            }
        }
        _ => {
            return Err(invalid(
                "[mesh] needs exactly one of 'path' or 'structured'",
            ))
        }
    };
    if f.coarse.nx == 0 || f.coarse.ny == 0 {
        return Err(invalid("coarse grid needs at least one cell per direction"));
    }
    if f.time.steps == 0 || !(f.time.final_time > 0.0) || !f.time.final_time.is_finite() {
        return Err(invalid("time step T/N_T must be positive"));
    }

    let mut fields = BTreeMap::new();
    for (name, fs) in f.fields {
        let style = match fs.style.as_str() {
            "layered" => FieldStyle::Layered,
            "lognormal-blobs" => FieldStyle::LognormalBlobs,
            other => return Err(invalid(format!("field '{name}': unknown style '{other}'"))),
        };
        if !(fs.contrast >= 1.0) || !fs.contrast.is_finite() {
            return Err(invalid(format!(
                "field '{name}': contrast must be at least 1"
            )));
        }
        if fs.correlation_length.is_some_and(|l| !(l > 0.0)) {
            return Err(invalid(format!(
                "field '{name}': correlation_length must be positive"
            )));
        }
        fields.insert(
            name,
            FieldDef {
                style,
                contrast: fs.contrast,
                correlation_length: fs.correlation_length,
                seed_offset: fs.seed_offset,
            },
        );
    }
    let check_coef = |c: &Coefficient, what: &str| -> CliResult<()> {
        match c {
            Coefficient::Constant(_) => Ok(()),
            Coefficient::Field { field, .. } if fields.contains_key(field) => Ok(()),
            Coefficient::Field { field, .. } => {
                Err(invalid(format!("{what} refers to unknown field '{field}'")))
            }
        }
    };

    if f.continuum.is_empty() {
        return Err(invalid("at least one [[continuum]] is required"));
    }
    let names: Vec<String> = f.continuum.iter().map(|c| c.name.clone()).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(invalid(format!("duplicate continuum name '{n}'")));
        }
    }
    let alpha = per_continuum(&f.fractional.alpha, &names, 1.0, "alpha")?;
    let beta = per_continuum(&f.fractional.beta, &names, 1.0, "beta")?;
    let mut continua = Vec::new();
    for (i, c) in f.continuum.into_iter().enumerate() {
        let support = match c.kind.as_str() {
            "bulk" => Support::Bulk,
            "fracture" => Support::Fracture,
            other => {
                return Err(invalid(format!(
                    "continuum '{}': unknown kind '{other}'",
                    c.name
                )))
            }
        };
        check_coef(&c.permeability, &format!("continuum '{}'", c.name))?;
        if support == Support::Fracture && matches!(c.permeability, Coefficient::Field { .. }) {
            return Err(invalid(format!(
                "fracture continuum '{}' needs a constant permeability",
                c.name
            )));
        }
        check_order(alpha[i], &format!("alpha of '{}'", c.name))?;
        check_order(beta[i], &format!("beta of '{}'", c.name))?;
        continua.push(ContinuumDef {
            name: c.name,
            support,
            storage: c.storage,
            permeability: c.permeability,
            biot: c.biot,
            alpha: alpha[i],
            beta: beta[i],
        });
    }
    let index = |n: &str| {
        names
            .iter()
            .position(|m| m == n)
            .ok_or_else(|| invalid(format!("unknown continuum '{n}'")))
    };

    let mut exchanges = Vec::new();
    for ex in f.exchange {
        let first = index(&ex.between[0])?;
        let second = index(&ex.between[1])?;
        let eta = match ex.eta {
            EtaSection::Value(v) => Eta::Constant(v),
            EtaSection::Expr(s) => parse_eta(&s, &names)?,
        };
        if let Eta::PermeabilityMultiple { continuum, .. } = eta {
            if continua[first].support != Support::Bulk || continua[second].support != Support::Bulk
            {
                return Err(invalid(
                    "permeability-multiple exchange coefficients need two bulk continua",
                ));
            }
            if continua[continuum].support != Support::Bulk {
                return Err(invalid(
                    "exchange coefficient must refer to a bulk permeability",
                ));
            }
        }
        exchanges.push(ExchangeDef { first, second, eta });
    }

    check_coef(&f.elasticity.young, "elasticity")?;
    let displacement = match f.boundary.displacement {
        DisplacementSection::Named(s) if s == "roller" => BoundarySpec::roller(),
        DisplacementSection::Named(s) => {
            return Err(invalid(format!("unknown displacement condition '{s}'")))
        }
        DisplacementSection::Clamped { clamped } => BoundarySpec::clamped(side_tags(&clamped)?),
    };
    let mut pressure = Vec::new();
    for p in &f.boundary.pressure {
        let sides = side_tags(&p.sides)?;
        let targets: Vec<usize> = match &p.continua {
            Some(list) => list.iter().map(|n| index(n)).collect::<CliResult<_>>()?,
            None => (0..continua.len())
                .filter(|&i| continua[i].support == Support::Bulk)
                .collect(),
        };
        for continuum in targets {
            pressure.push(PressureDirichlet {
                continuum,
                sides,
                value: p.value,
            });
        }
    }
    let boundary = BoundarySpec {
        pressure,
        displacement,
    };
    let initial_pressure = per_continuum(&f.initial.pressure, &names, 1.0, "initial pressure")?;

    let e = f.experiment;
    if e.basis_counts.is_empty()
        || e.basis_counts[0] == 0
        || e.basis_counts.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(invalid(
            "basis_counts must be positive and strictly ascending",
        ));
    }
    for &a in &e.alpha_sweep {
        check_order(a, "alpha_sweep entry")?;
    }
    let export_steps = e.export_steps.unwrap_or_else(|| vec![f.time.steps]);
    if let Some(&s) = export_steps.iter().find(|&&s| s > f.time.steps) {
        return Err(invalid(format!(
            "export step {s} is beyond N_T = {}",
            f.time.steps
        )));
    }
    let error_continua = match e.error_continua {
        Some(list) => list
            .iter()
            .map(|n| index(n))
            .collect::<CliResult<Vec<_>>>()?,
        None => (0..continua.len())
            .filter(|&i| continua[i].support == Support::Bulk)
            .collect(),
    };
    if error_continua.is_empty() {
        return Err(invalid("no continuum selected for the error tables"));
    }

    Ok(Scenario {
        seed: f.seed,
        base_dir: base_dir.to_path_buf(),
        output: f.output.map(|p| base_dir.join(p)),
        mesh,
        coarse: [f.coarse.nx, f.coarse.ny],
        final_time: f.time.final_time,
        steps: f.time.steps,
        fields,
        continua,
        exchanges,
        young: f.elasticity.young,
        poisson: f.elasticity.poisson,
        boundary,
        initial_pressure,
        basis_counts: e.basis_counts,
        alpha_sweep: e.alpha_sweep,
        export_steps,
        error_continua,
    })
}

pub fn parse_scenario(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario_str(&text, &base)
}
