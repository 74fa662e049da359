use super::{DofLayout, PoroModel, Support};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::mesh::{BoundaryTags, FineMesh};
use crate::sparse::CsrMatrix;

/// Fixed pressure of one continuum on a set of sides.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureDirichlet {
    pub continuum: usize,
    pub sides: BoundaryTags,
    pub value: f64,
}

/// Fixed displacement components on a set of sides.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementDirichlet {
    pub sides: BoundaryTags,
    pub components: [bool; 2],
    pub value: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySpec {
    pub pressure: Vec<PressureDirichlet>,
    pub displacement: Vec<DisplacementDirichlet>,
}

impl BoundarySpec {
    /// Roller conditions: `u_x = 0` on left/right, `u_y = 0` on bottom/top.
    pub fn roller() -> Vec<DisplacementDirichlet> {
        vec![
            DisplacementDirichlet {
                sides: BoundaryTags::LEFT | BoundaryTags::RIGHT,
                components: [true, false],
                value: [0.0; 2],
            },
            DisplacementDirichlet {
                sides: BoundaryTags::BOTTOM | BoundaryTags::TOP,
                components: [false, true],
                value: [0.0; 2],
            },
        ]
    }

    /// Both components fixed to zero on `sides`.
    pub fn clamped(sides: BoundaryTags) -> Vec<DisplacementDirichlet> {
        vec![DisplacementDirichlet {
            sides,
            components: [true, true],
            value: [0.0; 2],
        }]
    }
}

/// Dirichlet-constrained DOFs of the monolithic system and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    n: usize,
    dofs: Vec<usize>,
    values: Vec<f64>,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
    constrained_index: Vec<Option<usize>>,
}

impl Constraints {
    /// Builds the set from `(dof, value)` pairs; repeated DOFs must agree.
    pub fn new(n: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|a| a.0);
        let mut dofs: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (d, v) in pairs {
            if d >= n {
                return Err(Error::Contract(format!(
                    "constrained DOF {d} outside system of size {n}"
                )));
            }
            if dofs.last() == Some(&d) {
                if *values.last().unwrap() != v {
                    return Err(Error::Config(format!(
                        "DOF {d} receives conflicting Dirichlet values"
                    )));
                }
                continue;
            }
            dofs.push(d);
            values.push(v);
        }
        let mut free_index = vec![None; n];
        let mut constrained_index = vec![None; n];
        for (k, &d) in dofs.iter().enumerate() {
            constrained_index[d] = Some(k);
        }
        let mut free = Vec::with_capacity(n - dofs.len());
        for d in 0..n {
            if constrained_index[d].is_none() {
                free_index[d] = Some(free.len());
                free.push(d);
            }
        }
        Ok(Self {
            n,
            dofs,
            values,
            free,
            free_index,
            constrained_index,
        })
    }

    pub fn none(n: usize) -> Self {
        Self::new(n, Vec::new()).expect("empty constraint set")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn is_constrained(&self, d: usize) -> bool {
        self.constrained_index[d].is_some()
    }

    pub fn value_of(&self, d: usize) -> Option<f64> {
        self.constrained_index[d].map(|k| self.values[k])
    }

    pub fn free_index(&self, d: usize) -> Option<usize> {
        self.free_index[d]
    }

    pub fn constrained_in(&self, range: std::ops::Range<usize>) -> usize {
        self.dofs.iter().filter(|d| range.contains(d)).count()
    }

    /// `(K_FF, K_FC)`, rows and columns in free / constrained order.
    pub fn reduce(&self, k: &CsrMatrix) -> (CsrMatrix, CsrMatrix) {
        (
            k.select(&self.free, &self.free_index, self.free.len()),
            k.select(&self.free, &self.constrained_index, self.dofs.len()),
        )
    }

    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| v[d]).collect()
    }

    /// Full vector from free values and constrained values `g`.
    pub fn expand(&self, free_values: &[f64], g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&d, &v) in self.free.iter().zip(free_values) {
            out[d] = v;
        }
        for (&d, &v) in self.dofs.iter().zip(g) {
            out[d] = v;
        }
        out
    }
}

/// Collects Dirichlet DOFs of the monolithic layout from side tags.
pub fn apply_boundary_conditions(
    model: &PoroModel,
    layout: &DofLayout,
    mesh: &FineMesh,
    spec: &BoundarySpec,
) -> Result<Constraints> {
    let mut pairs = Vec::new();
    for pd in &spec.pressure {
        let c = model.continua.get(pd.continuum).ok_or_else(|| {
            Error::Config(format!(
                "pressure condition on unknown continuum {}",
                pd.continuum
            ))
        })?;
        if !pd.value.is_finite() {
            return Err(Error::Config("non-finite Dirichlet value".into()));
        }
        let off = layout.pressure_offset(pd.continuum);
        let before = pairs.len();
        for v in 0..mesh.node_count() {
            if !mesh.boundary_tags(v).intersects(pd.sides) {
                continue;
            }
            let local = match c.support {
                Support::Bulk => Some(v),
                Support::Fracture => mesh.fracture_dof(v),
            };
            if let Some(l) = local {
                pairs.push((off + l, pd.value));
            }
        }
        if pairs.len() == before {
            return Err(Error::Config(format!(
                "pressure condition on `{}` selects no tagged boundary node ({:?})",
                c.name, pd.sides
            )));
        }
    }
    let off = layout.displacement_offset();
    for dd in &spec.displacement {
        let before = pairs.len();
        for v in 0..mesh.node_count() {
            if !mesh.boundary_tags(v).intersects(dd.sides) {
                continue;
            }
            for comp in 0..2 {
                if dd.components[comp] {
                    pairs.push((off + 2 * v + comp, dd.value[comp]));
                }
            }
        }
        if pairs.len() == before && dd.components.iter().any(|&c| c) {
            return Err(Error::Config(format!(
                "displacement condition selects no tagged boundary node ({:?})",
                dd.sides
            )));
        }
    }
    Constraints::new(layout.total(), pairs)
}

/// Rejects displacement conditions that leave a rigid motion free.
pub fn check_rigid_modes(mesh: &FineMesh, layout: &DofLayout, cons: &Constraints) -> Result<()> {
    let b = mesh.bounds();
    let (cx, cy) = (0.5 * (b.xmin + b.xmax), 0.5 * (b.ymin + b.ymax));
    let scale = 1.0 / b.diameter();
    let off = layout.displacement_offset();
    let mut gram = [0.0; 9];
    for &d in cons.dofs() {
        if d < off {
            continue;
        }
        let (node, comp) = ((d - off) / 2, (d - off) % 2);
        let p = mesh.node(node);
        let rot = if comp == 0 {
            -(p[1] - cy) * scale
        } else {
            (p[0] - cx) * scale
        };
        let r = [
            if comp == 0 { 1.0 } else { 0.0 },
            if comp == 1 { 1.0 } else { 0.0 },
            rot,
        ];
        for i in 0..3 {
            for j in 0..3 {
                gram[3 * i + j] += r[i] * r[j];
            }
        }
    }
    let (vals, _) = symmetric_eigen(3, &gram)?;
    if !(vals[0] > 1e-10 * vals[2].max(1e-300)) {
        return Err(Error::Config(
            "displacement conditions leave a rigid-body motion unconstrained; elasticity block is singular".into(),
        ));
    }
    Ok(())
}

/// Rejects flow configurations whose pressure block is singular: every group
/// of continua linked by positive exchange needs storage or a Dirichlet DOF.
pub fn check_flow_solvable(
    model: &PoroModel,
    layout: &DofLayout,
    cons: &Constraints,
) -> Result<()> {
    let m = model.continua.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for ex in &model.exchanges {
        if ex.eta.iter().any(|&e| e > 0.0) {
            let (a, b) = (find(&mut parent, ex.first), find(&mut parent, ex.second));
            parent[a] = b;
        }
    }
    for i in 0..m {
        if layout.pressure_size(i) == 0 {
            continue;
        }
        let root = find(&mut parent, i);
        let anchored = (0..m).any(|j| {
            find(&mut parent, j) == root
                && (model.continua[j].storage > 0.0
                    || cons.constrained_in(layout.pressure_range(j)) > 0)
        });
        if !anchored {
            return Err(Error::Config(format!(
                "continuum `{}` has no storage, no Dirichlet pressure and no exchange with one that does; flow block is singular",
                model.continua[i].name
            )));
        }
    }
    Ok(())
}
