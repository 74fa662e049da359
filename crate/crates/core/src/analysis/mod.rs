//! Relative error norms, error tables and field export.
//!
//! Errors are reported in percent. The L2 weight is the plain mass matrix of
//! a field; the energy weight is its stiffness (pressures) or elasticity
//! (displacement) matrix.

mod vtk;

pub use vtk::{export_vtk, format_vtk, parse_vtk, VtkData};

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::SystemMatrices;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Weighted distance `‖y − y_ms‖_W` (unnormalized). Negative round-off in a
/// semidefinite form is clamped to zero.
pub fn weighted_distance(y: &[f64], y_ms: &[f64], w: &CsrMatrix) -> Result<f64> {
    if y.len() != y_ms.len() || w.nrows() != y.len() || w.ncols() != y.len() {
        return Err(Error::Contract(format!(
            "error of vectors of length {} and {} under a {}x{} weight",
            y.len(),
            y_ms.len(),
            w.nrows(),
            w.ncols()
        )));
    }
    let d: Vec<f64> = y.iter().zip(y_ms).map(|(a, b)| a - b).collect();
    Ok(w.quadratic_form(&d).max(0.0).sqrt())
}

fn relative(y: &[f64], y_ms: &[f64], w: &CsrMatrix, what: &str) -> Result<f64> {
    let num = weighted_distance(y, y_ms, w)?;
    let den = w.quadratic_form(y);
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "relative {what} error undefined: reference norm is zero"
        )));
    }
    Ok(100.0 * num / den.sqrt())
}

/// `100 · ‖y − y_ms‖_W / ‖y‖_W` with `W` a mass matrix.
///
/// A reference of zero norm makes the error undefined and is reported as
/// [`Error::Domain`].
pub fn relative_l2_error(y: &[f64], y_ms: &[f64], mass: &CsrMatrix) -> Result<f64> {
    relative(y, y_ms, mass, "L2")
}

/// Same as [`relative_l2_error`] in the seminorm of a stiffness or
/// elasticity matrix. Differences in the kernel of `W` are invisible.
pub fn relative_energy_error(y: &[f64], y_ms: &[f64], energy: &CsrMatrix) -> Result<f64> {
    relative(y, y_ms, energy, "energy")
}

/// L2 and energy errors of one field, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldErrors {
    pub l2: f64,
    pub h1: f64,
}

/// Errors of a full state: displacement and each listed pressure continuum.
#[derive(Debug, Clone, PartialEq)]
pub struct StateErrors {
    pub displacement: FieldErrors,
    pub pressures: Vec<FieldErrors>,
}

/// Compares two full fine vectors field by field. `continua` selects which
/// pressure blocks are evaluated, in output order.
pub fn state_errors(
    sys: &SystemMatrices,
    reference: &[f64],
    approx: &[f64],
    continua: &[usize],
) -> Result<StateErrors> {
    let layout = &sys.layout;
    if reference.len() != layout.total() || approx.len() != layout.total() {
        return Err(Error::Contract(format!(
            "state vectors of length {} and {} for a {}-dof layout",
            reference.len(),
            approx.len(),
            layout.total()
        )));
    }
    let mut pressures = Vec::with_capacity(continua.len());
    for &i in continua {
        if i >= layout.continua() {
            return Err(Error::Contract(format!("continuum {i} out of range")));
        }
        let r = layout.pressure_range(i);
        pressures.push(FieldErrors {
            l2: relative_l2_error(
                &reference[r.clone()],
                &approx[r.clone()],
                &sys.plain_mass[i],
            )?,
            h1: relative_energy_error(&reference[r.clone()], &approx[r], &sys.stiffness[i])?,
        });
    }
    let r = layout.displacement_range();
    let bulk = (0..layout.continua())
        .find(|&i| 2 * layout.pressure_size(i) == layout.displacement_size())
        .ok_or_else(|| {
            Error::Contract("no bulk continuum to take the displacement mass from".into())
        })?;
    let mass = interleave(&sys.plain_mass[bulk]);
    let displacement = FieldErrors {
        l2: relative_l2_error(&reference[r.clone()], &approx[r.clone()], &mass)?,
        h1: relative_energy_error(&reference[r.clone()], &approx[r], &sys.elasticity)?,
    };
    Ok(StateErrors {
        displacement,
        pressures,
    })
}

/// `M ⊗ I₂` in the interleaved displacement ordering.
fn interleave(m: &CsrMatrix) -> CsrMatrix {
    let entries: Vec<_> = m
        .iter()
        .flat_map(|(i, j, v)| [(2 * i, 2 * j, v), (2 * i + 1, 2 * j + 1, v)])
        .collect();
    CsrMatrix::from_triplets(2 * m.nrows(), 2 * m.ncols(), &entries)
}

/// One row of an error table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub m: usize,
    pub dof_h: usize,
    pub errors: StateErrors,
}

/// Final-time errors for a sweep over basis counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    fn pressure_columns(&self) -> Result<usize> {
        let n = self.rows.first().map_or(1, |r| r.errors.pressures.len());
        if n == 0 || self.rows.iter().any(|r| r.errors.pressures.len() != n) {
            return Err(Error::Contract(
                "error rows need the same positive number of pressure fields".into(),
            ));
        }
        Ok(n)
    }
}

fn header(pressures: usize) -> String {
    let mut h = String::from("M,DOF_H,eL2_u,eH1_u");
    for i in 1..=pressures {
        let _ = write!(h, ",eL2_p{i},eH1_p{i}");
    }
    h
}

/// CSV text of the report: values in percent with three decimals.
pub fn format_error_table(report: &ErrorReport) -> Result<String> {
    let np = report.pressure_columns()?;
    let mut out = header(np);
    out.push('\n');
    for row in &report.rows {
        let e = &row.errors;
        let _ = write!(
            out,
            "{},{},{:.3},{:.3}",
            row.m, row.dof_h, e.displacement.l2, e.displacement.h1
        );
        for p in &e.pressures {
            let _ = write!(out, ",{:.3},{:.3}", p.l2, p.h1);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_error_table(report: &ErrorReport, path: &Path) -> Result<()> {
    std::fs::write(path, format_error_table(report)?)?;
    Ok(())
}

/// Reads a table written by [`format_error_table`].
pub fn parse_error_table(text: &str) -> Result<ErrorReport> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty error table"))?;
    let cols = head.split(',').count();
    if cols < 6 || cols % 2 != 0 || head != header((cols - 4) / 2) {
        return Err(Error::parse(1, format!("unexpected header '{head}'")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols {
            return Err(Error::parse(
                i + 1,
                format!("{} fields, expected {cols}", f.len()),
            ));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::parse(i + 1, format!("'{s}': {e}")))
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::parse(i + 1, format!("'{s}': {e}")))
        };
        let pair = |k: usize| -> Result<FieldErrors> {
            Ok(FieldErrors {
                l2: num(f[k])?,
                h1: num(f[k + 1])?,
            })
        };
        rows.push(ErrorRow {
            m: int(f[0])?,
            dof_h: int(f[1])?,
            errors: StateErrors {
                displacement: pair(2)?,
                pressures: (4..cols).step_by(2).map(pair).collect::<Result<_>>()?,
            },
        });
    }
    Ok(ErrorReport { rows })
}

/// Errors at every time level of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    /// `(level, time, errors)`.
    pub rows: Vec<(usize, f64, StateErrors)>,
}

/// CSV with columns `n,t,eL2_u,eH1_u,eL2_p1,eH1_p1,...`.
pub fn format_time_series(series: &TimeSeries) -> String {
    let np = series.rows.first().map_or(1, |r| r.2.pressures.len());
    let mut out = header(np).replacen("M,DOF_H", "n,t", 1);
    out.push('\n');
    for (n, t, e) in &series.rows {
        let _ = write!(
            out,
            "{n},{t},{:.3},{:.3}",
            e.displacement.l2, e.displacement.h1
        );
        for p in &e.pressures {
            let _ = write!(out, ",{:.3},{:.3}", p.l2, p.h1);
        }
        out.push('\n');
    }
    out
}
