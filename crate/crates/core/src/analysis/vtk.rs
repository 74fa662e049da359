//! Legacy VTK (version 3.0, ASCII) export of nodal fields.
//!
//! Layout of an emitted file:
//!
//! ```text
//! # vtk DataFile Version 3.0
//! <title>
//! ASCII
//! DATASET UNSTRUCTURED_GRID
//! POINTS <n> double
//! x y 0                        (one line per node)
//! CELLS <c> <size>
//! 3 a b c                      (triangles, then fracture edges as "2 a b")
//! CELL_TYPES <c>
//! 5 | 3                        (VTK_TRIANGLE, VTK_LINE)
//! POINT_DATA <n>
//! SCALARS p_<name> double 1    (one block per continuum, bulk and fracture)
//! LOOKUP_TABLE default
//! v                            (one line per node)
//! VECTORS displacement double
//! ux uy 0
//! ```
//!
//! Fracture pressures live on fracture nodes only; other nodes get 0.
//! Numbers use the shortest text that parses back to the same `f64`, and
//! negative zero is written as `0`.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{DofLayout, Support};
use crate::error::{Error, Result};
use crate::mesh::FineMesh;

fn num(out: &mut String, v: f64) {
    if v == 0.0 {
        out.push('0');
    } else if (1e-4..1e15).contains(&v.abs()) {
        let _ = write!(out, "{v}");
    } else {
        let _ = write!(out, "{v:e}");
    }
}

/// VTK text for one state. `names[i]` and `supports[i]` describe continuum `i`.
pub fn format_vtk(
    mesh: &FineMesh,
    layout: &DofLayout,
    names: &[String],
    supports: &[Support],
    state: &[f64],
    title: &str,
) -> Result<String> {
    if names.len() != layout.continua()
        || supports.len() != layout.continua()
        || state.len() != layout.total()
    {
        return Err(Error::Contract(
            "field names, supports and state do not match the layout".into(),
        ));
    }
    let n = mesh.node_count();
    let tris = mesh.triangles();
    let edges = mesh.fracture_edges();
    let cells = tris.len() + edges.len();
    let mut out = String::with_capacity(64 * n);
    let title = title.lines().next().unwrap_or("");
    let _ = write!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS {n} double\n");
    for p in mesh.nodes() {
        num(&mut out, p[0]);
        out.push(' ');
        num(&mut out, p[1]);
        out.push_str(" 0\n");
    }
    let _ = writeln!(out, "CELLS {cells} {}", 4 * tris.len() + 3 * edges.len());
    for t in tris {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    for e in edges {
        let _ = writeln!(out, "2 {} {}", e[0], e[1]);
    }
    let _ = writeln!(out, "CELL_TYPES {cells}");
    out.push_str(&"5\n".repeat(tris.len()));
    out.push_str(&"3\n".repeat(edges.len()));
    let _ = writeln!(out, "POINT_DATA {n}");
    for (i, name) in names.iter().enumerate() {
        let p = &state[layout.pressure_range(i)];
        let mut nodal = vec![0.0; n];
        match supports[i] {
            Support::Bulk => nodal.copy_from_slice(p),
            Support::Fracture => {
                for (&v, &x) in mesh.fracture_nodes().iter().zip(p) {
                    nodal[v] = x;
                }
            }
        }
        let _ = write!(out, "SCALARS p_{name} double 1\nLOOKUP_TABLE default\n");
        for v in nodal {
            num(&mut out, v);
            out.push('\n');
        }
    }
    out.push_str("VECTORS displacement double\n");
    for u in state[layout.displacement_range()].chunks_exact(2) {
        num(&mut out, u[0]);
        out.push(' ');
        num(&mut out, u[1]);
        out.push_str(" 0\n");
    }
    Ok(out)
}

pub fn export_vtk(
    mesh: &FineMesh,
    layout: &DofLayout,
    names: &[String],
    supports: &[Support],
    state: &[f64],
    title: &str,
    path: &Path,
) -> Result<()> {
    std::fs::write(
        path,
        format_vtk(mesh, layout, names, supports, state, title)?,
    )?;
    Ok(())
}

/// Contents of a file produced by [`format_vtk`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
}

struct Tokens<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn next_line(&mut self) -> Option<&'a str> {
        for (i, l) in self.lines.by_ref() {
            if !l.trim().is_empty() {
                self.line = i + 1;
                return Some(l.trim());
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<&'a str> {
        self.next_line().ok_or_else(|| {
            Error::parse(
                self.line + 1,
                format!("unexpected end of file, expected {what}"),
            )
        })
    }

    fn numbers<T: std::str::FromStr>(&mut self, count: usize, what: &str) -> Result<Vec<T>> {
        let l = self.expect_line(what)?;
        let v: Vec<T> = l
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(self.line, format!("bad {what} '{l}'")))?;
        if v.len() != count {
            return Err(Error::parse(
                self.line,
                format!("{what} has {} values, expected {count}", v.len()),
            ));
        }
        Ok(v)
    }
}

fn header_count(l: &str, key: &str, line: usize) -> Result<usize> {
    l.split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(line, format!("malformed {key} header '{l}'")))
}

/// Parses the subset of legacy VTK written by [`format_vtk`].
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut tk = Tokens {
        lines: text.lines().enumerate(),
        line: 0,
    };
    let first = tk.expect_line("version line")?;
    if !first.starts_with("# vtk DataFile Version") {
        return Err(Error::parse(1, "missing VTK version line"));
    }
    let mut data = VtkData {
        title: text.lines().nth(1).unwrap_or("").to_string(),
        ..Default::default()
    };
    tk.lines.next();
    if tk.expect_line("ASCII")? != "ASCII" {
        return Err(Error::parse(tk.line, "only ASCII files are supported"));
    }
    if tk.expect_line("DATASET")? != "DATASET UNSTRUCTURED_GRID" {
        return Err(Error::parse(
            tk.line,
            "only UNSTRUCTURED_GRID datasets are supported",
        ));
    }
    let mut n_points = 0;
    while let Some(l) = tk.next_line() {
        let key = l.split_whitespace().next().unwrap_or("");
        match key {
            "POINTS" => {
                n_points = header_count(l, key, tk.line)?;
                for _ in 0..n_points {
                    let v = tk.numbers::<f64>(3, "point")?;
                    data.points.push([v[0], v[1], v[2]]);
                }
            }
            "CELLS" => {
                for _ in 0..header_count(l, key, tk.line)? {
                    let l = tk.expect_line("cell")?;
                    let v: Vec<usize> = l
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::parse(tk.line, format!("bad cell '{l}'")))?;
                    if v.is_empty() || v[0] + 1 != v.len() {
                        return Err(Error::parse(tk.line, format!("bad cell '{l}'")));
                    }
                    data.cells.push(v[1..].to_vec());
                }
            }
            "CELL_TYPES" => {
                for _ in 0..header_count(l, key, tk.line)? {
                    data.cell_types.push(tk.numbers::<u8>(1, "cell type")?[0]);
                }
            }
            "POINT_DATA" => {
                if header_count(l, key, tk.line)? != n_points {
                    return Err(Error::parse(
                        tk.line,
                        "POINT_DATA count differs from POINTS",
                    ));
                }
            }
            "SCALARS" => {
                let name = l.split_whitespace().nth(1).unwrap_or("").to_string();
                if tk.expect_line("LOOKUP_TABLE")?.split_whitespace().next() != Some("LOOKUP_TABLE")
                {
                    return Err(Error::parse(tk.line, "expected LOOKUP_TABLE"));
                }
                let vals = (0..n_points)
                    .map(|_| Ok(tk.numbers::<f64>(1, "scalar")?[0]))
                    .collect::<Result<_>>()?;
                data.scalars.push((name, vals));
            }
            "VECTORS" => {
                let name = l.split_whitespace().nth(1).unwrap_or("").to_string();
                let vals = (0..n_points)
                    .map(|_| {
                        let v = tk.numbers::<f64>(3, "vector")?;
                        Ok([v[0], v[1], v[2]])
                    })
                    .collect::<Result<_>>()?;
                data.vectors.push((name, vals));
            }
            _ => {
                return Err(Error::parse(
                    tk.line,
                    format!("unsupported section '{key}'"),
                ))
            }
        }
    }
    if data.cells.len() != data.cell_types.len() {
        return Err(Error::parse(tk.line, "CELLS and CELL_TYPES counts differ"));
    }
    Ok(data)
}
