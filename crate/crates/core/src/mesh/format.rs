//! Line-oriented text format for fine meshes.
//!
//! ```text
//! # comment
//! NODES
//! <id> <x> <y>
//! TRIANGLES
//! <id> <n1> <n2> <n3> <region>
//! FRACTURE_EDGES
//! <n1> <n2>
//! BOUNDARY
//! <node> <tag> [<tag> ...]      tag: L R B T or LEFT RIGHT BOTTOM TOP
//! ```
//!
//! Node and triangle ids must be a permutation of `0..n`. Each section may
//! appear at most once; `NODES` and `TRIANGLES` are required.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTags, FineMesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Nodes,
    Triangles,
    Fractures,
    Boundary,
}

fn section_of(word: &str) -> Option<Section> {
    match word {
        "NODES" => Some(Section::Nodes),
        "TRIANGLES" => Some(Section::Triangles),
        "FRACTURE_EDGES" => Some(Section::Fractures),
        "BOUNDARY" => Some(Section::Boundary),
        _ => None,
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

fn expect_fields(line: usize, toks: &[&str], n: usize, what: &str) -> Result<()> {
    if toks.len() != n {
        return Err(Error::parse(
            line,
            format!("{what} line needs {n} fields, found {}", toks.len()),
        ));
    }
    Ok(())
}

fn place<T: Clone>(
    slots: &mut Vec<Option<(T, usize)>>,
    id: usize,
    value: T,
    line: usize,
    what: &str,
) -> Result<()> {
    if id >= slots.len() {
        slots.resize(id + 1, None);
    }
    if let Some((_, first)) = &slots[id] {
        return Err(Error::parse(
            line,
            format!("duplicate {what} id {id} (first defined on line {first})"),
        ));
    }
    slots[id] = Some((value, line));
    Ok(())
}

fn dense<T>(
    slots: Vec<Option<(T, usize)>>,
    what: &str,
    end_line: usize,
) -> Result<Vec<(T, usize)>> {
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| {
                Error::parse(
                    end_line,
                    format!("{what} ids are not contiguous: id {i} missing"),
                )
            })
        })
        .collect()
}

/// Parses mesh text. Malformed or dangling records are parse errors; a
/// well-formed mesh that breaks a mesh invariant is a validation error.
pub fn parse_mesh(text: &str) -> Result<FineMesh> {
    let mut section = None;
    let mut seen = Vec::new();
    let mut nodes: Vec<Option<([f64; 2], usize)>> = Vec::new();
    let mut tris: Vec<Option<(([usize; 3], u32), usize)>> = Vec::new();
    let mut fractures: Vec<([usize; 2], usize)> = Vec::new();
    let mut tags: Vec<(usize, BoundaryTags, usize)> = Vec::new();
    let mut last_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() == 1 && toks[0].chars().all(|c| c.is_ascii_uppercase() || c == '_') {
            let s = section_of(toks[0])
                .ok_or_else(|| Error::parse(line, format!("unknown section `{}`", toks[0])))?;
            if seen.contains(&s) {
                return Err(Error::parse(
                    line,
                    format!("section `{}` repeated", toks[0]),
                ));
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        match section {
            None => return Err(Error::parse(line, "data before the first section header")),
            Some(Section::Nodes) => {
                expect_fields(line, &toks, 3, "node")?;
                let id: usize = num(line, toks[0], "node id")?;
                let x: f64 = num(line, toks[1], "coordinate")?;
                let y: f64 = num(line, toks[2], "coordinate")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::parse(line, "non-finite coordinate"));
                }
                place(&mut nodes, id, [x, y], line, "node")?;
            }
            Some(Section::Triangles) => {
                expect_fields(line, &toks, 5, "triangle")?;
                let id: usize = num(line, toks[0], "triangle id")?;
                let mut v = [0usize; 3];
                for (slot, tok) in v.iter_mut().zip(&toks[1..4]) {
                    *slot = num(line, tok, "node reference")?;
                }
                let region: u32 = num(line, toks[4], "region id")?;
                place(&mut tris, id, (v, region), line, "triangle")?;
            }
            Some(Section::Fractures) => {
                expect_fields(line, &toks, 2, "fracture edge")?;
                fractures.push((
                    [
                        num(line, toks[0], "node reference")?,
                        num(line, toks[1], "node reference")?,
                    ],
                    line,
                ));
            }
            Some(Section::Boundary) => {
                if toks.len() < 2 {
                    return Err(Error::parse(
                        line,
                        "boundary line needs a node and at least one tag",
                    ));
                }
                let node: usize = num(line, toks[0], "node reference")?;
                for t in &toks[1..] {
                    let side = BoundaryTags::parse_side(t)
                        .ok_or_else(|| Error::parse(line, format!("unknown boundary tag `{t}`")))?;
                    tags.push((node, side, line));
                }
            }
        }
    }
    if !seen.contains(&Section::Nodes) || !seen.contains(&Section::Triangles) {
        return Err(Error::parse(
            last_line.max(1),
            "mesh needs NODES and TRIANGLES sections",
        ));
    }
    let nodes = dense(nodes, "node", last_line)?;
    let tris = dense(tris, "triangle", last_line)?;
    let n = nodes.len();
    for ((v, _), line) in &tris {
        if let Some(bad) = v.iter().find(|&&x| x >= n) {
            return Err(Error::parse(
                *line,
                format!("triangle references undefined node {bad}"),
            ));
        }
    }
    let mut boundary = vec![BoundaryTags::NONE; n];
    for (node, side, line) in tags {
        if node >= n {
            return Err(Error::parse(
                line,
                format!("boundary entry references undefined node {node}"),
            ));
        }
        boundary[node] = boundary[node] | side;
    }
    let coords = nodes.into_iter().map(|(p, _)| p).collect();
    let (triangles, regions) = tris.into_iter().map(|(t, _)| t).unzip();
    FineMesh::new(
        coords,
        triangles,
        regions,
        fractures.into_iter().map(|(e, _)| e).collect(),
        boundary,
    )
}

/// Serializes a mesh in the format read by [`parse_mesh`].
pub fn write_mesh(mesh: &FineMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# {} nodes, {} triangles, {} fracture edges",
        mesh.node_count(),
        mesh.triangle_count(),
        mesh.fracture_edges().len()
    );
    s.push_str("NODES\n");
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{i} {:?} {:?}", p[0], p[1]);
    }
    s.push_str("TRIANGLES\n");
    for (t, (tri, r)) in mesh.triangles().iter().zip(mesh.regions()).enumerate() {
        let _ = writeln!(s, "{t} {} {} {} {r}", tri[0], tri[1], tri[2]);
    }
    if !mesh.fracture_edges().is_empty() {
        s.push_str("FRACTURE_EDGES\n");
        for e in mesh.fracture_edges() {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
    }
    s.push_str("BOUNDARY\n");
    for (v, tags) in mesh.boundary().iter().enumerate() {
        if !tags.is_empty() {
            let letters: Vec<_> = tags.sides().map(|t| t.letter()).collect();
            let _ = writeln!(s, "{v} {}", letters.join(" "));
        }
    }
    s
}

pub fn load_fine_mesh(path: impl AsRef<Path>) -> Result<FineMesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub fn save_fine_mesh(mesh: &FineMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh(mesh))?;
    Ok(())
}
