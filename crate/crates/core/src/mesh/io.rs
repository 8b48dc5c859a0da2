//! Plain-text mesh format:
//!
//! ```text
//! svmesh v1
//! vertices <V>
//! <x> <y>            (V lines, shortest round-trip decimal)
//! cells <C>
//! <i> <j> <k>        (C lines, 0-based, counterclockwise)
//! macro_parents <C>  (optional)
//! <m>                (C lines)
//! ```
//!
//! Coordinates are written with Rust's shortest round-trip formatting, so
//! `read(write(mesh))` reproduces every vertex bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mesh::{Cell, Mesh2D};

const MAGIC: &str = "svmesh v1";

pub fn write_mesh(mesh: &Mesh2D, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_mesh(path: &Path) -> Result<Mesh2D> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    mesh_from_str(&text, &path.display().to_string())
}

pub fn mesh_to_string(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "vertices {}", mesh.vertices().len());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {}", v.x, v.y);
    }
    let _ = writeln!(out, "cells {}", mesh.cells().len());
    for c in mesh.cells() {
        let _ = writeln!(out, "{} {} {}", c.v[0], c.v[1], c.v[2]);
    }
    if let Some(mp) = mesh.macro_parent() {
        let _ = writeln!(out, "macro_parents {}", mp.len());
        for &m in mp {
            let _ = writeln!(out, "{m}");
        }
    }
    out
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    path: &'a str,
    lineno: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, expect: &str) -> Result<&'a str> {
        loop {
            match self.iter.next() {
                None => {
                    return Err(self.err(format!("unexpected end of file, expected {expect}")))
                }
                Some(line) => {
                    self.lineno += 1;
                    let trimmed = line.trim();
                    if !trimmed.is_empty() {
                        return Ok(trimmed);
                    }
                }
            }
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line: self.lineno,
            msg,
        }
    }
}

fn parse_count(lines: &mut Lines, keyword: &str) -> Result<usize> {
    let line = lines.next_line(&format!("'{keyword} <count>'"))?;
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(n), None) if k == keyword => n
            .parse::<usize>()
            .map_err(|_| lines.err(format!("invalid {keyword} count '{n}'"))),
        _ => Err(lines.err(format!("expected '{keyword} <count>', found '{line}'"))),
    }
}

pub fn mesh_from_str(text: &str, path: &str) -> Result<Mesh2D> {
    let mut lines = Lines {
        iter: text.lines(),
        path,
        lineno: 0,
    };

    let header = lines.next_line("header")?;
    if header != MAGIC {
        return Err(lines.err(format!("bad header '{header}', expected '{MAGIC}'")));
    }

    let nv = parse_count(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next_line(&format!("vertex {i} ('x y')"))?;
        if line.starts_with("cells") || line.starts_with("macro_parents") {
            return Err(lines.err(format!(
                "vertex section truncated: expected {nv} coordinate lines, found only {i} \
                 before '{line}'"
            )));
        }
        let mut parts = line.split_whitespace();
        let (x, y) = match (parts.next(), parts.next(), parts.next()) {
            (Some(x), Some(y), None) => (x, y),
            _ => return Err(lines.err(format!("expected 'x y' for vertex {i}"))),
        };
        let parse = |s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| lines.err(format!("invalid coordinate '{s}'")))?;
            if !v.is_finite() {
                return Err(lines.err(format!("non-finite coordinate '{s}'")));
            }
            Ok(v)
        };
        vertices.push(Point2::new(parse(x)?, parse(y)?));
    }

    let nc = parse_count(&mut lines, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for c in 0..nc {
        let line = lines.next_line(&format!("cell {c} ('i j k')"))?;
        let mut parts = line.split_whitespace();
        let mut idx = [0usize; 3];
        for slot in &mut idx {
            let tok = parts
                .next()
                .ok_or_else(|| lines.err(format!("expected three indices for cell {c}")))?;
            *slot = tok
                .parse()
                .map_err(|_| lines.err(format!("invalid vertex index '{tok}'")))?;
            if *slot >= nv {
                return Err(lines.err(format!(
                    "vertex index {slot} out of range (mesh has {nv} vertices)"
                )));
            }
        }
        if parts.next().is_some() {
            return Err(lines.err(format!("trailing tokens after cell {c}")));
        }
        cells.push(Cell::new(idx[0], idx[1], idx[2]));
    }

    let mut macro_parent = None;
    // Optional trailing section.
    if let Ok(line) = lines.next_line("") {
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("macro_parents"), Some(n), None) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| lines.err(format!("invalid macro_parents count '{n}'")))?;
                if n != nc {
                    return Err(
                        lines.err(format!("macro_parents count {n} does not match {nc} cells"))
                    );
                }
                let mut mp = Vec::with_capacity(n);
                for i in 0..n {
                    let tok = lines.next_line(&format!("macro parent {i}"))?;
                    mp.push(
                        tok.parse()
                            .map_err(|_| lines.err(format!("invalid macro parent '{tok}'")))?,
                    );
                }
                macro_parent = Some(mp);
            }
            _ => return Err(lines.err(format!("unexpected content '{line}' after cells"))),
        }
        if let Ok(extra) = lines.next_line("") {
            return Err(lines.err(format!("unexpected content '{extra}' at end of file")));
        }
    }

    Mesh2D::new(vertices, cells, macro_parent)
}
