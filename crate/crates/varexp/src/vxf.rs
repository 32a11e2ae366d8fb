//! VXF1 text field files.
//!
//! ```text
//! VXF1 <dim> <codomain> <nodes|cells> <count_0 ..> <origin_0 ..> <extent_0 ..>
//! <value>
//! ...
//! ```
//!
//! Counts are entity counts per axis (nodes for nodal fields, cells for cell
//! fields). Values are row-major over entities with the component index
//! fastest, written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use varexp_core::{CellField, Grid, GridFunction};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Nodes,
    Cells,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VxfField {
    pub grid: Grid,
    pub codomain: usize,
    pub location: Location,
    pub values: Vec<f64>,
}

impl VxfField {
    pub fn from_nodes(f: &GridFunction) -> Self {
        VxfField {
            grid: *f.grid(),
            codomain: f.codomain(),
            location: Location::Nodes,
            values: f.values().to_vec(),
        }
    }

    pub fn from_cells(f: &CellField) -> Self {
        VxfField {
            grid: *f.grid(),
            codomain: f.components(),
            location: Location::Cells,
            values: f.values().to_vec(),
        }
    }

    pub fn into_nodes(self) -> Result<GridFunction> {
        if self.location != Location::Nodes {
            return Err(CliError::Invalid("expected a nodal field".into()));
        }
        Ok(GridFunction::new(self.grid, self.codomain, self.values)?)
    }

    pub fn into_cells(self) -> Result<CellField> {
        if self.location != Location::Cells {
            return Err(CliError::Invalid("expected a cell field".into()));
        }
        Ok(CellField::new(self.grid, self.codomain, self.values)?)
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let dim = g.dim();
        let mut s = String::with_capacity(24 * (self.values.len() + 4));
        let (tag, counts): (&str, Vec<usize>) = match self.location {
            Location::Nodes => ("nodes", (0..dim).map(|k| g.nodes_per_axis(k)).collect()),
            Location::Cells => ("cells", g.cells_per_axis().to_vec()),
        };
        write!(s, "VXF1 {dim} {} {tag}", self.codomain).unwrap();
        for c in counts {
            write!(s, " {c}").unwrap();
        }
        for v in g.origin().iter().chain(g.extent()) {
            write!(s, " {v:.16e}").unwrap();
        }
        s.push('\n');
        for v in &self.values {
            writeln!(s, "{v:.16e}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.first() != Some(&"VXF1") {
            return Err("missing VXF1 magic".into());
        }
        let num = |i: usize, what: &str| -> std::result::Result<&str, String> {
            tok.get(i).copied().ok_or_else(|| format!("header truncated before {what}"))
        };
        let dim: usize = num(1, "dim")?.parse().map_err(|_| "bad dim")?;
        if !(1..=3).contains(&dim) {
            return Err(format!("unsupported dim {dim}"));
        }
        let codomain: usize = num(2, "codomain")?.parse().map_err(|_| "bad codomain")?;
        if codomain == 0 {
            return Err("codomain must be positive".into());
        }
        let location = match num(3, "location")? {
            "nodes" => Location::Nodes,
            "cells" => Location::Cells,
            other => return Err(format!("location `{other}` is not nodes or cells")),
        };
        if tok.len() != 4 + 3 * dim {
            return Err(format!("header has {} fields, expected {}", tok.len(), 4 + 3 * dim));
        }
        let counts: Vec<usize> = tok[4..4 + dim]
            .iter()
            .map(|t| t.parse().map_err(|_| format!("bad count `{t}`")))
            .collect::<std::result::Result<_, _>>()?;
        let reals: Vec<f64> = tok[4 + dim..]
            .iter()
            .map(|t| t.parse().map_err(|_| format!("bad number `{t}`")))
            .collect::<std::result::Result<_, _>>()?;
        let cells: Vec<usize> = match location {
            Location::Nodes => counts
                .iter()
                .map(|&c| c.checked_sub(1).ok_or("node count must be positive".to_string()))
                .collect::<std::result::Result<_, _>>()?,
            Location::Cells => counts.clone(),
        };
        let grid = Grid::new(dim, &reals[..dim], &reals[dim..], &cells).map_err(|e| e.to_string())?;
        let mut values = Vec::with_capacity(counts.iter().product::<usize>() * codomain);
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(line.parse::<f64>().map_err(|_| format!("value line {}: bad number `{line}`", i + 2))?);
        }
        let expected = counts.iter().product::<usize>() * codomain;
        if values.len() != expected {
            return Err(format!("expected {expected} values, found {}", values.len()));
        }
        Ok(VxfField {
            grid,
            codomain,
            location,
            values,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|m| CliError::format(path, m))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }
}

pub fn write_nodes(path: &Path, f: &GridFunction) -> Result<()> {
    VxfField::from_nodes(f).write(path)
}

pub fn write_cells(path: &Path, f: &CellField) -> Result<()> {
    VxfField::from_cells(f).write(path)
}

pub fn read_nodes(path: &Path) -> Result<GridFunction> {
    VxfField::read(path)?.into_nodes().map_err(|e| CliError::format(path, e.to_string()))
}

pub fn read_cells(path: &Path) -> Result<CellField> {
    VxfField::read(path)?.into_cells().map_err(|e| CliError::format(path, e.to_string()))
}
