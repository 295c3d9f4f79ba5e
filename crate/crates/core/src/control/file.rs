use std::io::{BufRead, BufReader, Read, Write};

use super::grid::Grid;
use super::solver::{SolveMode, SolverOutput};
use crate::error::{Error, Result};
use crate::io::write_csv_rows;
use crate::policy::GridField;

const MAGIC: &str = "# qedlab-grid v1";

/// Contents of a grid file: node values and controls with the grid header.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFile {
    pub grid: Grid,
    pub mode: String,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub values: Vec<f64>,
    pub controls: Vec<f64>,
}

impl GridFile {
    pub fn control_grid(&self) -> Result<GridField> {
        GridField::new(self.grid.d, self.grid.a, self.grid.h, self.controls.clone())
    }
}

/// Writes `# key=value` header lines (`d`, `a`, `h`, `mode`, `alpha`,
/// `rho`) followed by CSV rows `x_1..x_d, value, u_1..u_d`.
pub fn write_grid_file<W: Write>(mut out: W, sol: &SolverOutput) -> Result<()> {
    let g = &sol.grid;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# d={}", g.d)?;
    writeln!(out, "# a={}", g.a)?;
    writeln!(out, "# h={}", g.h)?;
    match sol.mode {
        SolveMode::Discounted { alpha } => {
            writeln!(out, "# mode=discounted")?;
            writeln!(out, "# alpha={alpha}")?;
        }
        SolveMode::Ergodic => {
            writeln!(out, "# mode=ergodic")?;
            if let Some(rho) = sol.rho {
                writeln!(out, "# rho={rho}")?;
            }
        }
    }
    let d = g.d;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    header.push("value".into());
    header.extend((1..=d).map(|i| format!("u_{i}")));
    let rows = (0..g.len()).map(|idx| {
        let mut row: Vec<String> = g.point(idx).iter().map(|v| v.to_string()).collect();
        row.push(sol.values[idx].to_string());
        row.extend(sol.control_at_node(idx).iter().map(|v| v.to_string()));
        row
    });
    write_csv_rows(out, &header, rows)
}

fn header_value<T: std::str::FromStr>(pairs: &[(String, String)], key: &str) -> Result<Option<T>> {
    match pairs.iter().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("grid header `{key}` has unparsable value `{v}`"))),
    }
}

/// Reads a file written by [`write_grid_file`], checking that node
/// coordinates match the header grid.
pub fn read_grid_file<R: Read>(input: R) -> Result<GridFile> {
    let mut reader = BufReader::new(input);
    let mut pairs = Vec::new();
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != MAGIC {
        return Err(Error::Parse(format!("grid file must start with `{MAGIC}`")));
    }
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        match line.strip_prefix('#') {
            Some(rest) => {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("malformed header line `{}`", line.trim_end())))?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
            None => {
                body.push_str(&line);
                reader.read_to_string(&mut body)?;
                break;
            }
        }
    }
    let need = |k: &str| Error::Parse(format!("grid header lacks `{k}`"));
    let d: usize = header_value(&pairs, "d")?.ok_or_else(|| need("d"))?;
    let a: f64 = header_value(&pairs, "a")?.ok_or_else(|| need("a"))?;
    let h: f64 = header_value(&pairs, "h")?.ok_or_else(|| need("h"))?;
    let mode: String = header_value(&pairs, "mode")?.ok_or_else(|| need("mode"))?;
    let grid = Grid::new(d, a, h)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut values = Vec::with_capacity(grid.len());
    let mut controls = Vec::with_capacity(grid.len() * d);
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 2 * d + 1 {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {}",
                idx + 1,
                rec.len(),
                2 * d + 1
            )));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", idx + 1)))?;
        if idx >= grid.len() {
            return Err(Error::Parse(format!("more rows than the {} grid nodes", grid.len())));
        }
        let x = grid.point(idx);
        if x.iter().zip(&nums[..d]).any(|(p, q)| (p - q).abs() > 1e-9 * a.max(1.0)) {
            return Err(Error::Parse(format!(
                "row {} coordinates {:?} do not match node {x:?}",
                idx + 1,
                &nums[..d]
            )));
        }
        values.push(nums[d]);
        controls.extend_from_slice(&nums[d + 1..]);
    }
    if values.len() != grid.len() {
        return Err(Error::Parse(format!(
            "expected {} rows, found {}",
            grid.len(),
            values.len()
        )));
    }
    Ok(GridFile {
        grid,
        mode,
        alpha: header_value(&pairs, "alpha")?,
        rho: header_value(&pairs, "rho")?,
        values,
        controls,
    })
}
