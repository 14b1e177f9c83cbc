//! Density file input and output.  A density file is plain CSV with a
//! `# key=value` header block, a column header (`x1[,x2],rho`), and one
//! row per grid node in row-major order (last axis fastest), every number
//! printed with 16 fractional digits of scientific notation so values
//! round-trip exactly and identical runs produce byte-identical files.
//! The companion `.meta` file repeats the header block verbatim.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::fga::GridAxis;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("grids are incompatible: {0}")]
    GridMismatch(String),
}

fn io_err(path: &Path, source: std::io::Error) -> OutputError {
    OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write one density file: header block, column names, then row-major data
/// rows with coordinates decoded from the axes.
pub fn write_density(
    path: &Path,
    header: &[(String, String)],
    axes: &[GridAxis],
    values: &[f64],
) -> Result<(), OutputError> {
    let n_nodes: usize = axes.iter().map(|a| a.count()).product();
    assert_eq!(values.len(), n_nodes, "value count must match the grid");
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |text: String| -> Result<(), OutputError> {
        out.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
    };
    for (key, value) in header {
        write(format!("# {key}={value}\n"))?;
    }
    let columns: Vec<String> = (1..=axes.len()).map(|d| format!("x{d}")).collect();
    write(format!("{},rho\n", columns.join(",")))?;
    let mut indices = vec![0usize; axes.len()];
    for &value in values {
        let coords: Vec<String> = indices
            .iter()
            .zip(axes)
            .map(|(&i, axis)| format!("{:.16e}", axis.node(i)))
            .collect();
        write(format!("{},{:.16e}\n", coords.join(","), value))?;
        // advance the row-major odometer, last axis fastest
        for d in (0..axes.len()).rev() {
            indices[d] += 1;
            if indices[d] < axes[d].count() {
                break;
            }
            indices[d] = 0;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Write the metadata companion: the header block of the density file,
/// verbatim.
pub fn write_meta(path: &Path, header: &[(String, String)]) -> Result<(), OutputError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for (key, value) in header {
        out.write_all(format!("# {key}={value}\n").as_bytes())
            .map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// A density file read back into memory.
#[derive(Debug, Clone)]
pub struct DensityFile {
    pub header: Vec<(String, String)>,
    pub dimension: usize,
    /// Coordinate columns, one inner Vec per row: coords[row][axis].
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl DensityFile {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Unique coordinate values of one axis, in file order of first
    /// appearance (ascending for the writer's row-major layout).
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let mut nodes: Vec<f64> = Vec::new();
        for row in &self.coords {
            let v = row[axis];
            if !nodes.contains(&v) {
                nodes.push(v);
            }
        }
        nodes
    }
}

/// Read a density file written by [`write_density`].
pub fn read_density(path: &Path) -> Result<DensityFile, OutputError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = std::io::BufReader::new(file);
    let display = path.display().to_string();
    let fmt = |line: usize, message: String| OutputError::Format {
        path: display.clone(),
        line,
        message,
    };

    let mut header = Vec::new();
    let mut dimension = 0usize;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut saw_columns = false;
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let number = index + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if saw_columns {
                return Err(fmt(number, "header line after data".into()));
            }
            let rest = rest.trim();
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| fmt(number, format!("expected key=value, got '{rest}'")))?;
            header.push((key.trim().to_string(), value.trim().to_string()));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_columns {
            let columns: Vec<&str> = line.split(',').collect();
            if columns.last() != Some(&"rho") || columns.len() < 2 {
                return Err(fmt(number, format!("unexpected column header '{line}'")));
            }
            dimension = columns.len() - 1;
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dimension + 1 {
            return Err(fmt(
                number,
                format!("expected {} fields, got {}", dimension + 1, fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(dimension);
        for field in &fields[..dimension] {
            row.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| fmt(number, format!("bad coordinate '{field}'")))?,
            );
        }
        values.push(
            fields[dimension]
                .trim()
                .parse::<f64>()
                .map_err(|_| fmt(number, format!("bad density '{}'", fields[dimension])))?,
        );
        coords.push(row);
    }
    if !saw_columns {
        return Err(fmt(0, "no column header found".into()));
    }
    Ok(DensityFile {
        header,
        dimension,
        coords,
        values,
    })
}

/// Difference metrics between two densities on the same grid.
#[derive(Debug, Clone, Copy)]
pub struct DiffReport {
    /// Quadrature L2 norm of the difference (trapezoid cell weights).
    pub l2: f64,
    /// Largest pointwise |difference|.
    pub max_abs: f64,
    /// L2 norm of the first density, for relative reporting.
    pub reference_l2: f64,
}

/// Compare two density files node by node.  The coordinate columns must
/// match exactly (same grid, same order); axis steps are inferred from the
/// data for the quadrature weights.
pub fn diff_density(a: &DensityFile, b: &DensityFile) -> Result<DiffReport, OutputError> {
    if a.dimension != b.dimension {
        return Err(OutputError::GridMismatch(format!(
            "dimension {} vs {}",
            a.dimension, b.dimension
        )));
    }
    if a.coords.len() != b.coords.len() {
        return Err(OutputError::GridMismatch(format!(
            "{} vs {} rows",
            a.coords.len(),
            b.coords.len()
        )));
    }
    for (row, (ca, cb)) in a.coords.iter().zip(&b.coords).enumerate() {
        if ca != cb {
            return Err(OutputError::GridMismatch(format!(
                "coordinates differ at row {}: {:?} vs {:?}",
                row + 1,
                ca,
                cb
            )));
        }
    }

    // per-axis trapezoid weights from the node lists
    let axes: Vec<Vec<f64>> = (0..a.dimension).map(|d| a.axis_nodes(d)).collect();
    let axis_weight = |nodes: &[f64], value: f64| -> f64 {
        if nodes.len() == 1 {
            return 1.0;
        }
        let step = nodes[1] - nodes[0];
        if value == nodes[0] || value == nodes[nodes.len() - 1] {
            0.5 * step
        } else {
            step
        }
    };

    let mut l2 = 0.0;
    let mut reference_l2 = 0.0;
    let mut max_abs = 0.0f64;
    for (row, (&va, &vb)) in a.values.iter().zip(&b.values).enumerate() {
        let mut w = 1.0;
        for d in 0..a.dimension {
            w *= axis_weight(&axes[d], a.coords[row][d]);
        }
        let diff = va - vb;
        l2 += w * diff * diff;
        reference_l2 += w * va * va;
        max_abs = max_abs.max(diff.abs());
    }
    Ok(DiffReport {
        l2: l2.sqrt(),
        max_abs,
        reference_l2: reference_l2.sqrt(),
    })
}
