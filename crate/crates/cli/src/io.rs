//! Matrix file ingestion and export.
//!
//! Two formats: "triplets" (lines of `row,col,value`, 0- or 1-based indices
//! auto-detected) and "dense" (whitespace-separated rows, the token `NA`
//! marking unobserved cells).

use std::fmt::Write as _;
use std::path::Path;

use matfact::MaskedMatrix;
use ndarray::Array2;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Triplets,
    Dense,
}

impl std::str::FromStr for DataFormat {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "triplets" => Ok(DataFormat::Triplets),
            "dense" => Ok(DataFormat::Dense),
            other => Err(CliError::Config(format!(
                "unknown format '{other}' (expected 'triplets' or 'dense')"
            ))),
        }
    }
}

impl std::fmt::Display for DataFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataFormat::Triplets => write!(f, "triplets"),
            DataFormat::Dense => write!(f, "dense"),
        }
    }
}

pub fn load_matrix(path: &Path, format: DataFormat) -> Result<MaskedMatrix, CliError> {
    match format {
        DataFormat::Triplets => load_triplets(path),
        DataFormat::Dense => load_dense(path),
    }
}

/// Parses `row,col,value` lines. Indices are 1-based when the minimum seen
/// index is 1, otherwise 0-based. Duplicate cells keep the last value, with
/// a warning on stderr.
pub fn load_triplets(path: &Path) -> Result<MaskedMatrix, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::Parse {
                line: lineno + 1,
                message: format!("expected 'row,col,value', got '{line}'"),
            });
        }
        let row: usize = parts[0].parse().map_err(|_| CliError::Parse {
            line: lineno + 1,
            message: format!("bad row index '{}'", parts[0]),
        })?;
        let col: usize = parts[1].parse().map_err(|_| CliError::Parse {
            line: lineno + 1,
            message: format!("bad column index '{}'", parts[1]),
        })?;
        let value: f64 = parts[2].parse().map_err(|_| CliError::Parse {
            line: lineno + 1,
            message: format!("bad value '{}'", parts[2]),
        })?;
        cells.push((row, col, value));
    }
    if cells.is_empty() {
        return Err(CliError::Core(matfact::Error::EmptyMask));
    }
    let min_idx = cells
        .iter()
        .flat_map(|&(r, c, _)| [r, c])
        .min()
        .unwrap_or(0);
    let offset = if min_idx == 0 { 0 } else { 1 };
    let nrows = cells.iter().map(|&(r, _, _)| r - offset).max().unwrap() + 1;
    let ncols = cells.iter().map(|&(_, c, _)| c - offset).max().unwrap() + 1;
    let mut values = Array2::<f64>::zeros((nrows, ncols));
    let mut mask = Array2::from_elem((nrows, ncols), false);
    for (r, c, v) in cells {
        let (r, c) = (r - offset, c - offset);
        if mask[[r, c]] {
            eprintln!("warning: duplicate cell ({r}, {c}); keeping the last value");
        }
        values[[r, c]] = v;
        mask[[r, c]] = true;
    }
    Ok(MaskedMatrix::new(values, mask)?)
}

/// Parses whitespace-separated rows; `NA` marks an unobserved cell.
pub fn load_dense(path: &Path) -> Result<MaskedMatrix, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            if token == "NA" {
                row.push(None);
            } else {
                let v: f64 = token.parse().map_err(|_| CliError::Parse {
                    line: lineno + 1,
                    message: format!("bad value '{token}'"),
                })?;
                row.push(Some(v));
            }
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Parse {
                    line: lineno + 1,
                    message: format!(
                        "ragged row: {} columns where the first row has {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Core(matfact::Error::EmptyMask));
    }
    let (m, n) = (rows.len(), rows[0].len());
    let mut values = Array2::<f64>::zeros((m, n));
    let mut mask = Array2::from_elem((m, n), false);
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(v) = cell {
                values[[i, j]] = *v;
                mask[[i, j]] = true;
            }
        }
    }
    Ok(MaskedMatrix::new(values, mask)?)
}

/// Writes a dense matrix; unobserved cells become `NA`.
pub fn write_dense(path: &Path, values: &Array2<f64>, mask: Option<&Array2<bool>>) -> Result<(), CliError> {
    let mut out = String::new();
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            if j > 0 {
                out.push(' ');
            }
            match mask {
                Some(m) if !m[[i, j]] => out.push_str("NA"),
                _ => {
                    let _ = write!(out, "{}", values[[i, j]]);
                }
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the observed cells of a masked matrix as 0-based triplets.
pub fn write_triplets(path: &Path, a: &MaskedMatrix) -> Result<(), CliError> {
    let mut out = String::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if a.mask[[i, j]] {
                let _ = writeln!(out, "{},{},{}", i, j, a.values[[i, j]]);
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads one real per line (IID raw importance scores).
pub fn load_scores(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut scores = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        scores.push(line.parse().map_err(|_| CliError::Parse {
            line: lineno + 1,
            message: format!("bad score '{line}'"),
        })?);
    }
    Ok(scores)
}
