use crate::{CliError, CliResult};
use eigengeo::spd::SYMMETRY_TOLERANCE;
use nalgebra::DMatrix;
use std::path::Path;

/// Parses `p` on the first line followed by `p` rows of `p` whitespace
/// separated values. Blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> CliResult<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| CliError::Input("empty matrix file".into()))?;
    let p: usize = header
        .parse()
        .map_err(|_| CliError::Input(format!("first line must be the dimension, got '{header}'")))?;
    if p == 0 {
        return Err(CliError::Input("dimension must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(p * p);
    for (r, line) in lines.enumerate() {
        if r >= p {
            return Err(CliError::Input(format!("expected {p} rows, found more")));
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| CliError::Input(format!("row {}: '{t}' is not a number", r + 1)))
            })
            .collect::<CliResult<_>>()?;
        if row.len() != p {
            return Err(CliError::Input(format!("row {} has {} values, expected {p}", r + 1, row.len())));
        }
        values.extend(row);
    }
    if values.len() != p * p {
        return Err(CliError::Input(format!("expected {p} rows, found {}", values.len() / p)));
    }
    Ok(DMatrix::from_row_slice(p, p, &values))
}

pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text)
}

/// Rejects asymmetry above the tolerance, then averages with the transpose.
pub fn symmetrized(m: &DMatrix<f64>) -> CliResult<DMatrix<f64>> {
    let asym = (m - m.transpose()).amax();
    if asym >= SYMMETRY_TOLERANCE {
        return Err(CliError::Input(format!(
            "matrix is not symmetric: max asymmetry {asym:e} (tolerance {SYMMETRY_TOLERANCE:e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}
