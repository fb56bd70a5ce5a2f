//! CSV ingestion and emission for matrices with named rows and columns.
//!
//! The on-disk layout is features-as-columns: a mandatory header row whose
//! first field names the id column, then one row per sample whose first
//! field is the sample id. A transpose flag accommodates files stored with
//! features as rows.

use std::path::Path;

use nalgebra::DMatrix;

use crate::archive::format_float;
use crate::error::{Error, Result};

/// A numeric matrix with row and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrix {
    pub values: DMatrix<f64>,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
}

impl NamedMatrix {
    pub fn new(
        values: DMatrix<f64>,
        row_names: Vec<String>,
        col_names: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() != row_names.len() || values.ncols() != col_names.len() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}×{} but {} row names and {} column names were given",
                values.nrows(),
                values.ncols(),
                row_names.len(),
                col_names.len()
            )));
        }
        check_unique(&row_names, "row")?;
        check_unique(&col_names, "column")?;
        Ok(Self {
            values,
            row_names,
            col_names,
        })
    }

    pub fn transposed(self) -> Self {
        Self {
            values: self.values.transpose(),
            row_names: self.col_names,
            col_names: self.row_names,
        }
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate {what} name '{name}'"
            )));
        }
    }
    Ok(())
}

/// Read a named matrix from CSV. With `transpose = true` the file is taken
/// to hold features as rows and is flipped after reading so that samples
/// are rows again.
pub fn read_named_matrix(path: &Path, transpose: bool) -> Result<NamedMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Io(format!("cannot read header of {}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: need an id column plus at least one data column",
            path.display()
        )));
    }
    let col_names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let mut row_names = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::InvalidInput(format!("{}: data row {}: {e}", path.display(), i + 1))
        })?;
        if record.len() != headers.len() {
            return Err(Error::InvalidInput(format!(
                "{}: data row {} has {} fields, header has {}",
                path.display(),
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        row_names.push(record[0].to_owned());
        for (j, field) in record.iter().skip(1).enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: data row {}, column '{}': cannot parse '{}' as a number",
                    path.display(),
                    i + 1,
                    col_names[j],
                    field
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{}: data row {}, column '{}': non-finite value",
                    path.display(),
                    i + 1,
                    col_names[j]
                )));
            }
            data.push(value);
        }
    }
    if row_names.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let values = DMatrix::from_row_slice(row_names.len(), col_names.len(), &data);
    let matrix = NamedMatrix::new(values, row_names, col_names)?;
    Ok(if transpose { matrix.transposed() } else { matrix })
}

/// Write a named matrix as CSV with the standard layout.
pub fn write_named_matrix(path: &Path, matrix: &NamedMatrix, id_header: &str) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    write!(w, "{id_header}")?;
    for name in &matrix.col_names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (i, name) in matrix.row_names.iter().enumerate() {
        write!(w, "{name}")?;
        for j in 0..matrix.values.ncols() {
            write!(w, ",{}", format_float(matrix.values[(i, j)]))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a constraint mask: a named matrix whose entries must all be exactly
/// 0 or 1 (1 = penalized).
pub fn read_mask(path: &Path) -> Result<crate::model::ConstraintMask> {
    let matrix = read_named_matrix(path, false)?;
    crate::model::ConstraintMask::from_numeric(&matrix.values)
}
