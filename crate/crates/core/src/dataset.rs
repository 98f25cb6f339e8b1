//! Paired phospho/unphospho concentration data.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Zero entries are replaced by this fraction of their column mean before
/// normalization, since the kinetic model only lives on positive reals.
pub const ZERO_CLAMP_FRACTION: f64 = 1e-6;

/// n samples (rows) by p species (columns), measured in two channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    species: Vec<String>,
    phospho: DMatrix<f64>,
    unphospho: DMatrix<f64>,
    normalized: bool,
}

impl Dataset {
    pub fn new(
        species: Vec<String>,
        phospho: DMatrix<f64>,
        unphospho: DMatrix<f64>,
    ) -> Result<Self> {
        let p = species.len();
        if p == 0 {
            return Err(Error::InvalidInput("dataset has no species".into()));
        }
        if phospho.ncols() != p || unphospho.ncols() != p {
            return Err(Error::InvalidInput(format!(
                "expected {p} columns, got {} phospho and {} unphospho",
                phospho.ncols(),
                unphospho.ncols()
            )));
        }
        if phospho.nrows() != unphospho.nrows() || phospho.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "row counts must match and be positive ({} vs {})",
                phospho.nrows(),
                unphospho.nrows()
            )));
        }
        for (channel, m) in [("phospho", &phospho), ("unphospho", &unphospho)] {
            if let Some(((r, c), v)) = first_bad(m) {
                return Err(Error::InvalidInput(format!(
                    "{channel}[{r},{}] = {v} is not a finite nonnegative concentration",
                    species[c]
                )));
            }
        }
        Ok(Self {
            species,
            phospho,
            unphospho,
            normalized: false,
        })
    }

    /// Build a dataset whose values are already on the unit-mean scale.
    ///
    /// Entries must be strictly positive; the column means are not checked,
    /// which lets tests set up tiny hand-built cases.
    pub fn new_normalized(
        species: Vec<String>,
        phospho: DMatrix<f64>,
        unphospho: DMatrix<f64>,
    ) -> Result<Self> {
        let mut data = Self::new(species, phospho, unphospho)?;
        if data.phospho.iter().chain(data.unphospho.iter()).any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput(
                "normalized data must be strictly positive".into(),
            ));
        }
        data.normalized = true;
        Ok(data)
    }

    pub fn n_samples(&self) -> usize {
        self.phospho.nrows()
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn phospho(&self) -> &DMatrix<f64> {
        &self.phospho
    }

    pub fn unphospho(&self) -> &DMatrix<f64> {
        &self.unphospho
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Total protein U = X + X⁰ for one entry.
    pub fn total(&self, sample: usize, species: usize) -> f64 {
        self.phospho[(sample, species)] + self.unphospho[(sample, species)]
    }

    /// Sample mean of a phospho column.
    pub fn phospho_mean(&self, species: usize) -> f64 {
        self.phospho.column(species).mean()
    }

    /// Scale every phospho and unphospho column to unit mean.
    ///
    /// Zero entries are first clamped to [`ZERO_CLAMP_FRACTION`] of their
    /// column mean, then the column is divided by its (post-clamp) mean.
    pub fn normalize_unit_mean(&self) -> Result<Self> {
        let mut out = self.clone();
        for (channel, m) in [("phospho", &mut out.phospho), ("unphospho", &mut out.unphospho)] {
            for (c, mut col) in m.column_iter_mut().enumerate() {
                let mean = col.mean();
                if !(mean > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "{channel} column `{}` has zero mean",
                        self.species[c]
                    )));
                }
                let zeros = col.iter().filter(|&&v| v == 0.0).count();
                if zeros > 0 {
                    log::warn!(
                        "{channel} column `{}`: clamping {zeros} zero entries to {:e}",
                        self.species[c],
                        ZERO_CLAMP_FRACTION * mean
                    );
                    col.apply(|v| {
                        if *v == 0.0 {
                            *v = ZERO_CLAMP_FRACTION * mean;
                        }
                    });
                }
                let mean = col.mean();
                col.apply(|v| *v /= mean);
            }
        }
        out.normalized = true;
        Ok(out)
    }

    /// Parse a pair of CSV files sharing one header of species names.
    pub fn load(phospho_csv: &Path, unphospho_csv: &Path) -> Result<Self> {
        let (names, phospho) = read_matrix(phospho_csv)?;
        let (names0, unphospho) = read_matrix(unphospho_csv)?;
        let width = names.len().max(names0.len());
        for index in 0..width {
            let left = names.get(index).cloned().unwrap_or_default();
            let right = names0.get(index).cloned().unwrap_or_default();
            if left != right {
                return Err(Error::HeaderMismatch {
                    path: unphospho_csv.to_path_buf(),
                    index,
                    left,
                    right,
                });
            }
        }
        if phospho.nrows() != unphospho.nrows() {
            return Err(Error::InvalidInput(format!(
                "{} has {} rows but {} has {}",
                phospho_csv.display(),
                phospho.nrows(),
                unphospho_csv.display(),
                unphospho.nrows()
            )));
        }
        Self::new(names, phospho, unphospho)
    }

    /// Write both channels as CSV with the species header.
    pub fn write(&self, phospho_csv: &Path, unphospho_csv: &Path) -> Result<()> {
        write_matrix(phospho_csv, &self.species, &self.phospho)?;
        write_matrix(unphospho_csv, &self.species, &self.unphospho)
    }
}

fn first_bad(m: &DMatrix<f64>) -> Option<((usize, usize), f64)> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if !v.is_finite() || v < 0.0 {
                return Some(((r, c), v));
            }
        }
    }
    None
}

fn read_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != names.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: names.get(record.len()).cloned().unwrap_or_default(),
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: names[c].clone(),
                message,
            };
            let v: f64 = cell.parse().map_err(|_| bad(format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value `{cell}`")));
            }
            if v < 0.0 {
                return Err(bad(format!("negative concentration {v}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok((names.clone(), DMatrix::from_row_slice(rows, names.len(), &values)))
}

fn write_matrix(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
