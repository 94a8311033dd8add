//! On-disk field format: raw little-endian `f64` samples in row-major order
//! next to a JSON sidecar `{dim, n, name}`; CSV for 1D/2D inspection.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::SpectralField;
use crate::grid::PeriodicGrid;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed sidecar {path}: {source}")]
    Sidecar {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("payload {path} holds {got} bytes, expected {expected}")]
    Length {
        path: PathBuf,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Field(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub n: usize,
    pub name: String,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FieldIoError + '_ {
    move |source| FieldIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Paths of the payload and sidecar for a stem such as `out/m`.
pub fn field_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f64"), stem.with_extension("json"))
}

pub fn encode_values(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_field(stem: &Path, field: &SpectralField, name: &str) -> Result<(), FieldIoError> {
    let (bin, json) = field_paths(stem);
    fs::write(&bin, encode_values(field.values())).map_err(io_err(&bin))?;
    let header = FieldHeader {
        dim: field.grid().dim(),
        n: field.grid().n(),
        name: name.to_string(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&json, text).map_err(io_err(&json))?;
    Ok(())
}

pub fn read_field(stem: &Path) -> Result<(FieldHeader, SpectralField), FieldIoError> {
    let (bin, json) = field_paths(stem);
    let text = fs::read_to_string(&json).map_err(io_err(&json))?;
    let header: FieldHeader = serde_json::from_str(&text).map_err(|source| FieldIoError::Sidecar {
        path: json.clone(),
        source,
    })?;
    let grid = PeriodicGrid::new(header.dim, header.n)?;
    let bytes = fs::read(&bin).map_err(io_err(&bin))?;
    if bytes.len() != 8 * grid.len() {
        return Err(FieldIoError::Length {
            path: bin,
            got: bytes.len(),
            expected: 8 * grid.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = SpectralField::new(&grid, values)?;
    field.ensure_finite()?;
    Ok((header, field))
}

/// CSV with coordinate columns; 3D fields are sliced at `x3 = 0`.
pub fn write_csv(path: &Path, field: &SpectralField, precision: usize) -> Result<(), FieldIoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let grid = field.grid();
    let write = |out: &mut BufWriter<fs::File>| -> io::Result<()> {
        match grid.dim() {
            1 => writeln!(out, "x1,value")?,
            _ => writeln!(out, "x1,x2,value")?,
        }
        for (i, v) in field.values().iter().enumerate() {
            let idx = grid.index(i);
            if grid.dim() == 3 && idx[2] != 0 {
                continue;
            }
            let x = grid.coords(i);
            match grid.dim() {
                1 => writeln!(out, "{:.p$},{:.p$e}", x[0], v, p = precision)?,
                _ => writeln!(out, "{:.p$},{:.p$},{:.p$e}", x[0], x[1], v, p = precision)?,
            }
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}
