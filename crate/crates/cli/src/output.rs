//! Artifact writing: field files, CSV, diagnostics and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use fracmfg::field_io::{self, FieldIoError};
use fracmfg::{SpectralField, VectorField};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::OutputFormat;
use crate::run::RunError;

/// Environment variable naming the root that relative output directories
/// are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "FRACMFG_OUTPUT_ROOT";

pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    if dir.is_absolute() {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir.to_path_buf(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct ArtifactWriter {
    dir: PathBuf,
    formats: Vec<OutputFormat>,
    precision: usize,
    fields: Vec<String>,
    files: Vec<String>,
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

impl ArtifactWriter {
    pub fn new(dir: PathBuf, formats: Vec<OutputFormat>, precision: usize) -> Result<Self, RunError> {
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Self {
            dir,
            formats,
            precision,
            fields: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn field(&mut self, name: &str, field: &SpectralField) -> Result<(), RunError> {
        let stem = self.dir.join(name);
        if self.formats.contains(&OutputFormat::FieldBinary) {
            field_io::write_field(&stem, field, name)?;
            self.fields.push(name.to_string());
            self.files.push(format!("{name}.f64"));
            self.files.push(format!("{name}.json"));
        }
        if self.formats.contains(&OutputFormat::Csv) && field.grid().dim() <= 2 {
            field_io::write_csv(&self.dir.join(format!("{name}.csv")), field, self.precision)?;
            self.files.push(format!("{name}.csv"));
        }
        Ok(())
    }

    /// Components are written as `name_1`, `name_2`, ...
    pub fn vector(&mut self, name: &str, field: &VectorField) -> Result<(), RunError> {
        for (d, comp) in field.components().iter().enumerate() {
            self.field(&format!("{name}_{}", d + 1), comp)?;
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<(), RunError> {
        let path = self.dir.join(file);
        let mut text = serde_json::to_string_pretty(value).expect("diagnostics serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        if !self.files.iter().any(|f| f == file) {
            self.files.push(file.to_string());
        }
        Ok(())
    }

    /// Re-reads every binary field written so far.
    pub fn verify_fields(&self) -> Result<(), RunError> {
        for name in &self.fields {
            field_io::read_field(&self.dir.join(name)).map_err(|e: FieldIoError| {
                RunError::Invariant(format!("field {name} does not reload: {e}"))
            })?;
        }
        Ok(())
    }
}
