//! CSV tables and the set of files a run has produced.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table built in memory; values are already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenFile {
    /// Relative to the output directory.
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files written into one output directory; removed again on [`Self::discard`].
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<WrittenFile>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[WrittenFile] {
        &self.files
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let bytes = table.to_bytes()?;
        self.write_bytes(name, &bytes, table.len())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<(), CliError> {
        if self.files.iter().any(|f| f.name == name) {
            return Err(CliError::Config(format!("output {name} would be written twice")));
        }
        // registered first so that a failed write is still cleaned up
        self.files.push(WrittenFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            rows,
        });
        fs::write(self.dir.join(name), bytes)?;
        Ok(())
    }

    /// Removes every file of this run.
    pub fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.name));
        }
    }
}
