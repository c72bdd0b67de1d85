use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

/// Bumped whenever a report field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Report path. Defaults to a file in --out-dir, or stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Directory for reports when --output is not given.
    #[arg(long, env = "NSGAME_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

impl OutputArgs {
    /// Where the main report goes; `None` means stdout.
    pub fn destination(&self, default_name: &str) -> Option<PathBuf> {
        let ext = match self.format {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        self.output
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|d| d.join(format!("{default_name}.{ext}"))))
    }

    /// A sibling of the main report, e.g. `report.azuma.csv` next to `report.csv`.
    pub fn sibling(&self, default_name: &str, suffix: &str) -> Option<PathBuf> {
        self.destination(default_name).map(|p| sibling_path(&p, suffix))
    }
}

pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn write_bytes(dest: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match dest {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn write_json<T: Serialize>(dest: Option<&Path>, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(dest, &bytes)
}

pub fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut bytes, row)?;
        bytes.push(b'\n');
    }
    write_bytes(Some(path), &bytes)
}
