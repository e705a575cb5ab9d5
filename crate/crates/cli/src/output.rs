//! Writes result tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{CliError, CliResult};
use crate::runner::{RowTiming, RunResult, Tables};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    files: Vec<String>,
    timings: &'a [RowTiming],
    total_seconds: f64,
}

/// Writes every table of `result` into `config.output` and returns the
/// written paths, manifest last.
pub fn write_outputs(config: &ExperimentConfig, result: &RunResult) -> CliResult<Vec<PathBuf>> {
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    let ext = config.format.extension();
    let mut written = Vec::new();
    match &result.tables {
        Tables::Composite(rows) => {
            written.push(write_table(
                dir,
                &format!("composite.{ext}"),
                config.format,
                rows,
            )?);
        }
        Tables::HeatNetwork { rows, monte_carlo } => {
            written.push(write_table(
                dir,
                &format!("heat_network.{ext}"),
                config.format,
                rows,
            )?);
            if !monte_carlo.is_empty() {
                written.push(write_table(
                    dir,
                    &format!("heat_network_mc.{ext}"),
                    config.format,
                    monte_carlo,
                )?);
            }
        }
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config,
        files: written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect(),
        timings: &result.timings,
        total_seconds: result.total_seconds,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}

fn write_table<T: Serialize>(
    dir: &Path,
    name: &str,
    format: OutputFormat,
    rows: &[T],
) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let bytes = match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in rows {
                writer.serialize(row)?;
            }
            writer
                .into_inner()
                .map_err(|e| CliError::Encode(e.to_string()))?
        }
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            text.into_bytes()
        }
    };
    write_file(&path, &bytes)?;
    Ok(path)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}
