use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clmm_core::ExperimentConfig;
use serde::Serialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Invariant(format!("writing {}: {e}", path.display()))
}

/// Writes `rows` as CSV with a header row; returns the file name.
pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<String, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(name.to_string())
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<String, CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(&path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
    Ok(name.to_string())
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config: BTreeMap<String, String>,
    config_hash: String,
    seed: u64,
    git_describe: &'static str,
    outputs: &'a [String],
}

/// Run manifest for `command`, written as `<command>.manifest.json`.
pub fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, outputs: &[String]) -> Result<(), CliError> {
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command,
        config: cfg.to_map(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        git_describe: env!("GIT_DESCRIBE"),
        outputs,
    };
    write_json(dir, &format!("{command}.manifest.json"), &manifest)?;
    Ok(())
}
