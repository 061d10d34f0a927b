//! Configuration, orchestration and serialization.
//!
//! Results are JSON with full round-trip float precision; tables are UTF-8
//! CSV with a header row. Two environment variables are honoured:
//! [`OUT_DIR_ENV`] overrides the output directory and [`THREADS_ENV`] sets the
//! worker count.

pub mod config;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{FieldConfig, RunConfig, Stage, SCHEMA_VERSION};
pub use run::{run, CheckRecord, ResultRecord, Status, Table};

use crate::error::{Error, Result};

pub const OUT_DIR_ENV: &str = "YAMABE_LAB_OUT_DIR";
pub const THREADS_ENV: &str = "YAMABE_LAB_THREADS";

/// Environment override, else the config value, else `./yamabe-lab-out`.
pub fn resolve_output_dir(config_dir: Option<&Path>) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .or_else(|| config_dir.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("yamabe-lab-out"))
}

/// Worker count from the environment, if set and valid.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} = {v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Tables that can be exported.
pub const EXPORTABLE: [&str; 6] = ["integrals", "corrector_w", "residual_sweep", "rate_table", "profiles_normal", "profiles_tangential"];

/// Writes one table of `record` to `dir/<what>.csv`.
pub fn export_plot_data(record: &ResultRecord, what: &str, dir: &Path) -> Result<PathBuf> {
    let table = record
        .tables
        .get(what)
        .ok_or_else(|| Error::MissingPayload(format!("table '{what}' is not in record {}", record.run_id)))?;
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{what}.csv"));
    write_table(table, &path)?;
    Ok(path)
}

pub fn write_table(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.map(|v| format!("{v:?}")).unwrap_or_default()))?;
    }
    w.flush()?;
    Ok(())
}

/// `record.json` plus every table as CSV.
pub fn write_artifacts(record: &ResultRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let json = dir.join("record.json");
    fs::write(&json, serde_json::to_string_pretty(record)?)?;
    let mut out = vec![json];
    for name in record.tables.keys() {
        out.push(export_plot_data(record, name, dir)?);
    }
    Ok(out)
}

pub fn load_record(path: &Path) -> Result<ResultRecord> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// The full invariant suite for dimension `n` under the reference configuration.
pub fn verify(n: usize) -> Result<ResultRecord> {
    run(&RunConfig::default_for(n))
}
