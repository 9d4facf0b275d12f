//! CSV tables and run manifests.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{RunResult, Table};

/// Writes a table with a header row; floats use the shortest exact form.
pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let columns: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| CliError::Io(format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != columns.len() {
            return Err(CliError::Io(format!(
                "row has {} fields for {} columns",
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// `out.csv` gets `out.manifest.json` beside it.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}

fn hz(x: f64) -> f64 {
    ajch::scalar::hertz(x)
}

/// Every resolved parameter of a run.
pub fn manifest(cfg: &ExperimentConfig, result: Option<&RunResult>, columns: &[String]) -> Value {
    let p = cfg.scaled_params();
    let n = p.n_sites();
    let kappa_hz: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| hz(p.kappa[(i, j)])).collect())
        .collect();
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment,
        "description": cfg.description,
        "seed": cfg.seed,
        "shots": cfg.shots,
        "measurement_mode": cfg.mode,
        "hopping_during_pulses": cfg.hopping_during_pulses,
        "n_sites": cfg.n_sites,
        "fock_cutoff": cfg.fock_cutoff,
        "model": {
            "g_b_hz": hz(p.g_b),
            "kappa_hz": kappa_hz,
            "kappa_scale": cfg.kappa_scale,
            "omega_shift_hz": p.omega_shift.iter().map(|&w| hz(w)).collect::<Vec<_>>(),
            "delta_hz": p.delta.iter().map(|&d| hz(d)).collect::<Vec<_>>(),
            "eta": p.eta,
            "omega0_hz": hz(p.omega0_rabi),
        },
        "noise": {
            "dephasing_rates": cfg.noise.dephasing_rates,
            "dephasing_target": cfg.dephasing_target.map(|t| json!({"contrast": t.contrast, "time_s": t.time})),
            "calibrated_dephasing": result.and_then(|r| r.calibrated_dephasing),
            "heating_rate": cfg.noise.heating_rate,
            "rabi_drift_fraction": cfg.noise.rabi_drift_fraction,
            "drift_factors": result.map(|r| r.drift_factors.clone()).unwrap_or_default(),
            "prep_infidelity": cfg.noise.prep_infidelity,
        },
        "preparation": cfg.preparation.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "grid": {
            "start_s": cfg.times.first(),
            "stop_s": cfg.times.last(),
            "points": cfg.times.len(),
        },
        "columns": columns,
        "config": cfg.raw,
    })
}

pub fn write_manifest(path: &Path, manifest: &Value) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}
