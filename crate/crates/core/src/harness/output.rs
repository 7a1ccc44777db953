//! CSV and JSON persistence. Floats are written with 17 significant digits
//! so a reread value is bit-identical.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{ExperimentOutcome, ExperimentSummary, OutputPaths, ReplicationRecord};
use crate::error::Result;

/// Header of the per-replication CSV.
pub const RECORD_COLUMNS: [&str; 16] = [
    "rep", "seed", "j_hat", "forced", "z_hat", "z_err", "ci_z_lo", "ci_z_hi", "ci_z_len",
    "ci_z_cov", "m_hat", "m_err", "ci_m_lo", "ci_m_hi", "ci_m_len", "ci_m_cov",
];

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

/// Writes one row per record under [`RECORD_COLUMNS`].
pub fn write_records_csv<W: Write>(out: W, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.rep.to_string(),
            r.seed.to_string(),
            r.j_hat.to_string(),
            r.forced.to_string(),
            num(r.z_hat),
            num(r.z_err),
            num(r.ci_z_lo),
            num(r.ci_z_hi),
            num(r.ci_z_len),
            r.ci_z_cov.to_string(),
            num(r.m_hat),
            num(r.m_err),
            num(r.ci_m_lo),
            num(r.ci_m_hi),
            num(r.ci_m_len),
            r.ci_m_cov.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a per-replication CSV back.
pub fn read_records_csv(path: &Path) -> Result<Vec<ReplicationRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut records = Vec::new();
    for row in reader.deserialize() {
        records.push(row?);
    }
    Ok(records)
}

/// One header row and one value row.
pub fn write_summary_csv<W: Write>(out: W, s: &ExperimentSummary) -> Result<()> {
    let m = &s.metadata;
    let model = serde_json::to_value(m.model)?;
    let function = serde_json::to_string(&m.function)?;
    let cells: Vec<(&str, String)> = vec![
        ("model", model.as_str().unwrap_or_default().to_string()),
        ("function", function),
        ("eps", opt(m.eps)),
        ("n", m.n.map(|n| n.to_string()).unwrap_or_default()),
        ("sigma", opt(m.sigma)),
        ("effective_noise", num(m.effective_noise)),
        ("alpha", num(m.alpha)),
        ("replications", m.replications.to_string()),
        ("base_seed", m.base_seed.to_string()),
        ("true_z", num(m.true_z)),
        ("true_m", num(m.true_m)),
        ("rho_z", num(m.rho_z)),
        ("rho_m", num(m.rho_m)),
        ("z_err_mean", num(s.z_err.mean)),
        ("z_err_se", num(s.z_err.se)),
        ("m_err_mean", num(s.m_err.mean)),
        ("m_err_se", num(s.m_err.se)),
        ("ci_z_len_mean", num(s.ci_z_len.mean)),
        ("ci_z_len_se", num(s.ci_z_len.se)),
        ("ci_m_len_mean", num(s.ci_m_len.mean)),
        ("ci_m_len_se", num(s.ci_m_len.se)),
        ("coverage_z", num(s.coverage_z.mean)),
        ("coverage_z_se", num(s.coverage_z.se)),
        ("coverage_m", num(s.coverage_m.mean)),
        ("coverage_m_se", num(s.coverage_m.se)),
        ("forced_rate", num(s.forced_rate)),
        ("z_err_ratio", num(s.z_err_ratio)),
        ("m_err_ratio", num(s.m_err_ratio)),
        ("ci_z_len_ratio", num(s.ci_z_len_ratio)),
        ("ci_m_len_ratio", num(s.ci_m_len_ratio)),
    ];
    let mut w = csv::Writer::from_writer(out);
    w.write_record(cells.iter().map(|c| c.0))?;
    w.write_record(cells.iter().map(|c| c.1.as_str()))?;
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON summary.
pub fn write_summary_json<W: Write>(mut out: W, s: &ExperimentSummary) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, s)?;
    writeln!(out)?;
    Ok(())
}

/// Writes every configured output of a finished experiment.
pub fn write_outputs(outcome: &ExperimentOutcome, paths: &OutputPaths) -> Result<()> {
    if let Some(p) = &paths.records_csv {
        write_records_csv(create(p)?, &outcome.records)?;
    }
    if let Some(p) = &paths.summary_csv {
        write_summary_csv(create(p)?, &outcome.summary)?;
    }
    if let Some(p) = &paths.summary_json {
        write_summary_json(create(p)?, &outcome.summary)?;
    }
    Ok(())
}

/// Writes the records of a partial run to `path`.
pub fn write_partial_records(path: &Path, records: &[ReplicationRecord]) -> Result<()> {
    write_records_csv(create(path)?, records)
}
