//! Output artifacts: CSV writers, the run manifest, and input hashing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use bmaster_core::archive::format_float;
use bmaster_core::selection::{RankedPredictor, SelectionReport};
use bmaster_core::synthesize::{BenchmarkRow, MetricAccessor, StudyResult, STUDY_METRICS};
use bmaster_core::{Error, Result};

/// SHA-256 of a file, hex encoded.
pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(format!("cannot hash {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(file))
}

/// Per-edge summaries with names, in a fixed deterministic order
/// (predictor-major).
pub fn write_edges_csv(
    path: &Path,
    report: &SelectionReport,
    predictor_names: &[String],
    response_names: &[String],
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "predictor,response,median,lower,upper,p_value,selected,sign"
    )?;
    for edge in &report.edges {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            predictor_names[edge.p],
            response_names[edge.q],
            format_float(edge.median),
            format_float(edge.lower),
            format_float(edge.upper),
            format_float(edge.p_value),
            edge.selected,
            edge.sign
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Ranked master predictors.
pub fn write_predictors_csv(
    path: &Path,
    ranked: &[RankedPredictor],
    predictor_names: &[String],
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "rank,predictor,fis,n_influenced")?;
    for (i, row) in ranked.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{}",
            i + 1,
            predictor_names[row.row],
            format_float(row.fis),
            row.n_influenced
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Replicate metrics plus mean and standard-error summary rows.
pub fn write_study_metrics_csv(path: &Path, study: &StudyResult) -> Result<()> {
    let mut w = create(path)?;
    let names: Vec<&str> = STUDY_METRICS.iter().map(|(name, _)| *name).collect();
    writeln!(w, "replicate,{}", names.join(","))?;
    for m in &study.replicates {
        let cells: Vec<String> = STUDY_METRICS
            .iter()
            .map(|(_, get)| format_float(get(m)))
            .collect();
        writeln!(w, "{},{}", m.replicate, cells.join(","))?;
    }
    type Aggregator = fn(&StudyResult, MetricAccessor) -> f64;
    let aggregates: [(&str, Aggregator); 2] =
        [("mean", StudyResult::mean_of), ("se", StudyResult::se_of)];
    for (label, agg) in aggregates {
        let cells: Vec<String> = STUDY_METRICS
            .iter()
            .map(|(_, get)| format_float(agg(study, *get)))
            .collect();
        writeln!(w, "{label},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Benchmark rows plus an optional trailing slope summary row.
pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow], slope: Option<f64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "label,n,p,q,parameters,repetitions,total_seconds,seconds_per_iteration"
    )?;
    for row in rows {
        writeln!(
            w,
            "run,{},{},{},{},{},{},{}",
            row.n,
            row.p,
            row.q,
            row.parameters,
            row.repetitions,
            format_float(row.total_seconds),
            format_float(row.seconds_per_iteration)
        )?;
    }
    if let Some(slope) = slope {
        writeln!(w, "slope,,,,,,{},", format_float(slope))?;
    }
    w.flush()?;
    Ok(())
}

/// Cumulative canonical-correlation curve over a ranked predictor list.
pub fn write_cca_csv(
    path: &Path,
    ranked_names: &[String],
    values: &[f64],
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "k,predictor,canonical_correlation")?;
    for (i, (name, value)) in ranked_names.iter().zip(values).enumerate() {
        writeln!(w, "{},{},{}", i + 1, name, format_float(*value))?;
    }
    w.flush()?;
    Ok(())
}

/// Classification / prediction metric rows for `evaluate`.
pub fn write_metric_rows(path: &Path, rows: &[(String, Vec<(&str, f64)>)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "kind,metric,value")?;
    for (kind, metrics) in rows {
        for (name, value) in metrics {
            writeln!(w, "{kind},{name},{}", format_float(*value))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Convergence summary recorded in the manifest.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticSummary {
    pub max_abs_geweke_z: f64,
    pub max_mcse_sd_ratio: f64,
}

/// Clamp counters in serializable form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClampSummary {
    pub beta_floor: u64,
    pub w_floor: u64,
    pub rate_floor: u64,
    pub sigma2_init_floor: u64,
    pub total: u64,
}

impl From<bmaster_core::sampler::ClampCounters> for ClampSummary {
    fn from(c: bmaster_core::sampler::ClampCounters) -> Self {
        Self {
            beta_floor: c.beta_floor,
            w_floor: c.w_floor,
            rate_floor: c.rate_floor,
            sigma2_init_floor: c.sigma2_init_floor,
            total: c.total(),
        }
    }
}

/// Dimensions of a fitted problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimensionSummary {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub retained_draws: usize,
}

/// The per-directory run manifest. Every command writes exactly one of
/// these into each directory it creates.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimensions: Option<DimensionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_counters: Option<ClampSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticSummary>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config,
            input_hashes: BTreeMap::new(),
            wall_seconds: 0.0,
            config_hash: None,
            dimensions: None,
            clamp_counters: None,
            diagnostics: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Io(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(&path, json)
            .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Create a directory (and parents) if needed.
pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Io(format!("cannot create directory {}: {e}", path.display())))
}
