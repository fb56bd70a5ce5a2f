//! Implementations of the four subcommands.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use serde_json::json;

use bmaster_core::archive::PosteriorArchive;
use bmaster_core::evaluation::{
    classification_metrics, cumulative_canonical_correlation, predict, prediction_errors,
};
use bmaster_core::io::{read_mask, read_named_matrix, write_named_matrix, NamedMatrix};
use bmaster_core::model::{ConstraintMask, Hyperparameters, RegressionData};
use bmaster_core::pipeline::{
    clr_transform, filter_features, standardize_columns, AbundanceTable, PseudocountPolicy,
    TableKind,
};
use bmaster_core::sampler::{geweke_diagnostic, mcse_sd_ratio, run_chain, SamplerConfig};
use bmaster_core::selection::{rank_master_predictors, select_edges, subset_top_predictors};
use bmaster_core::synthesize::{
    fit_loglog_slope, n_sweep_benchmark, representative_edges, run_replicate,
    square_benchmark_row, StudyResult, SyntheticDesign, DIAGNOSTIC_TRACE_COUNT,
};
use bmaster_core::Error;

use crate::config::{require, resolve, resolve_switch, CliError, CliResult, FileConfig};
use crate::outputs::{self, DiagnosticSummary, DimensionSummary, Manifest};
use crate::{BenchmarkArgs, EvaluateArgs, FitArgs, SamplerFlags, SimulateArgs};

const DEFAULT_ALPHA: f64 = 0.05;

/// Resolve the sampler configuration: flag, else config-file value, else
/// built-in default.
fn sampler_config(flags: &SamplerFlags, file: &FileConfig) -> CliResult<SamplerConfig> {
    let d = SamplerConfig::default();
    let config = SamplerConfig {
        iterations: resolve(flags.iterations, file.parsed("iterations")?, d.iterations),
        burn_in: resolve(flags.burnin, file.parsed("burnin")?, d.burn_in),
        thin: resolve(flags.thin, file.parsed("thin")?, d.thin),
        seed: resolve(flags.seed, file.parsed("seed")?, d.seed),
        threads: resolve(flags.threads, file.parsed("threads")?, d.threads),
        hp: Hyperparameters {
            a1: resolve(flags.a1, file.parsed("a1")?, d.hp.a1),
            b1: resolve(flags.b1, file.parsed("b1")?, d.hp.b1),
            a2: resolve(flags.a2, file.parsed("a2")?, d.hp.a2),
            b2: resolve(flags.b2, file.parsed("b2")?, d.hp.b2),
        },
        ..d
    };
    config.validate()?;
    Ok(config)
}

fn sampler_config_json(config: &SamplerConfig) -> serde_json::Value {
    json!({
        "iterations": config.iterations,
        "burnin": config.burn_in,
        "thin": config.thin,
        "seed": config.seed,
        "threads": config.threads,
        "a1": config.hp.a1,
        "b1": config.hp.b1,
        "a2": config.hp.a2,
        "b2": config.hp.b2,
    })
}

/// Convergence summary over a representative set of coefficient traces.
/// Archives too short for the estimators yield `None`.
fn archive_diagnostics(
    archive: &PosteriorArchive,
    median: &DMatrix<f64>,
) -> CliResult<Option<DiagnosticSummary>> {
    if archive.t() < 100 {
        return Ok(None);
    }
    let edges = representative_edges(median, DIAGNOSTIC_TRACE_COUNT);
    let mut series = vec![0.0f64; archive.t()];
    let mut max_z: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for &(p_idx, q_idx) in &edges {
        for (slot, v) in series.iter_mut().zip(archive.edge_series(p_idx, q_idx)) {
            *slot = v;
        }
        max_z = max_z.max(geweke_diagnostic(&series)?.abs());
        max_ratio = max_ratio.max(mcse_sd_ratio(&series)?);
    }
    Ok(Some(DiagnosticSummary {
        max_abs_geweke_z: max_z,
        max_mcse_sd_ratio: max_ratio,
    }))
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let start = Instant::now();
    let file = FileConfig::load(args.config.as_deref())?;

    let x_path = require(args.x, file.path("x"), "x")?;
    let y_path = require(args.y, file.path("y"), "y")?;
    let out_dir = require(args.out, file.path("out"), "out")?;
    let mask_path = args.mask.or_else(|| file.path("mask"));
    let transpose_x = resolve_switch(args.transpose_x, file.boolean("transpose-x")?);
    let transpose_y = resolve_switch(args.transpose_y, file.boolean("transpose-y")?);
    let standardize_x = !resolve_switch(args.no_standardize_x, file.boolean("no-standardize-x")?);
    let standardize_y = !resolve_switch(args.no_standardize_y, file.boolean("no-standardize-y")?);
    let clr = resolve_switch(args.clr, file.boolean("clr")?);
    let alpha = resolve(args.alpha, file.parsed("alpha")?, DEFAULT_ALPHA);
    let prevalence = resolve(args.prevalence, file.parsed("prevalence")?, 0.0);
    let min_abundance = resolve(args.min_abundance, file.parsed("min-abundance")?, 0.0);
    let config = sampler_config(&args.sampler, &file)?;

    let x_named = read_named_matrix(&x_path, transpose_x)?;
    let y_named = read_named_matrix(&y_path, transpose_y)?;
    let sample_count = x_named.values.nrows();

    let (mut x_values, predictor_names) = if clr {
        let total_features = x_named.values.ncols();
        let table = AbundanceTable::new(
            x_named.values,
            x_named.col_names,
            x_named.row_names,
            TableKind::Microbiome,
        )?;
        let filtered = filter_features(&table, prevalence, min_abundance)?;
        if !filtered.removed.is_empty() {
            eprintln!(
                "note: abundance filter removed {} of {total_features} features",
                filtered.removed.len()
            );
        }
        let transformed = clr_transform(&filtered.table, PseudocountPolicy::default())?;
        (transformed, filtered.table.feature_names)
    } else {
        (x_named.values, x_named.col_names)
    };
    if standardize_x {
        let s = standardize_columns(&x_values)?;
        if !s.constant_columns.is_empty() {
            eprintln!(
                "note: {} constant predictor column(s) centered but not scaled",
                s.constant_columns.len()
            );
        }
        x_values = s.values;
    }
    let mut y_values = y_named.values;
    let response_names = y_named.col_names;
    if standardize_y {
        let s = standardize_columns(&y_values)?;
        if !s.constant_columns.is_empty() {
            eprintln!(
                "note: {} constant response column(s) centered but not scaled",
                s.constant_columns.len()
            );
        }
        y_values = s.values;
    }

    let p_dim = x_values.ncols();
    let q_dim = y_values.ncols();
    let mask = match &mask_path {
        Some(path) => {
            let m = read_mask(path)?;
            if m.nrows() != p_dim || m.ncols() != q_dim {
                return Err(Error::InvalidInput(format!(
                    "mask is {}×{} but the model needs {p_dim}×{q_dim} \
                     (predictors × responses after preprocessing)",
                    m.nrows(),
                    m.ncols()
                ))
                .into());
            }
            m
        }
        None => ConstraintMask::all_penalized(p_dim, q_dim),
    };

    let data = RegressionData::with_names(
        x_values,
        y_values,
        predictor_names.clone(),
        response_names.clone(),
    )?;
    let (archive, stats) = run_chain(&data, &mask, &config)?;
    let report = select_edges(&archive, alpha)?;
    let ranked = rank_master_predictors(&report.fis, &report.n_influenced, p_dim);
    let diagnostics = archive_diagnostics(&archive, &report.median)?;

    outputs::ensure_dir(&out_dir)?;
    archive.write_binary(&out_dir.join("draws.bin"))?;
    outputs::write_edges_csv(
        &out_dir.join("edges.csv"),
        &report,
        &predictor_names,
        &response_names,
    )?;
    outputs::write_predictors_csv(&out_dir.join("predictors.csv"), &ranked, &predictor_names)?;

    let mut manifest = Manifest::new(
        "fit",
        config.seed,
        json!({
            "sampler": sampler_config_json(&config),
            "alpha": alpha,
            "clr": clr,
            "prevalence": prevalence,
            "min-abundance": min_abundance,
            "standardize-x": standardize_x,
            "standardize-y": standardize_y,
            "transpose-x": transpose_x,
            "transpose-y": transpose_y,
        }),
    );
    manifest
        .input_hashes
        .insert("x".into(), outputs::sha256_hex(&x_path)?);
    manifest
        .input_hashes
        .insert("y".into(), outputs::sha256_hex(&y_path)?);
    if let Some(path) = &mask_path {
        manifest
            .input_hashes
            .insert("mask".into(), outputs::sha256_hex(path)?);
    }
    manifest.config_hash = Some(format!("{:016x}", archive.config_hash()));
    manifest.dimensions = Some(DimensionSummary {
        n: sample_count,
        p: p_dim,
        q: q_dim,
        retained_draws: archive.t(),
    });
    manifest.clamp_counters = Some(stats.clamps.into());
    manifest.diagnostics = diagnostics;
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out_dir)?;
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let start = Instant::now();
    let file = FileConfig::load(args.config.as_deref())?;

    let out_dir = require(args.out, file.path("out"), "out")?;
    let alpha = resolve(args.alpha, file.parsed("alpha")?, DEFAULT_ALPHA);
    let replicates = resolve(args.replicates, file.parsed("replicates")?, 10usize);
    if replicates == 0 {
        return Err(CliError::usage("replicates must be at least 1"));
    }
    let config = sampler_config(&args.sampler, &file)?;
    let d = SyntheticDesign::default();
    let design = SyntheticDesign {
        n: resolve(args.n, file.parsed("n")?, d.n),
        p: resolve(args.p, file.parsed("p")?, d.p),
        q: resolve(args.q, file.parsed("q")?, d.q),
        rho: resolve(args.rho, file.parsed("rho")?, d.rho),
        pi_row: resolve(args.pi_row, file.parsed("pi-row")?, d.pi_row),
        pi_col: resolve(args.pi_col, file.parsed("pi-col")?, d.pi_col),
        noise_sd: resolve(args.noise_sd, file.parsed("noise-sd")?, d.noise_sd),
        magnitude_range: d.magnitude_range,
        seed: config.seed,
    };
    design.validate()?;

    let design_json = json!({
        "n": design.n,
        "p": design.p,
        "q": design.q,
        "rho": design.rho,
        "pi-row": design.pi_row,
        "pi-col": design.pi_col,
        "noise-sd": design.noise_sd,
        "magnitude-lo": design.magnitude_range.0,
        "magnitude-hi": design.magnitude_range.1,
    });
    let sample_ids: Vec<String> = (1..=design.n).map(|i| format!("s{i}")).collect();
    let predictor_names: Vec<String> = (1..=design.p).map(|i| format!("x{i}")).collect();
    let response_names: Vec<String> = (1..=design.q).map(|i| format!("y{i}")).collect();

    outputs::ensure_dir(&out_dir)?;
    let mut metric_rows = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let rep_start = Instant::now();
        let outcome = run_replicate(&design, &config, alpha, r)?;
        let rep_dir = out_dir.join(format!("replicate_{r:03}"));
        outputs::ensure_dir(&rep_dir)?;
        write_named_matrix(
            &rep_dir.join("X.csv"),
            &NamedMatrix::new(
                outcome.instance.x.clone(),
                sample_ids.clone(),
                predictor_names.clone(),
            )?,
            "sample",
        )?;
        write_named_matrix(
            &rep_dir.join("Y.csv"),
            &NamedMatrix::new(
                outcome.instance.y.clone(),
                sample_ids.clone(),
                response_names.clone(),
            )?,
            "sample",
        )?;
        write_named_matrix(
            &rep_dir.join("Btrue.csv"),
            &NamedMatrix::new(
                outcome.instance.b_true.clone(),
                predictor_names.clone(),
                response_names.clone(),
            )?,
            "predictor",
        )?;
        outcome.archive.write_binary(&rep_dir.join("draws.bin"))?;

        let mut manifest = Manifest::new(
            "simulate",
            config.seed.wrapping_add(r as u64),
            json!({
                "replicate": r,
                "alpha": alpha,
                "design": design_json.clone(),
                "sampler": sampler_config_json(&config),
            }),
        );
        manifest.config_hash = Some(format!("{:016x}", outcome.archive.config_hash()));
        manifest.dimensions = Some(DimensionSummary {
            n: design.n,
            p: design.p,
            q: design.q,
            retained_draws: outcome.archive.t(),
        });
        manifest.clamp_counters = Some(outcome.stats.clamps.into());
        manifest.diagnostics = Some(DiagnosticSummary {
            max_abs_geweke_z: outcome.metrics.max_abs_geweke_z,
            max_mcse_sd_ratio: outcome.metrics.max_mcse_sd_ratio,
        });
        manifest.wall_seconds = rep_start.elapsed().as_secs_f64();
        manifest.write(&rep_dir)?;
        metric_rows.push(outcome.metrics);
    }

    let study = StudyResult {
        replicates: metric_rows,
    };
    outputs::write_study_metrics_csv(&out_dir.join("metrics.csv"), &study)?;

    let mut manifest = Manifest::new(
        "simulate",
        config.seed,
        json!({
            "replicates": replicates,
            "alpha": alpha,
            "design": design_json,
            "sampler": sampler_config_json(&config),
        }),
    );
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out_dir)?;
    Ok(())
}

pub fn benchmark(args: BenchmarkArgs) -> CliResult<()> {
    let start = Instant::now();
    let file = FileConfig::load(args.config.as_deref())?;

    let out_dir = require(args.out, file.path("out"), "out")?;
    let rho = resolve(args.rho, file.parsed("rho")?, 0.0);
    let config = sampler_config(&args.sampler, &file)?;
    let n_sweep = resolve_switch(args.n_sweep, file.boolean("n-sweep")?);

    let (rows, slope, mode_json) = if n_sweep {
        let p = require(args.p, file.parsed("p")?, "p")?;
        if p == 0 {
            return Err(CliError::usage("--p must be positive"));
        }
        let n_values = [p, 5 * p, 10 * p];
        let rows = n_sweep_benchmark(p, &n_values, rho, &config)?;
        let mode = json!({"mode": "n-sweep", "p": p, "n": n_values.to_vec(), "rho": rho});
        (rows, None, mode)
    } else {
        let sizes: Vec<usize> = require(args.sizes, file.list("sizes")?, "sizes")?;
        if sizes.len() < 2 {
            return Err(CliError::usage(
                "the scaling benchmark needs at least two sizes",
            ));
        }
        if sizes.contains(&0) {
            return Err(CliError::usage("benchmark sizes must be positive"));
        }
        let mut rows = Vec::with_capacity(sizes.len());
        for (i, &size) in sizes.iter().enumerate() {
            rows.push(square_benchmark_row(size, rho, &config, 1000 + i as u64)?);
        }
        let params: Vec<f64> = rows.iter().map(|r| r.parameters as f64).collect();
        let secs: Vec<f64> = rows.iter().map(|r| r.total_seconds).collect();
        let slope = fit_loglog_slope(&params, &secs)?;
        let mode = json!({"mode": "scaling", "sizes": sizes, "rho": rho});
        (rows, Some(slope), mode)
    };

    outputs::ensure_dir(&out_dir)?;
    outputs::write_benchmark_csv(&out_dir.join("benchmark.csv"), &rows, slope)?;
    let mut manifest = Manifest::new(
        "benchmark",
        config.seed,
        json!({
            "benchmark": mode_json,
            "sampler": sampler_config_json(&config),
        }),
    );
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out_dir)?;
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let start = Instant::now();
    let file = FileConfig::load(args.config.as_deref())?;

    let archive_path = require(args.archive, file.path("archive"), "archive")?;
    let out_dir = require(args.out, file.path("out"), "out")?;
    let alpha = resolve(args.alpha, file.parsed("alpha")?, DEFAULT_ALPHA);

    let btrue_path = args.btrue.or_else(|| file.path("btrue"));
    let x_test_path = args.x_test.or_else(|| file.path("x-test"));
    let y_test_path = args.y_test.or_else(|| file.path("y-test"));
    let subset_path = args.subset.or_else(|| file.path("subset"));
    let x_path = args.x.or_else(|| file.path("x"));
    let y_path = args.y.or_else(|| file.path("y"));

    if btrue_path.is_none() && x_test_path.is_none() && y_test_path.is_none()
        && subset_path.is_none()
    {
        return Err(CliError::usage(
            "evaluate needs at least one of --btrue, --x-test with --y-test, or --subset",
        ));
    }
    if x_test_path.is_some() != y_test_path.is_some() {
        return Err(CliError::usage(
            "--x-test and --y-test must be given together",
        ));
    }

    let archive = PosteriorArchive::read_binary(&archive_path)?;
    let report = select_edges(&archive, alpha)?;
    let median = &report.median;
    let (p_dim, q_dim) = (archive.p(), archive.q());

    let mut hashes: Vec<(&str, PathBuf)> = vec![("archive", archive_path.clone())];
    let mut metric_rows: Vec<(String, Vec<(&str, f64)>)> = Vec::new();
    outputs::ensure_dir(&out_dir)?;

    if let Some(path) = &btrue_path {
        let named = read_named_matrix(path, false)?;
        if named.values.shape() != (p_dim, q_dim) {
            return Err(Error::InvalidInput(format!(
                "true coefficient matrix is {}×{} but the archive holds {p_dim}×{q_dim} \
                 coefficients",
                named.values.nrows(),
                named.values.ncols()
            ))
            .into());
        }
        let truth = named.values.map(|v| v != 0.0);
        let scores = median.map(f64::abs);
        let m = classification_metrics(&truth, &report.selected, &scores)?;
        metric_rows.push((
            "classification".to_owned(),
            vec![
                ("tpr", m.tpr),
                ("fpr", m.fpr),
                ("mcc", m.mcc),
                ("auc", m.auc),
                ("auc20", m.auc20),
                ("sparsity", m.sparsity),
            ],
        ));
        hashes.push(("btrue", path.clone()));
    }

    if let (Some(xt), Some(yt)) = (&x_test_path, &y_test_path) {
        let x_test = read_named_matrix(xt, false)?;
        let y_test = read_named_matrix(yt, false)?;
        if x_test.values.ncols() != p_dim {
            return Err(Error::InvalidInput(format!(
                "holdout X has {} columns but the archive holds {p_dim} predictors",
                x_test.values.ncols()
            ))
            .into());
        }
        if y_test.values.ncols() != q_dim {
            return Err(Error::InvalidInput(format!(
                "holdout Y has {} columns but the archive holds {q_dim} responses",
                y_test.values.ncols()
            ))
            .into());
        }
        if x_test.values.nrows() != y_test.values.nrows() {
            return Err(Error::InvalidInput(format!(
                "holdout X has {} rows but holdout Y has {}",
                x_test.values.nrows(),
                y_test.values.nrows()
            ))
            .into());
        }
        let predicted = predict(&x_test.values, median)?;
        let errs = prediction_errors(&y_test.values, &predicted)?;
        metric_rows.push((
            "prediction".to_owned(),
            vec![("rmse", errs.rmse), ("mad", errs.mad)],
        ));
        hashes.push(("x-test", xt.clone()));
        hashes.push(("y-test", yt.clone()));
    }

    if let Some(spath) = &subset_path {
        let x_path = x_path.ok_or_else(|| {
            CliError::usage("--subset requires --x (predictors on the fitting scale)")
        })?;
        let y_path = y_path.ok_or_else(|| {
            CliError::usage("--subset requires --y (responses on the fitting scale)")
        })?;
        let x = read_named_matrix(&x_path, false)?;
        let y = read_named_matrix(&y_path, false)?;
        if x.values.ncols() != p_dim {
            return Err(Error::InvalidInput(format!(
                "--x has {} columns but the archive holds {p_dim} predictors",
                x.values.ncols()
            ))
            .into());
        }
        if y.values.ncols() != q_dim {
            return Err(Error::InvalidInput(format!(
                "--y has {} columns but the archive holds {q_dim} responses",
                y.values.ncols()
            ))
            .into());
        }
        if x.values.nrows() != y.values.nrows() {
            return Err(Error::InvalidInput(format!(
                "--x has {} rows but --y has {}",
                x.values.nrows(),
                y.values.nrows()
            ))
            .into());
        }
        let text = std::fs::read_to_string(spath).map_err(|e| {
            Error::Io(format!("cannot read subset file {}: {e}", spath.display()))
        })?;
        let mut subset_indices = Vec::new();
        for raw in text.lines() {
            let name = raw.trim();
            if name.is_empty() || name.starts_with('#') {
                continue;
            }
            let idx = y
                .col_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| {
                    Error::Lookup(format!(
                        "response '{name}' from the subset file is not a column of {}",
                        y_path.display()
                    ))
                })?;
            subset_indices.push(idx);
        }
        if subset_indices.is_empty() {
            return Err(Error::InvalidInput(format!(
                "subset file {} names no responses",
                spath.display()
            ))
            .into());
        }
        subset_indices.sort_unstable();
        subset_indices.dedup();
        let ranked = subset_top_predictors(&report.selected, &subset_indices, p_dim)?;
        if ranked.is_empty() {
            return Err(Error::InvalidInput(
                "no predictor is selected for any response in the subset; nothing to rank".into(),
            )
            .into());
        }
        let ranked_cols: Vec<usize> = ranked.iter().map(|r| r.row).collect();
        let ranked_names: Vec<String> = ranked.iter().map(|r| x.col_names[r.row].clone()).collect();
        let responses_sub = y.values.select_columns(subset_indices.iter());
        let curve = cumulative_canonical_correlation(&x.values, &responses_sub, &ranked_cols)?;
        outputs::write_cca_csv(&out_dir.join("cca.csv"), &ranked_names, &curve.values)?;
        hashes.push(("subset", spath.clone()));
        hashes.push(("x", x_path));
        hashes.push(("y", y_path));
    }

    if !metric_rows.is_empty() {
        outputs::write_metric_rows(&out_dir.join("metrics.csv"), &metric_rows)?;
    }

    let mut manifest = Manifest::new(
        "evaluate",
        archive.seed(),
        json!({ "alpha": alpha }),
    );
    for (key, path) in &hashes {
        manifest
            .input_hashes
            .insert((*key).to_owned(), outputs::sha256_hex(path)?);
    }
    manifest.config_hash = Some(format!("{:016x}", archive.config_hash()));
    manifest.dimensions = Some(DimensionSummary {
        n: archive.n(),
        p: p_dim,
        q: q_dim,
        retained_draws: archive.t(),
    });
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out_dir)?;
    Ok(())
}
