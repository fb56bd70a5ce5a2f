//! Synthetic data generation, scaling benchmarks, and replicated simulation
//! studies.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::evaluation::{classification_metrics, ClassificationMetrics};
use crate::model::{ConstraintMask, RegressionData};
use crate::sampler::{
    geweke_diagnostic, mcse_sd_ratio, run_chain, substream, RunStats, SamplerConfig, StreamBlock,
};
use crate::selection::select_edges;

/// Parameters of one synthetic regression instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDesign {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Lag-one autocorrelation of the predictor columns.
    pub rho: f64,
    /// Probability a predictor row is active at all.
    pub pi_row: f64,
    /// Probability an entry of an active row is nonzero.
    pub pi_col: f64,
    /// Nonzero coefficient magnitudes are uniform on this range, with a
    /// random sign.
    pub magnitude_range: (f64, f64),
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            n: 100,
            p: 50,
            q: 20,
            rho: 0.0,
            pi_row: 0.2,
            pi_col: 0.5,
            magnitude_range: (0.5, 2.0),
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return Err(Error::InvalidInput(
                "synthetic dimensions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidInput(format!(
                "autocorrelation must lie in [0, 1), got {}",
                self.rho
            )));
        }
        for (name, value) in [("pi_row", self.pi_row), ("pi_col", self.pi_col)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        let (lo, hi) = self.magnitude_range;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::InvalidInput(format!(
                "magnitude range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"
            )));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise standard deviation must be positive, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// One generated instance: design matrix, true coefficients, responses.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub x: DMatrix<f64>,
    pub b_true: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

/// Draw responses `Y = X·B + sd·Z` with standard normal noise from the
/// dedicated noise substream of `seed`.
pub fn generate_from_truth(
    x: &DMatrix<f64>,
    b_true: &DMatrix<f64>,
    noise_sd: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if x.ncols() != b_true.nrows() {
        return Err(Error::InvalidInput(format!(
            "coefficient rows ({}) must match design columns ({})",
            b_true.nrows(),
            x.ncols()
        )));
    }
    if !(noise_sd > 0.0) {
        return Err(Error::InvalidInput(
            "noise standard deviation must be positive".into(),
        ));
    }
    let mut rng = substream(seed, StreamBlock::SynthNoise, 0, 0);
    let mut y = x * b_true;
    // Column-major fill order, matching the storage layout.
    for v in y.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += noise_sd * z;
    }
    Ok(y)
}

/// Generate a complete synthetic instance from a design specification.
///
/// Predictors follow a row-wise AR(1) process with unit stationary variance:
/// `x[i, 0] = z0`, `x[i, j] = rho·x[i, j−1] + sqrt(1 − rho²)·z_j`. The true
/// coefficient matrix activates rows with probability `pi_row`, entries of
/// active rows with probability `pi_col`, and draws magnitudes uniformly on
/// the configured range with random signs.
pub fn generate_design(design: &SyntheticDesign) -> Result<SyntheticInstance> {
    design.validate()?;
    let (n, p, q) = (design.n, design.p, design.q);

    let mut x_rng = substream(design.seed, StreamBlock::SynthX, 0, 0);
    let mut x = DMatrix::zeros(n, p);
    let innovation_scale = (1.0 - design.rho * design.rho).sqrt();
    for i in 0..n {
        let mut prev = 0.0f64;
        for j in 0..p {
            let z: f64 = StandardNormal.sample(&mut x_rng);
            let value = if j == 0 {
                z
            } else {
                design.rho * prev + innovation_scale * z
            };
            x[(i, j)] = value;
            prev = value;
        }
    }

    let mut b_rng = substream(design.seed, StreamBlock::SynthCoeff, 0, 0);
    let mut b_true = DMatrix::zeros(p, q);
    let (lo, hi) = design.magnitude_range;
    for p_idx in 0..p {
        if !b_rng.gen_bool(design.pi_row) {
            continue;
        }
        for q_idx in 0..q {
            if !b_rng.gen_bool(design.pi_col) {
                continue;
            }
            let magnitude = b_rng.gen_range(lo..=hi);
            let sign = if b_rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            b_true[(p_idx, q_idx)] = sign * magnitude;
        }
    }

    let y = generate_from_truth(&x, &b_true, design.noise_sd, design.seed)?;
    Ok(SyntheticInstance { x, b_true, y })
}

/// Least-squares slope of `ln(seconds)` against `ln(size)`.
pub fn fit_loglog_slope(sizes: &[f64], seconds: &[f64]) -> Result<f64> {
    if sizes.len() != seconds.len() || sizes.len() < 2 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two matched points".into(),
        ));
    }
    if sizes.iter().chain(seconds).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(
            "slope fit needs strictly positive values".into(),
        ));
    }
    let xs: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = seconds.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two distinct sizes".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Minimum measured wall time below which a benchmark point is re-run and
/// averaged, and the repetition cap.
pub const BENCH_MIN_SECONDS: f64 = 0.2;
pub const BENCH_MAX_REPS: usize = 8;

/// One timed benchmark point.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Number of coefficients, P·Q.
    pub parameters: usize,
    pub repetitions: usize,
    pub total_seconds: f64,
    pub seconds_per_iteration: f64,
}

/// Scaling benchmark result: per-size timings plus the fitted log-log slope
/// of total sampling time against parameter count.
#[derive(Debug, Clone)]
pub struct ScalingBenchmark {
    pub rows: Vec<BenchmarkRow>,
    pub slope: f64,
}

/// Time one square benchmark instance (P = Q = N = `size`), re-running and
/// averaging while the measured time is below [`BENCH_MIN_SECONDS`].
pub fn square_benchmark_row(
    size: usize,
    rho: f64,
    config: &SamplerConfig,
    seed: u64,
) -> Result<BenchmarkRow> {
    let design = SyntheticDesign {
        n: size,
        p: size,
        q: size,
        rho,
        seed,
        ..SyntheticDesign::default()
    };
    let (stats, reps) = timed_run(&design, config)?;
    Ok(BenchmarkRow {
        n: size,
        p: size,
        q: size,
        parameters: size * size,
        repetitions: reps,
        total_seconds: stats.total_seconds,
        seconds_per_iteration: stats.seconds_per_iteration(),
    })
}

fn timed_run(design: &SyntheticDesign, config: &SamplerConfig) -> Result<(RunStats, usize)> {
    let instance = generate_design(design)?;
    let data = RegressionData::new(instance.x, instance.y)?;
    let mask = ConstraintMask::all_penalized(data.p(), data.q());
    let mut reps = 0usize;
    let mut total = 0.0f64;
    let mut loop_total = 0.0f64;
    let mut iterations = 0u64;
    loop {
        let (_, stats) = run_chain(&data, &mask, config)?;
        reps += 1;
        total += stats.total_seconds;
        loop_total += stats.loop_seconds;
        iterations += stats.iterations;
        if total / reps as f64 >= BENCH_MIN_SECONDS || reps >= BENCH_MAX_REPS {
            break;
        }
    }
    let stats = RunStats {
        clamps: Default::default(),
        total_seconds: total / reps as f64,
        loop_seconds: loop_total / reps as f64,
        iterations: iterations / reps as u64,
    };
    Ok((stats, reps))
}

/// Time the sampler across square instances (P = Q = N = size) and fit the
/// log-log slope of average run time against the coefficient count.
pub fn run_scaling_benchmark(
    sizes: &[usize],
    rho: f64,
    config: &SamplerConfig,
) -> Result<ScalingBenchmark> {
    if sizes.len() < 3 {
        return Err(Error::InvalidInput(
            "scaling benchmark needs at least three sizes".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, &size) in sizes.iter().enumerate() {
        rows.push(square_benchmark_row(size, rho, config, 1000 + i as u64)?);
    }
    let params: Vec<f64> = rows.iter().map(|r| r.parameters as f64).collect();
    let secs: Vec<f64> = rows.iter().map(|r| r.total_seconds).collect();
    let slope = fit_loglog_slope(&params, &secs)?;
    Ok(ScalingBenchmark { rows, slope })
}

/// Time the sampler at fixed P = Q across several sample sizes, reporting
/// per-iteration seconds for each N.
pub fn n_sweep_benchmark(
    p: usize,
    n_values: &[usize],
    rho: f64,
    config: &SamplerConfig,
) -> Result<Vec<BenchmarkRow>> {
    if n_values.is_empty() {
        return Err(Error::InvalidInput(
            "sample-size sweep needs at least one size".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for (i, &n) in n_values.iter().enumerate() {
        let design = SyntheticDesign {
            n,
            p,
            q: p,
            rho,
            seed: 2000 + i as u64,
            ..SyntheticDesign::default()
        };
        let (stats, reps) = timed_run(&design, config)?;
        rows.push(BenchmarkRow {
            n,
            p,
            q: p,
            parameters: p * p,
            repetitions: reps,
            total_seconds: stats.total_seconds,
            seconds_per_iteration: stats.seconds_per_iteration(),
        });
    }
    Ok(rows)
}

/// Per-replicate study outcome: recovery metrics plus convergence
/// diagnostics over a representative set of coefficient traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMetrics {
    pub replicate: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub mcc: f64,
    pub auc: f64,
    pub auc20: f64,
    pub sparsity: f64,
    pub true_sparsity: f64,
    pub max_abs_geweke_z: f64,
    pub frac_geweke_ok: f64,
    pub max_mcse_sd_ratio: f64,
    pub frac_mcse_ok: f64,
    pub seconds: f64,
}

/// Replicated-study output.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub replicates: Vec<ReplicateMetrics>,
}

/// Accessor used to aggregate one study metric across replicates.
pub type MetricAccessor = fn(&ReplicateMetrics) -> f64;

/// Named accessors for aggregating study metrics.
pub const STUDY_METRICS: &[(&str, MetricAccessor)] = &[
    ("tpr", |m| m.tpr),
    ("fpr", |m| m.fpr),
    ("mcc", |m| m.mcc),
    ("auc", |m| m.auc),
    ("auc20", |m| m.auc20),
    ("sparsity", |m| m.sparsity),
    ("true_sparsity", |m| m.true_sparsity),
    ("max_abs_geweke_z", |m| m.max_abs_geweke_z),
    ("frac_geweke_ok", |m| m.frac_geweke_ok),
    ("max_mcse_sd_ratio", |m| m.max_mcse_sd_ratio),
    ("frac_mcse_ok", |m| m.frac_mcse_ok),
    ("seconds", |m| m.seconds),
];

impl StudyResult {
    pub fn mean_of(&self, metric: fn(&ReplicateMetrics) -> f64) -> f64 {
        let n = self.replicates.len() as f64;
        self.replicates.iter().map(metric).sum::<f64>() / n
    }

    /// Standard error of the replicate mean (sample SD over √R).
    pub fn se_of(&self, metric: fn(&ReplicateMetrics) -> f64) -> f64 {
        let n = self.replicates.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_of(metric);
        let var = self
            .replicates
            .iter()
            .map(metric)
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n as f64 - 1.0);
        (var / n as f64).sqrt()
    }
}

/// Number of coefficient traces per replicate checked for convergence.
pub const DIAGNOSTIC_TRACE_COUNT: usize = 40;

/// A trace converges when its |Geweke z| falls below this.
pub const GEWEKE_Z_LIMIT: f64 = 4.0;

/// A trace is precise enough when its MCSE/SD ratio (in percent) falls
/// below this.
pub const MCSE_SD_PERCENT_LIMIT: f64 = 10.0;

/// Deterministic representative edge set: half the slots go to the largest
/// posterior medians in absolute value, the rest are spread evenly across
/// the coefficient grid.
pub fn representative_edges(median: &DMatrix<f64>, count: usize) -> Vec<(usize, usize)> {
    let (p_dim, q_dim) = median.shape();
    let total = p_dim * q_dim;
    let want = count.min(total);
    let mut picked: Vec<usize> = Vec::with_capacity(want);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        median.as_slice()[b]
            .abs()
            .total_cmp(&median.as_slice()[a].abs())
            .then_with(|| a.cmp(&b))
    });
    for &flat in order.iter().take(want / 2) {
        picked.push(flat);
    }
    let stride = (total / want.max(1)).max(1);
    let mut cursor = 0usize;
    while picked.len() < want && cursor < total {
        if !picked.contains(&cursor) {
            picked.push(cursor);
        }
        cursor += stride;
    }
    // Top up linearly if the strided pass collided with existing picks.
    let mut extra = 0usize;
    while picked.len() < want && extra < total {
        if !picked.contains(&extra) {
            picked.push(extra);
        }
        extra += 1;
    }
    picked.sort_unstable();
    picked.iter().map(|flat| (flat % p_dim, flat / p_dim)).collect()
}

/// Everything produced for one replicate of a simulation study.
pub struct ReplicateOutcome {
    pub metrics: ReplicateMetrics,
    pub instance: SyntheticInstance,
    pub archive: crate::archive::PosteriorArchive,
    pub stats: RunStats,
}

/// Run one synthetic replicate end to end: generate, fit on the raw
/// (unstandardized) data, select edges, score recovery, and check
/// convergence diagnostics on a representative trace set.
pub fn run_replicate(
    design: &SyntheticDesign,
    config: &SamplerConfig,
    alpha: f64,
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let mut design = design.clone();
    design.seed = design.seed.wrapping_add(replicate as u64);
    let mut config = config.clone();
    config.seed = config.seed.wrapping_add(replicate as u64);

    let instance = generate_design(&design)?;
    let data = RegressionData::new(instance.x.clone(), instance.y.clone())?;
    let mask = ConstraintMask::all_penalized(data.p(), data.q());
    let (archive, stats) = run_chain(&data, &mask, &config)?;
    let report = select_edges(&archive, alpha)?;

    let truth = instance.b_true.map(|v| v != 0.0);
    let scores = report.median.map(f64::abs);
    let metrics: ClassificationMetrics = classification_metrics(&truth, &report.selected, &scores)?;
    let zero_cells = instance.b_true.iter().filter(|v| **v == 0.0).count();
    let true_sparsity = zero_cells as f64 / instance.b_true.len() as f64;

    let edges = representative_edges(&report.median, DIAGNOSTIC_TRACE_COUNT);
    let mut max_z: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    let mut z_ok = 0usize;
    let mut ratio_ok = 0usize;
    let mut series = vec![0.0f64; archive.t()];
    for &(p_idx, q_idx) in &edges {
        for (slot, v) in series.iter_mut().zip(archive.edge_series(p_idx, q_idx)) {
            *slot = v;
        }
        let z = geweke_diagnostic(&series)?.abs();
        let ratio = mcse_sd_ratio(&series)?;
        max_z = max_z.max(z);
        max_ratio = max_ratio.max(ratio);
        if z < GEWEKE_Z_LIMIT {
            z_ok += 1;
        }
        if ratio < MCSE_SD_PERCENT_LIMIT {
            ratio_ok += 1;
        }
    }
    let n_edges = edges.len().max(1) as f64;

    Ok(ReplicateOutcome {
        metrics: ReplicateMetrics {
            replicate,
            tpr: metrics.tpr,
            fpr: metrics.fpr,
            mcc: metrics.mcc,
            auc: metrics.auc,
            auc20: metrics.auc20,
            sparsity: metrics.sparsity,
            true_sparsity,
            max_abs_geweke_z: max_z,
            frac_geweke_ok: z_ok as f64 / n_edges,
            max_mcse_sd_ratio: max_ratio,
            frac_mcse_ok: ratio_ok as f64 / n_edges,
            seconds: stats.total_seconds,
        },
        instance,
        archive,
        stats,
    })
}

/// Run a replicated simulation study. Each replicate offsets both the data
/// seed and the sampler seed so replicates are independent but the whole
/// study is reproducible.
pub fn simulate_study(
    design: &SyntheticDesign,
    config: &SamplerConfig,
    alpha: f64,
    replicates: usize,
) -> Result<StudyResult> {
    if replicates == 0 {
        return Err(Error::InvalidInput(
            "a study needs at least one replicate".into(),
        ));
    }
    let mut rows = Vec::with_capacity(replicates);
    for r in 0..replicates {
        rows.push(run_replicate(design, config, alpha, r)?.metrics);
    }
    Ok(StudyResult { replicates: rows })
}
