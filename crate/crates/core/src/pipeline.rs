//! Preprocessing for compositional count data: prevalence/abundance
//! filtering, centered log-ratio transformation, column standardization,
//! and principal-component scores.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// How zeros are replaced before taking logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PseudocountPolicy {
    /// Replace each zero with half of the smallest positive value of the
    /// whole table.
    #[default]
    HalfMinTable,
    /// Replace each zero with half of the smallest positive value of its
    /// own sample (row).
    HalfMinSample,
    /// Replace zeros with a fixed positive constant.
    Constant(f64),
}

/// What an abundance table measures; chiefly documentation, but it decides
/// which filters a pipeline conventionally applies (abundance thresholds
/// are meaningful for microbiome counts, prevalence alone for metabolites).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableKind {
    #[default]
    Microbiome,
    Metabolite,
}

/// A samples × features abundance table with feature names and sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceTable {
    /// Rows are samples, columns are features.
    pub values: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub sample_ids: Vec<String>,
    pub kind: TableKind,
}

impl AbundanceTable {
    pub fn new(
        values: DMatrix<f64>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
        kind: TableKind,
    ) -> Result<Self> {
        if values.ncols() != feature_names.len() || values.nrows() != sample_ids.len() {
            return Err(Error::InvalidInput(format!(
                "table is {}×{} but {} sample ids and {} feature names were given",
                values.nrows(),
                values.ncols(),
                sample_ids.len(),
                feature_names.len()
            )));
        }
        for (names, what) in [(&feature_names, "feature"), (&sample_ids, "sample")] {
            let mut seen = std::collections::HashSet::with_capacity(names.len());
            for name in names.iter() {
                if !seen.insert(name.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate {what} name '{name}'"
                    )));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "abundance values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            values,
            feature_names,
            sample_ids,
            kind,
        })
    }

    /// Convenience constructor with synthetic `s1..sN` sample ids.
    pub fn unnamed_samples(
        values: DMatrix<f64>,
        feature_names: Vec<String>,
        kind: TableKind,
    ) -> Result<Self> {
        let ids = (1..=values.nrows()).map(|i| format!("s{i}")).collect();
        Self::new(values, feature_names, ids, kind)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

/// Outcome of a filtering pass.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub table: AbundanceTable,
    /// Names of the features removed, in original column order.
    pub removed: Vec<String>,
}

/// Keep features whose prevalence (fraction of samples with a nonzero
/// count) is at least `min_prevalence` and whose mean per-sample relative
/// abundance is at least `min_mean_relative_abundance`. Samples with zero
/// total contribute zero relative abundance for every feature.
pub fn filter_features(
    table: &AbundanceTable,
    min_prevalence: f64,
    min_mean_relative_abundance: f64,
) -> Result<FilterOutcome> {
    for (name, v) in [
        ("prevalence threshold", min_prevalence),
        ("abundance threshold", min_mean_relative_abundance),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!(
                "{name} must lie in [0, 1], got {v}"
            )));
        }
    }
    if table.n_samples() == 0 {
        return Err(Error::InvalidInput("table has no samples".into()));
    }
    let n = table.n_samples() as f64;
    let row_sums: Vec<f64> = (0..table.n_samples())
        .map(|i| table.values.row(i).iter().sum::<f64>())
        .collect();
    let mut keep = Vec::new();
    let mut removed = Vec::new();
    for j in 0..table.n_features() {
        let col = table.values.column(j);
        let prevalence = col.iter().filter(|v| **v > 0.0).count() as f64 / n;
        let mean_rel = col
            .iter()
            .enumerate()
            .map(|(i, v)| if row_sums[i] > 0.0 { v / row_sums[i] } else { 0.0 })
            .sum::<f64>()
            / n;
        if prevalence >= min_prevalence && mean_rel >= min_mean_relative_abundance {
            keep.push(j);
        } else {
            removed.push(table.feature_names[j].clone());
        }
    }
    if keep.is_empty() {
        return Err(Error::InvalidInput(
            "filtering removed every feature; relax the thresholds".into(),
        ));
    }
    let values = table.values.select_columns(keep.iter());
    let feature_names = keep
        .iter()
        .map(|&j| table.feature_names[j].clone())
        .collect();
    Ok(FilterOutcome {
        table: AbundanceTable {
            values,
            feature_names,
            sample_ids: table.sample_ids.clone(),
            kind: table.kind,
        },
        removed,
    })
}

/// Centered log-ratio transform: per sample, `ln(x̃_j) − mean_j ln(x̃_j)`,
/// where `x̃` replaces zeros according to the pseudocount policy. Every row
/// of the result sums to zero. Samples without zeros are untouched by the
/// policy, so their output is exactly scale invariant.
pub fn clr_transform(table: &AbundanceTable, policy: PseudocountPolicy) -> Result<DMatrix<f64>> {
    let values = &table.values;
    if values.ncols() < 2 {
        return Err(Error::InvalidInput(
            "the log-ratio transform needs at least two features".into(),
        ));
    }
    if let PseudocountPolicy::Constant(c) = policy {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(
                "constant pseudocount must be positive".into(),
            ));
        }
    }
    for i in 0..values.nrows() {
        if values.row(i).iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample {} (row {}) is entirely zero; it has no composition",
                i + 1,
                i + 1
            )));
        }
    }
    let table_min_nonzero = values
        .iter()
        .filter(|v| **v > 0.0)
        .fold(f64::INFINITY, |acc, v| acc.min(*v));
    let mut out = DMatrix::zeros(values.nrows(), values.ncols());
    for i in 0..values.nrows() {
        let replacement = match policy {
            PseudocountPolicy::HalfMinTable => 0.5 * table_min_nonzero,
            PseudocountPolicy::HalfMinSample => {
                let row_min = values
                    .row(i)
                    .iter()
                    .filter(|v| **v > 0.0)
                    .fold(f64::INFINITY, |acc, v| acc.min(*v));
                0.5 * row_min
            }
            PseudocountPolicy::Constant(c) => c,
        };
        let mut log_sum = 0.0f64;
        for j in 0..values.ncols() {
            let raw = values[(i, j)];
            let adjusted = if raw > 0.0 { raw } else { replacement };
            let lv = adjusted.ln();
            out[(i, j)] = lv;
            log_sum += lv;
        }
        let log_gm = log_sum / values.ncols() as f64;
        for j in 0..values.ncols() {
            out[(i, j)] -= log_gm;
        }
    }
    Ok(out)
}

/// Column standardization outcome.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    /// Sample standard deviations actually divided by (1 for constant
    /// columns).
    pub scales: Vec<f64>,
    /// Indices of columns that had zero variance and were only centered.
    pub constant_columns: Vec<usize>,
}

/// Center each column and divide by its sample standard deviation.
/// Zero-variance columns are centered but not scaled, and reported.
pub fn standardize_columns(m: &DMatrix<f64>) -> Result<Standardized> {
    if m.nrows() < 2 {
        return Err(Error::InvalidInput(
            "standardization needs at least two rows".into(),
        ));
    }
    let n = m.nrows() as f64;
    let mut values = m.clone();
    let mut means = Vec::with_capacity(m.ncols());
    let mut scales = Vec::with_capacity(m.ncols());
    let mut constant_columns = Vec::new();
    for j in 0..m.ncols() {
        let mut col = values.column_mut(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        if sd == 0.0 {
            constant_columns.push(j);
        }
        for v in col.iter_mut() {
            *v = (*v - mean) / scale;
        }
        means.push(mean);
        scales.push(scale);
    }
    Ok(Standardized {
        values,
        means,
        scales,
        constant_columns,
    })
}

/// Principal-component scores of rows.
#[derive(Debug, Clone)]
pub struct PcaScores {
    /// n × k score matrix.
    pub scores: DMatrix<f64>,
    /// Fraction of total variance captured by each kept component.
    pub explained: Vec<f64>,
}

/// First `k` principal-component scores of the row observations, computed
/// from the SVD of the column-centered matrix. The sign of each component
/// is fixed so its largest-magnitude loading is positive.
pub fn pca_scores(m: &DMatrix<f64>, k: usize) -> Result<PcaScores> {
    if m.nrows() < 2 {
        return Err(Error::InvalidInput("PCA needs at least two rows".into()));
    }
    let max_rank = m.nrows().min(m.ncols());
    if k == 0 || k > max_rank {
        return Err(Error::InvalidInput(format!(
            "component count must lie in 1..={max_rank}, got {k}"
        )));
    }
    let mut centered = m.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        for v in col.iter_mut() {
            *v -= mean;
        }
    }
    let svd = nalgebra::SVD::new(centered.clone(), true, true);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD did not produce V^T".into()))?;
    let total_variance: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut scores = DMatrix::zeros(m.nrows(), k);
    let mut explained = Vec::with_capacity(k);
    for comp in 0..k {
        let sigma = svd.singular_values[comp];
        // Sign convention: the loading with the largest magnitude is
        // positive.
        let loading = vt.row(comp);
        let mut max_abs = 0.0f64;
        let mut sign = 1.0f64;
        for v in loading.iter() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                sign = if *v >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        for i in 0..m.nrows() {
            scores[(i, comp)] = sign * u[(i, comp)] * sigma;
        }
        explained.push(if total_variance > 0.0 {
            sigma * sigma / total_variance
        } else {
            0.0
        });
    }
    Ok(PcaScores { scores, explained })
}
