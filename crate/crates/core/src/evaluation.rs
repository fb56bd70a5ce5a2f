//! Recovery and prediction metrics: confusion-based rates, rank-based AUC,
//! standardized partial AUC, prediction error, canonical-correlation curves,
//! and deterministic train/test splitting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sampler::{substream, StreamBlock};

/// False-positive-rate cap for the partial AUC summary.
pub const PARTIAL_AUC_FPR_CAP: f64 = 0.2;
/// Ridge added to both covariance blocks before factorization.
pub const CCA_RIDGE: f64 = 1e-8;
/// Columns with sample standard deviation below this are dropped from
/// canonical-correlation computations.
pub const CCA_VARIANCE_FLOOR: f64 = 1e-12;

/// Entry counts of a 2×2 confusion table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_masks(truth: &DMatrix<bool>, selected: &DMatrix<bool>) -> Result<Self> {
        if truth.shape() != selected.shape() {
            return Err(Error::InvalidInput(
                "truth and selection masks must share a shape".into(),
            ));
        }
        let mut counts = ConfusionCounts {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for (t, s) in truth.iter().zip(selected.iter()) {
            match (t, s) {
                (true, true) => counts.tp += 1,
                (false, true) => counts.fp += 1,
                (false, false) => counts.tn += 1,
                (true, false) => counts.fn_ += 1,
            }
        }
        Ok(counts)
    }

    /// True positive rate; 0 when there are no positives.
    pub fn tpr(&self) -> f64 {
        let pos = self.tp + self.fn_;
        if pos == 0 {
            0.0
        } else {
            self.tp as f64 / pos as f64
        }
    }

    /// False positive rate; 0 when there are no negatives.
    pub fn fpr(&self) -> f64 {
        let neg = self.fp + self.tn;
        if neg == 0 {
            0.0
        } else {
            self.fp as f64 / neg as f64
        }
    }

    /// Matthews correlation coefficient; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fn_) = (
            self.tp as f64,
            self.fp as f64,
            self.tn as f64,
            self.fn_ as f64,
        );
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / denom
        }
    }
}

/// Structure-recovery metrics for one fitted replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub mcc: f64,
    pub auc: f64,
    /// Standardized partial AUC over false positive rates in [0, 0.2]:
    /// 0.5 maps a chance-level scorer, 1 a perfect one.
    pub auc20: f64,
    /// Fraction of edges not selected.
    pub sparsity: f64,
}

/// Compute all recovery metrics from a truth mask, a selection mask, and a
/// per-edge score (higher meaning more evidence for selection).
pub fn classification_metrics(
    truth: &DMatrix<bool>,
    selected: &DMatrix<bool>,
    scores: &DMatrix<f64>,
) -> Result<ClassificationMetrics> {
    if truth.shape() != scores.shape() {
        return Err(Error::InvalidInput(
            "truth mask and score matrix must share a shape".into(),
        ));
    }
    let counts = ConfusionCounts::from_masks(truth, selected)?;
    let labels: Vec<bool> = truth.iter().copied().collect();
    let score_vec: Vec<f64> = scores.iter().copied().collect();
    let auc = rank_auc(&labels, &score_vec)?;
    let auc20 = standardized_partial_auc(&labels, &score_vec, PARTIAL_AUC_FPR_CAP)?;
    let total = labels.len() as f64;
    let selected_count = selected.iter().filter(|s| **s).count() as f64;
    Ok(ClassificationMetrics {
        tpr: counts.tpr(),
        fpr: counts.fpr(),
        mcc: counts.mcc(),
        auc,
        auc20,
        sparsity: (total - selected_count) / total,
    })
}

fn check_non_degenerate(labels: &[bool], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidInput(
            "labels and scores must have equal length".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput(
            "AUC is undefined when the truth labels are all one class".into(),
        ));
    }
    Ok((n_pos, n_neg))
}

/// Area under the ROC curve via the midrank (Mann–Whitney) formula; ties
/// contribute one half.
pub fn rank_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let (n_pos, n_neg) = check_non_degenerate(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tie groups (1-based ranks).
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(l, _)| **l)
        .map(|(_, r)| *r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// ROC polygon vertices from tie-grouped descending scores, starting at
/// (0, 0) and ending at (1, 1).
fn roc_points(labels: &[bool], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (n_pos, n_neg) = check_non_degenerate(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        i = j + 1;
    }
    Ok(points)
}

/// McClish-standardized partial AUC over false positive rates in
/// `[0, cap]`: 0.5·(1 + (pAUC − pAUC_min)/(pAUC_max − pAUC_min)), where
/// pAUC_min is the chance-level area cap²/2 and pAUC_max is cap. A perfect
/// scorer maps exactly to 1 and a constant scorer exactly to 0.5.
pub fn standardized_partial_auc(labels: &[bool], scores: &[f64], cap: f64) -> Result<f64> {
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "partial AUC cap must lie in (0, 1], got {cap}"
        )));
    }
    let points = roc_points(labels, scores)?;
    let mut area = 0.0f64;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x0 >= cap {
            break;
        }
        if x1 <= cap {
            area += 0.5 * (y0 + y1) * (x1 - x0);
        } else {
            // Interpolate the polygon at the cap.
            let y_cap = if x1 > x0 {
                y0 + (y1 - y0) * (cap - x0) / (x1 - x0)
            } else {
                y1
            };
            area += 0.5 * (y0 + y_cap) * (cap - x0);
            break;
        }
    }
    let p_min = 0.5 * cap * cap;
    let p_max = cap * 1.0;
    Ok(0.5 * (1.0 + (area - p_min) / (p_max - p_min)))
}

/// Prediction-error summary over matrix cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionErrors {
    pub rmse: f64,
    pub mad: f64,
}

/// Root-mean-square error and mean absolute deviation between two matrices.
pub fn prediction_errors(actual: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Result<PredictionErrors> {
    if actual.shape() != predicted.shape() {
        return Err(Error::InvalidInput(
            "actual and predicted matrices must share a shape".into(),
        ));
    }
    if actual.is_empty() {
        return Err(Error::InvalidInput(
            "prediction error needs at least one cell".into(),
        ));
    }
    let mut sq = 0.0f64;
    let mut abs = 0.0f64;
    for (a, p) in actual.iter().zip(predicted.iter()) {
        let d = a - p;
        sq += d * d;
        abs += d.abs();
    }
    let m = actual.len() as f64;
    Ok(PredictionErrors {
        rmse: (sq / m).sqrt(),
        mad: abs / m,
    })
}

/// First-canonical-correlation curve and the columns dropped for having
/// (numerically) zero variance.
#[derive(Debug, Clone)]
pub struct CcaCurve {
    /// values[k−1] is the first canonical correlation between the responses
    /// and the top-k ranked predictor columns.
    pub values: Vec<f64>,
    /// Predictor columns (indices into `x`) dropped for zero variance.
    pub dropped_predictors: Vec<usize>,
    /// Response columns dropped for zero variance.
    pub dropped_responses: Vec<usize>,
}

fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        for v in col.iter_mut() {
            *v -= mean;
        }
    }
    out
}

fn column_sd(m: &DMatrix<f64>, j: usize) -> f64 {
    let col = m.column(j);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    if col.len() < 2 {
        return 0.0;
    }
    (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// First canonical correlation between column blocks `a` and `b` (rows are
/// shared observations), with a small ridge on both covariance blocks.
pub fn first_canonical_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::InvalidInput(
            "canonical correlation blocks must share their row count".into(),
        ));
    }
    if a.nrows() < 3 {
        return Err(Error::InvalidInput(
            "canonical correlation needs at least three observations".into(),
        ));
    }
    if a.ncols() == 0 || b.ncols() == 0 {
        return Err(Error::InvalidInput(
            "canonical correlation blocks must be nonempty".into(),
        ));
    }
    let n = a.nrows() as f64;
    let ac = center_columns(a);
    let bc = center_columns(b);
    let scale = 1.0 / (n - 1.0);
    let mut caa = ac.transpose() * &ac * scale;
    let mut cbb = bc.transpose() * &bc * scale;
    let cab = ac.transpose() * &bc * scale;
    for i in 0..caa.nrows() {
        caa[(i, i)] += CCA_RIDGE;
    }
    for i in 0..cbb.nrows() {
        cbb[(i, i)] += CCA_RIDGE;
    }
    let la = nalgebra::Cholesky::new(caa)
        .ok_or_else(|| Error::Numeric("predictor covariance block is not positive definite".into()))?;
    let lb = nalgebra::Cholesky::new(cbb)
        .ok_or_else(|| Error::Numeric("response covariance block is not positive definite".into()))?;
    // K = La^{-1} Cab Lb^{-T}; its largest singular value is the first
    // canonical correlation.
    let mut k = cab;
    // Solve La * X = Cab column by column (lower-triangular forward solve).
    k = la.l().solve_lower_triangular(&k).ok_or_else(|| {
        Error::Numeric("forward solve failed in canonical correlation".into())
    })?;
    // Right-multiply by Lb^{-T}: solve X * Lb^T = K  ⇔  Lb * X^T = K^T.
    let kt = k.transpose();
    let xt = lb
        .l()
        .solve_lower_triangular(&kt)
        .ok_or_else(|| Error::Numeric("forward solve failed in canonical correlation".into()))?;
    k = xt.transpose();
    let svd = nalgebra::SVD::new(k, false, false);
    let rho = svd.singular_values.max();
    Ok(rho.clamp(0.0, 1.0))
}

/// Canonical-correlation curve: for k = 1..=len(ranked), the first canonical
/// correlation between the response block and the top-k ranked predictor
/// columns of `x`. Zero-variance columns are dropped (and reported).
pub fn cumulative_canonical_correlation(
    x: &DMatrix<f64>,
    responses: &DMatrix<f64>,
    ranked_predictors: &[usize],
) -> Result<CcaCurve> {
    if ranked_predictors.is_empty() {
        return Err(Error::InvalidInput(
            "ranked predictor list must be nonempty".into(),
        ));
    }
    if x.nrows() != responses.nrows() {
        return Err(Error::InvalidInput(
            "predictor and response blocks must share their row count".into(),
        ));
    }
    for &j in ranked_predictors {
        if j >= x.ncols() {
            return Err(Error::Lookup(format!(
                "predictor index {j} is out of range (matrix has {} columns)",
                x.ncols()
            )));
        }
    }
    let mut dropped_responses = Vec::new();
    let mut usable_responses = Vec::new();
    for j in 0..responses.ncols() {
        if column_sd(responses, j) < CCA_VARIANCE_FLOOR {
            dropped_responses.push(j);
        } else {
            usable_responses.push(j);
        }
    }
    if usable_responses.is_empty() {
        return Err(Error::InvalidInput(
            "all response columns have zero variance".into(),
        ));
    }
    let resp = responses.select_columns(usable_responses.iter());

    let mut dropped_predictors = Vec::new();
    let mut values = Vec::with_capacity(ranked_predictors.len());
    let mut live: Vec<usize> = Vec::new();
    for &j in ranked_predictors {
        if column_sd(x, j) < CCA_VARIANCE_FLOOR {
            if !dropped_predictors.contains(&j) {
                dropped_predictors.push(j);
            }
        } else {
            live.push(j);
        }
        if live.is_empty() {
            values.push(0.0);
            continue;
        }
        let sub = x.select_columns(live.iter());
        values.push(first_canonical_correlation(&sub, &resp)?);
    }
    Ok(CcaCurve {
        values,
        dropped_predictors,
        dropped_responses,
    })
}

/// Deterministic train/test split of row indices: a seeded Fisher–Yates
/// shuffle, then membership re-sorted to preserve row order within each part.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "splitting needs at least two rows".into(),
        ));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, StreamBlock::Split, 0, 0);
    // Fisher–Yates.
    for i in (1..n).rev() {
        use rand::Rng;
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let mut n_train = (train_fraction * n as f64).round() as usize;
    n_train = n_train.clamp(1, n - 1);
    let mut train: Vec<usize> = idx[..n_train].to_vec();
    let mut test: Vec<usize> = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// (x_train, y_train, x_test, y_test) from a row split.
pub type SplitMatrices = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

/// Apply a row split to paired predictor/response matrices.
pub fn train_test_split(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitMatrices> {
    if x.nrows() != y.nrows() {
        return Err(Error::InvalidInput(
            "predictor and response matrices must share their row count".into(),
        ));
    }
    let (train, test) = split_indices(x.nrows(), train_fraction, seed)?;
    Ok((
        x.select_rows(train.iter()),
        y.select_rows(train.iter()),
        x.select_rows(test.iter()),
        y.select_rows(test.iter()),
    ))
}

/// Convenience: predicted responses from a coefficient matrix.
pub fn predict(x: &DMatrix<f64>, coefficients: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != coefficients.nrows() {
        return Err(Error::InvalidInput(format!(
            "predictor count mismatch: design has {} columns, coefficients have {} rows",
            x.ncols(),
            coefficients.nrows()
        )));
    }
    Ok(x * coefficients)
}

/// Column means as a vector (helper for intercept-free predictions on
/// centered data).
pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        m.ncols(),
        m.column_iter().map(|c| c.iter().sum::<f64>() / c.len() as f64),
    )
}
