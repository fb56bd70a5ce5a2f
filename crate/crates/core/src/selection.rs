//! Edge selection from posterior draws and master-predictor scoring.
//!
//! An edge (p, q) is *selected* when its equal-tailed credible interval at
//! level α excludes zero. Each predictor row then receives a fractional
//! influence score (FIS): for every response it influences it earns
//! `1 / h_q`, where `h_q` is the number of selected predictors for that
//! response, so each response distributes one unit of credit among its
//! influencers.

use nalgebra::DMatrix;

use crate::archive::PosteriorArchive;
use crate::error::{Error, Result};

/// Minimum number of retained draws for interval-based selection.
pub const MIN_DRAWS_FOR_SELECTION: usize = 20;

/// Per-edge posterior summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSummary {
    /// Predictor row index (0-based).
    pub p: usize,
    /// Response column index (0-based).
    pub q: usize,
    pub median: f64,
    /// Lower credible bound (α/2 quantile).
    pub lower: f64,
    /// Upper credible bound (1 − α/2 quantile).
    pub upper: f64,
    /// Two-sided posterior tail probability of the sign.
    pub p_value: f64,
    pub selected: bool,
    /// Sign of the posterior median: −1, 0, or 1.
    pub sign: i8,
}

/// Full selection output for one archive.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub alpha: f64,
    /// Row-major over (p, q): predictor outer, response inner.
    pub edges: Vec<EdgeSummary>,
    pub selected: DMatrix<bool>,
    pub median: DMatrix<f64>,
    /// Fractional influence score per predictor row.
    pub fis: Vec<f64>,
    /// Number of responses each predictor influences.
    pub n_influenced: Vec<usize>,
    /// Fraction of edges that were not selected.
    pub sparsity: f64,
}

/// One ranked predictor row.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPredictor {
    pub row: usize,
    pub fis: f64,
    pub n_influenced: usize,
}

/// Type-7 quantile (linear interpolation between order statistics) of an
/// ascending-sorted slice.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&prob));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Two-sided Bayesian tail probability that the coefficient's sign is fixed:
/// `2 · min(#{draws > 0} + 1, #{draws < 0} + 1) / (T + 1)`, capped at 1.
pub fn bayes_p_value(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::InvalidInput(
            "p-value needs at least one draw".into(),
        ));
    }
    let pos = draws.iter().filter(|v| **v > 0.0).count();
    let neg = draws.iter().filter(|v| **v < 0.0).count();
    let t = draws.len();
    let p = 2.0 * (pos.min(neg) + 1) as f64 / (t + 1) as f64;
    Ok(p.min(1.0))
}

/// Summarize every edge of the archive and mark selections at level `alpha`.
pub fn select_edges(archive: &PosteriorArchive, alpha: f64) -> Result<SelectionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if archive.t() < MIN_DRAWS_FOR_SELECTION {
        return Err(Error::InvalidInput(format!(
            "selection needs at least {MIN_DRAWS_FOR_SELECTION} retained draws, archive has {}",
            archive.t()
        )));
    }
    let (p_dim, q_dim) = (archive.p(), archive.q());
    let mut edges = Vec::with_capacity(p_dim * q_dim);
    let mut selected = DMatrix::from_element(p_dim, q_dim, false);
    let mut median = DMatrix::zeros(p_dim, q_dim);
    let mut series = vec![0.0f64; archive.t()];
    let mut n_selected = 0usize;
    for p_idx in 0..p_dim {
        for q_idx in 0..q_dim {
            for (slot, v) in series.iter_mut().zip(archive.edge_series(p_idx, q_idx)) {
                *slot = v;
            }
            let p_value = bayes_p_value(&series)?;
            series.sort_by(f64::total_cmp);
            let med = quantile_type7(&series, 0.5);
            let lower = quantile_type7(&series, alpha / 2.0);
            let upper = quantile_type7(&series, 1.0 - alpha / 2.0);
            let is_selected = lower > 0.0 || upper < 0.0;
            if is_selected {
                n_selected += 1;
            }
            selected[(p_idx, q_idx)] = is_selected;
            median[(p_idx, q_idx)] = med;
            edges.push(EdgeSummary {
                p: p_idx,
                q: q_idx,
                median: med,
                lower,
                upper,
                p_value,
                selected: is_selected,
                sign: if med > 0.0 {
                    1
                } else if med < 0.0 {
                    -1
                } else {
                    0
                },
            });
        }
    }
    let fis = fractional_influence_scores(&selected);
    let n_influenced = (0..p_dim)
        .map(|p_idx| (0..q_dim).filter(|&q_idx| selected[(p_idx, q_idx)]).count())
        .collect();
    let total = (p_dim * q_dim) as f64;
    Ok(SelectionReport {
        alpha,
        edges,
        selected,
        median,
        fis,
        n_influenced,
        sparsity: (total - n_selected as f64) / total,
    })
}

/// Fractional influence score per predictor row.
pub fn fractional_influence_scores(selected: &DMatrix<bool>) -> Vec<f64> {
    let (p_dim, q_dim) = selected.shape();
    let mut h = vec![0usize; q_dim];
    for q_idx in 0..q_dim {
        h[q_idx] = (0..p_dim).filter(|&p_idx| selected[(p_idx, q_idx)]).count();
    }
    let mut fis = vec![0.0f64; p_dim];
    for (p_idx, score) in fis.iter_mut().enumerate() {
        for q_idx in 0..q_dim {
            if selected[(p_idx, q_idx)] && h[q_idx] > 0 {
                *score += 1.0 / h[q_idx] as f64;
            }
        }
    }
    fis
}

/// Rank predictor rows by FIS (descending), ties by number of influenced
/// responses (descending), then by row index (ascending). Rows with zero
/// score are omitted; at most `k` rows are returned.
pub fn rank_master_predictors(
    fis: &[f64],
    n_influenced: &[usize],
    k: usize,
) -> Vec<RankedPredictor> {
    debug_assert_eq!(fis.len(), n_influenced.len());
    let mut ranked: Vec<RankedPredictor> = fis
        .iter()
        .zip(n_influenced)
        .enumerate()
        .filter(|(_, (score, _))| **score > 0.0)
        .map(|(row, (score, n_inf))| RankedPredictor {
            row,
            fis: *score,
            n_influenced: *n_inf,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.fis
            .total_cmp(&a.fis)
            .then_with(|| b.n_influenced.cmp(&a.n_influenced))
            .then_with(|| a.row.cmp(&b.row))
    });
    ranked.truncate(k);
    ranked
}

/// Rank predictors using only a subset of response columns: influence counts
/// and per-response credit are recomputed over the subset.
pub fn subset_top_predictors(
    selected: &DMatrix<bool>,
    response_subset: &[usize],
    k: usize,
) -> Result<Vec<RankedPredictor>> {
    if response_subset.is_empty() {
        return Err(Error::InvalidInput(
            "response subset must be nonempty".into(),
        ));
    }
    let (p_dim, q_dim) = selected.shape();
    for &q_idx in response_subset {
        if q_idx >= q_dim {
            return Err(Error::Lookup(format!(
                "response index {q_idx} is out of range (archive has {q_dim} responses)"
            )));
        }
    }
    let mut h: Vec<usize> = Vec::with_capacity(response_subset.len());
    for &q_idx in response_subset {
        h.push((0..p_dim).filter(|&p_idx| selected[(p_idx, q_idx)]).count());
    }
    let mut fis = vec![0.0f64; p_dim];
    let mut n_influenced = vec![0usize; p_dim];
    for p_idx in 0..p_dim {
        for (j, &q_idx) in response_subset.iter().enumerate() {
            if selected[(p_idx, q_idx)] && h[j] > 0 {
                fis[p_idx] += 1.0 / h[j] as f64;
                n_influenced[p_idx] += 1;
            }
        }
    }
    Ok(rank_master_predictors(&fis, &n_influenced, k))
}

/// Posterior median of every coefficient as a P×Q matrix.
pub fn posterior_median_matrix(archive: &PosteriorArchive) -> DMatrix<f64> {
    let (p_dim, q_dim) = (archive.p(), archive.q());
    let mut median = DMatrix::zeros(p_dim, q_dim);
    let mut series = vec![0.0f64; archive.t()];
    for p_idx in 0..p_dim {
        for q_idx in 0..q_dim {
            for (slot, v) in series.iter_mut().zip(archive.edge_series(p_idx, q_idx)) {
                *slot = v;
            }
            series.sort_by(f64::total_cmp);
            median[(p_idx, q_idx)] = quantile_type7(&series, 0.5);
        }
    }
    median
}
