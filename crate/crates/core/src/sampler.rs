//! Blocked Gibbs sampler for the shrinkage regression model, with
//! deterministic parallel substreams, chain management, and single-chain
//! convergence diagnostics.
//!
//! One sweep updates five blocks in a fixed order:
//! 1. every coefficient column β_q (exact multivariate-normal draw),
//! 2. every penalized entry precision δ⁽¹⁾_pq (inverse-Gaussian),
//! 3. every row precision δ⁽²⁾_p (inverse-Gaussian),
//! 4. every response variance σ²_q (inverse-gamma),
//! 5. the shrinkage levels λ1², λ2² (gamma).
//!
//! Determinism: each (block, index, iteration) triple owns an independently
//! derived ChaCha substream, so results are bit-identical for any worker
//! count or scheduling order.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::archive::PosteriorArchive;
use crate::dist::{
    draw_gamma, draw_inverse_gamma, draw_inverse_gaussian, draw_std_normal_vec,
};
use crate::error::{Error, Result};
use crate::model::{ConstraintMask, Hyperparameters, LatentState, RegressionData};

/// Floor applied to |β_pq| before inverting it in the δ⁽¹⁾ conditional mean.
pub const BETA_FLOOR: f64 = 1e-12;
/// Floor applied to the row weight w_p in the δ⁽²⁾ conditional mean.
pub const W_FLOOR: f64 = 1e-24;
/// Floor applied to the σ² conditional rate (exact-fit degenerate case).
pub const RATE_FLOOR: f64 = 1e-24;
/// Floor applied to the initial per-response sample variance.
pub const SIGMA2_INIT_FLOOR: f64 = 1e-12;

/// Prior on the response variances σ²_q.
///
/// Production fits use the scale-invariant `Jeffreys` prior (∝ 1/σ²). The
/// proper inverse-gamma variant exists for validation harnesses that need a
/// prior they can simulate from; it keeps the conditional in the same family
/// with shape `(N+s_q)/2 + shape` and rate `(…)/2 + rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Prior {
    Jeffreys,
    InverseGamma { shape: f64, rate: f64 },
}

impl Sigma2Prior {
    fn validate(&self) -> Result<()> {
        if let Sigma2Prior::InverseGamma { shape, rate } = self {
            if !(*shape > 0.0) || !(*rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
                return Err(Error::Domain(format!(
                    "inverse-gamma variance prior needs positive finite parameters \
                     (shape={shape}, rate={rate})"
                )));
            }
        }
        Ok(())
    }

    fn additions(&self) -> (f64, f64) {
        match self {
            Sigma2Prior::Jeffreys => (0.0, 0.0),
            Sigma2Prior::InverseGamma { shape, rate } => (*shape, *rate),
        }
    }
}

/// Chain initialization policy.
///
/// `ScaleAware` (the only policy, id 0): B = 0, δ⁽¹⁾ = δ⁽²⁾ = 1 on penalized
/// slots, σ²_q = sample variance of y_q floored at [`SIGMA2_INIT_FLOOR`],
/// λ1² = λ2² = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPolicy {
    #[default]
    ScaleAware,
}

impl InitPolicy {
    pub fn id(&self) -> u8 {
        match self {
            InitPolicy::ScaleAware => 0,
        }
    }
}

/// Full sampler configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Total Gibbs sweeps (including burn-in).
    pub iterations: u64,
    /// Leading sweeps discarded from the archive.
    pub burn_in: u64,
    /// Keep every `thin`-th post-burn-in draw.
    pub thin: u64,
    /// Master seed; all substreams derive from it.
    pub seed: u64,
    /// Worker threads for the column updates. Never affects results.
    pub threads: usize,
    pub hp: Hyperparameters,
    pub init: InitPolicy,
    pub sigma2_prior: Sigma2Prior,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            burn_in: 100,
            thin: 1,
            seed: 0,
            threads: 1,
            hp: Hyperparameters::default(),
            init: InitPolicy::ScaleAware,
            sigma2_prior: Sigma2Prior::Jeffreys,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidInput(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin < 1 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        if self.threads < 1 {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        self.hp.validate()?;
        self.sigma2_prior.validate()?;
        Ok(())
    }

    /// Number of retained draws: `floor((iterations − burn_in)/thin)`.
    pub fn retained_draws(&self) -> u64 {
        (self.iterations - self.burn_in) / self.thin
    }

    /// FNV-1a hash over every result-affecting field.
    ///
    /// `threads` is deliberately excluded: the determinism contract promises
    /// identical output for any worker count, so thread count is not part of
    /// a run's identity.
    pub fn config_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(0xB0A5_7E52_0000_0001); // format tag
        h.write_u64(self.iterations);
        h.write_u64(self.burn_in);
        h.write_u64(self.thin);
        h.write_u64(self.seed);
        h.write_u64(self.hp.a1.to_bits());
        h.write_u64(self.hp.b1.to_bits());
        h.write_u64(self.hp.a2.to_bits());
        h.write_u64(self.hp.b2.to_bits());
        h.write_u64(self.init.id() as u64);
        match self.sigma2_prior {
            Sigma2Prior::Jeffreys => h.write_u64(0),
            Sigma2Prior::InverseGamma { shape, rate } => {
                h.write_u64(1);
                h.write_u64(shape.to_bits());
                h.write_u64(rate.to_bits());
            }
        }
        h.finish()
    }
}

/// Minimal FNV-1a accumulator (64-bit).
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
    pub fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &byte in bytes {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

/// Stable identifiers for the random-stream owners.
#[derive(Debug, Clone, Copy)]
#[repr(u8)]
pub enum StreamBlock {
    Beta = 1,
    Delta1 = 2,
    Delta2 = 3,
    Sigma2 = 4,
    Lambda = 5,
    // Tags ≥ 10 belong to data-generation utilities (see `synthesize`).
    SynthX = 10,
    SynthCoeff = 11,
    SynthNoise = 12,
    Split = 13,
}

/// Deterministically derived substream for one (block, index, iteration).
pub fn substream(seed: u64, block: StreamBlock, index: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((block as u64) << 56) | ((index & 0x00FF_FFFF) << 32) | (iteration & 0xFFFF_FFFF);
    rng.set_stream(id);
    rng
}

/// Clamp-event counters surfaced in run reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounters {
    /// |β_pq| floored in the δ⁽¹⁾ conditional.
    pub beta_floor: u64,
    /// Row weight w_p floored in the δ⁽²⁾ conditional.
    pub w_floor: u64,
    /// σ² conditional rate floored.
    pub rate_floor: u64,
    /// Initial response variances floored.
    pub sigma2_init_floor: u64,
}

impl ClampCounters {
    pub fn total(&self) -> u64 {
        self.beta_floor + self.w_floor + self.rate_floor + self.sigma2_init_floor
    }
}

/// Timing and clamp report for one chain run.
#[derive(Debug, Clone, Copy)]
pub struct RunStats {
    pub clamps: ClampCounters,
    /// Wall time of the whole `run_chain` call.
    pub total_seconds: f64,
    /// Wall time of the iteration loop only (excludes construction and the
    /// Gram/XᵀY precomputation).
    pub loop_seconds: f64,
    pub iterations: u64,
}

impl RunStats {
    pub fn seconds_per_iteration(&self) -> f64 {
        self.loop_seconds / self.iterations.max(1) as f64
    }
}

/// Closed-form parameters of each block's full conditional.
///
/// These are the formulas the update steps draw from; tests compare their
/// log-densities against [`crate::model::joint_log_density`] differences.
pub mod conditionals {
    use super::*;

    /// Parameters of β_q | · ~ Normal(A⁻¹ Xᵀy_q, σ²_q A⁻¹) with
    /// A = XᵀX + diag(c_pq (δ⁽¹⁾_pq + δ⁽²⁾_p)).
    pub struct BetaColumn {
        /// The precision-defining matrix A (before scaling by 1/σ²_q).
        pub a: DMatrix<f64>,
        /// Right-hand side Xᵀy_q; the conditional mean solves A m = Xᵀy_q.
        pub xty_q: DVector<f64>,
        pub sigma2: f64,
    }

    pub fn beta_column(
        q: usize,
        data: &RegressionData,
        mask: &ConstraintMask,
        state: &LatentState,
    ) -> BetaColumn {
        let p_dim = data.p();
        let mut a = data.gram().clone();
        for p_idx in 0..p_dim {
            if mask.is_penalized(p_idx, q) {
                a[(p_idx, p_idx)] += state.delta1[(p_idx, q)] + state.delta2[p_idx];
            }
        }
        BetaColumn {
            a,
            xty_q: data.xty().column(q).clone_owned(),
            sigma2: state.sigma2[q],
        }
    }

    /// δ⁽¹⁾_pq | · ~ InverseGaussian(√(λ1² σ²_q / β²_pq), λ1²).
    /// Returns (mean, shape, clamped) where `clamped` records a |β| floor.
    pub fn delta1(p: usize, q: usize, state: &LatentState, b: &DMatrix<f64>) -> (f64, f64, bool) {
        let raw = b[(p, q)].abs();
        let clamped = raw < BETA_FLOOR;
        let beta_abs = raw.max(BETA_FLOOR);
        let mean = (state.lambda1_sq * state.sigma2[q]).sqrt() / beta_abs;
        (mean, state.lambda1_sq, clamped)
    }

    /// δ⁽²⁾_p | · ~ InverseGaussian(√(λ2² / w_p), λ2²) with
    /// w_p = Σ_q c_pq β²_pq / σ²_q. Returns (mean, shape, clamped).
    pub fn delta2(
        p: usize,
        state: &LatentState,
        b: &DMatrix<f64>,
        mask: &ConstraintMask,
    ) -> (f64, f64, bool) {
        let mut w = 0.0;
        for q_idx in 0..mask.ncols() {
            if mask.is_penalized(p, q_idx) {
                let beta = b[(p, q_idx)];
                w += beta * beta / state.sigma2[q_idx];
            }
        }
        let clamped = w < W_FLOOR;
        let w = w.max(W_FLOOR);
        let mean = (state.lambda2_sq / w).sqrt();
        (mean, state.lambda2_sq, clamped)
    }

    /// σ²_q | · ~ InverseGamma((N + s_q)/2 + a₀, (‖y_q − Xβ_q‖² +
    /// Σ_p c_pq β²_pq (δ⁽¹⁾_pq + δ⁽²⁾_p))/2 + b₀), where (a₀, b₀) are the
    /// proper-prior additions (zero under the Jeffreys prior).
    ///
    /// The residual sum is evaluated through the cached cross-products
    /// (`yᵀy − 2βᵀXᵀy + βᵀGβ`) so the cost is independent of N.
    /// Returns (shape, rate, clamped).
    pub fn sigma2(
        q: usize,
        data: &RegressionData,
        mask: &ConstraintMask,
        state: &LatentState,
        b: &DMatrix<f64>,
        prior: &Sigma2Prior,
    ) -> (f64, f64, bool) {
        let beta_q = b.column(q);
        let xty_q = data.xty().column(q);
        let g_beta = data.gram() * beta_q;
        let rss = (data.yty()[q] - 2.0 * beta_q.dot(&xty_q) + beta_q.dot(&g_beta)).max(0.0);

        let mut penalty = 0.0;
        for p_idx in 0..data.p() {
            if mask.is_penalized(p_idx, q) {
                let beta = b[(p_idx, q)];
                penalty += beta * beta * (state.delta1[(p_idx, q)] + state.delta2[p_idx]);
            }
        }
        let (shape_add, rate_add) = prior.additions();
        let shape = 0.5 * (data.n() as f64 + mask.col_count(q) as f64) + shape_add;
        let raw_rate = 0.5 * (rss + penalty) + rate_add;
        let clamped = raw_rate < RATE_FLOOR;
        (shape, raw_rate.max(RATE_FLOOR), clamped)
    }

    /// Gamma conditionals of the shrinkage levels:
    /// λ1² ~ Gamma(a1 + s, b1 + Σ_{c_pq=1} (1/δ⁽¹⁾_pq)/2),
    /// λ2² ~ Gamma(a2 + Σ_{p: m_p≥1} (m_p+1)/2, b2 + Σ_p (1/δ⁽²⁾_p)/2).
    /// Returns ((shape1, rate1), (shape2, rate2)).
    pub fn lambdas(
        state: &LatentState,
        mask: &ConstraintMask,
        hp: &Hyperparameters,
    ) -> ((f64, f64), (f64, f64)) {
        let mut tau_sum = 0.0;
        for q_idx in 0..mask.ncols() {
            for p_idx in 0..mask.nrows() {
                if mask.is_penalized(p_idx, q_idx) {
                    tau_sum += 1.0 / state.delta1[(p_idx, q_idx)];
                }
            }
        }
        let mut gamma_sum = 0.0;
        let mut shape2 = hp.a2;
        for p_idx in 0..mask.nrows() {
            let m_p = mask.row_count(p_idx);
            if m_p >= 1 {
                gamma_sum += 1.0 / state.delta2[p_idx];
                shape2 += 0.5 * (m_p as f64 + 1.0);
            }
        }
        let shape1 = hp.a1 + mask.total_penalized() as f64;
        (
            (shape1, hp.b1 + 0.5 * tau_sum),
            (shape2, hp.b2 + 0.5 * gamma_sum),
        )
    }
}

/// The Gibbs sampler: owns data, mask, configuration, and the current state.
///
/// [`run_chain`] drives it end to end; [`Sampler::sweep`] is public so
/// validation harnesses (e.g. joint-distribution simulator comparisons) can
/// interleave sweeps with their own bookkeeping.
pub struct Sampler {
    data: RegressionData,
    mask: ConstraintMask,
    config: SamplerConfig,
    beta: DMatrix<f64>,
    state: LatentState,
    counters: ClampCounters,
    pool: rayon::ThreadPool,
}

impl Sampler {
    pub fn new(data: RegressionData, mask: ConstraintMask, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        if mask.nrows() != data.p() || mask.ncols() != data.q() {
            return Err(Error::InvalidInput(format!(
                "mask is {}x{} but data needs {}x{}",
                mask.nrows(),
                mask.ncols(),
                data.p(),
                data.q()
            )));
        }
        let mut counters = ClampCounters::default();
        let (beta, state) = init_state(&data, &mask, &config, &mut counters);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool construction failed: {e}")))?;
        Ok(Self {
            data,
            mask,
            config,
            beta,
            state,
            counters,
            pool,
        })
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }
    pub fn state(&self) -> &LatentState {
        &self.state
    }
    pub fn data(&self) -> &RegressionData {
        &self.data
    }
    pub fn mask(&self) -> &ConstraintMask {
        &self.mask
    }
    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }
    pub fn counters(&self) -> ClampCounters {
        self.counters
    }

    /// Overwrite the chain position (validates dimensions and positivity).
    pub fn set_position(&mut self, beta: DMatrix<f64>, state: LatentState) -> Result<()> {
        if beta.nrows() != self.data.p() || beta.ncols() != self.data.q() {
            return Err(Error::InvalidInput("beta dimensions mismatch".into()));
        }
        state.validate(&self.mask)?;
        self.beta = beta;
        self.state = state;
        Ok(())
    }

    /// Swap in freshly generated responses (keeps the Gram cache).
    pub fn replace_responses(&mut self, y: DMatrix<f64>) -> Result<()> {
        self.data.replace_responses(y)
    }

    /// One full Gibbs sweep at the given iteration index. The index selects
    /// the per-block random substreams, so replaying the same index from the
    /// same state reproduces the same draw.
    pub fn sweep(&mut self, iteration: u64) -> Result<()> {
        self.update_beta(iteration)?;
        self.update_delta1(iteration)?;
        self.update_delta2(iteration)?;
        self.update_sigma2(iteration)?;
        self.update_lambdas(iteration)?;
        Ok(())
    }

    /// Block 1: exact multivariate-normal draw per response column via a
    /// Cholesky factorization of A_q. Columns are independent given the
    /// latents and run in parallel; each owns its derived substream and its
    /// own output column, so scheduling cannot affect results.
    fn update_beta(&mut self, iteration: u64) -> Result<()> {
        let p_dim = self.data.p();
        let seed = self.config.seed;
        let data = &self.data;
        let mask = &self.mask;
        let state = &self.state;
        let beta_slice = self.beta.as_mut_slice();

        self.pool.install(|| {
            beta_slice
                .par_chunks_mut(p_dim)
                .enumerate()
                .try_for_each(|(q_idx, column)| -> Result<()> {
                    let params = conditionals::beta_column(q_idx, data, mask, state);
                    let chol = nalgebra::Cholesky::new(params.a).ok_or_else(|| {
                        let all_zero = mask.col_count(q_idx) == 0;
                        Error::SingularSystem {
                            column: q_idx,
                            detail: if all_zero {
                                "no penalized entries in this column and XᵀX is rank-deficient \
                                 on the unpenalized coordinates"
                                    .into()
                            } else {
                                "XᵀX plus the precision diagonal is not positive definite".into()
                            },
                        }
                    })?;
                    let mean = chol.solve(&params.xty_q);
                    let mut rng = substream(seed, StreamBlock::Beta, q_idx as u64, iteration);
                    let z = draw_std_normal_vec(&mut rng, p_dim);
                    // Solve Lᵀ u = z so that u ~ Normal(0, A⁻¹).
                    let u = chol
                        .l_dirty()
                        .tr_solve_lower_triangular(&z)
                        .ok_or_else(|| Error::Numeric(format!(
                            "triangular solve failed in column {q_idx}"
                        )))?;
                    let sd = params.sigma2.sqrt();
                    for p_idx in 0..p_dim {
                        column[p_idx] = mean[p_idx] + sd * u[p_idx];
                    }
                    Ok(())
                })
        })
    }

    /// Block 2: entrywise precisions. Light O(P·Q) work; runs serially with
    /// one substream per column (parallel dispatch would cost more than the
    /// draws themselves).
    fn update_delta1(&mut self, iteration: u64) -> Result<()> {
        for q_idx in 0..self.data.q() {
            let mut rng = substream(self.config.seed, StreamBlock::Delta1, q_idx as u64, iteration);
            for p_idx in 0..self.data.p() {
                if !self.mask.is_penalized(p_idx, q_idx) {
                    continue;
                }
                let (mean, shape, clamped) =
                    conditionals::delta1(p_idx, q_idx, &self.state, &self.beta);
                if clamped {
                    self.counters.beta_floor += 1;
                }
                self.state.delta1[(p_idx, q_idx)] = draw_inverse_gaussian(&mut rng, mean, shape)?;
            }
        }
        Ok(())
    }

    /// Block 3: row precisions, one substream per row.
    fn update_delta2(&mut self, iteration: u64) -> Result<()> {
        for p_idx in 0..self.data.p() {
            if self.mask.row_count(p_idx) == 0 {
                continue;
            }
            let mut rng = substream(self.config.seed, StreamBlock::Delta2, p_idx as u64, iteration);
            let (mean, shape, clamped) =
                conditionals::delta2(p_idx, &self.state, &self.beta, &self.mask);
            if clamped {
                self.counters.w_floor += 1;
            }
            self.state.delta2[p_idx] = draw_inverse_gaussian(&mut rng, mean, shape)?;
        }
        Ok(())
    }

    /// Block 4: response variances, one substream per column.
    fn update_sigma2(&mut self, iteration: u64) -> Result<()> {
        for q_idx in 0..self.data.q() {
            let mut rng = substream(self.config.seed, StreamBlock::Sigma2, q_idx as u64, iteration);
            let (shape, rate, clamped) = conditionals::sigma2(
                q_idx,
                &self.data,
                &self.mask,
                &self.state,
                &self.beta,
                &self.config.sigma2_prior,
            );
            if clamped {
                self.counters.rate_floor += 1;
            }
            self.state.sigma2[q_idx] = draw_inverse_gamma(&mut rng, shape, rate)?;
        }
        Ok(())
    }

    /// Block 5: shrinkage levels (single substream).
    fn update_lambdas(&mut self, iteration: u64) -> Result<()> {
        let mut rng = substream(self.config.seed, StreamBlock::Lambda, 0, iteration);
        let ((s1, r1), (s2, r2)) = conditionals::lambdas(&self.state, &self.mask, &self.config.hp);
        self.state.lambda1_sq = draw_gamma(&mut rng, s1, r1)?;
        self.state.lambda2_sq = draw_gamma(&mut rng, s2, r2)?;
        Ok(())
    }
}

fn init_state(
    data: &RegressionData,
    mask: &ConstraintMask,
    config: &SamplerConfig,
    counters: &mut ClampCounters,
) -> (DMatrix<f64>, LatentState) {
    match config.init {
        InitPolicy::ScaleAware => {}
    }
    let (p_dim, q_dim, n) = (data.p(), data.q(), data.n());
    let beta = DMatrix::zeros(p_dim, q_dim);
    let delta1 = DMatrix::from_fn(p_dim, q_dim, |p_idx, q_idx| {
        if mask.is_penalized(p_idx, q_idx) {
            1.0
        } else {
            f64::NAN
        }
    });
    let delta2 = DVector::from_fn(p_dim, |p_idx, _| {
        if mask.row_count(p_idx) >= 1 {
            1.0
        } else {
            f64::NAN
        }
    });
    let denom = (n as f64 - 1.0).max(1.0);
    let sigma2 = DVector::from_fn(q_dim, |q_idx, _| {
        let col = data.y().column(q_idx);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / denom;
        if var < SIGMA2_INIT_FLOOR {
            counters.sigma2_init_floor += 1;
            SIGMA2_INIT_FLOOR
        } else {
            var
        }
    });
    (
        beta,
        LatentState {
            delta1,
            delta2,
            sigma2,
            lambda1_sq: 1.0,
            lambda2_sq: 1.0,
        },
    )
}

/// Run a full chain: initialize, sweep `iterations` times, archive every
/// retained draw, and report timing plus clamp counters.
pub fn run_chain(
    data: &RegressionData,
    mask: &ConstraintMask,
    config: &SamplerConfig,
) -> Result<(PosteriorArchive, RunStats)> {
    let start_total = Instant::now();
    let mut sampler = Sampler::new(data.clone(), mask.clone(), config.clone())?;
    let t_cap = config.retained_draws() as usize;
    let (p_dim, q_dim) = (data.p(), data.q());

    let mut beta_draws = Vec::with_capacity(t_cap * p_dim * q_dim);
    let mut sigma2_draws = Vec::with_capacity(t_cap * q_dim);
    let mut lambda1_sq_draws = Vec::with_capacity(t_cap);
    let mut lambda2_sq_draws = Vec::with_capacity(t_cap);

    let loop_start = Instant::now();
    for iteration in 0..config.iterations {
        sampler
            .sweep(iteration)
            .map_err(|e| e.at_iteration(iteration))?;
        if iteration >= config.burn_in && (iteration - config.burn_in + 1).is_multiple_of(config.thin)
        {
            beta_draws.extend_from_slice(sampler.beta.as_slice());
            sigma2_draws.extend_from_slice(sampler.state.sigma2.as_slice());
            lambda1_sq_draws.push(sampler.state.lambda1_sq);
            lambda2_sq_draws.push(sampler.state.lambda2_sq);
        }
    }
    let loop_seconds = loop_start.elapsed().as_secs_f64();

    debug_assert_eq!(lambda1_sq_draws.len(), t_cap);
    let archive = PosteriorArchive::new(
        data.n(),
        p_dim,
        q_dim,
        t_cap,
        config.seed,
        config.config_hash(),
        beta_draws,
        sigma2_draws,
        lambda1_sq_draws,
        lambda2_sq_draws,
    )?;
    let stats = RunStats {
        clamps: sampler.counters,
        total_seconds: start_total.elapsed().as_secs_f64(),
        loop_seconds,
        iterations: config.iterations,
    };
    Ok((archive, stats))
}

/// Convergence z-score comparing the mean of the first 10% of a series
/// against the mean of the last 50%, with Bartlett-window spectral variance
/// estimates for each segment. A constant series scores 0.
pub fn geweke_diagnostic(series: &[f64]) -> Result<f64> {
    if series.len() < 50 {
        return Err(Error::InvalidInput(format!(
            "diagnostic needs at least 50 draws, got {}",
            series.len()
        )));
    }
    let n = series.len();
    let n_a = (n / 10).max(1);
    let n_b = (n / 2).max(1);
    let seg_a = &series[..n_a];
    let seg_b = &series[n - n_b..];
    let var = spectral_variance_at_zero(seg_a) / n_a as f64
        + spectral_variance_at_zero(seg_b) / n_b as f64;
    if var <= 0.0 {
        return Ok(0.0);
    }
    Ok((mean(seg_a) - mean(seg_b)) / var.sqrt())
}

/// Monte Carlo standard error over posterior standard deviation, in percent,
/// with the batch-means MCSE estimator. A zero-variance series scores 0.
pub fn mcse_sd_ratio(series: &[f64]) -> Result<f64> {
    if series.len() < 100 {
        return Err(Error::InvalidInput(format!(
            "ratio needs at least 100 draws, got {}",
            series.len()
        )));
    }
    let n = series.len();
    let sd = sample_sd(series);
    if sd == 0.0 {
        return Ok(0.0);
    }
    let b = (n as f64).sqrt().floor() as usize;
    let n_batches = n / b;
    let used = n_batches * b;
    let grand = mean(&series[..used]);
    let mut acc = 0.0;
    for k in 0..n_batches {
        let bm = mean(&series[k * b..(k + 1) * b]);
        acc += (bm - grand) * (bm - grand);
    }
    let var_of_mean = b as f64 * acc / ((n_batches as f64 - 1.0) * used as f64);
    Ok(100.0 * var_of_mean.sqrt() / sd)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let denom = (xs.len() as f64 - 1.0).max(1.0);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / denom).sqrt()
}

/// Bartlett (Newey–West) estimate of the spectral density at frequency zero,
/// with lag window L = ⌊n^{1/3}⌋.
fn spectral_variance_at_zero(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = mean(xs);
    let lag_max = ((n as f64).powf(1.0 / 3.0).floor() as usize).min(n - 1);
    let auto_cov = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += (xs[i] - m) * (xs[i + lag] - m);
        }
        acc / n as f64
    };
    let mut s = auto_cov(0);
    for lag in 1..=lag_max {
        let w = 1.0 - lag as f64 / (lag_max as f64 + 1.0);
        s += 2.0 * w * auto_cov(lag);
    }
    s.max(0.0)
}
