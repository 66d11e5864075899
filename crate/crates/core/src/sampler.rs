//! Pólya-Gamma Gibbs sampler for the shifted-binomial rating model.
//!
//! One iteration updates, in order: the Pólya-Gamma auxiliaries `ω_ij` of the
//! observed cells, the coefficients `vec(B)` (or `b`), the latent user factors
//! `U`, the latent item factors `V`, and finally the horseshoe auxiliaries of
//! every shrunk block. Unobserved cells never enter the linear algebra; all
//! Kronecker-structured systems are assembled by iterating over observed cells.
//!
//! Every stochastic update draws from its own substream keyed by
//! `(seed, iteration, step, index)`, which makes chains bit-reproducible and
//! lets the `ω` draws run in parallel without changing the result.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    binomial_log_pmf_logit, sample_inverse_gamma, PolyaGammaParams, PrecisionNormal, SupportBase,
};
use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;
use crate::model::{
    validate_identifiability, CovariateSet, LatentFactors, PredictorForm, PredictorKind, RatingData,
};
use crate::rng;

/// Lower bound applied to `ω_ij` before forming `ξ_ij = κ_ij / ω_ij`.
pub const OMEGA_FLOOR: f64 = 1e-12;
/// Bounds on horseshoe prior precisions handed to the Gaussian steps.
const PRECISION_BOUNDS: (f64, f64) = (1e-12, 1e12);
/// Range the horseshoe auxiliaries are kept in; an all-zero block otherwise
/// drives the global scale towards zero until the draws leave `f64`.
const AUX_BOUNDS: (f64, f64) = (1e-150, 1e150);
/// Standard deviation of the initial latent factor entries (variance 0.01).
const LATENT_INIT_SD: f64 = 0.1;
/// Observation count above which the `ω` step fans out over threads.
const PARALLEL_OMEGA_MIN: usize = 256;

// substream tags
const TAG_INIT: u64 = 0;
const TAG_OMEGA: u64 = 1;
const TAG_COEF: u64 = 2;
const TAG_U: u64 = 3;
const TAG_V: u64 = 4;
const TAG_HS_COEF: u64 = 5;
const TAG_HS_U: u64 = 6;
const TAG_HS_V: u64 = 7;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// `μ₀`; zeros when absent.
    pub prior_mean: Option<DVector<f64>>,
    /// `Σ₀`; identity when absent.
    pub prior_covariance: Option<DMatrix<f64>>,
    /// Horseshoe prior on the coefficients instead of `N(μ₀, Σ₀)`.
    pub sparse_coefficients: bool,
    pub latent_l: usize,
    /// Horseshoe prior on `U` and `V`; always on when `latent_l > 0`.
    pub sparse_latent: bool,
    /// Fit even when the covariates are rank deficient, provided `Σ₀` is informative.
    pub allow_unidentified: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            seed: 0,
            prior_mean: None,
            prior_covariance: None,
            sparse_coefficients: false,
            latent_l: 0,
            sparse_latent: false,
            allow_unidentified: false,
        }
    }
}

impl ChainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn retained_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be positive".into()));
        }
        if let Some(mu) = &self.prior_mean {
            if mu.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "prior mean has length {} but the predictor has {dim} coefficients",
                    mu.len()
                )));
            }
        }
        if let Some(sigma) = &self.prior_covariance {
            if sigma.nrows() != dim || sigma.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "prior covariance is {}x{} but the predictor has {dim} coefficients",
                    sigma.nrows(),
                    sigma.ncols()
                )));
            }
            if (sigma - sigma.transpose()).abs().max() > 1e-10 * sigma.abs().max().max(1.0) {
                return Err(Error::InvalidParameter("prior covariance is not symmetric".into()));
            }
            CholeskyFactor::new(sigma).map_err(|_| {
                Error::InvalidParameter("prior covariance is not positive definite".into())
            })?;
        }
        Ok(())
    }

    fn informative_prior(&self) -> bool {
        match &self.prior_covariance {
            Some(s) => (s - DMatrix::identity(s.nrows(), s.ncols())).abs().max() > 0.0,
            None => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Horseshoe
// ---------------------------------------------------------------------------

/// Auxiliaries of the inverse-gamma horseshoe hierarchy for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horseshoe {
    /// Local scales `λ²`.
    pub local: Vec<f64>,
    /// Global scale `τ²`.
    pub global: f64,
    /// Local auxiliaries `ν`.
    pub local_aux: Vec<f64>,
    /// Global auxiliary `ζ`.
    pub global_aux: f64,
}

impl Horseshoe {
    pub fn new(dim: usize) -> Self {
        Self {
            local: vec![1.0; dim],
            global: 1.0,
            local_aux: vec![1.0; dim],
            global_aux: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.local.len()
    }

    /// Prior precisions `1 / (τ² λ²_j)` of the block entries.
    pub fn prior_precision(&self) -> Vec<f64> {
        self.local
            .iter()
            .map(|&l| (1.0 / (self.global * l)).clamp(PRECISION_BOUNDS.0, PRECISION_BOUNDS.1))
            .collect()
    }

    /// Prior variances `τ² λ²_j`.
    pub fn prior_variance(&self) -> Vec<f64> {
        self.local.iter().map(|&l| self.global * l).collect()
    }
}

/// One sweep of the horseshoe conditionals for a block of values.
///
/// The local scale uses `u²/(2τ²)`, the full conditional of the hierarchy
/// `u ~ N(0, τ²λ²)`, `λ² | ν ~ IG(1/2, 1/ν)`.
///
/// Returns the refreshed prior precision diagonal.
pub fn step_horseshoe<R: Rng + ?Sized>(
    values: &[f64],
    hs: &mut Horseshoe,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if values.len() != hs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "horseshoe block has {} scales but {} values",
            hs.dim(),
            values.len()
        )));
    }
    let dim = values.len();
    let ig = |shape: f64, scale: f64, rng: &mut R| -> Result<f64> {
        Ok(sample_inverse_gamma(shape, scale.min(f64::MAX), rng)?.clamp(AUX_BOUNDS.0, AUX_BOUNDS.1))
    };
    for j in 0..dim {
        let scale = 1.0 / hs.local_aux[j] + values[j] * values[j] / (2.0 * hs.global);
        hs.local[j] = ig(1.0, scale, rng)?;
    }
    let ratio: f64 = values
        .iter()
        .zip(&hs.local)
        .map(|(v, l)| v * v / l)
        .sum();
    hs.global = ig((dim as f64 + 1.0) / 2.0, 1.0 / hs.global_aux + 0.5 * ratio, rng)?;
    for j in 0..dim {
        hs.local_aux[j] = ig(1.0, 1.0 + 1.0 / hs.local[j], rng)?;
    }
    hs.global_aux = ig(1.0, 1.0 + 1.0 / hs.global, rng)?;
    Ok(hs.prior_precision())
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// `b` or `vec(B)`.
    pub coefficients: DVector<f64>,
    /// `ω_ij` per observation, in the order of `RatingData::observations`.
    pub omegas: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub coefficient_shrinkage: Option<Horseshoe>,
    pub u_shrinkage: Option<Horseshoe>,
    pub v_shrinkage: Option<Horseshoe>,
}

impl ChainState {
    /// Coefficients at zero, latent entries `N(0, 0.01)`, horseshoe auxiliaries at one.
    pub fn initial(problem: &Problem<'_>, config: &ChainConfig) -> Self {
        let (n, m, l) = (problem.data.n(), problem.data.m(), config.latent_l);
        let mut r = rng::substream(config.seed, &[TAG_INIT]);
        let normal = Normal::new(0.0, LATENT_INIT_SD).expect("valid sd");
        let u = DMatrix::from_fn(n, l, |_, _| normal.sample(&mut r));
        let v = DMatrix::from_fn(m, l, |_, _| normal.sample(&mut r));
        let latent_sparse = l > 0;
        Self {
            coefficients: DVector::zeros(problem.dim),
            omegas: vec![0.0; problem.data.len()],
            u,
            v,
            coefficient_shrinkage: config.sparse_coefficients.then(|| Horseshoe::new(problem.dim)),
            u_shrinkage: latent_sparse.then(|| Horseshoe::new(n * l)),
            v_shrinkage: latent_sparse.then(|| Horseshoe::new(m * l)),
        }
    }

    pub fn latent(&self) -> LatentFactors {
        LatentFactors {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }

    fn latent_term(&self, i: usize, j: usize) -> f64 {
        (0..self.u.ncols()).map(|c| self.u[(i, c)] * self.v[(j, c)]).sum()
    }
}

/// Design rows and centered ratings of the observed cells.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub data: &'a RatingData,
    pub kind: PredictorKind,
    pub dim: usize,
    /// Row-major `|obs| × dim` design matrix `Z` restricted to observed cells.
    design: Vec<f64>,
    kappa: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(data: &'a RatingData, cov: &CovariateSet, kind: PredictorKind) -> Result<Self> {
        cov.check_against(data)?;
        let dim = kind.dim(cov.p(), cov.q());
        let mut design = Vec::with_capacity(dim * data.len());
        for o in data.observations() {
            design.extend(cov.design_row(o.user, o.item, kind));
        }
        let kappa = (0..data.len()).map(|i| data.obs_kappa(i)).collect();
        Ok(Self {
            data,
            kind,
            dim,
            design,
            kappa,
        })
    }

    pub fn design_row(&self, idx: usize) -> &[f64] {
        &self.design[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn kappa(&self, idx: usize) -> f64 {
        self.kappa[idx]
    }

    /// `z_ijᵀ β` for every observation.
    pub fn covariate_part(&self, beta: &DVector<f64>) -> Vec<f64> {
        (0..self.data.len())
            .map(|o| dot(self.design_row(o), beta.as_slice()))
            .collect()
    }

    /// Full predictor `η_ij` for every observation.
    pub fn linear_predictor(&self, state: &ChainState) -> Vec<f64> {
        let mut eta = self.covariate_part(&state.coefficients);
        if state.u.ncols() > 0 {
            for (o, obs) in self.data.observations().iter().enumerate() {
                eta[o] += state.latent_term(obs.user, obs.item);
            }
        }
        eta
    }

    pub fn log_likelihood(&self, state: &ChainState) -> f64 {
        self.linear_predictor(state)
            .iter()
            .enumerate()
            .map(|(o, &eta)| {
                binomial_log_pmf_logit(self.data.obs_successes(o), self.data.obs_trials(o), eta)
            })
            .sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

/// `ω_ij ~ PG(k_ij − 1, η_ij)` for every observed cell.
pub fn step_omega(state: &mut ChainState, problem: &Problem<'_>, seed: u64, iteration: usize) {
    let eta = problem.linear_predictor(state);
    let draw = |o: usize| -> f64 {
        let mut r = rng::substream(seed, &[iteration as u64, TAG_OMEGA, o as u64]);
        let params = PolyaGammaParams::new(problem.data.obs_trials(o), eta[o])
            .expect("trials >= 1 and finite predictor");
        params.sample(&mut r).max(OMEGA_FLOOR)
    };
    if eta.len() >= PARALLEL_OMEGA_MIN {
        state.omegas = (0..eta.len()).into_par_iter().map(draw).collect();
    } else {
        state.omegas = (0..eta.len()).map(draw).collect();
    }
}

/// Which algebraically equivalent form builds the Gaussian linear terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanRoute {
    /// `Σ z (κ − ω · offset)`.
    Kappa,
    /// `Σ z ω (ξ − offset)` with `ξ = κ / ω`.
    OmegaXi,
}

/// Prior precision and `Σ₀⁻¹ μ₀` for the coefficient block.
#[derive(Debug, Clone)]
pub struct CoefficientPrior {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl CoefficientPrior {
    pub fn from_config(config: &ChainConfig, dim: usize) -> Result<Self> {
        let precision = match &config.prior_covariance {
            Some(sigma) => CholeskyFactor::new(sigma)?.inverse(),
            None => DMatrix::identity(dim, dim),
        };
        let linear = match &config.prior_mean {
            Some(mu) => &precision * mu,
            None => DVector::zeros(dim),
        };
        Ok(Self { precision, linear })
    }

    pub fn shrinkage(diag: &[f64]) -> Self {
        Self {
            precision: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            linear: DVector::zeros(diag.len()),
        }
    }
}

/// Precision `Σ₀⁻¹ + ZᵀΩZ` and linear term of the coefficient conditional,
/// with the latent term `u_i·v_j` acting as a known offset.
pub fn coefficient_system(
    problem: &Problem<'_>,
    state: &ChainState,
    prior: &CoefficientPrior,
    route: MeanRoute,
) -> (DMatrix<f64>, DVector<f64>) {
    let d = problem.dim;
    let mut precision = prior.precision.clone();
    let mut linear = prior.linear.clone();
    let has_latent = state.u.ncols() > 0;
    for (o, obs) in problem.data.observations().iter().enumerate() {
        let z = problem.design_row(o);
        let w = state.omegas[o];
        let offset = if has_latent {
            state.latent_term(obs.user, obs.item)
        } else {
            0.0
        };
        let target = match route {
            MeanRoute::Kappa => problem.kappa(o) - w * offset,
            MeanRoute::OmegaXi => w * (problem.kappa(o) / w - offset),
        };
        for a in 0..d {
            let wza = w * z[a];
            for b in 0..=a {
                precision[(a, b)] += wza * z[b];
            }
            linear[a] += z[a] * target;
        }
    }
    for a in 0..d {
        for b in 0..a {
            precision[(b, a)] = precision[(a, b)];
        }
    }
    (precision, linear)
}

pub fn step_coefficients<R: Rng + ?Sized>(
    state: &mut ChainState,
    problem: &Problem<'_>,
    prior: &CoefficientPrior,
    route: MeanRoute,
    rng: &mut R,
) -> Result<()> {
    let (precision, linear) = coefficient_system(problem, state, prior, route);
    state.coefficients = PrecisionNormal::new(&precision, &linear)?.sample(rng);
    Ok(())
}

/// Per-user `l × l` blocks of the `vec(U)` conditional.
///
/// `(V ⊗ I_n)ᵀ Ω (V ⊗ I_n)` is block diagonal over users once unobserved
/// cells are dropped, so each `u_i` has its own small Gaussian system.
pub fn latent_u_systems(
    problem: &Problem<'_>,
    state: &ChainState,
    prior_precision: &[f64],
    covariate_part: &[f64],
) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let n = problem.data.n();
    let l = state.u.ncols();
    (0..n)
        .map(|i| {
            let mut prec = DMatrix::zeros(l, l);
            for c in 0..l {
                // vec(U) is column-major: entry (i, c) sits at c * n + i
                prec[(c, c)] = prior_precision[c * n + i];
            }
            let mut lin = DVector::zeros(l);
            for &o in problem.data.user_observations(i) {
                let j = problem.data.observations()[o].item;
                let w = state.omegas[o];
                let resid = w * (problem.kappa(o) / w - covariate_part[o]);
                for a in 0..l {
                    let va = state.v[(j, a)];
                    for b in 0..l {
                        prec[(a, b)] += w * va * state.v[(j, b)];
                    }
                    lin[a] += va * resid;
                }
            }
            (prec, lin)
        })
        .collect()
}

/// Per-item `l × l` blocks of the `vec(V)` conditional.
pub fn latent_v_systems(
    problem: &Problem<'_>,
    state: &ChainState,
    prior_precision: &[f64],
    covariate_part: &[f64],
) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let m = problem.data.m();
    let l = state.v.ncols();
    (0..m)
        .map(|j| {
            let mut prec = DMatrix::zeros(l, l);
            for c in 0..l {
                prec[(c, c)] = prior_precision[c * m + j];
            }
            let mut lin = DVector::zeros(l);
            for &o in problem.data.item_observations(j) {
                let i = problem.data.observations()[o].user;
                let w = state.omegas[o];
                let resid = w * (problem.kappa(o) / w - covariate_part[o]);
                for a in 0..l {
                    let ua = state.u[(i, a)];
                    for b in 0..l {
                        prec[(a, b)] += w * ua * state.u[(i, b)];
                    }
                    lin[a] += ua * resid;
                }
            }
            (prec, lin)
        })
        .collect()
}

fn draw_blocks(
    systems: Vec<(DMatrix<f64>, DVector<f64>)>,
    target: &mut DMatrix<f64>,
    seed: u64,
    iteration: usize,
    tag: u64,
) -> Result<()> {
    for (row, (prec, lin)) in systems.into_iter().enumerate() {
        let mut r = rng::substream(seed, &[iteration as u64, tag, row as u64]);
        let draw = PrecisionNormal::new(&prec, &lin)?.sample(&mut r);
        for c in 0..draw.len() {
            target[(row, c)] = draw[c];
        }
    }
    Ok(())
}

fn latent_prior(hs: &Option<Horseshoe>, dim: usize) -> Vec<f64> {
    match hs {
        Some(h) => h.prior_precision(),
        None => vec![1.0; dim],
    }
}

pub fn step_latent_u(
    state: &mut ChainState,
    problem: &Problem<'_>,
    seed: u64,
    iteration: usize,
) -> Result<()> {
    if state.u.ncols() == 0 {
        return Ok(());
    }
    let prior = latent_prior(&state.u_shrinkage, state.u.len());
    let xb = problem.covariate_part(&state.coefficients);
    let systems = latent_u_systems(problem, state, &prior, &xb);
    draw_blocks(systems, &mut state.u, seed, iteration, TAG_U)
}

pub fn step_latent_v(
    state: &mut ChainState,
    problem: &Problem<'_>,
    seed: u64,
    iteration: usize,
) -> Result<()> {
    if state.v.ncols() == 0 {
        return Ok(());
    }
    let prior = latent_prior(&state.v_shrinkage, state.v.len());
    let xb = problem.covariate_part(&state.coefficients);
    let systems = latent_v_systems(problem, state, &prior, &xb);
    draw_blocks(systems, &mut state.v, seed, iteration, TAG_V)
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Receives `(iteration, log-likelihood)` every `interval()` iterations.
pub trait ProgressSink {
    fn interval(&self) -> usize {
        100
    }
    fn report(&mut self, iteration: usize, log_likelihood: f64);
}

impl<F: FnMut(usize, f64)> ProgressSink for F {
    fn report(&mut self, iteration: usize, log_likelihood: f64) {
        self(iteration, log_likelihood)
    }
}

/// Retained draws of a chain plus what is needed to predict from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub kind: PredictorKind,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: u32,
    pub support_base: SupportBase,
    #[serde(with = "cell_scale_list")]
    pub cell_k: BTreeMap<(usize, usize), u32>,
    pub trained_users: Vec<bool>,
    pub trained_items: Vec<bool>,
    pub seed: u64,
    pub config: ChainConfig,
    #[serde(skip)]
    pub coefficients: Vec<DVector<f64>>,
    #[serde(skip)]
    pub u: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub v: Vec<DMatrix<f64>>,
}

mod cell_scale_list {
    use super::BTreeMap;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(usize, usize), u32>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let list: Vec<(usize, usize, u32)> = map.iter().map(|(&(i, j), &k)| (i, j, k)).collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(usize, usize), u32>, D::Error> {
        let list = Vec::<(usize, usize, u32)>::deserialize(d)?;
        Ok(list.into_iter().map(|(i, j, k)| ((i, j), k)).collect())
    }
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn k_at(&self, user: usize, item: usize) -> u32 {
        self.cell_k.get(&(user, item)).copied().unwrap_or(self.k)
    }

    pub fn form(&self, draw: usize) -> PredictorForm {
        PredictorForm::new(self.kind, self.p, self.q, self.coefficients[draw].clone())
            .expect("draw dimensions match the recorded form")
    }

    pub fn coefficient_mean(&self) -> DVector<f64> {
        let d = self.kind.dim(self.p, self.q);
        let sum = self
            .coefficients
            .iter()
            .fold(DVector::zeros(d), |acc, c| acc + c);
        sum / self.len() as f64
    }

    pub fn latent(&self, draw: usize) -> Option<LatentFactors> {
        (self.l > 0).then(|| LatentFactors {
            u: self.u[draw].clone(),
            v: self.v[draw].clone(),
        })
    }

    /// `F = U Vᵀ` of one draw.
    pub fn f_draw(&self, draw: usize) -> Option<DMatrix<f64>> {
        (self.l > 0).then(|| &self.u[draw] * self.v[draw].transpose())
    }

    /// Posterior mean of `F`, recomputed from the stored `U` and `V`.
    pub fn f_mean(&self) -> Option<DMatrix<f64>> {
        if self.l == 0 || self.is_empty() {
            return None;
        }
        let mut acc = DMatrix::zeros(self.n, self.m);
        for d in 0..self.len() {
            acc.gemm(1.0, &self.u[d], &self.v[d].transpose(), 1.0);
        }
        Some(acc / self.len() as f64)
    }

    pub fn u_mean(&self) -> Option<DMatrix<f64>> {
        mean_matrix(&self.u)
    }

    pub fn v_mean(&self) -> Option<DMatrix<f64>> {
        mean_matrix(&self.v)
    }

    /// Names of the flattened parameters, 1-based: `b[t]` or `B[a,b]`, then
    /// `U[i,c]` and `V[j,c]` row by row.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.flat_len());
        match self.kind {
            PredictorKind::Linear => {
                names.extend((1..=self.p + self.q).map(|t| format!("b[{t}]")));
            }
            PredictorKind::Bilinear => {
                for idx in 0..self.p * self.q {
                    names.push(format!("B[{},{}]", idx % self.p + 1, idx / self.p + 1));
                }
            }
        }
        for (label, rows) in [("U", self.n), ("V", self.m)] {
            if self.l == 0 {
                break;
            }
            for i in 1..=rows {
                names.extend((1..=self.l).map(|c| format!("{label}[{i},{c}]")));
            }
        }
        names
    }

    pub fn flat_len(&self) -> usize {
        self.kind.dim(self.p, self.q) + self.l * (self.n + self.m)
    }

    /// All parameters of one draw in [`parameter_names`](Self::parameter_names) order.
    pub fn flat_draw(&self, draw: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        out.extend(self.coefficients[draw].iter().copied());
        if self.l > 0 {
            for mat in [&self.u[draw], &self.v[draw]] {
                for i in 0..mat.nrows() {
                    out.extend(mat.row(i).iter().copied());
                }
            }
        }
        out
    }

    /// Appends a draw given in flattened order.
    pub fn push_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.flat_len() {
            return Err(Error::DimensionMismatch(format!(
                "draw has {} values, expected {}",
                values.len(),
                self.flat_len()
            )));
        }
        let d = self.kind.dim(self.p, self.q);
        self.coefficients.push(DVector::from_column_slice(&values[..d]));
        if self.l > 0 {
            let split = d + self.n * self.l;
            self.u.push(DMatrix::from_row_slice(self.n, self.l, &values[d..split]));
            self.v.push(DMatrix::from_row_slice(self.m, self.l, &values[split..]));
        }
        Ok(())
    }

    /// Keeps only the listed draws.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = self.clone();
        out.coefficients = indices.iter().map(|&d| self.coefficients[d].clone()).collect();
        if self.l > 0 {
            out.u = indices.iter().map(|&d| self.u[d].clone()).collect();
            out.v = indices.iter().map(|&d| self.v[d].clone()).collect();
        }
        out
    }
}

fn mean_matrix(list: &[DMatrix<f64>]) -> Option<DMatrix<f64>> {
    let first = list.first()?;
    let sum = list
        .iter()
        .skip(1)
        .fold(first.clone(), |acc, x| acc + x);
    Some(sum / list.len() as f64)
}

/// Runs the full Gibbs sampler and returns the post-burn-in draws.
pub fn gibbs_fit(
    data: &RatingData,
    cov: &CovariateSet,
    kind: PredictorKind,
    config: &ChainConfig,
    mut progress: Option<&mut dyn ProgressSink>,
) -> Result<PosteriorDraws> {
    let dim = kind.dim(cov.p(), cov.q());
    config.validate(dim)?;
    if data.is_empty() {
        return Err(Error::InvalidData("no observed ratings to fit".into()));
    }
    let ident = validate_identifiability(cov);
    if !ident.is_ok() && !(config.allow_unidentified && config.informative_prior()) {
        return Err(Error::NotIdentifiable(ident.to_string()));
    }
    let problem = Problem::new(data, cov, kind)?;
    let mut state = ChainState::initial(&problem, config);
    let fixed_prior = CoefficientPrior::from_config(config, dim)?;
    let route = if config.latent_l > 0 {
        MeanRoute::OmegaXi
    } else {
        MeanRoute::Kappa
    };

    let mut draws = PosteriorDraws {
        kind,
        p: cov.p(),
        q: cov.q(),
        n: data.n(),
        m: data.m(),
        l: config.latent_l,
        k: data.k(),
        support_base: data.support_base(),
        cell_k: data.cell_scales().clone(),
        trained_users: (0..data.n()).map(|i| !data.user_observations(i).is_empty()).collect(),
        trained_items: (0..data.m()).map(|j| !data.item_observations(j).is_empty()).collect(),
        seed: config.seed,
        config: config.clone(),
        coefficients: Vec::with_capacity(config.retained_draws()),
        u: Vec::new(),
        v: Vec::new(),
    };

    let seed = config.seed;
    for t in 1..=config.iterations {
        let wrap = |step: &'static str| {
            move |e: Error| match e {
                Error::NotPositiveDefinite { minor } => Error::SamplerFactorization {
                    iteration: t,
                    step,
                    minor,
                },
                other => other,
            }
        };

        step_omega(&mut state, &problem, seed, t);

        let shrunk_prior;
        let prior = match &state.coefficient_shrinkage {
            Some(hs) => {
                shrunk_prior = CoefficientPrior::shrinkage(&hs.prior_precision());
                &shrunk_prior
            }
            None => &fixed_prior,
        };
        let mut r = rng::substream(seed, &[t as u64, TAG_COEF]);
        step_coefficients(&mut state, &problem, prior, route, &mut r).map_err(wrap("coefficients"))?;

        step_latent_u(&mut state, &problem, seed, t).map_err(wrap("latent U"))?;
        step_latent_v(&mut state, &problem, seed, t).map_err(wrap("latent V"))?;

        if let Some(hs) = state.coefficient_shrinkage.as_mut() {
            let mut r = rng::substream(seed, &[t as u64, TAG_HS_COEF]);
            step_horseshoe(state.coefficients.as_slice(), hs, &mut r)?;
        }
        if let Some(hs) = state.u_shrinkage.as_mut() {
            let mut r = rng::substream(seed, &[t as u64, TAG_HS_U]);
            step_horseshoe(state.u.as_slice(), hs, &mut r)?;
        }
        if let Some(hs) = state.v_shrinkage.as_mut() {
            let mut r = rng::substream(seed, &[t as u64, TAG_HS_V]);
            step_horseshoe(state.v.as_slice(), hs, &mut r)?;
        }

        if t > config.burn_in && (t - config.burn_in) % config.thin == 0 {
            draws.coefficients.push(state.coefficients.clone());
            if config.latent_l > 0 {
                draws.u.push(state.u.clone());
                draws.v.push(state.v.clone());
            }
        }

        if let Some(sink) = progress.as_deref_mut() {
            let every = sink.interval().max(1);
            if t % every == 0 || t == config.iterations {
                sink.report(t, problem.log_likelihood(&state));
            }
        }
    }
    Ok(draws)
}
