//! Ratings, covariates, predictors and the shifted-binomial likelihood.
//!
//! There is no implicit intercept. If an additive constant is wanted, include
//! a column of ones in `X` or `Y` yourself.
//!
//! `vec(B)` stacks the columns of the `p × q` coefficient matrix, so that the
//! bilinear design row `z_ij = y_j ⊗ x_i` satisfies `z_ijᵀ vec(B) = x_iᵀ B y_j`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{binomial_log_pmf_logit, SupportBase};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Ratings
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub user: usize,
    pub item: usize,
    pub rating: i64,
}

impl Observation {
    pub fn new(user: usize, item: usize, rating: i64) -> Self {
        Self { user, item, rating }
    }
}

/// Sparse `n × m` ordinal ratings.
///
/// The rating scale is a global `k` with optional per-cell overrides `k_ij`.
#[derive(Debug, Clone)]
pub struct RatingData {
    n: usize,
    m: usize,
    k: u32,
    support_base: SupportBase,
    cell_k: BTreeMap<(usize, usize), u32>,
    observations: Vec<Observation>,
    obs_k: Vec<u32>,
    index: HashMap<(usize, usize), usize>,
    by_user: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
}

impl RatingData {
    pub fn new(
        n: usize,
        m: usize,
        k: u32,
        support_base: SupportBase,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        Self::with_cell_scales(n, m, k, support_base, BTreeMap::new(), observations)
    }

    pub fn with_cell_scales(
        n: usize,
        m: usize,
        k: u32,
        support_base: SupportBase,
        cell_k: BTreeMap<(usize, usize), u32>,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        support_base.validate_k(k)?;
        if observations.is_empty() {
            return Err(Error::InvalidData("at least one observed rating is required".into()));
        }
        for (&(i, j), &kij) in &cell_k {
            if i >= n || j >= m {
                return Err(Error::InvalidData(format!(
                    "scale override for cell ({i}, {j}) outside {n}x{m}"
                )));
            }
            support_base.validate_k(kij)?;
        }
        let mut index = HashMap::with_capacity(observations.len());
        let mut by_user = vec![Vec::new(); n];
        let mut by_item = vec![Vec::new(); m];
        let mut obs_k = Vec::with_capacity(observations.len());
        for (idx, o) in observations.iter().enumerate() {
            if o.user >= n || o.item >= m {
                return Err(Error::InvalidData(format!(
                    "observation ({}, {}) outside {n}x{m}",
                    o.user, o.item
                )));
            }
            if index.insert((o.user, o.item), idx).is_some() {
                return Err(Error::InvalidData(format!(
                    "duplicate observation for cell ({}, {})",
                    o.user, o.item
                )));
            }
            let kij = cell_k.get(&(o.user, o.item)).copied().unwrap_or(k);
            support_base.successes(o.rating, kij)?;
            obs_k.push(kij);
            by_user[o.user].push(idx);
            by_item[o.item].push(idx);
        }
        Ok(Self {
            n,
            m,
            k,
            support_base,
            cell_k,
            observations,
            obs_k,
            index,
            by_user,
            by_item,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Global number of categories.
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn support_base(&self) -> SupportBase {
        self.support_base
    }

    pub fn cell_scales(&self) -> &BTreeMap<(usize, usize), u32> {
        &self.cell_k
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Scale of any cell, observed or not.
    pub fn k_at(&self, user: usize, item: usize) -> u32 {
        self.cell_k.get(&(user, item)).copied().unwrap_or(self.k)
    }

    /// Scale of the `idx`-th observation.
    pub fn obs_k(&self, idx: usize) -> u32 {
        self.obs_k[idx]
    }

    /// Binomial trials (`k_ij - 1` for one-based ratings) of the `idx`-th observation.
    pub fn obs_trials(&self, idx: usize) -> u32 {
        self.support_base.trials(self.obs_k[idx])
    }

    pub fn obs_successes(&self, idx: usize) -> u32 {
        let o = &self.observations[idx];
        (o.rating - self.support_base.offset()) as u32
    }

    pub fn is_observed(&self, user: usize, item: usize) -> bool {
        self.index.contains_key(&(user, item))
    }

    pub fn position(&self, user: usize, item: usize) -> Option<usize> {
        self.index.get(&(user, item)).copied()
    }

    /// Observation indices for user `i`.
    pub fn user_observations(&self, user: usize) -> &[usize] {
        &self.by_user[user]
    }

    /// Observation indices for item `j`.
    pub fn item_observations(&self, item: usize) -> &[usize] {
        &self.by_item[item]
    }

    /// `M_i`, the items rated by user `i`.
    pub fn items_of(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.by_user[user].iter().map(move |&o| self.observations[o].item)
    }

    /// Restricts to the given observation indices, keeping dimensions and scale.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let obs = indices.iter().map(|&i| self.observations[i]).collect();
        Self::with_cell_scales(
            self.n,
            self.m,
            self.k,
            self.support_base,
            self.cell_k.clone(),
            obs,
        )
    }

    /// Cells not in the observation set, row-major.
    pub fn unobserved_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n * self.m - self.len());
        for i in 0..self.n {
            for j in 0..self.m {
                if !self.is_observed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Centered rating `κ` of the `idx`-th observation.
    pub fn obs_kappa(&self, idx: usize) -> f64 {
        self.obs_successes(idx) as f64 - 0.5 * self.obs_trials(idx) as f64
    }
}

/// `κ = r - (k + 1)/2` for one-based ratings.
pub fn kappa(r: i64, k: u32) -> f64 {
    r as f64 - (k as f64 + 1.0) / 2.0
}

// ---------------------------------------------------------------------------
// Covariates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSet {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl CovariateSet {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        for (name, mat) in [("X", &x), ("Y", &y)] {
            if let Some(pos) = mat.iter().position(|v| !v.is_finite()) {
                let (r, c) = (pos % mat.nrows(), pos / mat.nrows());
                return Err(Error::InvalidData(format!(
                    "{name}[{r}, {c}] is not finite"
                )));
            }
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn user_row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn item_row(&self, j: usize) -> Vec<f64> {
        self.y.row(j).iter().copied().collect()
    }

    pub fn check_against(&self, data: &RatingData) -> Result<()> {
        if self.n() != data.n() || self.m() != data.m() {
            return Err(Error::DimensionMismatch(format!(
                "ratings are {}x{} but X has {} rows and Y has {} rows",
                data.n(),
                data.m(),
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Design row `z_ij` for the given form.
    pub fn design_row(&self, i: usize, j: usize, kind: PredictorKind) -> Vec<f64> {
        design_row_iter(self.x.row(i).iter().copied(), self.y.row(j).iter().copied(), self.p(), self.q(), kind)
    }
}

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// `[x_i, y_j]ᵀ b`
    Linear,
    /// `x_iᵀ B y_j`
    Bilinear,
}

impl PredictorKind {
    pub fn dim(self, p: usize, q: usize) -> usize {
        match self {
            PredictorKind::Linear => p + q,
            PredictorKind::Bilinear => p * q,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Linear => "linear",
            PredictorKind::Bilinear => "bilinear",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A predictor form with its coefficients, stored as `b` or `vec(B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorForm {
    kind: PredictorKind,
    p: usize,
    q: usize,
    coefficients: DVector<f64>,
}

impl PredictorForm {
    pub fn new(kind: PredictorKind, p: usize, q: usize, coefficients: DVector<f64>) -> Result<Self> {
        let d = kind.dim(p, q);
        if coefficients.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{kind} form with p={p}, q={q} needs {d} coefficients, got {}",
                coefficients.len()
            )));
        }
        Ok(Self {
            kind,
            p,
            q,
            coefficients,
        })
    }

    pub fn linear(p: usize, b: DVector<f64>) -> Result<Self> {
        let q = b.len().checked_sub(p).ok_or_else(|| {
            Error::DimensionMismatch(format!("b has {} entries but p = {p}", b.len()))
        })?;
        Self::new(PredictorKind::Linear, p, q, b)
    }

    pub fn bilinear(b: &DMatrix<f64>) -> Self {
        Self {
            kind: PredictorKind::Bilinear,
            p: b.nrows(),
            q: b.ncols(),
            coefficients: DVector::from_column_slice(b.as_slice()),
        }
    }

    pub fn zeros(kind: PredictorKind, p: usize, q: usize) -> Self {
        Self {
            kind,
            p,
            q,
            coefficients: DVector::zeros(kind.dim(p, q)),
        }
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    /// `B` as a `p × q` matrix (bilinear only).
    pub fn matrix(&self) -> Option<DMatrix<f64>> {
        match self.kind {
            PredictorKind::Bilinear => Some(DMatrix::from_column_slice(
                self.p,
                self.q,
                self.coefficients.as_slice(),
            )),
            PredictorKind::Linear => None,
        }
    }
}

/// Latent user and item factors; `l = 0` disables the term.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl LatentFactors {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "U has {} latent columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn disabled(n: usize, m: usize) -> Self {
        Self {
            u: DMatrix::zeros(n, 0),
            v: DMatrix::zeros(m, 0),
        }
    }

    pub fn l(&self) -> usize {
        self.u.ncols()
    }

    /// `u_i · v_j`.
    pub fn term(&self, i: usize, j: usize) -> f64 {
        (0..self.l()).map(|c| self.u[(i, c)] * self.v[(j, c)]).sum()
    }

    /// `F = U Vᵀ`.
    pub fn f(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn predictor(
    x_i: &[f64],
    y_j: &[f64],
    form: &PredictorForm,
    latent: Option<(&[f64], &[f64])>,
) -> Result<f64> {
    let z = build_design_row(x_i, y_j, form)?;
    let mut eta = dot(&z, form.coefficients.as_slice());
    if let Some((u, v)) = latent {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "latent vectors have lengths {} and {}",
                u.len(),
                v.len()
            )));
        }
        eta += dot(u, v);
    }
    Ok(eta)
}

pub fn build_design_row(x_i: &[f64], y_j: &[f64], form: &PredictorForm) -> Result<Vec<f64>> {
    if x_i.len() != form.p || y_j.len() != form.q {
        return Err(Error::DimensionMismatch(format!(
            "expected x of length {} and y of length {}, got {} and {}",
            form.p,
            form.q,
            x_i.len(),
            y_j.len()
        )));
    }
    Ok(design_row_iter(
        x_i.iter().copied(),
        y_j.iter().copied(),
        form.p,
        form.q,
        form.kind,
    ))
}

fn design_row_iter(
    x: impl Iterator<Item = f64> + Clone,
    y: impl Iterator<Item = f64>,
    p: usize,
    q: usize,
    kind: PredictorKind,
) -> Vec<f64> {
    match kind {
        PredictorKind::Linear => x.chain(y).collect(),
        PredictorKind::Bilinear => {
            // y ⊗ x: entry b*p + a holds y_b x_a, the slot of B[a, b] in vec(B)
            let mut z = Vec::with_capacity(p * q);
            for yb in y {
                z.extend(x.clone().map(|xa| yb * xa));
            }
            z
        }
    }
}

/// Standard logistic function, stable for large `|eta|`.
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Log-likelihood of the observed ratings.
pub fn log_likelihood(
    data: &RatingData,
    cov: &CovariateSet,
    form: &PredictorForm,
    latent: Option<&LatentFactors>,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidData("log-likelihood of an empty rating set".into()));
    }
    if cov.p() != form.p() || cov.q() != form.q() {
        return Err(Error::DimensionMismatch(format!(
            "covariates have p={}, q={} but the predictor expects p={}, q={}",
            cov.p(),
            cov.q(),
            form.p(),
            form.q()
        )));
    }
    cov.check_against(data)?;
    if let Some(lf) = latent {
        if lf.u.nrows() != data.n() || lf.v.nrows() != data.m() {
            return Err(Error::DimensionMismatch("latent factor rows do not match ratings".into()));
        }
    }
    let beta = form.coefficients.as_slice();
    let mut total = 0.0;
    for (idx, o) in data.observations().iter().enumerate() {
        let z = cov.design_row(o.user, o.item, form.kind());
        let mut eta = dot(&z, beta);
        if let Some(lf) = latent {
            eta += lf.term(o.user, o.item);
        }
        total += binomial_log_pmf_logit(data.obs_successes(idx), data.obs_trials(idx), eta);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Identifiability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankDeficiency {
    pub matrix: &'static str,
    pub rank: usize,
    pub required: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Identifiability {
    Ok,
    Deficient(Vec<RankDeficiency>),
}

impl Identifiability {
    pub fn is_ok(&self) -> bool {
        matches!(self, Identifiability::Ok)
    }
}

impl fmt::Display for Identifiability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identifiability::Ok => write!(f, "covariates have full column rank"),
            Identifiability::Deficient(list) => {
                write!(f, "likelihood is not identifiable:")?;
                for d in list {
                    write!(
                        f,
                        " {} has numerical rank {} but {} columns;",
                        d.matrix, d.rank, d.required
                    )?;
                }
                write!(
                    f,
                    " remove collinear or constant-duplicate columns, or supply an informative prior covariance and allow unidentified fits"
                )
            }
        }
    }
}

/// Numerical rank with threshold `max(rows, cols) · ε · σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn validate_identifiability(cov: &CovariateSet) -> Identifiability {
    let mut issues = Vec::new();
    for (name, mat) in [("X", &cov.x), ("Y", &cov.y)] {
        let rank = numerical_rank(mat);
        if rank < mat.ncols() {
            issues.push(RankDeficiency {
                matrix: name,
                rank,
                required: mat.ncols(),
            });
        }
    }
    if issues.is_empty() {
        Identifiability::Ok
    } else {
        Identifiability::Deficient(issues)
    }
}
