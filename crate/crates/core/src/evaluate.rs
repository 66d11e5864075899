//! Prediction from posterior draws, summaries, RMSE and cross-validation.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_funk_svd, fit_mean_baseline, FunkSvdConfig, MeanMode, RatingPredictor};
use crate::distributions::binomial_log_pmf_logit;
use crate::error::{Error, Result};
use crate::model::{CovariateSet, PredictorKind, RatingData};
use crate::rng;
use crate::sampler::{gibbs_fit, ChainConfig, PosteriorDraws};

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    /// Drop the latent term for rows absent from training and accept new rows.
    pub cold_start: bool,
    /// Level of the central credible interval.
    pub level: f64,
    /// Use the pmf at the posterior-mean predictor instead of averaging pmfs.
    pub plug_in: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            cold_start: false,
            level: 0.95,
            plug_in: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPrediction {
    pub user: usize,
    pub item: usize,
    /// Posterior-predictive mean rating.
    pub point: f64,
    pub lower: i64,
    pub upper: i64,
    /// Smallest rating in the cell's support; `pmf[t]` is `P(r = support_min + t)`.
    pub support_min: i64,
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub level: f64,
    pub predictions: Vec<CellPrediction>,
}

impl PredictionResult {
    pub fn points(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.point).collect()
    }
}

/// Posterior-predictive prediction at the default 95% level.
pub fn predict(
    draws: &PosteriorDraws,
    cov: &CovariateSet,
    cells: &[(usize, usize)],
    cold_start: bool,
) -> Result<PredictionResult> {
    predict_with(
        draws,
        cov,
        cells,
        &PredictOptions {
            cold_start,
            ..PredictOptions::default()
        },
    )
}

pub fn predict_with(
    draws: &PosteriorDraws,
    cov: &CovariateSet,
    cells: &[(usize, usize)],
    opts: &PredictOptions,
) -> Result<PredictionResult> {
    if draws.is_empty() {
        return Err(Error::InvalidParameter("no posterior draws to predict from".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "credible level must lie in (0, 1), got {}",
            opts.level
        )));
    }
    if cov.p() != draws.p || cov.q() != draws.q {
        return Err(Error::DimensionMismatch(format!(
            "covariates have p={}, q={} but the draws were fit with p={}, q={}",
            cov.p(),
            cov.q(),
            draws.p,
            draws.q
        )));
    }
    for &(i, j) in cells {
        if !opts.cold_start {
            if i >= draws.n {
                return Err(Error::UnknownRow { kind: "user", index: i });
            }
            if j >= draws.m {
                return Err(Error::UnknownRow { kind: "item", index: j });
            }
        }
        if i >= cov.n() {
            return Err(Error::MissingCovariates { kind: "user", index: i });
        }
        if j >= cov.m() {
            return Err(Error::MissingCovariates { kind: "item", index: j });
        }
    }
    let alpha = 1.0 - opts.level;
    let predictions = cells
        .par_iter()
        .map(|&(i, j)| predict_cell(draws, cov, i, j, opts, alpha))
        .collect();
    Ok(PredictionResult {
        level: opts.level,
        predictions,
    })
}

fn use_latent(draws: &PosteriorDraws, i: usize, j: usize, cold_start: bool) -> bool {
    if draws.l == 0 || i >= draws.n || j >= draws.m {
        return false;
    }
    !cold_start || (draws.trained_users[i] && draws.trained_items[j])
}

fn predict_cell(
    draws: &PosteriorDraws,
    cov: &CovariateSet,
    i: usize,
    j: usize,
    opts: &PredictOptions,
    alpha: f64,
) -> CellPrediction {
    let z = DVector::from_vec(cov.design_row(i, j, draws.kind));
    let latent = use_latent(draws, i, j, opts.cold_start);
    let eta = |d: usize| {
        let mut e = z.dot(&draws.coefficients[d]);
        if latent {
            e += draws.u[d].row(i).dot(&draws.v[d].row(j));
        }
        e
    };
    let k = draws.k_at(i, j);
    let trials = draws.support_base.trials(k);
    let (lo, _) = draws.support_base.bounds(k);

    let mut pmf = vec![0.0; trials as usize + 1];
    if opts.plug_in {
        let mean_eta = (0..draws.len()).map(eta).sum::<f64>() / draws.len() as f64;
        accumulate_pmf(&mut pmf, trials, mean_eta, 1.0);
    } else {
        let w = 1.0 / draws.len() as f64;
        for d in 0..draws.len() {
            accumulate_pmf(&mut pmf, trials, eta(d), w);
        }
    }
    let point = pmf
        .iter()
        .enumerate()
        .map(|(t, p)| (lo + t as i64) as f64 * p)
        .sum();
    let (a, b) = discrete_interval(&pmf, alpha);
    CellPrediction {
        user: i,
        item: j,
        point,
        lower: lo + a as i64,
        upper: lo + b as i64,
        support_min: lo,
        pmf,
    }
}

fn accumulate_pmf(pmf: &mut [f64], trials: u32, eta: f64, weight: f64) {
    for (s, slot) in pmf.iter_mut().enumerate() {
        *slot += weight * binomial_log_pmf_logit(s as u32, trials, eta).exp();
    }
}

/// Equal-tailed interval of a discrete pmf: the smallest indices whose CDF
/// reaches `alpha/2` and `1 - alpha/2`.
fn discrete_interval(pmf: &[f64], alpha: f64) -> (usize, usize) {
    const SLACK: f64 = 1e-12;
    let mut lower = None;
    let mut upper = pmf.len() - 1;
    let mut cdf = 0.0;
    for (t, p) in pmf.iter().enumerate() {
        cdf += p;
        if lower.is_none() && cdf >= alpha / 2.0 - SLACK {
            lower = Some(t);
        }
        if cdf >= 1.0 - alpha / 2.0 - SLACK {
            upper = t;
            break;
        }
    }
    (lower.unwrap_or(0), upper)
}

// ---------------------------------------------------------------------------
// Metrics and summaries
// ---------------------------------------------------------------------------

pub fn rmse(predicted: &[f64], actual: &[i64]) -> Result<f64> {
    let actual: Vec<f64> = actual.iter().map(|&r| r as f64).collect();
    rmse_real(predicted, &actual)
}

/// RMSE between two real vectors, e.g. estimated and true coefficients.
pub fn rmse_real(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "rmse of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("rmse of empty vectors".into()));
    }
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sse / a.len() as f64).sqrt())
}

/// Linear-interpolation quantile of sorted data (`(n-1)·prob` rule).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub intervals: Vec<CredibleInterval>,
}

pub fn summarize(name: &str, samples: &[f64], levels: &[f64]) -> Result<ParameterSummary> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a posterior summary needs at least 2 draws, got {}",
            samples.len()
        )));
    }
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "credible level must lie in (0, 1), got {level}"
            )));
        }
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let intervals = levels
        .iter()
        .map(|&level| CredibleInterval {
            level,
            lower: quantile(&sorted, (1.0 - level) / 2.0),
            upper: quantile(&sorted, (1.0 + level) / 2.0),
        })
        .collect();
    Ok(ParameterSummary {
        name: name.to_string(),
        mean,
        sd: var.sqrt(),
        median: quantile(&sorted, 0.5),
        intervals,
    })
}

/// Summaries of every flattened parameter of the draws.
pub fn posterior_summary(draws: &PosteriorDraws, levels: &[f64]) -> Result<Vec<ParameterSummary>> {
    if draws.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a posterior summary needs at least 2 draws, got {}",
            draws.len()
        )));
    }
    let flat: Vec<Vec<f64>> = (0..draws.len()).map(|d| draws.flat_draw(d)).collect();
    draws
        .parameter_names()
        .iter()
        .enumerate()
        .map(|(t, name)| {
            let column: Vec<f64> = flat.iter().map(|row| row[t]).collect();
            summarize(name, &column, levels)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

fn default_iterations() -> usize {
    2000
}

fn default_burn_in() -> usize {
    1000
}

fn default_thin() -> usize {
    1
}

/// One entry of a cross-validation model list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Proposed {
        #[serde(default)]
        name: Option<String>,
        form: PredictorKind,
        #[serde(default)]
        latent: usize,
        #[serde(default)]
        sparse_coefficients: bool,
        #[serde(default)]
        sparse_latent: bool,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default = "default_thin")]
        thin: usize,
    },
    Mean {
        #[serde(default)]
        name: Option<String>,
        mode: MeanMode,
    },
    FunkSvd {
        #[serde(default)]
        name: Option<String>,
        factors: usize,
        #[serde(default)]
        learning_rate: Option<f64>,
        #[serde(default)]
        regularization: Option<f64>,
        #[serde(default)]
        epochs: Option<usize>,
    },
}

impl ModelSpec {
    pub fn proposed(form: PredictorKind, latent: usize, iterations: usize, burn_in: usize) -> Self {
        ModelSpec::Proposed {
            name: None,
            form,
            latent,
            sparse_coefficients: false,
            sparse_latent: false,
            iterations,
            burn_in,
            thin: 1,
        }
    }

    pub fn mean(mode: MeanMode) -> Self {
        ModelSpec::Mean { name: None, mode }
    }

    pub fn funk_svd(factors: usize) -> Self {
        ModelSpec::FunkSvd {
            name: None,
            factors,
            learning_rate: None,
            regularization: None,
            epochs: None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Proposed { name: Some(n), .. }
            | ModelSpec::Mean { name: Some(n), .. }
            | ModelSpec::FunkSvd { name: Some(n), .. } => n.clone(),
            ModelSpec::Proposed { form, latent, .. } => {
                if *latent > 0 {
                    format!("{form}+latent{latent}")
                } else {
                    form.to_string()
                }
            }
            ModelSpec::Mean { mode, .. } => match mode {
                MeanMode::Global => "global-mean".into(),
                MeanMode::User => "user-mean".into(),
                MeanMode::Item => "item-mean".into(),
            },
            ModelSpec::FunkSvd { factors, .. } => format!("funk-svd{factors}"),
        }
    }

    /// Chain settings for a proposed-model entry.
    pub fn chain_config(&self, seed: u64) -> Option<ChainConfig> {
        match self {
            ModelSpec::Proposed {
                latent,
                sparse_coefficients,
                sparse_latent,
                iterations,
                burn_in,
                thin,
                ..
            } => Some(ChainConfig {
                iterations: *iterations,
                burn_in: *burn_in,
                thin: *thin,
                seed,
                latent_l: *latent,
                sparse_coefficients: *sparse_coefficients,
                sparse_latent: *sparse_latent,
                ..ChainConfig::default()
            }),
            _ => None,
        }
    }

    fn funk_config(&self, seed: u64) -> Option<FunkSvdConfig> {
        match self {
            ModelSpec::FunkSvd {
                factors,
                learning_rate,
                regularization,
                epochs,
                ..
            } => {
                let mut cfg = FunkSvdConfig::new(*factors);
                cfg.learning_rate = learning_rate.unwrap_or(cfg.learning_rate);
                cfg.regularization = regularization.unwrap_or(cfg.regularization);
                cfg.epochs = epochs.unwrap_or(cfg.epochs);
                cfg.seed = seed;
                Some(cfg)
            }
            _ => None,
        }
    }

    /// Fits on `train` and returns point predictions for `cells`.
    pub fn fit_predict(
        &self,
        train: &RatingData,
        cov: &CovariateSet,
        cells: &[(usize, usize)],
        seed: u64,
    ) -> Result<Vec<f64>> {
        match self {
            ModelSpec::Proposed { form, .. } => {
                let cfg = self.chain_config(seed).expect("proposed entry");
                let draws = gibbs_fit(train, cov, *form, &cfg, None)?;
                Ok(predict(&draws, cov, cells, true)?.points())
            }
            ModelSpec::Mean { mode, .. } => {
                let model = fit_mean_baseline(train, *mode);
                Ok(cells.iter().map(|&(i, j)| model.predict(i, j)).collect())
            }
            ModelSpec::FunkSvd { .. } => {
                let cfg = self.funk_config(seed).expect("funk svd entry");
                let model = fit_funk_svd(train, &cfg)?;
                Ok(cells.iter().map(|&(i, j)| model.predict(i, j)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_size: usize,
    pub rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Mean and sample sd over the folds that completed.
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// `"mean (sd)"` with two decimals.
    pub formatted: String,
}

impl CvReport {
    fn from_folds(model: String, seed: u64, folds: Vec<FoldResult>) -> Self {
        let ok: Vec<f64> = folds.iter().filter_map(|f| f.rmse).collect();
        let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        let sd = mean.filter(|_| ok.len() > 1).map(|m| {
            (ok.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
        });
        let formatted = match (mean, sd) {
            (Some(m), Some(s)) => format!("{m:.2} ({s:.2})"),
            (Some(m), None) => format!("{m:.2}"),
            _ => "failed".into(),
        };
        Self {
            model,
            seed,
            folds,
            mean,
            sd,
            formatted,
        }
    }

    pub fn completed(&self) -> bool {
        self.folds.iter().all(|f| f.rmse.is_some())
    }
}

/// Fold index of every observation: a uniform shuffle dealt round-robin.
pub fn fold_assignment(len: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::substream(seed, &[0xf01d]));
    let mut assignment = vec![0; len];
    for (pos, &obs) in order.iter().enumerate() {
        assignment[obs] = pos % folds;
    }
    assignment
}

pub fn cross_validate(
    data: &RatingData,
    cov: &CovariateSet,
    models: &[ModelSpec],
    folds: usize,
    seed: u64,
) -> Result<Vec<CvReport>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("folds must be at least 2, got {folds}")));
    }
    if folds > data.len() {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds requested but only {} observed ratings",
            data.len()
        )));
    }
    cov.check_against(data)?;
    let assignment = fold_assignment(data.len(), folds, seed);
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..folds).map(move |f| (m, f)))
        .collect();
    let results: Vec<FoldResult> = jobs
        .par_iter()
        .map(|&(mi, fold)| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.len()).partition(|&t| assignment[t] == fold);
            let outcome = (|| {
                let train_data = data.subset(&train)?;
                let cells: Vec<(usize, usize)> = test
                    .iter()
                    .map(|&t| {
                        let o = data.observations()[t];
                        (o.user, o.item)
                    })
                    .collect();
                let actual: Vec<i64> = test.iter().map(|&t| data.observations()[t].rating).collect();
                let fold_seed = rng::derive_seed(seed, &[mi as u64, fold as u64]);
                let predicted = models[mi].fit_predict(&train_data, cov, &cells, fold_seed)?;
                rmse(&predicted, &actual)
            })();
            FoldResult {
                fold,
                test_size: test.len(),
                rmse: outcome.as_ref().ok().copied(),
                error: outcome.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let mut results = results.into_iter();
    Ok(models
        .iter()
        .map(|spec| {
            let folds_of_model = results.by_ref().take(folds).collect();
            CvReport::from_folds(spec.label(), seed, folds_of_model)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SupportBase;
    use crate::model::Observation;
    use crate::simulate::{simulate_dataset, SimConfig};
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};
    use std::collections::BTreeMap;

    fn fixed_draws(coefs: &[f64]) -> (PosteriorDraws, CovariateSet) {
        let cov = CovariateSet::new(DMatrix::from_element(2, 1, 1.0), DMatrix::from_element(2, 1, 1.0)).unwrap();
        let draws = PosteriorDraws {
            kind: PredictorKind::Bilinear,
            p: 1,
            q: 1,
            n: 2,
            m: 2,
            l: 0,
            k: 5,
            support_base: SupportBase::OneBased,
            cell_k: BTreeMap::new(),
            trained_users: vec![true; 2],
            trained_items: vec![true; 2],
            seed: 0,
            config: ChainConfig::default(),
            coefficients: coefs.iter().map(|&c| DVector::from_element(1, c)).collect(),
            u: Vec::new(),
            v: Vec::new(),
        };
        (draws, cov)
    }

    #[test]
    fn zero_predictor_gives_midpoint() {
        let (draws, cov) = fixed_draws(&[0.0]);
        let res = predict(&draws, &cov, &[(0, 0)], false).unwrap();
        let p = &res.predictions[0];
        assert!((p.point - 3.0).abs() < 1e-12);
        assert!((p.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn saturated_draws_collapse_interval() {
        let (draws, cov) = fixed_draws(&[60.0, 80.0]);
        let p = &predict(&draws, &cov, &[(1, 1)], false).unwrap().predictions[0];
        assert!((p.point - 5.0).abs() < 1e-12);
        assert_eq!((p.lower, p.upper), (5, 5));
    }

    #[test]
    fn mixture_of_extremes_is_bimodal() {
        let (draws, cov) = fixed_draws(&[-60.0, 60.0]);
        let p = &predict(&draws, &cov, &[(0, 1)], false).unwrap().predictions[0];
        assert!((p.point - 3.0).abs() < 1e-12);
        assert!((p.pmf[0] - 0.5).abs() < 1e-12 && (p.pmf[4] - 0.5).abs() < 1e-12);
        assert!(p.pmf[1..4].iter().all(|&x| x < 1e-12));
        assert_eq!((p.lower, p.upper), (1, 5));
    }

    #[test]
    fn plug_in_uses_mean_predictor() {
        let (draws, cov) = fixed_draws(&[-60.0, 60.0]);
        let opts = PredictOptions {
            plug_in: true,
            ..PredictOptions::default()
        };
        let p = &predict_with(&draws, &cov, &[(0, 1)], &opts).unwrap().predictions[0];
        assert!((p.point - 3.0).abs() < 1e-12);
        assert!((p.pmf[2] - 6.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_average_commutes_with_subsets() {
        let coefs: Vec<f64> = (0..7).map(|t| -1.5 + 0.4 * t as f64).collect();
        let (draws, cov) = fixed_draws(&coefs);
        let all = predict(&draws, &cov, &[(0, 0)], false).unwrap().predictions[0].pmf.clone();
        let a = predict(&draws.select(&[0, 1, 2]), &cov, &[(0, 0)], false).unwrap();
        let b = predict(&draws.select(&[3, 4, 5, 6]), &cov, &[(0, 0)], false).unwrap();
        for t in 0..5 {
            let mixed = (3.0 * a.predictions[0].pmf[t] + 4.0 * b.predictions[0].pmf[t]) / 7.0;
            assert!((mixed - all[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_rows_need_cold_start() {
        let (draws, _) = fixed_draws(&[0.3]);
        let cov = CovariateSet::new(DMatrix::from_element(3, 1, 1.0), DMatrix::from_element(2, 1, 1.0)).unwrap();
        match predict(&draws, &cov, &[(2, 0)], false) {
            Err(Error::UnknownRow { kind: "user", index: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(predict(&draws, &cov, &[(2, 0)], true).is_ok());
        match predict(&draws, &cov, &[(0, 5)], true) {
            Err(Error::MissingCovariates { kind: "item", index: 5 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cold_start_omits_latent_term() {
        let (mut draws, cov) = fixed_draws(&[0.0]);
        draws.l = 1;
        draws.u = vec![DMatrix::from_element(2, 1, 3.0)];
        draws.v = vec![DMatrix::from_element(2, 1, 3.0)];
        draws.trained_users = vec![true, false];
        let warm = predict(&draws, &cov, &[(1, 0)], false).unwrap().predictions[0].point;
        let cold = predict(&draws, &cov, &[(1, 0)], true).unwrap().predictions[0].point;
        let trained = predict(&draws, &cov, &[(0, 0)], true).unwrap().predictions[0].point;
        assert!(warm > 4.9 && trained > 4.9);
        assert!((cold - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1, 2]).unwrap(), 0.0);
        assert!((rmse(&[2.0, 2.0], &[1, 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!((rmse(&[3.5], &[5]).unwrap() - 1.5).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1, 2]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn summary_of_constant_draws() {
        let s = summarize("c", &[2.5; 10], &[0.95]).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!((s.intervals[0].lower, s.intervals[0].upper), (2.5, 2.5));
        assert!(summarize("c", &[1.0], &[0.95]).is_err());
    }

    #[test]
    fn summary_quantile_rule_on_sequence() {
        let seq: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = summarize("x", &seq, &[0.95]).unwrap();
        assert!((s.median - 50.5).abs() < 1e-12);
        assert!((s.intervals[0].lower - 3.475).abs() < 1e-12);
        assert!((s.intervals[0].upper - 97.525).abs() < 1e-12);
    }

    #[test]
    fn summary_of_normal_samples() {
        let mut r = rng::from_seed(13);
        let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let s = summarize("z", &xs, &[0.95]).unwrap();
        assert!((s.intervals[0].lower + 1.96).abs() < 0.05);
        assert!((s.intervals[0].upper - 1.96).abs() < 0.05);
    }

    fn small_data() -> (RatingData, CovariateSet) {
        let cfg = SimConfig::new(30, 15, 2, 2, 5, PredictorKind::Linear, 4).with_seed(21);
        let ds = simulate_dataset(&cfg).unwrap();
        (ds.data, ds.covariates)
    }

    #[test]
    fn folds_partition_observations() {
        let a = fold_assignment(103, 5, 9);
        let mut sizes = [0; 5];
        for &f in &a {
            sizes[f] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), 103);
        assert!(sizes.iter().all(|&s| s == 20 || s == 21));
        assert_eq!(a, fold_assignment(103, 5, 9));
    }

    #[test]
    fn cv_is_reproducible_and_shaped() {
        let (data, cov) = small_data();
        let models = vec![
            ModelSpec::proposed(PredictorKind::Linear, 0, 200, 100),
            ModelSpec::mean(MeanMode::Item),
        ];
        let a = cross_validate(&data, &cov, &models, 5, 3).unwrap();
        let b = cross_validate(&data, &cov, &models, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|r| r.folds.len() == 5 && r.completed()));
        let mean = a[0].folds.iter().map(|f| f.rmse.unwrap()).sum::<f64>() / 5.0;
        assert!((a[0].mean.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn leave_one_out_boundary() {
        let obs = vec![
            Observation::new(0, 0, 1),
            Observation::new(0, 1, 3),
            Observation::new(1, 0, 4),
        ];
        let data = RatingData::new(2, 2, 5, SupportBase::OneBased, obs).unwrap();
        let cov = CovariateSet::new(DMatrix::from_element(2, 1, 1.0), DMatrix::from_element(2, 1, 1.0)).unwrap();
        let rep = cross_validate(&data, &cov, &[ModelSpec::mean(MeanMode::User)], 3, 0).unwrap();
        assert_eq!(rep[0].folds.len(), 3);
        assert!(rep[0].completed());
        assert!(cross_validate(&data, &cov, &[ModelSpec::mean(MeanMode::User)], 4, 0).is_err());
        assert!(cross_validate(&data, &cov, &[ModelSpec::mean(MeanMode::User)], 1, 0).is_err());
    }

    #[test]
    fn unidentifiable_fold_is_reported_not_fatal() {
        let (data, mut cov) = small_data();
        let col = cov.x.column(0).into_owned();
        cov.x.set_column(1, &col);
        let models = vec![
            ModelSpec::proposed(PredictorKind::Linear, 0, 50, 25),
            ModelSpec::mean(MeanMode::Global),
        ];
        let rep = cross_validate(&data, &cov, &models, 3, 1).unwrap();
        assert!(rep[0].folds.iter().all(|f| f.error.is_some()));
        assert_eq!(rep[0].formatted, "failed");
        assert!(rep[1].completed());
    }

    #[test]
    fn model_list_parses_from_toml() {
        #[derive(Deserialize)]
        struct List {
            model: Vec<ModelSpec>,
        }
        let text = r#"
            [[model]]
            type = "proposed"
            form = "linear"
            iterations = 300
            burn_in = 100

            [[model]]
            type = "mean"
            mode = "item"

            [[model]]
            type = "funk_svd"
            factors = 3
        "#;
        let list: List = toml::from_str(text).unwrap();
        assert_eq!(list.model.len(), 3);
        assert_eq!(list.model[1].label(), "item-mean");
        assert_eq!(list.model[2].label(), "funk-svd3");
    }
}
