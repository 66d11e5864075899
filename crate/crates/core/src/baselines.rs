//! Reference predictors: global/user/item means and Funk SVD.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distributions::SupportBase;
use crate::error::{Error, Result};
use crate::model::RatingData;
use crate::rng;

/// Anything that maps a cell to a real-valued rating prediction.
pub trait RatingPredictor: Sync {
    fn predict(&self, user: usize, item: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    Global,
    User,
    Item,
}

#[derive(Debug, Clone)]
pub struct MeanBaseline {
    mode: MeanMode,
    global: f64,
    rows: Vec<Option<f64>>,
}

impl MeanBaseline {
    pub fn global(&self) -> f64 {
        self.global
    }

    pub fn mode(&self) -> MeanMode {
        self.mode
    }
}

pub fn fit_mean_baseline(data: &RatingData, mode: MeanMode) -> MeanBaseline {
    let obs = data.observations();
    let global = obs.iter().map(|o| o.rating as f64).sum::<f64>() / obs.len() as f64;
    let row_mean = |indices: &[usize]| {
        (!indices.is_empty()).then(|| {
            indices.iter().map(|&t| obs[t].rating as f64).sum::<f64>() / indices.len() as f64
        })
    };
    let rows = match mode {
        MeanMode::Global => Vec::new(),
        MeanMode::User => (0..data.n()).map(|i| row_mean(data.user_observations(i))).collect(),
        MeanMode::Item => (0..data.m()).map(|j| row_mean(data.item_observations(j))).collect(),
    };
    MeanBaseline { mode, global, rows }
}

impl RatingPredictor for MeanBaseline {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let row = match self.mode {
            MeanMode::Global => return self.global,
            MeanMode::User => user,
            MeanMode::Item => item,
        };
        self.rows.get(row).copied().flatten().unwrap_or(self.global)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunkSvdConfig {
    pub factors: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_learning_rate() -> f64 {
    0.005
}

fn default_regularization() -> f64 {
    0.02
}

fn default_epochs() -> usize {
    50
}

impl FunkSvdConfig {
    pub fn new(factors: usize) -> Self {
        Self {
            factors,
            learning_rate: default_learning_rate(),
            regularization: default_regularization(),
            epochs: default_epochs(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors == 0 {
            return Err(Error::InvalidParameter("funk svd needs at least one factor".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be non-negative, got {}",
                self.regularization
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FunkSvd {
    mean: f64,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    user_factors: DMatrix<f64>,
    item_factors: DMatrix<f64>,
    k: u32,
    support_base: SupportBase,
    cell_k: BTreeMap<(usize, usize), u32>,
    /// Training RMSE after each epoch.
    pub history: Vec<f64>,
}

impl FunkSvd {
    fn raw(&self, user: usize, item: usize) -> f64 {
        let mut r = self.mean;
        if user < self.user_bias.len() {
            r += self.user_bias[user];
        }
        if item < self.item_bias.len() {
            r += self.item_bias[item];
        }
        if user < self.user_factors.nrows() && item < self.item_factors.nrows() {
            r += self.user_factors.row(user).dot(&self.item_factors.row(item));
        }
        r
    }
}

impl RatingPredictor for FunkSvd {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let k = self.cell_k.get(&(user, item)).copied().unwrap_or(self.k);
        let (lo, hi) = self.support_base.bounds(k);
        self.raw(user, item).clamp(lo as f64, hi as f64)
    }
}

pub fn fit_funk_svd(data: &RatingData, cfg: &FunkSvdConfig) -> Result<FunkSvd> {
    cfg.validate()?;
    let obs = data.observations();
    let mean = obs.iter().map(|o| o.rating as f64).sum::<f64>() / obs.len() as f64;
    let init = Normal::new(0.0, 0.1).expect("valid normal");
    let mut r = rng::substream(cfg.seed, &[1]);
    let user_factors = DMatrix::from_fn(data.n(), cfg.factors, |_, _| init.sample(&mut r));
    let item_factors = DMatrix::from_fn(data.m(), cfg.factors, |_, _| init.sample(&mut r));
    let mut model = FunkSvd {
        mean,
        user_bias: vec![0.0; data.n()],
        item_bias: vec![0.0; data.m()],
        user_factors,
        item_factors,
        k: data.k(),
        support_base: data.support_base(),
        cell_k: data.cell_scales().clone(),
        history: Vec::with_capacity(cfg.epochs),
    };

    let (lr, reg) = (cfg.learning_rate, cfg.regularization);
    let mut order: Vec<usize> = (0..obs.len()).collect();
    let mut shuffle = rng::substream(cfg.seed, &[2]);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        for &t in &order {
            let o = &obs[t];
            let (i, j) = (o.user, o.item);
            let err = o.rating as f64 - model.raw(i, j);
            model.user_bias[i] += lr * (err - reg * model.user_bias[i]);
            model.item_bias[j] += lr * (err - reg * model.item_bias[j]);
            for f in 0..cfg.factors {
                let pu = model.user_factors[(i, f)];
                let qi = model.item_factors[(j, f)];
                model.user_factors[(i, f)] += lr * (err * qi - reg * pu);
                model.item_factors[(j, f)] += lr * (err * pu - reg * qi);
            }
        }
        let mut sse = 0.0;
        for o in obs {
            if !model.raw(o.user, o.item).is_finite() {
                return Err(Error::Diverged { epoch });
            }
            sse += (o.rating as f64 - model.predict(o.user, o.item)).powi(2);
        }
        let rmse = (sse / obs.len() as f64).sqrt();
        model.history.push(rmse);
    }
    Ok(model)
}
