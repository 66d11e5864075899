//! Synthetic rating data with known ground truth.
//!
//! Covariates, coefficients and latent factors are i.i.d. standard normal; a
//! fixed fraction of the latent entries is zeroed; every cell of `R` is drawn
//! from the shifted binomial, and each user keeps `|M_i|` distinct items
//! chosen uniformly. The remaining cells are held out with their true ratings
//! kept in [`SimTruth`].

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{shifted_binomial_sample, ShiftedBinomialParams, SupportBase};
use crate::error::{Error, Result};
use crate::model::{
    logistic, CovariateSet, LatentFactors, Observation, PredictorForm, PredictorKind, RatingData,
};
use crate::rng::{self, RandomSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub k: u32,
    pub form: PredictorKind,
    pub observed_per_user: usize,
    #[serde(default)]
    pub latent: usize,
    #[serde(default = "default_sparsity")]
    pub latent_sparsity: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sparsity() -> f64 {
    0.75
}

fn default_replicates() -> usize {
    20
}

impl SimConfig {
    pub fn new(n: usize, m: usize, p: usize, q: usize, k: u32, form: PredictorKind, observed_per_user: usize) -> Self {
        Self {
            n,
            m,
            p,
            q,
            k,
            form,
            observed_per_user,
            latent: 0,
            latent_sparsity: default_sparsity(),
            replicates: default_replicates(),
            seed: 0,
        }
    }

    pub fn with_latent(mut self, l: usize) -> Self {
        self.latent = l;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p == 0 || self.q == 0 {
            return Err(Error::InvalidParameter("n, m, p and q must be positive".into()));
        }
        SupportBase::OneBased.validate_k(self.k)?;
        if self.observed_per_user == 0 || self.observed_per_user > self.m {
            return Err(Error::InvalidParameter(format!(
                "observed_per_user must be in 1..={} (m), got {}",
                self.m, self.observed_per_user
            )));
        }
        if !(0.0..=1.0).contains(&self.latent_sparsity) {
            return Err(Error::InvalidParameter(format!(
                "latent_sparsity must lie in [0, 1], got {}",
                self.latent_sparsity
            )));
        }
        Ok(())
    }

    /// Seed of replicate `r`; replicate 0 uses the configured seed itself.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        if r == 0 {
            self.seed
        } else {
            rng::derive_seed(self.seed, &[0x5eed, r as u64])
        }
    }
}

/// Ground truth behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub form: PredictorKind,
    pub p: usize,
    pub q: usize,
    /// `b` or `vec(B)`.
    pub coefficients: Vec<f64>,
    /// Rows of `U` (`n × l`), empty without latent factors.
    pub u: Vec<Vec<f64>>,
    /// Rows of `V` (`m × l`).
    pub v: Vec<Vec<f64>>,
    /// Every cell of `R`, observed or not, one row per user.
    pub ratings: Vec<Vec<i64>>,
    pub seed: u64,
}

impl SimTruth {
    pub fn coefficient_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coefficients)
    }

    pub fn latent(&self) -> Option<LatentFactors> {
        let l = self.u.first().map(Vec::len).unwrap_or(0);
        if l == 0 {
            return None;
        }
        let u = DMatrix::from_fn(self.u.len(), l, |i, c| self.u[i][c]);
        let v = DMatrix::from_fn(self.v.len(), l, |j, c| self.v[j][c]);
        Some(LatentFactors { u, v })
    }

    pub fn f(&self) -> Option<DMatrix<f64>> {
        self.latent().map(|lf| lf.f())
    }

    pub fn rating(&self, i: usize, j: usize) -> i64 {
        self.ratings[i][j]
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub covariates: CovariateSet,
    pub truth: SimTruth,
    pub data: RatingData,
}

impl SimulatedDataset {
    /// True ratings of all unobserved cells, row-major.
    pub fn heldout(&self) -> (Vec<(usize, usize)>, Vec<i64>) {
        let cells = self.data.unobserved_cells();
        let actual = cells.iter().map(|&(i, j)| self.truth.rating(i, j)).collect();
        (cells, actual)
    }
}

fn gaussian(r: &mut RandomSource, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

/// Zeroes exactly `⌊fraction · len⌋` uniformly chosen entries.
fn sparsify(mat: &mut DMatrix<f64>, fraction: f64, r: &mut RandomSource) {
    let len = mat.len();
    let zeros = (fraction * len as f64).floor() as usize;
    for idx in index::sample(r, len, zeros.min(len)) {
        mat.as_mut_slice()[idx] = 0.0;
    }
}

pub fn simulate_dataset(cfg: &SimConfig) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let seed = cfg.seed;
    let x = gaussian(&mut rng::substream(seed, &[1]), cfg.n, cfg.p);
    let y = gaussian(&mut rng::substream(seed, &[2]), cfg.m, cfg.q);
    let dim = cfg.form.dim(cfg.p, cfg.q);
    let beta = gaussian(&mut rng::substream(seed, &[3]), dim, 1).column(0).into_owned();
    let form = PredictorForm::new(cfg.form, cfg.p, cfg.q, beta.clone())?;
    let covariates = CovariateSet::new(x, y)?;

    let latent = if cfg.latent > 0 {
        let mut u = gaussian(&mut rng::substream(seed, &[4]), cfg.n, cfg.latent);
        let mut v = gaussian(&mut rng::substream(seed, &[5]), cfg.m, cfg.latent);
        sparsify(&mut u, cfg.latent_sparsity, &mut rng::substream(seed, &[6]));
        sparsify(&mut v, cfg.latent_sparsity, &mut rng::substream(seed, &[7]));
        Some(LatentFactors::new(u, v)?)
    } else {
        None
    };

    let mut r = rng::substream(seed, &[8]);
    let mut full = vec![vec![0i64; cfg.m]; cfg.n];
    for (i, row) in full.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let z = covariates.design_row(i, j, cfg.form);
            let mut eta: f64 = z.iter().zip(form.coefficients().iter()).map(|(a, b)| a * b).sum();
            if let Some(lf) = &latent {
                eta += lf.term(i, j);
            }
            let params = ShiftedBinomialParams::one_based(cfg.k, logistic(eta))?;
            *cell = shifted_binomial_sample(&params, &mut r);
        }
    }

    let mut r = rng::substream(seed, &[9]);
    let mut obs = Vec::with_capacity(cfg.n * cfg.observed_per_user);
    for (i, row) in full.iter().enumerate() {
        let mut items = index::sample(&mut r, cfg.m, cfg.observed_per_user).into_vec();
        items.sort_unstable();
        obs.extend(items.into_iter().map(|j| Observation::new(i, j, row[j])));
    }
    let data = RatingData::new(cfg.n, cfg.m, cfg.k, SupportBase::OneBased, obs)?;

    let rows = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..mat.nrows())
            .map(|i| mat.row(i).iter().copied().collect())
            .collect()
    };
    let truth = SimTruth {
        form: cfg.form,
        p: cfg.p,
        q: cfg.q,
        coefficients: beta.iter().copied().collect(),
        u: latent.as_ref().map(|lf| rows(&lf.u)).unwrap_or_default(),
        v: latent.as_ref().map(|lf| rows(&lf.v)).unwrap_or_default(),
        ratings: full,
        seed,
    };
    Ok(SimulatedDataset {
        covariates,
        truth,
        data,
    })
}

/// Replicate `r` of a configuration.
pub fn simulate_replicate(cfg: &SimConfig, r: usize) -> Result<SimulatedDataset> {
    let mut c = cfg.clone();
    c.seed = cfg.replicate_seed(r);
    simulate_dataset(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_identifiability;

    #[test]
    fn minimal_config_counts() {
        let cfg = SimConfig::new(25, 25, 5, 5, 5, PredictorKind::Linear, 1).with_seed(3);
        let ds = simulate_dataset(&cfg).unwrap();
        assert_eq!(ds.data.len(), 25);
        assert!(ds.data.observations().iter().all(|o| (1..=5).contains(&o.rating)));
        for i in 0..25 {
            assert_eq!(ds.data.user_observations(i).len(), 1);
        }
        assert_eq!(ds.heldout().0.len(), 25 * 24);
    }

    #[test]
    fn observed_ratings_match_truth() {
        let cfg = SimConfig::new(30, 12, 2, 3, 5, PredictorKind::Bilinear, 4).with_seed(8);
        let ds = simulate_dataset(&cfg).unwrap();
        for o in ds.data.observations() {
            assert_eq!(o.rating, ds.truth.rating(o.user, o.item));
        }
        let mut per_user = vec![0usize; 30];
        for o in ds.data.observations() {
            per_user[o.user] += 1;
        }
        assert!(per_user.iter().all(|&c| c == 4));
    }

    #[test]
    fn reproducible_per_seed() {
        let cfg = SimConfig::new(40, 20, 3, 3, 5, PredictorKind::Linear, 3).with_seed(11);
        let a = simulate_dataset(&cfg).unwrap();
        let b = simulate_dataset(&cfg).unwrap();
        assert_eq!(a.data.observations(), b.data.observations());
        assert_eq!(a.truth, b.truth);
        let c = simulate_dataset(&cfg.clone().with_seed(12)).unwrap();
        assert_ne!(a.data.observations(), c.data.observations());
    }

    #[test]
    fn latent_sparsity_is_exact() {
        let cfg = SimConfig::new(100, 60, 2, 2, 5, PredictorKind::Linear, 2)
            .with_latent(2)
            .with_seed(5);
        let ds = simulate_dataset(&cfg).unwrap();
        let lf = ds.truth.latent().unwrap();
        assert_eq!(lf.u.iter().filter(|&&x| x == 0.0).count(), 150);
        assert_eq!(lf.v.iter().filter(|&&x| x == 0.0).count(), 90);
    }

    #[test]
    fn rejects_too_many_observations() {
        let cfg = SimConfig::new(5, 3, 1, 1, 5, PredictorKind::Linear, 4);
        assert!(simulate_dataset(&cfg).is_err());
    }

    #[test]
    fn generated_covariates_are_identifiable() {
        for seed in 0..100 {
            let cfg = SimConfig::new(25, 25, 5, 5, 5, PredictorKind::Linear, 1).with_seed(seed);
            let ds = simulate_dataset(&cfg).unwrap();
            assert!(validate_identifiability(&ds.covariates).is_ok(), "seed {seed}");
        }
    }
}
