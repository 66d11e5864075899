//! Dense-algebra and quadrature oracles shared by the integration tests.
#![allow(dead_code)]

use binrec::distributions::SupportBase;
use binrec::model::{CovariateSet, Observation, PredictorKind, RatingData};
use binrec::rng::{self, RandomSource};
use binrec::sampler::{ChainConfig, ChainState, Problem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(r: &mut RandomSource, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

/// A 5 × 4 dataset with 6 observed cells.
pub fn five_by_four(seed: u64, p: usize, q: usize) -> (RatingData, CovariateSet) {
    let mut r = rng::from_seed(seed);
    let cov = CovariateSet::new(gaussian(&mut r, 5, p), gaussian(&mut r, 4, q)).unwrap();
    let cells = [(0, 1), (1, 3), (2, 0), (2, 2), (3, 1), (4, 3)];
    let obs = cells
        .iter()
        .map(|&(i, j)| Observation::new(i, j, r.random_range(1..=5)))
        .collect();
    (RatingData::new(5, 4, 5, SupportBase::OneBased, obs).unwrap(), cov)
}

/// A state with random coefficients, omegas and (optionally) latent factors.
pub fn random_state(problem: &Problem<'_>, l: usize, seed: u64) -> ChainState {
    let mut cfg = ChainConfig::with_seed(seed);
    cfg.latent_l = l;
    let mut state = ChainState::initial(problem, &cfg);
    let mut r = rng::from_seed(seed ^ 0xabc);
    state.coefficients = gaussian(&mut r, problem.dim, 1).column(0).into_owned();
    state.omegas = (0..problem.data.len()).map(|_| r.random_range(0.2..2.0)).collect();
    state.u = gaussian(&mut r, problem.data.n(), l);
    state.v = gaussian(&mut r, problem.data.m(), l);
    state
}

/// Cell `(i, j)` sits at row `j·n + i` of every full `n·m` quantity.
pub struct FullSystem {
    pub z: DMatrix<f64>,
    pub omega: DVector<f64>,
    pub kappa: DVector<f64>,
    pub latent: DVector<f64>,
}

/// The untrimmed system: unobserved rows carry `ω = 0` and `κ = 0`.
pub fn full_system(
    data: &RatingData,
    cov: &CovariateSet,
    kind: PredictorKind,
    state: &ChainState,
) -> FullSystem {
    let (n, m) = (data.n(), data.m());
    let d = kind.dim(cov.p(), cov.q());
    let mut z = DMatrix::zeros(n * m, d);
    let mut omega = DVector::zeros(n * m);
    let mut kappa = DVector::zeros(n * m);
    let mut latent = DVector::zeros(n * m);
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            let zr = cov.design_row(i, j, kind);
            for a in 0..d {
                z[(row, a)] = zr[a];
            }
            if state.u.ncols() > 0 {
                latent[row] = state.u.row(i).dot(&state.v.row(j));
            }
        }
    }
    for (o, obs) in data.observations().iter().enumerate() {
        let row = obs.item * n + obs.user;
        omega[row] = state.omegas[o];
        kappa[row] = data.obs_kappa(o);
    }
    FullSystem {
        z,
        omega,
        kappa,
        latent,
    }
}

/// `I + ZᵀΩZ` and `Zᵀ(κ − Ω·offset)` over all `n·m` rows.
pub fn dense_coefficient_system(full: &FullSystem) -> (DMatrix<f64>, DVector<f64>) {
    let d = full.z.ncols();
    let omega = DMatrix::from_diagonal(&full.omega);
    let precision = DMatrix::identity(d, d) + full.z.transpose() * &omega * &full.z;
    let target = &full.kappa - full.omega.component_mul(&full.latent);
    (precision, full.z.transpose() * target)
}

/// Residual target `Ω(ξ − Zβ)` with `ξ = κ/ω` on observed rows and zero elsewhere.
fn omega_residual(full: &FullSystem, beta: &DVector<f64>) -> DVector<f64> {
    let zb = &full.z * beta;
    DVector::from_fn(full.omega.len(), |r, _| {
        let w = full.omega[r];
        if w == 0.0 {
            0.0
        } else {
            w * (full.kappa[r] / w - zb[r])
        }
    })
}

/// Dense `vec(U)` system: `diag(prior) + (V⊗I_n)ᵀΩ(V⊗I_n)`, `(V⊗I_n)ᵀΩ(ξ − Zβ)`.
pub fn dense_u_system(
    full: &FullSystem,
    state: &ChainState,
    prior: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let n = state.u.nrows();
    let a = state.v.kronecker(&DMatrix::<f64>::identity(n, n));
    let omega = DMatrix::from_diagonal(&full.omega);
    let precision = DMatrix::from_diagonal(&DVector::from_column_slice(prior))
        + a.transpose() * &omega * &a;
    (precision, a.transpose() * omega_residual(full, &state.coefficients))
}

/// Dense `vec(Vᵀ)` system via `vec(UVᵀ) = (I_m⊗U) vec(Vᵀ)`; `prior` is in
/// column-major `vec(V)` order and is permuted here.
pub fn dense_v_system(
    full: &FullSystem,
    state: &ChainState,
    prior: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let (m, l) = (state.v.nrows(), state.v.ncols());
    let a = DMatrix::<f64>::identity(m, m).kronecker(&state.u);
    let omega = DMatrix::from_diagonal(&full.omega);
    let diag = DVector::from_fn(m * l, |r, _| prior[(r % l) * m + r / l]);
    let precision = DMatrix::from_diagonal(&diag) + a.transpose() * &omega * &a;
    (precision, a.transpose() * omega_residual(full, &state.coefficients))
}

/// Log-likelihood of one observation at predictor `eta`.
pub fn log_lik_cell(s: u32, n: u32, eta: f64) -> f64 {
    let softplus = if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    };
    s as f64 * eta - n as f64 * softplus
}

/// Marginal posterior mean and sd of each coefficient of a 2-coefficient
/// model under a `N(0, I)` prior, by tensor-grid quadrature on `[-w, w]²`.
pub fn grid_posterior_2d(
    data: &RatingData,
    cov: &CovariateSet,
    kind: PredictorKind,
    points: usize,
    half_width: f64,
) -> [(f64, f64); 2] {
    let rows: Vec<(Vec<f64>, u32, u32)> = data
        .observations()
        .iter()
        .enumerate()
        .map(|(o, obs)| {
            (
                cov.design_row(obs.user, obs.item, kind),
                data.obs_successes(o),
                data.obs_trials(o),
            )
        })
        .collect();
    let step = 2.0 * half_width / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|t| -half_width + t as f64 * step).collect();
    let mut logpost = vec![0.0; points * points];
    let mut best = f64::NEG_INFINITY;
    for (a, &b1) in grid.iter().enumerate() {
        for (b, &b2) in grid.iter().enumerate() {
            let mut lp = -0.5 * (b1 * b1 + b2 * b2);
            for (z, s, n) in &rows {
                lp += log_lik_cell(*s, *n, z[0] * b1 + z[1] * b2);
            }
            logpost[a * points + b] = lp;
            best = best.max(lp);
        }
    }
    let (mut mass, mut m1, mut m2, mut s1, mut s2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, &b1) in grid.iter().enumerate() {
        for (b, &b2) in grid.iter().enumerate() {
            let w = (logpost[a * points + b] - best).exp();
            mass += w;
            m1 += w * b1;
            m2 += w * b2;
            s1 += w * b1 * b1;
            s2 += w * b2 * b2;
        }
    }
    let (m1, m2) = (m1 / mass, m2 / mass);
    [
        (m1, (s1 / mass - m1 * m1).sqrt()),
        (m2, (s2 / mass - m2 * m2).sqrt()),
    ]
}

/// The tiny posterior-oracle dataset: 4 users × 3 items, all cells observed, k = 3.
pub fn oracle_dataset() -> (RatingData, CovariateSet) {
    let x = DMatrix::from_column_slice(4, 1, &[0.8, -0.5, 1.2, -1.0]);
    let y = DMatrix::from_column_slice(3, 1, &[0.6, -1.1, 0.3]);
    let ratings = [[3, 1, 2], [1, 2, 2], [3, 2, 3], [2, 1, 1]];
    let mut obs = Vec::new();
    for (i, row) in ratings.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            obs.push(Observation::new(i, j, r));
        }
    }
    let data = RatingData::new(4, 3, 3, SupportBase::OneBased, obs).unwrap();
    (data, CovariateSet::new(x, y).unwrap())
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}
