//! Random variates and densities used by the sampler.
//!
//! * Pólya-Gamma `PG(b, c)` for integer `b`, drawn as a sum of `b` exact
//!   `PG(1, c)` variates (Devroye-type alternating-series rejection sampler).
//! * Multivariate normal parameterized by precision and linear term.
//! * Inverse-gamma with shape/scale parameterization.
//! * The shifted binomial rating law on `{1..k}` (or `{0..k}`).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;

// ---------------------------------------------------------------------------
// Pólya-Gamma
// ---------------------------------------------------------------------------

/// Truncation point between the exponential and inverse-Gaussian proposal pieces.
const PG_TRUNC: f64 = 0.64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaGammaParams {
    shape: u32,
    tilt: f64,
}

impl PolyaGammaParams {
    pub fn new(shape: u32, tilt: f64) -> Result<Self> {
        if shape < 1 {
            return Err(Error::InvalidParameter(format!(
                "polya-gamma shape must be >= 1, got {shape}"
            )));
        }
        if !tilt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "polya-gamma tilt must be finite, got {tilt}"
            )));
        }
        Ok(Self { shape, tilt })
    }

    pub fn shape(&self) -> u32 {
        self.shape
    }

    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    /// `E[PG(b, c)] = b/(2c) tanh(c/2)`, with limit `b/4` at `c = 0`.
    pub fn mean(&self) -> f64 {
        pg_mean(self.shape as f64, self.tilt)
    }
}

pub fn pg_mean(shape: f64, tilt: f64) -> f64 {
    let c = tilt.abs();
    if c < 1e-8 {
        shape / 4.0
    } else {
        shape / (2.0 * c) * (0.5 * c).tanh()
    }
}

impl Distribution<f64> for PolyaGammaParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (0..self.shape).map(|_| sample_pg1(self.tilt, rng)).sum()
    }
}

pub fn sample_pg<R: Rng + ?Sized>(params: PolyaGammaParams, rng: &mut R) -> f64 {
    params.sample(rng)
}

/// One exact draw from `PG(1, c)`.
pub fn sample_pg1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    // Work with J*(1, z) where PG(1, c) = J*(1, c/2) / 4.
    let z = 0.5 * c.abs();
    let rate = 0.125 * PI * PI + 0.5 * z * z;
    let p_exp = mass_truncated_exponential(z, rate);

    loop {
        let x = if rng.random::<f64>() < p_exp {
            let e: f64 = Exp1.sample(rng);
            PG_TRUNC + e / rate
        } else {
            truncated_inverse_gaussian(z, rng)
        };

        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Probability of proposing from the exponential tail, `p / (p + q)`.
fn mass_truncated_exponential(z: f64, rate: f64) -> f64 {
    let t = PG_TRUNC;
    let b = (1.0 / t).sqrt() * (t * z - 1.0);
    let a = -(1.0 / t).sqrt() * (t * z + 1.0);
    let x0 = rate.ln() + rate * t;
    let xb = x0 - z + log_normal_cdf(b);
    let xa = x0 + z + log_normal_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Coefficients of the alternating series for the J*(1, 0) density.
fn series_coef(n: u32, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > PG_TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// Inverse-Gaussian `IG(1/z, 1)` truncated to `(0, PG_TRUNC)`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = PG_TRUNC;
    if z < 1.0 / t {
        // mean above the truncation point: proposal from the z = 0 (Lévy) case
        loop {
            let x = loop {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / t {
                    let d = 1.0 + e1 * t;
                    break t / (d * d);
                }
            };
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let n: f64 = StandardNormal.sample(rng);
            let y = n * n;
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

fn log_normal_cdf(x: f64) -> f64 {
    (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Multivariate normal from precision
// ---------------------------------------------------------------------------

/// `N(P⁻¹ ℓ, P⁻¹)` held as a Cholesky factor of `P` and the mean.
#[derive(Debug, Clone)]
pub struct PrecisionNormal {
    factor: CholeskyFactor,
    mean: DVector<f64>,
}

impl PrecisionNormal {
    pub fn new(precision: &DMatrix<f64>, linear_term: &DVector<f64>) -> Result<Self> {
        if precision.nrows() != linear_term.len() {
            return Err(Error::DimensionMismatch(format!(
                "precision is {}x{} but linear term has length {}",
                precision.nrows(),
                precision.ncols(),
                linear_term.len()
            )));
        }
        let factor = CholeskyFactor::new(precision)?;
        let mean = factor.solve(linear_term);
        Ok(Self { factor, mean })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.mean.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        // Lᵀ x = z gives Cov(x) = (L Lᵀ)⁻¹
        self.factor.solve_upper(&z) + &self.mean
    }
}

pub fn sample_mvn_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear_term: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(PrecisionNormal::new(precision, linear_term)?.sample(rng))
}

// ---------------------------------------------------------------------------
// Inverse gamma
// ---------------------------------------------------------------------------

/// Draws from the inverse-gamma law with density `∝ x^{-shape-1} exp(-scale/x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "inverse-gamma needs positive finite shape and scale, got ({shape}, {scale})"
        )));
    }
    let g: f64 = Gamma::new(shape, 1.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng);
    // g can round to zero for tiny shapes; keep the draw finite and positive
    Ok(scale / g.max(f64::MIN_POSITIVE))
}

// ---------------------------------------------------------------------------
// Shifted binomial
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SupportBase {
    /// Ratings in `{1, ..., k}`, `k - 1` binomial trials.
    #[default]
    OneBased,
    /// Ratings in `{0, ..., k}`, `k` binomial trials.
    ZeroBased,
}

impl SupportBase {
    pub fn offset(self) -> i64 {
        match self {
            SupportBase::OneBased => 1,
            SupportBase::ZeroBased => 0,
        }
    }

    pub fn trials(self, k: u32) -> u32 {
        match self {
            SupportBase::OneBased => k.saturating_sub(1),
            SupportBase::ZeroBased => k,
        }
    }

    pub fn min_k(self) -> u32 {
        match self {
            SupportBase::OneBased => 2,
            SupportBase::ZeroBased => 1,
        }
    }

    /// Lowest and highest rating for a scale with `k` categories.
    pub fn bounds(self, k: u32) -> (i64, i64) {
        let lo = self.offset();
        (lo, lo + self.trials(k) as i64)
    }

    pub fn validate_k(self, k: u32) -> Result<()> {
        if k < self.min_k() {
            return Err(Error::InvalidParameter(format!(
                "rating scale k must be >= {} for {:?} support, got {k}",
                self.min_k(),
                self
            )));
        }
        Ok(())
    }

    /// Number of binomial successes encoded by rating `r`; errors outside support.
    pub fn successes(self, r: i64, k: u32) -> Result<u32> {
        let (lo, hi) = self.bounds(k);
        if r < lo || r > hi {
            return Err(Error::OutsideSupport {
                rating: r,
                min: lo,
                max: hi,
            });
        }
        Ok((r - lo) as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedBinomialParams {
    k: u32,
    p: f64,
    support_base: SupportBase,
}

impl ShiftedBinomialParams {
    pub fn new(k: u32, p: f64, support_base: SupportBase) -> Result<Self> {
        support_base.validate_k(k)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "success probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self { k, p, support_base })
    }

    pub fn one_based(k: u32, p: f64) -> Result<Self> {
        Self::new(k, p, SupportBase::OneBased)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn support_base(&self) -> SupportBase {
        self.support_base
    }

    pub fn trials(&self) -> u32 {
        self.support_base.trials(self.k)
    }

    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        let (lo, hi) = self.support_base.bounds(self.k);
        lo..=hi
    }

    pub fn mean(&self) -> f64 {
        self.support_base.offset() as f64 + self.trials() as f64 * self.p
    }
}

pub fn shifted_binomial_pmf(r: i64, params: &ShiftedBinomialParams) -> Result<f64> {
    let s = params.support_base.successes(r, params.k)?;
    Ok(binomial_pmf(s, params.trials(), params.p))
}

/// Binomial pmf evaluated in log space, exact at the degenerate `p ∈ {0, 1}`.
pub(crate) fn binomial_pmf(s: u32, n: u32, p: f64) -> f64 {
    if p <= 0.0 {
        return if s == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if s == n { 1.0 } else { 0.0 };
    }
    let lp = ln_binomial(n as u64, s as u64) + s as f64 * p.ln() + (n - s) as f64 * (-p).ln_1p();
    lp.exp()
}

/// `log P(s | n, logistic(eta))`, stable for large `|eta|`.
pub(crate) fn binomial_log_pmf_logit(s: u32, n: u32, eta: f64) -> f64 {
    ln_binomial(n as u64, s as u64) + s as f64 * eta - n as f64 * softplus(eta)
}

/// `log(1 + e^x)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn shifted_binomial_sample<R: Rng + ?Sized>(params: &ShiftedBinomialParams, rng: &mut R) -> i64 {
    let n = params.trials() as u64;
    let s = if params.p <= 0.0 {
        0
    } else if params.p >= 1.0 {
        n
    } else {
        Binomial::new(n, params.p)
            .expect("validated binomial parameters")
            .sample(rng)
    };
    params.support_base.offset() + s as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    /// `E[PG(b, c)]` from the truncated gamma-series representation with
    /// exponential tilting: `E = (1/2π²) Σ b / ((s-1/2)² + c²/(4π²))`.
    fn series_mean(b: f64, c: f64, terms: usize) -> f64 {
        let mut acc = 0.0;
        for s in 1..=terms {
            let h = s as f64 - 0.5;
            acc += b / (h * h + c * c / (4.0 * PI * PI));
        }
        acc / (2.0 * PI * PI)
    }

    #[test]
    fn analytic_mean_agrees_with_series_oracle() {
        for &(b, c) in &[(1.0, 0.0), (4.0, 2.0), (9.0, 0.5)] {
            // 200-term truncation leaves a tail of roughly b / (2π² · 200)
            let tail = b / (2.0 * PI * PI * 200.0);
            assert!((series_mean(b, c, 200) - pg_mean(b, c)).abs() < 1.5 * tail);
        }
    }

    #[test]
    fn pg_1_0_mean() {
        let mut r = rng::from_seed(11);
        let p = PolyaGammaParams::new(1, 0.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_pg(p, &mut r)).collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 0.25).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn pg_4_2_mean() {
        let mut r = rng::from_seed(12);
        let p = PolyaGammaParams::new(4, 2.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_pg(p, &mut r)).collect();
        let (m, se) = mean_and_se(&xs);
        let expected = 1.0f64.tanh();
        assert!((expected - 0.7616).abs() < 1e-4);
        assert!((m - expected).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn pg_tilt_sign_symmetry() {
        // two-sample Kolmogorov-Smirnov at alpha = 0.01
        let mut r1 = rng::from_seed(21);
        let mut r2 = rng::from_seed(22);
        let n = 10_000;
        let mut a: Vec<f64> = (0..n)
            .map(|_| sample_pg(PolyaGammaParams::new(3, 1.5).unwrap(), &mut r1))
            .collect();
        let mut b: Vec<f64> = (0..n)
            .map(|_| sample_pg(PolyaGammaParams::new(3, -1.5).unwrap(), &mut r2))
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        let crit = 1.628 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "ks statistic {d} >= {crit}");
    }

    #[test]
    fn pg_rejects_zero_shape() {
        assert!(PolyaGammaParams::new(0, 1.0).is_err());
        assert!(PolyaGammaParams::new(1, f64::NAN).is_err());
    }

    #[test]
    fn pg_large_tilt_stays_finite() {
        let mut r = rng::from_seed(5);
        for &c in &[25.0, -60.0, 300.0] {
            let x = sample_pg(PolyaGammaParams::new(4, c).unwrap(), &mut r);
            assert!(x.is_finite() && x > 0.0);
        }
    }

    #[test]
    fn mvn_standard_case() {
        let mut r = rng::from_seed(3);
        let prec = DMatrix::<f64>::identity(2, 2);
        let lin = DVector::zeros(2);
        let dist = PrecisionNormal::new(&prec, &lin).unwrap();
        let n = 100_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| dist.sample(&mut r)).collect();
        let cov = empirical_cov(&draws);
        for d in 0..2 {
            let col: Vec<f64> = draws.iter().map(|x| x[d]).collect();
            let (m, se) = mean_and_se(&col);
            assert!(m.abs() < 3.0 * se);
        }
        assert!((cov - DMatrix::identity(2, 2)).norm() < 0.03);
    }

    #[test]
    fn mvn_diagonal_precision() {
        let mut r = rng::from_seed(4);
        let prec = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 4.0]));
        let lin = DVector::from_vec(vec![8.0, 0.0]);
        let dist = PrecisionNormal::new(&prec, &lin).unwrap();
        assert!((dist.mean() - DVector::from_vec(vec![2.0, 0.0])).norm() < 1e-14);
        let draws: Vec<DVector<f64>> = (0..100_000).map(|_| dist.sample(&mut r)).collect();
        let cov = empirical_cov(&draws);
        for d in 0..2 {
            let col: Vec<f64> = draws.iter().map(|x| x[d]).collect();
            let (m, se) = mean_and_se(&col);
            assert!((m - [2.0, 0.0][d]).abs() < 3.0 * se);
            assert!((cov[(d, d)] - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn mvn_singular_precision_fails() {
        let prec = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = PrecisionNormal::new(&prec, &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { minor: 2 }));
    }

    fn empirical_cov(draws: &[DVector<f64>]) -> DMatrix<f64> {
        let d = draws[0].len();
        let n = draws.len() as f64;
        let mean = draws.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n;
        let mut cov = DMatrix::zeros(d, d);
        for x in draws {
            let c = x - &mean;
            cov += &c * c.transpose();
        }
        cov / (n - 1.0)
    }

    #[test]
    fn mvn_random_spd_covariance() {
        let mut r = rng::from_seed(17);
        for dim in 1..=5 {
            let a: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut r));
            let prec = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
            let dist = PrecisionNormal::new(&prec, &DVector::zeros(dim)).unwrap();
            let draws: Vec<DVector<f64>> = (0..100_000).map(|_| dist.sample(&mut r)).collect();
            let target = prec.clone().try_inverse().unwrap();
            let err = (empirical_cov(&draws) - target).norm();
            assert!(err < 0.05, "dim {dim}: frobenius error {err}");
        }
    }

    #[test]
    fn inverse_gamma_means() {
        let mut r = rng::from_seed(8);
        for &(shape, scale) in &[(3.0, 2.0), (10.0, 9.0)] {
            let xs: Vec<f64> = (0..100_000)
                .map(|_| sample_inverse_gamma(shape, scale, &mut r).unwrap())
                .collect();
            let (m, se) = mean_and_se(&xs);
            assert!((m - 1.0).abs() < 3.0 * se, "IG({shape},{scale}) mean {m}");
        }
        for _ in 0..10_000 {
            assert!(sample_inverse_gamma(1.0, 1.0, &mut r).unwrap() > 0.0);
        }
        assert!(sample_inverse_gamma(0.0, 1.0, &mut r).is_err());
        assert!(sample_inverse_gamma(1.0, -1.0, &mut r).is_err());
    }

    #[test]
    fn pmf_examples() {
        let p = ShiftedBinomialParams::one_based(5, 0.5).unwrap();
        assert!((shifted_binomial_pmf(3, &p).unwrap() - 0.375).abs() < 1e-14);
        let p0 = ShiftedBinomialParams::one_based(5, 0.0).unwrap();
        assert_eq!(shifted_binomial_pmf(1, &p0).unwrap(), 1.0);
        let p1 = ShiftedBinomialParams::one_based(7, 1.0).unwrap();
        assert_eq!(shifted_binomial_pmf(7, &p1).unwrap(), 1.0);
        assert!(matches!(
            shifted_binomial_pmf(0, &p),
            Err(Error::OutsideSupport { .. })
        ));
        assert!(shifted_binomial_pmf(6, &p).is_err());
        assert!(ShiftedBinomialParams::one_based(1, 0.5).is_err());
        assert!(ShiftedBinomialParams::one_based(5, 1.5).is_err());
    }

    #[test]
    fn pmf_sums_to_one_and_mean_identity() {
        for k in 2..=50u32 {
            for step in 0..=100 {
                let p = step as f64 / 100.0;
                let params = ShiftedBinomialParams::one_based(k, p).unwrap();
                let (mut total, mut mean) = (0.0, 0.0);
                for r in params.support() {
                    let v = shifted_binomial_pmf(r, &params).unwrap();
                    total += v;
                    mean += r as f64 * v;
                }
                assert!((total - 1.0).abs() < 1e-12, "k={k} p={p} total={total}");
                assert!((mean - (1.0 + (k - 1) as f64 * p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_degenerate_and_bernoulli() {
        let mut r = rng::from_seed(1);
        let p0 = ShiftedBinomialParams::one_based(5, 0.0).unwrap();
        assert!((0..1000).all(|_| shifted_binomial_sample(&p0, &mut r) == 1));

        let pb = ShiftedBinomialParams::one_based(2, 0.3).unwrap();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| shifted_binomial_sample(&pb, &mut r) == 2)
            .count() as f64;
        let phat = hits / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((phat - 0.3).abs() < 3.0 * se);
    }

    #[test]
    fn sample_chi_square_k5() {
        let mut r = rng::from_seed(2);
        let params = ShiftedBinomialParams::one_based(5, 0.5).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[(shifted_binomial_sample(&params, &mut r) - 1) as usize] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let e = n as f64 * shifted_binomial_pmf(i as i64 + 1, &params).unwrap();
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // chi-square(4) upper 1% point
        assert!(chi2 < 13.277, "chi2 = {chi2}");
    }

    #[test]
    fn zero_based_support() {
        let params = ShiftedBinomialParams::new(4, 0.5, SupportBase::ZeroBased).unwrap();
        assert_eq!(params.support(), 0..=4);
        assert!((shifted_binomial_pmf(2, &params).unwrap() - 0.375).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn samplers_are_seed_deterministic(seed in any::<u64>(), c in -5.0f64..5.0) {
            let p = PolyaGammaParams::new(3, c).unwrap();
            let mut a = rng::from_seed(seed);
            let mut b = rng::from_seed(seed);
            for _ in 0..20 {
                prop_assert_eq!(sample_pg(p, &mut a).to_bits(), sample_pg(p, &mut b).to_bits());
            }
            prop_assert_eq!(
                sample_inverse_gamma(2.0, 1.0, &mut a).unwrap().to_bits(),
                sample_inverse_gamma(2.0, 1.0, &mut b).unwrap().to_bits()
            );
        }

        #[test]
        fn logit_log_pmf_matches_probability_form(s in 0u32..=9, eta in -10.0f64..10.0) {
            let p = 1.0 / (1.0 + (-eta).exp());
            let direct = binomial_pmf(s, 9, p).ln();
            prop_assert!((binomial_log_pmf_logit(s, 9, eta) - direct).abs() < 1e-8);
        }
    }
}
