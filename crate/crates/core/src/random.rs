//! Seeded random number generation and the distributions used by the
//! sampler.
//!
//! Gamma variates come from `rand_distr` (Marsaglia–Tsang, with the
//! `U^{1/α}` boost for shapes below one); everything else is built on top.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::AbundanceVector;

/// A seeded generator. Draw sequences are reproducible for a given seed.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Generator for run `index` of an experiment seeded with `self.seed()`:
    /// the seed is `seed + index` (wrapping).
    pub fn for_run(seed: u64, index: usize) -> Self {
        Self::new(seed.wrapping_add(index as u64))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

/// Normal distribution parameterised by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
            return Err(Error::domain(format!(
                "normal(mean = {mean}, variance = {variance}) is undefined"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = x - self.mean;
        -0.5 * (2.0 * std::f64::consts::PI * self.variance).ln() - z * z / (2.0 * self.variance)
    }

    pub fn sample(&self, rng: &mut RngState) -> f64 {
        let z: f64 = StandardNormal.sample(rng.inner());
        self.mean + self.variance.sqrt() * z
    }
}

/// Inverse-Gamma with density `∝ x^{−shape−1} exp(−scale / x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!(
                "inverse-gamma(shape = {shape}, scale = {scale}) is undefined"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln()
            - libm::lgamma(self.shape)
            - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    /// Population mean; infinite for `shape <= 1`.
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    /// `scale / G` with `G ~ Gamma(shape, 1)`.
    pub fn sample(&self, rng: &mut RngState) -> f64 {
        let gamma = Gamma::new(self.shape, 1.0).expect("validated in constructor");
        loop {
            let g: f64 = gamma.sample(rng.inner());
            let x = self.scale / g;
            // g underflows to 0 only for vanishing shapes
            if x.is_finite() && x > 0.0 {
                return x;
            }
        }
    }
}

pub fn sample_normal(rng: &mut RngState, mean: f64, variance: f64) -> Result<f64> {
    Ok(Gaussian::new(mean, variance)?.sample(rng))
}

pub fn sample_inverse_gamma(rng: &mut RngState, shape: f64, scale: f64) -> Result<f64> {
    Ok(InverseGamma::new(shape, scale)?.sample(rng))
}

/// Symmetric Dirichlet(β) draw on the `dim`-simplex via normalised gammas.
pub fn sample_dirichlet(rng: &mut RngState, beta: f64, dim: usize) -> Result<AbundanceVector> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!(
            "dirichlet concentration {beta} must be positive"
        )));
    }
    if dim < 2 {
        return Err(Error::domain(format!(
            "dirichlet dimension {dim} must be at least 2"
        )));
    }
    let gamma = Gamma::new(beta, 1.0).map_err(|e| Error::domain(e.to_string()))?;
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng.inner())).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            let mut a: Vec<f64> = draws.iter().map(|g| g / sum).collect();
            // absorb rounding into the largest coordinate
            let (imax, _) =
                a.iter().enumerate().fold(
                    (0, f64::MIN),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
            let rest: f64 = a
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != imax)
                .map(|(_, v)| v)
                .sum();
            a[imax] = 1.0 - rest;
            return AbundanceVector::new(a);
        }
    }
}

/// Uniform variate on `[0, 1)`.
pub fn sample_uniform(rng: &mut RngState) -> f64 {
    rng.inner().random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn normal_tiny_variance_hits_mean() {
        let mut rng = RngState::new(1);
        for _ in 0..100 {
            let x = sample_normal(&mut rng, 3.5, 1e-20).unwrap();
            assert!((x - 3.5).abs() < 1e-8);
        }
    }

    #[test]
    fn normal_standard_moments() {
        let mut rng = RngState::new(2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_normal(&mut rng, 0.0, 1.0).unwrap())
            .collect();
        let (mean, var) = moments(&xs);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn normal_rejects_bad_variance() {
        let mut rng = RngState::new(0);
        assert!(sample_normal(&mut rng, 0.0, 0.0).is_err());
        assert!(sample_normal(&mut rng, 0.0, -1.0).is_err());
    }

    #[test]
    fn inverse_gamma_mean_shape_two() {
        let mut rng = RngState::new(3);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_inverse_gamma(&mut rng, 2.0, 1.0).unwrap())
            .collect();
        let (mean, _) = moments(&xs);
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn inverse_gamma_mean_hyperparameter_conditional() {
        let mut rng = RngState::new(4);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_inverse_gamma(&mut rng, 1.5, 0.03).unwrap())
            .collect();
        let (mean, _) = moments(&xs);
        assert!((mean - 0.06).abs() < 0.006, "mean {mean}");
    }

    #[test]
    fn inverse_gamma_draws_positive() {
        let mut rng = RngState::new(5);
        let ig = InverseGamma::new(0.5, 0.01).unwrap();
        for _ in 0..1_000_000 {
            let x = ig.sample(&mut rng);
            assert!(x > 0.0 && x.is_finite());
        }
    }

    #[test]
    fn inverse_gamma_rejects_bad_parameters() {
        let mut rng = RngState::new(0);
        assert!(sample_inverse_gamma(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_inverse_gamma(&mut rng, 1.0, -1.0).is_err());
    }

    #[test]
    fn inverse_gamma_log_pdf_integrates_to_one() {
        // midpoint rule in log-space: ∫ f(x) dx = ∫ f(e^t) e^t dt
        let ig = InverseGamma::new(1.5, 0.03).unwrap();
        let (lo, hi, n) = (-20.0f64, 15.0f64, 200_000);
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let t = lo + (i as f64 + 0.5) * h;
                (ig.log_pdf(t.exp()) + t).exp() * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut rng = RngState::new(6);
        for _ in 0..10_000 {
            let a = sample_dirichlet(&mut rng, 0.5, 6).unwrap();
            let s: f64 = a.as_slice().iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(a.as_slice().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn dirichlet_moments() {
        let mut rng = RngState::new(7);
        let draws: Vec<AbundanceVector> = (0..100_000)
            .map(|_| sample_dirichlet(&mut rng, 0.5, 6).unwrap())
            .collect();
        let expected_var = (1.0 / 6.0) * (5.0 / 6.0) / (0.5 * 6.0 + 1.0);
        for r in 0..6 {
            let xs: Vec<f64> = draws.iter().map(|a| a[r]).collect();
            let (mean, var) = moments(&xs);
            assert!((mean - 1.0 / 6.0).abs() < 0.01, "mean {mean}");
            assert!((var / expected_var - 1.0).abs() < 0.15, "var {var}");
        }
    }

    #[test]
    fn dirichlet_rejects_bad_parameters() {
        let mut rng = RngState::new(0);
        assert!(sample_dirichlet(&mut rng, 0.0, 3).is_err());
        assert!(sample_dirichlet(&mut rng, 0.5, 1).is_err());
    }

    #[test]
    fn uniform_moments_and_range() {
        let mut rng = RngState::new(8);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_uniform(&mut rng)).collect();
        assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
        let (mean, var) = moments(&xs);
        assert!((mean - 0.5).abs() < 0.002);
        assert!((var - 1.0 / 12.0).abs() < 0.002);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        for _ in 0..1000 {
            assert_eq!(
                sample_uniform(&mut a).to_bits(),
                sample_uniform(&mut b).to_bits()
            );
            assert_eq!(
                sample_normal(&mut a, 0.0, 1.0).unwrap().to_bits(),
                sample_normal(&mut b, 0.0, 1.0).unwrap().to_bits()
            );
            assert_eq!(
                sample_inverse_gamma(&mut a, 1.5, 0.03).unwrap().to_bits(),
                sample_inverse_gamma(&mut b, 1.5, 0.03).unwrap().to_bits()
            );
            assert_eq!(
                sample_dirichlet(&mut a, 0.5, 4).unwrap(),
                sample_dirichlet(&mut b, 0.5, 4).unwrap()
            );
        }
    }

    #[test]
    fn run_streams_uncorrelated() {
        let mut a = RngState::for_run(2024, 0);
        let mut b = RngState::for_run(2024, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_normal(&mut a, 0.0, 1.0).unwrap())
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| sample_normal(&mut b, 0.0, 1.0).unwrap())
            .collect();
        let (mx, vx) = moments(&xs);
        let (my, vy) = moments(&ys);
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }
}
