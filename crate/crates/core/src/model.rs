//! Domain types and log-densities of the polynomial post-nonlinear mixing
//! model (PPNMM).
//!
//! A pixel `y` of `L` bands is modelled as
//!
//! ```text
//! y = g_b(M a) + n,    g_b(x) = x + b · (x ⊙ x),    n ~ N(0, σ² I_L)
//! ```
//!
//! where `M` is the `L × R` endmember matrix and `a` lies on the `R`-simplex.
//! The hierarchy places a symmetric Dirichlet(β) prior on `a`, a zero-mean
//! Gaussian with variance `σ_b²` on `b`, the Jeffreys prior `1/σ²` on the
//! noise variance and an Inverse-Gamma(γ, ν) hyperprior on `σ_b²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::{Gaussian, InverseGamma};

/// Abundance coordinates are kept at or above this floor; the sparse
/// Dirichlet density is unbounded at the boundary.
pub const ABUNDANCE_FLOOR: f64 = 1e-10;

/// Tolerance on `Σ a_r = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Dense `bands × endmembers` matrix, row-major (one row per band).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMatrix {
    bands: usize,
    endmembers: usize,
    data: Vec<f64>,
}

impl SpectralMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let bands = rows.len();
        if bands == 0 {
            return Err(Error::domain("spectral matrix needs at least one band"));
        }
        let endmembers = rows[0].len();
        if endmembers == 0 {
            return Err(Error::domain(
                "spectral matrix needs at least one endmember",
            ));
        }
        let mut data = Vec::with_capacity(bands * endmembers);
        for row in rows {
            if row.len() != endmembers {
                return Err(Error::DimensionMismatch {
                    context: "spectral matrix row",
                    expected: endmembers,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(bands, endmembers, data)
    }

    pub fn from_row_major(bands: usize, endmembers: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != bands * endmembers {
            return Err(Error::DimensionMismatch {
                context: "spectral matrix data",
                expected: bands * endmembers,
                found: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite matrix entry {v}")));
        }
        Ok(Self {
            bands,
            endmembers,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            bands: n,
            endmembers: n,
            data,
        }
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn endmembers(&self) -> usize {
        self.endmembers
    }

    pub fn get(&self, band: usize, endmember: usize) -> f64 {
        self.data[band * self.endmembers + endmember]
    }

    pub fn row(&self, band: usize) -> &[f64] {
        &self.data[band * self.endmembers..(band + 1) * self.endmembers]
    }

    pub fn column(&self, endmember: usize) -> Vec<f64> {
        (0..self.bands).map(|l| self.get(l, endmember)).collect()
    }

    /// `M a`.
    pub fn mix(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.endmembers {
            return Err(Error::DimensionMismatch {
                context: "abundance length vs library endmembers",
                expected: self.endmembers,
                found: a.len(),
            });
        }
        Ok(self
            .data
            .chunks_exact(self.endmembers)
            .map(|row| row.iter().zip(a).map(|(m, a)| m * a).sum())
            .collect())
    }

    /// Applies the same permutation to the rows (bands).
    pub fn permute_bands(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Self { data, ..*self }
    }
}

/// An endmember library: spectra of `R` pure materials sampled at `L` bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndmemberLibrary {
    wavelengths: Vec<f64>,
    spectra: SpectralMatrix,
    names: Vec<String>,
}

impl EndmemberLibrary {
    pub fn new(wavelengths: Vec<f64>, spectra: SpectralMatrix, names: Vec<String>) -> Result<Self> {
        if spectra.bands() < 2 {
            return Err(Error::domain("library needs at least 2 bands"));
        }
        if spectra.endmembers() < 2 {
            return Err(Error::domain("library needs at least 2 endmembers"));
        }
        if wavelengths.len() != spectra.bands() {
            return Err(Error::DimensionMismatch {
                context: "wavelengths vs spectral bands",
                expected: spectra.bands(),
                found: wavelengths.len(),
            });
        }
        if names.len() != spectra.endmembers() {
            return Err(Error::DimensionMismatch {
                context: "names vs endmember columns",
                expected: spectra.endmembers(),
                found: names.len(),
            });
        }
        if let Some(w) = wavelengths.iter().find(|w| !w.is_finite()) {
            return Err(Error::domain(format!("non-finite wavelength {w}")));
        }
        if let Some(i) = wavelengths.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!(
                "wavelengths not strictly increasing at band {}",
                i + 1
            )));
        }
        if let Some(v) = spectra.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("reflectance {v} outside [0, 1]")));
        }
        Ok(Self {
            wavelengths,
            spectra,
            names,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn spectra(&self) -> &SpectralMatrix {
        &self.spectra
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bands(&self) -> usize {
        self.spectra.bands()
    }

    pub fn endmembers(&self) -> usize {
        self.spectra.endmembers()
    }

    /// Library restricted to the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(self.bands() * columns.len());
        for l in 0..self.bands() {
            for &c in columns {
                data.push(self.spectra.get(l, c));
            }
        }
        let spectra = SpectralMatrix::from_row_major(self.bands(), columns.len(), data)?;
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        Self::new(self.wavelengths.clone(), spectra, names)
    }
}

impl AsRef<SpectralMatrix> for EndmemberLibrary {
    fn as_ref(&self) -> &SpectralMatrix {
        &self.spectra
    }
}

impl AsRef<SpectralMatrix> for SpectralMatrix {
    fn as_ref(&self) -> &SpectralMatrix {
        self
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AbundanceVector(Vec<f64>);

impl AbundanceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("abundance vector is empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::domain(format!("abundance a[{i}] = {v} is negative")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::domain(format!("abundances sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::domain("weights sum to zero"));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    /// The barycentre `(1/R, …, 1/R)`.
    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub(crate) fn from_raw_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every coordinate at or above [`ABUNDANCE_FLOOR`].
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v >= ABUNDANCE_FLOOR)
    }
}

impl std::ops::Index<usize> for AbundanceVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for AbundanceVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AbundanceVector> for Vec<f64> {
    fn from(a: AbundanceVector) -> Self {
        a.0
    }
}

/// The full unknown `θ = {a, b, σ², σ_b²}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: AbundanceVector,
    pub b: f64,
    pub sigma2: f64,
    pub sigma_b2: f64,
}

impl ModelParams {
    pub fn new(a: AbundanceVector, b: f64, sigma2: f64, sigma_b2: f64) -> Result<Self> {
        let params = Self {
            a,
            b,
            sigma2,
            sigma_b2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b.is_finite() {
            return Err(Error::domain(format!("b = {} is not finite", self.b)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::domain(format!(
                "sigma2 = {} must be positive",
                self.sigma2
            )));
        }
        if !(self.sigma_b2 > 0.0 && self.sigma_b2.is_finite()) {
            return Err(Error::domain(format!(
                "sigma_b2 = {} must be positive",
                self.sigma_b2
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of the abundance and nonlinearity priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparams {
    /// Symmetric Dirichlet concentration.
    pub beta: f64,
    /// Inverse-Gamma shape of the `σ_b²` hyperprior.
    pub gamma: f64,
    /// Inverse-Gamma scale of the `σ_b²` hyperprior.
    pub nu: f64,
}

impl PriorHyperparams {
    pub const SPARSE: Self = Self {
        beta: 0.5,
        gamma: 1.0,
        nu: 0.01,
    };

    /// The uniform-on-simplex baseline (β = 1).
    pub const UNIFORM: Self = Self {
        beta: 1.0,
        ..Self::SPARSE
    };

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("beta", self.beta), ("gamma", self.gamma), ("nu", self.nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(key, format!("{v} must be positive")));
            }
        }
        Ok(())
    }
}

impl Default for PriorHyperparams {
    fn default() -> Self {
        Self::SPARSE
    }
}

/// An observed pixel spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelObservation {
    pub y: Vec<f64>,
}

impl PixelObservation {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite reflectance {v}")));
        }
        Ok(Self { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub(crate) fn check_bands(&self, matrix: &SpectralMatrix) -> Result<()> {
        if self.y.len() != matrix.bands() {
            return Err(Error::DimensionMismatch {
                context: "pixel length vs library bands",
                expected: matrix.bands(),
                found: self.y.len(),
            });
        }
        Ok(())
    }
}

/// `h(a) = (M a) ⊙ (M a)`, the regressor of the nonlinearity coefficient.
pub fn nonlinear_term(m: &impl AsRef<SpectralMatrix>, a: &AbundanceVector) -> Result<Vec<f64>> {
    let x = m.as_ref().mix(a.as_slice())?;
    Ok(x.into_iter().map(|x| x * x).collect())
}

/// `g_b(M a) = M a + b · (M a) ⊙ (M a)`.
pub fn forward_ppnmm(
    m: &impl AsRef<SpectralMatrix>,
    a: &AbundanceVector,
    b: f64,
) -> Result<Vec<f64>> {
    let x = m.as_ref().mix(a.as_slice())?;
    Ok(x.into_iter().map(|x| x + b * (x * x)).collect())
}

/// `‖y − g_b(M a)‖²`.
pub fn residual_norm_sq(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    a: &AbundanceVector,
    b: f64,
) -> Result<f64> {
    let m = m.as_ref();
    y.check_bands(m)?;
    let fitted = forward_ppnmm(m, a, b)?;
    Ok(y.y.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum())
}

/// Gaussian log-likelihood `−(L/2) log(2πσ²) − ‖y − g_b(Ma)‖² / (2σ²)`.
pub fn log_likelihood(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    params: &ModelParams,
) -> Result<f64> {
    if params.sigma2.is_nan() || params.sigma2 <= 0.0 {
        return Err(Error::domain(format!(
            "sigma2 = {} must be positive",
            params.sigma2
        )));
    }
    let rss = residual_norm_sq(y, m, &params.a, params.b)?;
    let bands = y.len() as f64;
    Ok(
        -0.5 * bands * (2.0 * std::f64::consts::PI * params.sigma2).ln()
            - rss / (2.0 * params.sigma2),
    )
}

/// Symmetric Dirichlet(β) log-density, normalisation included.
pub fn log_dirichlet_prior(a: &AbundanceVector, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta = {beta} must be positive")));
    }
    let mut sum_log = 0.0;
    for (index, &value) in a.as_slice().iter().enumerate() {
        if value <= 0.0 {
            return Err(Error::Boundary { index, value });
        }
        sum_log += value.ln();
    }
    let dim = a.len() as f64;
    Ok(libm::lgamma(dim * beta) - dim * libm::lgamma(beta) + (beta - 1.0) * sum_log)
}

/// Unnormalised log posterior of `θ`: likelihood, Dirichlet prior on `a`,
/// Gaussian prior on `b`, Jeffreys prior on `σ²` and the Inverse-Gamma
/// hyperprior on `σ_b²`.
pub fn log_joint(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    params: &ModelParams,
    hyper: &PriorHyperparams,
) -> Result<f64> {
    params.validate()?;
    hyper.validate()?;
    let loglik = log_likelihood(y, m, params)?;
    let log_prior_a = log_dirichlet_prior(&params.a, hyper.beta)?;
    let log_prior_b = Gaussian::new(0.0, params.sigma_b2)?.log_pdf(params.b);
    let log_prior_sigma2 = -params.sigma2.ln();
    let log_prior_sigma_b2 = InverseGamma::new(hyper.gamma, hyper.nu)?.log_pdf(params.sigma_b2);
    Ok(loglik + log_prior_a + log_prior_b + log_prior_sigma2 + log_prior_sigma_b2)
}
