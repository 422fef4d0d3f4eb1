//! Metropolis-within-Gibbs sampler for the PPNMM posterior.
//!
//! Each sweep updates, in order:
//!
//! 1. the abundance vector, by one Metropolis scan on the simplex;
//! 2. `b`, drawn exactly from its Gaussian conditional;
//! 3. `σ²`, drawn exactly from its Inverse-Gamma conditional;
//! 4. `σ_b²`, drawn exactly from its Inverse-Gamma conditional.
//!
//! The abundance scan makes `R` proposals per sweep. Proposal `r` picks a
//! partner `j ≠ r` uniformly and shifts `δ ~ N(0, step²)` of mass from `a_j`
//! to `a_r`. The move is symmetric, so the acceptance ratio is the target
//! ratio alone, and a coordinate sitting at the boundary only blocks moves
//! that involve it. A single full-vector random walk does not have that
//! property: with several near-zero abundances almost every proposal leaves
//! the simplex and the adapted step collapses.
//!
//! During burn-in the step size is adapted toward a target acceptance rate
//! with a Robbins–Monro recursion on `log(step)`; it is frozen afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    nonlinear_term, residual_norm_sq, AbundanceVector, ModelParams, PixelObservation,
    PriorHyperparams, SpectralMatrix, ABUNDANCE_FLOOR,
};
use crate::random::{sample_uniform, Gaussian, InverseGamma, RngState};

/// Lower bound on the initial noise variance when the initial residual vanishes.
const MIN_INITIAL_SIGMA2: f64 = 1e-12;
/// Step sizes are clamped to this range during adaptation.
const STEP_BOUNDS: (f64, f64) = (1e-7, 1.0);
/// Exponent of the Robbins–Monro gain sequence `(t + 1)^{-κ}`.
const ADAPTATION_DECAY: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub hyper: PriorHyperparams,
    /// Initial standard deviation of the abundance random walk.
    pub proposal_step: f64,
    /// Adapt the step size toward `target_accept` during burn-in.
    pub adapt: bool,
    pub target_accept: f64,
    pub seed: u64,
    /// Drop the likelihood: the abundance step targets the Dirichlet prior
    /// alone and the `b` and `σ²` updates are skipped.
    pub prior_only: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            burn_in: 1_000,
            hyper: PriorHyperparams::SPARSE,
            proposal_step: 0.05,
            adapt: true,
            target_accept: 0.3,
            seed: 0,
            prior_only: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.n_iter == 0 {
            return Err(Error::invalid("n_iter", "must be at least 1"));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::invalid(
                "burn_in",
                format!(
                    "{} must be smaller than n_iter = {}",
                    self.burn_in, self.n_iter
                ),
            ));
        }
        if !(self.proposal_step > 0.0 && self.proposal_step.is_finite()) {
            return Err(Error::invalid(
                "proposal_step",
                format!("{} must be positive", self.proposal_step),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid(
                "target_accept",
                format!("{} must lie in (0, 1)", self.target_accept),
            ));
        }
        Ok(())
    }
}

/// Every post-sweep state of one run plus acceptance bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub samples: Vec<ModelParams>,
    pub accept_count_a: usize,
    pub proposal_count_a: usize,
    /// Step size in force at each iteration.
    pub step_sizes: Vec<f64>,
    pub final_step: f64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposal_count_a == 0 {
            0.0
        } else {
            self.accept_count_a as f64 / self.proposal_count_a as f64
        }
    }
}

/// Gaussian conditional of `b` given everything else.
pub fn b_conditional(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    a: &AbundanceVector,
    sigma2: f64,
    sigma_b2: f64,
) -> Result<Gaussian> {
    if !(sigma2 > 0.0 && sigma_b2 > 0.0) {
        return Err(Error::domain(format!(
            "b conditional needs positive variances (sigma2 = {sigma2}, sigma_b2 = {sigma_b2})"
        )));
    }
    let m = m.as_ref();
    y.check_bands(m)?;
    let linear = m.mix(a.as_slice())?;
    let h = nonlinear_term(m, a)?;
    let hh: f64 = h.iter().map(|v| v * v).sum();
    let rh: f64 =
        y.y.iter()
            .zip(&linear)
            .zip(&h)
            .map(|((y, x), h)| (y - x) * h)
            .sum();
    let denom = sigma_b2 * hh + sigma2;
    Gaussian::new(sigma_b2 * rh / denom, sigma_b2 * sigma2 / denom)
}

/// Inverse-Gamma conditional of the noise variance: `IG(L/2, ‖y − g_b(Ma)‖²/2)`.
pub fn sigma2_conditional(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    a: &AbundanceVector,
    b: f64,
) -> Result<InverseGamma> {
    let rss = residual_norm_sq(y, m, a, b)?;
    if rss <= 0.0 {
        return Err(Error::DegenerateResidual);
    }
    InverseGamma::new(y.len() as f64 / 2.0, rss / 2.0)
}

/// Inverse-Gamma conditional of the hyperparameter: `IG(1/2 + γ, b²/2 + ν)`.
pub fn sigma_b2_conditional(b: f64, hyper: &PriorHyperparams) -> Result<InverseGamma> {
    hyper.validate()?;
    InverseGamma::new(0.5 + hyper.gamma, b * b / 2.0 + hyper.nu)
}

pub fn sample_b_conditional(
    rng: &mut RngState,
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    a: &AbundanceVector,
    sigma2: f64,
    sigma_b2: f64,
) -> Result<f64> {
    Ok(b_conditional(y, m, a, sigma2, sigma_b2)?.sample(rng))
}

pub fn sample_sigma2_conditional(
    rng: &mut RngState,
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    a: &AbundanceVector,
    b: f64,
) -> Result<f64> {
    Ok(sigma2_conditional(y, m, a, b)?.sample(rng))
}

pub fn sample_sigma_b2_conditional(
    rng: &mut RngState,
    b: f64,
    hyper: &PriorHyperparams,
) -> Result<f64> {
    Ok(sigma_b2_conditional(b, hyper)?.sample(rng))
}

/// Log of the abundance conditional up to a constant:
/// `−‖y − g_b(Ma)‖²/(2σ²) + (β − 1) Σ log a_r`.
fn log_abundance_target(
    y: &PixelObservation,
    m: &SpectralMatrix,
    a: &AbundanceVector,
    params: &ModelParams,
    beta: f64,
    include_likelihood: bool,
) -> Result<f64> {
    let log_prior = (beta - 1.0) * a.as_slice().iter().map(|v| v.ln()).sum::<f64>();
    if !include_likelihood {
        return Ok(log_prior);
    }
    let rss = residual_norm_sq(y, m, a, params.b)?;
    Ok(log_prior - rss / (2.0 * params.sigma2))
}

/// Log Metropolis ratio for moving the abundances of `params` to `proposed`,
/// all other parameters held fixed. The proposal is symmetric, so this is
/// the log target ratio.
pub fn abundance_log_ratio(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    params: &ModelParams,
    hyper: &PriorHyperparams,
    proposed: &AbundanceVector,
) -> Result<f64> {
    let m = m.as_ref();
    let current = log_abundance_target(y, m, &params.a, params, hyper.beta, true)?;
    let next = log_abundance_target(y, m, proposed, params, hyper.beta, true)?;
    Ok(next - current)
}

/// Outcome of one abundance update.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceUpdate {
    pub a: AbundanceVector,
    /// Accepted transfer proposals.
    pub accepted: usize,
    /// Attempted transfer proposals (one per coordinate).
    pub proposed: usize,
}

impl AbundanceUpdate {
    pub fn any_accepted(&self) -> bool {
        self.accepted > 0
    }
}

/// Mass-transfer move: `δ ~ N(0, step²)` moves from coordinate `source` to
/// `target`. Symmetric, and the sum of the pair is preserved exactly.
/// Returns `None` when either coordinate would drop below the floor.
fn propose_transfer(a: &[f64], target: usize, source: usize, delta: f64) -> Option<(f64, f64)> {
    let pair = a[target] + a[source];
    let new_target = a[target] + delta;
    let new_source = pair - new_target;
    (new_target >= ABUNDANCE_FLOOR && new_source >= ABUNDANCE_FLOOR)
        .then_some((new_target, new_source))
}

/// One Metropolis scan over the abundances: for every coordinate `r` a
/// partner `j ≠ r` is drawn uniformly and a Gaussian amount of mass is
/// proposed to move from `j` to `r`. Each move is accepted with
/// probability `min(1, exp(Δ))`, `Δ` being the change in the log abundance
/// conditional; moves leaving the simplex are rejected outright.
#[allow(clippy::too_many_arguments)]
fn abundance_scan(
    rng: &mut RngState,
    y: &PixelObservation,
    m: &SpectralMatrix,
    params: &ModelParams,
    beta: f64,
    step: f64,
    include_likelihood: bool,
) -> Result<AbundanceUpdate> {
    let dim = params.a.len();
    let mut a = params.a.as_slice().to_vec();
    let mut mixed = m.mix(&a)?;
    let b = params.b;
    let fitted_residual = |x: &[f64]| -> f64 {
        y.y.iter()
            .zip(x)
            .map(|(y, x)| (y - x - b * x * x).powi(2))
            .sum()
    };
    let mut rss = if include_likelihood {
        fitted_residual(&mixed)
    } else {
        0.0
    };
    let unit = Gaussian {
        mean: 0.0,
        variance: 1.0,
    };
    let mut accepted = 0;
    let mut trial = vec![0.0; mixed.len()];

    for target in 0..dim {
        let offset = 1 + (sample_uniform(rng) * (dim - 1) as f64) as usize;
        let source = (target + offset.min(dim - 1)) % dim;
        let delta = step * unit.sample(rng);
        let Some((new_target, new_source)) = propose_transfer(&a, target, source, delta) else {
            continue;
        };
        let mut log_ratio =
            (beta - 1.0) * (new_target.ln() + new_source.ln() - a[target].ln() - a[source].ln());
        let mut trial_rss = 0.0;
        if include_likelihood {
            let (dt, ds) = (new_target - a[target], new_source - a[source]);
            for (l, t) in trial.iter_mut().enumerate() {
                let row = m.row(l);
                *t = mixed[l] + dt * row[target] + ds * row[source];
            }
            trial_rss = fitted_residual(&trial);
            log_ratio -= (trial_rss - rss) / (2.0 * params.sigma2);
        }
        if log_ratio >= 0.0 || sample_uniform(rng).ln() < log_ratio {
            a[target] = new_target;
            a[source] = new_source;
            if include_likelihood {
                std::mem::swap(&mut mixed, &mut trial);
                rss = trial_rss;
            }
            accepted += 1;
        }
    }
    Ok(AbundanceUpdate {
        a: AbundanceVector::from_raw_unchecked(a),
        accepted,
        proposed: dim,
    })
}

/// One Metropolis scan of the abundance vector targeting its full
/// conditional (see the module docs for the move set).
pub fn metropolis_step_abundance(
    rng: &mut RngState,
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    params: &ModelParams,
    hyper: &PriorHyperparams,
    step: f64,
) -> Result<AbundanceUpdate> {
    let m = m.as_ref();
    y.check_bands(m)?;
    if params.a.len() != m.endmembers() {
        return Err(Error::DimensionMismatch {
            context: "abundance length vs library endmembers",
            expected: m.endmembers(),
            found: params.a.len(),
        });
    }
    if !params.a.is_interior() {
        return Err(Error::domain(
            "abundance state must be strictly inside the simplex",
        ));
    }
    abundance_scan(rng, y, m, params, hyper.beta, step, true)
}

/// Deterministic starting point: barycentric abundances, `b = 0`,
/// `σ² = ‖y − Ma‖²/L`, `σ_b² = 1`.
pub fn initial_state(y: &PixelObservation, m: &impl AsRef<SpectralMatrix>) -> Result<ModelParams> {
    let m = m.as_ref();
    y.check_bands(m)?;
    let a = AbundanceVector::uniform(m.endmembers());
    let rss = residual_norm_sq(y, m, &a, 0.0)?;
    let sigma2 = (rss / y.len() as f64).max(MIN_INITIAL_SIGMA2);
    ModelParams::new(a, 0.0, sigma2, 1.0)
}

/// Runs `config.n_iter` sweeps from [`initial_state`] and records every state.
pub fn run_chain(
    y: &PixelObservation,
    m: &impl AsRef<SpectralMatrix>,
    config: &SamplerConfig,
) -> Result<Chain> {
    config.validate()?;
    let m = m.as_ref();
    let mut state = initial_state(y, m)?;
    let mut rng = RngState::new(config.seed);
    let hyper = config.hyper;
    let include_likelihood = !config.prior_only;

    let mut step = config.proposal_step;
    let mut samples = Vec::with_capacity(config.n_iter);
    let mut step_sizes = Vec::with_capacity(config.n_iter);
    let mut accepted_total = 0;
    let mut proposed_total = 0;

    for iteration in 0..config.n_iter {
        let wrap = |source: Error| Error::Sampler {
            iteration,
            source: Box::new(source),
        };
        step_sizes.push(step);

        let update = abundance_scan(&mut rng, y, m, &state, hyper.beta, step, include_likelihood)
            .map_err(wrap)?;
        accepted_total += update.accepted;
        proposed_total += update.proposed;
        let rate = update.accepted as f64 / update.proposed as f64;
        state.a = update.a;

        if include_likelihood {
            state.b = sample_b_conditional(&mut rng, y, m, &state.a, state.sigma2, state.sigma_b2)
                .map_err(wrap)?;
            state.sigma2 =
                sample_sigma2_conditional(&mut rng, y, m, &state.a, state.b).map_err(wrap)?;
        }
        state.sigma_b2 = sample_sigma_b2_conditional(&mut rng, state.b, &hyper).map_err(wrap)?;

        if config.adapt && iteration < config.burn_in {
            let gain = (iteration as f64 + 1.0).powf(-ADAPTATION_DECAY);
            let signal = rate - config.target_accept;
            step = (step.ln() + gain * signal)
                .exp()
                .clamp(STEP_BOUNDS.0, STEP_BOUNDS.1);
        }

        samples.push(state.clone());
    }

    Ok(Chain {
        samples,
        accept_count_a: accepted_total,
        proposal_count_a: proposed_total,
        step_sizes,
        final_step: step,
    })
}

/// Selects one scalar coordinate of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    /// Zero-based abundance index.
    Abundance(usize),
    B,
    Sigma2,
    SigmaB2,
}

impl Component {
    pub fn extract(&self, params: &ModelParams) -> Result<f64> {
        match *self {
            Component::Abundance(r) => params.a.as_slice().get(r).copied().ok_or_else(|| {
                Error::invalid("component", format!("abundance index {r} out of range"))
            }),
            Component::B => Ok(params.b),
            Component::Sigma2 => Ok(params.sigma2),
            Component::SigmaB2 => Ok(params.sigma_b2),
        }
    }

    /// Short label used in file names: `a1`, `b`, `sigma2`, `sigma_b2`.
    pub fn label(&self) -> String {
        match self {
            Component::Abundance(r) => format!("a{}", r + 1),
            Component::B => "b".into(),
            Component::Sigma2 => "sigma2".into(),
            Component::SigmaB2 => "sigma_b2".into(),
        }
    }
}

fn post_burn_in(chain: &Chain, burn_in: usize) -> Result<&[ModelParams]> {
    if burn_in >= chain.samples.len() {
        return Err(Error::invalid(
            "burn_in",
            format!(
                "{burn_in} leaves no samples in a chain of length {}",
                chain.samples.len()
            ),
        ));
    }
    Ok(&chain.samples[burn_in..])
}

/// Values of `component` for every sample with index `>= burn_in`.
pub fn component_values(chain: &Chain, component: Component, burn_in: usize) -> Result<Vec<f64>> {
    post_burn_in(chain, burn_in)?
        .iter()
        .map(|p| component.extract(p))
        .collect()
}

/// Componentwise average of the post-burn-in samples (MMSE estimate).
pub fn posterior_mean(chain: &Chain, burn_in: usize) -> Result<ModelParams> {
    let kept = post_burn_in(chain, burn_in)?;
    let n = kept.len() as f64;
    let dim = kept[0].a.len();
    let mut a = vec![0.0; dim];
    let (mut b, mut sigma2, mut sigma_b2) = (0.0, 0.0, 0.0);
    for p in kept {
        for (acc, v) in a.iter_mut().zip(p.a.as_slice()) {
            *acc += v;
        }
        b += p.b;
        sigma2 += p.sigma2;
        sigma_b2 += p.sigma_b2;
    }
    let a = AbundanceVector::normalized(a)?;
    ModelParams::new(a, b / n, sigma2 / n, sigma_b2 / n)
}

/// Posterior standard deviation (unbiased) of one component.
pub fn posterior_std(chain: &Chain, component: Component, burn_in: usize) -> Result<f64> {
    Ok(sample_std(&component_values(chain, component, burn_in)?))
}

pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Equal-width histogram; `edges.len() == counts.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins `values` over `[lo, hi]`; values outside are clamped into the
    /// end bins and `hi` itself lands in the last bin.
    pub fn over_range(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 1 {
            return Err(Error::invalid("bins", "must be at least 1"));
        }
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("range", format!("[{lo}, {hi}] is empty")));
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + i as f64 * width })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = ((v - lo) / width).floor();
            let idx = if idx < 0.0 {
                0
            } else {
                (idx as usize).min(bins - 1)
            };
            counts[idx] += 1;
        }
        Ok(Self { edges, counts })
    }

    /// Bins over the empirical range of `values` (widened by ±0.5 when all
    /// values coincide).
    pub fn over_data(values: &[f64], bins: usize) -> Result<Self> {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !lo.is_finite() {
            return Err(Error::invalid("values", "no finite values to bin"));
        }
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Self::over_range(values, lo, hi, bins)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count in bins lying entirely below `x`.
    pub fn mass_below(&self, x: f64) -> u64 {
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .filter(|(_, e)| e[1] <= x + 1e-12)
            .map(|(c, _)| *c)
            .sum()
    }
}

/// Histogram of one component over its post-burn-in samples. Abundances
/// are binned over `[0, 1]`, other components over their empirical range.
pub fn posterior_histogram(
    chain: &Chain,
    component: Component,
    burn_in: usize,
    bins: usize,
) -> Result<Histogram> {
    let values = component_values(chain, component, burn_in)?;
    match component {
        Component::Abundance(_) => Histogram::over_range(&values, 0.0, 1.0, bins),
        _ => Histogram::over_data(&values, bins),
    }
}
