//! Synthetic single-pixel experiments: pixel generation, abundance and
//! reconstruction error metrics, and the multi-run harness comparing the
//! sparse Dirichlet prior with the uniform baseline.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{
    component_values, posterior_mean, run_chain, sample_std, Chain, Component, Histogram,
    SamplerConfig,
};
use crate::library::bundled_library;
use crate::model::{
    forward_ppnmm, AbundanceVector, EndmemberLibrary, ModelParams, PixelObservation,
};
use crate::random::{Gaussian, RngState};

use rand::RngCore;

/// Number of bins used for pooled histograms.
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub library: EndmemberLibrary,
    pub true_a: AbundanceVector,
    pub true_b: f64,
    /// Standard deviation of the additive white Gaussian noise.
    pub noise_sigma: f64,
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            library: bundled_library(),
            true_a: AbundanceVector::new(vec![0.3, 0.7, 0.0, 0.0, 0.0, 0.0]).expect("on simplex"),
            true_b: 0.2,
            noise_sigma: 0.05,
            n_runs: 20,
            seed: 0,
        }
    }
}

impl SyntheticScenario {
    pub fn validate(&self) -> Result<()> {
        if self.true_a.len() != self.library.endmembers() {
            return Err(Error::invalid(
                "true_a",
                format!(
                    "has {} entries but the library has {} endmembers",
                    self.true_a.len(),
                    self.library.endmembers()
                ),
            ));
        }
        if !self.true_b.is_finite() {
            return Err(Error::invalid("true_b", "must be finite"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(
                "noise_sigma",
                format!("{} must be nonnegative", self.noise_sigma),
            ));
        }
        if self.n_runs < 1 {
            return Err(Error::invalid("n_runs", "must be at least 1"));
        }
        Ok(())
    }

    /// The noiseless mixture `g_b(M a)` at the true parameters.
    pub fn clean_spectrum(&self) -> Result<Vec<f64>> {
        forward_ppnmm(&self.library, &self.true_a, self.true_b)
    }
}

/// `g_b(M a) + n`, `n ~ N(0, noise_sigma² I)`.
pub fn generate_pixel(
    scenario: &SyntheticScenario,
    rng: &mut RngState,
) -> Result<PixelObservation> {
    let mut y = scenario.clean_spectrum()?;
    if scenario.noise_sigma > 0.0 {
        let noise = Gaussian::new(0.0, scenario.noise_sigma * scenario.noise_sigma)?;
        for v in &mut y {
            *v += noise.sample(rng);
        }
    }
    PixelObservation::new(y)
}

/// Mean squared abundance error `(1/P) Σ ‖â_p − a_p‖²`.
pub fn mse(estimates: &[AbundanceVector], truths: &[AbundanceVector]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::domain("mse needs at least one estimate"));
    }
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            context: "estimates vs truths",
            expected: truths.len(),
            found: estimates.len(),
        });
    }
    let mut total = 0.0;
    for (est, truth) in estimates.iter().zip(truths) {
        if est.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                context: "abundance dimension",
                expected: truth.len(),
                found: est.len(),
            });
        }
        total += est
            .as_slice()
            .iter()
            .zip(truth.as_slice())
            .map(|(e, t)| (e - t).powi(2))
            .sum::<f64>();
    }
    Ok(total / estimates.len() as f64)
}

/// Root-mean-square reconstruction error `√((1/PL) Σ ‖ŷ_p − y_p‖²)`.
pub fn re(reconstructions: &[Vec<f64>], observations: &[PixelObservation]) -> Result<f64> {
    if reconstructions.is_empty() {
        return Err(Error::domain("re needs at least one reconstruction"));
    }
    if reconstructions.len() != observations.len() {
        return Err(Error::DimensionMismatch {
            context: "reconstructions vs observations",
            expected: observations.len(),
            found: reconstructions.len(),
        });
    }
    let bands = observations[0].len();
    let mut total = 0.0;
    for (rec, obs) in reconstructions.iter().zip(observations) {
        if rec.len() != bands || obs.len() != bands {
            return Err(Error::DimensionMismatch {
                context: "band count",
                expected: bands,
                found: if rec.len() != bands {
                    rec.len()
                } else {
                    obs.len()
                },
            });
        }
        total += rec
            .iter()
            .zip(&obs.y)
            .map(|(r, y)| (r - y).powi(2))
            .sum::<f64>();
    }
    Ok((total / (reconstructions.len() * bands) as f64).sqrt())
}

/// Per-run record kept in an [`ExperimentResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub noise_seed: u64,
    pub chain_seed: u64,
    pub estimate: ModelParams,
    pub acceptance_rate: f64,
    pub final_step: f64,
}

/// Pooled posterior histogram of one component across all runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledHistogram {
    pub component: Component,
    pub label: String,
    pub histogram: Histogram,
    /// Standard deviation of the pooled post-burn-in samples.
    pub pooled_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub beta: f64,
    pub mse: f64,
    pub re: f64,
    pub per_run_estimates: Vec<ModelParams>,
    pub runs: Vec<RunSummary>,
    pub histograms: Vec<PooledHistogram>,
    /// Full chains, only when requested through [`ExperimentOptions`].
    #[serde(skip)]
    pub traces: Vec<Chain>,
}

impl ExperimentResult {
    pub fn histogram(&self, component: Component) -> Option<&PooledHistogram> {
        self.histograms.iter().find(|h| h.component == component)
    }

    /// Average of the per-run posterior means.
    pub fn mean_estimate(&self) -> Result<ModelParams> {
        let n = self.per_run_estimates.len() as f64;
        let dim = self.per_run_estimates[0].a.len();
        let mut a = vec![0.0; dim];
        let (mut b, mut s2, mut sb2) = (0.0, 0.0, 0.0);
        for p in &self.per_run_estimates {
            for (acc, v) in a.iter_mut().zip(p.a.as_slice()) {
                *acc += v / n;
            }
            b += p.b / n;
            s2 += p.sigma2 / n;
            sb2 += p.sigma_b2 / n;
        }
        ModelParams::new(AbundanceVector::normalized(a)?, b, s2, sb2)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExperimentOptions {
    /// Keep every run's full chain in [`ExperimentResult::traces`].
    pub keep_traces: bool,
    /// Worker threads for the runs; `None` uses all available cores.
    pub jobs: Option<usize>,
}

struct RunOutput {
    summary: RunSummary,
    observation: PixelObservation,
    chain: Chain,
}

fn run_once(scenario: &SyntheticScenario, config: &SamplerConfig, run: usize) -> Result<RunOutput> {
    let noise_seed = scenario.seed.wrapping_add(run as u64);
    let mut rng = RngState::new(noise_seed);
    let observation = generate_pixel(scenario, &mut rng)?;
    let chain_seed = rng.inner().next_u64();
    let run_config = SamplerConfig {
        seed: chain_seed,
        ..*config
    };
    let chain = run_chain(&observation, &scenario.library, &run_config)?;
    let estimate = posterior_mean(&chain, config.burn_in)?;
    Ok(RunOutput {
        summary: RunSummary {
            run,
            noise_seed,
            chain_seed,
            estimate,
            acceptance_rate: chain.acceptance_rate(),
            final_step: chain.final_step,
        },
        observation,
        chain,
    })
}

#[cfg(feature = "parallel")]
fn run_all(
    scenario: &SyntheticScenario,
    config: &SamplerConfig,
    jobs: Option<usize>,
) -> Vec<Result<RunOutput>> {
    use rayon::prelude::*;
    let work = || {
        (0..scenario.n_runs)
            .into_par_iter()
            .map(|run| run_once(scenario, config, run))
            .collect()
    };
    match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    scenario: &SyntheticScenario,
    config: &SamplerConfig,
    _jobs: Option<usize>,
) -> Vec<Result<RunOutput>> {
    (0..scenario.n_runs)
        .map(|run| run_once(scenario, config, run))
        .collect()
}

/// Runs the protocol with default options. `baseline` replaces β by 1.
pub fn run_experiment(
    scenario: &SyntheticScenario,
    config: &SamplerConfig,
    baseline: bool,
) -> Result<ExperimentResult> {
    run_experiment_with(scenario, config, baseline, ExperimentOptions::default())
}

/// For each run `p`: noise seeded by `scenario.seed + p`, chain seeded from
/// the next word of that same stream, so two experiments with equal
/// scenarios see identical pixels whatever their priors.
pub fn run_experiment_with(
    scenario: &SyntheticScenario,
    config: &SamplerConfig,
    baseline: bool,
    options: ExperimentOptions,
) -> Result<ExperimentResult> {
    scenario.validate()?;
    let mut config = *config;
    if baseline {
        config.hyper.beta = 1.0;
    }
    config.validate()?;

    let outputs = run_all(scenario, &config, options.jobs)
        .into_iter()
        .enumerate()
        .map(|(run, r)| {
            r.map_err(|e| Error::Run {
                run,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let estimates: Vec<AbundanceVector> = outputs
        .iter()
        .map(|o| o.summary.estimate.a.clone())
        .collect();
    let truths = vec![scenario.true_a.clone(); outputs.len()];
    let reconstructions = outputs
        .iter()
        .map(|o| {
            forward_ppnmm(
                &scenario.library,
                &o.summary.estimate.a,
                o.summary.estimate.b,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let observations: Vec<PixelObservation> =
        outputs.iter().map(|o| o.observation.clone()).collect();

    let mut components: Vec<Component> = (0..scenario.library.endmembers().min(3))
        .map(Component::Abundance)
        .collect();
    components.push(Component::B);
    let mut histograms = Vec::with_capacity(components.len());
    for component in components {
        let mut pooled = Vec::new();
        for o in &outputs {
            pooled.extend(component_values(&o.chain, component, config.burn_in)?);
        }
        let histogram = match component {
            Component::Abundance(_) => Histogram::over_range(&pooled, 0.0, 1.0, HISTOGRAM_BINS)?,
            _ => Histogram::over_data(&pooled, HISTOGRAM_BINS)?,
        };
        histograms.push(PooledHistogram {
            component,
            label: component.label(),
            pooled_std: sample_std(&pooled),
            histogram,
        });
    }

    let mse = mse(&estimates, &truths)?;
    let re = re(&reconstructions, &observations)?;
    let per_run_estimates = outputs.iter().map(|o| o.summary.estimate.clone()).collect();
    let (runs, traces): (Vec<RunSummary>, Vec<Chain>) =
        outputs.into_iter().map(|o| (o.summary, o.chain)).unzip();
    Ok(ExperimentResult {
        beta: config.hyper.beta,
        mse,
        re,
        per_run_estimates,
        runs,
        histograms,
        traces: if options.keep_traces {
            traces
        } else {
            Vec::new()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpectralMatrix;

    fn ab(v: &[f64]) -> AbundanceVector {
        AbundanceVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn noiseless_pixel_is_forward_model() {
        let scenario = SyntheticScenario {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let y = generate_pixel(&scenario, &mut RngState::new(1)).unwrap();
        assert_eq!(y.y, scenario.clean_spectrum().unwrap());
    }

    #[test]
    fn noise_variance_matches() {
        let scenario = SyntheticScenario::default();
        let clean = scenario.clean_spectrum().unwrap();
        let mut rng = RngState::new(2);
        let n = 10_000;
        let mut sum_sq = vec![0.0; clean.len()];
        for _ in 0..n {
            let y = generate_pixel(&scenario, &mut rng).unwrap();
            for ((s, y), c) in sum_sq.iter_mut().zip(&y.y).zip(&clean) {
                *s += (y - c).powi(2);
            }
        }
        let target = scenario.noise_sigma.powi(2);
        for s in sum_sq {
            assert!((s / n as f64 / target - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn zero_abundance_columns_do_not_matter() {
        let scenario = SyntheticScenario {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let lib = &scenario.library;
        let mut data = Vec::new();
        for l in 0..lib.bands() {
            let row = lib.spectra().row(l);
            data.extend_from_slice(&[row[0], row[1], 0.0, 0.0, 0.0, 0.0]);
        }
        let zeroed = EndmemberLibrary::new(
            lib.wavelengths().to_vec(),
            SpectralMatrix::from_row_major(lib.bands(), 6, data).unwrap(),
            lib.names().to_vec(),
        )
        .unwrap();
        let other = SyntheticScenario {
            library: zeroed,
            ..scenario.clone()
        };
        assert_eq!(
            generate_pixel(&scenario, &mut RngState::new(3)).unwrap(),
            generate_pixel(&other, &mut RngState::new(3)).unwrap()
        );
    }

    #[test]
    fn mse_examples() {
        let t = ab(&[0.3, 0.7, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            mse(std::slice::from_ref(&t), std::slice::from_ref(&t)).unwrap(),
            0.0
        );
        let e = AbundanceVector::from_raw_unchecked(vec![0.31, 0.69, 0.0, 0.0, 0.0, 0.0]);
        assert!((mse(&[e], std::slice::from_ref(&t)).unwrap() - 2e-4).abs() < 1e-15);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(std::slice::from_ref(&t), &[t.clone(), t.clone()]).is_err());
        assert!(mse(&[ab(&[0.5, 0.5])], &[t]).is_err());
    }

    #[test]
    fn re_examples() {
        let obs = PixelObservation::new(vec![0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(
            re(std::slice::from_ref(&obs.y), std::slice::from_ref(&obs)).unwrap(),
            0.0
        );
        let rec: Vec<f64> = obs.y.iter().map(|v| v + 0.1).collect();
        assert!((re(&[rec], std::slice::from_ref(&obs)).unwrap() - 0.1).abs() < 1e-15);
        assert!(re(&[], &[]).is_err());
        assert!(re(&[vec![0.1; 3]], &[obs]).is_err());
    }

    #[test]
    fn re_zero_on_noiseless_truth() {
        let scenario = SyntheticScenario {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let y = generate_pixel(&scenario, &mut RngState::new(0)).unwrap();
        let rec = forward_ppnmm(&scenario.library, &scenario.true_a, scenario.true_b).unwrap();
        assert!(re(&[rec], &[y]).unwrap() < 1e-12);
    }

    #[test]
    fn prior_only_wiring() {
        // with the likelihood removed, the chain samples the Dirichlet prior,
        // whose mean is the barycentre
        let scenario = SyntheticScenario {
            noise_sigma: 0.0,
            n_runs: 1,
            ..Default::default()
        };
        let config = SamplerConfig {
            n_iter: 400,
            burn_in: 100,
            prior_only: true,
            ..Default::default()
        };
        let result = run_experiment(&scenario, &config, false).unwrap();
        let est = &result.per_run_estimates[0];
        let expected: f64 = est
            .a
            .as_slice()
            .iter()
            .zip(scenario.true_a.as_slice())
            .map(|(e, t)| (e - t).powi(2))
            .sum();
        assert_eq!(result.mse, expected);
        assert_eq!(result.per_run_estimates.len(), 1);
        assert_eq!(result.runs[0].noise_seed, scenario.seed);
    }

    #[test]
    fn baseline_flag_sets_beta() {
        let scenario = SyntheticScenario {
            n_runs: 2,
            ..Default::default()
        };
        let config = SamplerConfig {
            n_iter: 200,
            burn_in: 50,
            ..Default::default()
        };
        let sdp = run_experiment(&scenario, &config, false).unwrap();
        let base = run_experiment(&scenario, &config, true).unwrap();
        assert_eq!(sdp.beta, 0.5);
        assert_eq!(base.beta, 1.0);
        // paired seeds: identical noise and chain seeds
        for (s, b) in sdp.runs.iter().zip(&base.runs) {
            assert_eq!(s.noise_seed, b.noise_seed);
            assert_eq!(s.chain_seed, b.chain_seed);
        }
        assert_eq!(sdp.histograms.len(), 4);
        let total = sdp
            .histogram(Component::Abundance(2))
            .unwrap()
            .histogram
            .total();
        assert_eq!(total, 2 * 150);
    }

    #[test]
    fn scenario_validation() {
        let bad = SyntheticScenario {
            true_a: ab(&[0.5, 0.5]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SyntheticScenario {
            n_runs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SyntheticScenario {
            noise_sigma: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
