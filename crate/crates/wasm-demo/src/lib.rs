//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws on a
//! canvas. The plain `*_json` functions hold the logic so they can be
//! tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ppnmm_core::experiment::{generate_pixel, SyntheticScenario};
use ppnmm_core::gibbs::{posterior_histogram, posterior_mean, run_chain, Component, SamplerConfig};
use ppnmm_core::library::bundled_library;
use ppnmm_core::model::forward_ppnmm;
use ppnmm_core::random::{sample_dirichlet, RngState};
use ppnmm_core::{AbundanceVector, PriorHyperparams};

const MAX_DIRICHLET_DRAWS: usize = 20_000;
const MAX_ITERATIONS: usize = 20_000;
const BINS: usize = 40;

#[derive(Serialize)]
struct Spectrum {
    wavelengths: Vec<f64>,
    names: Vec<String>,
    endmembers: Vec<Vec<f64>>,
    linear: Vec<f64>,
    mixed: Vec<f64>,
}

#[derive(Serialize)]
struct DirichletCloud {
    beta: f64,
    points: Vec<[f64; 3]>,
    /// Histogram of the first coordinate over [0, 1].
    counts: Vec<u64>,
}

#[derive(Serialize)]
struct HistogramOut {
    label: String,
    edges: Vec<f64>,
    counts: Vec<u64>,
}

#[derive(Serialize)]
struct UnmixOut {
    names: Vec<String>,
    wavelengths: Vec<f64>,
    observed: Vec<f64>,
    fitted: Vec<f64>,
    mean_a: Vec<f64>,
    mean_b: f64,
    acceptance_rate: f64,
    histograms: Vec<HistogramOut>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn abundances(weights: &[f64]) -> Result<AbundanceVector, String> {
    AbundanceVector::normalized(weights.to_vec()).map_err(|e| e.to_string())
}

/// Linear and nonlinear mixtures of the bundled library for the given
/// (unnormalized, nonnegative) weights.
pub fn forward_json(weights: &[f64], b: f64) -> Result<String, String> {
    let lib = bundled_library();
    let a = abundances(weights)?;
    let linear = forward_ppnmm(&lib, &a, 0.0).map_err(|e| e.to_string())?;
    let mixed = forward_ppnmm(&lib, &a, b).map_err(|e| e.to_string())?;
    let endmembers = (0..lib.endmembers())
        .map(|r| lib.spectra().column(r))
        .collect();
    to_json(&Spectrum {
        wavelengths: lib.wavelengths().to_vec(),
        names: lib.names().to_vec(),
        endmembers,
        linear,
        mixed,
    })
}

/// `n` draws from the symmetric Dirichlet(β) on the 3-simplex.
pub fn dirichlet_json(beta: f64, n: usize, seed: u64) -> Result<String, String> {
    let n = n.min(MAX_DIRICHLET_DRAWS);
    let mut rng = RngState::new(seed);
    let mut points = Vec::with_capacity(n);
    let mut counts = vec![0u64; BINS];
    for _ in 0..n {
        let a = sample_dirichlet(&mut rng, beta, 3).map_err(|e| e.to_string())?;
        let p = [a[0], a[1], a[2]];
        counts[((p[0] * BINS as f64) as usize).min(BINS - 1)] += 1;
        points.push(p);
    }
    to_json(&DirichletCloud {
        beta,
        points,
        counts,
    })
}

/// Synthesizes a pixel from the bundled library and unmixes it.
pub fn unmix_json(
    weights: &[f64],
    b: f64,
    noise_sigma: f64,
    beta: f64,
    n_iter: usize,
    seed: u64,
) -> Result<String, String> {
    let lib = bundled_library();
    let scenario = SyntheticScenario {
        true_a: abundances(weights)?,
        true_b: b,
        noise_sigma,
        n_runs: 1,
        seed,
        library: lib.clone(),
    };
    scenario.validate().map_err(|e| e.to_string())?;
    let n_iter = n_iter.clamp(10, MAX_ITERATIONS);
    let config = SamplerConfig {
        n_iter,
        burn_in: n_iter / 5,
        hyper: PriorHyperparams {
            beta,
            ..PriorHyperparams::SPARSE
        },
        seed,
        ..Default::default()
    };
    let pixel = generate_pixel(&scenario, &mut RngState::new(seed)).map_err(|e| e.to_string())?;
    let chain = run_chain(&pixel, &lib, &config).map_err(|e| e.to_string())?;
    let mean = posterior_mean(&chain, config.burn_in).map_err(|e| e.to_string())?;
    let fitted = forward_ppnmm(&lib, &mean.a, mean.b).map_err(|e| e.to_string())?;

    let mut components: Vec<Component> = (0..lib.endmembers()).map(Component::Abundance).collect();
    components.push(Component::B);
    let histograms = components
        .into_iter()
        .map(|c| {
            posterior_histogram(&chain, c, config.burn_in, BINS).map(|h| HistogramOut {
                label: c.label(),
                edges: h.edges,
                counts: h.counts,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;

    to_json(&UnmixOut {
        names: lib.names().to_vec(),
        wavelengths: lib.wavelengths().to_vec(),
        observed: pixel.y,
        fitted,
        mean_a: mean.a.as_slice().to_vec(),
        mean_b: mean.b,
        acceptance_rate: chain.acceptance_rate(),
        histograms,
    })
}

#[wasm_bindgen]
pub fn forward_spectrum(weights: &[f64], b: f64) -> Result<String, JsError> {
    forward_json(weights, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dirichlet_cloud(beta: f64, n: usize, seed: u32) -> Result<String, JsError> {
    dirichlet_json(beta, n, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn unmix_pixel(
    weights: &[f64],
    b: f64,
    noise_sigma: f64,
    beta: f64,
    n_iter: usize,
    seed: u32,
) -> Result<String, JsError> {
    unmix_json(weights, b, noise_sigma, beta, n_iter, seed.into()).map_err(|e| JsError::new(&e))
}
