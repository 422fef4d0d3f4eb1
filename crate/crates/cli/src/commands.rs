use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ppnmm_core::experiment::{
    generate_pixel, re, run_experiment_with, ExperimentOptions, ExperimentResult, SyntheticScenario,
};
use ppnmm_core::gibbs::{posterior_histogram, posterior_mean, run_chain, Component, SamplerConfig};
use ppnmm_core::library::bundled_library;
use ppnmm_core::model::{forward_ppnmm, EndmemberLibrary, ModelParams};
use ppnmm_core::random::RngState;
use ppnmm_core::spectra_io::{
    load_config, parse_library, parse_pixel, write_histogram, write_pixel, write_trace,
};
use ppnmm_core::Error;

use crate::Overrides;

const QUICK_RUNS: usize = 5;
const QUICK_ITERS: usize = 2_000;
const QUICK_BURN_IN: usize = 500;
const UNMIX_BINS: usize = 50;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

/// Classifies a library error by exit code.
fn classify(context: &str, err: Error) -> Failure {
    let message = format!("{context}: {err}");
    if err.is_input_error() {
        Failure::Input(message)
    } else if matches!(err.root(), Error::DimensionMismatch { .. }) {
        Failure::Usage(message)
    } else {
        Failure::Numerical(message)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::Numerical(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_library(path: Option<&Path>) -> Result<EndmemberLibrary, Failure> {
    match path {
        None => Ok(bundled_library()),
        Some(p) => {
            parse_library(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
        }
    }
}

/// Config file (or defaults), then flag overrides, then validation.
fn resolve(
    overrides: &Overrides,
    library: EndmemberLibrary,
) -> Result<(SyntheticScenario, SamplerConfig), Failure> {
    let (mut scenario, mut config) = match &overrides.config {
        Some(path) => load_config(&read(path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        None => load_config("").expect("defaults are valid"),
    };
    scenario.library = library;
    apply_overrides(overrides, &mut scenario, &mut config);
    config
        .validate()
        .map_err(|e| Failure::Usage(format!("invalid sampler settings: {e}")))?;
    scenario
        .validate()
        .map_err(|e| Failure::Usage(format!("invalid scenario: {e}")))?;
    Ok((scenario, config))
}

fn apply_overrides(o: &Overrides, scenario: &mut SyntheticScenario, config: &mut SamplerConfig) {
    if let Some(seed) = o.seed {
        scenario.seed = seed;
        config.seed = seed;
    }
    if let Some(beta) = o.beta {
        config.hyper.beta = beta;
    }
    if let Some(iters) = o.iters {
        config.n_iter = iters;
    }
    if let Some(burn_in) = o.burn_in {
        config.burn_in = burn_in;
    }
    if let Some(runs) = o.runs {
        scenario.n_runs = runs;
    }
    if let Some(sigma) = o.noise_sigma {
        scenario.noise_sigma = sigma;
    }
}

#[derive(Serialize)]
struct SamplerProvenance {
    beta: f64,
    gamma: f64,
    nu: f64,
    n_iter: usize,
    burn_in: usize,
    proposal_step: f64,
    adapt: bool,
    target_accept: f64,
    seed: u64,
}

impl From<&SamplerConfig> for SamplerProvenance {
    fn from(c: &SamplerConfig) -> Self {
        Self {
            beta: c.hyper.beta,
            gamma: c.hyper.gamma,
            nu: c.hyper.nu,
            n_iter: c.n_iter,
            burn_in: c.burn_in,
            proposal_step: c.proposal_step,
            adapt: c.adapt,
            target_accept: c.target_accept,
            seed: c.seed,
        }
    }
}

#[derive(Serialize)]
struct SynthProvenance<'a> {
    true_a: &'a [f64],
    true_b: f64,
    noise_sigma: f64,
    seed: u64,
    endmembers: &'a [String],
    bands: usize,
}

pub fn synth(library: Option<&Path>, output: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let library = load_library(library)?;
    let (scenario, _) = resolve(overrides, library)?;
    let mut rng = RngState::new(scenario.seed);
    let pixel = generate_pixel(&scenario, &mut rng).map_err(|e| classify("synthesis failed", e))?;
    let text =
        write_pixel(&scenario.library, &pixel).map_err(|e| classify("synthesis failed", e))?;
    write(output, &text)?;
    let provenance = SynthProvenance {
        true_a: scenario.true_a.as_slice(),
        true_b: scenario.true_b,
        noise_sigma: scenario.noise_sigma,
        seed: scenario.seed,
        endmembers: scenario.library.names(),
        bands: scenario.library.bands(),
    };
    write(&provenance_path(output), &to_json(&provenance))?;
    Ok(())
}

pub fn provenance_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

#[derive(Serialize)]
struct UnmixSummary<'a> {
    endmembers: &'a [String],
    posterior_mean: &'a ModelParams,
    acceptance_rate: f64,
    final_step: f64,
    reconstruction_rmse: f64,
    pixel: String,
    sampler: SamplerProvenance,
}

pub fn unmix(
    library: Option<&Path>,
    pixel_path: &Path,
    out_dir: &Path,
    trace: bool,
    overrides: &Overrides,
) -> Result<(), Failure> {
    let library = load_library(library)?;
    let pixel = parse_pixel(&read(pixel_path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", pixel_path.display())))?;
    if pixel.len() != library.bands() {
        return Err(Failure::Usage(format!(
            "pixel has {} bands but the library has {}",
            pixel.len(),
            library.bands()
        )));
    }
    let (_, config) = resolve(overrides, library.clone())?;
    let chain = run_chain(&pixel, &library, &config).map_err(|e| classify("sampling failed", e))?;
    let estimate =
        posterior_mean(&chain, config.burn_in).map_err(|e| classify("summary failed", e))?;
    let reconstruction = forward_ppnmm(&library, &estimate.a, estimate.b)
        .map_err(|e| classify("reconstruction failed", e))?;
    let rmse = re(&[reconstruction], std::slice::from_ref(&pixel))
        .map_err(|e| classify("reconstruction failed", e))?;

    let summary = UnmixSummary {
        endmembers: library.names(),
        posterior_mean: &estimate,
        acceptance_rate: chain.acceptance_rate(),
        final_step: chain.final_step,
        reconstruction_rmse: rmse,
        pixel: pixel_path.display().to_string(),
        sampler: SamplerProvenance::from(&config),
    };
    write(&out_dir.join("summary.json"), &to_json(&summary))?;

    let mut components: Vec<Component> = (0..library.endmembers())
        .map(Component::Abundance)
        .collect();
    components.extend([Component::B, Component::Sigma2, Component::SigmaB2]);
    for component in components {
        let hist = posterior_histogram(&chain, component, config.burn_in, UNMIX_BINS)
            .map_err(|e| classify("histogram failed", e))?;
        write(
            &out_dir.join(format!("hist_{}.csv", component.label())),
            &write_histogram(&hist),
        )?;
    }
    if trace {
        write(&out_dir.join("trace.csv"), &write_trace(&chain))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReproduceReport<'a> {
    scale: &'static str,
    n_runs: usize,
    noise_sigma: f64,
    true_a: &'a [f64],
    true_b: f64,
    seed: u64,
    sampler: SamplerProvenance,
    sparse: &'a ExperimentResult,
    baseline: &'a ExperimentResult,
    mse_ratio: f64,
}

fn table_report(
    scenario: &SyntheticScenario,
    config: &SamplerConfig,
    quick: bool,
    sdp: &ExperimentResult,
    base: &ExperimentResult,
) -> Result<String, Failure> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let scale = if quick { "quick" } else { "full" };
    writeln!(out, "# Synthetic unmixing comparison ({scale} scale)").unwrap();
    writeln!(
        out,
        "# runs={} iterations={} burn_in={} noise_sigma={} seed={}",
        scenario.n_runs, config.n_iter, config.burn_in, scenario.noise_sigma, scenario.seed
    )
    .unwrap();
    writeln!(
        out,
        "# true_a={:?} true_b={}",
        scenario.true_a.as_slice(),
        scenario.true_b
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "## Estimation and reconstruction errors (x 1e-2)").unwrap();
    writeln!(
        out,
        "{:<22} {:>6} {:>10} {:>10}",
        "algorithm", "beta", "MSE", "RE"
    )
    .unwrap();
    for (name, r) in [("sparse Dirichlet", sdp), ("uniform (baseline)", base)] {
        writeln!(
            out,
            "{:<22} {:>6} {:>10.4} {:>10.4}",
            name,
            r.beta,
            r.mse * 100.0,
            r.re * 100.0
        )
        .unwrap();
    }
    writeln!(
        out,
        "MSE ratio (sparse / uniform): {:.4}",
        sdp.mse / base.mse
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "## Mean posterior estimates over runs").unwrap();
    for (name, r) in [("sparse Dirichlet", sdp), ("uniform (baseline)", base)] {
        let m = r
            .mean_estimate()
            .map_err(|e| classify("summary failed", e))?;
        let a: Vec<String> = m.a.as_slice().iter().map(|v| format!("{v:.4}")).collect();
        writeln!(out, "{name}: a = [{}], b = {:.4}", a.join(", "), m.b).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "## Pooled posterior of a_3").unwrap();
    for (name, r) in [("sparse Dirichlet", sdp), ("uniform (baseline)", base)] {
        if let Some(h) = r.histogram(Component::Abundance(2)) {
            writeln!(
                out,
                "{name}: mass in [0, 0.04) = {:.4}, std = {:.5}",
                h.histogram.mass_below(0.04) as f64 / h.histogram.total() as f64,
                h.pooled_std
            )
            .unwrap();
        }
    }
    Ok(out)
}

pub fn reproduce(
    out_dir: &Path,
    quick: bool,
    trace: bool,
    overrides: &Overrides,
) -> Result<(), Failure> {
    let (mut scenario, mut config) = match &overrides.config {
        Some(path) => load_config(&read(path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        None => load_config("").expect("defaults are valid"),
    };
    if quick {
        scenario.n_runs = QUICK_RUNS;
        config.n_iter = QUICK_ITERS;
        config.burn_in = QUICK_BURN_IN;
    }
    apply_overrides(overrides, &mut scenario, &mut config);
    config
        .validate()
        .map_err(|e| Failure::Usage(format!("invalid sampler settings: {e}")))?;
    scenario
        .validate()
        .map_err(|e| Failure::Usage(format!("invalid scenario: {e}")))?;

    let options = ExperimentOptions {
        keep_traces: trace,
        jobs: overrides.jobs,
    };
    let sparse_config = config;
    let sdp = run_experiment_with(&scenario, &sparse_config, false, options)
        .map_err(|e| classify("sparse-prior experiment failed", e))?;
    let base = run_experiment_with(&scenario, &sparse_config, true, options)
        .map_err(|e| classify("baseline experiment failed", e))?;

    write(
        &out_dir.join("report.txt"),
        &table_report(&scenario, &sparse_config, quick, &sdp, &base)?,
    )?;
    let report = ReproduceReport {
        scale: if quick { "quick" } else { "full" },
        n_runs: scenario.n_runs,
        noise_sigma: scenario.noise_sigma,
        true_a: scenario.true_a.as_slice(),
        true_b: scenario.true_b,
        seed: scenario.seed,
        sampler: SamplerProvenance::from(&sparse_config),
        sparse: &sdp,
        baseline: &base,
        mse_ratio: sdp.mse / base.mse,
    };
    write(&out_dir.join("report.json"), &to_json(&report))?;
    for (tag, result) in [("sparse", &sdp), ("baseline", &base)] {
        for h in &result.histograms {
            write(
                &out_dir.join(format!("hist_{tag}_{}.csv", h.label)),
                &write_histogram(&h.histogram),
            )?;
        }
        if let Some(chain) = result.traces.first() {
            write(
                &out_dir.join(format!("trace_{tag}_run1.csv")),
                &write_trace(chain),
            )?;
        }
    }
    Ok(())
}

pub fn validate_library(path: &Path) -> Result<(), Failure> {
    let lib = parse_library(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    println!(
        "ok: {} bands ({}–{} µm), {} endmembers: {}",
        lib.bands(),
        lib.wavelengths()[0],
        lib.wavelengths()[lib.bands() - 1],
        lib.endmembers(),
        lib.names().join(", ")
    );
    Ok(())
}
