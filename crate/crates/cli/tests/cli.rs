use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ppnmm_core::experiment::SyntheticScenario;
use ppnmm_core::spectra_io::parse_pixel;
use serde_json::Value;
use tempfile::TempDir;

fn ppnmm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppnmm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_succeeds_and_bad_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ppnmm(&["--help"], dir.path())), 0);
    assert_eq!(code(&ppnmm(&["synth", "--bogus"], dir.path())), 1);
    assert_eq!(
        code(&ppnmm(
            &["synth", "-o", "p.csv", "--iters", "ten"],
            dir.path()
        )),
        1
    );
    let out = ppnmm(
        &["synth", "-o", "p.csv", "--iters", "10", "--burn-in", "10"],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_inputs_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "wavelength,a,b\n0.5,0.1,0.2\n0.4,0.1,0.2\n",
    )
    .unwrap();
    let out = ppnmm(&["validate-library", "bad.csv"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(dir.path().join("cfg.toml"), "beta = 0.5\nbogus = 1\n").unwrap();
    let out = ppnmm(
        &["synth", "-o", "p.csv", "--config", "cfg.toml"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    assert_eq!(
        code(&ppnmm(&["validate-library", "missing.csv"], dir.path())),
        2
    );
}

#[test]
fn validate_library_reports_shape() {
    let dir = TempDir::new().unwrap();
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/data/bundled_library.csv"
    );
    let out = ppnmm(&["validate-library", path], dir.path());
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("224 bands"));
    assert!(stdout.contains("6 endmembers"));
}

#[test]
fn noiseless_synth_matches_forward_model() {
    let dir = TempDir::new().unwrap();
    let out = ppnmm(&["synth", "-o", "p.csv", "--noise-sigma", "0"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pixel = parse_pixel(&fs::read_to_string(dir.path().join("p.csv")).unwrap()).unwrap();
    let expected = SyntheticScenario::default().clean_spectrum().unwrap();
    assert_eq!(pixel.len(), expected.len());
    for (got, want) in pixel.y.iter().zip(&expected) {
        assert!((got - want).abs() < 1e-12);
    }
    let provenance = json(&dir.path().join("p.csv.provenance.json"));
    assert_eq!(provenance["true_b"], 0.2);
    assert_eq!(provenance["noise_sigma"], 0.0);
}

#[test]
fn synth_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    for name in ["a.csv", "b.csv"] {
        assert_eq!(
            code(&ppnmm(&["synth", "-o", name, "--seed", "9"], dir.path())),
            0
        );
    }
    assert_eq!(
        code(&ppnmm(
            &["synth", "-o", "c.csv", "--seed", "10"],
            dir.path()
        )),
        0
    );
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn unmix_recovers_noiseless_truth() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&ppnmm(
            &["synth", "-o", "p.csv", "--noise-sigma", "0"],
            dir.path()
        )),
        0
    );
    let out = ppnmm(
        &[
            "unmix",
            "--pixel",
            "p.csv",
            "-o",
            "out",
            "--iters",
            "5000",
            "--burn-in",
            "1000",
            "--trace",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("out/summary.json"));
    let a: Vec<f64> = summary["posterior_mean"]["a"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (est, truth) in a.iter().zip([0.3, 0.7, 0.0, 0.0, 0.0, 0.0]) {
        assert!((est - truth).abs() < 0.05, "{a:?}");
    }
    let b = summary["posterior_mean"]["b"].as_f64().unwrap();
    assert!((b - 0.2).abs() < 0.05, "b = {b}");
    for label in ["a1", "a6", "b", "sigma2", "sigma_b2"] {
        assert!(dir.path().join(format!("out/hist_{label}.csv")).exists());
    }
    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5001);
}

#[test]
fn band_count_mismatch_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("p.csv"),
        "band,wavelength,reflectance\n1,0.4,0.3\n2,0.5,0.31\n3,0.6,0.32\n",
    )
    .unwrap();
    let out = ppnmm(
        &[
            "unmix",
            "--pixel",
            "p.csv",
            "-o",
            "out",
            "--iters",
            "100",
            "--burn-in",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bands"));
}

#[test]
fn beta_flag_is_recorded_in_provenance() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ppnmm(&["synth", "-o", "p.csv"], dir.path())), 0);
    let out = ppnmm(
        &[
            "unmix",
            "--pixel",
            "p.csv",
            "-o",
            "out",
            "--beta",
            "1",
            "--iters",
            "300",
            "--burn-in",
            "100",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["sampler"]["beta"], 1.0);
    assert_eq!(summary["sampler"]["n_iter"], 300);
}

#[test]
fn quick_reproduce_emits_every_section_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        [
            "reproduce",
            "--quick",
            "-o",
            out,
            "--iters",
            "600",
            "--burn-in",
            "200",
            "--runs",
            "3",
        ]
    };
    assert_eq!(code(&ppnmm(&args("r1"), dir.path())), 0);
    let out = ppnmm(&[&args("r2")[..], &["--jobs", "1"]].concat(), dir.path());
    assert_eq!(code(&out), 0);

    let report = fs::read_to_string(dir.path().join("r1/report.txt")).unwrap();
    for section in [
        "MSE",
        "RE",
        "sparse Dirichlet",
        "uniform (baseline)",
        "MSE ratio",
        "Pooled posterior of a_3",
    ] {
        assert!(report.contains(section), "missing {section}");
    }
    let summary = json(&dir.path().join("r1/report.json"));
    assert_eq!(summary["sparse"]["beta"], 0.5);
    assert_eq!(summary["baseline"]["beta"], 1.0);
    assert_eq!(summary["n_runs"], 3);

    let mut files: Vec<String> = fs::read_dir(dir.path().join("r1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    for prior in ["sparse", "baseline"] {
        for label in ["a1", "a2", "a3", "b"] {
            assert!(files.contains(&format!("hist_{prior}_{label}.csv")));
        }
    }
    for name in &files {
        let first = fs::read(dir.path().join("r1").join(name)).unwrap();
        let second = fs::read(dir.path().join("r2").join(name)).unwrap();
        assert_eq!(first, second, "{name} differs between runs");
    }
}
