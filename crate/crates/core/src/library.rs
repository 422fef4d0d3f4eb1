//! The bundled six-endmember library (224 bands, 0.4–2.5 µm).
//!
//! Spectra are smooth synthetic reflectances: a quadratic continuum, an
//! optional logistic edge and Gaussian absorption (or, for negative depth,
//! emission-like) features. The CSV
//! shipped in `data/` is generated by [`synthetic_library`] and checked
//! against it in tests.

use crate::model::{EndmemberLibrary, SpectralMatrix};
use crate::spectra_io::parse_library;

pub const BUNDLED_BANDS: usize = 224;
const FIRST_WAVELENGTH: f64 = 0.4;
const LAST_WAVELENGTH: f64 = 2.5;

const BUNDLED_CSV: &str = include_str!("../data/bundled_library.csv");

/// Parsed copy of the shipped library file.
pub fn bundled_library() -> EndmemberLibrary {
    parse_library(BUNDLED_CSV).expect("bundled library is valid")
}

/// Gaussian absorption feature: depth at center, width as standard deviation.
struct Feature {
    center: f64,
    width: f64,
    depth: f64,
}

struct Material {
    name: &'static str,
    /// Continuum `c0 + c1·(λ − 0.4) + c2·(λ − 0.4)²`.
    continuum: [f64; 3],
    /// Optional visible-edge sigmoid: (center, width, height).
    edge: Option<(f64, f64, f64)>,
    features: &'static [Feature],
}

const MATERIALS: [Material; 6] = [
    Material {
        name: "synth_01",
        continuum: [0.96, -0.23, 0.0],
        edge: Some((0.71, 0.02, 0.32)),
        features: &[
            Feature {
                center: 0.55,
                width: 0.03,
                depth: 0.01,
            },
            Feature {
                center: 0.98,
                width: 0.04,
                depth: -0.01,
            },
            Feature {
                center: 1.2,
                width: 0.05,
                depth: 0.5,
            },
            Feature {
                center: 1.45,
                width: 0.07,
                depth: -0.1,
            },
            Feature {
                center: 1.94,
                width: 0.08,
                depth: 0.5,
            },
        ],
    },
    Material {
        name: "synth_02",
        continuum: [0.2, 0.25, -0.03],
        edge: None,
        features: &[
            Feature {
                center: 1.41,
                width: 0.03,
                depth: 0.08,
            },
            Feature {
                center: 1.91,
                width: 0.04,
                depth: 0.44,
            },
            Feature {
                center: 2.2,
                width: 0.04,
                depth: 0.5,
            },
        ],
    },
    Material {
        name: "synth_03",
        continuum: [0.53, 0.09, -0.05],
        edge: Some((0.45, 0.05, 0.16)),
        features: &[
            Feature {
                center: 1.4,
                width: 0.03,
                depth: 0.31,
            },
            Feature {
                center: 1.91,
                width: 0.03,
                depth: 0.03,
            },
            Feature {
                center: 2.17,
                width: 0.03,
                depth: 0.29,
            },
        ],
    },
    Material {
        name: "synth_04",
        continuum: [0.86, -0.17, -0.09],
        edge: Some((0.58, 0.03, 0.66)),
        features: &[Feature {
            center: 0.87,
            width: 0.1,
            depth: 0.29,
        }],
    },
    Material {
        name: "synth_05",
        continuum: [0.43, 0.14, 0.04],
        edge: Some((0.42, 0.05, 0.01)),
        features: &[
            Feature {
                center: 1.99,
                width: 0.04,
                depth: -0.1,
            },
            Feature {
                center: 2.34,
                width: 0.04,
                depth: 0.36,
            },
        ],
    },
    Material {
        name: "synth_06",
        continuum: [0.95, -0.45, 0.11],
        edge: None,
        features: &[
            Feature {
                center: 1.03,
                width: 0.05,
                depth: 0.32,
            },
            Feature {
                center: 1.26,
                width: 0.05,
                depth: -0.01,
            },
            Feature {
                center: 1.5,
                width: 0.06,
                depth: 0.11,
            },
            Feature {
                center: 2.0,
                width: 0.07,
                depth: 0.26,
            },
        ],
    },
];

/// Band centres: `BUNDLED_BANDS` values evenly spaced over 0.4–2.5 µm,
/// rounded to nanometre-scale precision.
pub fn bundled_wavelengths() -> Vec<f64> {
    let step = (LAST_WAVELENGTH - FIRST_WAVELENGTH) / (BUNDLED_BANDS - 1) as f64;
    (0..BUNDLED_BANDS)
        .map(|i| round_to(FIRST_WAVELENGTH + i as f64 * step, 6))
        .collect()
}

fn round_to(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

fn reflectance(material: &Material, lambda: f64) -> f64 {
    let t = lambda - FIRST_WAVELENGTH;
    let [c0, c1, c2] = material.continuum;
    let mut r = c0 + c1 * t + c2 * t * t;
    if let Some((center, width, height)) = material.edge {
        r += height * (1.0 / (1.0 + (-(lambda - center) / width).exp()) - 1.0);
    }
    for f in material.features {
        r -= f.depth * (-0.5 * ((lambda - f.center) / f.width).powi(2)).exp();
    }
    round_to(r.clamp(0.0, 1.0), 6)
}

/// Regenerates the bundled library from its analytic description.
pub fn synthetic_library() -> EndmemberLibrary {
    let wavelengths = bundled_wavelengths();
    let data = wavelengths
        .iter()
        .flat_map(|&w| MATERIALS.iter().map(move |m| reflectance(m, w)))
        .collect();
    let spectra = SpectralMatrix::from_row_major(BUNDLED_BANDS, MATERIALS.len(), data)
        .expect("consistent dimensions");
    let names = MATERIALS.iter().map(|m| m.name.to_string()).collect();
    EndmemberLibrary::new(wavelengths, spectra, names).expect("synthetic spectra are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra_io::write_library;

    #[test]
    fn bundled_file_matches_generator() {
        let generated = synthetic_library();
        let shipped = bundled_library();
        assert_eq!(shipped.names(), generated.names());
        assert_eq!(shipped.bands(), BUNDLED_BANDS);
        assert_eq!(shipped.endmembers(), 6);
        for l in 0..BUNDLED_BANDS {
            assert!((shipped.wavelengths()[l] - generated.wavelengths()[l]).abs() < 1e-12);
            for r in 0..6 {
                assert!(
                    (shipped.spectra().get(l, r) - generated.spectra().get(l, r)).abs() < 1e-12
                );
            }
        }
        assert_eq!(write_library(&generated), BUNDLED_CSV);
    }

    #[test]
    fn spectra_strictly_inside_unit_interval() {
        let lib = synthetic_library();
        for l in 0..lib.bands() {
            for &v in lib.spectra().row(l) {
                assert!(v > 0.0 && v < 1.0);
            }
        }
    }
}

#[cfg(test)]
mod regenerate {
    /// `cargo test -p ppnmm-core -- --ignored regenerate_bundled_csv`
    #[test]
    #[ignore]
    fn regenerate_bundled_csv() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bundled_library.csv");
        let text = crate::spectra_io::write_library(&super::synthetic_library());
        std::fs::write(path, text).unwrap();
    }
}
