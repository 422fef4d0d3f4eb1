//! Text formats: endmember-library CSV, pixel CSV, sampler configuration,
//! and the CSV tables written by experiments.
//!
//! Library grammar (one record per line, comma separated, no quoting, no
//! padding; `\n` or `\r\n` line endings; trailing blank lines allowed):
//!
//! ```text
//! wavelength,<name_1>,...,<name_R>
//! <wavelength>,<reflectance_1>,...,<reflectance_R>     (≥ 2 rows)
//! ```
//!
//! Wavelengths must be strictly increasing; reflectances finite and in `[0, 1]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::experiment::SyntheticScenario;
use crate::gibbs::{Chain, Histogram, SamplerConfig};
use crate::model::{
    AbundanceVector, EndmemberLibrary, PixelObservation, PriorHyperparams, SpectralMatrix,
};

/// Lines of `text` with trailing blank lines removed, numbered from 1.
fn numbered_lines(text: &str) -> Vec<(usize, &str)> {
    let mut lines: Vec<(usize, &str)> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .collect();
    while lines.last().is_some_and(|(_, l)| l.is_empty()) {
        lines.pop();
    }
    lines
}

fn parse_number(field: &str, line: usize, column: usize, what: &str) -> Result<f64> {
    let value: f64 = field.parse().map_err(|_| Error::Validation {
        line,
        column,
        message: format!("{what} `{field}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Validation {
            line,
            column,
            message: format!("{what} `{field}` is not finite"),
        });
    }
    Ok(value)
}

pub fn parse_library(text: &str) -> Result<EndmemberLibrary> {
    let lines = numbered_lines(text);
    let Some(&(_, header)) = lines.first() else {
        return Err(Error::Format {
            line: 1,
            message: "empty library file".into(),
        });
    };
    let fields: Vec<&str> = header.split(',').collect();
    if fields[0] != "wavelength" {
        return Err(Error::Format {
            line: 1,
            message: format!("header must start with `wavelength`, found `{}`", fields[0]),
        });
    }
    if fields.len() < 3 {
        return Err(Error::Format {
            line: 1,
            message: "header must name at least 2 endmembers".into(),
        });
    }
    if let Some(i) = fields.iter().position(|f| f.is_empty()) {
        return Err(Error::Format {
            line: 1,
            message: format!("empty endmember name in column {}", i + 1),
        });
    }
    let names: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
    let endmembers = names.len();

    let rows = &lines[1..];
    if rows.len() < 2 {
        return Err(Error::Format {
            line: lines.len() + 1,
            message: format!("library needs at least 2 data rows, found {}", rows.len()),
        });
    }

    let mut wavelengths = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * endmembers);
    for &(line, row) in rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != endmembers + 1 {
            return Err(Error::Format {
                line,
                message: format!("expected {} fields, found {}", endmembers + 1, fields.len()),
            });
        }
        let wavelength = parse_number(fields[0], line, 1, "wavelength")?;
        if let Some(&prev) = wavelengths.last() {
            if wavelength <= prev {
                return Err(Error::Validation {
                    line,
                    column: 1,
                    message: format!("wavelength {wavelength} does not increase (previous {prev})"),
                });
            }
        }
        wavelengths.push(wavelength);
        for (j, field) in fields[1..].iter().enumerate() {
            let value = parse_number(field, line, j + 2, "reflectance")?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Validation {
                    line,
                    column: j + 2,
                    message: format!("reflectance {value} outside [0, 1]"),
                });
            }
            data.push(value);
        }
    }
    let spectra = SpectralMatrix::from_row_major(wavelengths.len(), endmembers, data)?;
    EndmemberLibrary::new(wavelengths, spectra, names)
}

pub fn write_library(lib: &EndmemberLibrary) -> String {
    let mut out = String::from("wavelength");
    for name in lib.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (l, w) in lib.wavelengths().iter().enumerate() {
        write!(out, "{w}").unwrap();
        for v in lib.spectra().row(l) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Pixel CSV: header `band,wavelength,reflectance`, one row per band.
pub fn write_pixel(lib: &EndmemberLibrary, pixel: &PixelObservation) -> Result<String> {
    if pixel.len() != lib.bands() {
        return Err(Error::DimensionMismatch {
            context: "pixel length vs library bands",
            expected: lib.bands(),
            found: pixel.len(),
        });
    }
    let mut out = String::from("band,wavelength,reflectance\n");
    for (i, (w, y)) in lib.wavelengths().iter().zip(&pixel.y).enumerate() {
        writeln!(out, "{},{w},{y}", i + 1).unwrap();
    }
    Ok(out)
}

pub fn parse_pixel(text: &str) -> Result<PixelObservation> {
    let lines = numbered_lines(text);
    match lines.first() {
        Some((_, "band,wavelength,reflectance")) => {}
        _ => {
            return Err(Error::Format {
                line: 1,
                message: "pixel header must be `band,wavelength,reflectance`".into(),
            })
        }
    }
    let mut y = Vec::with_capacity(lines.len() - 1);
    for &(line, row) in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format {
                line,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let band: usize = fields[0].parse().map_err(|_| Error::Validation {
            line,
            column: 1,
            message: format!("band index `{}` is not an integer", fields[0]),
        })?;
        if band != y.len() + 1 {
            return Err(Error::Validation {
                line,
                column: 1,
                message: format!("expected band {}, found {band}", y.len() + 1),
            });
        }
        parse_number(fields[1], line, 2, "wavelength")?;
        y.push(parse_number(fields[2], line, 3, "reflectance")?);
    }
    if y.is_empty() {
        return Err(Error::Format {
            line: 2,
            message: "pixel file has no data rows".into(),
        });
    }
    PixelObservation::new(y)
}

/// Keys accepted by [`load_config`].
pub const CONFIG_KEYS: &[&str] = &[
    "beta",
    "gamma",
    "nu",
    "n_iter",
    "burn_in",
    "n_runs",
    "noise_sigma",
    "seed",
    "true_a",
    "true_b",
    "proposal_step",
    "adapt",
    "target_accept",
];

fn as_float(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::invalid(
            key,
            format!("expected a number, found {}", other.type_str()),
        )),
    }
}

fn as_count(key: &str, value: &toml::Value) -> Result<usize> {
    match value {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        toml::Value::Integer(i) => Err(Error::invalid(key, format!("{i} must be nonnegative"))),
        other => Err(Error::invalid(
            key,
            format!("expected an integer, found {}", other.type_str()),
        )),
    }
}

/// Parses a flat `key = value` configuration (TOML syntax). Missing keys
/// keep their defaults; unknown keys are rejected.
pub fn load_config(text: &str) -> Result<(SyntheticScenario, SamplerConfig)> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        Error::Format {
            line,
            message: e.message().to_string(),
        }
    })?;

    let mut scenario = SyntheticScenario::default();
    let mut config = SamplerConfig::default();
    let mut hyper = PriorHyperparams::SPARSE;

    for (key, value) in &table {
        match key.as_str() {
            "beta" => hyper.beta = as_float(key, value)?,
            "gamma" => hyper.gamma = as_float(key, value)?,
            "nu" => hyper.nu = as_float(key, value)?,
            "n_iter" => config.n_iter = as_count(key, value)?,
            "burn_in" => config.burn_in = as_count(key, value)?,
            "n_runs" => scenario.n_runs = as_count(key, value)?,
            "noise_sigma" => scenario.noise_sigma = as_float(key, value)?,
            "seed" => {
                let seed = match value {
                    toml::Value::Integer(i) if *i >= 0 => *i as u64,
                    _ => return Err(Error::invalid(key, "expected a nonnegative integer")),
                };
                scenario.seed = seed;
                config.seed = seed;
            }
            "true_a" => {
                let toml::Value::Array(items) = value else {
                    return Err(Error::invalid(key, "expected an array of numbers"));
                };
                let values = items
                    .iter()
                    .map(|v| as_float(key, v))
                    .collect::<Result<Vec<_>>>()?;
                scenario.true_a =
                    AbundanceVector::new(values).map_err(|e| Error::invalid(key, e.to_string()))?;
            }
            "true_b" => scenario.true_b = as_float(key, value)?,
            "proposal_step" => config.proposal_step = as_float(key, value)?,
            "adapt" => {
                config.adapt = value
                    .as_bool()
                    .ok_or_else(|| Error::invalid(key, "expected true or false"))?
            }
            "target_accept" => config.target_accept = as_float(key, value)?,
            _ => return Err(Error::UnknownKey(key.clone())),
        }
    }
    config.hyper = hyper;
    config.validate()?;
    scenario.validate()?;
    Ok((scenario, config))
}

/// Histogram table: `bin_left,bin_right,count`.
pub fn write_histogram(hist: &Histogram) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (edge, count) in hist.edges.windows(2).zip(&hist.counts) {
        writeln!(out, "{},{},{count}", edge[0], edge[1]).unwrap();
    }
    out
}

/// Chain trace: `iteration,a_1..a_R,b,sigma2,sigma_b2` (iterations from 1).
pub fn write_trace(chain: &Chain) -> String {
    let dim = chain.samples.first().map_or(0, |p| p.a.len());
    let mut out = String::from("iteration");
    for r in 1..=dim {
        write!(out, ",a_{r}").unwrap();
    }
    out.push_str(",b,sigma2,sigma_b2\n");
    for (i, p) in chain.samples.iter().enumerate() {
        write!(out, "{}", i + 1).unwrap();
        for v in p.a.as_slice() {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{},{},{}", p.b, p.sigma2, p.sigma_b2).unwrap();
    }
    out
}
