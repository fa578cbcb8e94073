//! File formats: experiment configs (TOML), spectrum files (JSON or TOML),
//! numeric matrices (CSV) and result tables (CSV).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorId;
use crate::metrics::PrialReport;
use crate::simulation::{separation_priors, DistributionSpec, ExperimentConfig, TargetSpec};
use crate::spectral::{three_block_spectrum, SpectralAtom, SpectrumSpec};

/// Spectra addressable by name in configs and on the command line.
pub fn named_spectrum(name: &str) -> Option<SpectrumSpec> {
    match name {
        "identity" => Some(SpectrumSpec::point_mass(1.0).expect("valid")),
        "three_block" | "sigmaH" => Some(three_block_spectrum()),
        _ => separation_priors()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s),
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line assigning `field` at top level or as a table header.
fn line_of_field(text: &str, field: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(field)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
                || t.starts_with(&format!("[{field}]"))
                || t.starts_with(&format!("[[{field}]]"))
        })
        .map_or(1, |i| i + 1)
}

fn toml_error(path: &str, text: &str, err: toml::de::Error) -> Error {
    let line = err.span().map_or(1, |s| line_of_offset(text, s.start));
    Error::Parse {
        path: path.into(),
        line,
        message: err.message().trim().to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SpectrumSource {
    Named(String),
    Atoms(Vec<SpectralAtom>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TargetSource {
    Named(String),
    Prior { name: String, spectrum: SpectrumSource },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    spectrum: SpectrumSource,
    #[serde(default)]
    targets: Vec<TargetSource>,
    c: f64,
    p_grid: Vec<usize>,
    #[serde(default = "gaussian")]
    distribution: DistributionSpec,
    replications: usize,
    seed: Option<u64>,
    estimators: Vec<EstimatorId>,
    #[serde(default)]
    clamp: bool,
    #[serde(default)]
    center: bool,
}

fn gaussian() -> DistributionSpec {
    DistributionSpec::Gaussian
}

fn resolve_spectrum(source: SpectrumSource) -> std::result::Result<SpectrumSpec, String> {
    match source {
        SpectrumSource::Named(name) => named_spectrum(&name).ok_or_else(|| format!("unknown spectrum '{name}'")),
        SpectrumSource::Atoms(atoms) => SpectrumSpec::new(atoms).map_err(|e| e.to_string()),
    }
}

fn resolve_target(source: TargetSource) -> std::result::Result<TargetSpec, String> {
    match source {
        TargetSource::Named(name) => match name.as_str() {
            "identity_over_p" => Ok(TargetSpec::IdentityOverP),
            "true_precision" => Ok(TargetSpec::TruePrecision),
            other => named_spectrum(other)
                .map(|spectrum| TargetSpec::InverseOf {
                    name: other.to_string(),
                    spectrum,
                })
                .ok_or_else(|| format!("unknown target '{other}'")),
        },
        TargetSource::Prior { name, spectrum } => Ok(TargetSpec::InverseOf {
            name,
            spectrum: resolve_spectrum(spectrum)?,
        }),
    }
}

/// Parses an experiment config. `path` is only used in diagnostics.
///
/// ```toml
/// name = "custom"
/// spectrum = "three_block"            # or [{ weight = 1.0, eigenvalue = 2.0 }]
/// targets = ["identity_over_p", { name = "mine", spectrum = "prior4" }]
/// c = 0.5
/// p_grid = [20, 40]
/// replications = 100
/// seed = 42
/// estimators = ["sample_inv", "olse_precision"]
/// distribution = { kind = "student_t", degrees_of_freedom = 10.0 }
/// ```
pub fn parse_config(text: &str, path: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    let at = |field: &str, message: String| Error::Parse {
        path: path.into(),
        line: line_of_field(text, field),
        message: format!("{field}: {message}"),
    };
    let spectrum = resolve_spectrum(raw.spectrum).map_err(|m| at("spectrum", m))?;
    let targets = raw
        .targets
        .into_iter()
        .map(resolve_target)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|m| at("targets", m))?;
    let config = ExperimentConfig {
        name: raw.name,
        spectrum,
        targets,
        c: raw.c,
        p_grid: raw.p_grid,
        distribution: raw.distribution,
        replications: raw.replications,
        seed: raw.seed,
        estimators: raw.estimators,
        clamp: raw.clamp,
        center: raw.center,
    };
    validate_with_lines(&config, text, path)?;
    Ok(config)
}

/// Runs [`ExperimentConfig::validate`] and points failures at the offending key.
fn validate_with_lines(config: &ExperimentConfig, text: &str, path: &str) -> Result<()> {
    config.validate().map_err(|e| {
        let message = e.to_string();
        let field = ["replications", "p_grid", "estimators", "targets", "distribution", "c"]
            .into_iter()
            .find(|f| message.contains(f) || (*f == "distribution" && message.contains("student-t")))
            .unwrap_or("c");
        Error::Parse {
            path: path.into(),
            line: line_of_field(text, field),
            message: format!("{field}: {message}"),
        }
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpectrumFile {
    Bare(Vec<SpectralAtom>),
    Wrapped { atoms: Vec<SpectralAtom> },
}

/// Parses a spectrum given as JSON (`[{"weight":..,"eigenvalue":..}]` or
/// `{"atoms": [...]}`) or TOML (`[[atoms]]` tables).
pub fn parse_spectrum(text: &str, path: &str) -> Result<SpectrumSpec> {
    let trimmed = text.trim_start();
    let atoms = if trimmed.starts_with('[') && !trimmed.starts_with("[[") || trimmed.starts_with('{') {
        let file: SpectrumFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        match file {
            SpectrumFile::Bare(a) | SpectrumFile::Wrapped { atoms: a } => a,
        }
    } else {
        #[derive(Deserialize)]
        struct Wrapped {
            atoms: Vec<SpectralAtom>,
        }
        let w: Wrapped = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
        w.atoms
    };
    SpectrumSpec::new(atoms).map_err(|e| Error::Parse {
        path: path.into(),
        line: 1,
        message: e.to_string(),
    })
}

/// A named spectrum, or a spectrum file when `name_or_path` is not a name.
pub fn load_spectrum(name_or_path: &str) -> Result<SpectrumSpec> {
    if let Some(spec) = named_spectrum(name_or_path) {
        return Ok(spec);
    }
    let text = fs::read_to_string(name_or_path).map_err(|e| {
        Error::InvalidInput(format!("'{name_or_path}' is neither a known spectrum nor a readable file: {e}"))
    })?;
    parse_spectrum(&text, name_or_path)
}

/// How rows of a matrix file map onto the `p × n` data layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    RowsAreVariables,
    RowsAreObservations,
}

/// Reads a rectangular numeric CSV matrix (no header).
pub fn read_matrix<R: Read>(reader: R, path: &str, orientation: Orientation) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("column {}: '{cell}' is not a number", col + 1),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("ragged row: {} columns, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: "no data".into(),
        });
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    Ok(match orientation {
        Orientation::RowsAreVariables => m,
        Orientation::RowsAreObservations => m.transpose(),
    })
}

pub fn load_matrix(path: &Path, orientation: Orientation) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path)?;
    read_matrix(file, &path.display().to_string(), orientation)
}

/// Writes `m` as CSV with shortest round-trip float formatting.
pub fn write_matrix<W: Write>(mut writer: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub p: usize,
    pub n: usize,
    pub c: f64,
    pub distribution: String,
    pub estimator: String,
    pub target: String,
    pub baseline: String,
    pub mean_loss: f64,
    pub prial_percent: f64,
    pub mean_alpha: Option<f64>,
    pub mean_beta: Option<f64>,
    pub replications: usize,
    pub seed: u64,
    pub status: String,
}

pub const RESULT_HEADER: [&str; 15] = [
    "experiment",
    "p",
    "n",
    "c",
    "distribution",
    "estimator",
    "target",
    "baseline",
    "mean_loss",
    "prial_percent",
    "mean_alpha",
    "mean_beta",
    "replications",
    "seed",
    "status",
];

/// Flattens reports into rows, one per grid point and estimator/target pair.
pub fn result_rows(config: &ExperimentConfig, reports: &[PrialReport]) -> Vec<ResultRow> {
    let seed = config.seed.unwrap_or_default();
    reports
        .iter()
        .flat_map(|r| {
            r.entries.iter().map(move |e| ResultRow {
                experiment: config.name.clone(),
                p: r.p,
                n: r.n,
                c: r.c,
                distribution: config.distribution.label(),
                estimator: e.estimator.to_string(),
                target: e.target.clone().unwrap_or_default(),
                baseline: r.baseline.to_string(),
                mean_loss: e.mean_loss,
                prial_percent: e.prial_percent,
                mean_alpha: e.mean_alpha,
                mean_beta: e.mean_beta,
                replications: e.replications,
                seed,
                status: e.status.label(),
            })
        })
        .collect()
}

pub fn write_results<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULT_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_HEADER {
        return Err(Error::Parse {
            path: "<results>".into(),
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
