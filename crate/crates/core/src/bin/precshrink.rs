use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use precshrink::asymptotics::{limit_weights_gt1, limit_weights_lt1, psi_limit, solve_x0, solve_y, x0_prime};
use precshrink::estimators::{bona_fide_olse, sample_inverse, scalar_identity_estimate, TargetMatrix};
use precshrink::io::{load_config, load_matrix, load_spectrum, result_rows, write_matrix, write_results, Orientation};
use precshrink::linalg::{sample_covariance, sample_covariance_centered, DataMatrix, Regime};
use precshrink::simulation::{builtin_experiment, run_experiment};
use precshrink::spectral::build_covariance;
use precshrink::{Error, Result};

#[derive(Parser)]
#[command(name = "precshrink", version, about = "Linear shrinkage estimation of large precision matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write a results CSV.
    Simulate {
        /// Config file (TOML) or builtin name: fig1, fig2, fig3a, fig3b, fig4, fig5.
        config: String,
        /// Replications per grid point.
        #[arg(long)]
        reps: Option<usize>,
        /// Master seed; required when the config has none.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated dimensions replacing the configured grid.
        #[arg(long, value_delimiter = ',')]
        p_grid: Option<Vec<usize>>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a precision matrix from a data file.
    Estimate {
        /// Numeric CSV, rows = variables and columns = observations by default.
        data: PathBuf,
        /// `identity_over_p` or `inverse-of:<spectrum name or file>`.
        #[arg(long, default_value = "identity_over_p")]
        target: String,
        /// Subtract variable means (divisor n − 1).
        #[arg(long)]
        center: bool,
        /// Project the intensity onto its admissible interval.
        #[arg(long)]
        clamp: bool,
        #[arg(long, value_enum, default_value_t = OrientationArg::Variables)]
        orientation: OrientationArg,
        /// For p > n: return the Moore-Penrose pseudo-inverse.
        #[arg(long)]
        pinv: bool,
        /// For p > n: assume a scalar covariance and return its estimated inverse.
        #[arg(long, conflicts_with = "pinv")]
        scalar_covariance: bool,
        /// Matrix output path; stdout when omitted (the summary then goes to stderr).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print deterministic limits of the shrinkage functionals.
    Limits {
        /// Spectrum name (identity, three_block, prior1..prior5) or file.
        #[arg(long)]
        spectrum: String,
        /// Concentration ratio p/n, different from 1.
        #[arg(long)]
        c: f64,
        /// `identity_over_p`, `true_precision` or `inverse-of:<spectrum>`.
        #[arg(long, default_value = "identity_over_p")]
        target: String,
        /// Dimension at which the population matrices are realised.
        #[arg(long, default_value_t = 1000)]
        p: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    Variables,
    Observations,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(
    config: String,
    reps: Option<usize>,
    seed: Option<u64>,
    p_grid: Option<Vec<usize>>,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = match builtin_experiment(&config) {
        Some(cfg) => cfg,
        None => load_config(config.as_ref())?,
    };
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(grid) = p_grid {
        cfg.p_grid = grid;
    }
    if cfg.seed.is_none() {
        return Err(Error::Config("no seed: pass --seed or set `seed` in the config".into()));
    }
    let threads = threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let reports = run_experiment(&cfg, threads)?;
    let mut w = output(&out)?;
    write_results(&mut w, &result_rows(&cfg, &reports))?;
    w.flush()?;
    Ok(())
}

fn parse_target(spec: &str, p: usize) -> Result<TargetMatrix> {
    if spec == "identity_over_p" {
        return Ok(TargetMatrix::identity_over_p(p));
    }
    let source = spec
        .strip_prefix("inverse-of:")
        .or_else(|| spec.strip_prefix("inverse_of:"))
        .ok_or_else(|| Error::Config(format!("unknown target '{spec}'")))?;
    let prior = build_covariance(&load_spectrum(source)?, p, None)?;
    Ok(TargetMatrix::inverse_of(&prior))
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    data: PathBuf,
    target: String,
    center: bool,
    clamp: bool,
    orientation: OrientationArg,
    pinv: bool,
    scalar_covariance: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let orientation = match orientation {
        OrientationArg::Variables => Orientation::RowsAreVariables,
        OrientationArg::Observations => Orientation::RowsAreObservations,
    };
    let data = DataMatrix::new(load_matrix(&data, orientation)?)?;
    let stats = if center {
        sample_covariance_centered(&data)?
    } else {
        sample_covariance(&data)?
    };
    let full_rank = stats.p().min(stats.n());
    if stats.rank() < full_rank {
        return Err(Error::Singular {
            min_eigenvalue: stats.eigenvalues()[stats.p() - full_rank],
            tolerance: stats.rank_tolerance(),
        });
    }
    let estimate = match stats.regime() {
        Regime::Invertible => bona_fide_olse(&stats, &parse_target(&target, stats.p())?, clamp)?,
        Regime::Pseudo if pinv => sample_inverse(&stats),
        Regime::Pseudo if scalar_covariance => scalar_identity_estimate(&stats)?,
        Regime::Pseudo => {
            return Err(Error::UnsupportedRegime(format!(
                "p = {} is not below n = {}; a feasible shrinkage estimator is only available here \
                 under a scalar covariance (--scalar-covariance) or as the raw pseudo-inverse (--pinv)",
                stats.p(),
                stats.n()
            )))
        }
    };
    let summary = json!({
        "p": stats.p(),
        "n": stats.n(),
        "regime": stats.regime().as_str(),
        "estimator": estimate.estimator.as_str(),
        "alpha": estimate.weights.map(|w| w.alpha),
        "beta": estimate.weights.map(|w| w.beta),
    });
    let mut w = output(&out)?;
    write_matrix(&mut w, &estimate.matrix)?;
    w.flush()?;
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn limits(spectrum: String, c: f64, target: String, p: usize) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) || c == 1.0 {
        return Err(Error::InvalidInput(format!("c = {c} must be positive and different from 1")));
    }
    let spec = load_spectrum(&spectrum)?;
    let truth = build_covariance(&spec, p, None)?;
    let target_matrix = if target == "true_precision" {
        TargetMatrix::true_precision(&truth)
    } else {
        parse_target(&target, p)?
    };
    let report = if c < 1.0 {
        let w = limit_weights_lt1(&truth, &target_matrix, c)?;
        json!({
            "c": c,
            "p": p,
            "psi": psi_limit(&spec, c)?,
            "alpha": w.alpha,
            "beta": w.beta,
        })
    } else {
        let x0 = solve_x0(&truth, c)?;
        let xp = x0_prime(&truth, c, x0.value)?;
        let y = solve_y(&truth, target_matrix.matrix(), c)?;
        let w = limit_weights_gt1(&truth, &target_matrix, c)?;
        json!({
            "c": c,
            "p": p,
            "x0": x0.value,
            "x0_residual": x0.diagnostics.residual,
            "x0_iterations": x0.diagnostics.iterations,
            "x0_prime": xp,
            "y_target": y.value,
            "y_target_residual": y.diagnostics.residual,
            "alpha": w.alpha,
            "beta": w.beta,
        })
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            reps,
            seed,
            p_grid,
            threads,
            out,
        } => simulate(config, reps, seed, p_grid, threads, out),
        Command::Estimate {
            data,
            target,
            center,
            clamp,
            orientation,
            pinv,
            scalar_covariance,
            out,
        } => estimate(data, target, center, clamp, orientation, pinv, scalar_covariance, out),
        Command::Limits { spectrum, c, target, p } => limits(spectrum, c, target, p),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
