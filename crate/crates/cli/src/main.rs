//! `roy`: evaluate, calibrate and validate the largest-eigenvalue detector.
//!
//! Exit status: 0 on success, 1 when a validation run fails its tolerance or
//! a computation breaks down, 2 on usage errors (bad flags, dimensions
//! outside the supported envelope).

mod args;
mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use roy_core::asymptotic::{
    finite_scaled_cdf, limit_cdf_fixed_alpha, limit_cdf_scaled_snr, AsymptoticRegime,
};
use roy_core::finite_cdf::{cdf_lambda_max, cdf_test_statistic, MAX_ALPHA};
use roy_core::monte_carlo::{sample_lambda_max, try_ks_distance, McConfig};
use roy_core::roc::{
    asymptotic_roc_scaled, calibrate_threshold, detection_vs_samples, low_snr_slope,
    low_snr_slope_finite_difference, pstar_approx, pstar_bounds, pstar_continuous, pstar_integer,
    roc_closed_form_alpha0, roc_curve, SLOPE_STEP,
};
use roy_core::{ProblemDims, SpikeParam};

use args::{Grid, Snr};
use table::{Format, Table};

#[derive(Debug, Parser)]
#[command(
    name = "roy",
    version,
    about = "Largest generalized eigenvalue detector: exact CDF, ROC and validation"
)]
struct Cli {
    /// Output format
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Args)]
struct DimsArgs {
    /// System dimension
    #[arg(long)]
    m: usize,
    /// Noise-only samples (n >= m)
    #[arg(long)]
    n: usize,
    /// Signal-plus-noise samples (p >= m)
    #[arg(long)]
    p: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CDF of the largest eigenvalue on a threshold grid.
    ///
    /// Columns: t,cdf
    Cdf {
        #[command(flatten)]
        dims: DimsArgs,
        /// Spike strength, linear (3.162) or decibels (5dB); 0 for the null
        #[arg(long)]
        snr: Snr,
        /// Threshold grid start:stop:count:linear|log
        #[arg(long, default_value = "0.01:100:100:log")]
        grid: Grid,
        /// Read t on the test-statistic scale (n/p) lambda_max
        #[arg(long)]
        statistic: bool,
    },
    /// ROC: calibrated threshold and detection probability per false-alarm level.
    ///
    /// Columns: p_false_alarm,p_detection,threshold
    Roc {
        #[command(flatten)]
        dims: DimsArgs,
        #[arg(long)]
        snr: Snr,
        /// False-alarm grid inside (0, 1)
        #[arg(long, default_value = "0.001:0.999:200:log")]
        grid: Grid,
    },
    /// Threshold on the (n/p) lambda_max scale for a false-alarm probability.
    ///
    /// Columns: threshold
    Calibrate {
        #[command(flatten)]
        dims: DimsArgs,
        #[arg(long)]
        pf: f64,
    },
    /// Sample-count analysis for n = m with m = nu p.
    ///
    /// Columns: kind,p,p_detection. Kinds: sweep (one row per integer p),
    /// lower_bound, upper_bound, approx, continuous_optimum, integer_optimum.
    Pstar {
        /// Ratio m/p
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        snr: Snr,
        #[arg(long)]
        pf: f64,
        /// Largest p in the sweep (default: four times the upper bound)
        #[arg(long)]
        p_max: Option<usize>,
    },
    /// Finite-dimensional values beside their large-dimension limits.
    ///
    /// Columns: x,finite,limit,abs_error (CDF of (1 + lambda_max)/m^2) or,
    /// with --roc, p_false_alarm,finite,limit,abs_error. With fixed n - m the
    /// limit law does not depend on the spike, so the limiting ROC is the
    /// chance line; with the scaled spike it is 1 - (1 - P_F)^{1 + theta}.
    #[command(group(ArgGroup::new("regime").required(true).args(["fixed_alpha", "scaled_snr"])))]
    Asymptotic {
        /// Fixed n - m, p - m and spike (needs --m --n --p --snr)
        #[arg(long)]
        fixed_alpha: bool,
        /// Spike growing like theta m with m/p -> c (needs --m --c --theta)
        #[arg(long)]
        scaled_snr: bool,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        snr: Option<Snr>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Compare ROC curves instead of CDFs
        #[arg(long)]
        roc: bool,
        /// x grid (CDF) or false-alarm grid (ROC)
        #[arg(long)]
        grid: Option<Grid>,
    },
    /// Monte-Carlo check of the exact CDF by Kolmogorov-Smirnov distance.
    ///
    /// Columns: m,n,p,snr,trials,seed,ks,tolerance,pass. Exit status 1 when
    /// the distance reaches the tolerance.
    McValidate {
        #[command(flatten)]
        dims: DimsArgs,
        #[arg(long)]
        snr: Snr,
        #[arg(long, default_value_t = 200_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; results do not depend on it
        #[arg(long, env = "ROY_WORKERS")]
        workers: Option<usize>,
        #[arg(long, default_value_t = 0.005)]
        tol: f64,
        /// Write the raw lambda_max samples, one per line
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// First-order coefficient of P_D in the SNR at fixed false-alarm level.
    ///
    /// Columns: slope,finite_difference
    Slope {
        #[command(flatten)]
        dims: DimsArgs,
        #[arg(long)]
        pf: f64,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<roy_core::Error> for Failure {
    fn from(e: roy_core::Error) -> Self {
        use roy_core::Error::*;
        match e {
            Domain(_)
            | DimensionMismatch { .. }
            | OutOfEnvelope { .. }
            | InvalidParameter(_)
            | IndexOutOfRange { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(format!("{e:#}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type Outcome = Result<(Table, bool), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn problem_dims(m: usize, n: usize, p: usize) -> Result<ProblemDims, Failure> {
    let dims = ProblemDims::new(m, n, p)?;
    if dims.alpha() > MAX_ALPHA {
        return Err(roy_core::Error::OutOfEnvelope {
            what: "alpha = n - m",
            value: dims.alpha(),
            cap: MAX_ALPHA,
        }
        .into());
    }
    Ok(dims)
}

fn dims_of(d: DimsArgs) -> Result<ProblemDims, Failure> {
    problem_dims(d.m, d.n, d.p)
}

fn cdf(d: DimsArgs, snr: Snr, grid: Grid, statistic: bool) -> Outcome {
    let dims = dims_of(d)?;
    let spike = SpikeParam::new(snr.0)?;
    let mut table = Table::new("cdf", &["t", "cdf"]);
    for t in grid.values() {
        let v = if statistic {
            cdf_test_statistic(&dims, &spike, t)?
        } else {
            cdf_lambda_max(&dims, &spike, t)?
        };
        table.push(vec![t.into(), v.into()]);
    }
    Ok((table, true))
}

fn roc(d: DimsArgs, snr: Snr, grid: Grid) -> Outcome {
    let dims = dims_of(d)?;
    let curve = roc_curve(&dims, snr.0, &grid.values())?;
    let mut table = Table::new("roc", &["p_false_alarm", "p_detection", "threshold"]);
    for pt in curve.points {
        table.push(vec![
            pt.p_false_alarm.into(),
            pt.p_detection.into(),
            pt.threshold.into(),
        ]);
    }
    Ok((table, true))
}

fn calibrate(d: DimsArgs, pf: f64) -> Outcome {
    let dims = dims_of(d)?;
    let mut table = Table::new("calibrate", &["threshold"]);
    table.push(vec![calibrate_threshold(&dims, pf)?.into()]);
    Ok((table, true))
}

fn pstar(nu: f64, snr: Snr, pf: f64, p_max: Option<usize>) -> Outcome {
    let gamma = snr.0;
    let (lower, upper) = pstar_bounds(nu, gamma, pf)?;
    let approx = pstar_approx(nu, gamma, pf)?;
    let continuous = pstar_continuous(nu, gamma, pf)?;
    let (best_p, best) = pstar_integer(nu, gamma, pf)?;
    let p_max = p_max.unwrap_or(((4.0 * upper).ceil() as usize).max(4));
    if p_max == 0 {
        return Err(usage("--p-max must be at least 1"));
    }
    let at = |p: f64| detection_vs_samples(nu, gamma, pf, p);
    let mut table = Table::new("pstar", &["kind", "p", "p_detection"]);
    for p in 1..=p_max {
        table.push(vec!["sweep".into(), (p as f64).into(), at(p as f64).into()]);
    }
    for (kind, p) in [
        ("lower_bound", lower),
        ("upper_bound", upper),
        ("approx", approx),
        ("continuous_optimum", continuous),
    ] {
        table.push(vec![kind.into(), p.into(), at(p).into()]);
    }
    table.push(vec![
        "integer_optimum".into(),
        (best_p as f64).into(),
        best.into(),
    ]);
    Ok((table, true))
}

#[allow(clippy::too_many_arguments)]
fn asymptotic(
    fixed_alpha: bool,
    m: Option<usize>,
    n: Option<usize>,
    p: Option<usize>,
    snr: Option<Snr>,
    c: Option<f64>,
    theta: Option<f64>,
    roc: bool,
    grid: Option<Grid>,
) -> Outcome {
    let need = |flag: &str| usage(format!("{flag} is required for this regime"));
    let m = m.ok_or_else(|| need("--m"))?;
    let default_grid = if roc {
        "0.001:0.999:200:log"
    } else {
        "0.05:20:100:log"
    };
    let values = grid
        .unwrap_or_else(|| default_grid.parse().expect("valid default grid"))
        .values();
    let first = if roc { "p_false_alarm" } else { "x" };
    let mut table = Table::new("asymptotic", &[first, "finite", "limit", "abs_error"]);

    let pairs: Vec<(f64, f64, f64)> = if fixed_alpha {
        if c.is_some() || theta.is_some() {
            return Err(usage("--c and --theta belong to --scaled-snr"));
        }
        let dims = problem_dims(
            m,
            n.ok_or_else(|| need("--n"))?,
            p.ok_or_else(|| need("--p"))?,
        )?;
        let gamma = snr.ok_or_else(|| need("--snr"))?.0;
        let spike = SpikeParam::new(gamma)?;
        if roc {
            let curve = roc_curve(&dims, gamma, &values)?;
            curve
                .points
                .iter()
                .map(|pt| (pt.p_false_alarm, pt.p_detection, pt.p_false_alarm))
                .collect()
        } else {
            values
                .iter()
                .map(|&x| {
                    Ok((
                        x,
                        finite_scaled_cdf(&dims, &spike, x)?,
                        limit_cdf_fixed_alpha(dims.alpha(), x)?,
                    ))
                })
                .collect::<Result<_, roy_core::Error>>()?
        }
    } else {
        if n.is_some() || p.is_some() || snr.is_some() {
            return Err(usage("--n, --p and --snr belong to --fixed-alpha"));
        }
        let regime = AsymptoticRegime::new(
            c.ok_or_else(|| need("--c"))?,
            theta.ok_or_else(|| need("--theta"))?,
        )?;
        let p = (m as f64 / regime.c()).round() as usize;
        let dims = problem_dims(m, m, p)?;
        let eta = regime.theta() * m as f64;
        if roc {
            for &pf in &values {
                if !(pf > 0.0 && pf < 1.0) {
                    return Err(usage(format!(
                        "false-alarm grid must lie in (0, 1), got {pf}"
                    )));
                }
            }
            values
                .iter()
                .map(|&pf| {
                    (
                        pf,
                        roc_closed_form_alpha0(m, p, eta, pf),
                        asymptotic_roc_scaled(regime.theta(), pf),
                    )
                })
                .collect()
        } else {
            let spike = SpikeParam::new(eta)?;
            values
                .iter()
                .map(|&x| {
                    Ok((
                        x,
                        finite_scaled_cdf(&dims, &spike, x)?,
                        limit_cdf_scaled_snr(&regime, x),
                    ))
                })
                .collect::<Result<_, roy_core::Error>>()?
        }
    };
    for (x, finite, limit) in pairs {
        table.push(vec![
            x.into(),
            finite.into(),
            limit.into(),
            (finite - limit).abs().into(),
        ]);
    }
    Ok((table, true))
}

#[allow(clippy::too_many_arguments)]
fn mc_validate(
    d: DimsArgs,
    snr: Snr,
    trials: usize,
    seed: u64,
    workers: Option<usize>,
    tol: f64,
    dump: Option<PathBuf>,
) -> Outcome {
    let dims = dims_of(d)?;
    let spike = SpikeParam::new(snr.0)?;
    if !(tol > 0.0) {
        return Err(usage(format!("--tol must be positive, got {tol}")));
    }
    let workers =
        workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config = McConfig {
        dims,
        spike,
        trials,
        seed,
        workers,
    };
    let emp = sample_lambda_max(&config)?;
    if let Some(path) = dump {
        let file = File::create(&path)
            .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        emp.write_samples(&mut out)?;
        out.flush()?;
    }
    let ks = try_ks_distance(&emp, |t| cdf_lambda_max(&dims, &spike, t))?;
    let pass = ks < tol;
    let mut table = Table::new(
        "mc-validate",
        &[
            "m",
            "n",
            "p",
            "snr",
            "trials",
            "seed",
            "ks",
            "tolerance",
            "pass",
        ],
    );
    table.push(vec![
        dims.m().into(),
        dims.n().into(),
        dims.p().into(),
        snr.0.into(),
        trials.into(),
        seed.into(),
        ks.into(),
        tol.into(),
        pass.into(),
    ]);
    Ok((table, pass))
}

fn slope(d: DimsArgs, pf: f64) -> Outcome {
    let dims = dims_of(d)?;
    let mut table = Table::new("slope", &["slope", "finite_difference"]);
    table.push(vec![
        low_snr_slope(&dims, pf)?.into(),
        low_snr_slope_finite_difference(&dims, pf, SLOPE_STEP)?.into(),
    ]);
    Ok((table, true))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Cdf {
            dims,
            snr,
            grid,
            statistic,
        } => cdf(dims, snr, grid, statistic),
        Command::Roc { dims, snr, grid } => roc(dims, snr, grid),
        Command::Calibrate { dims, pf } => calibrate(dims, pf),
        Command::Pstar { nu, snr, pf, p_max } => pstar(nu, snr, pf, p_max),
        Command::Asymptotic {
            fixed_alpha,
            scaled_snr: _,
            m,
            n,
            p,
            snr,
            c,
            theta,
            roc,
            grid,
        } => asymptotic(fixed_alpha, m, n, p, snr, c, theta, roc, grid),
        Command::McValidate {
            dims,
            snr,
            trials,
            seed,
            workers,
            tol,
            dump,
        } => mc_validate(dims, snr, trials, seed, workers, tol, dump),
        Command::Slope { dims, pf } => slope(dims, pf),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((table, passed)) => {
            let stdout = std::io::stdout();
            if let Err(e) = table.write(cli.format, stdout.lock()) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
