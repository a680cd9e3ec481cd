use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dntest::calibrate::{calibrate_null, GaussianSurrogate};
use dntest::harness::{reproduce_tables, run_experiment, ExperimentConfig, TableSettings};
use dntest::kurtosis::colored_bivariate_calibration;
use dntest::{
    center, generate, mardia_kurtosis, run_test_with, sample_cross_covariance, ArchimedeanFamily, CalibrationBudget,
    FamilyKind, GeneratorConfig, RngStream, TestKind, TestOptions, TimeSeriesSample,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dntest", version, about = "Kurtosis-based normality tests for dependent multivariate series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gumbel,
    Clayton,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Iid,
    Colored1,
    Colored2,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a colored (or white) Archimedean-copula series with Gaussian marginals.
    Generate {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        len: usize,
        #[arg(long = "color", overrides_with = "no_color")]
        _color: bool,
        #[arg(long = "no-color")]
        no_color: bool,
        #[arg(long, default_value_t = 0.8)]
        ar: f64,
        #[arg(long, default_value_t = 1000)]
        drop: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; `.csv` selects CSV, anything else the binary format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a kurtosis normality test on a stored series.
    Test {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, default_value_t = dntest::calibrate::DEFAULT_REPLICATES)]
        calib_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Calibrate the colored null of the kurtosis statistic for a stored series.
    Calibrate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, default_value_t = dntest::calibrate::DEFAULT_REPLICATES)]
        calib_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a rejection-rate experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the four reference rejection-rate tables.
    ReproduceTables {
        #[arg(long)]
        out: PathBuf,
        /// 500 projections and 3 realizations per table.
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        calib_reps: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Exit code 2 is reserved for statistical aborts, so usage errors exit with 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let abort = e.downcast_ref::<dntest::Error>().is_some_and(|e| e.is_statistical_abort());
            ExitCode::from(if abort { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { family, rho, dim, len, _color: _, no_color, ar, drop, seed, out } => {
            let kind = match family {
                Family::Gumbel => FamilyKind::Gumbel,
                Family::Clayton => FamilyKind::Clayton,
            };
            let mut config = GeneratorConfig::new(ArchimedeanFamily::new(kind, rho)?, dim, len).colored(!no_color);
            config.ar_coefficient = ar;
            config.n_drop = drop;
            let x = generate(&config, RngStream::new(seed, 0))?;
            x.save(&out)?;
            log::info!("wrote {} × {} sample to {}", x.dim(), x.len(), out.display());
        }
        Command::Test { input, kind, alpha, max_lag, calib_reps, seed, json } => {
            let x = load(&input)?;
            let kind = match kind {
                Kind::Iid => TestKind::MardiaIid(x.dim()),
                Kind::Colored1 => TestKind::ColoredScalar,
                Kind::Colored2 => TestKind::ColoredBivariate,
            };
            let opts = TestOptions { max_lag, calibration: CalibrationBudget::new(calib_reps, RngStream::new(seed, 0)) };
            let r = run_test_with(&x, kind, alpha, &opts)?;
            if json {
                let out = json!({
                    "statistic": r.statistic,
                    "z": r.z,
                    "p_value": r.p_value,
                    "reject": r.reject,
                    "null_mean": r.null_moments.mean,
                    "null_var": r.null_moments.variance,
                    "null_source": r.null_moments.source.as_str(),
                    "alpha": r.alpha,
                    "lag_truncation": r.lag_truncation,
                });
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                println!("statistic  {:.6}", r.statistic);
                println!("null mean  {:.6}", r.null_moments.mean);
                println!("null var   {:.6e} ({})", r.null_moments.variance, r.null_moments.source.as_str());
                println!("z          {:.4}", r.z);
                println!("p-value    {:.4e}", r.p_value);
                println!("{} at alpha = {}", if r.reject { "reject" } else { "accept" }, r.alpha);
            }
        }
        Command::Calibrate { input, max_lag, calib_reps, seed } => {
            let x = center(&load(&input)?);
            let mut budget = CalibrationBudget::new(calib_reps, RngStream::new(seed, 0));
            budget.max_lag = max_lag;
            let n = x.len();
            let cov = sample_cross_covariance(&x, budget.lag_for(n))?;
            let c = if x.dim() == 2 {
                colored_bivariate_calibration(&cov, n, &budget)?
            } else {
                let surrogate = GaussianSurrogate::new(&cov, n)?;
                calibrate_null(&surrogate, |s| mardia_kurtosis(s).map(|k| k.value), &budget)?
            };
            let out = json!({
                "mean": c.moments.mean,
                "variance": c.moments.variance,
                "se_mean": c.se_mean,
                "se_variance": c.se_variance,
                "replicates": c.replicates,
                "clipping_norm": c.clipping_norm,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            let report = run_experiment(&cfg)?;
            let text = report.to_json()?;
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
        }
        Command::ReproduceTables { out, fast, seed, m, realizations, calib_reps } => {
            let mut settings = if fast { TableSettings::fast() } else { TableSettings::default() };
            if let Some(s) = seed {
                settings.seed = s;
            }
            if let Some(m) = m {
                settings.m = m;
            }
            if let Some(r) = realizations {
                settings.realizations = r;
            }
            if let Some(c) = calib_reps {
                settings.calib_reps = c;
            }
            for table in reproduce_tables(&out, &settings)? {
                println!("table {}", table.number);
                print!("{}", table.csv);
            }
        }
    }
    Ok(())
}

fn load(path: &PathBuf) -> Result<TimeSeriesSample> {
    TimeSeriesSample::load(path).with_context(|| format!("reading {}", path.display()))
}
