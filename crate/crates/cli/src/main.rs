//! `hopac`: sample, fit and backtest outer-power hierarchical Archimedean copulas.

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hopac::estimation::{fit, pseudo_observations, Estimator, EstimatorConfig};
use hopac::risk::{backtest, BacktestConfig, CopulaModel, PriceTable};
use hopac::sampling::sample_hopac;
use hopac::simstudy::{resolve_jobs, run_study, write_json, StudyConfig};
use hopac::{solve_tau_lambda_u, Family, HacTree, RngStream, SampleMatrix};

#[derive(Parser)]
#[command(name = "hopac", version, about = "Outer-power hierarchical Archimedean copulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Common {
    /// Seed of all random draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (falls back to HOPAC_JOBS, then 1).
    #[arg(long, env = "HOPAC_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from a tree given as JSON.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate a tree from a headerless CSV sample.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: Family,
        /// One of td-ml, td-sn, bu-ml, opac, hac.
        #[arg(long, default_value = "td-ml")]
        estimator: Estimator,
        /// Largest fitted beta still read as 1.
        #[arg(long, default_value_t = 1.05)]
        beta_r: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate which (tau, lambda_u) pairs a family attains and with which parameters.
    Tailgrid {
        #[arg(long)]
        family: Family,
        /// Grid points per axis on [0, 1).
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run an estimator comparison study configured by JSON.
    Simstudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the configuration file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "HOPAC_JOBS")]
        jobs: Option<usize>,
    },
    /// Rolling-window VaR backtest on a price CSV (header: date, tickers).
    VarBacktest {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        family: Family,
        /// Comma separated: independence, ac, opac, hac, hopac.
        #[arg(long, value_delimiter = ',', default_value = "hopac")]
        model: Vec<CopulaModel>,
        #[arg(long, value_delimiter = ',', default_value = "0.95,0.99")]
        alpha: Vec<f64>,
        /// 126, 252 or 504.
        #[arg(long, default_value_t = 252)]
        window: usize,
        #[arg(long, default_value_t = hopac::risk::DEFAULT_SIMULATIONS)]
        simulations: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check the nesting condition of a tree given as JSON.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn read_tree(path: &PathBuf) -> Result<HacTree> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(f).with_context(|| format!("cannot read tree from {}", path.display()))
}

fn tailgrid(family: Family, grid: usize, out: &PathBuf) -> Result<()> {
    if grid == 0 {
        bail!("grid must be positive");
    }
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["tau", "lambda_u", "attainable", "theta", "beta"])?;
    for i in 0..grid {
        let tau = i as f64 / grid as f64;
        for k in 0..grid {
            let lam = k as f64 / grid as f64;
            let sol = solve_tau_lambda_u(family, tau, lam)?;
            let (ok, th, be) = match sol {
                Some((th, be)) => ("true", th.to_string(), be.to_string()),
                None => ("false", String::new(), String::new()),
            };
            w.write_record([tau.to_string(), lam.to_string(), ok.to_string(), th, be])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { model, n, out, common } => {
            let tree = read_tree(&model)?;
            let s = sample_hopac(&tree, n, &RngStream::new(common.seed, 0))?;
            s.write_csv_path(&out)?;
        }
        Command::Fit { data, family, estimator, beta_r, out, common: _ } => {
            let x = SampleMatrix::read_csv_path(&data).with_context(|| format!("cannot read {}", data.display()))?;
            let u = pseudo_observations(&x)?;
            let cfg = EstimatorConfig { beta_r, ..Default::default() };
            let report = fit(&u, family, estimator, &cfg)?;
            write_json(&out, &report).with_context(|| format!("cannot write {}", out.display()))?;
            println!("{}", report.tree);
        }
        Command::Tailgrid { family, grid, out, common: _ } => tailgrid(family, grid, &out)?,
        Command::Simstudy { config, out, seed, jobs } => {
            let mut cfg = StudyConfig::from_json_path(&config)
                .with_context(|| format!("cannot read study configuration {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let res = run_study(&cfg, resolve_jobs(jobs))?;
            res.write_dir(&out)?;
            for r in res.recovery_summary() {
                println!(
                    "{} d={} n={}: exact {:.1}%, trivariate {:.1}%",
                    r.family, r.d, r.n, r.exact_ratio, r.trivariate_ratio
                );
            }
        }
        Command::VarBacktest { prices, family, model, alpha, window, simulations, out, common } => {
            let table = PriceTable::read_path(&prices).with_context(|| format!("cannot read {}", prices.display()))?;
            let mut cfg = BacktestConfig::new(family, model, alpha, window, common.seed);
            cfg.simulations = simulations;
            let report = backtest(&table.prices, &cfg, resolve_jobs(common.jobs))?;
            report.write_dir(&out)?;
            for s in &report.summary {
                println!(
                    "{} alpha={} w={}: violation ratio {:.4} (|deviation| {:.4}) over {} days",
                    s.model, s.alpha, s.window, s.ratio, s.deviation, s.days
                );
            }
        }
        Command::Validate { model, common: _ } => {
            let tree = read_tree(&model)?;
            let report = tree.validate_snc();
            if report.valid {
                println!("valid");
            } else {
                println!("invalid");
                for v in &report.violations {
                    println!("  fork {} -> child fork {}: {}", v.parent, v.child, v.rule);
                }
                bail!("the tree violates the sufficient nesting condition");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
