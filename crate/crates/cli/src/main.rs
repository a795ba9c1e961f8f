//! `robsens`: sensitivity bounds, bootstrap intervals and quantile curves
//! for the overlap-weighted average treatment effect.

mod config;
mod error;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robsens::bootstrap::{run_ci_with_cache, write_draws_csv, Model, ReplicateCache, Sensitivity};
use robsens::bounds::{build_charnes_cooper, solve_bounds, BoundsProblem};
use robsens::dataset::{Dataset, TransformSpec};
use robsens::linprog::Sense;
use robsens::logistic::{fit_mle, PropensityFit};
use robsens::simulate::{generate, SimSpec};
use robsens::simultaneous::{prediction_curve, write_curve_csv, SimultaneousConfig};
use robsens::whole::solve_whole_bounds;

use config::{CommonArgs, CurveArgs, Format, RunConfig};
use error::CliError;
use report::{emit, BoundsRow, CiRow, Clock, DataSummary, FitSummary, Report, SimulateSummary, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "robsens", version, about = "Robust marginal sensitivity analysis for the overlap-weighted ATE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point bounds on the original sample for every grid point.
    Bounds(CommonArgs),
    /// Bootstrap confidence intervals for every grid point.
    Ci(CommonArgs),
    /// Lower prediction bounds for quantiles of confounding strength.
    Curve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Draw a synthetic confounded dataset with a constant effect of 5.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "ROBSENS_N")]
        n: Option<usize>,
    },
    /// Fit the propensity model only.
    Fit(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("robsens: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Bounds(c) => cmd_bounds(RunConfig::load(&c, None, false)?),
        Command::Ci(c) => cmd_ci(RunConfig::load(&c, None, false)?),
        Command::Curve { common, curve } => cmd_curve(RunConfig::load(&common, Some(&curve), true)?),
        Command::Simulate { common, n } => {
            let mut cfg = RunConfig::load(&common, None, false)?;
            if let Some(n) = n {
                cfg.simulate.n = n;
            }
            cmd_simulate(cfg)
        }
        Command::Fit(c) => cmd_fit(RunConfig::load(&c, None, false)?),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<Option<&Path>, CliError> {
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
    }
    Ok(cfg.out.as_deref())
}

fn load_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path: &PathBuf = cfg.input.as_ref().ok_or_else(|| CliError::Config("--input is required".into()))?;
    let data = Dataset::load_csv(path, &cfg.schema())?;
    let spec = cfg.transform.clone().unwrap_or_else(|| TransformSpec::identity(&data.covariate_names));
    Ok(data.build_designs(&spec)?)
}

fn fit(data: &Dataset) -> Result<PropensityFit, CliError> {
    Ok(fit_mle(&data.s_design, &data.z(), &vec![1.0; data.n()], None)?)
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.bootstrap.threads)
        .build()
        .map_err(|e| CliError::Solver(e.to_string()))
}

fn report<T: serde::Serialize>(
    command: &'static str,
    cfg: &RunConfig,
    seed: u64,
    data: Option<&Dataset>,
    clock: Clock,
    results: T,
) -> Report<T> {
    Report {
        schema_version: SCHEMA_VERSION,
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed,
        config: cfg.clone(),
        data: data.map(DataSummary::of),
        timings: clock.finish(),
        results,
    }
}

fn dump_lp(cfg: &RunConfig, data: &Dataset, fit: &PropensityFit) -> Result<(), CliError> {
    let Some(path) = &cfg.dump_lp else { return Ok(()) };
    let params = cfg.separate_params(&cfg.grid[0])?;
    let problem = BoundsProblem::new(data, &fit.fitted, &vec![1.0; data.n()], &params)?;
    let (lp, _) = build_charnes_cooper(&problem, Sense::Maximize, cfg.relaxation);
    std::fs::write(path, lp.to_lp_format())?;
    Ok(())
}

fn cmd_bounds(cfg: RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start();
    let out = out_dir(&cfg)?;
    let data = load_data(&cfg)?;
    clock.lap("load");
    let fit = fit(&data)?;
    clock.lap("fit");
    dump_lp(&cfg, &data, &fit)?;
    let ones = vec![1.0; data.n()];
    let rows = pool(&cfg)?.install(|| {
        cfg.grid
            .iter()
            .map(|p| -> Result<BoundsRow, CliError> {
                Ok(match cfg.model {
                    Model::Separate => {
                        let params = cfg.separate_params(p)?;
                        let b = solve_bounds(&BoundsProblem::new(&data, &fit.fitted, &ones, &params)?, cfg.relaxation)?;
                        BoundsRow::new(*p, &b, None)
                    }
                    Model::Whole => {
                        let w = solve_whole_bounds(&data, &fit.fitted, &cfg.whole_params(p)?, &ones, cfg.relaxation)?;
                        BoundsRow::new(*p, &w.envelope, Some(w.infeasible_cells))
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    clock.lap("solve");
    let seed = cfg.bootstrap.seed;
    emit(&report("bounds", &cfg, seed, Some(&data), clock, rows), cfg.format, out)
}

fn cmd_ci(cfg: RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start();
    let out = out_dir(&cfg)?;
    let data = load_data(&cfg)?;
    clock.lap("load");
    let fit = fit(&data)?;
    clock.lap("fit");
    dump_lp(&cfg, &data, &fit)?;
    let b = &cfg.bootstrap;
    b.validate()?;
    let cache = ReplicateCache::build(&data, &fit, b.replicates, b.seed, b.threads)?;
    clock.lap("resample");
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for (idx, p) in cfg.grid.iter().enumerate() {
        let s = match cfg.model {
            Model::Separate => Sensitivity::Separate(cfg.separate_params(p)?),
            Model::Whole => Sensitivity::Whole(cfg.whole_params(p)?),
        };
        let ci = run_ci_with_cache(&data, &fit, &s, b, &cache)?;
        let draws_file = match out {
            Some(dir) => {
                let name = format!("draws_{idx}.csv");
                write_draws_csv(&ci, std::fs::File::create(dir.join(&name))?)?;
                Some(name)
            }
            None => None,
        };
        rows.push(CiRow::new(*p, &ci, draws_file));
    }
    clock.lap("solve");
    emit(&report("ci", &cfg, b.seed, Some(&data), clock, rows), cfg.format, out)
}

fn cmd_curve(cfg: RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start();
    let out = out_dir(&cfg)?;
    let data = load_data(&cfg)?;
    clock.lap("load");
    let fit = fit(&data)?;
    clock.lap("fit");
    let b = &cfg.bootstrap;
    if b.replicates == 0 {
        return Err(CliError::Config("at least one replicate is required".into()));
    }
    let cache = ReplicateCache::build(&data, &fit, b.replicates, b.seed, b.threads)?;
    clock.lap("resample");
    let sc = SimultaneousConfig {
        alpha: cfg.curve.alpha,
        xi: cfg.curve.xi,
        lambda_max: cfg.curve.lambda_max,
        model: cfg.model,
        relaxation: cfg.relaxation,
        threads: b.threads,
        ..SimultaneousConfig::default()
    };
    let curve = prediction_curve(&data, &cache, &cfg.curve.q_grid(), &sc)?;
    clock.lap("solve");
    if let (Some(dir), Format::Json) = (out, cfg.format) {
        write_curve_csv(&curve, std::fs::File::create(dir.join("curve.csv"))?)?;
    }
    emit(&report("curve", &cfg, b.seed, Some(&data), clock, curve), cfg.format, out)
}

fn cmd_simulate(cfg: RunConfig) -> Result<(), CliError> {
    let clock = Clock::start();
    let out = out_dir(&cfg)?;
    let spec = SimSpec { n: cfg.simulate.n, seed: cfg.simulate.seed };
    let sim = generate(&spec)?;
    let d = &sim.dataset;
    match out {
        None => d.write_csv(std::io::stdout().lock())?,
        Some(dir) => {
            d.write_csv(std::fs::File::create(dir.join("simulated.csv"))?)?;
            let summary = SimulateSummary {
                n: d.n(),
                n1: d.n1,
                n0: d.n0,
                true_effect: sim.true_effect,
                data_file: Some("simulated.csv".into()),
            };
            let r = report("simulate", &cfg, spec.seed, None, clock, summary);
            let f = std::fs::File::create(dir.join("simulate.json"))?;
            serde_json::to_writer_pretty(std::io::BufWriter::new(f), &r)?;
        }
    }
    Ok(())
}

fn cmd_fit(cfg: RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start();
    let out = out_dir(&cfg)?;
    let data = load_data(&cfg)?;
    clock.lap("load");
    let f = fit(&data)?;
    clock.lap("fit");
    let summary = FitSummary {
        terms: data.s_labels.clone(),
        beta: f.beta.clone(),
        loglik: f.loglik,
        score_norm: f.grad_norm,
        iterations: f.iterations,
    };
    emit(&report("fit", &cfg, cfg.bootstrap.seed, Some(&data), clock, summary), cfg.format, out)
}
