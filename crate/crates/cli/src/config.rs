//! Resolved run configuration: defaults, then a JSON config file, then
//! environment variables and command-line flags.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use robsens::bootstrap::{BootstrapConfig, Model};
use robsens::bounds::{Relaxation, SensitivityParams};
use robsens::dataset::{CsvSchema, Transform, TransformSpec};
use robsens::simulate::SimSpec;
use robsens::whole::WholeParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Separate,
    Whole,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Separate => Model::Separate,
            ModelArg::Whole => Model::Whole,
        }
    }
}

/// One `(Lambda, delta)` grid point, possibly asymmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda1: f64,
    pub lambda0: f64,
    pub delta1: f64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveSpec {
    /// Number of `q` values, evenly spaced on `[q_min, q_max]`.
    pub points: usize,
    pub q_min: f64,
    pub q_max: f64,
    /// Overall level; each tail uses `alpha / 2`.
    pub alpha: f64,
    pub xi: f64,
    pub lambda_max: f64,
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec { points: 21, q_min: 0.0, q_max: 1.0, alpha: 0.05, xi: 1.0, lambda_max: 4f64.exp() }
    }
}

impl CurveSpec {
    pub fn q_grid(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.q_max],
            p => (0..p).map(|i| self.q_min + (self.q_max - self.q_min) * i as f64 / (p - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub outcome: String,
    pub treatment: String,
    /// Empty means every column other than outcome and treatment.
    pub covariates: Vec<String>,
    /// Defaults to every covariate in both designs.
    pub transform: Option<TransformSpec>,
    pub model: Model,
    pub grid: Vec<GridPoint>,
    pub lambda_gap: f64,
    pub relaxation: Relaxation,
    pub bootstrap: BootstrapConfig,
    pub curve: CurveSpec,
    pub simulate: SimSpec,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub dump_lp: Option<PathBuf>,
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            outcome: "y".into(),
            treatment: "z".into(),
            covariates: Vec::new(),
            transform: None,
            model: Model::Separate,
            grid: vec![GridPoint { lambda1: 1.0, lambda0: 1.0, delta1: 0.0, delta0: 0.0 }],
            lambda_gap: 0.0,
            relaxation: Relaxation::RelaxedLp,
            bootstrap: BootstrapConfig { threads: default_threads(), ..BootstrapConfig::default() },
            curve: CurveSpec::default(),
            simulate: SimSpec { n: 300, seed: 1 },
            out: None,
            format: Format::Json,
            dump_lp: None,
        }
    }
}

/// Flags shared by every subcommand. Each may also come from `ROBSENS_<NAME>`.
#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// Input CSV with outcome, treatment and covariate columns.
    #[arg(long, env = "ROBSENS_INPUT")]
    pub input: Option<PathBuf>,
    /// JSON run configuration; flags and environment variables override it.
    #[arg(long, env = "ROBSENS_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "ROBSENS_OUTCOME")]
    pub outcome: Option<String>,
    #[arg(long, env = "ROBSENS_TREATMENT")]
    pub treatment: Option<String>,
    /// Comma-separated covariate columns (default: all remaining columns).
    #[arg(long, env = "ROBSENS_COVARIATES", value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Propensity design terms: `x`, `std(x)` or `a*b`, comma separated.
    #[arg(long, env = "ROBSENS_S_TERMS", value_delimiter = ',')]
    pub s_terms: Option<Vec<String>>,
    /// Balance design terms, same syntax as `--s-terms`.
    #[arg(long, env = "ROBSENS_G_TERMS", value_delimiter = ',')]
    pub g_terms: Option<Vec<String>>,
    /// Comma-separated Lambda values (crossed with `--delta`).
    #[arg(long, env = "ROBSENS_LAMBDA", value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, env = "ROBSENS_LAMBDA1")]
    pub lambda1: Option<f64>,
    #[arg(long, env = "ROBSENS_LAMBDA0")]
    pub lambda0: Option<f64>,
    /// Comma-separated violation fractions (crossed with `--lambda`).
    #[arg(long, env = "ROBSENS_DELTA", value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    #[arg(long, env = "ROBSENS_DELTA1")]
    pub delta1: Option<f64>,
    #[arg(long, env = "ROBSENS_DELTA0")]
    pub delta0: Option<f64>,
    /// Per-tail level for `ci`; overall level for `curve` (each tail alpha/2).
    #[arg(long, env = "ROBSENS_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "ROBSENS_ZETA")]
    pub zeta: Option<f64>,
    /// Number of bootstrap replicates.
    #[arg(long, env = "ROBSENS_BOOTSTRAP")]
    pub bootstrap: Option<usize>,
    #[arg(long, env = "ROBSENS_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "ROBSENS_MODEL", value_enum)]
    pub model: Option<ModelArg>,
    /// Solve the exact mixed-integer program instead of the LP relaxation.
    #[arg(long, env = "ROBSENS_MILP")]
    pub milp: bool,
    #[arg(long, env = "ROBSENS_XI")]
    pub xi: Option<f64>,
    #[arg(long = "lambda-gap", env = "ROBSENS_LAMBDA_GAP")]
    pub lambda_gap: Option<f64>,
    #[arg(long, env = "ROBSENS_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; reports go to stdout when absent.
    #[arg(long, env = "ROBSENS_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "ROBSENS_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// Write the literal maximisation LP of the first grid point (CPLEX LP format).
    #[arg(long = "dump-lp", env = "ROBSENS_DUMP_LP")]
    pub dump_lp: Option<PathBuf>,
}

/// Flags specific to `curve`.
#[derive(Debug, Clone, Args, Default)]
pub struct CurveArgs {
    /// Number of q values (rows in the curve output).
    #[arg(long, env = "ROBSENS_CURVE_POINTS")]
    pub points: Option<usize>,
    #[arg(long = "q-min", env = "ROBSENS_Q_MIN")]
    pub q_min: Option<f64>,
    #[arg(long = "q-max", env = "ROBSENS_Q_MAX")]
    pub q_max: Option<f64>,
    #[arg(long = "lambda-max", env = "ROBSENS_LAMBDA_MAX")]
    pub lambda_max: Option<f64>,
}

/// Parses `x`, `std(x)` or `a*b`.
pub fn parse_term(t: &str) -> Result<Transform, CliError> {
    let t = t.trim();
    if let Some(inner) = t.strip_prefix("std(").and_then(|r| r.strip_suffix(')')) {
        return Ok(Transform::Standardize(inner.trim().to_string()));
    }
    if let Some((a, b)) = t.split_once('*') {
        return Ok(Transform::Product(a.trim().to_string(), b.trim().to_string()));
    }
    if t.is_empty() || t.contains(['(', ')']) {
        return Err(CliError::Config(format!("cannot parse design term `{t}`")));
    }
    Ok(Transform::Identity(t.to_string()))
}

impl RunConfig {
    pub fn load(common: &CommonArgs, curve: Option<&CurveArgs>, is_curve: bool) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(common, is_curve)?;
        if let Some(c) = curve {
            set(&mut cfg.curve.points, c.points);
            set(&mut cfg.curve.q_min, c.q_min);
            set(&mut cfg.curve.q_max, c.q_max);
            set(&mut cfg.curve.lambda_max, c.lambda_max);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, a: &CommonArgs, is_curve: bool) -> Result<(), CliError> {
        if a.input.is_some() {
            self.input = a.input.clone();
        }
        set(&mut self.outcome, a.outcome.clone());
        set(&mut self.treatment, a.treatment.clone());
        set(&mut self.covariates, a.covariates.clone());
        if a.s_terms.is_some() || a.g_terms.is_some() {
            let mut spec = self.transform.clone().unwrap_or_default();
            if let Some(s) = &a.s_terms {
                spec.s_columns = s.iter().map(|t| parse_term(t)).collect::<Result<_, _>>()?;
            }
            if let Some(g) = &a.g_terms {
                spec.g_columns = g.iter().map(|t| parse_term(t)).collect::<Result<_, _>>()?;
            }
            self.transform = Some(spec);
        }
        let asym = a.lambda1.is_some() || a.lambda0.is_some() || a.delta1.is_some() || a.delta0.is_some();
        if asym {
            let base_l = a.lambda.as_ref().and_then(|v| v.first().copied()).unwrap_or(self.grid[0].lambda1);
            let base_d = a.delta.as_ref().and_then(|v| v.first().copied()).unwrap_or(self.grid[0].delta1);
            self.grid = vec![GridPoint {
                lambda1: a.lambda1.unwrap_or(base_l),
                lambda0: a.lambda0.unwrap_or(base_l),
                delta1: a.delta1.unwrap_or(base_d),
                delta0: a.delta0.unwrap_or(base_d),
            }];
        } else if a.lambda.is_some() || a.delta.is_some() {
            let lambdas = a.lambda.clone().unwrap_or_else(|| vec![self.grid[0].lambda1]);
            let deltas = a.delta.clone().unwrap_or_else(|| vec![self.grid[0].delta1]);
            self.grid = lambdas
                .iter()
                .flat_map(|&l| deltas.iter().map(move |&d| GridPoint { lambda1: l, lambda0: l, delta1: d, delta0: d }))
                .collect();
        }
        if let Some(alpha) = a.alpha {
            if is_curve {
                self.curve.alpha = alpha;
            } else {
                self.bootstrap.alpha = alpha;
            }
        }
        set(&mut self.bootstrap.zeta, a.zeta);
        set(&mut self.bootstrap.replicates, a.bootstrap);
        set(&mut self.bootstrap.seed, a.seed);
        set(&mut self.simulate.seed, a.seed);
        set(&mut self.bootstrap.threads, a.threads);
        if let Some(m) = a.model {
            self.model = m.into();
        }
        if a.milp {
            self.relaxation = Relaxation::Milp;
        }
        self.bootstrap.relaxation = self.relaxation;
        set(&mut self.curve.xi, a.xi);
        set(&mut self.lambda_gap, a.lambda_gap);
        if a.out.is_some() {
            self.out = a.out.clone();
        }
        set(&mut self.format, a.format);
        if a.dump_lp.is_some() {
            self.dump_lp = a.dump_lp.clone();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Config("sensitivity grid is empty".into()));
        }
        for p in &self.grid {
            self.separate_params(p)?;
            if self.model == Model::Whole {
                self.whole_params(p)?;
            }
        }
        if self.bootstrap.threads == 0 {
            return Err(CliError::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema { y: self.outcome.clone(), z: self.treatment.clone(), x: self.covariates.clone(), delimiter: ',' }
    }

    pub fn separate_params(&self, p: &GridPoint) -> Result<SensitivityParams, CliError> {
        SensitivityParams::new(p.lambda1, p.lambda0, p.delta1, p.delta0)
            .and_then(|s| s.with_gap(self.lambda_gap))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn whole_params(&self, p: &GridPoint) -> Result<WholeParams, CliError> {
        if p.lambda1 != p.lambda0 || p.delta1 != p.delta0 {
            return Err(CliError::Config("the whole-population model takes a single Lambda and delta".into()));
        }
        let mut w = WholeParams::new(p.lambda1, p.delta1).map_err(|e| CliError::Config(e.to_string()))?;
        w.lambda_gap = self.lambda_gap;
        w.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(w)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}
