//! Command implementations behind the `waldiv` binary.

pub mod spec;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::matrix::ScalarMatrix;
use crate::poly::{Degree, Scalar};
use crate::rates::{generic_min_degrees, rate_analysis, RateAnalysis, RateReport, RatesError};
use crate::restriction::{EchelonBlock, RestrictionError, DEFAULT_RANK_TRIALS};
use crate::simulate::{divergence_experiment, EstimatorModel, ExperimentConfig, ScalingPlan, SimError, SimResult, VhatMode};
use crate::verify::{self, CheckOutcome, VerifyError};

pub use spec::{SpecFile, VSpec};

pub const DEFAULT_SEED: u64 = 42;
/// Largest `|slope − β̄|` reported as agreeing with the prediction.
pub const SLOPE_AGREEMENT: f64 = 0.15;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("line {line}: {what} has {found} entries, expected {expected}")]
    Dimension {
        line: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Validation(String),
    #[error("V is not admissible: {0}")]
    NonSpdV(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Restriction(#[from] RestrictionError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Rates(e) => CliError::Rates(e),
            VerifyError::Sim(e) => CliError::Sim(e),
            VerifyError::Restriction(e) => CliError::Restriction(e),
        }
    }
}

impl CliError {
    /// 2: parse or validation, 3: mathematical precondition, 4: numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. }
            | CliError::MissingKey(_)
            | CliError::Dimension { .. }
            | CliError::Validation(_)
            | CliError::Io(_) => 2,
            CliError::NonSpdV(_) => 3,
            CliError::Restriction(e) => match e {
                RestrictionError::TooManyRestrictions { .. } | RestrictionError::Empty | RestrictionError::Poly(_) => 2,
                _ => 3,
            },
            CliError::Rates(e) => match e {
                RatesError::Restriction(RestrictionError::TooManyRestrictions { .. } | RestrictionError::Empty) => 2,
                RatesError::QTooLarge { .. } | RatesError::DimensionMismatch { .. } | RatesError::Poly(_) => 2,
                _ => 3,
            },
            CliError::Sim(e) => match e {
                SimError::InvalidGrid(_) | SimError::TooFewReps { .. } | SimError::DimensionMismatch { .. } => 2,
                SimError::PreconditionUnmet(_) | SimError::Restriction(_) | SimError::Rates(_) => 3,
                _ => 4,
            },
            CliError::ChecksFailed(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "waldiv", version, about = "Lowest-degree rank analysis and divergence rates of Wald statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the machine-readable report to this path.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Echelon form, rank of the lowest-degree matrix and FRALD-T verdict.
    Analyze { spec: PathBuf },
    /// Characteristic-polynomial degrees and divergence exponents at U = V.
    Rates {
        spec: PathBuf,
        /// Also estimate the generic degrees m_k from this many random covariances.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Monte Carlo divergence experiment.
    Simulate {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
        grid: Vec<u64>,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        /// `exact` or `perturbed:<c>`.
        #[arg(long, default_value = "exact")]
        vhat: VhatMode,
        /// Worker threads (results do not depend on this).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Cross-module invariant checks.
    Verify { spec: PathBuf },
}

impl Command {
    fn spec_path(&self) -> &PathBuf {
        match self {
            Command::Analyze { spec } | Command::Rates { spec, .. } | Command::Simulate { spec, .. } | Command::Verify { spec } => spec,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Rates { .. } => "rates",
            Command::Simulate { .. } => "simulate",
            Command::Verify { .. } => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vhat: Option<VhatMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub vars: Vec<String>,
    pub theta_bar: Vec<Scalar>,
    pub g: Vec<String>,
    pub p: usize,
    pub q: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub rank_r: usize,
    pub q: usize,
    pub frald_t_holds: bool,
    pub transform: ScalarMatrix,
    pub blocks: Vec<EchelonBlock>,
    /// Lowest-degree matrix of `S·G` in deviation variables.
    pub low_matrix: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub predicted_beta_bar: f64,
    pub matches_prediction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square_median: Option<f64>,
    pub result: SimResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub provenance: Provenance,
    pub system: SystemSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateReport>,
    /// Generic `m_k` estimated over random covariances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic_m: Option<Vec<Degree>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckOutcome>>,
}

fn blocks_text(blocks: &[EchelonBlock]) -> String {
    blocks
        .iter()
        .map(|b| format!("({} row{} deg {})", b.rows, if b.rows == 1 { "" } else { "s" }, b.degree))
        .collect()
}

fn list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

struct Context {
    spec: SpecFile,
    seed: u64,
    report: Report,
}

impl Context {
    fn new(spec: SpecFile, command: &str, seed: u64) -> Result<Self, CliError> {
        let sys = spec.system()?;
        let report = Report {
            command: command.into(),
            provenance: Provenance {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                grid: None,
                reps: None,
                vhat: None,
            },
            system: SystemSummary {
                vars: spec.var_names.clone(),
                theta_bar: spec.theta_bar.clone(),
                g: spec.g.clone(),
                p: sys.p(),
                q: sys.q(),
            },
            verdict: None,
            rates: None,
            generic_m: None,
            sim: None,
            checks: None,
        };
        Ok(Context { spec, seed, report })
    }

    fn analysis(&self) -> Result<RateAnalysis, CliError> {
        let sys = self.spec.system()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(rate_analysis(&sys, &self.spec.covariance()?, DEFAULT_RANK_TRIALS, &mut rng)?)
    }

    fn model(&self, vhat: VhatMode) -> Result<EstimatorModel, CliError> {
        let v = self.spec.v_matrix().to_f64_rows();
        let theta = self.spec.theta_bar_f64();
        Ok(if self.spec.semidefinite {
            EstimatorModel::semidefinite(theta, v, vhat)?
        } else {
            EstimatorModel::new(theta, v, vhat)?
        })
    }
}

fn verdict_summary(a: &RateAnalysis, names: &[String]) -> VerdictSummary {
    VerdictSummary {
        rank_r: a.report.rank_r,
        q: a.report.q,
        frald_t_holds: a.report.frald_t_holds,
        transform: a.echelon.transform.clone(),
        blocks: a.echelon.blocks.clone(),
        low_matrix: a.echelon.low_matrix.display_with(names),
    }
}

fn verdict_line(v: &VerdictSummary) -> String {
    if v.frald_t_holds {
        format!("FRALD-T: HOLDS, r = {}, blocks {}", v.rank_r, blocks_text(&v.blocks))
    } else {
        format!("FRALD-T: FAILS, r = {}, blocks {}", v.rank_r, blocks_text(&v.blocks))
    }
}

/// Echelon transformation, block structure and FRALD-T verdict.
pub fn cmd_analyze(spec: SpecFile, seed: u64, out: &mut dyn Write) -> Result<Report, CliError> {
    let mut ctx = Context::new(spec, "analyze", seed)?;
    let sys = ctx.spec.system()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let verdict = crate::restriction::frald_check(&sys, DEFAULT_RANK_TRIALS, &mut rng)?;
    let names = sys.deviation_names();
    let summary = VerdictSummary {
        rank_r: verdict.rank_r,
        q: sys.q(),
        frald_t_holds: verdict.frald_t_holds,
        transform: verdict.echelon.transform.clone(),
        blocks: verdict.echelon.blocks.clone(),
        low_matrix: verdict.echelon.low_matrix.display_with(&names),
    };
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "system: q = {} restrictions in p = {} parameters ({})", sys.q(), sys.p(), list(sys.var_names())).map_err(w)?;
    writeln!(out, "theta_bar = ({})", list(sys.theta_bar())).map_err(w)?;
    writeln!(out, "transform S:").map_err(w)?;
    write!(out, "{}", summary.transform).map_err(w)?;
    writeln!(out, "lowest-degree matrix of S*G in ({}):", list(&names)).map_err(w)?;
    for row in &summary.low_matrix {
        writeln!(out, "  [{}]", row.join(", ")).map_err(w)?;
    }
    writeln!(out, "{}", verdict_line(&summary)).map_err(w)?;
    ctx.report.verdict = Some(summary);
    Ok(ctx.report)
}

/// Degrees `m_k(U)`, exponents `γ`, `β`, `β̄` at `U = V`.
pub fn cmd_rates(spec: SpecFile, seed: u64, samples: usize, out: &mut dyn Write) -> Result<Report, CliError> {
    let mut ctx = Context::new(spec, "rates", seed)?;
    let a = ctx.analysis()?;
    let r = &a.report;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    let names = ctx.spec.system()?.deviation_names();
    let verdict = verdict_summary(&a, &names);
    writeln!(out, "{}", verdict_line(&verdict)).map_err(w)?;
    writeln!(out, "m_k(U) = ({})", list(&r.m)).map_err(w)?;
    if samples > 0 {
        let m = generic_min_degrees(&ctx.spec.system()?, samples, seed)?;
        writeln!(out, "generic m_k over {samples} random covariances = ({})", list(&m)).map_err(w)?;
        ctx.report.generic_m = Some(m);
    }
    writeln!(out, "γ = ({})", list(&r.gamma)).map_err(w)?;
    writeln!(out, "β = ({})", list(&r.beta)).map_err(w)?;
    if !r.indeterminate.is_empty() {
        writeln!(out, "note: a_k vanishes identically for k in ({}); the bound is conservative there", list(&r.indeterminate)).map_err(w)?;
    }
    if !r.ties.is_empty() {
        writeln!(out, "note: tied exponents beyond the rank at k in ({})", list(&r.ties)).map_err(w)?;
    }
    if r.divergence_predicted() {
        writeln!(out, "predicted divergence exponent β̄ = {}", r.beta_bar).map_err(w)?;
    } else {
        writeln!(out, "predicted divergence exponent β̄ = {} (no divergence predicted)", r.beta_bar).map_err(w)?;
    }
    ctx.report.verdict = Some(verdict);
    ctx.report.rates = Some(a.report);
    Ok(ctx.report)
}

/// Median of the chi-square distribution with `q` degrees of freedom.
pub fn chi_square_median(q: usize) -> f64 {
    ChiSquared::new(q as f64).map_or(f64::NAN, |c| c.inverse_cdf(0.5))
}

pub fn cmd_simulate(
    spec: SpecFile,
    seed: u64,
    cfg: ExperimentConfig,
    vhat: VhatMode,
    out: &mut dyn Write,
) -> Result<Report, CliError> {
    let mut ctx = Context::new(spec, "simulate", seed)?;
    let a = ctx.analysis()?;
    let sys = ctx.spec.system()?;
    let model = ctx.model(vhat)?;
    let cfg = ExperimentConfig { seed, ..cfg };
    let result = divergence_experiment(&sys, &ScalingPlan::from_analysis(&a), &model, &cfg)?;
    let predicted = a.report.beta_bar.to_f64();
    let matches = (result.median_log_slope - predicted).abs() <= SLOPE_AGREEMENT;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "seed = {seed}, reps = {}, V-hat = {vhat}", cfg.reps).map_err(w)?;
    for (i, t) in result.t_grid.iter().enumerate() {
        writeln!(
            out,
            "T = {t:>8}: median W = {:.6e}, median W/T = {:.6}, singular draws = {}",
            result.median_wald[i],
            result.median_wald[i] / *t as f64,
            result.singular_counts[i]
        )
        .map_err(w)?;
    }
    writeln!(out, "fitted log-log slope = {:.4} (se {:.4})", result.median_log_slope, result.slope_stderr).map_err(w)?;
    if matches {
        writeln!(out, "MATCHES prediction β̄ = {}", a.report.beta_bar).map_err(w)?;
    } else {
        writeln!(out, "DIFFERS from prediction β̄ = {}", a.report.beta_bar).map_err(w)?;
    }
    if a.report.beta_bar.to_f64() > 0.0 {
        writeln!(out, "lower-bound violations W < T^β̄·μ_T: {}", result.bound_violations).map_err(w)?;
    }
    let mut chi = None;
    if a.report.frald_t_holds {
        let m = chi_square_median(sys.q());
        let last = result.median_wald.last().copied().unwrap_or(f64::NAN);
        writeln!(
            out,
            "chi-square sanity: median W at largest T = {last:.4}, chi2_{} median = {m:.4} ({:+.1}%)",
            sys.q(),
            100.0 * (last / m - 1.0)
        )
        .map_err(w)?;
        chi = Some(m);
    }
    ctx.report.provenance.grid = Some(cfg.t_grid.clone());
    ctx.report.provenance.reps = Some(cfg.reps);
    ctx.report.provenance.vhat = Some(vhat);
    ctx.report.verdict = Some(verdict_summary(&a, &sys.deviation_names()));
    ctx.report.rates = Some(a.report);
    ctx.report.sim = Some(SimSummary {
        predicted_beta_bar: predicted,
        matches_prediction: matches,
        chi_square_median: chi,
        result,
    });
    Ok(ctx.report)
}

/// Draws per check and other sizes used by `verify`.
pub const VERIFY_POINTS: usize = 20;
pub const VERIFY_CLOSED_FORM_DRAWS: usize = 10_000;
pub const VERIFY_TRANSFORMS: usize = 10;
pub const VERIFY_DRAWS: usize = 100;
pub const VERIFY_T: u64 = 1000;

pub fn run_checks(spec: &SpecFile, seed: u64) -> Result<Vec<CheckOutcome>, CliError> {
    let sys = spec.system()?;
    let ctx = Context::new(spec.clone(), "verify", seed)?;
    let model = ctx.model(VhatMode::Exact)?;
    Ok(vec![
        verify::symmetric_identity(&sys, VERIFY_POINTS, seed)?,
        verify::closed_form_agreement(&sys, VERIFY_CLOSED_FORM_DRAWS, seed)?,
        verify::transformation_invariance(&sys, &model, VERIFY_TRANSFORMS, VERIFY_DRAWS, VERIFY_T, seed)?,
    ])
}

/// Runs the invariant suite; the report lists every outcome.
pub fn cmd_verify(spec: SpecFile, seed: u64, out: &mut dyn Write) -> Result<Report, CliError> {
    let checks = run_checks(&spec, seed)?;
    let mut ctx = Context::new(spec, "verify", seed)?;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    for c in &checks {
        writeln!(out, "{c}").map_err(w)?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len()).map_err(w)?;
    ctx.report.checks = Some(checks);
    Ok(ctx.report)
}

pub fn write_json(report: &Report, path: &std::path::Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Parses the spec, runs the command, writes `--json` if requested.
/// Failed verification checks still produce the report before the error.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Report, CliError> {
    let spec = SpecFile::read(cli.command.spec_path())?;
    let seed = cli.seed;
    let name = cli.command.name();
    let report = match cli.command {
        Command::Analyze { .. } => cmd_analyze(spec, seed, out)?,
        Command::Rates { samples, .. } => cmd_rates(spec, seed, samples, out)?,
        Command::Simulate {
            grid, reps, vhat, threads, ..
        } => {
            let cfg = ExperimentConfig {
                threads,
                ..ExperimentConfig::new(grid, reps, seed)
            };
            cmd_simulate(spec, seed, cfg, vhat, out)?
        }
        Command::Verify { .. } => cmd_verify(spec, seed, out)?,
    };
    debug_assert_eq!(report.command, name);
    if let Some(path) = &cli.json {
        write_json(&report, path)?;
    }
    if let Some(checks) = &report.checks {
        let failed = checks.iter().filter(|c| !c.passed()).count();
        if failed > 0 {
            return Err(CliError::ChecksFailed(failed));
        }
    }
    Ok(report)
}
