//! Subcommands of the `tmlmc` binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use tmlmc_core::learner::{self, KlThresholdForm, LearnerConfig, Serial, StepSize, TraceRecord};
use tmlmc_core::mlmc::{self, MlmcConfig, StateValues, MAX_N_MAX};
use tmlmc_core::robustdp;
use tmlmc_core::{Divergence, NominalModel, QTable, TabularMDP, UncertaintySpec};

use crate::config::expand_config;
use crate::envspec::EnvSpec;
use crate::parallel::RayonSweep;
use crate::report::{self, BiasRow, SeriesRun};
use crate::schema::{self, BaselineFile};

/// Threshold used for the large-threshold series of `compare-mlmc`.
pub const LARGE_N_MAX: u32 = MAX_N_MAX;

/// Largest `|S| |A|` accepted by `bias-study`.
pub const BIAS_STUDY_MAX_CELLS: usize = 64;

#[derive(Debug, Parser)]
#[command(name = "tmlmc", version, about = "Robust Q-learning with threshold MLMC estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robust value iteration; writes Q*, V* and the greedy policy as JSON.
    Baseline(BaselineArgs),
    /// Seeded replications of the learner; writes trace and summary CSVs.
    Train(TrainArgs),
    /// Monte Carlo bias and variance of the operator estimate per threshold.
    BiasStudy(BiasStudyArgs),
    /// Learner at the configured threshold against a very large threshold.
    CompareMlmc(TrainArgs),
    /// Writes the selected model as JSON.
    DumpMdp(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// garnet:S,A,seed[,stochastic] | robot:alpha,beta | lake:slip | gambler:p,goal
    #[arg(long)]
    pub env: Option<String>,
    /// Model JSON file (alternative to --env).
    #[arg(long)]
    pub mdp_file: Option<PathBuf>,
    #[arg(long)]
    pub gamma_override: Option<f64>,
}

impl ModelArgs {
    pub fn load(&self) -> Result<TabularMDP> {
        let mdp = match (&self.env, &self.mdp_file) {
            (Some(env), None) => env.parse::<EnvSpec>()?.build()?,
            (None, Some(path)) => schema::read_mdp(path)?,
            (Some(_), Some(_)) => bail!("give either --env or --mdp-file, not both"),
            (None, None) => bail!("one of --env or --mdp-file is required"),
        };
        match self.gamma_override {
            Some(g) => Ok(mdp.with_gamma(g)?),
            None => Ok(mdp),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// tv | chi2 | kl
    #[arg(long)]
    pub div: Divergence,
    #[arg(long)]
    pub sigma: f64,
}

impl SpecArgs {
    pub fn spec(&self) -> Result<UncertaintySpec> {
        Ok(UncertaintySpec::new(self.div, self.sigma)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = robustdp::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = robustdp::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 0.5)]
    pub psi: f64,
    #[arg(long, conflicts_with = "nmax_auto")]
    pub nmax: Option<u32>,
    /// Threshold from the horizon-based recommendation.
    #[arg(long)]
    pub nmax_auto: bool,
    /// With --nmax-auto and KL, use ln(2 |S|^2 |A|) instead of ln(2 |S|).
    #[arg(long)]
    pub kl_state_action_log: bool,
    #[arg(long, conflicts_with = "beta_auto")]
    pub beta: Option<f64>,
    /// Step size from the horizon-based recommendation.
    #[arg(long)]
    pub beta_auto: bool,
    /// Number of synchronous iterations.
    #[arg(long = "T", default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Greedy-policy evaluation cadence; 0 disables, default max(1, T/100).
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub eval_tol: f64,
    /// Baseline JSON with a `q` table, enabling the q_gap_inf column.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub include_base_in_full: bool,
    /// Leave Q entries unclamped (non-finite values abort the run).
    #[arg(long)]
    pub no_clamp: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BiasStudyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 0.5)]
    pub psi: f64,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    pub nmax_list: Vec<u32>,
    /// Monte Carlo replications per threshold.
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub state: usize,
    #[arg(long, default_value_t = 0)]
    pub action: usize,
    /// Fixed Q table (JSON with a `q` key); defaults to the robust optimum.
    #[arg(long)]
    pub q_file: Option<PathBuf>,
    #[arg(long, default_value_t = robustdp::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub include_base_in_full: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), expanding `--config`, and runs the
/// selected subcommand.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args = expand_config(args.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Baseline(a) => cmd_baseline(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::BiasStudy(a) => cmd_bias_study(&a).map(|_| ()),
        Command::CompareMlmc(a) => cmd_compare_mlmc(&a).map(|_| ()),
        Command::DumpMdp(a) => cmd_dump_mdp(&a),
    }
}

pub fn cmd_baseline(args: &BaselineArgs) -> Result<BaselineFile> {
    let mdp = args.model.load()?;
    let spec = args.spec.spec()?;
    let res = robustdp::robust_value_iteration(&mdp, &spec, args.tol, args.max_iter)?;
    let file = BaselineFile {
        divergence: spec.divergence.name().to_string(),
        sigma: spec.sigma,
        gamma: mdp.gamma(),
        tol: args.tol,
        iterations: res.iterations,
        residual: res.residual,
        q: res.q.rows(),
        v: res.q.value_vector(),
        policy: res.q.greedy_policy().as_slice().to_vec(),
    };
    println!("converged in {} iterations, residual {:e}", res.iterations, res.residual);
    if let Some(out) = &args.out {
        schema::write_json(out, &file)?;
    }
    Ok(file)
}

fn learner_config(args: &TrainArgs, mdp: &TabularMDP, n_max_override: Option<u32>) -> Result<LearnerConfig> {
    let spec = args.spec.spec()?;
    let horizon = args.iterations as f64;
    let n_max = match (n_max_override, args.nmax, args.nmax_auto) {
        (Some(n), _, _) => n,
        (None, Some(n), false) => n,
        (None, None, true) => {
            let form = if args.kl_state_action_log {
                KlThresholdForm::StateActionLog
            } else {
                KlThresholdForm::StateLog
            };
            learner::recommended_nmax(&spec, horizon, mdp, form)?
        }
        _ => bail!("give one of --nmax or --nmax-auto"),
    };
    let stepsize = match (args.beta, args.beta_auto) {
        (Some(b), false) => StepSize::Constant(b),
        (None, true) => StepSize::Recommended,
        _ => bail!("give one of --beta or --beta-auto"),
    };
    let mut mlmc_config = MlmcConfig::new(args.psi, n_max)?;
    mlmc_config.include_base_in_full = args.include_base_in_full;
    let mut config = LearnerConfig::new(args.iterations, stepsize, mlmc_config, spec, args.seed);
    config.clamp_q = !args.no_clamp;
    config.eval_tol = args.eval_tol;
    if let Some(every) = args.eval_every {
        config.eval_every = every;
    }
    config.validate()?;
    Ok(config)
}

/// Seed of replication `run_id`.
pub fn run_seed(seed: u64, run_id: usize) -> u64 {
    seed.wrapping_add(run_id as u64)
}

fn train_runs(
    mdp: &TabularMDP,
    config: &LearnerConfig,
    runs: usize,
    baseline: Option<&QTable>,
) -> Result<Vec<Vec<TraceRecord>>> {
    let gen = NominalModel::new(mdp.clone())?;
    // Parallelize across runs; a single run parallelizes across cells.
    let one = |run_id: usize| -> tmlmc_core::Result<Vec<TraceRecord>> {
        let mut cfg = config.clone();
        cfg.seed = run_seed(config.seed, run_id);
        let out = if runs == 1 {
            learner::run(&gen, &cfg, baseline, Some(mdp), &RayonSweep)?
        } else {
            learner::run(&gen, &cfg, baseline, Some(mdp), &Serial)?
        };
        Ok(out.trace.records)
    };
    (0..runs).into_par_iter().map(one).collect::<tmlmc_core::Result<Vec<_>>>().map_err(Into::into)
}

fn load_baseline(path: Option<&Path>, mdp: &TabularMDP) -> Result<Option<QTable>> {
    let Some(path) = path else {
        return Ok(None);
    };
    let q = schema::read_q(path)?;
    if q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions() {
        bail!("baseline table in {} does not match the model shape", path.display());
    }
    Ok(Some(q))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub runs: Vec<Vec<TraceRecord>>,
    pub summary: Vec<report::SummaryRow>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport> {
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let mdp = args.model.load()?;
    let config = learner_config(args, &mdp, None)?;
    let baseline = load_baseline(args.baseline.as_deref(), &mdp)?;
    let runs = train_runs(&mdp, &config, args.runs, baseline.as_ref())?;
    let summary = report::summarize(&runs);
    if let Some(out) = &args.out {
        report::write_train_csv(out, &runs)?;
    }
    if let Some(path) = &args.summary {
        report::write_summary_csv(path, &summary)?;
    }
    if let Some(last) = summary.last() {
        println!(
            "iteration {}: mean greedy robust value {} (p5 {}, p95 {})",
            last.iteration, last.mean, last.p5, last.p95
        );
    }
    Ok(TrainReport { runs, summary })
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub n_max: u32,
    pub thresholded: Vec<Vec<TraceRecord>>,
    pub large: Vec<Vec<TraceRecord>>,
}

pub fn cmd_compare_mlmc(args: &TrainArgs) -> Result<CompareReport> {
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let mdp = args.model.load()?;
    let config = learner_config(args, &mdp, None)?;
    let large_config = learner_config(args, &mdp, Some(LARGE_N_MAX))?;
    let baseline = load_baseline(args.baseline.as_deref(), &mdp)?;
    let thresholded = train_runs(&mdp, &config, args.runs, baseline.as_ref())?;
    let large = train_runs(&mdp, &large_config, args.runs, baseline.as_ref())?;
    if let Some(out) = &args.out {
        let mut series = Vec::new();
        for (name, n_max, runs) in [("tmlmc", config.mlmc.n_max, &thresholded), ("large-threshold", LARGE_N_MAX, &large)] {
            for (run_id, records) in runs.iter().enumerate() {
                series.push(SeriesRun {
                    series: name,
                    n_max,
                    run_id,
                    records,
                });
            }
        }
        report::write_compare_csv(out, &series)?;
    }
    Ok(CompareReport {
        n_max: config.mlmc.n_max,
        thresholded,
        large,
    })
}

pub fn cmd_bias_study(args: &BiasStudyArgs) -> Result<Vec<BiasRow>> {
    let mdp = args.model.load()?;
    let cells = mdp.num_states() * mdp.num_actions();
    if cells > BIAS_STUDY_MAX_CELLS {
        bail!("bias-study needs |S||A| <= {BIAS_STUDY_MAX_CELLS}, the model has {cells}");
    }
    if args.state >= mdp.num_states() || args.action >= mdp.num_actions() {
        bail!("cell ({}, {}) is outside the model", args.state, args.action);
    }
    if args.reps < 2 {
        bail!("--reps must be at least 2");
    }
    let spec = args.spec.spec()?;
    let q = match &args.q_file {
        Some(path) => load_baseline(Some(path), &mdp)?.context("missing Q table")?,
        None => robustdp::robust_value_iteration(&mdp, &spec, args.tol, robustdp::DEFAULT_MAX_ITER)?.q,
    };
    let exact = robustdp::robust_bellman(&q, &mdp, &spec)?.get(args.state, args.action);
    let gen = NominalModel::new(mdp)?;
    let values = StateValues::from_q(&q);
    let (s, a) = (args.state, args.action);

    let mut rows = Vec::with_capacity(args.nmax_list.len());
    for &n_max in &args.nmax_list {
        let mut config = MlmcConfig::new(args.psi, n_max)?;
        config.include_base_in_full = args.include_base_in_full;
        // Replication r uses the streams of iteration r for every threshold.
        let draws: Vec<(f64, u64)> = (0..args.reps)
            .into_par_iter()
            .map(|r| {
                mlmc::operator_estimate_seeded(&gen, s, a, &values, &spec, &config, args.seed, r as u64)
                    .map(|e| (e.value, e.samples()))
            })
            .collect::<tmlmc_core::Result<_>>()?;
        let estimates: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let n = estimates.len() as f64;
        let var_hat = report::sample_variance(&estimates);
        let row = BiasRow {
            n_max,
            bias_hat: (report::mean(&estimates) - exact).abs(),
            bias_se: (var_hat / n).sqrt(),
            var_hat,
            mean_samples: draws.iter().map(|d| d.1 as f64).sum::<f64>() / n,
        };
        println!(
            "n_max {}: bias {} (se {}), variance {}, samples/call {}",
            row.n_max, row.bias_hat, row.bias_se, row.var_hat, row.mean_samples
        );
        rows.push(row);
    }
    if let Some(out) = &args.out {
        report::write_bias_csv(out, &rows)?;
    }
    Ok(rows)
}

pub fn cmd_dump_mdp(args: &DumpArgs) -> Result<()> {
    let mdp = args.model.load()?;
    schema::write_mdp(&args.out, &mdp)
}
