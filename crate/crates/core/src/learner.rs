//! Synchronous Q-learning driven by the threshold-MLMC operator estimate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::generative::GenerativeModel;
use crate::math;
use crate::mdp::{Divergence, Policy, QTable, TabularMDP, UncertaintySpec};
use crate::mlmc::{self, MlmcConfig, StateValues, MAX_N_MAX};
use crate::robustdp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `min(1, 2 ln T / ((1 - gamma) T))`.
    Recommended,
}

impl StepSize {
    pub fn resolve(self, iterations: usize, gamma: f64) -> Result<f64> {
        match self {
            StepSize::Constant(beta) => Ok(beta),
            StepSize::Recommended => recommended_stepsize(iterations as f64, gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub iterations: usize,
    pub stepsize: StepSize,
    pub mlmc: MlmcConfig,
    pub spec: UncertaintySpec,
    pub seed: u64,
    /// Clamp every entry to `[0, r_max / (1 - gamma)]` after each sweep.
    pub clamp_q: bool,
    /// Evaluate the greedy policy every this many iterations; 0 disables.
    pub eval_every: usize,
    pub eval_tol: f64,
    pub eval_max_iter: usize,
}

impl LearnerConfig {
    /// Defaults: clamping on, evaluation every `max(1, T / 100)` iterations.
    pub fn new(iterations: usize, stepsize: StepSize, mlmc: MlmcConfig, spec: UncertaintySpec, seed: u64) -> Self {
        LearnerConfig {
            iterations,
            stepsize,
            mlmc,
            spec,
            seed,
            clamp_q: true,
            eval_every: default_eval_every(iterations),
            eval_tol: 1e-6,
            eval_max_iter: robustdp::DEFAULT_MAX_ITER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mlmc.validate()?;
        self.spec.validate()?;
        if let StepSize::Constant(beta) = self.stepsize {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::InvalidParameter(format!("step size must lie in (0, 1], got {beta}")));
            }
        }
        if !(self.eval_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("evaluation tolerance must be positive, got {}", self.eval_tol)));
        }
        Ok(())
    }
}

pub fn default_eval_every(iterations: usize) -> usize {
    (iterations / 100).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub cum_samples: u64,
    pub q_gap_inf: Option<f64>,
    pub greedy_robust_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutput {
    pub q: QTable,
    pub policy: Policy,
    pub trace: TrainingTrace,
}

/// Runs one estimator per cell and collects `(estimate, samples)` in cell
/// order. Implementations may evaluate cells concurrently; the estimates
/// only depend on the cell index.
pub trait SweepExecutor {
    fn sweep(&self, cells: usize, estimate: &(dyn Fn(usize) -> Result<(f64, u64)> + Sync)) -> Result<Vec<(f64, u64)>>;
}

/// Evaluates cells one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl SweepExecutor for Serial {
    fn sweep(&self, cells: usize, estimate: &(dyn Fn(usize) -> Result<(f64, u64)> + Sync)) -> Result<Vec<(f64, u64)>> {
        (0..cells).map(estimate).collect()
    }
}

/// Mean over states of the greedy policy's robust value, memoized by policy.
struct GreedyEvaluator<'a> {
    mdp: &'a TabularMDP,
    spec: UncertaintySpec,
    tol: f64,
    max_iter: usize,
    cache: BTreeMap<Vec<usize>, f64>,
}

impl GreedyEvaluator<'_> {
    fn value(&mut self, policy: &Policy) -> Result<f64> {
        if let Some(&v) = self.cache.get(policy.as_slice()) {
            return Ok(v);
        }
        let eval = robustdp::robust_policy_evaluation(policy, self.mdp, &self.spec, self.tol, self.max_iter)?;
        let values = robustdp::policy_state_values(policy, &eval.q);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.cache.insert(policy.as_slice().to_vec(), mean);
        Ok(mean)
    }
}

/// Runs `config.iterations` synchronous sweeps from `Q = 0`.
///
/// `baseline` enables the `q_gap_inf` column; `eval_model` (the nominal
/// model) enables greedy-policy evaluation at the configured cadence.
pub fn run<G, E>(
    gen: &G,
    config: &LearnerConfig,
    baseline: Option<&QTable>,
    eval_model: Option<&TabularMDP>,
    executor: &E,
) -> Result<TrainingOutput>
where
    G: GenerativeModel + ?Sized,
    E: SweepExecutor + ?Sized,
{
    config.validate()?;
    let (ns, na) = (gen.num_states(), gen.num_actions());
    if let Some(b) = baseline {
        if b.num_states() != ns || b.num_actions() != na {
            return Err(Error::InvalidParameter("baseline shape does not match the model".into()));
        }
    }
    let gamma = gen.gamma();
    let beta = if config.iterations == 0 {
        0.0
    } else {
        config.stepsize.resolve(config.iterations, gamma)?
    };
    let q_hi = gen.r_max() / (1.0 - gamma);
    let mut evaluator = match (config.eval_every, eval_model) {
        (0, _) | (_, None) => None,
        (_, Some(mdp)) => Some(GreedyEvaluator {
            mdp,
            spec: config.spec,
            tol: config.eval_tol,
            max_iter: config.eval_max_iter,
            cache: BTreeMap::new(),
        }),
    };

    let mut q = QTable::zeros(ns, na);
    let mut cum_samples = 0u64;
    let mut trace = TrainingTrace::default();
    let mut record = |t: usize, q: &QTable, cum: u64, with_eval: bool| -> Result<()> {
        let greedy_robust_value = match (&mut evaluator, with_eval) {
            (Some(ev), true) => Some(ev.value(&q.greedy_policy())?),
            _ => None,
        };
        trace.records.push(TraceRecord {
            iteration: t,
            cum_samples: cum,
            q_gap_inf: baseline.map(|b| q.max_abs_diff(b)),
            greedy_robust_value,
        });
        Ok(())
    };
    record(0, &q, 0, true)?;

    for t in 0..config.iterations {
        let values = StateValues::from_q(&q);
        let frozen = &q;
        let estimate = |cell: usize| -> Result<(f64, u64)> {
            let (s, a) = (cell / na, cell % na);
            let est = mlmc::operator_estimate_seeded(gen, s, a, &values, &config.spec, &config.mlmc, config.seed, t as u64)?;
            Ok(((1.0 - beta) * frozen.get(s, a) + beta * est.value, est.samples()))
        };
        let results = executor.sweep(ns * na, &estimate)?;
        let mut next = QTable::zeros(ns, na);
        for (cell, (value, samples)) in results.into_iter().enumerate() {
            if !config.clamp_q && !value.is_finite() {
                return Err(Error::NonFinite {
                    iteration: t + 1,
                    state: cell / na,
                    action: cell % na,
                });
            }
            next.as_mut_slice()[cell] = value;
            cum_samples += samples;
        }
        if config.clamp_q {
            next.clamp_all(0.0, q_hi);
        }
        q = next;
        let step = t + 1;
        let on_cadence = config.eval_every > 0 && step % config.eval_every == 0;
        if on_cadence || step == config.iterations {
            record(step, &q, cum_samples, true)?;
        }
    }

    let policy = q.greedy_policy();
    Ok(TrainingOutput { q, policy, trace })
}

/// Which logarithm the KL threshold uses inside `log(1 + p^2 ... log T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlThresholdForm {
    /// `ln(2 |S|)`.
    #[default]
    StateLog,
    /// `ln(2 |S|^2 |A|)`.
    StateActionLog,
}

/// Threshold `N_max` recommended for a horizon of `T` iterations, capped at
/// [`MAX_N_MAX`].
pub fn recommended_nmax(spec: &UncertaintySpec, horizon: f64, mdp: &TabularMDP, form: KlThresholdForm) -> Result<u32> {
    if !(horizon >= 2.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be at least 2, got {horizon}")));
    }
    let mut n = math::ceil(2.0 * math::log2(horizon));
    if spec.divergence == Divergence::Kl {
        let p = mdp.min_nonzero_entry()?;
        let ns = mdp.num_states() as f64;
        let log_term = match form {
            KlThresholdForm::StateLog => math::ln(2.0 * ns),
            KlThresholdForm::StateActionLog => math::ln(2.0 * ns * ns * mdp.num_actions() as f64),
        };
        let kl = math::ceil(math::log2(1.0 + p * p * log_term * math::ln(horizon)));
        n = n.max(kl);
    }
    Ok((n as u32).min(MAX_N_MAX))
}

/// `min(1, 2 ln T / ((1 - gamma) T))`.
pub fn recommended_stepsize(horizon: f64, gamma: f64) -> Result<f64> {
    if !(horizon >= 2.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be at least 2, got {horizon}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("discount must lie in (0, 1), got {gamma}")));
    }
    Ok((2.0 * math::ln(horizon) / ((1.0 - gamma) * horizon)).min(1.0))
}
