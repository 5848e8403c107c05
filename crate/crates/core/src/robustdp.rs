//! Exact robust dynamic programming on a known nominal model.

use alloc::vec::Vec;

use crate::dual::{self, Atom, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable, TabularMDP, UncertaintySpec};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Converged table, iteration count and the last sup-norm step.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationResult {
    pub q: QTable,
    pub iterations: usize,
    pub residual: f64,
}

/// Worst-case expected reward for every cell, laid out like a Q-table.
pub fn reward_worst_cases(mdp: &TabularMDP, spec: &UncertaintySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let support = mdp.reward_support();
    let ambient_min = mdp.reward_min();
    let mut out = Vec::with_capacity(mdp.num_states() * mdp.num_actions());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let dist = DiscreteDistribution::from_weights(support, mdp.reward_row(s, a), ambient_min)?;
            out.push(dual::worst_case(&dist, spec)?.value);
        }
    }
    Ok(out)
}

/// Worst-case expectation of `values` under the uncertainty ball around
/// the transition row of `(s, a)`; the ambient minimum is over all states.
pub fn transition_worst_case(
    mdp: &TabularMDP,
    s: usize,
    a: usize,
    values: &[f64],
    ambient_min: f64,
    spec: &UncertaintySpec,
) -> Result<f64> {
    let atoms = mdp
        .transition_row(s, a)
        .iter()
        .zip(values)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&prob, &value)| Atom { value, prob })
        .collect();
    let dist = DiscreteDistribution::new(atoms, ambient_min)?;
    Ok(dual::worst_case(&dist, spec)?.value)
}

fn apply(mdp: &TabularMDP, spec: &UncertaintySpec, rewards: &[f64], values: &[f64]) -> Result<QTable> {
    let ambient_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let na = mdp.num_actions();
    let mut out = QTable::zeros(mdp.num_states(), na);
    for s in 0..mdp.num_states() {
        for a in 0..na {
            let next = transition_worst_case(mdp, s, a, values, ambient_min, spec)?;
            out.set(s, a, rewards[s * na + a] + mdp.gamma() * next);
        }
    }
    Ok(out)
}

fn check_shape(mdp: &TabularMDP, q: &QTable) -> Result<()> {
    if q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions() {
        return Err(Error::InvalidParameter(alloc::format!(
            "Q-table is {}x{} but the model is {}x{}",
            q.num_states(),
            q.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

/// One application of the robust Bellman optimality operator.
pub fn robust_bellman(q: &QTable, mdp: &TabularMDP, spec: &UncertaintySpec) -> Result<QTable> {
    check_shape(mdp, q)?;
    let rewards = reward_worst_cases(mdp, spec)?;
    apply(mdp, spec, &rewards, &q.value_vector())
}

fn check_tolerances(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "need tol > 0 and max_iter >= 1, got {tol} and {max_iter}"
        )));
    }
    Ok(())
}

/// Iterates `step` from zero until the certified sup-norm error is below
/// `tol`.
fn fixed_point<F>(mdp: &TabularMDP, tol: f64, max_iter: usize, mut step: F) -> Result<ValueIterationResult>
where
    F: FnMut(&QTable) -> Result<QTable>,
{
    check_tolerances(tol, max_iter)?;
    let gamma = mdp.gamma();
    // ||Q_k - Q*|| <= gamma / (1 - gamma) * ||Q_{k+1} - Q_k|| <= tol / 2.
    let threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let mut residual = f64::INFINITY;
    for k in 1..=max_iter {
        let next = step(&q)?;
        residual = next.max_abs_diff(&q);
        q = next;
        if residual <= threshold {
            return Ok(ValueIterationResult {
                q,
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Robust value iteration from `Q = 0`.
pub fn robust_value_iteration(
    mdp: &TabularMDP,
    spec: &UncertaintySpec,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIterationResult> {
    let rewards = reward_worst_cases(mdp, spec)?;
    fixed_point(mdp, tol, max_iter, |q| apply(mdp, spec, &rewards, &q.value_vector()))
}

/// Robust action values of a fixed deterministic policy.
pub fn robust_policy_evaluation(
    policy: &Policy,
    mdp: &TabularMDP,
    spec: &UncertaintySpec,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIterationResult> {
    if policy.as_slice().len() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(Error::InvalidParameter("policy shape does not match the model".into()));
    }
    let rewards = reward_worst_cases(mdp, spec)?;
    fixed_point(mdp, tol, max_iter, |q| {
        let values: Vec<f64> = (0..mdp.num_states()).map(|s| q.get(s, policy.action(s))).collect();
        apply(mdp, spec, &rewards, &values)
    })
}

/// Robust state values `V^pi(s) = Q^pi(s, pi(s))` of a policy.
pub fn policy_state_values(policy: &Policy, q_pi: &QTable) -> Vec<f64> {
    (0..q_pi.num_states()).map(|s| q_pi.get(s, policy.action(s))).collect()
}
