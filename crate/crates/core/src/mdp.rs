//! Tabular MDP data model shared by every other module.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math;

/// Absolute tolerance for row sums of stochastic rows.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Divergence defining the (s,a)-rectangular uncertainty ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Divergence {
    /// Total variation.
    Tv,
    /// Chi-square divergence.
    Chi2,
    /// Kullback-Leibler divergence.
    Kl,
}

impl Divergence {
    pub const ALL: [Divergence; 3] = [Divergence::Tv, Divergence::Chi2, Divergence::Kl];

    pub fn name(self) -> &'static str {
        match self {
            Divergence::Tv => "tv",
            Divergence::Chi2 => "chi2",
            Divergence::Kl => "kl",
        }
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Divergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" => Ok(Divergence::Tv),
            "chi2" | "chi-square" | "chisq" => Ok(Divergence::Chi2),
            "kl" => Ok(Divergence::Kl),
            other => Err(Error::InvalidParameter(format!("unknown divergence `{other}` (expected tv, chi2 or kl)"))),
        }
    }
}

/// Divergence kind and radius of the uncertainty ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySpec {
    pub divergence: Divergence,
    pub sigma: f64,
}

impl UncertaintySpec {
    pub fn new(divergence: Divergence, sigma: f64) -> Result<Self> {
        let spec = UncertaintySpec { divergence, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uncertainty level must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Finite MDP with a nominal transition kernel and finite-support nominal
/// reward distributions.
///
/// Transition rows are stored flat as `[s][a][s']`, reward rows as
/// `[s][a][k]` where `k` indexes [`TabularMDP::reward_support`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward_support: Vec<f64>,
    reward_dist: Vec<f64>,
    gamma: f64,
    r_max: f64,
}

fn check_row(kind: &str, s: usize, a: usize, row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidModel(format!("{kind} row ({s}, {a}) has invalid entry {p}")));
        }
        sum += p;
    }
    if math::abs(sum - 1.0) > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{kind} row ({s}, {a}) sums to {sum}")));
    }
    Ok(())
}

impl TabularMDP {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward_support: Vec<f64>,
        reward_dist: Vec<f64>,
        gamma: f64,
        r_max: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel(format!(
                "state and action counts must be positive, got {num_states} x {num_actions}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!("discount factor must lie in (0, 1), got {gamma}")));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidModel(format!("r_max must be positive and finite, got {r_max}")));
        }
        if reward_support.is_empty() {
            return Err(Error::InvalidModel("reward support is empty".into()));
        }
        for (i, &r) in reward_support.iter().enumerate() {
            if !(r >= 0.0 && r <= r_max) {
                return Err(Error::InvalidModel(format!("reward {r} lies outside [0, {r_max}]")));
            }
            if reward_support[..i].contains(&r) {
                return Err(Error::InvalidModel(format!("reward support repeats value {r}")));
            }
        }
        let pairs = num_states * num_actions;
        if transition.len() != pairs * num_states {
            return Err(Error::InvalidModel(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                pairs * num_states
            )));
        }
        let k = reward_support.len();
        if reward_dist.len() != pairs * k {
            return Err(Error::InvalidModel(format!(
                "reward distribution has {} entries, expected {}",
                reward_dist.len(),
                pairs * k
            )));
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let i = s * num_actions + a;
                check_row("transition", s, a, &transition[i * num_states..(i + 1) * num_states])?;
                check_row("reward", s, a, &reward_dist[i * k..(i + 1) * k])?;
            }
        }
        Ok(TabularMDP {
            num_states,
            num_actions,
            transition,
            reward_support,
            reward_dist,
            gamma,
            r_max,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn reward_support(&self) -> &[f64] {
        &self.reward_support
    }

    /// Smallest declared reward; the ambient minimum for reward balls.
    pub fn reward_min(&self) -> f64 {
        self.reward_support.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `r_max / (1 - gamma)`, the upper end of the valid Q range.
    pub fn value_upper_bound(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let i = s * self.num_actions + a;
        &self.transition[i * self.num_states..(i + 1) * self.num_states]
    }

    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let k = self.reward_support.len();
        let i = s * self.num_actions + a;
        &self.reward_dist[i * k..(i + 1) * k]
    }

    /// Flat `[s][a][s']` kernel.
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// Flat `[s][a][k]` reward probabilities.
    pub fn reward_dist(&self) -> &[f64] {
        &self.reward_dist
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.reward_row(s, a).iter().zip(&self.reward_support).map(|(p, r)| p * r).sum()
    }

    /// Same model with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        TabularMDP::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            self.reward_support.clone(),
            self.reward_dist.clone(),
            gamma,
            self.r_max,
        )
    }

    /// Smallest strictly positive entry of the nominal kernel.
    pub fn min_nonzero_entry(&self) -> Result<f64> {
        self.transition
            .iter()
            .copied()
            .filter(|&p| p > 0.0)
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |m| m.min(p))))
            .ok_or(Error::EmptyKernel)
    }
}

/// Action-value table indexed `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        QTable {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_vec(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || values.len() != num_states * num_actions {
            return Err(Error::InvalidParameter(format!(
                "Q-table of shape {num_states} x {num_actions} cannot hold {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("Q-table entry {v} is not finite")));
        }
        Ok(QTable {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::InvalidParameter("Q-table rows have different lengths".into()));
        }
        QTable::from_vec(rows.len(), num_actions, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.num_actions).map(<[f64]>::to_vec).collect()
    }

    /// `V(s) = max_a Q(s, a)`.
    pub fn value_vector(&self) -> Vec<f64> {
        self.values
            .chunks(self.num_actions)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Greedy policy with ties broken towards the smallest action index.
    pub fn greedy_policy(&self) -> Policy {
        let actions = self
            .values
            .chunks(self.num_actions)
            .map(|row| {
                let mut best = 0;
                for (a, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect();
        Policy {
            actions,
            num_actions: self.num_actions,
        }
    }

    /// Sup-norm distance between two tables of the same shape.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn clamp_all(&mut self, lo: f64, hi: f64) {
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Deterministic policy, one action per state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Policy {
    actions: Vec<usize>,
    num_actions: usize,
}

impl Policy {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::InvalidParameter(format!(
                "policy action {a} is out of range for {num_actions} actions"
            )));
        }
        Ok(Policy { actions, num_actions })
    }

    #[inline]
    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}
