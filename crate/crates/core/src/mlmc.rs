//! Threshold multilevel Monte Carlo estimates of the robust Bellman operator.
//!
//! One estimate at `(s, a)` draws a level `N ~ Geom(psi)` on `{0, 1, ...}`,
//! a base sample, and, when `N <= n_max`, a tail of `2^(N+1)` further
//! samples. The tail is split by position parity into two halves and
//!
//! ```text
//! estimate = base_term + (wc(full) - wc(even)/2 - wc(odd)/2) / P(N)
//! ```
//!
//! where `wc` is the worst case over the uncertainty ball and
//! `P(N) = psi (1 - psi)^N`. Above the threshold the correction is zero.
//!
//! The base term is the worst case of the point mass at the base sample.
//! For chi-square and KL that is just the sampled value. For TV with an
//! ambient minimum below it, the point-mass ball also reaches the ambient
//! minimum, and using its worst case keeps the telescoping sum exact: the
//! estimator's mean equals the mean worst case over `2^(n_max+1)` samples.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::dual::{self, Atom, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::generative::GenerativeModel;
use crate::math;
use crate::mdp::{QTable, UncertaintySpec};
use crate::rng::{self, Term};

/// Largest supported threshold; a level-62 tail already has 2^63 samples.
pub const MAX_N_MAX: u32 = 62;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmcConfig {
    pub psi: f64,
    pub n_max: u32,
    /// Pool the base sample into the full empirical distribution as well.
    pub include_base_in_full: bool,
}

impl MlmcConfig {
    pub fn new(psi: f64, n_max: u32) -> Result<Self> {
        let config = MlmcConfig {
            psi,
            n_max,
            include_base_in_full: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("psi must lie in (0, 1), got {}", self.psi)));
        }
        if self.n_max > MAX_N_MAX {
            return Err(Error::InvalidParameter(alloc::format!(
                "n_max must be at most {MAX_N_MAX}, got {}",
                self.n_max
            )));
        }
        Ok(())
    }

    /// Number of tail samples drawn at `level`.
    pub fn tail_len(&self, level: u32) -> u64 {
        if level <= self.n_max {
            1u64 << (level + 1)
        } else {
            0
        }
    }
}

impl Default for MlmcConfig {
    fn default() -> Self {
        MlmcConfig {
            psi: 0.5,
            n_max: 0,
            include_base_in_full: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleKind {
    Reward,
    Transition,
}

impl SampleKind {
    pub fn term(self) -> Term {
        match self {
            SampleKind::Reward => Term::Reward,
            SampleKind::Transition => Term::Transition,
        }
    }
}

/// Sampled outcomes: next-state indices or reward-support indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    pub base: usize,
    pub tail: Vec<usize>,
    pub level: u32,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        1 + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One estimator output with the bookkeeping needed by diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub level: u32,
    pub samples: u64,
}

/// Robust Bellman estimate at one cell, combining both terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorEstimate {
    pub value: f64,
    pub reward: Estimate,
    pub next_value: Estimate,
}

impl OperatorEstimate {
    pub fn samples(&self) -> u64 {
        self.reward.samples + self.next_value.samples
    }
}

/// State values `V(s) = max_a Q(s, a)` and their minimum over all states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateValues {
    values: Vec<f64>,
    min: f64,
}

impl StateValues {
    pub fn new(values: Vec<f64>) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        StateValues { values, min }
    }

    pub fn from_q(q: &QTable) -> Self {
        StateValues::new(q.value_vector())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.min
    }
}

/// Draws `N` with `P(N = n) = psi (1 - psi)^n`.
pub fn sample_level<R: Rng + ?Sized>(rng: &mut R, psi: f64) -> u32 {
    let geo = Geometric::new(psi).expect("psi in (0, 1)");
    u32::try_from(geo.sample(rng)).unwrap_or(u32::MAX)
}

/// `P(N = level)` for the geometric level law.
pub fn level_probability(psi: f64, level: u32) -> f64 {
    psi * math::powi(1.0 - psi, level)
}

/// Draws a base sample then the tail at the given level, feeding each
/// outcome to `sink(position, outcome)`; position 0 is the base sample.
/// Returns the number of samples drawn.
#[allow(clippy::too_many_arguments)]
pub fn draw_into<G, R, F>(
    gen: &G,
    s: usize,
    a: usize,
    kind: SampleKind,
    level: u32,
    config: &MlmcConfig,
    rng: &mut R,
    mut sink: F,
) -> u64
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(u64, usize),
{
    let draw = |rng: &mut R| match kind {
        SampleKind::Reward => gen.sample_reward_index(s, a, rng),
        SampleKind::Transition => gen.sample_next_state(s, a, rng),
    };
    sink(0, draw(rng));
    let tail = config.tail_len(level);
    for pos in 1..=tail {
        sink(pos, draw(rng));
    }
    1 + tail
}

/// Materializes the batch for a given level.
pub fn draw_batch<G, R>(
    gen: &G,
    s: usize,
    a: usize,
    kind: SampleKind,
    level: u32,
    config: &MlmcConfig,
    rng: &mut R,
) -> SampleBatch
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let mut base = 0;
    let mut tail = Vec::with_capacity(config.tail_len(level) as usize);
    draw_into(gen, s, a, kind, level, config, rng, |pos, outcome| {
        if pos == 0 {
            base = outcome;
        } else {
            tail.push(outcome);
        }
    });
    SampleBatch { base, tail, level }
}

/// Per-outcome counts of a tail, split by 1-based position parity.
#[derive(Debug, Clone)]
struct Tally {
    odd: Vec<u64>,
    even: Vec<u64>,
    base: usize,
    tail_len: u64,
}

impl Tally {
    fn new(outcomes: usize) -> Self {
        Tally {
            odd: vec![0; outcomes],
            even: vec![0; outcomes],
            base: 0,
            tail_len: 0,
        }
    }

    #[inline]
    fn push(&mut self, pos: u64, outcome: usize) {
        if pos == 0 {
            self.base = outcome;
        } else {
            self.tail_len += 1;
            if pos % 2 == 1 {
                self.odd[outcome] += 1;
            } else {
                self.even[outcome] += 1;
            }
        }
    }

    fn splits(
        &self,
        values: &[f64],
        ambient_min: f64,
        include_base: bool,
    ) -> Result<(DiscreteDistribution, DiscreteDistribution, DiscreteDistribution)> {
        if self.tail_len == 0 {
            return Err(Error::EmptyTail);
        }
        let half = (self.tail_len / 2) as f64;
        let full_n = self.tail_len as f64 + if include_base { 1.0 } else { 0.0 };
        let mut full = Vec::new();
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (outcome, &value) in values.iter().enumerate() {
            let (o, e) = (self.odd[outcome], self.even[outcome]);
            let mut f = o + e;
            if include_base && outcome == self.base {
                f += 1;
            }
            if f > 0 {
                full.push(Atom {
                    value,
                    prob: f as f64 / full_n,
                });
            }
            if o > 0 {
                odd.push(Atom {
                    value,
                    prob: o as f64 / half,
                });
            }
            if e > 0 {
                even.push(Atom {
                    value,
                    prob: e as f64 / half,
                });
            }
        }
        Ok((
            DiscreteDistribution::new(full, ambient_min)?,
            DiscreteDistribution::new(even, ambient_min)?,
            DiscreteDistribution::new(odd, ambient_min)?,
        ))
    }
}

/// Full, even and odd empirical distributions of a batch's tail.
/// `values[outcome]` is the value attached to each outcome index.
pub fn empirical_splits(
    batch: &SampleBatch,
    values: &[f64],
    ambient_min: f64,
) -> Result<(DiscreteDistribution, DiscreteDistribution, DiscreteDistribution)> {
    empirical_splits_with(batch, values, ambient_min, false)
}

/// As [`empirical_splits`], optionally pooling the base sample into `full`.
pub fn empirical_splits_with(
    batch: &SampleBatch,
    values: &[f64],
    ambient_min: f64,
    include_base_in_full: bool,
) -> Result<(DiscreteDistribution, DiscreteDistribution, DiscreteDistribution)> {
    let mut tally = Tally::new(values.len());
    tally.push(0, batch.base);
    for (i, &outcome) in batch.tail.iter().enumerate() {
        if outcome >= values.len() {
            return Err(Error::InvalidParameter(alloc::format!("outcome {outcome} has no value")));
        }
        tally.push(i as u64 + 1, outcome);
    }
    tally.splits(values, ambient_min, include_base_in_full)
}

/// `wc(full) - wc(even)/2 - wc(odd)/2`.
pub fn delta_correction(
    full: &DiscreteDistribution,
    even: &DiscreteDistribution,
    odd: &DiscreteDistribution,
    spec: &UncertaintySpec,
) -> Result<f64> {
    let f = dual::worst_case(full, spec)?.value;
    let e = dual::worst_case(even, spec)?.value;
    let o = dual::worst_case(odd, spec)?.value;
    Ok(f - 0.5 * e - 0.5 * o)
}

/// Worst case of the point mass at `value`.
pub fn base_term(value: f64, ambient_min: f64, spec: &UncertaintySpec) -> Result<f64> {
    let point = DiscreteDistribution::point_mass(value, ambient_min)?;
    Ok(dual::worst_case(&point, spec)?.value)
}

#[allow(clippy::too_many_arguments)]
fn estimate_at_level<G, R>(
    gen: &G,
    s: usize,
    a: usize,
    kind: SampleKind,
    values: &[f64],
    ambient_min: f64,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    level: u32,
    rng: &mut R,
) -> Result<Estimate>
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let mut tally = Tally::new(values.len());
    let samples = draw_into(gen, s, a, kind, level, config, rng, |pos, outcome| tally.push(pos, outcome));
    let mut value = base_term(values[tally.base], ambient_min, spec)?;
    if tally.tail_len > 0 {
        let (full, even, odd) = tally.splits(values, ambient_min, config.include_base_in_full)?;
        let delta = delta_correction(&full, &even, &odd, spec)?;
        value += delta / level_probability(config.psi, level);
    }
    Ok(Estimate { value, level, samples })
}

/// Reward-term estimate with an injected level.
pub fn reward_estimate_at_level<G, R>(
    gen: &G,
    s: usize,
    a: usize,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    level: u32,
    rng: &mut R,
) -> Result<Estimate>
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let support = gen.reward_support();
    let ambient_min = support.iter().copied().fold(f64::INFINITY, f64::min);
    estimate_at_level(gen, s, a, SampleKind::Reward, support, ambient_min, spec, config, level, rng)
}

/// Estimate of the worst-case expected reward at `(s, a)`.
pub fn reward_estimate<G, R>(
    gen: &G,
    s: usize,
    a: usize,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    rng: &mut R,
) -> Result<Estimate>
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let level = sample_level(rng, config.psi);
    reward_estimate_at_level(gen, s, a, spec, config, level, rng)
}

/// Next-state-value estimate with an injected level.
#[allow(clippy::too_many_arguments)]
pub fn value_estimate_at_level<G, R>(
    gen: &G,
    s: usize,
    a: usize,
    values: &StateValues,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    level: u32,
    rng: &mut R,
) -> Result<Estimate>
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    estimate_at_level(
        gen,
        s,
        a,
        SampleKind::Transition,
        values.values(),
        values.min(),
        spec,
        config,
        level,
        rng,
    )
}

/// Estimate of the worst-case expected next-state value at `(s, a)`.
pub fn value_estimate<G, R>(
    gen: &G,
    s: usize,
    a: usize,
    values: &StateValues,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    rng: &mut R,
) -> Result<Estimate>
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let level = sample_level(rng, config.psi);
    value_estimate_at_level(gen, s, a, values, spec, config, level, rng)
}

/// Reward estimate plus `gamma` times next-value estimate, each from its
/// own stream.
#[allow(clippy::too_many_arguments)]
pub fn operator_estimate<G, R1, R2>(
    gen: &G,
    s: usize,
    a: usize,
    values: &StateValues,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    reward_rng: &mut R1,
    transition_rng: &mut R2,
) -> Result<OperatorEstimate>
where
    G: GenerativeModel + ?Sized,
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let reward = reward_estimate(gen, s, a, spec, config, reward_rng)?;
    let next_value = value_estimate(gen, s, a, values, spec, config, transition_rng)?;
    Ok(OperatorEstimate {
        value: reward.value + gen.gamma() * next_value.value,
        reward,
        next_value,
    })
}

/// [`operator_estimate`] on the counter-based streams for
/// `(seed, iteration, cell)`.
#[allow(clippy::too_many_arguments)]
pub fn operator_estimate_seeded<G>(
    gen: &G,
    s: usize,
    a: usize,
    values: &StateValues,
    spec: &UncertaintySpec,
    config: &MlmcConfig,
    seed: u64,
    iteration: u64,
) -> Result<OperatorEstimate>
where
    G: GenerativeModel + ?Sized,
{
    let cell = rng::cell_index(s, a, gen.num_actions());
    let mut reward_rng = rng::stream(seed, iteration, cell, Term::Reward);
    let mut transition_rng = rng::stream(seed, iteration, cell, Term::Transition);
    operator_estimate(gen, s, a, values, spec, config, &mut reward_rng, &mut transition_rng)
}
