//! Sampling access to the nominal model.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::TabularMDP;

/// A simulator that draws i.i.d. next states and rewards from the nominal
/// distributions at any state-action pair.
///
/// Rewards are reported as indices into [`reward_support`](Self::reward_support).
pub trait GenerativeModel: Sync {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn gamma(&self) -> f64;
    fn r_max(&self) -> f64;
    fn reward_support(&self) -> &[f64];

    fn sample_next_state<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize;

    fn sample_reward_index<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize;

    fn sample_reward<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> f64 {
        self.reward_support()[self.sample_reward_index(s, a, rng)]
    }
}

#[derive(Debug, Clone)]
enum RowSampler {
    /// Point masses cost no randomness.
    Point(usize),
    Weighted(WeightedIndex<f64>),
}

impl RowSampler {
    fn new(row: &[f64]) -> Result<Self> {
        let mut positive = row.iter().enumerate().filter(|(_, &p)| p > 0.0);
        let first = positive.next().map(|(i, _)| i).ok_or(Error::EmptyKernel)?;
        if positive.next().is_none() {
            return Ok(RowSampler::Point(first));
        }
        WeightedIndex::new(row)
            .map(RowSampler::Weighted)
            .map_err(|e| Error::InvalidModel(alloc::format!("{e}")))
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            RowSampler::Point(i) => *i,
            RowSampler::Weighted(w) => w.sample(rng),
        }
    }
}

/// Generative model backed by a known [`TabularMDP`].
#[derive(Debug, Clone)]
pub struct NominalModel {
    mdp: TabularMDP,
    transition: Vec<RowSampler>,
    reward: Vec<RowSampler>,
}

impl NominalModel {
    pub fn new(mdp: TabularMDP) -> Result<Self> {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let mut transition = Vec::with_capacity(ns * na);
        let mut reward = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                transition.push(RowSampler::new(mdp.transition_row(s, a))?);
                reward.push(RowSampler::new(mdp.reward_row(s, a))?);
            }
        }
        Ok(NominalModel { mdp, transition, reward })
    }

    pub fn mdp(&self) -> &TabularMDP {
        &self.mdp
    }
}

impl GenerativeModel for NominalModel {
    fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn r_max(&self) -> f64 {
        self.mdp.r_max()
    }

    fn reward_support(&self) -> &[f64] {
        self.mdp.reward_support()
    }

    #[inline]
    fn sample_next_state<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        self.transition[s * self.mdp.num_actions() + a].sample(rng)
    }

    #[inline]
    fn sample_reward_index<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        self.reward[s * self.mdp.num_actions() + a].sample(rng)
    }
}
