//! Benchmark models: Garnet, recycling robot, 4x4 FrozenLake, Gambler.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mdp::TabularMDP;

pub const GARNET_R_MAX: f64 = 200.0;
pub const GARNET_REWARD_ATOMS: usize = 10;
const GARNET_MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarnetOptions {
    pub gamma: f64,
    /// Per-step rewards `N(nu, psi)` clipped to `[0, 200]`, discretized onto
    /// an evenly spaced 10-atom support. Off: one fixed reward per cell.
    pub stochastic_rewards: bool,
}

impl Default for GarnetOptions {
    fn default() -> Self {
        GarnetOptions {
            gamma: 0.9,
            stochastic_rewards: false,
        }
    }
}

/// Random Garnet model with default options.
pub fn garnet(num_states: usize, num_actions: usize, seed: u64) -> Result<TabularMDP> {
    garnet_with(num_states, num_actions, seed, &GarnetOptions::default())
}

/// Random Garnet model: per cell, `omega, sigma, nu, psi ~ U[0, 100]`, the
/// kernel row is `|N(omega, sigma)|` draws normalized, the reward is
/// `N(nu, psi)` clipped to `[0, 200]`.
pub fn garnet_with(num_states: usize, num_actions: usize, seed: u64, options: &GarnetOptions) -> Result<TabularMDP> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidParameter("Garnet needs at least one state and one action".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = num_states * num_actions;
    let mut transition = Vec::with_capacity(cells * num_states);
    let mut reward_params = Vec::with_capacity(cells);
    for _ in 0..cells {
        let omega = rng.random_range(0.0..100.0);
        let sigma = rng.random_range(0.0..100.0);
        let nu = rng.random_range(0.0..100.0);
        let psi = rng.random_range(0.0..100.0);
        transition.extend(garnet_row(&mut rng, num_states, omega, sigma)?);
        reward_params.push((nu, psi));
    }

    let (support, reward_dist) = if options.stochastic_rewards {
        let step = GARNET_R_MAX / (GARNET_REWARD_ATOMS - 1) as f64;
        let support: Vec<f64> = (0..GARNET_REWARD_ATOMS).map(|k| k as f64 * step).collect();
        let mut dist = Vec::with_capacity(cells * GARNET_REWARD_ATOMS);
        for &(nu, psi) in &reward_params {
            dist.extend(binned_normal(&support, nu, psi));
        }
        (support, dist)
    } else {
        let mut rewards = Vec::with_capacity(cells);
        for &(nu, psi) in &reward_params {
            let draw = Normal::new(nu, psi)
                .map_err(|e| Error::InvalidModel(format!("{e}")))?
                .sample(&mut rng);
            rewards.push(draw.clamp(0.0, GARNET_R_MAX));
        }
        let mut support = rewards.clone();
        support.sort_by(f64::total_cmp);
        support.dedup();
        let mut dist = vec![0.0; cells * support.len()];
        for (cell, r) in rewards.iter().enumerate() {
            let k = support.partition_point(|x| x < r);
            dist[cell * support.len() + k] = 1.0;
        }
        (support, dist)
    };

    TabularMDP::new(
        num_states,
        num_actions,
        transition,
        support,
        reward_dist,
        options.gamma,
        GARNET_R_MAX,
    )
}

fn garnet_row(rng: &mut ChaCha8Rng, num_states: usize, omega: f64, sigma: f64) -> Result<Vec<f64>> {
    let normal = Normal::new(omega, sigma).map_err(|e| Error::InvalidModel(format!("{e}")))?;
    for _ in 0..GARNET_MAX_REDRAWS {
        let raw: Vec<f64> = (0..num_states).map(|_| libm::fabs(normal.sample(rng))).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(raw.into_iter().map(|x| x / total).collect());
        }
    }
    Err(Error::InvalidModel("Garnet kernel row degenerated to zero".into()))
}

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x - mean) / (sd * core::f64::consts::SQRT_2)))
}

/// Mass of `N(mean, sd)` rounded to the nearest support atom, with both
/// tails folded into the end atoms.
fn binned_normal(support: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    let n = support.len();
    if !(sd > 0.0) {
        let mut row = vec![0.0; n];
        let nearest = (0..n)
            .min_by(|&i, &j| libm::fabs(support[i] - mean).total_cmp(&libm::fabs(support[j] - mean)))
            .unwrap_or(0);
        row[nearest] = 1.0;
        return row;
    }
    let mut row = Vec::with_capacity(n);
    let mut lower = 0.0;
    for k in 0..n {
        let upper = if k + 1 == n {
            1.0
        } else {
            normal_cdf(0.5 * (support[k] + support[k + 1]), mean, sd)
        };
        row.push((upper - lower).max(0.0));
        lower = upper;
    }
    let total: f64 = row.iter().sum();
    row.into_iter().map(|p| p / total).collect()
}

pub mod robot {
    pub const LOW: usize = 0;
    pub const HIGH: usize = 1;
    pub const SEARCH: usize = 0;
    pub const WAIT: usize = 1;
    pub const RECHARGE: usize = 2;
}

/// Recycling robot with battery levels `{low, high}` and actions
/// `{search, wait, recharge}`.
///
/// Searching on a high battery keeps it high with probability `beta`;
/// searching on a low battery keeps it low with probability `alpha` and
/// otherwise depletes it, after which the robot is rescued to high with
/// reward 0 instead of 2. Waiting keeps the level with reward 1; recharging
/// moves to high with reward 0. Rewards live on `{0, 1, 2}`, `gamma = 0.9`.
pub fn recycling_robot(alpha: f64, beta: f64) -> Result<TabularMDP> {
    for (name, x) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {x}")));
        }
    }
    use robot::*;
    let (ns, na) = (2, 3);
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na * 3];
    let mut set = |s: usize, a: usize, next: [f64; 2], r: [f64; 3]| {
        transition[(s * na + a) * ns..(s * na + a + 1) * ns].copy_from_slice(&next);
        reward[(s * na + a) * 3..(s * na + a + 1) * 3].copy_from_slice(&r);
    };
    set(HIGH, SEARCH, [1.0 - beta, beta], [0.0, 0.0, 1.0]);
    set(LOW, SEARCH, [alpha, 1.0 - alpha], [1.0 - alpha, 0.0, alpha]);
    set(HIGH, WAIT, [0.0, 1.0], [0.0, 1.0, 0.0]);
    set(LOW, WAIT, [1.0, 0.0], [0.0, 1.0, 0.0]);
    set(HIGH, RECHARGE, [0.0, 1.0], [1.0, 0.0, 0.0]);
    set(LOW, RECHARGE, [0.0, 1.0], [1.0, 0.0, 0.0]);
    TabularMDP::new(ns, na, transition, vec![0.0, 1.0, 2.0], reward, 0.9, 2.0)
}

pub mod lake {
    pub const SIZE: usize = 4;
    pub const START: usize = 0;
    pub const GOAL: usize = 15;
    pub const HOLES: [usize; 4] = [5, 7, 11, 12];
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;
}

/// Classic 4x4 FrozenLake, states `row * 4 + col`, actions
/// `{up, down, left, right}`.
///
/// The intended move happens with probability `1 - slip`, each
/// perpendicular move with `slip / 2`; moves off the grid stay put. Holes
/// and the goal are absorbing with reward 0, and entering the goal pays 1.
/// `gamma = 0.95`.
pub fn frozen_lake_4x4(slip: f64) -> Result<TabularMDP> {
    if !(0.0..=1.0).contains(&slip) {
        return Err(Error::InvalidParameter(format!("slip must lie in [0, 1], got {slip}")));
    }
    use lake::*;
    let ns = SIZE * SIZE;
    let na = 4;
    let step = |s: usize, dir: usize| -> usize {
        let (r, c) = (s / SIZE, s % SIZE);
        match dir {
            UP if r > 0 => s - SIZE,
            DOWN if r + 1 < SIZE => s + SIZE,
            LEFT if c > 0 => s - 1,
            RIGHT if c + 1 < SIZE => s + 1,
            _ => s,
        }
    };
    let perpendicular = |dir: usize| if dir == UP || dir == DOWN { [LEFT, RIGHT] } else { [UP, DOWN] };
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na * 2];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            let cell = s * na + a;
            if s == GOAL || HOLES.contains(&s) {
                row[s] = 1.0;
                reward[cell * 2] = 1.0;
                continue;
            }
            row[step(s, a)] += 1.0 - slip;
            for d in perpendicular(a) {
                row[step(s, d)] += 0.5 * slip;
            }
            let p_goal = row[GOAL];
            reward[cell * 2] = 1.0 - p_goal;
            reward[cell * 2 + 1] = p_goal;
        }
    }
    TabularMDP::new(ns, na, transition, vec![0.0, 1.0], reward, 0.95, 1.0)
}

/// Gambler's problem on capital `0..=goal` with `floor(goal / 2)` stake
/// actions; action `a` stakes `a + 1`, or 1 when that exceeds
/// `min(s, goal - s)`. Reaching the goal pays 1; both ends are absorbing.
/// `gamma = 0.99`.
pub fn gambler(p_head: f64, goal: usize) -> Result<TabularMDP> {
    if !(p_head > 0.0 && p_head < 1.0) {
        return Err(Error::InvalidParameter(format!("p_head must lie in (0, 1), got {p_head}")));
    }
    if goal < 2 {
        return Err(Error::InvalidParameter(format!("goal must be at least 2, got {goal}")));
    }
    let ns = goal + 1;
    let na = goal / 2;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na * 2];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            let cell = s * na + a;
            if s == 0 || s == goal {
                row[s] = 1.0;
                reward[cell * 2] = 1.0;
                continue;
            }
            let mut stake = a + 1;
            if stake > s.min(goal - s) {
                stake = 1;
            }
            row[s + stake] += p_head;
            row[s - stake] += 1.0 - p_head;
            let p_win = if s + stake == goal { p_head } else { 0.0 };
            reward[cell * 2] = 1.0 - p_win;
            reward[cell * 2 + 1] = p_win;
        }
    }
    TabularMDP::new(ns, na, transition, vec![0.0, 1.0], reward, 0.99, 1.0)
}
