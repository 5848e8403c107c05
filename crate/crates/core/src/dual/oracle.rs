//! Primal brute-force worst case, for testing the dual solvers.
//!
//! Minimizes `q . v` over the ball directly. The divergences are separable,
//! `rho(q, p) = sum_k phi_k(q_k)`, and the problem is convex, so the search
//! recurses one coordinate at a time: a coarse grid over the current
//! coordinate locates a feasible point, a golden-section search between the
//! neighbouring grid points refines it, and the last two coordinates are
//! solved exactly on their feasibility segment. Nothing here calls the dual
//! solvers or the crate's shared search helpers.

use alloc::format;
use alloc::vec::Vec;

use super::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::mdp::{Divergence, UncertaintySpec};

/// Largest support the oracle accepts.
pub const MAX_SUPPORT: usize = 3;

const FEASIBILITY_SLACK: f64 = 1e-15;
const SEARCH_ABS_TOL: f64 = 1e-11;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy)]
struct Coord {
    value: f64,
    prob: f64,
}

struct Problem {
    coords: Vec<Coord>,
    divergence: Divergence,
    sigma: f64,
    grid_step: f64,
}

/// Brute-force `inf { E_q[v] : rho(q, p) <= sigma }`.
///
/// TV is `||q - p||_1` over the ambient space, which adds a zero-probability
/// coordinate at the ambient minimum when it lies below the support.
/// Chi-square is `sum (q - p)^2 / p` and KL is `sum q ln(q / p)`, both over
/// the support of `p`.
pub fn worst_case_oracle(dist: &DiscreteDistribution, spec: &UncertaintySpec, grid_step: f64) -> Result<f64> {
    if dist.atoms().len() > MAX_SUPPORT {
        return Err(Error::OracleSupportTooLarge(dist.atoms().len()));
    }
    if !(grid_step > 0.0) || grid_step > 1.0 {
        return Err(Error::InvalidParameter(format!("grid step must lie in (0, 1], got {grid_step}")));
    }
    if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid uncertainty level {}", spec.sigma)));
    }
    let mut coords = Vec::with_capacity(MAX_SUPPORT + 1);
    if spec.divergence == Divergence::Tv {
        let support_min = dist.atoms().iter().map(|a| a.value).fold(f64::INFINITY, f64::min);
        if dist.ambient_min() < support_min {
            coords.push(Coord {
                value: dist.ambient_min(),
                prob: 0.0,
            });
        }
    }
    coords.extend(dist.atoms().iter().map(|a| Coord {
        value: a.value,
        prob: a.prob,
    }));
    let problem = Problem {
        coords,
        divergence: spec.divergence,
        sigma: spec.sigma,
        grid_step,
    };
    let best = problem.solve(0, 1.0, problem.sigma);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::InvalidParameter("oracle found no feasible distribution".into()))
    }
}

impl Problem {
    fn phi(&self, k: usize, q: f64) -> f64 {
        let p = self.coords[k].prob;
        match self.divergence {
            Divergence::Tv => libm::fabs(q - p),
            Divergence::Chi2 => (q - p) * (q - p) / p,
            Divergence::Kl => {
                if q <= 0.0 {
                    0.0
                } else {
                    q * libm::log(q / p)
                }
            }
        }
    }

    /// Minimum of `sum_{j >= k} v_j q_j` with `sum_{j >= k} q_j = rem` and
    /// `sum_{j >= k} phi_j(q_j) <= budget`; infinity when infeasible.
    fn solve(&self, k: usize, rem: f64, budget: f64) -> f64 {
        let n = self.coords.len();
        let rem = rem.max(0.0);
        if k + 1 == n {
            return if self.phi(k, rem) <= budget + FEASIBILITY_SLACK {
                self.coords[k].value * rem
            } else {
                f64::INFINITY
            };
        }
        if k + 2 == n {
            return self.solve_segment(k, rem, budget);
        }

        let h = |x: f64| self.coords[k].value * x + self.solve(k + 1, rem - x, budget - self.phi(k, x));

        let mut candidates: Vec<f64> = Vec::new();
        let mut i = 0u32;
        loop {
            let x = f64::from(i) * self.grid_step;
            if x >= rem {
                break;
            }
            candidates.push(x);
            i += 1;
        }
        candidates.push(rem);
        let tail_mass: f64 = self.coords[k..].iter().map(|c| c.prob).sum();
        if tail_mass > 0.0 {
            candidates.push((self.coords[k].prob * rem / tail_mass).min(rem));
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();

        let values: Vec<f64> = candidates.iter().map(|&x| h(x)).collect();
        let mut best_idx = None;
        for (idx, &val) in values.iter().enumerate() {
            if val.is_finite() && best_idx.is_none_or(|b: usize| val < values[b]) {
                best_idx = Some(idx);
            }
        }
        let Some(b) = best_idx else {
            return f64::INFINITY;
        };
        // h is convex (partial minimization of a convex problem), so the
        // minimizer lies between the neighbours of the best grid point.
        let lo = candidates[b.saturating_sub(1)];
        let hi = candidates[(b + 1).min(candidates.len() - 1)];
        let refined = golden_min(&h, lo, hi, candidates[b]);
        refined.min(values[b])
    }

    /// Exact solve for the last two coordinates: `q_k = x`, `q_{k+1} = rem - x`.
    fn solve_segment(&self, k: usize, rem: f64, budget: f64) -> f64 {
        let rho = |x: f64| self.phi(k, x) + self.phi(k + 1, rem - x);
        let limit = budget + FEASIBILITY_SLACK;
        let mut x_min = golden_argmin(&rho, 0.0, rem);
        let pair_mass = self.coords[k].prob + self.coords[k + 1].prob;
        if pair_mass > 0.0 {
            let proportional = (self.coords[k].prob * rem / pair_mass).min(rem);
            if rho(proportional) < rho(x_min) {
                x_min = proportional;
            }
        }
        if rho(x_min) > limit {
            return f64::INFINITY;
        }
        // Feasible x form an interval around x_min.
        let left = if rho(0.0) <= limit { 0.0 } else { bisect(&rho, limit, 0.0, x_min) };
        let right = if rho(rem) <= limit { rem } else { bisect(&rho, limit, rem, x_min) };
        let (vk, vn) = (self.coords[k].value, self.coords[k + 1].value);
        let objective = |x: f64| vk * x + vn * (rem - x);
        objective(left).min(objective(right))
    }
}

/// Golden-section minimum of a convex, possibly infinite-valued function.
/// `hint` is a point in `[lo, hi]` with a finite value; it steers the
/// bracket whenever both probes are infeasible.
fn golden_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, hint: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut hint = hint;
    let mut best = f64::INFINITY;
    while b - a > SEARCH_ABS_TOL {
        let x1 = b - INV_PHI * (b - a);
        let x2 = a + INV_PHI * (b - a);
        let (f1, f2) = (f(x1), f(x2));
        best = best.min(f1).min(f2);
        if f1.is_infinite() && f2.is_infinite() {
            if hint <= x1 {
                b = x1;
            } else if hint >= x2 {
                a = x2;
            } else {
                a = x1;
                b = x2;
            }
        } else if f1 <= f2 {
            b = x2;
            hint = x1;
        } else {
            a = x1;
            hint = x2;
        }
    }
    best
}

fn golden_argmin<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    while b - a > SEARCH_ABS_TOL {
        let x1 = b - INV_PHI * (b - a);
        let x2 = a + INV_PHI * (b - a);
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mid = 0.5 * (a + b);
    [lo, mid, hi].into_iter().fold(mid, |acc, x| if f(x) < f(acc) { x } else { acc })
}

/// Boundary of `{f <= limit}` between an infeasible `outside` and a
/// feasible `inside`, returned on the feasible side.
fn bisect<F: Fn(f64) -> f64>(f: &F, limit: f64, outside: f64, inside: f64) -> f64 {
    let (mut out, mut ins) = (outside, inside);
    for _ in 0..200 {
        let mid = 0.5 * (out + ins);
        if mid == out || mid == ins {
            break;
        }
        if f(mid) <= limit {
            ins = mid;
        } else {
            out = mid;
        }
    }
    ins
}
