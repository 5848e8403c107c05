//! Worst-case expectations over divergence balls.
//!
//! For a nominal distribution `p` over values `v`, each solver returns
//! `inf { E_q[v] : q in ball(p, sigma) }` by maximizing the corresponding
//! scalar dual objective over `alpha`:
//!
//! * TV: `E_p[(v)_alpha] - sigma/2 * (alpha - m)` where `(v)_alpha =
//!   min(v, alpha)` and `m` is the ambient minimum. Concave and piecewise
//!   linear, so it is solved exactly on its breakpoints.
//! * chi-square: `E_p[(v)_alpha] - sqrt(sigma * Var_p[(v)_alpha])`, concave
//!   between consecutive atom values; golden-section search per interval.
//! * KL: `-alpha * log E_p[exp(-v / alpha)] - alpha * sigma`, concave in
//!   `alpha`; golden-section search plus the `alpha -> 0+` limit.
//!
//! [`oracle`] solves the primal problems by nested brute-force search and is
//! only meant for testing.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{Divergence, UncertaintySpec, STOCHASTIC_TOL};

pub mod oracle;

pub use oracle::worst_case_oracle;

/// Relative bracket tolerance for the golden-section searches.
pub const SEARCH_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Weighted atoms plus the minimum of the value function over the whole
/// ambient space.
///
/// The ambient minimum may be strictly smaller than every atom value: the
/// TV ball contains distributions that put mass on points the nominal
/// distribution never visits.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
    ambient_min: f64,
}

impl DiscreteDistribution {
    /// Builds a distribution, dropping zero-probability atoms.
    pub fn new(atoms: Vec<Atom>, ambient_min: f64) -> Result<Self> {
        let mut sum = 0.0;
        for atom in &atoms {
            if !(atom.prob >= 0.0) || !atom.prob.is_finite() || !atom.value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "invalid atom (value {}, prob {})",
                    atom.value, atom.prob
                )));
            }
            sum += atom.prob;
        }
        if math::abs(sum - 1.0) > STOCHASTIC_TOL {
            return Err(Error::InvalidParameter(format!("atom probabilities sum to {sum}")));
        }
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.prob > 0.0).collect();
        let min_value = atoms.iter().map(|a| a.value).fold(f64::INFINITY, f64::min);
        if !ambient_min.is_finite() || ambient_min > min_value {
            return Err(Error::InvalidParameter(format!(
                "ambient minimum {ambient_min} exceeds the smallest atom value {min_value}"
            )));
        }
        Ok(DiscreteDistribution { atoms, ambient_min })
    }

    /// Pairs `values[i]` with `probs[i]`.
    pub fn from_weights(values: &[f64], probs: &[f64], ambient_min: f64) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        let atoms = values.iter().zip(probs).map(|(&value, &prob)| Atom { value, prob }).collect();
        DiscreteDistribution::new(atoms, ambient_min)
    }

    pub fn point_mass(value: f64, ambient_min: f64) -> Result<Self> {
        DiscreteDistribution::new(alloc::vec![Atom { value, prob: 1.0 }], ambient_min)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn ambient_min(&self) -> f64 {
        self.ambient_min
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }

    /// Smallest atom value, i.e. the minimum over the support.
    pub fn min_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.value).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds `c` to every atom value and to the ambient minimum.
    pub fn shifted(&self, c: f64) -> Self {
        DiscreteDistribution {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    value: a.value + c,
                    prob: a.prob,
                })
                .collect(),
            ambient_min: self.ambient_min + c,
        }
    }

    /// Distinct atom values in increasing order with their merged masses.
    fn sorted_levels(&self) -> Vec<Atom> {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if last.value == atom.value => last.prob += atom.prob,
                _ => merged.push(atom),
            }
        }
        merged
    }
}

/// Optimal value and maximizing dual variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualResult {
    pub value: f64,
    /// `f64::INFINITY` for the KL problem at `sigma = 0`, where the dual
    /// supremum is only approached as `alpha` grows.
    pub alpha_star: f64,
}

/// Componentwise `min(v, alpha)`.
pub fn truncate(values: &[f64], alpha: f64) -> Vec<f64> {
    values.iter().map(|&v| v.min(alpha)).collect()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "uncertainty level must be finite and nonnegative, got {sigma}"
        )));
    }
    Ok(())
}

/// TV dual objective at `alpha`.
pub fn tv_objective(dist: &DiscreteDistribution, sigma: f64, alpha: f64) -> f64 {
    let truncated: f64 = dist.atoms.iter().map(|a| a.prob * a.value.min(alpha)).sum();
    truncated - 0.5 * sigma * (alpha - dist.ambient_min)
}

/// Chi-square dual objective at `alpha`.
pub fn chi2_objective(dist: &DiscreteDistribution, sigma: f64, alpha: f64) -> f64 {
    let mean: f64 = dist.atoms.iter().map(|a| a.prob * a.value.min(alpha)).sum();
    let var: f64 = dist
        .atoms
        .iter()
        .map(|a| {
            let d = a.value.min(alpha) - mean;
            a.prob * d * d
        })
        .sum();
    mean - math::sqrt(sigma * var.max(0.0))
}

/// KL dual objective at `alpha > 0`, evaluated with a shift by the support
/// minimum so that small `alpha` does not underflow.
pub fn kl_objective(dist: &DiscreteDistribution, sigma: f64, alpha: f64) -> f64 {
    let v_min = dist.min_value();
    v_min - alpha * kl_log_moment(&dist.atoms, v_min, alpha) - alpha * sigma
}

// log E_p[exp(-(v - v_min) / alpha)], accurate both for tiny and huge alpha.
fn kl_log_moment(atoms: &[Atom], v_min: f64, alpha: f64) -> f64 {
    let s: f64 = atoms.iter().map(|a| a.prob * math::exp_m1(-(a.value - v_min) / alpha)).sum();
    math::ln_1p(s.max(-1.0))
}

/// Worst case over `{q : ||q - p||_1 <= sigma}` on the ambient space.
pub fn worst_case_tv(dist: &DiscreteDistribution, sigma: f64) -> Result<DualResult> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(DualResult {
            value: dist.mean(),
            alpha_star: dist.max_value(),
        });
    }
    let levels = dist.sorted_levels();
    let m = dist.ambient_min;

    // Candidate alpha = m: everything truncates to m.
    let mut best = DualResult { value: m, alpha_star: m };

    // At alpha = levels[k]: E[(v)_alpha] = sum_{i<k} p_i v_i + alpha * sum_{i>=k} p_i.
    let mut tail: Vec<f64> = levels.iter().map(|a| a.prob).collect();
    for i in (0..tail.len().saturating_sub(1)).rev() {
        tail[i] += tail[i + 1];
    }
    let mut head = 0.0;
    for (k, level) in levels.iter().enumerate() {
        let alpha = level.value;
        let obj = head + alpha * tail[k] - 0.5 * sigma * (alpha - m);
        if obj > best.value {
            best = DualResult { value: obj, alpha_star: alpha };
        }
        head += level.prob * level.value;
    }
    Ok(best)
}

/// Worst case over `{q << p : sum (q - p)^2 / p <= sigma}`.
pub fn worst_case_chi2(dist: &DiscreteDistribution, sigma: f64) -> Result<DualResult> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(DualResult {
            value: dist.mean(),
            alpha_star: dist.max_value(),
        });
    }
    let levels = dist.sorted_levels();
    if levels.len() == 1 {
        let c = levels[0].value;
        return Ok(DualResult { value: c, alpha_star: c });
    }

    // Kept atoms 0..=k are summarized by their mass, mean and within-group
    // sum of squares (weighted Welford); the truncated tail sits at alpha.
    // Var = W_k + H_k T_k (m_k - alpha)^2 has no cancellation.
    let n = levels.len();
    let mut head_mass = Vec::with_capacity(n);
    let mut head_mean = Vec::with_capacity(n);
    let mut head_ss = Vec::with_capacity(n);
    let (mut h, mut m, mut w) = (0.0, 0.0, 0.0);
    for level in &levels {
        let h_next = h + level.prob;
        let delta = level.value - m;
        m += level.prob / h_next * delta;
        w += level.prob * delta * (level.value - m);
        h = h_next;
        head_mass.push(h);
        head_mean.push(m);
        head_ss.push(w);
    }
    let mut tail_p = alloc::vec![0.0; n];
    for k in (0..n - 1).rev() {
        tail_p[k] = tail_p[k + 1] + levels[k + 1].prob;
    }
    // Objective for alpha in [levels[k], levels[k + 1]]: atoms 0..=k keep
    // their value, the rest are truncated to alpha.
    let piece = |k: usize, alpha: f64| -> f64 {
        let (hk, tk) = (head_mass[k], tail_p[k]);
        let mean = hk * head_mean[k] + tk * alpha;
        let d = head_mean[k] - alpha;
        let var = head_ss[k] + hk * tk / (hk + tk) * d * d;
        mean - math::sqrt(sigma * var.max(0.0))
    };

    let mut best = DualResult {
        value: levels[0].value,
        alpha_star: levels[0].value,
    };
    for k in 0..n - 1 {
        let (lo, hi) = (levels[k].value, levels[k + 1].value);
        let at_hi = piece(k, hi);
        if at_hi > best.value {
            best = DualResult { value: at_hi, alpha_star: hi };
        }
        let (x, fx) = math::golden_max(|alpha| piece(k, alpha), lo, hi, SEARCH_REL_TOL);
        if fx > best.value {
            best = DualResult { value: fx, alpha_star: x };
        }
    }
    Ok(best)
}

/// Worst case over `{q << p : KL(q || p) <= sigma}`.
pub fn worst_case_kl(dist: &DiscreteDistribution, sigma: f64) -> Result<DualResult> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(DualResult {
            value: dist.mean(),
            alpha_star: f64::INFINITY,
        });
    }
    let v_min = dist.min_value();
    let v_max = dist.max_value();
    let span = v_max - v_min;
    // alpha -> 0+ limit.
    let mut best = DualResult {
        value: v_min,
        alpha_star: 0.0,
    };
    if span <= 0.0 {
        return Ok(best);
    }
    // g(alpha) <= v_min + span - alpha * sigma, so beyond span / sigma the
    // objective is below the alpha -> 0+ limit.
    let hi = span / sigma;
    let lo = 1e-12 * (1.0 + math::abs(v_max));
    if hi > lo {
        let (x, fx) = math::golden_max(
            |alpha| v_min - alpha * kl_log_moment(&dist.atoms, v_min, alpha) - alpha * sigma,
            lo,
            hi,
            SEARCH_REL_TOL,
        );
        if fx > best.value {
            best = DualResult { value: fx, alpha_star: x };
        }
    }
    Ok(best)
}

/// Dispatches on the divergence kind.
pub fn worst_case(dist: &DiscreteDistribution, spec: &UncertaintySpec) -> Result<DualResult> {
    match spec.divergence {
        Divergence::Tv => worst_case_tv(dist, spec.sigma),
        Divergence::Chi2 => worst_case_chi2(dist, spec.sigma),
        Divergence::Kl => worst_case_kl(dist, spec.sigma),
    }
}
