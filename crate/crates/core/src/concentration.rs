//! Concentration functions of discrete laws and the core/tail split of a
//! summand around a maximizing ball.
//!
//! The ball form is `Q(ξ; τ) = sup_x P[|ξ − x| ≤ τ]` (closed ball). For a
//! discrete law the supremum is attained: the atoms captured by an optimal
//! ball have a minimal enclosing ball of radius `≤ τ`, whose center is the
//! circumcenter of at most `d + 1` affinely independent atoms. Evaluating
//! every atom and every such circumcenter therefore finds the maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{lex_cmp, mixture, DiscreteDistribution, Point};
use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum};

/// Default cap on the number of circumcenter candidates.
pub const DEFAULT_CANDIDATE_CAP: u128 = 10_000_000;

/// Relative slack on the closed-ball test, absorbing rounding in computed
/// circumcenters.
const BALL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub value: f64,
    /// Maximizing center (ball form) or left window endpoint (interval form).
    pub center: Point,
    pub radius: f64,
}

/// Closed-ball membership used by [`concentration_ball`] and [`decompose`].
pub fn in_ball(x: &[f64], center: &[f64], tau: f64) -> bool {
    linalg::dist(x, center) <= tau + BALL_SLACK * (1.0 + tau)
}

/// `sup_x P[x ≤ ξ ≤ x + τ]` for a law on the line, by a sliding window over
/// the sorted atoms. The reported center is the window's left endpoint.
pub fn concentration_interval_1d(dist: &DiscreteDistribution, tau: f64) -> Result<ConcentrationResult> {
    if dist.dim() != 1 {
        return Err(Error::dim(1, dist.dim()));
    }
    check_tau(tau)?;
    let xs: Vec<f64> = dist.atoms().map(|(x, _)| x[0]).collect();
    let ws = dist.weights();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut hi = 0;
    for lo in 0..xs.len() {
        if hi < lo {
            hi = lo;
        }
        let right = xs[lo] + tau;
        while hi + 1 < xs.len() && xs[hi + 1] <= right {
            hi += 1;
        }
        let v = pairwise_sum(&ws[lo..=hi]);
        if v > best.0 {
            best = (v, lo);
        }
    }
    Ok(ConcentrationResult { value: best.0.min(1.0), center: Point::from_vec(vec![xs[best.1]]), radius: tau })
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau must be finite and ≥ 0, got {tau}")))
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

/// Circumcenter of `pts` inside their affine hull, with its radius. `None`
/// when the points are affinely dependent.
pub fn circumcenter(pts: &[&[f64]]) -> Option<(Vec<f64>, f64)> {
    let p0 = pts[0];
    let vs: Vec<Vec<f64>> = pts[1..].iter().map(|p| linalg::sub(p, p0)).collect();
    let k = vs.len();
    if k == 0 {
        return Some((p0.to_vec(), 0.0));
    }
    let gram: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| linalg::dot(&vs[i], &vs[j])).collect()).collect();
    let rhs: Vec<f64> = (0..k).map(|i| 0.5 * gram[i][i]).collect();
    let scale = gram.iter().enumerate().map(|(i, r)| r[i]).fold(0.0, f64::max);
    let alpha = linalg::solve(&gram, &rhs, 1e-12 * scale.max(f64::MIN_POSITIVE))?;
    let mut c = p0.to_vec();
    for (a, v) in alpha.iter().zip(&vs) {
        for (ci, vi) in c.iter_mut().zip(v) {
            *ci += a * vi;
        }
    }
    let r = linalg::dist(&c, p0);
    Some((c, r))
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] != i + n - k {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
        if k == 0 {
            return;
        }
    }
}

/// `sup_x P[|ξ − x| ≤ τ]` with the default candidate cap.
pub fn concentration_ball(dist: &DiscreteDistribution, tau: f64) -> Result<ConcentrationResult> {
    concentration_ball_capped(dist, tau, DEFAULT_CANDIDATE_CAP)
}

/// Ball concentration; ties among maximizing candidates go to the
/// lexicographically smallest center.
pub fn concentration_ball_capped(dist: &DiscreteDistribution, tau: f64, cap: u128) -> Result<ConcentrationResult> {
    check_tau(tau)?;
    let n = dist.len();
    let d = dist.dim();
    let max_k = (d + 1).min(n);
    let count: u128 = (2..=max_k).map(|k| binomial(n, k)).fold(0u128, u128::saturating_add);
    if count > cap {
        return Err(Error::CandidateCap { count, cap });
    }

    let mut candidates: Vec<Vec<f64>> = dist.atoms().map(|(x, _)| x.to_vec()).collect();
    if tau > 0.0 {
        let mut pts: Vec<&[f64]> = Vec::with_capacity(max_k);
        for k in 2..=max_k {
            for_each_subset(n, k, &mut |idx| {
                // Cheap reject: every pair must fit in a ball of diameter 2τ.
                for a in 0..idx.len() {
                    for b in a + 1..idx.len() {
                        if !in_ball(dist.point(idx[a]), dist.point(idx[b]), 2.0 * tau) {
                            return;
                        }
                    }
                }
                pts.clear();
                pts.extend(idx.iter().map(|&i| dist.point(i)));
                if let Some((c, r)) = circumcenter(&pts) {
                    if r <= tau + BALL_SLACK * (1.0 + tau) {
                        candidates.push(c);
                    }
                }
            });
        }
    }

    let values: Vec<f64> = candidates.par_iter().map(|c| ball_mass(dist, c, tau)).collect();
    let mut best = 0;
    for i in 1..candidates.len() {
        if values[i] > values[best] || (values[i] == values[best] && lex_cmp(&candidates[i], &candidates[best]).is_lt())
        {
            best = i;
        }
    }
    Ok(ConcentrationResult {
        value: values[best].min(1.0),
        center: Point::from_vec(candidates.swap_remove(best)),
        radius: tau,
    })
}

/// Mass of the closed ball `B(center, τ)`.
pub fn ball_mass(dist: &DiscreteDistribution, center: &[f64], tau: f64) -> f64 {
    dist.probability(|x| in_ball(x, center, tau))
}

/// Split of a summand into a core law inside a maximizing ball and a tail
/// law outside it: `ξ = (1 − α) X + α Y` with `P[α = 1] = p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Center `a′` of the maximizing ball.
    pub center: Point,
    pub radius: f64,
    /// Contamination `p = 1 − Q(ξ; τ)`.
    pub contamination: f64,
    /// Conditional law inside `B(a′, τ)`.
    pub core: DiscreteDistribution,
    /// Conditional law outside the ball; `None` when `p = 0`.
    pub tail: Option<DiscreteDistribution>,
    /// `a = E X`.
    pub core_mean: Point,
}

impl Decomposition {
    /// `(1 − p) X + p Y`.
    pub fn reconstruct(&self) -> Result<DiscreteDistribution> {
        match &self.tail {
            None => Ok(self.core.clone()),
            Some(y) => mixture(&[(1.0 - self.contamination, &self.core), (self.contamination, y)]),
        }
    }
}

pub fn decompose(dist: &DiscreteDistribution, tau: f64) -> Result<Decomposition> {
    let q = concentration_ball(dist, tau)?;
    let c = q.center.coords().to_vec();
    let (core, _) = dist.condition(|x| in_ball(x, &c, tau)).expect("maximizing ball captures at least one atom");
    let tail = dist.condition(|x| !in_ball(x, &c, tau)).map(|(y, _)| y);
    let contamination = if tail.is_some() { (1.0 - q.value).max(0.0) } else { 0.0 };
    let core_mean = core.mean();
    Ok(Decomposition { center: q.center, radius: tau, contamination, core, tail, core_mean })
}

/// `max_i p_i` over the summands.
pub fn max_contamination(dists: &[DiscreteDistribution], tau: f64) -> Result<f64> {
    let first = dists.first().ok_or(Error::EmptyInput("no summands"))?;
    let mut p: f64 = 0.0;
    for d in dists {
        if d.dim() != first.dim() {
            return Err(Error::dim(first.dim(), d.dim()));
        }
        p = p.max(decompose(d, tau)?.contamination);
    }
    Ok(p)
}
