//! Euclidean projection onto a polyhedron.
//!
//! Dykstra's cyclic projections produce an active-set guess, which is then
//! polished into the exact projection and accepted only if it satisfies the
//! KKT conditions. If no guess certifies, independent active sets are
//! enumerated exhaustively.

use serde::Serialize;

use super::Polyhedron;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy)]
pub struct ProjectOptions {
    /// Dykstra stops once a sweep moves the iterate less than `tol / 10`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Attempt an active-set polish every this many sweeps.
    pub polish_every: usize,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions { tol: 1e-10, max_sweeps: 20_000, polish_every: 8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance: f64,
    /// Constraints with positive multiplier at the projection.
    pub active: Vec<usize>,
    pub sweeps: usize,
}

const FEAS_SLACK: f64 = 1e-9;
const MULT_SLACK: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

pub fn project(p: &Polyhedron, x: &[f64], opts: &ProjectOptions) -> Result<Projection> {
    if x.len() != p.dim() {
        return Err(Error::dim(p.dim(), x.len()));
    }
    if p.is_empty() {
        return Err(Error::EmptyPolyhedron);
    }
    if p.contains_unchecked(x) {
        return Ok(Projection { point: x.to_vec(), distance: 0.0, active: vec![], sweeps: 0 });
    }

    // Single violated constraint.
    let mut viol: Vec<(usize, f64)> =
        (0..p.m()).map(|j| (j, linalg::dot(x, p.normal(j)) - p.offset(j))).filter(|&(_, v)| v > 0.0).collect();
    viol.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(j, _) in &viol {
        if let Some(pr) = try_active_set(p, x, &[j]) {
            return Ok(pr);
        }
    }

    // Dykstra with periodic polishing.
    let m = p.m();
    let d = p.dim();
    let mut y = x.to_vec();
    let mut incr = vec![vec![0.0; d]; m];
    let mut change = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let prev = y.clone();
        for (j, inc) in incr.iter_mut().enumerate() {
            let t = p.normal(j);
            let z = linalg::add(&y, inc);
            let excess = linalg::dot(&z, t) - p.offset(j);
            if excess > 0.0 {
                let proj = linalg::sub(&z, &linalg::scale(t, excess));
                *inc = linalg::sub(&z, &proj);
                y = proj;
            } else {
                *inc = vec![0.0; d];
                y = z;
            }
        }
        change = linalg::dist(&y, &prev);
        let done = change < opts.tol / 10.0;
        if done || sweeps % opts.polish_every.max(1) == 0 {
            if let Some(mut pr) = polish(p, x, &y, &incr) {
                pr.sweeps = sweeps;
                return Ok(pr);
            }
        }
        if done {
            break;
        }
    }

    if let Some(mut pr) = enumerate_active_sets(p, x) {
        pr.sweeps = sweeps;
        return Ok(pr);
    }
    Err(Error::NonConvergence { sweeps, change })
}

/// `dist(x, P)`.
pub fn distance(p: &Polyhedron, x: &[f64], opts: &ProjectOptions) -> Result<f64> {
    Ok(project(p, x, opts)?.distance)
}

/// `x ∈ P^λ`, i.e. `dist(x, P) < λ`, evaluated as `dist < λ − opts.tol`.
pub fn neighborhood_contains(p: &Polyhedron, lambda: f64, x: &[f64], opts: &ProjectOptions) -> Result<bool> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {lambda}")));
    }
    if x.len() != p.dim() {
        return Err(Error::dim(p.dim(), x.len()));
    }
    if p.is_empty() || lambda == 0.0 {
        return Ok(false);
    }
    if p.contains_unchecked(x) {
        return Ok(true);
    }
    // Every violation is a lower bound on the distance.
    if (0..p.m()).any(|j| linalg::dot(x, p.normal(j)) - p.offset(j) >= lambda) {
        return Ok(false);
    }
    Ok(project(p, x, opts)?.distance < lambda - opts.tol)
}

fn polish(p: &Polyhedron, x: &[f64], y: &[f64], incr: &[Vec<f64>]) -> Option<Projection> {
    let mut cand: Vec<(usize, f64)> =
        incr.iter().enumerate().map(|(j, q)| (j, linalg::dot(q, p.normal(j)))).filter(|&(_, mu)| mu > 0.0).collect();
    cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut set: Vec<usize> = Vec::new();
    for (j, _) in cand {
        set.push(j);
        let rows: Vec<&[f64]> = set.iter().map(|&k| p.normal(k)).collect();
        if linalg::rank(&rows, RANK_TOL) < set.len() {
            set.pop();
        }
    }
    if let Some(pr) = try_active_set(p, x, &set) {
        return Some(pr);
    }
    // Fall back to constraints tight at the current iterate.
    let mut tight: Vec<usize> = Vec::new();
    for j in 0..p.m() {
        if (linalg::dot(y, p.normal(j)) - p.offset(j)).abs() <= 1e-7 {
            tight.push(j);
            let rows: Vec<&[f64]> = tight.iter().map(|&k| p.normal(k)).collect();
            if linalg::rank(&rows, RANK_TOL) < tight.len() {
                tight.pop();
            }
        }
    }
    if tight != set {
        return try_active_set(p, x, &tight);
    }
    None
}

/// Project `x` onto `{⟨y, t_j⟩ = b_j : j ∈ set}` and accept if the KKT
/// conditions hold for `P`.
fn try_active_set(p: &Polyhedron, x: &[f64], set: &[usize]) -> Option<Projection> {
    if set.is_empty() {
        return None;
    }
    let k = set.len();
    let gram: Vec<Vec<f64>> =
        set.iter().map(|&i| set.iter().map(|&j| linalg::dot(p.normal(i), p.normal(j))).collect()).collect();
    let rhs: Vec<f64> = set.iter().map(|&j| linalg::dot(x, p.normal(j)) - p.offset(j)).collect();
    let mu = linalg::solve(&gram, &rhs, RANK_TOL)?;
    debug_assert_eq!(mu.len(), k);
    if mu.iter().any(|&u| u < -MULT_SLACK) {
        return None;
    }
    let mut y = x.to_vec();
    for (&j, &u) in set.iter().zip(&mu) {
        for (yi, ti) in y.iter_mut().zip(p.normal(j)) {
            *yi -= u * ti;
        }
    }
    let feasible = p.constraints().iter().all(|h| linalg::dot(&y, &h.t) <= h.b + FEAS_SLACK * (1.0 + h.b.abs()));
    if !feasible {
        return None;
    }
    let active = set.iter().zip(&mu).filter(|(_, &u)| u > MULT_SLACK).map(|(&j, _)| j).collect();
    Some(Projection { distance: linalg::dist(x, &y), point: y, active, sweeps: 0 })
}

/// Try every linearly independent active set of size ≤ min(d, m).
fn enumerate_active_sets(p: &Polyhedron, x: &[f64]) -> Option<Projection> {
    let kmax = p.dim().min(p.m());
    let mut best: Option<Projection> = None;
    let mut set = Vec::new();
    fn rec(p: &Polyhedron, x: &[f64], start: usize, kmax: usize, set: &mut Vec<usize>, best: &mut Option<Projection>) {
        if !set.is_empty() {
            if let Some(pr) = try_active_set(p, x, set) {
                if best.as_ref().is_none_or(|b| pr.distance < b.distance) {
                    *best = Some(pr);
                }
            }
        }
        if set.len() == kmax {
            return;
        }
        for j in start..p.m() {
            set.push(j);
            let rows: Vec<&[f64]> = set.iter().map(|&k| p.normal(k)).collect();
            if linalg::rank(&rows, RANK_TOL) == set.len() {
                rec(p, x, j + 1, kmax, set, best);
            }
            set.pop();
        }
    }
    rec(p, x, 0, kmax, &mut set, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedra::Halfspace;
    use crate::rng;
    use rand::Rng as _;

    fn square() -> Polyhedron {
        Polyhedron::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn corner_and_edge_projections() {
        let p = square();
        let o = ProjectOptions::default();
        let pr = project(&p, &[2.0, 2.0], &o).unwrap();
        assert!(linalg::dist(&pr.point, &[1.0, 1.0]) < 1e-12);
        assert!((pr.distance - 2f64.sqrt()).abs() < 1e-12);
        let pr = project(&p, &[0.5, -3.0], &o).unwrap();
        assert!(linalg::dist(&pr.point, &[0.5, 0.0]) < 1e-12);
        assert_eq!(project(&p, &[0.2, 0.3], &o).unwrap().distance, 0.0);
    }

    #[test]
    fn neighborhood_examples() {
        let p = square();
        let o = ProjectOptions::default();
        assert!(neighborhood_contains(&p, 0.5, &[1.2, 1.2], &o).unwrap());
        assert!(!neighborhood_contains(&p, 0.25, &[1.2, 1.2], &o).unwrap());
        assert!(!neighborhood_contains(&p, 1.0, &[3.0, 0.5], &o).unwrap());
        assert!(neighborhood_contains(&p, 1e-9, &[0.5, 0.5], &o).unwrap());
    }

    #[test]
    fn empty_polyhedron_errors() {
        let e =
            Polyhedron::new(1, vec![Halfspace { t: vec![1.0], b: 0.0 }, Halfspace { t: vec![-1.0], b: -1.0 }]).unwrap();
        assert!(matches!(project(&e, &[0.5], &ProjectOptions::default()), Err(Error::EmptyPolyhedron)));
    }

    #[test]
    fn variational_inequality_on_random_polytopes() {
        let mut r = rng::stream(7, 0);
        for _ in 0..40 {
            let d = r.random_range(2..=4);
            let m = r.random_range(d + 1..=8);
            let rows: Vec<(Vec<f64>, f64)> = (0..m)
                .map(|_| ((0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect(), r.random::<f64>() + 0.1))
                .collect();
            let p = Polyhedron::from_unnormalized(d, rows).unwrap();
            let box_p = p
                .with_constraints(Polyhedron::axis_box(&vec![-5.0; d], &vec![5.0; d]).unwrap().constraints().to_vec())
                .unwrap();
            let x: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 10.0 - 5.0).collect();
            let pr = project(&box_p, &x, &ProjectOptions::default()).unwrap();
            assert!(box_p.contains_unchecked(&pr.point) || pr.distance > 0.0);
            let mut r2 = rng::stream(11, 0);
            for y in box_p.rejection_sample(200, &mut r2, 100_000).unwrap() {
                let lhs = linalg::dot(&linalg::sub(&x, &pr.point), &linalg::sub(&y, &pr.point));
                assert!(lhs <= 1e-9, "VI violated: {lhs}");
            }
        }
    }
}
