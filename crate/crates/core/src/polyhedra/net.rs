//! δ-nets of unit directions in a finitely generated cone.
//!
//! A set `V` of unit vectors in the cone is a δ-net if every unit `u` in the
//! cone has some `v ∈ V` with `⟨u, v⟩ ≥ 1 − δ`.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use super::Cone;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, Rng};

/// Random directions drawn to certify a net.
pub const NET_TEST_DIRECTIONS: usize = 10_000;
const MAX_ROUNDS: usize = 60;
const BASIS_TOL: f64 = 1e-10;

/// Build a δ-net of the unit directions of `cone`. The generators are
/// always members. Planar pointed cones get a deterministic arc grid with
/// angular step at most `arccos(1 − δ)`; other cones grow a net greedily
/// from random cone directions at margin `δ/2`. The result is certified on
/// [`NET_TEST_DIRECTIONS`] fresh random directions.
pub fn delta_net(cone: &Cone, delta: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut gens: Vec<Vec<f64>> = Vec::new();
    for g in &cone.generators {
        let u = linalg::normalize(g).ok_or_else(|| Error::InvalidArgument("zero cone generator".into()))?;
        if !gens.iter().any(|h| linalg::dist(h, &u) < 1e-12) {
            gens.push(u);
        }
    }
    if gens.is_empty() {
        return Err(Error::EmptyInput("cone generators"));
    }
    if gens.len() == 1 {
        return Ok(gens);
    }
    let basis = linalg::orthonormal_basis(&gens, BASIS_TOL);
    let mut rng = rng::stream(seed, 0);
    let mut net = gens.clone();
    if basis.len() == 2 {
        if let Some(arc) = arc_grid(&gens, &basis, delta) {
            net.extend(arc);
        }
    }
    let mut rounds = 0;
    loop {
        let mut grew = false;
        for _ in 0..NET_TEST_DIRECTIONS {
            let u = cone_direction(&gens, &mut rng);
            if coverage(&net, &u) < 1.0 - delta / 2.0 {
                net.push(u);
                grew = true;
            }
        }
        let failures = (0..NET_TEST_DIRECTIONS)
            .map(|_| cone_direction(&gens, &mut rng))
            .filter(|u| coverage(&net, u) < 1.0 - delta)
            .count();
        if failures == 0 {
            return Ok(net);
        }
        rounds += 1;
        if rounds >= MAX_ROUNDS || (!grew && rounds > 2) {
            return Err(Error::NetConstructionFailure { delta, rounds });
        }
    }
}

fn coverage(net: &[Vec<f64>], u: &[f64]) -> f64 {
    net.iter().map(|v| linalg::dot(u, v)).fold(f64::NEG_INFINITY, f64::max)
}

/// Random unit vector in the cone: Exp(1) weights on a random nonempty
/// subset of generators.
fn cone_direction(gens: &[Vec<f64>], rng: &mut Rng) -> Vec<f64> {
    loop {
        let k = gens.len();
        let size = rng.random_range(1..=k);
        let mut idx: Vec<usize> = (0..k).collect();
        for i in 0..size {
            let j = rng.random_range(i..k);
            idx.swap(i, j);
        }
        let mut v = vec![0.0; gens[0].len()];
        for &i in &idx[..size] {
            let w: f64 = Exp1.sample(rng);
            for (a, g) in v.iter_mut().zip(&gens[i]) {
                *a += w * g;
            }
        }
        if let Some(u) = linalg::normalize(&v) {
            return u;
        }
    }
}

/// Arc grid between the two extreme generators of a pointed planar cone.
/// Returns `None` when the generators are not contained in an open half-plane.
fn arc_grid(gens: &[Vec<f64>], basis: &[Vec<f64>], delta: f64) -> Option<Vec<Vec<f64>>> {
    use std::f64::consts::TAU;
    let mut angles: Vec<f64> =
        gens.iter().map(|g| linalg::dot(g, &basis[1]).atan2(linalg::dot(g, &basis[0])).rem_euclid(TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    let (mut gap, mut after) = (0.0, 0);
    for i in 0..n {
        let next = if i + 1 < n { angles[i + 1] } else { angles[0] + TAU };
        if next - angles[i] > gap {
            gap = next - angles[i];
            after = (i + 1) % n;
        }
    }
    let span = TAU - gap;
    if span >= std::f64::consts::PI - 1e-12 {
        return None;
    }
    let start = angles[after];
    let alpha = (1.0 - delta).acos();
    let steps = (span / alpha).ceil().max(1.0) as usize;
    let step = span / steps as f64;
    Some(
        (1..steps)
            .map(|i| {
                let th = start + step * i as f64;
                linalg::add(&linalg::scale(&basis[0], th.cos()), &linalg::scale(&basis[1], th.sin()))
            })
            .collect(),
    )
}
