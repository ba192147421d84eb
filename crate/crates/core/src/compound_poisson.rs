//! The compound-Poisson map `ξ ↦ e(ξ)` and the accompanying approximant
//! `η₀ = Σᵢ [aᵢ + e(ξᵢ − aᵢ)]`.
//!
//! `e(ξ)` is the law of `ξ⁽¹⁾ + ⋯ + ξ⁽ᶻ⁾` with `ζ ~ Poisson(1)` independent of
//! the i.i.d. copies, i.e. `e⁻¹ Σ_k ξ^{∗k} / k!`. For a law with atoms
//! `x_j` and weights `w_j` this equals the law of `Σ_j N_j x_j` with
//! independent `N_j ~ Poisson(w_j)`: the mass of a count vector `c` is
//! `e⁻¹ Π_j w_j^{c_j} / c_j!`. The exact form enumerates count vectors with
//! `|c| ≤ K`, which is the `k ≤ K` truncation of the series term by term,
//! and evaluates every support point as `Σ_j c_j x_j` in atom order, so each
//! point has exactly one floating-point evaluation path.

use std::sync::LazyLock;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::decompose;
use crate::distributions::{
    shift, AtomJson, DiscreteDistribution, InverseCdf, Point, SubProbabilityDistribution, SubProbabilityJson,
    DEFAULT_SUPPORT_CAP, PRUNE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::rng::{self, Rng};

pub const DEFAULT_TRUNCATION: usize = 40;

const INV_E: f64 = 0.367_879_441_171_442_33;

/// `e⁻¹ Σ_{k>K} 1/k!`, the mass lost by truncating the series at order `K`.
pub fn truncation_tail(k_max: usize) -> f64 {
    let mut term = INV_E;
    for k in 1..=k_max {
        term /= k as f64;
    }
    let mut terms = Vec::new();
    let mut k = k_max + 1;
    loop {
        term /= k as f64;
        if term == 0.0 || term < 1e-300 {
            break;
        }
        terms.push(term);
        k += 1;
    }
    pairwise_sum(&terms)
}

/// `e⁻¹ Σ_{k≤K} 1/k!`.
fn retained_mass(k_max: usize) -> f64 {
    let mut terms = Vec::with_capacity(k_max + 1);
    let mut term = INV_E;
    terms.push(term);
    for k in 1..=k_max {
        term /= k as f64;
        terms.push(term);
    }
    pairwise_sum(&terms)
}

/// Truncated compound-Poisson law `e⁻¹ Σ_{k=0}^{K} ξ^{∗k}/k!`, not
/// renormalized. Raw support is capped at [`DEFAULT_SUPPORT_CAP`].
pub fn compound_poisson_exact(dist: &DiscreteDistribution, k_max: usize) -> Result<SubProbabilityDistribution> {
    compound_poisson_exact_capped(dist, k_max, DEFAULT_SUPPORT_CAP)
}

pub fn compound_poisson_exact_capped(
    dist: &DiscreteDistribution,
    k_max: usize,
    cap: usize,
) -> Result<SubProbabilityDistribution> {
    let d = dist.dim();
    let n = dist.len();
    let mut coords: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut counts = vec![0usize; n];

    struct Walk<'a> {
        dist: &'a DiscreteDistribution,
        counts: &'a mut [usize],
        coords: &'a mut Vec<f64>,
        weights: &'a mut Vec<f64>,
        cap: usize,
        dim: usize,
    }

    impl Walk<'_> {
        fn emit(&mut self, w: f64) -> Result<()> {
            if self.weights.len() >= self.cap {
                return Err(Error::SupportOverflow { size: self.weights.len() + 1, cap: self.cap });
            }
            let mut x = vec![0.0; self.dim];
            for (j, &c) in self.counts.iter().enumerate() {
                if c > 0 {
                    let cf = c as f64;
                    for (xi, a) in x.iter_mut().zip(self.dist.point(j)) {
                        *xi += cf * a;
                    }
                }
            }
            self.coords.extend(x);
            self.weights.push(w);
            Ok(())
        }

        /// Visit count vectors whose first nonzero-able index is `j`, with
        /// `budget` copies left. `w` is the mass of the current vector.
        fn visit(&mut self, j: usize, budget: usize, w: f64) -> Result<()> {
            if j == self.counts.len() {
                return self.emit(w);
            }
            let wj = self.dist.weight(j);
            let mut wc = w;
            let mut c = 0;
            loop {
                self.counts[j] = c;
                self.visit(j + 1, budget - c, wc)?;
                if c == budget {
                    break;
                }
                c += 1;
                wc *= wj / c as f64;
                // Extensions only multiply by factors ≤ 1.
                if wc < PRUNE_THRESHOLD {
                    break;
                }
            }
            self.counts[j] = 0;
            Ok(())
        }
    }

    Walk { dist, counts: &mut counts, coords: &mut coords, weights: &mut weights, cap, dim: d }
        .visit(0, k_max, INV_E)?;

    let kept: Vec<f64> = weights.iter().copied().filter(|&w| w >= PRUNE_THRESHOLD).collect();
    let skipped = (retained_mass(k_max) - pairwise_sum(&kept)).max(0.0);
    SubProbabilityDistribution::from_parts(d, coords, weights, truncation_tail(k_max), skipped)
}

static POISSON1_CDF: LazyLock<[f64; 31]> = LazyLock::new(|| {
    let mut cdf = [0.0; 31];
    let mut p = INV_E;
    let mut acc = 0.0;
    for (k, c) in cdf.iter_mut().enumerate() {
        if k > 0 {
            p /= k as f64;
        }
        acc += p;
        *c = acc;
    }
    cdf
});

/// Poisson(1) draw by inversion: table lookup for `k ≤ 30`, sequential
/// search beyond.
pub fn sample_poisson1(rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let cdf = &*POISSON1_CDF;
    if u < cdf[30] {
        return cdf.partition_point(|&c| c <= u);
    }
    let mut p = INV_E;
    for k in 1..=30 {
        p /= k as f64;
    }
    let mut acc = cdf[30];
    let mut k = 30;
    while acc <= u && p > 0.0 {
        k += 1;
        p /= k as f64;
        acc += p;
    }
    k
}

fn draw_compound(dist: &DiscreteDistribution, s: &InverseCdf, rng: &mut Rng, out: &mut [f64]) {
    let zeta = sample_poisson1(rng);
    for _ in 0..zeta {
        let x = dist.point(s.draw(rng));
        for (o, a) in out.iter_mut().zip(x) {
            *o += a;
        }
    }
}

/// `n` draws of `e(ξ)` from stream 0 of `seed`.
pub fn compound_poisson_sample(dist: &DiscreteDistribution, seed: u64, n: usize) -> Vec<Point> {
    let mut rng = rng::stream(seed, 0);
    let s = dist.sampler();
    (0..n)
        .map(|_| {
            let mut x = vec![0.0; dist.dim()];
            draw_compound(dist, &s, &mut rng, &mut x);
            Point::from_vec(x)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampler,
}

/// One factor `aᵢ + e(ξᵢ − aᵢ)` of the approximant.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub shift: Point,
    /// The centered law `ξᵢ − aᵢ`.
    pub base: DiscreteDistribution,
    pub contamination: f64,
}

/// The infinitely divisible approximant `η₀`, as a convolution of shifted
/// compound-Poisson laws.
#[derive(Debug, Clone)]
pub struct Approximant {
    pub mode: Mode,
    pub dim: usize,
    /// Present in exact mode.
    pub exact_law: Option<SubProbabilityDistribution>,
    pub components: Vec<Component>,
    pub truncation: usize,
    /// Upper bound on the missing mass of `exact_law`: `n` times the
    /// per-factor truncation tail, plus mass pruned along the way.
    pub deficiency_bound: f64,
}

impl Approximant {
    /// Draws of `η₀` from the components, stream `stream_id` of `seed`.
    /// Coordinates are returned flat (`n · dim` values).
    pub fn sample_flat(&self, seed: u64, stream_id: u64, n: usize) -> Vec<f64> {
        let mut rng = rng::stream(seed, stream_id);
        let samplers: Vec<InverseCdf> = self.components.iter().map(|c| c.base.sampler()).collect();
        let mut out = vec![0.0; n * self.dim];
        for draw in out.chunks_mut(self.dim) {
            for (c, s) in self.components.iter().zip(&samplers) {
                for (o, a) in draw.iter_mut().zip(c.shift.coords()) {
                    *o += a;
                }
                draw_compound(&c.base, s, &mut rng, draw);
            }
        }
        out
    }

    pub fn to_json(&self) -> ApproximantJson {
        ApproximantJson {
            mode: self.mode,
            dim: self.dim,
            truncation: self.truncation,
            deficiency_bound: self.deficiency_bound,
            exact_law: self.exact_law.as_ref().map(|l| l.to_json()),
            components: self
                .components
                .iter()
                .map(|c| ComponentJson {
                    shift: c.shift.coords().to_vec(),
                    contamination: c.contamination,
                    base: c.base.atoms().map(|(x, w)| AtomJson { x: x.to_vec(), w }).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ApproximantJson {
    pub mode: Mode,
    pub dim: usize,
    pub truncation: usize,
    pub deficiency_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_law: Option<SubProbabilityJson>,
    pub components: Vec<ComponentJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComponentJson {
    pub shift: Vec<f64>,
    pub contamination: f64,
    pub base: Vec<AtomJson>,
}

/// Build `η₀` for the summands `dists` at radius `τ`: each summand is split
/// around a maximizing ball, `aᵢ` is the mean of its core, and the factors
/// `aᵢ + e(ξᵢ − aᵢ)` are convolved left to right.
pub fn build_eta0(dists: &[DiscreteDistribution], tau: f64, mode: Mode, k_max: usize) -> Result<Approximant> {
    build_eta0_capped(dists, tau, mode, k_max, DEFAULT_SUPPORT_CAP)
}

pub fn build_eta0_capped(
    dists: &[DiscreteDistribution],
    tau: f64,
    mode: Mode,
    k_max: usize,
    cap: usize,
) -> Result<Approximant> {
    let first = dists.first().ok_or(Error::EmptyInput("no summands"))?;
    let dim = first.dim();
    if let Some(d) = dists.iter().find(|d| d.dim() != dim) {
        return Err(Error::dim(dim, d.dim()));
    }
    let components: Vec<Component> = dists
        .par_iter()
        .map(|d| -> Result<Component> {
            let dec = decompose(d, tau)?;
            let base = shift(d, &dec.core_mean.neg())?;
            Ok(Component { shift: dec.core_mean, base, contamination: dec.contamination })
        })
        .collect::<Result<_>>()?;

    let tail = truncation_tail(k_max);
    let mut approx = Approximant {
        mode,
        dim,
        exact_law: None,
        components,
        truncation: k_max,
        deficiency_bound: tail * dists.len() as f64,
    };
    if mode == Mode::Exact {
        let factors: Vec<SubProbabilityDistribution> = approx
            .components
            .par_iter()
            .map(|c| compound_poisson_exact_capped(&c.base, k_max, cap)?.shift(&c.shift))
            .collect::<Result<_>>()?;
        let mut acc = factors[0].clone();
        for f in &factors[1..] {
            acc = acc.convolve(f, cap)?;
        }
        approx.deficiency_bound += acc.pruned_mass();
        approx.exact_law = Some(acc);
    }
    Ok(approx)
}
