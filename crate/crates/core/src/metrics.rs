//! Distances between discrete laws: the orthant metric `L_λ`, the slab
//! metric `L_{λ,m}`, the neighborhood metric `π_{λ,m}`, the uniform
//! polyhedral distance `ρ_m`, and the inf-forms `inf{λ : f(λ) < λ}`.
//!
//! Suprema over the class of polyhedra are replaced by maxima over an
//! explicit [`PolyhedronFamily`], so those estimates are lower bounds.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::AtomicLaw;
use crate::error::{Error, Result};
use crate::linalg;
use crate::polyhedra::{project, Halfspace, Polyhedron, PolyhedronJson, ProjectOptions};
use crate::rng;

/// Largest orthant candidate grid evaluated by [`levy_orthant_lambda`].
pub const DEFAULT_GRID_CAP: u128 = 10_000_000;
/// Tolerance for the probe-point monotonicity check in [`bisect_inf`].
pub const MONOTONE_TOLERANCE: f64 = 1e-12;
/// Width of the final bracket in [`bisect_inf`].
pub const BISECT_TOLERANCE: f64 = 1e-6;
const BISECT_PROBES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    /// `max(raw, 0)`.
    pub value: f64,
    pub raw: f64,
    pub lambda: Option<f64>,
    pub family_size: usize,
    pub is_lower_bound: bool,
    pub mc_error: f64,
    /// Index of the first family member attaining the maximum.
    pub argmax: Option<usize>,
    /// Largest mass deficiency of the two inputs.
    pub deficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    User,
    Random { seed: u64, count: usize, scale: f64 },
    Orthant,
}

#[derive(Debug, Clone)]
pub struct PolyhedronFamily {
    members: Vec<Polyhedron>,
    m: usize,
    provenance: Provenance,
}

impl PolyhedronFamily {
    pub fn new(members: Vec<Polyhedron>, m: usize, provenance: Provenance) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyInput("family members"))?;
        let d = first.dim();
        for (i, p) in members.iter().enumerate() {
            if p.dim() != d {
                return Err(Error::dim(d, p.dim()));
            }
            if p.m() > m {
                return Err(Error::InvalidArgument(format!("member {i} has {} constraints, budget is {m}", p.m())));
            }
        }
        Ok(PolyhedronFamily { members, m, provenance })
    }

    pub fn members(&self) -> &[Polyhedron] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The first `k` members.
    pub fn prefix(&self, k: usize) -> Result<PolyhedronFamily> {
        let k = k.min(self.len());
        PolyhedronFamily::new(self.members[..k].to_vec(), self.m, self.provenance.clone())
    }

    pub fn to_json(&self) -> FamilyJson {
        FamilyJson { m: Some(self.m), members: self.members.iter().map(Polyhedron::to_json).collect() }
    }

    pub fn from_json_str(s: &str, source_name: &str) -> Result<Self> {
        let raw: FamilyJson =
            serde_json::from_str(s).map_err(|e| Error::Json { source_name: source_name.to_string(), source: e })?;
        let members = raw.members.into_iter().map(PolyhedronJson::into_polyhedron).collect::<Result<Vec<_>>>()?;
        let m = raw.m.unwrap_or_else(|| members.iter().map(Polyhedron::m).max().unwrap_or(0));
        PolyhedronFamily::new(members, m, Provenance::User)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Self::from_json_str(&s, &path.display().to_string())
    }
}

/// JSON form `{"m": m, "members": [polyhedron, ...]}`; `m` defaults to the
/// largest member constraint count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyJson {
    #[serde(default)]
    pub m: Option<usize>,
    pub members: Vec<PolyhedronJson>,
}

/// `count` random polyhedra with `m` constraints each. Normals are uniform
/// on the sphere; offsets are `⟨t_j, c⟩ + u·scale` with `c` drawn from
/// `anchors` (the origin if none) and `u` uniform on `[−1, 1]`. Member `i`
/// uses its own stream, so a smaller family is a prefix of a larger one.
pub fn random_family(
    m: usize,
    d: usize,
    count: usize,
    scale: f64,
    seed: u64,
    anchors: &[&[f64]],
) -> Result<PolyhedronFamily> {
    if m == 0 || d == 0 || count == 0 {
        return Err(Error::InvalidArgument("m, d and count must be ≥ 1".into()));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be ≥ 0, got {scale}")));
    }
    if let Some(a) = anchors.iter().find(|a| a.len() != d) {
        return Err(Error::dim(d, a.len()));
    }
    let origin = vec![0.0; d];
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let members = (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let cs = (0..m)
                .map(|_| {
                    let t = loop {
                        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
                        if let Some(t) = linalg::normalize(&g) {
                            break t;
                        }
                    };
                    let c: &[f64] = if anchors.is_empty() {
                        &origin
                    } else {
                        anchors[Uniform::new(0, anchors.len()).expect("nonempty").sample(&mut r)]
                    };
                    let b = linalg::dot(&t, c) + unit.sample(&mut r) * scale;
                    Halfspace { t, b }
                })
                .collect();
            Polyhedron::new(d, cs)
        })
        .collect::<Result<Vec<_>>>()?;
    PolyhedronFamily::new(members, m, Provenance::Random { seed, count, scale })
}

/// Orthants `{x : x ≤ c}` for each corner `c`.
pub fn orthant_family(corners: &[Vec<f64>]) -> Result<PolyhedronFamily> {
    let d = corners.first().ok_or(Error::EmptyInput("orthant corners"))?.len();
    let members = corners
        .iter()
        .map(|c| {
            if c.len() != d {
                return Err(Error::dim(d, c.len()));
            }
            let cs = (0..d)
                .map(|k| {
                    let mut e = vec![0.0; d];
                    e[k] = 1.0;
                    Halfspace { t: e, b: c[k] }
                })
                .collect();
            Polyhedron::new(d, cs)
        })
        .collect::<Result<Vec<_>>>()?;
    PolyhedronFamily::new(members, d, Provenance::Orthant)
}

fn check_dims(a: &impl AtomicLaw, b: &impl AtomicLaw) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dim(a.dim(), b.dim()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// Index-ordered maximum: ties go to the lowest index.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn estimate(
    raw: f64,
    lambda: Option<f64>,
    family_size: usize,
    argmax: Option<usize>,
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
) -> MetricEstimate {
    MetricEstimate {
        value: raw.max(0.0),
        raw,
        lambda,
        family_size,
        is_lower_bound: family_size > 0,
        mc_error: 0.0,
        argmax,
        deficiency: a.deficiency().max(b.deficiency()),
    }
}

/// Per-polyhedron slab term `max{P[a∈P] − P[b∈P_λ], P[b∈P] − P[a∈P_λ]}`.
pub fn slab_term(a: &impl AtomicLaw, b: &impl AtomicLaw, p: &Polyhedron, lambda: f64) -> f64 {
    let a_in = a.probability(|x| p.contains_unchecked(x));
    let b_in = b.probability(|x| p.contains_unchecked(x));
    let a_slab = a.probability(|x| p.slab_contains_unchecked(x, lambda));
    let b_slab = b.probability(|x| p.slab_contains_unchecked(x, lambda));
    (a_in - b_slab).max(b_in - a_slab)
}

/// Distances from every atom of `law` to `p` (`None` for empty `p`).
fn atom_distances(law: &impl AtomicLaw, p: &Polyhedron, opts: &ProjectOptions) -> Result<Option<Vec<f64>>> {
    if p.is_empty() {
        return Ok(None);
    }
    (0..law.len())
        .map(|i| {
            let x = law.point(i);
            if p.contains_unchecked(x) {
                Ok(0.0)
            } else {
                project(p, x, opts).map(|pr| pr.distance)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn mass_within(law: &impl AtomicLaw, dists: &[f64], inside: &[bool], lambda: f64, tol: f64) -> (f64, f64) {
    let pick = |keep: &dyn Fn(usize) -> bool| -> f64 {
        let w: Vec<f64> = (0..law.len()).filter(|&i| keep(i)).map(|i| law.weight(i)).collect();
        linalg::pairwise_sum(&w)
    };
    let p_in = pick(&|i| inside[i]);
    let p_nbhd = pick(&|i| lambda > 0.0 && dists[i] < lambda - tol);
    (p_in, p_nbhd)
}

/// Per-polyhedron neighborhood terms `max{P[a∈P] − P[b∈P^λ], …}` for each
/// `λ` in `lambdas`. An empty polyhedron contributes 0.
pub fn neighborhood_terms(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    p: &Polyhedron,
    lambdas: &[f64],
    opts: &ProjectOptions,
) -> Result<Vec<f64>> {
    let (Some(da), Some(db)) = (atom_distances(a, p, opts)?, atom_distances(b, p, opts)?) else {
        return Ok(vec![0.0; lambdas.len()]);
    };
    let ia: Vec<bool> = (0..a.len()).map(|i| p.contains_unchecked(a.point(i))).collect();
    let ib: Vec<bool> = (0..b.len()).map(|i| p.contains_unchecked(b.point(i))).collect();
    Ok(lambdas
        .iter()
        .map(|&l| {
            let (a_in, a_nb) = mass_within(a, &da, &ia, l, opts.tol);
            let (b_in, b_nb) = mass_within(b, &db, &ib, l, opts.tol);
            (a_in - b_nb).max(b_in - a_nb)
        })
        .collect())
}

/// Slab metric at each `λ` of `lambdas`, reduced over the family.
pub fn slab_metric_grid(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    lambdas: &[f64],
    fam: &PolyhedronFamily,
) -> Result<Vec<MetricEstimate>> {
    check_dims(a, b)?;
    if fam.dim() != a.dim() {
        return Err(Error::dim(a.dim(), fam.dim()));
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    let per_member: Vec<Vec<f64>> =
        fam.members().par_iter().map(|p| lambdas.iter().map(|&l| slab_term(a, b, p, l)).collect()).collect();
    Ok(reduce(&per_member, lambdas, a, b))
}

pub fn slab_metric_lambda(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    lambda: f64,
    fam: &PolyhedronFamily,
) -> Result<MetricEstimate> {
    Ok(slab_metric_grid(a, b, &[lambda], fam)?.remove(0))
}

/// Neighborhood metric at each `λ` of `lambdas`; distances are computed once
/// per atom and member.
pub fn neighborhood_metric_grid(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    lambdas: &[f64],
    fam: &PolyhedronFamily,
) -> Result<Vec<MetricEstimate>> {
    check_dims(a, b)?;
    if fam.dim() != a.dim() {
        return Err(Error::dim(a.dim(), fam.dim()));
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    let opts = ProjectOptions::default();
    let per_member: Vec<Vec<f64>> =
        fam.members().par_iter().map(|p| neighborhood_terms(a, b, p, lambdas, &opts)).collect::<Result<_>>()?;
    Ok(reduce(&per_member, lambdas, a, b))
}

pub fn neighborhood_metric_lambda(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    lambda: f64,
    fam: &PolyhedronFamily,
) -> Result<MetricEstimate> {
    Ok(neighborhood_metric_grid(a, b, &[lambda], fam)?.remove(0))
}

fn reduce(per_member: &[Vec<f64>], lambdas: &[f64], a: &impl AtomicLaw, b: &impl AtomicLaw) -> Vec<MetricEstimate> {
    lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let col: Vec<f64> = per_member.iter().map(|row| row[k]).collect();
            let (i, raw) = argmax(&col);
            estimate(raw, Some(l), per_member.len(), Some(i), a, b)
        })
        .collect()
}

/// `max_P |P[a∈P] − P[b∈P]|` over the family.
pub fn rho_m(a: &impl AtomicLaw, b: &impl AtomicLaw, fam: &PolyhedronFamily) -> Result<MetricEstimate> {
    check_dims(a, b)?;
    if fam.dim() != a.dim() {
        return Err(Error::dim(a.dim(), fam.dim()));
    }
    let terms: Vec<f64> = fam
        .members()
        .par_iter()
        .map(|p| {
            let pa = a.probability(|x| p.contains_unchecked(x));
            let pb = b.probability(|x| p.contains_unchecked(x));
            (pa - pb).abs()
        })
        .collect();
    let (i, raw) = argmax(&terms);
    Ok(estimate(raw, None, fam.len(), Some(i), a, b))
}

pub fn levy_orthant_lambda(a: &impl AtomicLaw, b: &impl AtomicLaw, lambda: f64) -> Result<MetricEstimate> {
    levy_orthant_lambda_capped(a, b, lambda, DEFAULT_GRID_CAP)
}

/// Exact orthant metric
/// `sup_x max{P[a ≤ x] − P[b ≤ x + λ1], P[b ≤ x] − P[a ≤ x + λ1]}`.
///
/// For the first term only corners whose coordinates are atom coordinates
/// of `a` need checking (the first probability is a right-continuous step
/// function, the subtracted one is nondecreasing); symmetrically for the
/// second. `x → −∞` contributes 0.
pub fn levy_orthant_lambda_capped(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    lambda: f64,
    cap: u128,
) -> Result<MetricEstimate> {
    check_dims(a, b)?;
    check_lambda(lambda)?;
    let t1 = orthant_sup(a, b, lambda, cap)?;
    let t2 = orthant_sup(b, a, lambda, cap)?;
    let raw = t1.max(t2);
    let raw = if raw.is_finite() { raw } else { 0.0 };
    Ok(estimate(raw, Some(lambda), 0, None, a, b))
}

fn orthant_sup(lo: &impl AtomicLaw, hi: &impl AtomicLaw, lambda: f64, cap: u128) -> Result<f64> {
    let d = lo.dim();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut v: Vec<f64> = (0..lo.len()).map(|i| lo.point(i)[k]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let count = axes.iter().map(|v| v.len() as u128).product::<u128>();
    if count > cap {
        return Err(Error::CandidateCap { count, cap });
    }
    if count == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let best = (0..count as u64)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                let n = axes[k].len() as u64;
                x[k] = axes[k][(idx % n) as usize];
                idx /= n;
            }
            let p = lo.probability(|y| y.iter().zip(&x).all(|(yi, xi)| yi <= xi));
            let q = hi.probability(|y| y.iter().zip(&x).all(|(yi, xi)| *yi <= xi + lambda));
            p - q
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfResult {
    pub value: f64,
    /// No crossing in `(0, λ_max]`; `value` is `λ_max`.
    pub saturated: bool,
}

/// `inf{λ ∈ (0, λ_max] : f(λ) < λ}` for nonincreasing `f`.
pub fn bisect_inf(f: impl Fn(f64) -> Result<f64>, lambda_max: f64) -> Result<InfResult> {
    bisect_inf_with(f, lambda_max, MONOTONE_TOLERANCE)
}

/// As [`bisect_inf`], allowing increases up to `mono_tol` between probes.
pub fn bisect_inf_with(f: impl Fn(f64) -> Result<f64>, lambda_max: f64, mono_tol: f64) -> Result<InfResult> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda_max must be > 0, got {lambda_max}")));
    }
    let probes: Vec<f64> = (1..=BISECT_PROBES).map(|i| lambda_max * i as f64 / BISECT_PROBES as f64).collect();
    let values = probes.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;
    for i in 1..probes.len() {
        if values[i] > values[i - 1] + mono_tol {
            return Err(Error::NotMonotone { lo: probes[i - 1], hi: probes[i], f_lo: values[i - 1], f_hi: values[i] });
        }
    }
    let Some(first) = (0..probes.len()).find(|&i| values[i] < probes[i]) else {
        return Ok(InfResult { value: lambda_max, saturated: true });
    };
    let mut lo = if first == 0 { 0.0 } else { probes[first - 1] };
    let mut hi = probes[first];
    while hi - lo > BISECT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < mid {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(InfResult { value: 0.5 * (lo + hi), saturated: false })
}
