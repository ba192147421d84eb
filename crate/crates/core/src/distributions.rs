//! Finite discrete probability laws on `R^d`.
//!
//! Atoms are kept in canonical order (lexicographic by coordinate, using
//! `f64::total_cmp`) and merged only when their coordinates are bit-equal.
//! Nothing is snapped to a grid: near-duplicates produced by arithmetic stay
//! separate atoms.

use std::cmp::Ordering;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum, Matrix};
use crate::rng::{self, Rng};

/// Atoms lighter than this after arithmetic are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-15;
/// Allowed deviation of the total mass from its nominal value.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput("point has no coordinates"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coordinate {i} is not finite")));
        }
        Ok(Point::from_vec(coords))
    }

    /// Unchecked constructor for internally computed coordinates.
    pub(crate) fn from_vec(mut coords: Vec<f64>) -> Self {
        for c in coords.iter_mut() {
            if *c == 0.0 {
                *c = 0.0; // -0.0 → +0.0
            }
        }
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn neg(&self) -> Point {
        Point::from_vec(self.0.iter().map(|c| -c).collect())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Flat atom storage shared by the probability and sub-probability types.
#[derive(Debug, Clone, PartialEq)]
struct Atoms {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Atoms {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Sort, merge bit-equal points and drop atoms below the prune threshold.
    /// Returns the canonical atoms and the dropped mass.
    fn canonical(dim: usize, mut coords: Vec<f64>, weights: Vec<f64>) -> (Atoms, f64) {
        for c in coords.iter_mut() {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        let n = weights.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&i, &j| lex_cmp(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]));
        let mut out_c = Vec::with_capacity(coords.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(n);
        let mut last: Option<usize> = None;
        for &i in &order {
            let p = &coords[i * dim..(i + 1) * dim];
            match last {
                Some(l) if bits_eq(&coords[l * dim..(l + 1) * dim], p) => {
                    *out_w.last_mut().unwrap() += weights[i];
                }
                _ => {
                    out_c.extend_from_slice(p);
                    out_w.push(weights[i]);
                    last = Some(i);
                }
            }
        }
        let mut pruned = Vec::new();
        let mut keep_c = Vec::with_capacity(out_c.len());
        let mut keep_w = Vec::with_capacity(out_w.len());
        for (k, &w) in out_w.iter().enumerate() {
            if w < PRUNE_THRESHOLD {
                pruned.push(w);
            } else {
                keep_c.extend_from_slice(&out_c[k * dim..(k + 1) * dim]);
                keep_w.push(w);
            }
        }
        (Atoms { dim, coords: keep_c, weights: keep_w }, pairwise_sum(&pruned))
    }

    fn mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    fn find(&self, x: &[f64]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match lex_cmp(self.point(mid), x) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    fn convolve(&self, other: &Atoms, cap: usize) -> Result<(Atoms, f64)> {
        let size = self.len().saturating_mul(other.len());
        if size > cap {
            return Err(Error::SupportOverflow { size, cap });
        }
        let d = self.dim;
        let mut coords = Vec::with_capacity(size * d);
        let mut weights = Vec::with_capacity(size);
        for i in 0..self.len() {
            let x = self.point(i);
            let wx = self.weights[i];
            for j in 0..other.len() {
                let y = other.point(j);
                coords.extend(x.iter().zip(y).map(|(a, b)| a + b));
                weights.push(wx * other.weights[j]);
            }
        }
        Ok(Atoms::canonical(d, coords, weights))
    }

    fn map_points(&self, out_dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> (Atoms, f64) {
        let mut coords = Vec::with_capacity(self.len() * out_dim);
        for i in 0..self.len() {
            coords.extend(f(self.point(i)));
        }
        Atoms::canonical(out_dim, coords, self.weights.clone())
    }

    fn cf(&self, t: &[f64]) -> Complex64 {
        let mut re = Vec::with_capacity(self.len());
        let mut im = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (s, c) = linalg::dot(t, self.point(i)).sin_cos();
            re.push(self.weights[i] * c);
            im.push(self.weights[i] * s);
        }
        Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
    }

    fn probability(&self, mut pred: impl FnMut(&[f64]) -> bool) -> f64 {
        let hits: Vec<f64> = (0..self.len()).filter(|&i| pred(self.point(i))).map(|i| self.weights[i]).collect();
        pairwise_sum(&hits)
    }
}

/// Read access shared by [`DiscreteDistribution`] and
/// [`SubProbabilityDistribution`].
pub trait AtomicLaw: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> &[f64];
    fn weight(&self, i: usize) -> f64;
    /// Mass missing from the atoms (0 for probability laws).
    fn deficiency(&self) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mass of the atoms satisfying `pred`, summed pairwise in atom order.
    fn probability(&self, mut pred: impl FnMut(&[f64]) -> bool) -> f64
    where
        Self: Sized,
    {
        let hits: Vec<f64> = (0..self.len()).filter(|&i| pred(self.point(i))).map(|i| self.weight(i)).collect();
        pairwise_sum(&hits)
    }
}

/// A probability law with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Atoms,
    pruned_mass: f64,
}

impl DiscreteDistribution {
    /// Build from `(point, weight)` pairs; coincident points are merged.
    pub fn new(dim: usize, atoms: Vec<(Point, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDistribution { field: "dim".into(), reason: "must be positive".into() });
        }
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution { field: "atoms".into(), reason: "must be nonempty".into() });
        }
        let mut coords = Vec::with_capacity(atoms.len() * dim);
        let mut weights = Vec::with_capacity(atoms.len());
        for (i, (p, w)) in atoms.into_iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::InvalidDistribution {
                    field: format!("atoms[{i}].x"),
                    reason: format!("expected {dim} coordinates, found {}", p.dim()),
                });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidDistribution {
                    field: format!("atoms[{i}].w"),
                    reason: format!("weight must be finite and > 0, got {w}"),
                });
            }
            coords.extend_from_slice(p.coords());
            weights.push(w);
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution {
                field: "atoms[*].w".into(),
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        let (atoms, pruned) = Atoms::canonical(dim, coords, weights);
        Ok(Self::renormalized(atoms, pruned))
    }

    fn renormalized(mut atoms: Atoms, pruned: f64) -> Self {
        if pruned > 0.0 {
            let kept = atoms.mass();
            for w in atoms.weights.iter_mut() {
                *w /= kept;
            }
        }
        DiscreteDistribution { atoms, pruned_mass: pruned }
    }

    pub fn point_mass(p: Point) -> Self {
        let dim = p.dim();
        DiscreteDistribution { atoms: Atoms { dim, coords: p.into_vec(), weights: vec![1.0] }, pruned_mass: 0.0 }
    }

    /// Uniform law on the given points (duplicates accumulate weight).
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        empirical(&points)
    }

    pub fn dim(&self) -> usize {
        self.atoms.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.atoms.point(i)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.atoms.weights
    }

    /// Mass removed by pruning over the history of this law.
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.point(i), self.weight(i)))
    }

    /// Weight of the atom at exactly `x` (bit equality), 0 if absent.
    pub fn mass_at(&self, x: &[f64]) -> f64 {
        self.atoms.find(x).map(|i| self.weight(i)).unwrap_or(0.0)
    }

    pub fn max_weight(&self) -> f64 {
        self.atoms.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Point {
        let d = self.dim();
        let coords = (0..d)
            .map(|k| {
                let terms: Vec<f64> = self.atoms().map(|(x, w)| w * x[k]).collect();
                pairwise_sum(&terms)
            })
            .collect();
        Point::from_vec(coords)
    }

    pub fn probability(&self, pred: impl FnMut(&[f64]) -> bool) -> f64 {
        self.atoms.probability(pred)
    }

    /// Conditional law on the atoms satisfying `pred`, with their total mass.
    /// `None` when no atom qualifies.
    pub fn condition(&self, mut pred: impl FnMut(&[f64]) -> bool) -> Option<(Self, f64)> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| pred(self.point(i))).collect();
        if idx.is_empty() {
            return None;
        }
        let ws: Vec<f64> = idx.iter().map(|&i| self.weight(i)).collect();
        let mass = pairwise_sum(&ws);
        let mut coords = Vec::with_capacity(idx.len() * self.dim());
        for &i in &idx {
            coords.extend_from_slice(self.point(i));
        }
        let weights = ws.iter().map(|w| w / mass).collect();
        let atoms = Atoms { dim: self.dim(), coords, weights };
        Some((DiscreteDistribution { atoms, pruned_mass: 0.0 }, mass))
    }

    /// Build a sampler for repeated draws by inverse CDF.
    pub fn sampler(&self) -> InverseCdf {
        let mut cum = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for &w in &self.atoms.weights {
            acc += w;
            cum.push(acc);
        }
        InverseCdf { cum }
    }

    pub fn from_json_str(s: &str, source_name: &str) -> Result<Self> {
        let raw: DistributionJson =
            serde_json::from_str(s).map_err(|e| Error::Json { source_name: source_name.to_string(), source: e })?;
        raw.into_distribution()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Self::from_json_str(&s, &path.display().to_string())
    }

    pub fn to_json(&self) -> DistributionJson {
        DistributionJson { dim: self.dim(), atoms: self.atoms().map(|(x, w)| AtomJson { x: x.to_vec(), w }).collect() }
    }
}

impl AtomicLaw for DiscreteDistribution {
    fn dim(&self) -> usize {
        self.atoms.dim
    }
    fn len(&self) -> usize {
        self.atoms.len()
    }
    fn point(&self, i: usize) -> &[f64] {
        self.atoms.point(i)
    }
    fn weight(&self, i: usize) -> f64 {
        self.atoms.weights[i]
    }
    fn deficiency(&self) -> f64 {
        0.0
    }
}

/// Inverse-CDF sampler over atom indices.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cum: Vec<f64>,
}

impl InverseCdf {
    pub fn draw(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random::<f64>() * self.cum.last().copied().unwrap_or(1.0);
        let i = self.cum.partition_point(|&c| c <= u);
        i.min(self.cum.len() - 1)
    }
}

/// JSON form `{"dim": d, "atoms": [{"x": [...], "w": w}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistributionJson {
    pub dim: usize,
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    pub x: Vec<f64>,
    pub w: f64,
}

impl DistributionJson {
    pub fn into_distribution(self) -> Result<DiscreteDistribution> {
        let dim = self.dim;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.into_iter().enumerate() {
            let p = Point::new(a.x)
                .map_err(|e| Error::InvalidDistribution { field: format!("atoms[{i}].x"), reason: e.to_string() })?;
            atoms.push((p, a.w));
        }
        DiscreteDistribution::new(dim, atoms)
    }
}

/// A law whose atoms carry mass `1 − deficiency`. Produced by truncated
/// series; the missing mass is tracked and never renormalized away.
#[derive(Debug, Clone, PartialEq)]
pub struct SubProbabilityDistribution {
    atoms: Atoms,
    deficiency: f64,
    pruned_mass: f64,
}

impl SubProbabilityDistribution {
    /// `deficiency = truncated + pruned` (plus anything pruned here); the
    /// pruned part is also reported separately by [`Self::pruned_mass`].
    pub(crate) fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        truncated: f64,
        pruned: f64,
    ) -> Result<Self> {
        let (atoms, more) = Atoms::canonical(dim, coords, weights);
        let out =
            SubProbabilityDistribution { atoms, deficiency: truncated + pruned + more, pruned_mass: pruned + more };
        out.check()?;
        Ok(out)
    }

    fn check(&self) -> Result<()> {
        if self.atoms.len() == 0 {
            return Err(Error::InvalidDistribution {
                field: "atoms".into(),
                reason: "sub-probability law has no atoms".into(),
            });
        }
        if !(0.0..1.0).contains(&self.deficiency) {
            return Err(Error::InvalidDistribution {
                field: "deficiency".into(),
                reason: format!("{} outside [0,1)", self.deficiency),
            });
        }
        let m = self.atoms.mass();
        if (m - (1.0 - self.deficiency)).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution {
                field: "atoms[*].w".into(),
                reason: format!("mass {m} but deficiency {}", self.deficiency),
            });
        }
        Ok(())
    }

    pub fn from_distribution(d: &DiscreteDistribution) -> Self {
        SubProbabilityDistribution { atoms: d.atoms.clone(), deficiency: 0.0, pruned_mass: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.atoms.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.atoms.point(i)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms.weights[i]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.point(i), self.weight(i)))
    }

    pub fn deficiency(&self) -> f64 {
        self.deficiency
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn mass(&self) -> f64 {
        self.atoms.mass()
    }

    pub fn mass_at(&self, x: &[f64]) -> f64 {
        self.atoms.find(x).map(|i| self.weight(i)).unwrap_or(0.0)
    }

    pub fn characteristic_function(&self, t: &Point) -> Result<Complex64> {
        if t.dim() != self.dim() {
            return Err(Error::dim(self.dim(), t.dim()));
        }
        Ok(self.atoms.cf(t.coords()))
    }

    pub fn probability(&self, pred: impl FnMut(&[f64]) -> bool) -> f64 {
        self.atoms.probability(pred)
    }

    /// Convolution of two sub-probability laws; deficiencies compose as
    /// `1 − (1 − d₁)(1 − d₂)` plus any newly pruned mass.
    pub fn convolve(&self, other: &Self, cap: usize) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dim(self.dim(), other.dim()));
        }
        let (atoms, pruned) = self.atoms.convolve(&other.atoms, cap)?;
        let deficiency = 1.0 - (1.0 - self.deficiency) * (1.0 - other.deficiency) + pruned;
        Ok(SubProbabilityDistribution { atoms, deficiency, pruned_mass: self.pruned_mass + other.pruned_mass + pruned })
    }

    pub fn shift(&self, a: &Point) -> Result<Self> {
        if a.dim() != self.dim() {
            return Err(Error::dim(self.dim(), a.dim()));
        }
        let (atoms, pruned) = self.atoms.map_points(self.dim(), |x| linalg::add(x, a.coords()));
        debug_assert_eq!(pruned, 0.0);
        Ok(SubProbabilityDistribution { atoms, ..self.clone() })
    }

    /// Probability law obtained by dividing out the missing mass. Only for
    /// consumers that need a proper law; the deficiency is lost.
    pub fn renormalize(&self) -> DiscreteDistribution {
        let mut atoms = self.atoms.clone();
        let kept = atoms.mass();
        for w in atoms.weights.iter_mut() {
            *w /= kept;
        }
        DiscreteDistribution { atoms, pruned_mass: self.pruned_mass }
    }

    pub fn to_json(&self) -> SubProbabilityJson {
        SubProbabilityJson {
            dim: self.dim(),
            atoms: self.atoms().map(|(x, w)| AtomJson { x: x.to_vec(), w }).collect(),
            deficiency: self.deficiency,
        }
    }
}

impl AtomicLaw for SubProbabilityDistribution {
    fn dim(&self) -> usize {
        self.atoms.dim
    }
    fn len(&self) -> usize {
        self.atoms.len()
    }
    fn point(&self, i: usize) -> &[f64] {
        self.atoms.point(i)
    }
    fn weight(&self, i: usize) -> f64 {
        self.atoms.weights[i]
    }
    fn deficiency(&self) -> f64 {
        self.deficiency
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SubProbabilityJson {
    pub dim: usize,
    pub atoms: Vec<AtomJson>,
    pub deficiency: f64,
}

/// Default support cap for convolutions issued without an explicit cap.
pub const DEFAULT_SUPPORT_CAP: usize = 200_000;

/// Law of the independent sum.
pub fn convolve(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<DiscreteDistribution> {
    convolve_capped(a, b, usize::MAX)
}

/// [`convolve`] with a bound on the raw (pre-merge) support size.
pub fn convolve_capped(a: &DiscreteDistribution, b: &DiscreteDistribution, cap: usize) -> Result<DiscreteDistribution> {
    if a.dim() != b.dim() {
        return Err(Error::dim(a.dim(), b.dim()));
    }
    let (atoms, pruned) = a.atoms.convolve(&b.atoms, cap)?;
    let mut out = DiscreteDistribution::renormalized(atoms, pruned);
    out.pruned_mass += a.pruned_mass + b.pruned_mass;
    Ok(out)
}

/// Image law under the linear map `matrix` (rows = output coordinates).
pub fn pushforward(dist: &DiscreteDistribution, matrix: &Matrix) -> Result<DiscreteDistribution> {
    if matrix.cols() != dist.dim() {
        return Err(Error::dim(dist.dim(), matrix.cols()));
    }
    let (atoms, pruned) = dist.atoms.map_points(matrix.rows(), |x| matrix.mul_vec(x));
    let mut out = DiscreteDistribution::renormalized(atoms, pruned);
    out.pruned_mass += dist.pruned_mass;
    Ok(out)
}

/// Translate every atom by `a`.
pub fn shift(dist: &DiscreteDistribution, a: &Point) -> Result<DiscreteDistribution> {
    if a.dim() != dist.dim() {
        return Err(Error::dim(dist.dim(), a.dim()));
    }
    let (atoms, pruned) = dist.atoms.map_points(dist.dim(), |x| linalg::add(x, a.coords()));
    debug_assert_eq!(pruned, 0.0);
    Ok(DiscreteDistribution { atoms, pruned_mass: dist.pruned_mass })
}

/// `Σ_k w_k exp(i⟨t, x_k⟩)`.
pub fn characteristic_function(dist: &DiscreteDistribution, t: &Point) -> Result<Complex64> {
    if t.dim() != dist.dim() {
        return Err(Error::dim(dist.dim(), t.dim()));
    }
    Ok(dist.atoms.cf(t.coords()))
}

/// `n` i.i.d. draws using stream 0 of `seed`.
pub fn sample(dist: &DiscreteDistribution, seed: u64, n: usize) -> Vec<Point> {
    let mut rng = rng::stream(seed, 0);
    sample_with(dist, &mut rng, n)
}

pub fn sample_with(dist: &DiscreteDistribution, rng: &mut Rng, n: usize) -> Vec<Point> {
    let s = dist.sampler();
    (0..n).map(|_| Point::from_vec(dist.point(s.draw(rng)).to_vec())).collect()
}

/// Empirical law: distinct points weighted by their frequencies.
pub fn empirical(points: &[Point]) -> Result<DiscreteDistribution> {
    let first = points.first().ok_or(Error::EmptyInput("no points"))?;
    let dim = first.dim();
    let mut coords = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.dim() != dim {
            return Err(Error::dim(dim, p.dim()));
        }
        coords.extend_from_slice(p.coords());
    }
    empirical_flat(dim, coords)
}

/// Empirical law of points stored contiguously (`coords.len() = n·dim`).
pub fn empirical_flat(dim: usize, coords: Vec<f64>) -> Result<DiscreteDistribution> {
    if coords.is_empty() {
        return Err(Error::EmptyInput("no points"));
    }
    let n = coords.len() / dim;
    let (mut atoms, _) = Atoms::canonical(dim, coords, vec![1.0; n]);
    let inv = 1.0 / n as f64;
    for w in atoms.weights.iter_mut() {
        *w *= inv;
    }
    Ok(DiscreteDistribution { atoms, pruned_mass: 0.0 })
}

/// `Σ_i c_i · law_i` for nonnegative coefficients summing to 1.
pub fn mixture(components: &[(f64, &DiscreteDistribution)]) -> Result<DiscreteDistribution> {
    let first = components.first().ok_or(Error::EmptyInput("no mixture components"))?;
    let dim = first.1.dim();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (c, law) in components {
        if law.dim() != dim {
            return Err(Error::dim(dim, law.dim()));
        }
        if *c < 0.0 {
            return Err(Error::InvalidArgument("negative mixture coefficient".into()));
        }
        for (x, w) in law.atoms() {
            coords.extend_from_slice(x);
            weights.push(c * w);
        }
    }
    let (atoms, pruned) = Atoms::canonical(dim, coords, weights);
    Ok(DiscreteDistribution::renormalized(atoms, pruned))
}

/// Total variation `½ Σ |a(x) − b(x)|` over the union of supports.
pub fn total_variation(a: &impl AtomicLaw, b: &impl AtomicLaw) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim(a.dim(), b.dim()));
    }
    let (mut i, mut j) = (0, 0);
    let mut diffs = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        let ord = if i == a.len() {
            Ordering::Greater
        } else if j == b.len() {
            Ordering::Less
        } else {
            lex_cmp(a.point(i), b.point(j))
        };
        match ord {
            Ordering::Less => {
                diffs.push(a.weight(i));
                i += 1;
            }
            Ordering::Greater => {
                diffs.push(b.weight(j));
                j += 1;
            }
            Ordering::Equal => {
                diffs.push((a.weight(i) - b.weight(j)).abs());
                i += 1;
                j += 1;
            }
        }
    }
    Ok(0.5 * pairwise_sum(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn coin() -> DiscreteDistribution {
        DiscreteDistribution::new(1, vec![(p(&[0.0]), 0.5), (p(&[1.0]), 0.5)]).unwrap()
    }

    #[test]
    fn point_masses_add() {
        let a = DiscreteDistribution::point_mass(p(&[1.0]));
        let b = DiscreteDistribution::point_mass(p(&[2.0]));
        let c = convolve(&a, &b).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.point(0), &[3.0]);
        assert_eq!(c.weight(0), 1.0);
    }

    #[test]
    fn coin_squared_is_binomial() {
        let c = convolve(&coin(), &coin()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn convolve_dimension_mismatch() {
        let a = DiscreteDistribution::point_mass(p(&[0.0]));
        let b = DiscreteDistribution::point_mass(p(&[0.0, 0.0]));
        assert!(matches!(convolve(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pushforward_merges_images() {
        let d = DiscreteDistribution::new(2, vec![(p(&[0.0, 0.0]), 0.5), (p(&[1.0, -1.0]), 0.5)]).unwrap();
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let img = pushforward(&d, &a).unwrap();
        assert_eq!(img.len(), 1);
        assert_eq!(img.point(0), &[0.0]);
        assert_eq!(img.weight(0), 1.0);
        assert_eq!(pushforward(&d, &Matrix::identity(2)).unwrap(), d);
        assert!(pushforward(&d, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn shift_identities() {
        let a = p(&[2.5, -1.0]);
        let d0 = DiscreteDistribution::point_mass(Point::zeros(2));
        assert_eq!(shift(&d0, &a).unwrap().point(0), a.coords());
        let d = DiscreteDistribution::new(2, vec![(p(&[0.0, 1.0]), 0.25), (p(&[3.0, 0.0]), 0.75)]).unwrap();
        assert_eq!(shift(&d, &Point::zeros(2)).unwrap(), d);
        assert_eq!(shift(&shift(&d, &a).unwrap(), &a.neg()).unwrap(), d);
    }

    #[test]
    fn cf_examples() {
        let d0 = DiscreteDistribution::point_mass(Point::zeros(1));
        let v = characteristic_function(&d0, &p(&[1.7])).unwrap();
        assert_eq!(v, Complex64::new(1.0, 0.0));
        let v = characteristic_function(&coin(), &p(&[std::f64::consts::PI])).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn sampling_point_mass_and_determinism() {
        let a = p(&[4.0, 2.0]);
        let d = DiscreteDistribution::point_mass(a.clone());
        assert!(sample(&d, 1, 50).iter().all(|x| *x == a));
        assert_eq!(sample(&coin(), 9, 100), sample(&coin(), 9, 100));
        assert!(sample(&coin(), 9, 0).is_empty());
    }

    #[test]
    fn coin_sample_mean() {
        // binomial CI: sd of the mean at n = 1e5 is 0.00158, so ±0.01 is > 6 sd
        let xs = sample(&coin(), 2024, 100_000);
        let mean = xs.iter().map(|x| x.coords()[0]).sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");
    }

    #[test]
    fn empirical_examples() {
        let a = p(&[1.0]);
        let b = p(&[2.0]);
        let e = empirical(&[a.clone(), a.clone(), b.clone()]).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e.mass_at(a.coords()) - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.mass_at(b.coords()) - 1.0 / 3.0).abs() < 1e-15);
        let e = empirical(std::slice::from_ref(&a)).unwrap();
        assert_eq!(e, DiscreteDistribution::point_mass(a));
        assert!(matches!(empirical(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn negative_zero_merges_with_zero() {
        let d = DiscreteDistribution::new(1, vec![(p(&[-0.0]), 0.5), (p(&[0.0]), 0.5)]).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn pruning_renormalizes_and_records() {
        let d = DiscreteDistribution::new(1, vec![(p(&[0.0]), 1.0 - 1e-16), (p(&[1.0]), 1e-16)]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.weight(0), 1.0);
        assert!(d.pruned_mass() > 0.0);
    }

    #[test]
    fn loader_reports_field() {
        let bad = r#"{"dim": 2, "atoms": [{"x": [0, 0], "w": 0.5}, {"x": [1], "w": 0.5}]}"#;
        let err = DiscreteDistribution::from_json_str(bad, "inline").unwrap_err().to_string();
        assert!(err.contains("atoms[1].x"), "{err}");
        let bad = r#"{"dim": 1, "atoms": [{"x": [0], "w": -0.5}, {"x": [1], "w": 1.5}]}"#;
        let err = DiscreteDistribution::from_json_str(bad, "inline").unwrap_err().to_string();
        assert!(err.contains("atoms[0].w"), "{err}");
        let bad = r#"{"dim": 1, "atoms": [{"x": [0], "w": 0.5}]}"#;
        assert!(DiscreteDistribution::from_json_str(bad, "inline").is_err());
        let bad = "{\"dim\": 1,\n \"atoms\": [{\"x\": [0], \"w\": }]}";
        let err = DiscreteDistribution::from_json_str(bad, "f.json").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let d = DiscreteDistribution::new(2, vec![(p(&[0.1, 1.0]), 0.25), (p(&[3.0, 0.0]), 0.75)]).unwrap();
        let s = serde_json::to_string(&d.to_json()).unwrap();
        assert_eq!(DiscreteDistribution::from_json_str(&s, "rt").unwrap(), d);
    }

    #[test]
    fn tv_examples() {
        let a = DiscreteDistribution::point_mass(p(&[0.0]));
        let b = DiscreteDistribution::point_mass(p(&[1.0]));
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        assert_eq!(total_variation(&coin(), &coin()).unwrap(), 0.0);
        assert_eq!(total_variation(&a, &coin()).unwrap(), 0.5);
    }
}
