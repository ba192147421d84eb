//! Convex polyhedra in H-representation `{x : ⟨x, t_j⟩ ≤ b_j}` with unit
//! normals.
//!
//! The slab expansion `P_λ` relaxes every offset by `λ` and depends on the
//! representation; the metric neighborhood `P^λ = {x : dist(x, P) < λ}`
//! does not. [`augment`] adds redundant constraints so that the slab
//! expansion of the new representation sits inside `P^{(1+ε)λ}`.

mod augment;
mod faces;
mod net;
mod project;

use std::path::Path;
use std::sync::OnceLock;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use augment::{
    augment, certify_augmentation, embed_operator, AugmentCertificate, Augmentation, Embedding, LambdaCertificate,
};
pub use faces::{enumerate_faces, enumerate_faces_capped, normal_cone, Cone, Face, DEFAULT_FACE_CAP};
pub use net::{delta_net, NET_TEST_DIRECTIONS};
pub use project::{distance, neighborhood_contains, project, ProjectOptions, Projection};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::LinearProgram;
use crate::rng::Rng;

/// Slack allowed by [`Polyhedron::contains`].
pub const MEMBERSHIP_SLACK: f64 = 1e-12;
/// Required accuracy of `‖t_j‖ = 1`.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Normals loaded from JSON deviating more than this from unit length are
/// normalized with a warning.
pub const NORMALIZE_WARN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    /// Unit normal `t`.
    pub t: Vec<f64>,
    /// Offset `b`.
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct Polyhedron {
    dim: usize,
    constraints: Vec<Halfspace>,
    nonempty: OnceLock<bool>,
}

impl PartialEq for Polyhedron {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.constraints == other.constraints
    }
}

impl Polyhedron {
    pub fn new(dim: usize, constraints: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPolyhedron { field: "dim".into(), reason: "must be positive".into() });
        }
        if constraints.is_empty() {
            return Err(Error::InvalidPolyhedron { field: "constraints".into(), reason: "must be nonempty".into() });
        }
        for (j, h) in constraints.iter().enumerate() {
            if h.t.len() != dim {
                return Err(Error::InvalidPolyhedron {
                    field: format!("constraints[{j}].t"),
                    reason: format!("expected {dim} coordinates, found {}", h.t.len()),
                });
            }
            if !h.b.is_finite() || h.t.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPolyhedron {
                    field: format!("constraints[{j}]"),
                    reason: "non-finite entry".into(),
                });
            }
            let n = linalg::norm(&h.t);
            if (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidPolyhedron {
                    field: format!("constraints[{j}].t"),
                    reason: format!("normal has length {n}, expected 1"),
                });
            }
        }
        Ok(Polyhedron { dim, constraints, nonempty: OnceLock::new() })
    }

    /// Build from raw `(t, b)` pairs, rescaling each pair so that `‖t‖ = 1`.
    pub fn from_unnormalized(dim: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut cs = Vec::with_capacity(rows.len());
        for (j, (t, b)) in rows.into_iter().enumerate() {
            let n = linalg::norm(&t);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidPolyhedron {
                    field: format!("constraints[{j}].t"),
                    reason: "zero or non-finite normal".into(),
                });
            }
            cs.push(Halfspace { t: linalg::scale(&t, 1.0 / n), b: b / n });
        }
        Polyhedron::new(dim, cs)
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`, constraints ordered `+e₁, −e₁, +e₂, …`.
    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let d = lo.len();
        let mut cs = Vec::with_capacity(2 * d);
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            cs.push(Halfspace { t: e.clone(), b: hi[k] });
            e[k] = -1.0;
            cs.push(Halfspace { t: e, b: -lo[k] });
        }
        Polyhedron::new(d, cs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of constraints `m`.
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    pub fn normal(&self, j: usize) -> &[f64] {
        &self.constraints[j].t
    }

    pub fn offset(&self, j: usize) -> f64 {
        self.constraints[j].b
    }

    /// `⟨x, t_j⟩ ≤ b_j + 1e-12` for every `j`.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::dim(self.dim, x.len()));
        }
        Ok(self.contains_unchecked(x))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|h| linalg::dot(x, &h.t) <= h.b + MEMBERSHIP_SLACK)
    }

    /// `x ∈ P_λ` without building the expanded polyhedron.
    #[inline]
    pub(crate) fn slab_contains_unchecked(&self, x: &[f64], lambda: f64) -> bool {
        self.constraints.iter().all(|h| linalg::dot(x, &h.t) <= (h.b + lambda) + MEMBERSHIP_SLACK)
    }

    /// `P_λ`: same normals, offsets `b_j + λ`.
    pub fn slab_expand(&self, lambda: f64) -> Result<Polyhedron> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {lambda}")));
        }
        let cs = self.constraints.iter().map(|h| Halfspace { t: h.t.clone(), b: h.b + lambda }).collect();
        Ok(Polyhedron { dim: self.dim, constraints: cs, nonempty: OnceLock::new() })
    }

    /// Same constraints followed by `extra`.
    pub fn with_constraints(&self, extra: Vec<Halfspace>) -> Result<Polyhedron> {
        let mut cs = self.constraints.clone();
        cs.extend(extra);
        Polyhedron::new(self.dim, cs)
    }

    /// Feasibility by LP; cached.
    pub fn is_empty(&self) -> bool {
        !*self.nonempty.get_or_init(|| {
            let mut lp = LinearProgram::new(vec![0.0; self.dim]);
            for h in &self.constraints {
                lp.le(h.t.clone(), h.b);
            }
            lp.solve().is_ok()
        })
    }

    /// `max_{x ∈ P} ⟨v, x⟩` and a maximizer.
    pub fn support(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        if v.len() != self.dim {
            return Err(Error::dim(self.dim, v.len()));
        }
        let mut lp = LinearProgram::new(v.to_vec());
        for h in &self.constraints {
            lp.le(h.t.clone(), h.b);
        }
        match lp.solve() {
            Ok(s) => Ok((s.objective, s.x)),
            Err(Error::InfeasibleLp) => Err(Error::EmptyPolyhedron),
            Err(e) => Err(e),
        }
    }

    /// Radius used to bound unbounded directions: exceeds every `|b_j|` by 10³.
    pub fn bounding_radius(&self) -> f64 {
        self.constraints.iter().map(|h| h.b.abs()).fold(0.0, f64::max) + 1e3
    }

    /// Coordinate-wise bounding box of `P`; unbounded directions are clipped
    /// at `±bounding_radius()`.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return Err(Error::EmptyPolyhedron);
        }
        let r = self.bounding_radius();
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for k in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[k] = 1.0;
            hi[k] = match self.support(&e) {
                Ok((v, _)) => v.min(r),
                Err(Error::UnboundedLp) => r,
                Err(e) => return Err(e),
            };
            e[k] = -1.0;
            lo[k] = match self.support(&e) {
                Ok((v, _)) => (-v).max(-r),
                Err(Error::UnboundedLp) => -r,
                Err(e) => return Err(e),
            };
        }
        Ok((lo, hi))
    }

    /// Uniform draws from `P` (clipped to its bounding box) by rejection.
    /// Returns fewer than `n` points if `max_tries` proposals run out.
    pub fn rejection_sample(&self, n: usize, rng: &mut Rng, max_tries: usize) -> Result<Vec<Vec<f64>>> {
        let (lo, hi) = self.bounding_box()?;
        let mut out = Vec::with_capacity(n);
        let mut tries = 0;
        while out.len() < n && tries < max_tries {
            tries += 1;
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
            if self.contains_unchecked(&x) {
                out.push(x);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> PolyhedronJson {
        PolyhedronJson { dim: self.dim, constraints: self.constraints.clone() }
    }

    pub fn from_json_str(s: &str, source_name: &str) -> Result<Self> {
        let raw: PolyhedronJson =
            serde_json::from_str(s).map_err(|e| Error::Json { source_name: source_name.to_string(), source: e })?;
        raw.into_polyhedron()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Self::from_json_str(&s, &path.display().to_string())
    }
}

/// JSON form `{"dim": d, "constraints": [{"t": [...], "b": b}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyhedronJson {
    pub dim: usize,
    pub constraints: Vec<Halfspace>,
}

impl PolyhedronJson {
    /// Validate, normalizing normals (with a warning when a normal is off
    /// unit length by more than [`NORMALIZE_WARN`]).
    pub fn into_polyhedron(self) -> Result<Polyhedron> {
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(self.constraints.len());
        for (j, h) in self.constraints.into_iter().enumerate() {
            if h.t.len() != self.dim {
                return Err(Error::InvalidPolyhedron {
                    field: format!("constraints[{j}].t"),
                    reason: format!("expected {} coordinates, found {}", self.dim, h.t.len()),
                });
            }
            let n = linalg::norm(&h.t);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidPolyhedron {
                    field: format!("constraints[{j}].t"),
                    reason: "zero or non-finite normal".into(),
                });
            }
            if (n - 1.0).abs() > NORMALIZE_WARN {
                log::warn!("constraints[{j}].t has length {n}; normalizing");
            }
            // Leave unit normals bit-exact so that JSON round-trips.
            let s = if (n - 1.0).abs() <= 1e-12 { 1.0 } else { n };
            rows.push((h.t.iter().map(|c| c / s).collect(), h.b / s));
        }
        let cs = rows.into_iter().map(|(t, b)| Halfspace { t, b }).collect();
        Polyhedron::new(self.dim, cs)
    }
}
