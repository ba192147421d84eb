//! Augmented representations and the orthant embedding.

use rayon::prelude::*;
use serde::Serialize;

use super::{delta_net, enumerate_faces, normal_cone, project, Halfspace, Polyhedron, ProjectOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Augmentation {
    #[serde(skip)]
    pub polyhedron: Polyhedron,
    pub epsilon: f64,
    pub delta: f64,
    /// Constraint count before augmentation.
    pub m0: usize,
    /// Constraint count after augmentation.
    pub m: usize,
    pub faces: usize,
    pub max_net: usize,
    /// `m0 + 2^{m0} · max_net`.
    pub bound: u128,
}

/// Add, for each face `F` and each direction `v` of a δ-net of its normal
/// cone (`δ = ε / (1 + ε)`), the constraint `⟨x, v⟩ ≤ ⟨x_F, v⟩`. The set is
/// unchanged, and the slab expansion of the new representation lies in the
/// `(1 + ε)λ`-neighborhood of `P`. Every added constraint is checked to be
/// valid for `P` by an LP.
pub fn augment(p: &Polyhedron, epsilon: f64, seed: u64) -> Result<Augmentation> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if p.is_empty() {
        return Err(Error::EmptyPolyhedron);
    }
    let delta = epsilon / (1.0 + epsilon);
    let faces = enumerate_faces(p)?;
    let witnesses: Vec<&[f64]> = faces.iter().map(|f| f.witness.as_slice()).collect();
    let nets: Vec<Vec<Vec<f64>>> = faces
        .par_iter()
        .enumerate()
        .map(|(fi, face)| {
            let cone = normal_cone(p, face);
            if !cone.is_polar_at(face, &witnesses, 1e-9) {
                return Err(Error::CertificationFailure(format!(
                    "normal cone of face {:?} fails the polarity check",
                    face.active_set
                )));
            }
            delta_net(&cone, delta, rng::derive(seed, fi as u64))
        })
        .collect::<Result<_>>()?;
    let max_net = nets.iter().map(Vec::len).max().unwrap_or(0);
    let mut extra: Vec<Halfspace> = Vec::new();
    for (face, net) in faces.iter().zip(nets) {
        for v in net {
            let b = linalg::dot(&face.witness, &v);
            let (sup, _) = p.support(&v)?;
            if sup > b + SUPPORT_TOL * (1.0 + b.abs()) {
                return Err(Error::CertificationFailure(format!(
                    "added constraint for face {:?} cuts P: support {sup} > {b}",
                    face.active_set
                )));
            }
            extra.push(Halfspace { t: v, b });
        }
    }
    let m0 = p.m();
    let bound = m0 as u128 + (1u128 << m0) * max_net as u128;
    let polyhedron = p.with_constraints(extra)?;
    let m = polyhedron.m();
    if m as u128 > bound {
        return Err(Error::CertificationFailure(format!("{m} constraints exceed bound {bound}")));
    }
    Ok(Augmentation { polyhedron, epsilon, delta, m0, m, faces: faces.len(), max_net, bound })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaCertificate {
    pub lambda: f64,
    pub samples: usize,
    /// `max dist(x, P) / λ` over sampled `x ∈ P'_λ`.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentCertificate {
    pub per_lambda: Vec<LambdaCertificate>,
    pub max_ratio: f64,
    pub passed: bool,
}

/// Sample `n` points of `augmented.slab_expand(λ)` per `λ` and check
/// `dist(x, original) ≤ (1 + ε)λ + 1e-6`.
pub fn certify_augmentation(
    original: &Polyhedron,
    augmented: &Polyhedron,
    epsilon: f64,
    lambdas: &[f64],
    n: usize,
    seed: u64,
) -> Result<AugmentCertificate> {
    let opts = ProjectOptions::default();
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    let mut passed = true;
    for (i, &lambda) in lambdas.iter().enumerate() {
        let slab = augmented.slab_expand(lambda)?;
        let mut r = rng::stream(seed, i as u64);
        let pts = slab.rejection_sample(n, &mut r, n.saturating_mul(1000))?;
        let mut max_ratio: f64 = 0.0;
        for x in &pts {
            let d = project(original, x, &opts)?.distance;
            if d > (1.0 + epsilon) * lambda + 1e-6 {
                passed = false;
            }
            max_ratio = max_ratio.max(d / lambda);
        }
        per_lambda.push(LambdaCertificate { lambda, samples: pts.len(), max_ratio });
    }
    let max_ratio = per_lambda.iter().map(|c| c.max_ratio).fold(0.0, f64::max);
    Ok(AugmentCertificate { per_lambda, max_ratio, passed })
}

/// `A` with rows `t_j` maps `P` onto the orthant `{y : y ≤ b}` of `R^m`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub matrix: Matrix,
    pub orthant: Polyhedron,
    /// Estimated `‖A‖`, at most `√m`.
    pub norm: f64,
}

pub fn embed_operator(p: &Polyhedron) -> Result<Embedding> {
    let rows: Vec<Vec<f64>> = p.constraints().iter().map(|h| h.t.clone()).collect();
    let matrix = Matrix::from_rows(&rows)?;
    let m = p.m();
    let ub: Vec<f64> = p.constraints().iter().map(|h| h.b).collect();
    let cs = (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            Halfspace { t: e, b: ub[j] }
        })
        .collect();
    let orthant = Polyhedron::new(m, cs)?;
    let norm = matrix.operator_norm(500);
    if norm > (m as f64).sqrt() * (1.0 + 1e-9) {
        return Err(Error::CertificationFailure(format!("operator norm {norm} exceeds sqrt(m)")));
    }
    Ok(Embedding { matrix, orthant, norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Polyhedron {
        Polyhedron::from_unnormalized(2, vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)])
            .unwrap()
    }

    #[test]
    fn augmentation_preserves_set_and_respects_bound() {
        let p = triangle();
        let a = augment(&p, 0.2, 5).unwrap();
        assert!(a.m > a.m0);
        assert!(a.m as u128 <= a.bound);
        let mut r = rng::stream(1, 0);
        let lo = [-1.0, -1.0];
        use rand::Rng as _;
        for _ in 0..2000 {
            let x = [lo[0] + 3.0 * r.random::<f64>(), lo[1] + 3.0 * r.random::<f64>()];
            assert_eq!(p.contains(&x).unwrap(), a.polyhedron.contains(&x).unwrap());
        }
        let cert = certify_augmentation(&p, &a.polyhedron, 0.2, &[0.1, 1.0, 10.0], 2000, 3).unwrap();
        assert!(cert.passed, "{cert:?}");
        assert!(cert.max_ratio <= 1.2 + 1e-6);
    }

    #[test]
    fn original_slab_overshoots_at_sharp_vertex() {
        // A 30° wedge: the raw slab expansion reaches far from P.
        let th = 15f64.to_radians();
        let p = Polyhedron::from_unnormalized(
            2,
            vec![(vec![-th.sin(), th.cos()], 0.0), (vec![-th.sin(), -th.cos()], 0.0), (vec![1.0, 0.0], 1.0)],
        )
        .unwrap();
        let raw = certify_augmentation(&p, &p, 0.1, &[1.0], 3000, 2).unwrap();
        assert!(!raw.passed);
        let a = augment(&p, 0.1, 2).unwrap();
        let good = certify_augmentation(&p, &a.polyhedron, 0.1, &[1.0], 3000, 2).unwrap();
        assert!(good.passed, "{good:?}");
    }

    #[test]
    fn halfspace_augmentation_duplicates_the_constraint() {
        let p = Polyhedron::new(2, vec![Halfspace { t: vec![0.6, 0.8], b: 1.0 }]).unwrap();
        let a = augment(&p, 0.3, 0).unwrap();
        assert_eq!(a.m, 2);
        assert_eq!(a.polyhedron.constraints()[1], p.constraints()[0]);
    }

    #[test]
    fn square_corner_witness() {
        let p = Polyhedron::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let x = [2.0, 2.0];
        assert!(p.slab_expand(1.0).unwrap().contains(&x).unwrap());
        assert!(project(&p, &x, &ProjectOptions::default()).unwrap().distance > 1.25);
        let a = augment(&p, 0.25, 0).unwrap();
        assert!(!a.polyhedron.slab_expand(1.0).unwrap().contains(&x).unwrap());
    }

    #[test]
    fn embedding_maps_slabs_to_orthants() {
        let p = triangle();
        let e = embed_operator(&p).unwrap();
        assert!(e.norm <= 3f64.sqrt() + 1e-9);
        let x = [0.3, 0.9];
        let y = e.matrix.mul_vec(&x);
        for lambda in [0.0, 0.25, 1.0] {
            assert_eq!(
                p.slab_expand(lambda).unwrap().contains(&x).unwrap(),
                e.orthant.slab_expand(lambda).unwrap().contains(&y).unwrap()
            );
        }
    }

    #[test]
    fn empty_input_rejected() {
        let e =
            Polyhedron::new(1, vec![Halfspace { t: vec![1.0], b: 0.0 }, Halfspace { t: vec![-1.0], b: -1.0 }]).unwrap();
        assert!(matches!(augment(&e, 0.1, 0), Err(Error::EmptyPolyhedron)));
    }
}
