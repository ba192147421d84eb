//! Face lattice and normal cones.

use rayon::prelude::*;
use serde::Serialize;

use super::Polyhedron;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::LinearProgram;

/// Largest constraint count accepted by [`enumerate_faces`].
pub const DEFAULT_FACE_CAP: usize = 16;
const SLACK_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;

/// A nonempty proper face `{x ∈ P : ⟨x, t_j⟩ = b_j, j ∈ active_set}` whose
/// relative interior keeps every other constraint strictly slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Face {
    pub active_set: Vec<usize>,
    pub dim: usize,
    /// A relative-interior point.
    pub witness: Vec<f64>,
}

pub fn enumerate_faces(p: &Polyhedron) -> Result<Vec<Face>> {
    enumerate_faces_capped(p, DEFAULT_FACE_CAP)
}

/// Enumerate faces by testing every nonempty subset `J` of constraints:
/// maximize `s` subject to `⟨x, t_j⟩ = b_j` on `J`, `⟨x, t_i⟩ + s ≤ b_i`
/// off `J`, `s ≤ 1` and a bounding box. `J` is a face iff `s* > 0`.
/// Faces are returned in lexicographic order of their active sets.
pub fn enumerate_faces_capped(p: &Polyhedron, cap: usize) -> Result<Vec<Face>> {
    let m = p.m();
    if m > cap {
        return Err(Error::FaceCapExceeded { m, cap });
    }
    if p.is_empty() {
        return Ok(Vec::new());
    }
    let radius = p.bounding_radius();
    let found: Vec<Option<Face>> =
        (1u32..(1u32 << m)).into_par_iter().map(|mask| face_for_mask(p, mask, radius)).collect::<Result<_>>()?;
    let mut faces: Vec<Face> = found.into_iter().flatten().collect();
    faces.sort_by(|a, b| a.active_set.cmp(&b.active_set));
    Ok(faces)
}

fn face_for_mask(p: &Polyhedron, mask: u32, radius: f64) -> Result<Option<Face>> {
    let m = p.m();
    let d = p.dim();
    let set: Vec<usize> = (0..m).filter(|&j| mask & (1 << j) != 0).collect();
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::new(obj);
    for j in 0..m {
        let mut row = p.normal(j).to_vec();
        if mask & (1 << j) != 0 {
            row.push(0.0);
            lp.eq(row, p.offset(j));
        } else {
            row.push(1.0);
            lp.le(row, p.offset(j));
        }
    }
    let mut cap_row = vec![0.0; d + 1];
    cap_row[d] = 1.0;
    lp.le(cap_row, 1.0);
    for k in 0..d {
        let mut e = vec![0.0; d + 1];
        e[k] = 1.0;
        lp.le(e.clone(), radius);
        e[k] = -1.0;
        lp.le(e, radius);
    }
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(Error::InfeasibleLp) => return Ok(None),
        Err(e) => return Err(e),
    };
    if sol.objective <= SLACK_TOL {
        return Ok(None);
    }
    let witness = sol.x[..d].to_vec();
    let rows: Vec<&[f64]> = set.iter().map(|&j| p.normal(j)).collect();
    let dim = d - linalg::rank(&rows, RANK_TOL);
    Ok(Some(Face { active_set: set, dim, witness }))
}

/// Finitely generated cone `{Σ λ_j g_j : λ ≥ 0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cone {
    pub generators: Vec<Vec<f64>>,
}

impl Cone {
    /// Membership by nonnegative least squares via LP feasibility.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let k = self.generators.len();
        if k == 0 {
            return linalg::norm(v) <= tol;
        }
        let d = v.len();
        // min Σ (e⁺ + e⁻) s.t. Σ λ_j g_j + e⁺ − e⁻ = v, λ, e ≥ 0.
        let mut obj = vec![0.0; k + 2 * d];
        for o in obj.iter_mut().skip(k) {
            *o = -1.0;
        }
        let mut lp = LinearProgram::new(obj);
        for i in 0..d {
            let mut row: Vec<f64> = self.generators.iter().map(|g| g[i]).collect();
            row.extend((0..2 * d).map(|c| {
                if c == i {
                    1.0
                } else if c == d + i {
                    -1.0
                } else {
                    0.0
                }
            }));
            lp.eq(row, v[i]);
        }
        for c in 0..k + 2 * d {
            let mut row = vec![0.0; k + 2 * d];
            row[c] = -1.0;
            lp.le(row, 0.0);
        }
        match lp.solve() {
            Ok(s) => -s.objective <= tol,
            Err(_) => false,
        }
    }

    /// Polarity check: `⟨x − x_F, v⟩ ≤ tol` for every generator `v` and
    /// every sample point `x` of `P`.
    pub fn is_polar_at(&self, face: &Face, points: &[&[f64]], tol: f64) -> bool {
        points.iter().all(|x| {
            let diff = linalg::sub(x, &face.witness);
            self.generators.iter().all(|v| linalg::dot(&diff, v) <= tol)
        })
    }
}

/// `N_F = cone{t_j : j ∈ active_set}`.
pub fn normal_cone(p: &Polyhedron, face: &Face) -> Cone {
    Cone { generators: face.active_set.iter().map(|&j| p.normal(j).to_vec()).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedra::Halfspace;

    #[test]
    fn square_has_eight_faces() {
        let p = Polyhedron::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let f = enumerate_faces(&p).unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(f.iter().filter(|f| f.dim == 0).count(), 4);
        assert_eq!(f.iter().filter(|f| f.dim == 1).count(), 4);
        for face in &f {
            for (j, h) in p.constraints().iter().enumerate() {
                let slack = h.b - linalg::dot(&face.witness, &h.t);
                if face.active_set.contains(&j) {
                    assert!(slack.abs() < 1e-9);
                } else {
                    assert!(slack > 1e-9);
                }
            }
        }
    }

    #[test]
    fn halfplane_and_triangle() {
        let h = Polyhedron::new(2, vec![Halfspace { t: vec![1.0, 0.0], b: 0.0 }]).unwrap();
        let f = enumerate_faces(&h).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].dim, 1);
        let t = Polyhedron::from_unnormalized(
            2,
            vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)],
        )
        .unwrap();
        assert_eq!(enumerate_faces(&t).unwrap().len(), 6);
    }

    #[test]
    fn cube_face_count() {
        let p = Polyhedron::axis_box(&[0.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(enumerate_faces(&p).unwrap().len(), 26);
    }

    #[test]
    fn redundant_constraint_is_never_active_alone() {
        let mut cs = Polyhedron::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap().constraints().to_vec();
        cs.push(Halfspace { t: vec![1.0, 0.0], b: 5.0 });
        let p = Polyhedron::new(2, cs).unwrap();
        let f = enumerate_faces(&p).unwrap();
        assert_eq!(f.len(), 8);
        assert!(f.iter().all(|f| !f.active_set.contains(&4)));
    }

    #[test]
    fn cap_is_enforced() {
        let p = Polyhedron::axis_box(&[0.0; 3], &[1.0; 3]).unwrap();
        assert!(matches!(enumerate_faces_capped(&p, 4), Err(Error::FaceCapExceeded { m: 6, cap: 4 })));
    }

    #[test]
    fn normal_cone_of_vertex() {
        let p = Polyhedron::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let f = enumerate_faces(&p).unwrap();
        let v = f.iter().find(|f| f.active_set == vec![0, 2]).unwrap();
        let c = normal_cone(&p, v);
        assert!(c.contains(&[1.0, 1.0], 1e-9));
        assert!(c.contains(&[0.3, 0.0], 1e-9));
        assert!(!c.contains(&[-0.1, 1.0], 1e-9));
    }
}
