//! Dense two-phase simplex for the small LPs used by the polyhedron code
//! (feasibility, support functions, relative-interior witnesses).
//!
//! Variables are free; they are split as `x = x⁺ − x⁻` internally. Pivoting
//! follows Bland's rule, so the method terminates on degenerate problems.

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize ⟨objective, x⟩` subject to `constraints`, `x` free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram { objective, constraints: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars());
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn le(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.push(coeffs, Relation::Le, rhs);
    }

    pub fn eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.push(coeffs, Relation::Eq, rhs);
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // each row: ncols coefficients followed by rhs
    basis: Vec<usize>,
    kinds: Vec<Kind>,
    ncols: usize,
    nx: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let nx = lp.n_vars();
        let m = lp.constraints.len();
        let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
        let n_art = lp
            .constraints
            .iter()
            .filter(|c| {
                let flip = c.rhs < 0.0;
                match c.relation {
                    Relation::Eq => true,
                    Relation::Le => flip,
                    Relation::Ge => !flip,
                }
            })
            .count();
        let ncols = 2 * nx + n_slack + n_art;
        let mut kinds = vec![Kind::Structural; 2 * nx];
        kinds.extend(std::iter::repeat_n(Kind::Slack, n_slack));
        kinds.extend(std::iter::repeat_n(Kind::Artificial, n_art));

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_slack = 2 * nx;
        let mut next_art = 2 * nx + n_slack;
        for c in &lp.constraints {
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            let mut row = vec![0.0; ncols + 1];
            for (j, &a) in c.coeffs.iter().enumerate() {
                row[j] = sign * a;
                row[nx + j] = -sign * a;
            }
            row[ncols] = sign * c.rhs;
            let rel = match (c.relation, sign < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Tableau { rows, basis, kinds, ncols, nx }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, pv) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximize `cost` over the current tableau. Columns with `allowed[j]`
    /// false never enter the basis.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index column with positive reduced cost.
            let mut entering = None;
            for j in 0..self.ncols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut z = 0.0;
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    z += cost[b] * row[j];
                }
                if cost[j] - z > TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > TOL {
                    let ratio = row[self.ncols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - TOL || ((ratio - lr).abs() <= TOL && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return Err(Error::UnboundedLp) };
            self.pivot(r, c);
        }
        Err(Error::NonConvergence { sweeps: MAX_PIVOTS, change: f64::NAN })
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let all = vec![true; self.ncols];
        if self.kinds.contains(&Kind::Artificial) {
            let cost: Vec<f64> = self.kinds.iter().map(|k| if *k == Kind::Artificial { -1.0 } else { 0.0 }).collect();
            self.optimize(&cost, &all)?;
            let infeas: f64 = self
                .rows
                .iter()
                .zip(&self.basis)
                .filter(|(_, &b)| self.kinds[b] == Kind::Artificial)
                .map(|(row, _)| row[self.ncols])
                .sum();
            if infeas > TOL * (1.0 + self.rows.len() as f64) {
                return Err(Error::InfeasibleLp);
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.rows.len() {
                if self.kinds[self.basis[i]] == Kind::Artificial {
                    let col =
                        (0..self.ncols).find(|&j| self.kinds[j] != Kind::Artificial && self.rows[i][j].abs() > TOL);
                    match col {
                        Some(j) => self.pivot(i, j),
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }
        let allowed: Vec<bool> = self.kinds.iter().map(|k| *k != Kind::Artificial).collect();
        let mut cost = vec![0.0; self.ncols];
        for (j, &c) in lp.objective.iter().enumerate() {
            cost[j] = c;
            cost[self.nx + j] = -c;
        }
        self.optimize(&cost, &allowed)?;

        let mut x = vec![0.0; self.nx];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let v = row[self.ncols];
            if b < self.nx {
                x[b] += v;
            } else if b < 2 * self.nx {
                x[b - self.nx] -= v;
            }
        }
        let objective = crate::linalg::dot(&lp.objective, &x);
        Ok(LpSolution { x, objective })
    }
}
