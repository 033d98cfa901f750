//! Exact rational linear programming.
//!
//! A dense two-phase primal simplex over [`Rational`] with Bland's
//! anti-cycling pivot rule. Every linear program in the crate is solved
//! here. All variables are non-negative by construction; the objective is
//! maximized. Problem sizes are desk scale (a few hundred variables), so
//! exactness is affordable and optima are returned as exact rationals with
//! a basic feasible point.
//!
//! The pivot rule is fixed, which makes `solve` deterministic: identical
//! programs produce identical outcomes.

use num_traits::{One, Signed, Zero};

use crate::model::{Rational, Sense};
use crate::{Error, Result};

/// A linear program: maximize `objective . x` subject to the rows, with
/// `x >= 0`. Coefficients absent from a row or the objective are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<Rational>,
    rows: Vec<LpRow>,
}

/// One constraint row of a [`LinearProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

/// Solver outcome. `Infeasible` and `Unbounded` are statuses, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: Rational,
        /// A basic feasible solution attaining `value`, indexed by variable.
        point: Vec<Rational>,
    },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal_value(&self) -> Option<&Rational> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn optimal_point(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![Rational::zero(); num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn objective(&self) -> &[Rational] {
        &self.objective
    }

    pub fn set_objective(&mut self, var: usize, coeff: Rational) -> Result<()> {
        if var >= self.num_vars {
            return Err(Error::UndeclaredVariable(var));
        }
        self.objective[var] = coeff;
        Ok(())
    }

    /// Adds a constraint row. Repeated variables within one row are summed.
    pub fn add_row(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, Rational)>,
        sense: Sense,
        rhs: Rational,
    ) -> Result<()> {
        let mut merged: Vec<(usize, Rational)> = Vec::new();
        for (var, coeff) in coeffs {
            if var >= self.num_vars {
                return Err(Error::UndeclaredVariable(var));
            }
            match merged.iter_mut().find(|(v, _)| *v == var) {
                Some((_, c)) => *c += coeff,
                None => merged.push((var, coeff)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        merged.sort_by_key(|(v, _)| *v);
        self.rows.push(LpRow {
            coeffs: merged,
            sense,
            rhs,
        });
        Ok(())
    }

    /// Solves to exact optimality.
    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).optimize(&self.objective)
    }
}

/// Dense simplex tableau. The last column holds the right-hand side.
struct Tableau {
    /// `m` rows of width `num_cols + 1`.
    rows: Vec<Vec<Rational>>,
    /// Variable basic in each row.
    basis: Vec<usize>,
    /// Reduced-cost row (`z_j - c_j`), with the objective value last.
    obj: Vec<Rational>,
    num_struct: usize,
    num_cols: usize,
    artificial_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.rows.len();

        // Normalize to non-negative right-hand sides.
        let mut dense: Vec<(Vec<Rational>, Sense, Rational)> = Vec::with_capacity(m);
        for row in &lp.rows {
            let mut coeffs = vec![Rational::zero(); n];
            for (var, c) in &row.coeffs {
                coeffs[*var] = c.clone();
            }
            let (coeffs, sense, rhs) = if row.rhs.is_negative() {
                let flipped = match row.sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (
                    coeffs.into_iter().map(|c| -c).collect(),
                    flipped,
                    -row.rhs.clone(),
                )
            } else {
                (coeffs, row.sense, row.rhs.clone())
            };
            dense.push((coeffs, sense, rhs));
        }

        let num_ineq = dense
            .iter()
            .filter(|(_, s, _)| matches!(s, Sense::Le | Sense::Ge))
            .count();
        let num_art = dense
            .iter()
            .filter(|(_, s, _)| matches!(s, Sense::Ge | Sense::Eq))
            .count();
        let artificial_start = n + num_ineq;
        let num_cols = artificial_start + num_art;

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = artificial_start;
        for (coeffs, sense, rhs) in dense {
            let mut row = vec![Rational::zero(); num_cols + 1];
            row[..n].clone_from_slice(&coeffs);
            row[num_cols] = rhs;
            match sense {
                Sense::Le => {
                    row[next_slack] = Rational::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Sense::Ge => {
                    row[next_slack] = -Rational::one();
                    next_slack += 1;
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Sense::Eq => {
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }

        Tableau {
            rows,
            basis,
            obj: vec![Rational::zero(); num_cols + 1],
            num_struct: n,
            num_cols,
            artificial_start,
        }
    }

    /// Rebuilds the reduced-cost row for the given cost vector.
    fn reset_objective(&mut self, costs: &[Rational]) {
        for (slot, cost) in self.obj.iter_mut().zip(costs) {
            *slot = -cost.clone();
        }
        self.obj[self.num_cols] = Rational::zero();
        for r in 0..self.rows.len() {
            let c = costs[self.basis[r]].clone();
            if c.is_zero() {
                continue;
            }
            for j in 0..=self.num_cols {
                if !self.rows[r][j].is_zero() {
                    let add = &c * &self.rows[r][j];
                    self.obj[j] += add;
                }
            }
        }
    }

    /// Bland's rule: entering = lowest-index improving column; leaving =
    /// lowest-index basic variable among minimum-ratio rows. Returns false
    /// when optimal, `Err(())` on an unbounded direction.
    fn pivot_step(&mut self, bar_artificials: bool) -> std::result::Result<bool, ()> {
        let limit = if bar_artificials {
            self.artificial_start
        } else {
            self.num_cols
        };
        let entering = (0..limit).find(|&j| self.obj[j].is_negative());
        let Some(j) = entering else {
            return Ok(false);
        };

        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..self.rows.len() {
            let a = &self.rows[r][j];
            if !a.is_positive() {
                continue;
            }
            let ratio = &self.rows[r][self.num_cols] / a;
            match &leave {
                None => leave = Some((r, ratio)),
                Some((best_r, best)) => {
                    if ratio < *best || (ratio == *best && self.basis[r] < self.basis[*best_r]) {
                        leave = Some((r, ratio));
                    }
                }
            }
        }
        let Some((r, _)) = leave else {
            return Err(());
        };
        self.pivot(r, j);
        Ok(true)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let pivot = self.rows[r][j].clone();
        if !pivot.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &pivot;
                }
            }
        }
        // Only the pivot row's support participates in the elimination.
        let support: Vec<(usize, Rational)> = self.rows[r]
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(c, v)| (c, v.clone()))
            .collect();
        for r2 in 0..self.rows.len() {
            if r2 == r {
                continue;
            }
            let factor = self.rows[r2][j].clone();
            if factor.is_zero() {
                continue;
            }
            for (c, v) in &support {
                let sub = &factor * v;
                self.rows[r2][*c] -= sub;
            }
        }
        let factor = self.obj[j].clone();
        if !factor.is_zero() {
            for (c, v) in &support {
                let sub = &factor * v;
                self.obj[*c] -= sub;
            }
        }
        self.basis[r] = j;
    }

    fn run_simplex(&mut self, bar_artificials: bool) -> std::result::Result<(), ()> {
        let mut steps = 0usize;
        while self.pivot_step(bar_artificials)? {
            steps += 1;
            // Bland's rule cannot cycle; a runaway loop is a bug.
            assert!(steps < 2_000_000, "simplex failed to terminate");
        }
        Ok(())
    }

    fn objective_value(&self) -> Rational {
        self.obj[self.num_cols].clone()
    }

    /// Pivots artificial variables out of the basis after phase one and
    /// drops rows that turn out redundant.
    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] < self.artificial_start {
                r += 1;
                continue;
            }
            // The artificial is basic at value zero; pivot on any non-zero
            // non-artificial coefficient in its row.
            let col = (0..self.artificial_start).find(|&j| !self.rows[r][j].is_zero());
            match col {
                Some(j) => {
                    self.pivot(r, j);
                    r += 1;
                }
                None => {
                    // All-zero row: the original constraint was redundant.
                    self.rows.swap_remove(r);
                    self.basis.swap_remove(r);
                }
            }
        }
    }

    fn extract_point(&self) -> Vec<Rational> {
        let mut point = vec![Rational::zero(); self.num_struct];
        for (r, &var) in self.basis.iter().enumerate() {
            if var < self.num_struct {
                point[var] = self.rows[r][self.num_cols].clone();
            }
        }
        point
    }

    fn optimize(mut self, objective: &[Rational]) -> LpOutcome {
        // Phase one: minimize the artificial total, i.e. maximize its
        // negation; a negative optimum means the program is infeasible.
        if self.artificial_start < self.num_cols {
            let mut costs = vec![Rational::zero(); self.num_cols];
            for cost in costs[self.artificial_start..].iter_mut() {
                *cost = -Rational::one();
            }
            self.reset_objective(&costs);
            if self.run_simplex(false).is_err() {
                unreachable!("phase-one objective is bounded above by zero");
            }
            if self.objective_value().is_negative() {
                return LpOutcome::Infeasible;
            }
            self.drive_out_artificials();
        }

        let mut costs = vec![Rational::zero(); self.num_cols];
        costs[..self.num_struct].clone_from_slice(objective);
        self.reset_objective(&costs);
        if self.run_simplex(true).is_err() {
            return LpOutcome::Unbounded;
        }
        LpOutcome::Optimal {
            value: self.objective_value(),
            point: self.extract_point(),
        }
    }
}
