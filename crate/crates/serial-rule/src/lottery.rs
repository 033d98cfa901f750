//! Decomposing a random assignment into a lottery over deterministic
//! assignments.
//!
//! `bvn_decompose` handles the pure quota polytope by expanding objects
//! into unit-capacity copies (dummy rows absorb unused capacity), then
//! repeatedly extracting the lexicographically smallest perfect matching on
//! the support with its maximal weight. `constrained_decompose` answers the
//! exact question for arbitrary side constraints by enumerating every
//! feasible deterministic assignment and solving a weight-feasibility LP;
//! side constraints can make the answer `Infeasible`.

use num_traits::{One, Signed, Zero};

use crate::model::{rat_int, Assignment, ConstraintSystem, Rational};
use crate::ratlp::{LinearProgram, LpOutcome};
use crate::{Error, Result};
use crate::model::Sense;

/// Deterministic-assignment enumeration guard for `constrained_decompose`.
pub const DECOMPOSE_GUARD: usize = 200_000;

/// One lottery outcome: a deterministic assignment drawn with `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct LotteryEntry {
    pub weight: Rational,
    pub assignment: Assignment,
}

/// A probability distribution over deterministic assignments whose
/// expectation reproduces the source assignment exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lottery {
    pub entries: Vec<LotteryEntry>,
}

impl Lottery {
    pub fn total_weight(&self) -> Rational {
        self.entries
            .iter()
            .map(|e| e.weight.clone())
            .fold(Rational::zero(), |a, b| a + b)
    }

    /// Entrywise expectation `sum weight * assignment`.
    pub fn expectation(&self, num_agents: usize, num_objects: usize) -> Assignment {
        let mut x = Assignment::zero(num_agents, num_objects);
        for entry in &self.entries {
            for i in 0..num_agents {
                for o in 0..num_objects {
                    let add = &entry.weight * entry.assignment.get(i, o);
                    if !add.is_zero() {
                        x.add(i, o, &add);
                    }
                }
            }
        }
        x
    }
}

/// Result of an exact constrained decomposition attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum DecomposeOutcome {
    Decomposed(Lottery),
    /// No lottery over constraint-feasible deterministic assignments has
    /// the required expectation.
    Infeasible,
}

fn check_marginals(x: &Assignment, quotas: &[u64]) -> Result<()> {
    let n = x.num_agents();
    let rho = x.num_objects();
    if quotas.len() != rho {
        return Err(Error::InfeasibleAssignment(format!(
            "{} quota entries for {rho} objects",
            quotas.len()
        )));
    }
    for i in 0..n {
        let mut sum = Rational::zero();
        for o in 0..rho {
            let v = x.get(i, o);
            if v.is_negative() || *v > Rational::one() {
                return Err(Error::InfeasibleAssignment(format!(
                    "entry ({i}, {o}) outside [0, 1]"
                )));
            }
            sum += v;
        }
        if !sum.is_one() {
            return Err(Error::InfeasibleAssignment(format!(
                "row {i} sums to {sum}, expected 1"
            )));
        }
    }
    for (o, &q) in quotas.iter().enumerate() {
        let mut load = Rational::zero();
        for i in 0..n {
            load += x.get(i, o);
        }
        if load > rat_int(q as i64) {
            return Err(Error::InfeasibleAssignment(format!(
                "column {o} load {load} exceeds quota {q}"
            )));
        }
    }
    Ok(())
}

/// Lexicographically smallest perfect matching on a bipartite support
/// graph, as the vector of matched columns per row; `None` when no perfect
/// matching exists. Greedy per row with a feasibility check on the rest.
fn lex_min_perfect_matching(adjacency: &[Vec<usize>]) -> Option<Vec<usize>> {
    let q = adjacency.len();
    let mut used = vec![false; q];
    let mut matched = Vec::with_capacity(q);
    for row in 0..q {
        let mut found = false;
        for &col in &adjacency[row] {
            if used[col] {
                continue;
            }
            used[col] = true;
            if rows_saturable(&adjacency[row + 1..], &used) {
                matched.push(col);
                found = true;
                break;
            }
            used[col] = false;
        }
        if !found {
            return None;
        }
    }
    Some(matched)
}

/// Whether every remaining row can be matched into unused columns
/// (Kuhn's algorithm).
fn rows_saturable(rows: &[Vec<usize>], used: &[bool]) -> bool {
    let mut owner: Vec<Option<usize>> = vec![None; used.len()];
    fn try_match(
        r: usize,
        rows: &[Vec<usize>],
        used: &[bool],
        owner: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &c in &rows[r] {
            if used[c] || visited[c] {
                continue;
            }
            visited[c] = true;
            if owner[c].is_none()
                || try_match(owner[c].unwrap(), rows, used, owner, visited)
            {
                owner[c] = Some(r);
                return true;
            }
        }
        false
    }
    for r in 0..rows.len() {
        let mut visited = vec![false; used.len()];
        if !try_match(r, rows, used, &mut owner, &mut visited) {
            return false;
        }
    }
    true
}

/// Expresses a quota-feasible assignment as a lottery over deterministic
/// assignments, ignoring side constraints. Objects expand into unit
/// copies and dummy agents pad unused capacity, giving a doubly stochastic
/// square matrix to peel matchings from. At most one entry per initial
/// support cell.
pub fn bvn_decompose(x: &Assignment, quotas: &[u64]) -> Result<Lottery> {
    check_marginals(x, quotas)?;
    let n = x.num_agents();
    let rho = x.num_objects();

    // copy -> object
    let mut copy_object: Vec<usize> = Vec::new();
    for (o, &q) in quotas.iter().enumerate() {
        for _ in 0..q {
            copy_object.push(o);
        }
    }
    let q_total = copy_object.len();
    debug_assert!(q_total >= n, "total quota covers all agents");

    // Pour real rows into copies, then pad with dummy rows so that every
    // row and column sums to exactly 1.
    let mut matrix = vec![vec![Rational::zero(); q_total]; q_total];
    let mut column_fill = vec![Rational::zero(); q_total];
    let one = Rational::one();
    {
        let mut first_copy = Vec::with_capacity(rho);
        let mut acc = 0usize;
        for &q in quotas {
            first_copy.push(acc);
            acc += q as usize;
        }
        for (o, &start) in first_copy.iter().enumerate() {
            let mut copy = start;
            for (i, row) in matrix.iter_mut().enumerate().take(n) {
                let mut left = x.get(i, o).clone();
                while left.is_positive() {
                    let spare = &one - &column_fill[copy];
                    if spare.is_zero() {
                        copy += 1;
                        continue;
                    }
                    let take = if left < spare { left.clone() } else { spare };
                    row[copy] += &take;
                    column_fill[copy] += &take;
                    left -= &take;
                }
            }
        }
    }
    for row in matrix.iter_mut().take(q_total).skip(n) {
        let mut need = one.clone();
        for (copy, fill) in column_fill.iter_mut().enumerate() {
            if need.is_zero() {
                break;
            }
            let spare = &one - &*fill;
            if spare.is_zero() {
                continue;
            }
            let take = if need < spare { need.clone() } else { spare };
            row[copy] += &take;
            *fill += &take;
            need -= &take;
        }
        debug_assert!(need.is_zero(), "residual capacity covers dummy rows");
    }

    let mut entries = Vec::new();
    let mut remaining = one.clone();
    while remaining.is_positive() {
        let adjacency: Vec<Vec<usize>> = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_positive())
                    .map(|(c, _)| c)
                    .collect()
            })
            .collect();
        let matching = lex_min_perfect_matching(&adjacency).ok_or_else(|| {
            Error::InconsistentSnapshot(
                "doubly stochastic support always admits a perfect matching".into(),
            )
        })?;
        let weight = matching
            .iter()
            .enumerate()
            .map(|(r, &c)| matrix[r][c].clone())
            .min()
            .expect("matrix is non-empty");
        let mut det = Assignment::zero(n, rho);
        for (r, &c) in matching.iter().enumerate().take(n) {
            det.set(r, copy_object[c], Rational::one());
        }
        for (r, &c) in matching.iter().enumerate() {
            matrix[r][c] -= &weight;
        }
        remaining -= &weight;
        entries.push(LotteryEntry {
            weight,
            assignment: det,
        });
    }
    Ok(Lottery { entries })
}

/// Enumerates every deterministic assignment that satisfies the quota
/// polytope and all constraint rows, then solves for lottery weights whose
/// expectation equals `x` exactly.
pub fn constrained_decompose(
    x: &Assignment,
    quotas: &[u64],
    constraints: &ConstraintSystem,
) -> Result<DecomposeOutcome> {
    check_marginals(x, quotas)?;
    for (c, row) in constraints.rows.iter().enumerate() {
        if !row.satisfied_by(x) {
            return Err(Error::InfeasibleAssignment(format!(
                "assignment violates constraint row {c}"
            )));
        }
    }
    let n = x.num_agents();
    let rho = x.num_objects();
    let needed = rho.checked_pow(n as u32).unwrap_or(usize::MAX);
    if needed > DECOMPOSE_GUARD {
        return Err(Error::EnumerationGuard {
            limit: DECOMPOSE_GUARD,
            needed,
        });
    }

    // Odometer over agent -> object choices, lexicographic.
    let mut feasible: Vec<Assignment> = Vec::new();
    let mut choice = vec![0usize; n];
    'outer: loop {
        let mut loads = vec![0u64; rho];
        let mut ok = true;
        for &o in &choice {
            loads[o] += 1;
            if loads[o] > quotas[o] {
                ok = false;
                break;
            }
        }
        if ok {
            let mut det = Assignment::zero(n, rho);
            for (i, &o) in choice.iter().enumerate() {
                det.set(i, o, Rational::one());
            }
            if constraints.rows.iter().all(|row| row.satisfied_by(&det)) {
                feasible.push(det);
            }
        }
        for pos in (0..n).rev() {
            choice[pos] += 1;
            if choice[pos] < rho {
                continue 'outer;
            }
            choice[pos] = 0;
        }
        break;
    }

    // Weight feasibility: expectation matches x entrywise and weights sum
    // to one. Any basic feasible point will do.
    let mut lp = LinearProgram::new(feasible.len());
    for i in 0..n {
        for o in 0..rho {
            let coeffs = feasible
                .iter()
                .enumerate()
                .filter(|(_, det)| det.get(i, o).is_one())
                .map(|(k, _)| (k, rat_int(1)));
            lp.add_row(coeffs, Sense::Eq, x.get(i, o).clone())?;
        }
    }
    lp.add_row(
        (0..feasible.len()).map(|k| (k, rat_int(1))),
        Sense::Eq,
        rat_int(1),
    )?;

    match lp.solve() {
        LpOutcome::Optimal { point, .. } => {
            let entries: Vec<LotteryEntry> = feasible
                .into_iter()
                .zip(point)
                .filter(|(_, w)| w.is_positive())
                .map(|(assignment, weight)| LotteryEntry { weight, assignment })
                .collect();
            Ok(DecomposeOutcome::Decomposed(Lottery { entries }))
        }
        LpOutcome::Infeasible => Ok(DecomposeOutcome::Infeasible),
        LpOutcome::Unbounded => Err(Error::InconsistentSnapshot(
            "weight LP has a constant objective; it cannot be unbounded".into(),
        )),
    }
}
