//! Certificates for efficiency and fairness of concrete assignments.
//!
//! The efficiency check solves a single dominance LP: it maximizes the
//! total cumulative improvement over all agents and levels, constrained so
//! that no agent's cumulative share may drop at any level. The assignment
//! is constrained ordinally efficient exactly when that optimum is zero;
//! any positive optimum yields a dominating witness.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use crate::mechanism::MechanismResult;
use crate::model::{rat_int, Assignment, Instance, Promise, Rational, Sense};
use crate::ratlp::{LinearProgram, LpOutcome};
use crate::{Error, Result};

/// Outcome of the constrained ordinal efficiency check.
#[derive(Debug, Clone)]
pub struct EfficiencyCertificate {
    pub efficient: bool,
    /// A feasible assignment that weakly dominates everywhere and strictly
    /// somewhere; present exactly when `efficient` is false.
    pub witness: Option<Assignment>,
    /// Total strict improvement found by the dominance LP (zero when
    /// efficient).
    pub slack: Rational,
}

/// One stochastic-dominance envy violation between same-type agents.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvyViolation {
    pub envious: usize,
    pub envied: usize,
    /// 1-based indifference level of the envious agent where the deficit
    /// occurs.
    pub level: usize,
    pub deficit: Rational,
}

/// All same-type envy violations of an assignment; empty means envy-free
/// among agents of the same type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvyReport {
    pub violations: Vec<EnvyViolation>,
}

impl EnvyReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

fn require_feasible(inst: &Instance, x: &Assignment) -> Result<()> {
    let violations = x.validate(inst);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InfeasibleAssignment(
            violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        ))
    }
}

/// Whether two agents are of the same type: every constraint row, read in
/// the form the modeler supplied it, gives `x[i,o]` and `x[j,o]` identical
/// coefficients for every object.
pub fn same_type(inst: &Instance, i: usize, j: usize) -> Result<bool> {
    let n = inst.num_agents();
    if i >= n {
        return Err(Error::AgentOutOfRange(i));
    }
    if j >= n {
        return Err(Error::AgentOutOfRange(j));
    }
    for row in &inst.constraints().rows {
        for o in 0..inst.num_objects() {
            if row.coefficient(i, o) != row.coefficient(j, o) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Certifies constrained ordinal efficiency of a feasible assignment.
pub fn is_constrained_ordinally_efficient(
    inst: &Instance,
    x: &Assignment,
) -> Result<EfficiencyCertificate> {
    require_feasible(inst, x)?;

    let n = inst.num_agents();
    let rho = inst.num_objects();
    let var = |i: usize, o: usize| i * rho + o;
    let mut lp = LinearProgram::new(n * rho);

    // Objective weight of x'[i,o] is the number of levels whose top set
    // contains o, so the objective equals the sum of all cumulative shares.
    let mut baseline = Rational::zero();
    for i in 0..n {
        let order = inst.preference(i);
        let levels = order.num_classes();
        for (k, class) in order.classes().iter().enumerate() {
            let weight = rat_int((levels - k) as i64);
            for &o in class {
                lp.set_objective(var(i, o), weight.clone())?;
            }
        }
        for level in 1..=levels {
            let top = order.top_classes(level)?;
            let current = x.cumulative(i, &top);
            baseline += &current;
            let coeffs = top.iter().map(|&o| (var(i, o), rat_int(1)));
            lp.add_row(coeffs, Sense::Ge, current)?;
        }
    }
    for (coeffs, rhs) in inst.constraints().normalized_le_rows() {
        lp.add_row(
            coeffs.into_iter().map(|((i, o), c)| (var(i, o), c)),
            Sense::Le,
            rhs,
        )?;
    }
    for i in 0..n {
        lp.add_row(
            (0..rho).map(|o| (var(i, o), rat_int(1))),
            Sense::Eq,
            rat_int(1),
        )?;
    }
    for o in 0..rho {
        lp.add_row(
            (0..n).map(|i| (var(i, o), rat_int(1))),
            Sense::Le,
            rat_int(inst.quota(o) as i64),
        )?;
    }

    match lp.solve() {
        LpOutcome::Optimal { value, point } => {
            let slack = value - baseline;
            debug_assert!(!slack.is_negative(), "x itself is feasible for the LP");
            if slack.is_zero() {
                Ok(EfficiencyCertificate {
                    efficient: true,
                    witness: None,
                    slack,
                })
            } else {
                let mut witness = Assignment::zero(n, rho);
                for i in 0..n {
                    for o in 0..rho {
                        witness.set(i, o, point[var(i, o)].clone());
                    }
                }
                Ok(EfficiencyCertificate {
                    efficient: false,
                    witness: Some(witness),
                    slack,
                })
            }
        }
        outcome => Err(Error::InconsistentSnapshot(format!(
            "dominance LP has a feasible bounded optimum by construction, got {outcome:?}"
        ))),
    }
}

/// Reports every same-type pair `(i, j)` and level where agent `i`'s
/// cumulative share over her own top set falls below agent `j`'s.
pub fn envy_report(inst: &Instance, x: &Assignment) -> Result<EnvyReport> {
    require_feasible(inst, x)?;
    let n = inst.num_agents();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || !same_type(inst, i, j)? {
                continue;
            }
            let order = inst.preference(i);
            for level in 1..=order.num_classes() {
                let top = order.top_classes(level)?;
                let own = x.cumulative(i, &top);
                let other = x.cumulative(j, &top);
                if own < other {
                    violations.push(EnvyViolation {
                        envious: i,
                        envied: j,
                        level,
                        deficit: other - own,
                    });
                }
            }
        }
    }
    Ok(EnvyReport { violations })
}

/// Verifies that the final assignment meets every recorded promise with
/// exact equality: the mechanism fixes each bottlenecked cumulative share,
/// it never merely bounds it.
pub fn check_promises(inst: &Instance, result: &MechanismResult) -> Result<bool> {
    for p in &result.final_promises {
        if p.agent >= inst.num_agents() {
            return Err(Error::AgentOutOfRange(p.agent));
        }
        let top = inst.preference(p.agent).top_classes(p.level)?;
        if result.assignment.cumulative(p.agent, &top) != p.share {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks the no-improvement condition for one round snapshot: no feasible
/// assignment meeting all promises can give every bottleneck agent at least
/// `lambda_t` over her threshold set with a strict surplus for any of them.
///
/// Solves the slack LP (one surplus variable per bottleneck agent, maximize
/// their sum) and returns `true` when the optimum is exactly zero.
pub fn check_no_improvement(
    inst: &Instance,
    promises: &[Promise],
    thresholds: &[usize],
    b_set: &BTreeSet<usize>,
    lambda_t: &Rational,
) -> Result<bool> {
    let n = inst.num_agents();
    let rho = inst.num_objects();
    if thresholds.len() != n {
        return Err(Error::InconsistentSnapshot(format!(
            "{} thresholds for {n} agents",
            thresholds.len()
        )));
    }
    for &i in b_set {
        if i >= n {
            return Err(Error::AgentOutOfRange(i));
        }
    }

    let var = |i: usize, o: usize| i * rho + o;
    let slack_vars: Vec<usize> = b_set.iter().copied().collect();
    let slack_var = |pos: usize| n * rho + pos;
    let mut lp = LinearProgram::new(n * rho + slack_vars.len());

    for (pos, &i) in slack_vars.iter().enumerate() {
        lp.set_objective(slack_var(pos), rat_int(1))?;
        let top = inst.preference(i).top_classes(thresholds[i])?;
        let mut coeffs: Vec<(usize, Rational)> =
            top.iter().map(|&o| (var(i, o), rat_int(1))).collect();
        coeffs.push((slack_var(pos), rat_int(-1)));
        lp.add_row(coeffs, Sense::Ge, lambda_t.clone())?;
    }
    for (coeffs, rhs) in inst.constraints().normalized_le_rows() {
        lp.add_row(
            coeffs.into_iter().map(|((i, o), c)| (var(i, o), c)),
            Sense::Le,
            rhs,
        )?;
    }
    for i in 0..n {
        lp.add_row(
            (0..rho).map(|o| (var(i, o), rat_int(1))),
            Sense::Eq,
            rat_int(1),
        )?;
    }
    for o in 0..rho {
        lp.add_row(
            (0..n).map(|i| (var(i, o), rat_int(1))),
            Sense::Le,
            rat_int(inst.quota(o) as i64),
        )?;
    }
    for p in promises {
        let top = inst.preference(p.agent).top_classes(p.level)?;
        lp.add_row(
            top.iter().map(|&o| (var(p.agent, o), rat_int(1))),
            Sense::Ge,
            p.share.clone(),
        )?;
    }

    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Ok(value.is_zero()),
        LpOutcome::Infeasible => Err(Error::InconsistentSnapshot(
            "no-improvement LP infeasible; the round snapshot is not from a valid run".into(),
        )),
        LpOutcome::Unbounded => Err(Error::InconsistentSnapshot(
            "no-improvement LP unbounded; surpluses are bounded by unit row sums".into(),
        )),
    }
}

/// Runs the full audit used by the randomized suites: efficiency, same-type
/// envy-freeness, exact promise satisfaction, and the per-round
/// no-improvement certificates.
pub fn audit_result(inst: &Instance, result: &MechanismResult) -> Result<AuditOutcome> {
    let efficiency = is_constrained_ordinally_efficient(inst, &result.assignment)?;
    let envy = envy_report(inst, &result.assignment)?;
    let promises_hold = check_promises(inst, result)?;
    let mut rounds_clean = true;
    let mut recorded: Vec<Promise> = Vec::new();
    for round in &result.rounds {
        if !round.bottleneck.is_empty()
            && !check_no_improvement(
                inst,
                &recorded,
                &round.thresholds,
                &round.bottleneck,
                &round.lambda,
            )?
        {
            rounds_clean = false;
        }
        recorded.extend(round.promises_added.iter().cloned());
    }
    Ok(AuditOutcome {
        efficiency,
        envy,
        promises_hold,
        rounds_clean,
    })
}

/// Combined audit verdict.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub efficiency: EfficiencyCertificate,
    pub envy: EnvyReport,
    pub promises_hold: bool,
    pub rounds_clean: bool,
}

impl AuditOutcome {
    pub fn all_pass(&self) -> bool {
        self.efficiency.efficient
            && self.envy.is_empty()
            && self.promises_hold
            && self.rounds_clean
    }
}
