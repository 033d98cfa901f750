//! The constrained serial rule.
//!
//! The mechanism runs in rounds. Each round solves a linear program that
//! maximizes the smallest cumulative share any agent receives from her top
//! `l_i` indifference classes, subject to the feasibility polytope and all
//! previously recorded promises. If the optimum is exactly 1 the mechanism
//! terminates; otherwise it finds a *minimal bottleneck set* of agents that
//! pins the optimum, promises each of them their current share, and widens
//! their thresholds by one class.
//!
//! Bottleneck sets need not be unique; the search removes agents in a
//! configurable order, so results are deterministic given a
//! [`MechanismConfig`].

use std::collections::BTreeSet;

use num_traits::One;

use crate::model::{rat_int, Assignment, Instance, Promise, Rational, Sense};
use crate::ratlp::{LinearProgram, LpOutcome};
use crate::{Error, Result};

/// Variable layout of the round LP: the assignment block `x[i,o]` first
/// (row-major), then one `h_i` per agent, then `lambda` last.
#[derive(Clone, Copy)]
struct VarMap {
    num_agents: usize,
    num_objects: usize,
}

impl VarMap {
    fn of(inst: &Instance) -> Self {
        VarMap {
            num_agents: inst.num_agents(),
            num_objects: inst.num_objects(),
        }
    }

    fn x(&self, agent: usize, object: usize) -> usize {
        agent * self.num_objects + object
    }

    fn h(&self, agent: usize) -> usize {
        self.num_agents * self.num_objects + agent
    }

    fn lambda(&self) -> usize {
        self.num_agents * self.num_objects + self.num_agents
    }

    fn total(&self) -> usize {
        self.lambda() + 1
    }

    fn assignment_from(&self, point: &[Rational]) -> Assignment {
        let mut x = Assignment::zero(self.num_agents, self.num_objects);
        for i in 0..self.num_agents {
            for o in 0..self.num_objects {
                x.set(i, o, point[self.x(i, o)].clone());
            }
        }
        x
    }
}

/// How much per-round state to keep in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    /// Keep each round's LP point.
    Full,
    /// Keep lambdas, bottlenecks and promises but drop per-round points.
    Final,
}

/// Run configuration: the order in which the bottleneck search tries to
/// remove agents, and the trace detail level.
#[derive(Debug, Clone)]
pub struct MechanismConfig {
    /// A permutation of `0..n`. The search attempts removals in this order.
    pub removal_order: Vec<usize>,
    pub trace_level: TraceLevel,
}

impl MechanismConfig {
    /// Instance agent order, full trace.
    pub fn default_for(inst: &Instance) -> Self {
        MechanismConfig {
            removal_order: (0..inst.num_agents()).collect(),
            trace_level: TraceLevel::Full,
        }
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        self.removal_order = order;
        self
    }

    fn validate(&self, inst: &Instance) -> Result<()> {
        let n = inst.num_agents();
        let mut seen = vec![false; n];
        if self.removal_order.len() != n {
            return Err(Error::InconsistentSnapshot(format!(
                "removal order has {} entries for {} agents",
                self.removal_order.len(),
                n
            )));
        }
        for &i in &self.removal_order {
            if i >= n || seen[i] {
                return Err(Error::InconsistentSnapshot(
                    "removal order is not a permutation of the agents".into(),
                ));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Snapshot of one mechanism round.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    /// Round number, starting at 1.
    pub round: usize,
    /// Threshold level per agent at the start of the round.
    pub thresholds: Vec<usize>,
    /// The round's LP optimum.
    pub lambda: Rational,
    /// Bottleneck agents; empty exactly in the terminal round.
    pub bottleneck: BTreeSet<usize>,
    /// Promises recorded this round, one per bottleneck agent.
    pub promises_added: Vec<Promise>,
    /// The round LP's point (kept under [`TraceLevel::Full`]).
    pub lp_point: Option<Assignment>,
    /// LP solves performed this round (1 for the round LP plus one per
    /// bottleneck-search step); at most `n + 1`.
    pub lp_solves: usize,
}

/// Mechanism output: the final assignment, the per-round trace, and the
/// accumulated promise set.
#[derive(Debug, Clone)]
pub struct MechanismResult {
    pub assignment: Assignment,
    pub rounds: Vec<RoundTrace>,
    pub final_promises: Vec<Promise>,
}

impl MechanismResult {
    /// Lambda values per round; non-decreasing, ending at 1.
    pub fn lambdas(&self) -> Vec<Rational> {
        self.rounds.iter().map(|r| r.lambda.clone()).collect()
    }
}

fn check_thresholds(inst: &Instance, thresholds: &[usize]) -> Result<()> {
    if thresholds.len() != inst.num_agents() {
        return Err(Error::InconsistentSnapshot(format!(
            "{} thresholds for {} agents",
            thresholds.len(),
            inst.num_agents()
        )));
    }
    for (order, &level) in inst.preferences().iter().zip(thresholds) {
        let max = order.num_classes();
        if level < 1 || level > max {
            return Err(Error::LevelOutOfRange { level, max });
        }
    }
    Ok(())
}

fn check_promises(inst: &Instance, promises: &[Promise]) -> Result<()> {
    for p in promises {
        if p.agent >= inst.num_agents() {
            return Err(Error::AgentOutOfRange(p.agent));
        }
        let max = inst.preference(p.agent).num_classes();
        if p.level < 1 || p.level > max {
            return Err(Error::LevelOutOfRange {
                level: p.level,
                max,
            });
        }
    }
    Ok(())
}

/// Builds the round linear program `LP(s, f, thresholds)`.
///
/// Variables are the assignment block, one aspiration variable `h_i` per
/// agent, and the objective variable `lambda`. Rows, in order: `h_i >=
/// lambda` for `i` in `s`; the threshold rows tying each `h_i` to the
/// agent's cumulative share; the side constraints normalized to `<=`; unit
/// row sums and quota column loads; one row per promise. When `s` is empty
/// nothing bounds `lambda`, so an explicit `lambda <= 1` row is added;
/// with any agent present `lambda <= h_i <= 1` already holds, and 1 is the
/// correct "no agent binds" value.
pub fn build_round_lp(
    inst: &Instance,
    s: &BTreeSet<usize>,
    promises: &[Promise],
    thresholds: &[usize],
) -> Result<LinearProgram> {
    check_thresholds(inst, thresholds)?;
    check_promises(inst, promises)?;
    for &i in s {
        if i >= inst.num_agents() {
            return Err(Error::AgentOutOfRange(i));
        }
    }

    let vars = VarMap::of(inst);
    let mut lp = LinearProgram::new(vars.total());
    lp.set_objective(vars.lambda(), Rational::one())?;

    for &i in s {
        lp.add_row(
            [(vars.h(i), rat_int(1)), (vars.lambda(), rat_int(-1))],
            Sense::Ge,
            rat_int(0),
        )?;
    }
    for (i, &level) in thresholds.iter().enumerate() {
        let top = inst.preference(i).top_classes(level)?;
        let mut coeffs: Vec<(usize, Rational)> =
            top.iter().map(|&o| (vars.x(i, o), rat_int(1))).collect();
        coeffs.push((vars.h(i), rat_int(-1)));
        lp.add_row(coeffs, Sense::Ge, rat_int(0))?;
    }
    for (coeffs, rhs) in inst.constraints().normalized_le_rows() {
        let lp_coeffs = coeffs
            .into_iter()
            .map(|((i, o), c)| (vars.x(i, o), c));
        lp.add_row(lp_coeffs, Sense::Le, rhs)?;
    }
    for i in 0..inst.num_agents() {
        let coeffs = (0..inst.num_objects()).map(|o| (vars.x(i, o), rat_int(1)));
        lp.add_row(coeffs, Sense::Eq, rat_int(1))?;
    }
    for o in 0..inst.num_objects() {
        let coeffs = (0..inst.num_agents()).map(|i| (vars.x(i, o), rat_int(1)));
        lp.add_row(coeffs, Sense::Le, rat_int(inst.quota(o) as i64))?;
    }
    for p in promises {
        let top = inst.preference(p.agent).top_classes(p.level)?;
        let coeffs = top.iter().map(|&o| (vars.x(p.agent, o), rat_int(1)));
        lp.add_row(coeffs, Sense::Ge, p.share.clone())?;
    }
    if s.is_empty() {
        lp.add_row([(vars.lambda(), rat_int(1))], Sense::Le, rat_int(1))?;
    }
    Ok(lp)
}

/// Solves a round LP, expecting an optimum.
fn solve_round(lp: &LinearProgram, round: usize) -> Result<(Rational, Vec<Rational>)> {
    match lp.solve() {
        LpOutcome::Optimal { value, point } => Ok((value, point)),
        LpOutcome::Infeasible if round == 1 => Err(Error::EmptyPolytope),
        LpOutcome::Infeasible => Err(Error::InconsistentSnapshot(format!(
            "round {round} LP infeasible although the previous optimum remains feasible"
        ))),
        LpOutcome::Unbounded => Err(Error::InconsistentSnapshot(format!(
            "round {round} LP unbounded; lambda is bounded by unit row sums"
        ))),
    }
}

fn find_bottleneck_counted(
    inst: &Instance,
    promises: &[Promise],
    thresholds: &[usize],
    lambda_t: &Rational,
    cfg: &MechanismConfig,
) -> Result<(BTreeSet<usize>, usize)> {
    let mut b: BTreeSet<usize> = (0..inst.num_agents()).collect();
    let mut solves = 0;
    for &i in &cfg.removal_order {
        let mut candidate = b.clone();
        candidate.remove(&i);
        let lp = build_round_lp(inst, &candidate, promises, thresholds)?;
        solves += 1;
        let (value, _) = solve_round(&lp, usize::MAX)
            .map_err(|_| Error::InconsistentSnapshot("bottleneck-search LP infeasible".into()))?;
        if value == *lambda_t {
            b = candidate;
        }
    }
    Ok((b, solves))
}

/// Finds a minimal bottleneck set: starting from all agents, drops an agent
/// whenever the round LP restricted to the remaining set still attains
/// exactly `lambda_t`. The result is minimal in the sense that removing any
/// one further agent would raise the optimum. Never empty while
/// `lambda_t < 1`.
pub fn find_bottleneck(
    inst: &Instance,
    promises: &[Promise],
    thresholds: &[usize],
    lambda_t: &Rational,
    cfg: &MechanismConfig,
) -> Result<BTreeSet<usize>> {
    cfg.validate(inst)?;
    Ok(find_bottleneck_counted(inst, promises, thresholds, lambda_t, cfg)?.0)
}

/// Runs the constrained serial rule.
///
/// Terminates within `n * rho` rounds. Errors with [`Error::EmptyPolytope`]
/// when the feasibility polytope is empty, and with
/// [`Error::InvalidInstance`] when the instance fails validation.
pub fn run(inst: &Instance, cfg: &MechanismConfig) -> Result<MechanismResult> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    cfg.validate(inst)?;

    let n = inst.num_agents();
    let rho = inst.num_objects();
    let all: BTreeSet<usize> = (0..n).collect();
    let vars = VarMap::of(inst);
    let one = Rational::one();

    let mut thresholds: Vec<usize> = vec![1; n];
    let mut promises: Vec<Promise> = Vec::new();
    let mut rounds: Vec<RoundTrace> = Vec::new();

    for round in 1..=n * rho {
        let lp = build_round_lp(inst, &all, &promises, &thresholds)?;
        let (lambda, point) = solve_round(&lp, round)?;
        let x = vars.assignment_from(&point);

        if lambda == one {
            rounds.push(RoundTrace {
                round,
                thresholds: thresholds.clone(),
                lambda,
                bottleneck: BTreeSet::new(),
                promises_added: Vec::new(),
                lp_point: Some(x.clone()),
                lp_solves: 1,
            });
            if cfg.trace_level == TraceLevel::Final {
                for r in &mut rounds {
                    r.lp_point = None;
                }
            }
            return Ok(MechanismResult {
                assignment: x,
                rounds,
                final_promises: promises,
            });
        }

        let (bottleneck, search_solves) =
            find_bottleneck_counted(inst, &promises, &thresholds, &lambda, cfg)?;
        debug_assert!(!bottleneck.is_empty(), "bottleneck set exists while lambda < 1");

        let promises_added: Vec<Promise> = bottleneck
            .iter()
            .map(|&i| Promise {
                agent: i,
                level: thresholds[i],
                share: lambda.clone(),
            })
            .collect();
        rounds.push(RoundTrace {
            round,
            thresholds: thresholds.clone(),
            lambda,
            bottleneck: bottleneck.clone(),
            promises_added: promises_added.clone(),
            lp_point: Some(x),
            lp_solves: 1 + search_solves,
        });
        promises.extend(promises_added);
        for &i in &bottleneck {
            thresholds[i] += 1;
        }
    }
    Err(Error::InconsistentSnapshot(format!(
        "mechanism failed to terminate within {} rounds",
        n * rho
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_final_table, example_instance};
    use crate::model::{rat, ConstraintSystem, WeakOrder};

    fn promise(agent: usize, level: usize, share: Rational) -> Promise {
        Promise {
            agent,
            level,
            share,
        }
    }

    #[test]
    fn round_one_lp_optimum() {
        let inst = example_instance();
        let all: BTreeSet<usize> = (0..3).collect();
        let lp = build_round_lp(&inst, &all, &[], &[1, 1, 1]).unwrap();
        let out = lp.solve();
        assert_eq!(out.optimal_value(), Some(&rat(1, 2)));
    }

    #[test]
    fn round_four_lp_optimum() {
        let inst = example_instance();
        let all: BTreeSet<usize> = (0..3).collect();
        let f4 = vec![
            promise(0, 1, rat(1, 2)),
            promise(2, 1, rat(1, 2)),
            promise(2, 2, rat(1, 2)),
        ];
        let lp = build_round_lp(&inst, &all, &f4, &[2, 1, 3]).unwrap();
        assert_eq!(lp.solve().optimal_value(), Some(&rat(3, 4)));
    }

    #[test]
    fn single_agent_single_object_lp() {
        let inst = Instance::new(
            vec!["1".into()],
            vec!["a".into()],
            vec![1],
            vec![WeakOrder::strict([0])],
            ConstraintSystem::empty(),
        );
        let lp = build_round_lp(&inst, &BTreeSet::from([0]), &[], &[1]).unwrap();
        assert_eq!(lp.solve().optimal_value(), Some(&rat_int(1)));
    }

    #[test]
    fn rejects_bad_threshold_and_promise() {
        let inst = example_instance();
        let all: BTreeSet<usize> = (0..3).collect();
        assert!(build_round_lp(&inst, &all, &[], &[1, 1, 4]).is_err());
        assert!(build_round_lp(&inst, &all, &[promise(1, 3, rat(1, 2))], &[1, 1, 1]).is_err());
    }

    #[test]
    fn bottleneck_depends_on_removal_order() {
        let inst = example_instance();
        let lambda = rat(1, 2);
        let cfg = MechanismConfig::default_for(&inst);
        // instance order (1,2,3) removes agents 1 and 2 first
        let b = find_bottleneck(&inst, &[], &[1, 1, 1], &lambda, &cfg).unwrap();
        assert_eq!(b, BTreeSet::from([2]));
        // reversed order pins agent 1 instead
        let cfg = cfg.with_order(vec![2, 1, 0]);
        let b = find_bottleneck(&inst, &[], &[1, 1, 1], &lambda, &cfg).unwrap();
        assert_eq!(b, BTreeSet::from([0]));
    }

    #[test]
    fn bottleneck_round_four_is_pair() {
        let inst = example_instance();
        let f4 = vec![
            promise(0, 1, rat(1, 2)),
            promise(2, 1, rat(1, 2)),
            promise(2, 2, rat(1, 2)),
        ];
        let cfg = MechanismConfig::default_for(&inst).with_order(vec![2, 1, 0]);
        let b = find_bottleneck(&inst, &f4, &[2, 1, 3], &rat(3, 4), &cfg).unwrap();
        assert_eq!(b, BTreeSet::from([0, 1]));
    }

    #[test]
    fn reference_run_reproduces_published_trace() {
        let inst = example_instance();
        let cfg = MechanismConfig::default_for(&inst).with_order(vec![2, 1, 0]);
        let result = run(&inst, &cfg).unwrap();

        let lambdas = result.lambdas();
        assert_eq!(
            lambdas,
            vec![rat(1, 2), rat(1, 2), rat(1, 2), rat(3, 4), rat_int(1)]
        );
        let bottlenecks: Vec<BTreeSet<usize>> = result
            .rounds
            .iter()
            .take(4)
            .map(|r| r.bottleneck.clone())
            .collect();
        assert_eq!(
            bottlenecks,
            vec![
                BTreeSet::from([0]),
                BTreeSet::from([2]),
                BTreeSet::from([2]),
                BTreeSet::from([0, 1]),
            ]
        );
        assert_eq!(result.assignment, example_final_table());
    }

    #[test]
    fn reference_run_invariants() {
        let inst = example_instance();
        let cfg = MechanismConfig::default_for(&inst).with_order(vec![2, 1, 0]);
        let result = run(&inst, &cfg).unwrap();

        // lambda is non-decreasing and ends at 1
        for w in result.rounds.windows(2) {
            assert!(w[0].lambda <= w[1].lambda);
        }
        assert!(result.rounds.last().unwrap().lambda.is_one());
        // no agent enters a bottleneck at her last indifference class
        for r in &result.rounds {
            for &i in &r.bottleneck {
                assert!(r.thresholds[i] < inst.preference(i).num_classes());
            }
        }
        // each round solves at most n + 1 programs
        for r in &result.rounds {
            assert!(r.lp_solves <= inst.num_agents() + 1);
        }
        // the assignment is feasible
        assert!(result.assignment.validate(&inst).is_empty());
    }

    #[test]
    fn default_order_terminates_and_matches_table() {
        let inst = example_instance();
        let result = run(&inst, &MechanismConfig::default_for(&inst)).unwrap();
        assert!(result.rounds.len() <= 9);
        assert_eq!(result.assignment, example_final_table());
    }

    #[test]
    fn final_trace_level_drops_round_points() {
        let inst = example_instance();
        let mut cfg = MechanismConfig::default_for(&inst);
        cfg.trace_level = TraceLevel::Final;
        let result = run(&inst, &cfg).unwrap();
        assert!(result.rounds.iter().all(|r| r.lp_point.is_none()));
        assert_eq!(result.assignment, example_final_table());
    }

    #[test]
    fn trivial_single_agent_run() {
        let inst = Instance::new(
            vec!["1".into()],
            vec!["a".into(), "b".into()],
            vec![1, 1],
            vec![WeakOrder::strict([0, 1])],
            ConstraintSystem::empty(),
        );
        let result = run(&inst, &MechanismConfig::default_for(&inst)).unwrap();
        assert_eq!(result.rounds.len(), 1);
        assert!(result.rounds[0].lambda.is_one());
        assert_eq!(result.assignment.get(0, 0), &rat_int(1));
        assert_eq!(result.assignment.get(0, 1), &rat_int(0));
        assert!(result.final_promises.is_empty());
    }

    #[test]
    fn common_order_yields_uniform_assignment() {
        let inst = Instance::new(
            vec!["1".into(), "2".into(), "3".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![1, 1, 1],
            vec![
                WeakOrder::strict([0, 1, 2]),
                WeakOrder::strict([0, 1, 2]),
                WeakOrder::strict([0, 1, 2]),
            ],
            ConstraintSystem::empty(),
        );
        let result = run(&inst, &MechanismConfig::default_for(&inst)).unwrap();
        for i in 0..3 {
            for o in 0..3 {
                assert_eq!(result.assignment.get(i, o), &rat(1, 3));
            }
        }
        assert_eq!(
            result.assignment,
            crate::oracles::ps_eating(&inst).unwrap()
        );
    }

    #[test]
    fn contradictory_rows_report_empty_polytope() {
        use std::collections::BTreeMap;
        let mut eq1 = BTreeMap::new();
        eq1.insert((0, 0), rat_int(1));
        let inst = Instance::new(
            vec!["1".into()],
            vec!["a".into(), "b".into()],
            vec![1, 1],
            vec![WeakOrder::strict([0, 1])],
            ConstraintSystem {
                rows: vec![
                    crate::model::ConstraintRow {
                        coeffs: eq1.clone(),
                        sense: Sense::Eq,
                        rhs: rat(1, 2),
                    },
                    crate::model::ConstraintRow {
                        coeffs: eq1,
                        sense: Sense::Eq,
                        rhs: rat(1, 3),
                    },
                ],
            },
        );
        assert!(matches!(
            run(&inst, &MechanismConfig::default_for(&inst)),
            Err(Error::EmptyPolytope)
        ));
    }
}
