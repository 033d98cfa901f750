//! Domain types: instances, weak orders, constraint systems, assignments,
//! and stochastic-dominance utilities.
//!
//! Agents and objects are identified by strings at the file boundary and by
//! dense indices (`usize`) everywhere else. All types are immutable after
//! construction and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

/// Exact rational number; numerator and denominator are arbitrary-precision
/// integers, always stored in lowest terms with a positive denominator.
pub type Rational = num_rational::BigRational;

/// Shorthand for a small rational constant.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Shorthand for an integer-valued rational.
pub fn rat_int(num: i64) -> Rational {
    Rational::from_integer(BigInt::from(num))
}

/// Parses `"p/q"` or `"p"`. The denominator must be positive.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::InvalidRational(text.to_string());
    let text = text.trim();
    match text.split_once('/') {
        None => {
            let n: BigInt = text.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
        Some((num, den)) => {
            let n: BigInt = num.trim().parse().map_err(|_| bad())?;
            let d: BigInt = den.trim().parse().map_err(|_| bad())?;
            if d <= BigInt::zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
    }
}

/// Renders a rational in lowest terms, as `"p"` when integral and `"p/q"`
/// otherwise.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// A complete transitive preference over objects, represented as an ordered
/// list of disjoint indifference classes (best first). Objects inside one
/// class are mutually indifferent; class `k` is strictly preferred to class
/// `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakOrder {
    classes: Vec<BTreeSet<usize>>,
}

impl WeakOrder {
    pub fn new(classes: Vec<BTreeSet<usize>>) -> Self {
        WeakOrder { classes }
    }

    /// Builds a strict order from a ranked object list.
    pub fn strict(ranking: impl IntoIterator<Item = usize>) -> Self {
        WeakOrder {
            classes: ranking
                .into_iter()
                .map(|o| BTreeSet::from([o]))
                .collect(),
        }
    }

    /// Number of indifference classes.
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[BTreeSet<usize>] {
        &self.classes
    }

    /// 1-based index of the class containing `object`, if any.
    pub fn class_of(&self, object: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&object)).map(|k| k + 1)
    }

    /// True when every indifference class is a singleton.
    pub fn is_strict(&self) -> bool {
        self.classes.iter().all(|c| c.len() == 1)
    }

    /// The union of the first `level` indifference classes (the "top
    /// `level`" object set). `level` is 1-based and must not exceed
    /// [`num_classes`](Self::num_classes).
    pub fn top_classes(&self, level: usize) -> Result<BTreeSet<usize>> {
        if level < 1 || level > self.classes.len() {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.classes.len(),
            });
        }
        let mut union = BTreeSet::new();
        for class in &self.classes[..level] {
            union.extend(class.iter().copied());
        }
        Ok(union)
    }
}

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

/// One linear constraint over assignment entries: `sum coeffs[(i,o)] *
/// x[i,o]  sense  rhs`. Coefficients missing from the map are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub coeffs: BTreeMap<(usize, usize), Rational>,
    pub sense: Sense,
    pub rhs: Rational,
}

impl ConstraintRow {
    /// Coefficient of `x[agent, object]` in this row (zero when absent).
    pub fn coefficient(&self, agent: usize, object: usize) -> Rational {
        self.coeffs
            .get(&(agent, object))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Evaluates the left-hand side at an assignment.
    pub fn lhs_at(&self, x: &Assignment) -> Rational {
        let mut total = Rational::zero();
        for (&(i, o), c) in &self.coeffs {
            total += c * x.get(i, o);
        }
        total
    }

    /// Whether an assignment satisfies this row exactly.
    pub fn satisfied_by(&self, x: &Assignment) -> bool {
        let lhs = self.lhs_at(x);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

/// Coefficients keyed by (agent, object) pairs.
pub type PairCoeffs = BTreeMap<(usize, usize), Rational>;

/// A system of linear constraints on the assignment matrix, kept in the
/// form the modeler supplied it. Normalization to `A x <= b` happens only
/// when a solver needs it; agent-type detection reads the rows as given so
/// that splitting an equality cannot create spurious type distinctions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSystem {
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintSystem {
    pub fn empty() -> Self {
        ConstraintSystem { rows: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Lossless normalization to `<=` form: `>=` rows negate, `=` rows
    /// split into a `<=`/`>=` pair. Returns `(coeffs, rhs)` pairs.
    pub fn normalized_le_rows(&self) -> Vec<(PairCoeffs, Rational)> {
        let mut out = Vec::new();
        for row in &self.rows {
            let negated = || {
                row.coeffs
                    .iter()
                    .map(|(k, v)| (*k, -v.clone()))
                    .collect::<PairCoeffs>()
            };
            match row.sense {
                Sense::Le => out.push((row.coeffs.clone(), row.rhs.clone())),
                Sense::Ge => out.push((negated(), -row.rhs.clone())),
                Sense::Eq => {
                    out.push((row.coeffs.clone(), row.rhs.clone()));
                    out.push((negated(), -row.rhs.clone()));
                }
            }
        }
        out
    }
}

/// A recorded lower bound: the agent must keep a cumulative share of at
/// least `share` over the top `level` indifference classes in every later
/// round of the mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct Promise {
    pub agent: usize,
    /// 1-based indifference level.
    pub level: usize,
    pub share: Rational,
}

/// An assignment problem: agents, objects with integer quotas, one weak
/// order per agent, and a constraint system.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    agents: Vec<String>,
    objects: Vec<String>,
    quotas: Vec<u64>,
    preferences: Vec<WeakOrder>,
    constraints: ConstraintSystem,
}

impl Instance {
    pub fn new(
        agents: Vec<String>,
        objects: Vec<String>,
        quotas: Vec<u64>,
        preferences: Vec<WeakOrder>,
        constraints: ConstraintSystem,
    ) -> Self {
        Instance {
            agents,
            objects,
            quotas,
            preferences,
            constraints,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn agent_ids(&self) -> &[String] {
        &self.agents
    }

    pub fn object_ids(&self) -> &[String] {
        &self.objects
    }

    pub fn quota(&self, object: usize) -> u64 {
        self.quotas[object]
    }

    pub fn quotas(&self) -> &[u64] {
        &self.quotas
    }

    pub fn preference(&self, agent: usize) -> &WeakOrder {
        &self.preferences[agent]
    }

    pub fn preferences(&self) -> &[WeakOrder] {
        &self.preferences
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        &self.constraints
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownAgent(id.to_string()))
    }

    pub fn object_index(&self, id: &str) -> Result<usize> {
        self.objects
            .iter()
            .position(|o| o == id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    /// All preferences strict and no side constraints.
    pub fn is_unconstrained(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Checks every model invariant and returns the violations found
    /// (empty = valid). Emptiness of the constraint polytope is not checked
    /// here; that is the LP kernel's job.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let n = self.agents.len();
        let rho = self.objects.len();
        if n == 0 {
            violations.push(Violation::NoAgents);
        }
        {
            let mut seen = BTreeSet::new();
            for id in &self.agents {
                if !seen.insert(id.clone()) {
                    violations.push(Violation::DuplicateAgent { id: id.clone() });
                }
            }
            let mut seen = BTreeSet::new();
            for id in &self.objects {
                if !seen.insert(id.clone()) {
                    violations.push(Violation::DuplicateObject { id: id.clone() });
                }
            }
        }
        if self.quotas.len() != rho {
            violations.push(Violation::QuotaCountMismatch {
                objects: rho,
                quotas: self.quotas.len(),
            });
        }
        for (o, &q) in self.quotas.iter().enumerate() {
            if q == 0 {
                violations.push(Violation::ZeroQuota {
                    object: self.objects[o].clone(),
                });
            }
        }
        let total: u64 = self.quotas.iter().sum();
        if total < n as u64 {
            violations.push(Violation::QuotaShortfall {
                total_quota: total,
                agents: n,
            });
        }
        if self.preferences.len() != n {
            violations.push(Violation::PreferenceCountMismatch {
                agents: n,
                preferences: self.preferences.len(),
            });
            return violations;
        }
        for (i, order) in self.preferences.iter().enumerate() {
            let mut covered: BTreeSet<usize> = BTreeSet::new();
            for class in order.classes() {
                if class.is_empty() {
                    violations.push(Violation::EmptyIndifferenceClass {
                        agent: self.agents[i].clone(),
                    });
                }
                for &o in class {
                    if o >= rho {
                        violations.push(Violation::UnknownObjectInPreference {
                            agent: self.agents[i].clone(),
                            object_index: o,
                        });
                    } else if !covered.insert(o) {
                        violations.push(Violation::RepeatedObjectInPreference {
                            agent: self.agents[i].clone(),
                            object: self.objects[o].clone(),
                        });
                    }
                }
            }
            let missing: Vec<String> = (0..rho)
                .filter(|o| !covered.contains(o))
                .map(|o| self.objects[o].clone())
                .collect();
            if !missing.is_empty() {
                violations.push(Violation::IncompleteOrder {
                    agent: self.agents[i].clone(),
                    missing,
                });
            }
        }
        for (c, row) in self.constraints.rows.iter().enumerate() {
            for &(i, o) in row.coeffs.keys() {
                if i >= n || o >= rho {
                    violations.push(Violation::ConstraintOutOfRange {
                        row: c,
                        agent_index: i,
                        object_index: o,
                    });
                }
            }
        }
        violations
    }
}

/// A violated model invariant, as produced by [`Instance::validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("instance has no agents")]
    NoAgents,
    #[error("duplicate agent id `{id}`")]
    DuplicateAgent { id: String },
    #[error("duplicate object id `{id}`")]
    DuplicateObject { id: String },
    #[error("{objects} objects but {quotas} quota entries")]
    QuotaCountMismatch { objects: usize, quotas: usize },
    #[error("object `{object}` has zero quota")]
    ZeroQuota { object: String },
    #[error("total quota {total_quota} falls short of {agents} agents")]
    QuotaShortfall { total_quota: u64, agents: usize },
    #[error("{agents} agents but {preferences} preference orders")]
    PreferenceCountMismatch { agents: usize, preferences: usize },
    #[error("agent `{agent}` has an empty indifference class")]
    EmptyIndifferenceClass { agent: String },
    #[error("agent `{agent}` ranks unknown object index {object_index}")]
    UnknownObjectInPreference { agent: String, object_index: usize },
    #[error("agent `{agent}` ranks object `{object}` twice")]
    RepeatedObjectInPreference { agent: String, object: String },
    #[error("agent `{agent}` does not rank: {missing:?}")]
    IncompleteOrder { agent: String, missing: Vec<String> },
    #[error("constraint row {row} references out-of-range pair ({agent_index}, {object_index})")]
    ConstraintOutOfRange {
        row: usize,
        agent_index: usize,
        object_index: usize,
    },
    #[error("entry ({agent}, {object}) = {value} outside [0, 1]")]
    EntryOutOfRange {
        agent: String,
        object: String,
        value: String,
    },
    #[error("agent `{agent}` row sums to {sum}, expected 1")]
    RowSumNotOne { agent: String, sum: String },
    #[error("object `{object}` load {load} exceeds quota {quota}")]
    ColumnOverQuota {
        object: String,
        load: String,
        quota: u64,
    },
    #[error("constraint row {row} violated: {lhs} {sense} {rhs} fails")]
    ConstraintViolated {
        row: usize,
        lhs: String,
        sense: Sense,
        rhs: String,
    },
}

/// An agent-by-object matrix of probability shares.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    values: Vec<Vec<Rational>>,
}

impl Assignment {
    pub fn zero(num_agents: usize, num_objects: usize) -> Self {
        Assignment {
            values: vec![vec![Rational::zero(); num_objects]; num_agents],
        }
    }

    pub fn from_rows(values: Vec<Vec<Rational>>) -> Self {
        Assignment { values }
    }

    pub fn num_agents(&self) -> usize {
        self.values.len()
    }

    pub fn num_objects(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn get(&self, agent: usize, object: usize) -> &Rational {
        &self.values[agent][object]
    }

    pub fn set(&mut self, agent: usize, object: usize, value: Rational) {
        self.values[agent][object] = value;
    }

    pub fn add(&mut self, agent: usize, object: usize, delta: &Rational) {
        self.values[agent][object] += delta;
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.values[agent]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.values
    }

    /// The agent's cumulative share over an object set.
    pub fn cumulative(&self, agent: usize, objects: &BTreeSet<usize>) -> Rational {
        let mut total = Rational::zero();
        for &o in objects {
            total += &self.values[agent][o];
        }
        total
    }

    /// Every entry is 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|v| v.is_zero() || v.is_one())
    }

    /// Checks assignment feasibility for an instance: entries in `[0, 1]`,
    /// unit row sums, quota-bounded column loads, and every constraint row.
    pub fn validate(&self, inst: &Instance) -> Vec<Violation> {
        let mut violations = Vec::new();
        let n = inst.num_agents();
        let rho = inst.num_objects();
        if self.values.len() != n || self.values.iter().any(|r| r.len() != rho) {
            violations.push(Violation::PreferenceCountMismatch {
                agents: n,
                preferences: self.values.len(),
            });
            return violations;
        }
        for i in 0..n {
            let mut sum = Rational::zero();
            for o in 0..rho {
                let v = &self.values[i][o];
                if v.is_negative() || *v > Rational::one() {
                    violations.push(Violation::EntryOutOfRange {
                        agent: inst.agent_ids()[i].clone(),
                        object: inst.object_ids()[o].clone(),
                        value: format_rational(v),
                    });
                }
                sum += v;
            }
            if !sum.is_one() {
                violations.push(Violation::RowSumNotOne {
                    agent: inst.agent_ids()[i].clone(),
                    sum: format_rational(&sum),
                });
            }
        }
        for o in 0..rho {
            let mut load = Rational::zero();
            for i in 0..n {
                load += &self.values[i][o];
            }
            if load > rat_int(inst.quota(o) as i64) {
                violations.push(Violation::ColumnOverQuota {
                    object: inst.object_ids()[o].clone(),
                    load: format_rational(&load),
                    quota: inst.quota(o),
                });
            }
        }
        for (c, row) in inst.constraints().rows.iter().enumerate() {
            if !row.satisfied_by(self) {
                violations.push(Violation::ConstraintViolated {
                    row: c,
                    lhs: format_rational(&row.lhs_at(self)),
                    sense: row.sense,
                    rhs: format_rational(&row.rhs),
                });
            }
        }
        violations
    }
}

/// Outcome of a stochastic-dominance comparison between two allocation rows
/// under one weak order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdComparison {
    ADominatesStrictly,
    /// Weak dominance with no strict level; unreachable when both rows have
    /// equal totals, kept for completeness.
    ADominatesWeaklyEqual,
    BDominatesStrictly,
    EqualCumulatives,
    Incomparable,
}

/// Compares cumulative shares of `a` and `b` at every indifference level of
/// `order`. Weak dominance means `>=` at all levels; strict additionally
/// requires `>` at some level.
pub fn sd_compare(order: &WeakOrder, a: &[Rational], b: &[Rational]) -> SdComparison {
    let mut cum_a = Rational::zero();
    let mut cum_b = Rational::zero();
    let mut a_above = false;
    let mut b_above = false;
    for class in order.classes() {
        for &o in class {
            cum_a += &a[o];
            cum_b += &b[o];
        }
        if cum_a > cum_b {
            a_above = true;
        } else if cum_b > cum_a {
            b_above = true;
        }
    }
    match (a_above, b_above) {
        (false, false) => SdComparison::EqualCumulatives,
        (true, false) => SdComparison::ADominatesStrictly,
        (false, true) => SdComparison::BDominatesStrictly,
        (true, true) => SdComparison::Incomparable,
    }
}
