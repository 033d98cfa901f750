//! Python bindings for the constrained serial rule.
//!
//! Exposes instance parsing, the mechanism, the audits, the unconstrained
//! eating oracles, and lottery decomposition. All shares cross the boundary
//! as exact `"p/q"` strings (pass them to `fractions.Fraction`); floats
//! never appear.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use serial_rule::audit;
use serial_rule::cli;
use serial_rule::lottery::{self, DecomposeOutcome};
use serial_rule::mechanism::{self, MechanismConfig, MechanismResult};
use serial_rule::model::{format_rational, parse_rational, Assignment};
use serial_rule::oracles;

fn err(e: serial_rule::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type ShareMap = BTreeMap<String, BTreeMap<String, String>>;

fn assignment_to_map(inst: &serial_rule::model::Instance, x: &Assignment) -> ShareMap {
    let mut out = ShareMap::new();
    for (i, agent) in inst.agent_ids().iter().enumerate() {
        let mut row = BTreeMap::new();
        for (o, object) in inst.object_ids().iter().enumerate() {
            row.insert(object.clone(), format_rational(x.get(i, o)));
        }
        out.insert(agent.clone(), row);
    }
    out
}

fn assignment_from_map(
    inst: &serial_rule::model::Instance,
    shares: &ShareMap,
) -> PyResult<Assignment> {
    let mut x = Assignment::zero(inst.num_agents(), inst.num_objects());
    for (agent, row) in shares {
        let i = inst.agent_index(agent).map_err(err)?;
        for (object, value) in row {
            let o = inst.object_index(object).map_err(err)?;
            x.set(i, o, parse_rational(value).map_err(err)?);
        }
    }
    Ok(x)
}

/// Picks per lottery entry: `(weight, {agent: object})`.
type LotteryRepr = Vec<(String, BTreeMap<String, String>)>;

fn lottery_to_repr(
    inst: &serial_rule::model::Instance,
    lottery: &lottery::Lottery,
) -> LotteryRepr {
    use num_traits::One;
    lottery
        .entries
        .iter()
        .map(|entry| {
            let mut picks = BTreeMap::new();
            for (i, agent) in inst.agent_ids().iter().enumerate() {
                if let Some(o) =
                    (0..inst.num_objects()).find(|&o| entry.assignment.get(i, o).is_one())
                {
                    picks.insert(agent.clone(), inst.object_ids()[o].clone());
                }
            }
            (format_rational(&entry.weight), picks)
        })
        .collect()
}

/// An assignment problem: agents, objects with quotas, weak preference
/// orders, and linear side constraints.
#[pyclass(frozen, module = "serial_rule_py")]
struct Instance {
    inner: serial_rule::model::Instance,
}

#[pymethods]
impl Instance {
    /// Parses the JSON instance document format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Instance {
            inner: cli::parse_instance_str(text).map_err(err)?,
        })
    }

    #[getter]
    fn agents(&self) -> Vec<String> {
        self.inner.agent_ids().to_vec()
    }

    #[getter]
    fn objects(&self) -> Vec<String> {
        self.inner.object_ids().to_vec()
    }

    #[getter]
    fn quotas(&self) -> Vec<u64> {
        self.inner.quotas().to_vec()
    }

    #[getter]
    fn num_constraints(&self) -> usize {
        self.inner.constraints().len()
    }

    /// Violated model invariants; empty means the instance is well-formed.
    fn validate(&self) -> Vec<String> {
        self.inner
            .validate()
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&cli::instance_to_json(&self.inner))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Runs the constrained serial rule. `order` overrides the
    /// bottleneck-search removal order (agent ids).
    #[pyo3(signature = (order=None))]
    fn solve(&self, order: Option<Vec<String>>) -> PyResult<SolveResult> {
        let mut cfg = MechanismConfig::default_for(&self.inner);
        if let Some(ids) = order {
            let mut indices = Vec::with_capacity(ids.len());
            for id in &ids {
                indices.push(self.inner.agent_index(id).map_err(err)?);
            }
            cfg = cfg.with_order(indices);
        }
        let result = mechanism::run(&self.inner, &cfg).map_err(err)?;
        Ok(SolveResult {
            inst: self.inner.clone(),
            result,
        })
    }

    /// Simultaneous-eating outcome (strict preferences, no constraints).
    fn ps_eating(&self) -> PyResult<ShareMap> {
        let x = oracles::ps_eating(&self.inner).map_err(err)?;
        Ok(assignment_to_map(&self.inner, &x))
    }

    /// Brute-force extended serial outcome (weak preferences, no
    /// constraints, small instances).
    fn eps_reference(&self) -> PyResult<ShareMap> {
        let x = oracles::eps_reference(&self.inner).map_err(err)?;
        Ok(assignment_to_map(&self.inner, &x))
    }

    /// Audits a feasible assignment: constrained ordinal efficiency and
    /// same-type envy-freeness.
    fn audit_assignment(&self, shares: ShareMap) -> PyResult<AuditReport> {
        let x = assignment_from_map(&self.inner, &shares)?;
        let cert = audit::is_constrained_ordinally_efficient(&self.inner, &x).map_err(err)?;
        let envy = audit::envy_report(&self.inner, &x).map_err(err)?;
        Ok(AuditReport {
            efficient: cert.efficient,
            efficiency_slack: format_rational(&cert.slack),
            envy_violations: envy
                .violations
                .iter()
                .map(|v| {
                    (
                        self.inner.agent_ids()[v.envious].clone(),
                        self.inner.agent_ids()[v.envied].clone(),
                        v.level,
                        format_rational(&v.deficit),
                    )
                })
                .collect(),
        })
    }

    /// Whether two agents carry identical coefficients in every constraint
    /// row.
    fn same_type(&self, agent_a: &str, agent_b: &str) -> PyResult<bool> {
        let i = self.inner.agent_index(agent_a).map_err(err)?;
        let j = self.inner.agent_index(agent_b).map_err(err)?;
        audit::same_type(&self.inner, i, j).map_err(err)
    }

    /// Quota-polytope lottery decomposition (side constraints ignored).
    fn bvn_decompose(&self, shares: ShareMap) -> PyResult<LotteryRepr> {
        let x = assignment_from_map(&self.inner, &shares)?;
        let lottery = lottery::bvn_decompose(&x, self.inner.quotas()).map_err(err)?;
        Ok(lottery_to_repr(&self.inner, &lottery))
    }

    /// Exact constrained decomposition; `None` when no lottery over
    /// constraint-feasible deterministic assignments exists.
    fn constrained_decompose(&self, shares: ShareMap) -> PyResult<Option<LotteryRepr>> {
        let x = assignment_from_map(&self.inner, &shares)?;
        match lottery::constrained_decompose(&x, self.inner.quotas(), self.inner.constraints())
            .map_err(err)?
        {
            DecomposeOutcome::Decomposed(lottery) => {
                Ok(Some(lottery_to_repr(&self.inner, &lottery)))
            }
            DecomposeOutcome::Infeasible => Ok(None),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance({} agents, {} objects, {} constraints)",
            self.inner.num_agents(),
            self.inner.num_objects(),
            self.inner.constraints().len()
        )
    }
}

/// Mechanism outcome: the final assignment plus the per-round trace.
#[pyclass(frozen, module = "serial_rule_py")]
struct SolveResult {
    inst: serial_rule::model::Instance,
    result: MechanismResult,
}

#[pymethods]
impl SolveResult {
    /// Final assignment as `{agent: {object: "p/q"}}`.
    fn assignment(&self) -> ShareMap {
        assignment_to_map(&self.inst, &self.result.assignment)
    }

    /// Per-round optima, ending at `"1"`.
    #[getter]
    fn lambdas(&self) -> Vec<String> {
        self.result
            .rounds
            .iter()
            .map(|r| format_rational(&r.lambda))
            .collect()
    }

    /// Bottleneck agent ids per non-terminal round.
    #[getter]
    fn bottlenecks(&self) -> Vec<Vec<String>> {
        self.result
            .rounds
            .iter()
            .filter(|r| !r.bottleneck.is_empty())
            .map(|r| {
                r.bottleneck
                    .iter()
                    .map(|&i| self.inst.agent_ids()[i].clone())
                    .collect()
            })
            .collect()
    }

    /// Recorded promises as `(agent, level, share)`.
    #[getter]
    fn promises(&self) -> Vec<(String, usize, String)> {
        self.result
            .final_promises
            .iter()
            .map(|p| {
                (
                    self.inst.agent_ids()[p.agent].clone(),
                    p.level,
                    format_rational(&p.share),
                )
            })
            .collect()
    }

    #[getter]
    fn num_rounds(&self) -> usize {
        self.result.rounds.len()
    }

    /// Cumulative share of an agent over her top `level` classes.
    fn cumulative(&self, agent: &str, level: usize) -> PyResult<String> {
        let i = self.inst.agent_index(agent).map_err(err)?;
        let top: BTreeSet<usize> = self
            .inst
            .preference(i)
            .top_classes(level)
            .map_err(err)?;
        Ok(format_rational(&self.result.assignment.cumulative(i, &top)))
    }

    /// Full audit of this result (efficiency, envy, promises, per-round
    /// no-improvement checks).
    fn audit(&self) -> PyResult<AuditReport> {
        let outcome = audit::audit_result(&self.inst, &self.result).map_err(err)?;
        Ok(AuditReport {
            efficient: outcome.efficiency.efficient
                && outcome.promises_hold
                && outcome.rounds_clean,
            efficiency_slack: format_rational(&outcome.efficiency.slack),
            envy_violations: outcome
                .envy
                .violations
                .iter()
                .map(|v| {
                    (
                        self.inst.agent_ids()[v.envious].clone(),
                        self.inst.agent_ids()[v.envied].clone(),
                        v.level,
                        format_rational(&v.deficit),
                    )
                })
                .collect(),
        })
    }

    /// The result document (same shape the `csr` binary writes).
    fn to_json(&self) -> PyResult<String> {
        let audit = audit::audit_result(&self.inst, &self.result).map_err(err)?;
        serde_json::to_string_pretty(&cli::result_to_json(&self.inst, &self.result, &audit, true))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("SolveResult({} rounds)", self.result.rounds.len())
    }
}

/// Efficiency and envy verdict for one assignment.
#[pyclass(frozen, get_all, module = "serial_rule_py")]
struct AuditReport {
    efficient: bool,
    efficiency_slack: String,
    /// `(envious, envied, level, deficit)` tuples.
    envy_violations: Vec<(String, String, usize, String)>,
}

#[pymethods]
impl AuditReport {
    fn __repr__(&self) -> String {
        format!(
            "AuditReport(efficient={}, envy_violations={})",
            self.efficient,
            self.envy_violations.len()
        )
    }
}

#[pymodule]
fn serial_rule_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<AuditReport>()?;
    Ok(())
}
