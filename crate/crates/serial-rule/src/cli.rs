//! JSON file formats and the command-line driver behind the `csr` binary.
//!
//! Rationals travel as integers or `"p/q"` strings, never floats; output
//! maps follow the instance's agent/object order, so identical inputs and
//! flags produce byte-identical result files.
//!
//! Exit codes: 0 success, 1 parse/validation errors (and failed audits or
//! comparisons), 2 empty constraint polytope or infeasible assignment,
//! 3 no constrained lottery exists, 4 enumeration guard exceeded.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use num_traits::One;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::audit::{self, AuditOutcome};
use crate::lottery::{self, DecomposeOutcome, Lottery};
use crate::mechanism::{self, MechanismConfig, MechanismResult, TraceLevel};
use crate::model::{
    format_rational, parse_rational, Assignment, ConstraintRow, ConstraintSystem, Instance,
    Promise, Rational, Sense, WeakOrder,
};
use crate::oracles;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_LOTTERY: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

/// A rational in a file: a JSON integer or a `"p/q"` string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RationalRepr {
    Int(i64),
    Text(String),
}

impl RationalRepr {
    fn to_rational(&self) -> Result<Rational> {
        match self {
            RationalRepr::Int(n) => Ok(crate::model::rat_int(*n)),
            RationalRepr::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Debug, Deserialize)]
struct InstanceFile {
    agents: Vec<String>,
    objects: Vec<ObjectEntry>,
    preferences: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    constraints: Vec<ConstraintEntry>,
}

#[derive(Debug, Deserialize)]
struct ObjectEntry {
    id: String,
    quota: u64,
}

#[derive(Debug, Deserialize)]
struct ConstraintEntry {
    terms: Vec<(String, String, RationalRepr)>,
    sense: String,
    rhs: RationalRepr,
}

/// Parses an instance document. Agents missing from `preferences` get an
/// empty order so that validation can report them.
pub fn parse_instance_str(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let object_ids: Vec<String> = file.objects.iter().map(|o| o.id.clone()).collect();
    let quotas: Vec<u64> = file.objects.iter().map(|o| o.quota).collect();
    let object_index = |id: &str| -> Result<usize> {
        object_ids
            .iter()
            .position(|o| o == id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    };
    let agent_index = |id: &str| -> Result<usize> {
        file.agents
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownAgent(id.to_string()))
    };

    for id in file.preferences.keys() {
        agent_index(id)?;
    }
    let mut preferences = Vec::with_capacity(file.agents.len());
    for agent in &file.agents {
        let classes = match file.preferences.get(agent) {
            None => Vec::new(),
            Some(classes) => {
                let mut converted = Vec::with_capacity(classes.len());
                for class in classes {
                    let mut set = BTreeSet::new();
                    for id in class {
                        set.insert(object_index(id)?);
                    }
                    converted.push(set);
                }
                converted
            }
        };
        preferences.push(WeakOrder::new(classes));
    }

    let mut rows = Vec::with_capacity(file.constraints.len());
    for entry in &file.constraints {
        let sense = match entry.sense.as_str() {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            "=" | "==" => Sense::Eq,
            other => {
                return Err(Error::Parse(format!(
                    "unknown constraint sense `{other}` (expected <=, >= or =)"
                )))
            }
        };
        let mut coeffs: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for (agent, object, coeff) in &entry.terms {
            let key = (agent_index(agent)?, object_index(object)?);
            let coeff = coeff.to_rational()?;
            coeffs
                .entry(key)
                .and_modify(|c| *c += &coeff)
                .or_insert(coeff);
        }
        rows.push(ConstraintRow {
            coeffs,
            sense,
            rhs: entry.rhs.to_rational()?,
        });
    }

    Ok(Instance::new(
        file.agents,
        object_ids,
        quotas,
        preferences,
        ConstraintSystem { rows },
    ))
}

pub fn parse_instance_path(path: &Path) -> Result<Instance> {
    parse_instance_str(&std::fs::read_to_string(path)?)
}

/// Serializes an instance back to the document shape accepted by
/// [`parse_instance_str`].
pub fn instance_to_json(inst: &Instance) -> Value {
    let objects: Vec<Value> = inst
        .object_ids()
        .iter()
        .enumerate()
        .map(|(o, id)| json!({"id": id, "quota": inst.quota(o)}))
        .collect();
    let mut preferences = Map::new();
    for (i, agent) in inst.agent_ids().iter().enumerate() {
        let classes: Vec<Value> = inst
            .preference(i)
            .classes()
            .iter()
            .map(|class| {
                Value::Array(
                    class
                        .iter()
                        .map(|&o| Value::String(inst.object_ids()[o].clone()))
                        .collect(),
                )
            })
            .collect();
        preferences.insert(agent.clone(), Value::Array(classes));
    }
    let constraints: Vec<Value> = inst
        .constraints()
        .rows
        .iter()
        .map(|row| {
            let terms: Vec<Value> = row
                .coeffs
                .iter()
                .map(|(&(i, o), c)| {
                    json!([
                        inst.agent_ids()[i],
                        inst.object_ids()[o],
                        format_rational(c)
                    ])
                })
                .collect();
            json!({
                "terms": terms,
                "sense": row.sense.to_string(),
                "rhs": format_rational(&row.rhs),
            })
        })
        .collect();
    json!({
        "agents": inst.agent_ids(),
        "objects": objects,
        "preferences": Value::Object(preferences),
        "constraints": constraints,
    })
}

fn assignment_to_json(inst: &Instance, x: &Assignment) -> Value {
    let mut map = Map::new();
    for (i, agent) in inst.agent_ids().iter().enumerate() {
        let mut row = Map::new();
        for (o, object) in inst.object_ids().iter().enumerate() {
            row.insert(object.clone(), Value::String(format_rational(x.get(i, o))));
        }
        map.insert(agent.clone(), Value::Object(row));
    }
    Value::Object(map)
}

fn promise_to_json(inst: &Instance, p: &Promise) -> Value {
    json!({
        "agent": inst.agent_ids()[p.agent],
        "level": p.level,
        "share": format_rational(&p.share),
    })
}

fn audit_to_json(inst: &Instance, outcome: &AuditOutcome) -> Value {
    let envy: Vec<Value> = outcome
        .envy
        .violations
        .iter()
        .map(|v| {
            json!({
                "envious": inst.agent_ids()[v.envious],
                "envied": inst.agent_ids()[v.envied],
                "level": v.level,
                "deficit": format_rational(&v.deficit),
            })
        })
        .collect();
    json!({
        "efficient": outcome.efficiency.efficient,
        "efficiency_slack": format_rational(&outcome.efficiency.slack),
        "envy_violations": envy,
        "promises_hold": outcome.promises_hold,
        "rounds_clean": outcome.rounds_clean,
    })
}

/// Builds the result document for a finished run.
pub fn result_to_json(
    inst: &Instance,
    result: &MechanismResult,
    audit: &AuditOutcome,
    include_points: bool,
) -> Value {
    let rounds: Vec<Value> = result
        .rounds
        .iter()
        .map(|r| {
            let mut thresholds = Map::new();
            for (i, agent) in inst.agent_ids().iter().enumerate() {
                thresholds.insert(agent.clone(), json!(r.thresholds[i]));
            }
            let bottleneck: Vec<Value> = r
                .bottleneck
                .iter()
                .map(|&i| Value::String(inst.agent_ids()[i].clone()))
                .collect();
            let promises: Vec<Value> = r
                .promises_added
                .iter()
                .map(|p| promise_to_json(inst, p))
                .collect();
            let mut round = Map::new();
            round.insert("round".into(), json!(r.round));
            round.insert(
                "lambda".into(),
                Value::String(format_rational(&r.lambda)),
            );
            round.insert("thresholds".into(), Value::Object(thresholds));
            round.insert("bottleneck".into(), Value::Array(bottleneck));
            round.insert("promises".into(), Value::Array(promises));
            round.insert("lp_solves".into(), json!(r.lp_solves));
            if include_points {
                if let Some(point) = &r.lp_point {
                    round.insert("point".into(), assignment_to_json(inst, point));
                }
            }
            Value::Object(round)
        })
        .collect();
    json!({
        "assignment": assignment_to_json(inst, &result.assignment),
        "rounds": rounds,
        "audit": audit_to_json(inst, audit),
    })
}

#[derive(Debug, Deserialize)]
struct ResultFileIn {
    assignment: BTreeMap<String, BTreeMap<String, RationalRepr>>,
    #[serde(default)]
    rounds: Vec<RoundIn>,
}

#[derive(Debug, Deserialize)]
struct RoundIn {
    #[serde(default)]
    promises: Vec<PromiseIn>,
}

#[derive(Debug, Deserialize)]
struct PromiseIn {
    agent: String,
    level: usize,
    share: RationalRepr,
}

/// Reads an assignment and the recorded promises back from a result file.
pub fn parse_result_str(inst: &Instance, text: &str) -> Result<(Assignment, Vec<Promise>)> {
    let file: ResultFileIn = serde_json::from_str(text)?;
    let mut x = Assignment::zero(inst.num_agents(), inst.num_objects());
    for (agent, row) in &file.assignment {
        let i = inst.agent_index(agent)?;
        for (object, value) in row {
            let o = inst.object_index(object)?;
            x.set(i, o, value.to_rational()?);
        }
    }
    let mut promises = Vec::new();
    for round in &file.rounds {
        for p in &round.promises {
            promises.push(Promise {
                agent: inst.agent_index(&p.agent)?,
                level: p.level,
                share: p.share.to_rational()?,
            });
        }
    }
    Ok((x, promises))
}

fn lottery_to_json(inst: &Instance, lottery: &Lottery) -> Value {
    let entries: Vec<Value> = lottery
        .entries
        .iter()
        .map(|entry| {
            let mut picks = Map::new();
            for (i, agent) in inst.agent_ids().iter().enumerate() {
                let object = (0..inst.num_objects())
                    .find(|&o| entry.assignment.get(i, o).is_one())
                    .map(|o| inst.object_ids()[o].clone());
                picks.insert(
                    agent.clone(),
                    object.map_or(Value::Null, Value::String),
                );
            }
            json!({
                "weight": format_rational(&entry.weight),
                "assignment": Value::Object(picks),
            })
        })
        .collect();
    Value::Array(entries)
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(value)?);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    match err {
        Error::EmptyPolytope => EXIT_INFEASIBLE,
        Error::InfeasibleAssignment(_) => EXIT_INFEASIBLE,
        Error::EnumerationGuard { .. } => EXIT_GUARD,
        _ => EXIT_ERROR,
    }
}

fn load_validated_instance(path: &Path) -> Result<Instance> {
    let inst = parse_instance_path(path)?;
    let violations = inst.validate();
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(Error::InvalidInstance(violations))
    }
}

fn parse_order(inst: &Instance, order: &str) -> Result<Vec<usize>> {
    order
        .split(',')
        .map(|id| inst.agent_index(id.trim()))
        .collect()
}

/// `csr solve`: run the mechanism, audit the output, and write the result
/// document.
pub fn cmd_solve(
    instance_path: &Path,
    order: Option<&str>,
    trace: bool,
    out: Option<&Path>,
) -> i32 {
    let run = || -> Result<Value> {
        let inst = load_validated_instance(instance_path)?;
        let mut cfg = MechanismConfig::default_for(&inst);
        if let Some(order) = order {
            cfg = cfg.with_order(parse_order(&inst, order)?);
        }
        cfg.trace_level = TraceLevel::Full;
        let result = mechanism::run(&inst, &cfg)?;
        let audit = audit::audit_result(&inst, &result)?;
        Ok(result_to_json(&inst, &result, &audit, trace))
    };
    match run() {
        Ok(value) => match emit(&value, out) {
            Ok(()) => EXIT_OK,
            Err(err) => fail(&err),
        },
        Err(err) => fail(&err),
    }
}

/// `csr audit`: re-check a result file against its instance.
pub fn cmd_audit(instance_path: &Path, result_path: &Path) -> i32 {
    let run = || -> Result<(Value, bool)> {
        let inst = load_validated_instance(instance_path)?;
        let text = std::fs::read_to_string(result_path)?;
        let (x, promises) = parse_result_str(&inst, &text)?;
        let efficiency = audit::is_constrained_ordinally_efficient(&inst, &x)?;
        let envy = audit::envy_report(&inst, &x)?;
        let mut promises_hold = true;
        for p in &promises {
            let top = inst.preference(p.agent).top_classes(p.level)?;
            if x.cumulative(p.agent, &top) != p.share {
                promises_hold = false;
            }
        }
        let outcome = AuditOutcome {
            efficiency,
            envy,
            promises_hold,
            rounds_clean: true,
        };
        let pass = outcome.efficiency.efficient
            && outcome.envy.is_empty()
            && outcome.promises_hold;
        Ok((audit_to_json(&inst, &outcome), pass))
    };
    match run() {
        Ok((value, pass)) => {
            if emit(&value, None).is_err() {
                return EXIT_ERROR;
            }
            if pass {
                EXIT_OK
            } else {
                EXIT_ERROR
            }
        }
        Err(err) => fail(&err),
    }
}

/// Decomposition mode of `csr decompose`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecomposeMode {
    /// Quota polytope only; side constraints are ignored.
    Bvn,
    /// Exact: deterministic outcomes must satisfy the side constraints.
    Exact,
}

/// `csr decompose`: express a solved assignment as a lottery.
pub fn cmd_decompose(
    instance_path: &Path,
    result_path: &Path,
    mode: DecomposeMode,
    out: Option<&Path>,
) -> i32 {
    let run = || -> Result<(Value, i32)> {
        let inst = load_validated_instance(instance_path)?;
        let text = std::fs::read_to_string(result_path)?;
        let (x, _) = parse_result_str(&inst, &text)?;
        match mode {
            DecomposeMode::Bvn => {
                let lottery = lottery::bvn_decompose(&x, inst.quotas())?;
                Ok((
                    json!({"mode": "bvn", "status": "ok", "lottery": lottery_to_json(&inst, &lottery)}),
                    EXIT_OK,
                ))
            }
            DecomposeMode::Exact => {
                match lottery::constrained_decompose(&x, inst.quotas(), inst.constraints())? {
                    DecomposeOutcome::Decomposed(lottery) => Ok((
                        json!({"mode": "exact", "status": "ok", "lottery": lottery_to_json(&inst, &lottery)}),
                        EXIT_OK,
                    )),
                    DecomposeOutcome::Infeasible => Ok((
                        json!({"mode": "exact", "status": "infeasible"}),
                        EXIT_NO_LOTTERY,
                    )),
                }
            }
        }
    };
    match run() {
        Ok((value, code)) => {
            if code == EXIT_NO_LOTTERY {
                eprintln!(
                    "no lottery over constraint-feasible deterministic assignments matches the given assignment"
                );
            }
            match emit(&value, out) {
                Ok(()) => code,
                Err(err) => fail(&err),
            }
        }
        Err(err) => fail(&err),
    }
}

/// `csr compare`: run the mechanism and the applicable unconstrained
/// oracle, then compare cumulative shares at every agent and level.
pub fn cmd_compare(instance_path: &Path) -> i32 {
    let run = || -> Result<(Value, bool)> {
        let inst = load_validated_instance(instance_path)?;
        if !inst.constraints().is_empty() {
            return Err(Error::Parse(
                "oracle comparison requires an unconstrained instance".into(),
            ));
        }
        let strict = inst.preferences().iter().all(WeakOrder::is_strict);
        if !strict && inst.quotas().iter().any(|&q| q > 1) {
            return Err(Error::Parse(
                "oracle comparison with non-unit quotas requires strict preferences".into(),
            ));
        }
        let oracle_name = if strict { "ps" } else { "eps" };
        let oracle = if strict {
            oracles::ps_eating(&inst)?
        } else {
            oracles::eps_reference(&inst)?
        };
        let result = mechanism::run(&inst, &MechanismConfig::default_for(&inst))?;

        let mut differences = Vec::new();
        for i in 0..inst.num_agents() {
            let order = inst.preference(i);
            for level in 1..=order.num_classes() {
                let top = order.top_classes(level)?;
                let got = result.assignment.cumulative(i, &top);
                let expected = oracle.cumulative(i, &top);
                if got != expected {
                    differences.push(json!({
                        "agent": inst.agent_ids()[i],
                        "level": level,
                        "mechanism": format_rational(&got),
                        "oracle": format_rational(&expected),
                    }));
                }
            }
        }
        let matches = differences.is_empty();
        Ok((
            json!({
                "oracle": oracle_name,
                "match": matches,
                "differences": differences,
            }),
            matches,
        ))
    };
    match run() {
        Ok((value, matches)) => {
            if emit(&value, None).is_err() {
                return EXIT_ERROR;
            }
            if matches {
                EXIT_OK
            } else {
                EXIT_ERROR
            }
        }
        Err(err) => fail(&err),
    }
}
