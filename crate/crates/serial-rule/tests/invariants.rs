//! Randomized cross-checks of structural invariants that deserve an
//! independent oracle: the dominance-LP efficiency verdict against the
//! classic trading-cycle test, and minimality of returned bottleneck sets.

mod common;

use std::collections::BTreeSet;

use num_traits::Signed;

use common::{gen_bistochastic, gen_instance, rng, GenConfig};
use serial_rule::audit::is_constrained_ordinally_efficient;
use serial_rule::mechanism::{build_round_lp, run, MechanismConfig};
use serial_rule::model::{sd_compare, Assignment, Instance, Promise, SdComparison, WeakOrder};

/// Trading-cycle oracle for saturated square unconstrained instances with
/// strict preferences: an assignment is ordinally efficient exactly when
/// the relation "some agent holds `worse` with positive probability while
/// strictly preferring `better`" is acyclic over objects.
fn cycle_oracle(inst: &Instance, x: &Assignment) -> bool {
    let rho = inst.num_objects();
    let mut edge = vec![vec![false; rho]; rho];
    for i in 0..inst.num_agents() {
        let ranking: Vec<usize> = inst
            .preference(i)
            .classes()
            .iter()
            .map(|c| *c.iter().next().unwrap())
            .collect();
        for (rank, &worse) in ranking.iter().enumerate() {
            if x.get(i, worse).is_positive() {
                for &better in &ranking[..rank] {
                    edge[better][worse] = true;
                }
            }
        }
    }
    // DFS cycle detection
    let mut state = vec![0u8; rho]; // 0 unseen, 1 active, 2 done
    fn acyclic_from(v: usize, edge: &[Vec<bool>], state: &mut [u8]) -> bool {
        state[v] = 1;
        for (w, &has) in edge[v].iter().enumerate() {
            if !has {
                continue;
            }
            if state[w] == 1 {
                return false;
            }
            if state[w] == 0 && !acyclic_from(w, edge, state) {
                return false;
            }
        }
        state[v] = 2;
        true
    }
    (0..rho).all(|v| state[v] != 0 || acyclic_from(v, &edge, &mut state))
}

fn square_strict_instance(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Instance {
    use rand::seq::SliceRandom;
    let mut prefs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut ranking: Vec<usize> = (0..n).collect();
        ranking.shuffle(rng);
        prefs.push(WeakOrder::strict(ranking));
    }
    Instance::new(
        (1..=n).map(|i| i.to_string()).collect(),
        (0..n).map(common::object_name).collect(),
        vec![1; n],
        prefs,
        serial_rule::model::ConstraintSystem::empty(),
    )
}

#[test]
fn efficiency_audit_agrees_with_cycle_oracle() {
    let mut rng = rng(0xc0de_0001);
    let mut inefficient_seen = 0;
    for case in 0..150 {
        let n = (case % 4) + 1;
        let inst = square_strict_instance(&mut rng, n);
        let x = gen_bistochastic(&mut rng, n);
        let cert = is_constrained_ordinally_efficient(&inst, &x).unwrap();
        let oracle = cycle_oracle(&inst, &x);
        assert_eq!(
            cert.efficient, oracle,
            "case {case}: dominance LP and cycle oracle disagree\ninstance: {inst:?}\nx: {x:?}"
        );
        if !cert.efficient {
            inefficient_seen += 1;
            // witness soundness: feasible, weakly dominating everywhere,
            // strictly somewhere
            let witness = cert.witness.as_ref().unwrap();
            assert!(witness.validate(&inst).is_empty());
            let mut strict = 0;
            for i in 0..inst.num_agents() {
                match sd_compare(inst.preference(i), witness.row(i), x.row(i)) {
                    SdComparison::ADominatesStrictly => strict += 1,
                    SdComparison::EqualCumulatives | SdComparison::ADominatesWeaklyEqual => {}
                    other => panic!("case {case}: witness fails to dominate ({other:?})"),
                }
            }
            assert!(strict > 0, "case {case}: witness never strictly improves");
        }
    }
    // the sample must exercise both verdicts
    assert!(inefficient_seen > 10);
}

/// Instance documents survive a serialize/parse round trip unchanged.
#[test]
fn instance_files_round_trip() {
    let cfg = GenConfig {
        max_agents: 5,
        max_objects: 5,
        max_quota: 3,
        weak: true,
        max_constraints: 5,
    };
    let mut rng = rng(0xc0de_0003);
    for _ in 0..50 {
        let inst = gen_instance(&mut rng, &cfg);
        let text =
            serde_json::to_string(&serial_rule::cli::instance_to_json(&inst)).unwrap();
        let reparsed = serial_rule::cli::parse_instance_str(&text).unwrap();
        assert_eq!(reparsed, inst);
    }
}

/// Removing any single agent from a returned bottleneck set must raise the
/// restricted optimum strictly above the round's lambda.
#[test]
fn bottleneck_sets_are_minimal() {
    let cfg = GenConfig {
        max_agents: 4,
        max_objects: 4,
        max_quota: 2,
        weak: true,
        max_constraints: 4,
    };
    let mut rng = rng(0xc0de_0002);
    for _ in 0..30 {
        let inst = gen_instance(&mut rng, &cfg);
        let result = run(&inst, &MechanismConfig::default_for(&inst)).unwrap();
        let mut promises: Vec<Promise> = Vec::new();
        for round in &result.rounds {
            for &agent in &round.bottleneck {
                // threshold exclusion: bottleneck agents have room to widen
                assert!(round.thresholds[agent] < inst.preference(agent).num_classes());

                let mut without: BTreeSet<usize> = round.bottleneck.clone();
                without.remove(&agent);
                let lp =
                    build_round_lp(&inst, &without, &promises, &round.thresholds).unwrap();
                let value = lp.solve().optimal_value().unwrap().clone();
                assert!(
                    value > round.lambda,
                    "dropping agent {agent} left the optimum at {value}"
                );
            }
            promises.extend(round.promises_added.iter().cloned());
        }
    }
}
