//! Seeded random-instance generation shared by the integration suites.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use serial_rule::model::{
    rat, rat_int, Assignment, ConstraintRow, ConstraintSystem, Instance, Rational, Sense,
    WeakOrder,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_agents: usize,
    pub max_objects: usize,
    pub max_quota: u64,
    /// Allow indifference classes; otherwise strict orders only.
    pub weak: bool,
    /// Extra constraint rows, 0..=max.
    pub max_constraints: usize,
}

/// The proportional point `x[i,o] = q_o / sum(q)`: feasible for the quota
/// polytope whenever total quota covers the agents. Right-hand sides are
/// anchored to it so generated polytopes are never empty.
fn proportional_point(quotas: &[u64]) -> Vec<Rational> {
    let total: u64 = quotas.iter().sum();
    quotas
        .iter()
        .map(|&q| rat(q as i64, total as i64))
        .collect()
}

pub fn gen_instance(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Instance {
    let n = rng.random_range(1..=cfg.max_agents);
    // enough objects that quotas can cover all agents
    let min_objects = n.div_ceil(cfg.max_quota as usize);
    let rho = rng.random_range(min_objects.max(1)..=cfg.max_objects.max(min_objects));
    let mut quotas: Vec<u64> = (0..rho)
        .map(|_| rng.random_range(1..=cfg.max_quota))
        .collect();
    while quotas.iter().sum::<u64>() < n as u64 {
        let o = rng.random_range(0..rho);
        if quotas[o] < cfg.max_quota {
            quotas[o] += 1;
        }
    }

    let mut preferences = Vec::with_capacity(n);
    for _ in 0..n {
        let mut ranking: Vec<usize> = (0..rho).collect();
        ranking.shuffle(rng);
        if cfg.weak {
            let mut classes: Vec<BTreeSet<usize>> = Vec::new();
            for (pos, o) in ranking.into_iter().enumerate() {
                if pos == 0 || rng.random_bool(0.55) {
                    classes.push(BTreeSet::from([o]));
                } else {
                    classes.last_mut().unwrap().insert(o);
                }
            }
            preferences.push(WeakOrder::new(classes));
        } else {
            preferences.push(WeakOrder::strict(ranking));
        }
    }

    let base = proportional_point(&quotas);
    let num_rows = if cfg.max_constraints == 0 {
        0
    } else {
        rng.random_range(0..=cfg.max_constraints)
    };
    let mut rows = Vec::with_capacity(num_rows);
    for _ in 0..num_rows {
        let terms = rng.random_range(1..=5.min(n * rho));
        let mut coeffs: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for _ in 0..terms {
            let pair = (rng.random_range(0..n), rng.random_range(0..rho));
            let coeff = match rng.random_range(0..4) {
                0 => rat(1, 2),
                1 => rat(3, 2),
                2 => rat_int(2),
                _ => rat_int(1),
            };
            coeffs
                .entry(pair)
                .and_modify(|c| *c += &coeff)
                .or_insert(coeff);
        }
        let lhs_at_base: Rational = coeffs
            .iter()
            .map(|(&(_, o), c)| c * &base[o])
            .fold(rat_int(0), |a, b| a + b);
        let slack = match rng.random_range(0..3) {
            0 => rat_int(0),
            1 => rat(1, 4),
            _ => rat(1, 2),
        };
        let (sense, rhs) = match rng.random_range(0..100) {
            0..=49 => (Sense::Le, &lhs_at_base + &slack),
            50..=84 => (Sense::Ge, &lhs_at_base - &slack),
            _ => (Sense::Eq, lhs_at_base.clone()),
        };
        rows.push(ConstraintRow { coeffs, sense, rhs });
    }

    let inst = Instance::new(
        (1..=n).map(|i| i.to_string()).collect(),
        (0..rho).map(object_name).collect(),
        quotas,
        preferences,
        ConstraintSystem { rows },
    );
    debug_assert!(inst.validate().is_empty());
    inst
}

pub fn object_name(o: usize) -> String {
    char::from(b'a' + (o % 26) as u8).to_string()
}

/// A random exact convex combination of permutation matrices: always
/// bistochastic, and decomposable by construction.
pub fn gen_bistochastic(rng: &mut ChaCha8Rng, n: usize) -> Assignment {
    let k = rng.random_range(1..=6);
    let raw: Vec<u64> = (0..k).map(|_| rng.random_range(1..=9)).collect();
    let total: u64 = raw.iter().sum();
    let mut x = Assignment::zero(n, n);
    for &amount in &raw {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let weight = rat(amount as i64, total as i64);
        for (i, &o) in perm.iter().enumerate() {
            x.add(i, o, &weight);
        }
    }
    x
}
