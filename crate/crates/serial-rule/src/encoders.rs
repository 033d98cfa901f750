//! Constraint-system builders for common application classes: nested quota
//! families on agent-object sets, type-dependent distributional quotas,
//! raw ex-post inequality systems, and combinatorial bundle assignment.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    rat_int, ConstraintRow, ConstraintSystem, Instance, Rational, Sense, WeakOrder,
};
use crate::{Error, Result};

/// Bundle-count guard for [`encode_combinatorial`].
pub const BUNDLE_GUARD: usize = 5_000;

/// A floor/ceiling quota on the total share assigned inside a set of
/// agent-object pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotaSet {
    pub members: BTreeSet<(usize, usize)>,
    pub floor: u64,
    pub ceiling: u64,
}

/// A floor/ceiling quota on the total share of one object allocated to
/// agents whose type label lies in `type_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeQuota {
    pub type_set: BTreeSet<String>,
    pub object: usize,
    pub floor: Rational,
    pub ceiling: Rational,
}

/// A bundle as a multiplicity vector over the base objects.
pub type Bundle = Vec<u64>;

/// Emits the floor and ceiling row pair for every quota set.
pub fn encode_bihierarchy(quota_sets: &[QuotaSet]) -> ConstraintSystem {
    let mut rows = Vec::with_capacity(2 * quota_sets.len());
    for set in quota_sets {
        let coeffs: BTreeMap<(usize, usize), Rational> = set
            .members
            .iter()
            .map(|&pair| (pair, rat_int(1)))
            .collect();
        rows.push(ConstraintRow {
            coeffs: coeffs.clone(),
            sense: Sense::Ge,
            rhs: rat_int(set.floor as i64),
        });
        rows.push(ConstraintRow {
            coeffs,
            sense: Sense::Le,
            rhs: rat_int(set.ceiling as i64),
        });
    }
    ConstraintSystem { rows }
}

/// Verdict of [`validate_bihierarchy`], with a witness split into two
/// laminar families (indices into the input) when one exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BihierarchyCheck {
    pub is_bihierarchy: bool,
    pub partition: Option<(Vec<usize>, Vec<usize>)>,
}

fn sets_cross(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> bool {
    let intersects = a.intersection(b).next().is_some();
    intersects && !a.is_subset(b) && !b.is_subset(a)
}

/// Checks whether the quota family splits into two laminar hierarchies.
///
/// Two sets *cross* when they overlap without nesting. A valid split must
/// separate every crossing pair, so the family is a bi-hierarchy exactly
/// when the crossing graph is bipartite; any 2-coloring is then a witness
/// (same-colored sets never cross, which is laminarity).
pub fn validate_bihierarchy(quota_sets: &[QuotaSet]) -> BihierarchyCheck {
    let k = quota_sets.len();
    let mut color: Vec<Option<bool>> = vec![None; k];
    for start in 0..k {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(false);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..k {
                if v == u || !sets_cross(&quota_sets[u].members, &quota_sets[v].members) {
                    continue;
                }
                match color[v] {
                    None => {
                        color[v] = Some(!color[u].unwrap());
                        queue.push_back(v);
                    }
                    Some(c) if c == color[u].unwrap() => {
                        return BihierarchyCheck {
                            is_bihierarchy: false,
                            partition: None,
                        };
                    }
                    Some(_) => {}
                }
            }
        }
    }
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for (idx, c) in color.iter().enumerate() {
        match c {
            Some(false) => h1.push(idx),
            Some(true) => h2.push(idx),
            None => unreachable!("all components are colored"),
        }
    }
    BihierarchyCheck {
        is_bihierarchy: true,
        partition: Some((h1, h2)),
    }
}

/// Emits one floor/ceiling row pair per type quota over
/// `sum of x[i, object] for agents i whose label is in the type set`.
pub fn encode_type_quotas(
    agent_types: &[String],
    quotas: &[TypeQuota],
) -> Result<ConstraintSystem> {
    let known: BTreeSet<&String> = agent_types.iter().collect();
    let mut rows = Vec::with_capacity(2 * quotas.len());
    for quota in quotas {
        for label in &quota.type_set {
            if !known.contains(label) {
                return Err(Error::UnknownTypeLabel(label.clone()));
            }
        }
        let coeffs: BTreeMap<(usize, usize), Rational> = agent_types
            .iter()
            .enumerate()
            .filter(|(_, label)| quota.type_set.contains(*label))
            .map(|(i, _)| ((i, quota.object), rat_int(1)))
            .collect();
        rows.push(ConstraintRow {
            coeffs: coeffs.clone(),
            sense: Sense::Ge,
            rhs: quota.floor.clone(),
        });
        rows.push(ConstraintRow {
            coeffs,
            sense: Sense::Le,
            rhs: quota.ceiling.clone(),
        });
    }
    Ok(ConstraintSystem { rows })
}

/// All multiplicity vectors with total size at most `k`, in lexicographic
/// order; includes the empty bundle.
pub fn enumerate_bundles(num_base: usize, k: u64) -> Vec<Bundle> {
    let mut out = Vec::new();
    let mut current = vec![0u64; num_base];
    fn rec(pos: usize, left: u64, current: &mut Bundle, out: &mut Vec<Bundle>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for count in 0..=left {
            current[pos] = count;
            rec(pos + 1, left - count, current, out);
        }
        current[pos] = 0;
    }
    rec(0, k, &mut current, &mut out);
    out
}

/// Human-readable bundle id: `"0"` for the empty bundle, otherwise base ids
/// repeated by multiplicity and joined with `+`.
pub fn bundle_label(base: &[(String, u64)], bundle: &Bundle) -> String {
    let mut parts = Vec::new();
    for (g, &count) in bundle.iter().enumerate() {
        for _ in 0..count {
            parts.push(base[g].0.clone());
        }
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join("+")
    }
}

/// Builds a bundle-assignment instance: objects are all bundles of size at
/// most `k` over the base objects (empty bundle included, playing the null
/// object), and one supply row per base object caps the total multiplicity
/// allocated. Bundle columns get quota `n` so that only the supply rows
/// bind.
///
/// `preferences` maps each agent to indifference classes of bundles; every
/// bundle must be ranked.
pub fn encode_combinatorial(
    base: &[(String, u64)],
    k: u64,
    preferences: &[(String, Vec<Vec<Bundle>>)],
) -> Result<Instance> {
    let bundles = enumerate_bundles(base.len(), k);
    if bundles.len() > BUNDLE_GUARD {
        return Err(Error::EnumerationGuard {
            limit: BUNDLE_GUARD,
            needed: bundles.len(),
        });
    }
    let index: BTreeMap<&Bundle, usize> = bundles.iter().zip(0..).collect();
    let n = preferences.len();

    let mut orders = Vec::with_capacity(n);
    for (agent, classes) in preferences {
        let mut converted = Vec::with_capacity(classes.len());
        for class in classes {
            let mut set = BTreeSet::new();
            for bundle in class {
                let Some(&o) = index.get(bundle) else {
                    return Err(Error::UnknownObject(format!(
                        "agent `{agent}` ranks bundle {bundle:?} of size over {k}"
                    )));
                };
                set.insert(o);
            }
            converted.push(set);
        }
        orders.push(WeakOrder::new(converted));
    }

    let mut rows = Vec::with_capacity(base.len());
    for (g, (_, supply)) in base.iter().enumerate() {
        let mut coeffs = BTreeMap::new();
        for (o, bundle) in bundles.iter().enumerate() {
            if bundle[g] == 0 {
                continue;
            }
            for i in 0..n {
                coeffs.insert((i, o), rat_int(bundle[g] as i64));
            }
        }
        rows.push(ConstraintRow {
            coeffs,
            sense: Sense::Le,
            rhs: rat_int(*supply as i64),
        });
    }

    let inst = Instance::new(
        preferences.iter().map(|(a, _)| a.clone()).collect(),
        bundles.iter().map(|b| bundle_label(base, b)).collect(),
        vec![n as u64; bundles.len()],
        orders,
        ConstraintSystem { rows },
    );
    let violations = inst.validate();
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(Error::InvalidInstance(violations))
    }
}

/// Accepts a raw inequality system as-is after validating that every
/// referenced pair is in range. Deriving minimal systems from explicit
/// allowed-assignment lists is out of scope; callers supply rows directly.
pub fn encode_expost(
    raw: &ConstraintSystem,
    num_agents: usize,
    num_objects: usize,
) -> Result<ConstraintSystem> {
    for (c, row) in raw.rows.iter().enumerate() {
        for &(i, o) in row.coeffs.keys() {
            if i >= num_agents || o >= num_objects {
                return Err(Error::InvalidInstance(vec![
                    crate::model::Violation::ConstraintOutOfRange {
                        row: c,
                        agent_index: i,
                        object_index: o,
                    },
                ]));
            }
        }
    }
    Ok(raw.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::same_type;
    use crate::fixtures::example_instance;
    use crate::mechanism::{run, MechanismConfig};
    use crate::model::rat;

    fn pairs(items: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
        items.iter().copied().collect()
    }

    #[test]
    fn bihierarchy_rows_come_in_pairs() {
        let sets = vec![
            QuotaSet {
                members: pairs(&[(0, 0)]),
                floor: 0,
                ceiling: 1,
            },
            QuotaSet {
                members: pairs(&[(0, 0), (0, 1)]),
                floor: 1,
                ceiling: 1,
            },
        ];
        let cs = encode_bihierarchy(&sets);
        assert_eq!(cs.len(), 4);
        assert_eq!(cs.rows[0].sense, Sense::Ge);
        assert_eq!(cs.rows[0].rhs, rat_int(0));
        assert_eq!(cs.rows[1].sense, Sense::Le);
        assert_eq!(cs.rows[1].rhs, rat_int(1));
        assert_eq!(cs.rows[2].rhs, rat_int(1));
        assert_eq!(cs.rows[3].coeffs.len(), 2);
    }

    #[test]
    fn row_and_column_families_form_a_bihierarchy() {
        // the classic structure: one set per agent row, one per object column
        let n = 3;
        let rho = 3;
        let mut sets = Vec::new();
        for i in 0..n {
            sets.push(QuotaSet {
                members: (0..rho).map(|o| (i, o)).collect(),
                floor: 1,
                ceiling: 1,
            });
        }
        for o in 0..rho {
            sets.push(QuotaSet {
                members: (0..n).map(|i| (i, o)).collect(),
                floor: 0,
                ceiling: 1,
            });
        }
        let check = validate_bihierarchy(&sets);
        assert!(check.is_bihierarchy);
        let (h1, h2) = check.partition.unwrap();
        // rows all land on one side, columns on the other
        assert_eq!(h1.len() + h2.len(), sets.len());
        for side in [&h1, &h2] {
            for &a in side {
                for &b in side {
                    assert!(!sets_cross(&sets[a].members, &sets[b].members));
                }
            }
        }
    }

    #[test]
    fn crossing_triangle_is_rejected() {
        // three mutually overlapping sets over a 2x2 grid
        let sets = vec![
            QuotaSet {
                members: pairs(&[(0, 0), (0, 1)]),
                floor: 0,
                ceiling: 1,
            },
            QuotaSet {
                members: pairs(&[(0, 1), (1, 0)]),
                floor: 0,
                ceiling: 1,
            },
            QuotaSet {
                members: pairs(&[(1, 0), (0, 0)]),
                floor: 0,
                ceiling: 1,
            },
        ];
        let check = validate_bihierarchy(&sets);
        assert!(!check.is_bihierarchy);
        assert!(check.partition.is_none());
    }

    #[test]
    fn single_chain_is_a_hierarchy_alone() {
        let sets = vec![
            QuotaSet {
                members: pairs(&[(0, 0)]),
                floor: 0,
                ceiling: 1,
            },
            QuotaSet {
                members: pairs(&[(0, 0), (0, 1)]),
                floor: 0,
                ceiling: 2,
            },
            QuotaSet {
                members: pairs(&[(0, 0), (0, 1), (1, 0)]),
                floor: 0,
                ceiling: 2,
            },
        ];
        let check = validate_bihierarchy(&sets);
        assert!(check.is_bihierarchy);
        let (_, h2) = check.partition.unwrap();
        assert!(h2.is_empty());
    }

    #[test]
    fn type_quota_rows_select_labeled_agents() {
        let labels: Vec<String> = vec!["red".into(), "blue".into(), "red".into()];
        let quotas = vec![TypeQuota {
            type_set: BTreeSet::from(["red".to_string()]),
            object: 1,
            floor: rat_int(0),
            ceiling: rat(1, 2),
        }];
        let cs = encode_type_quotas(&labels, &quotas).unwrap();
        assert_eq!(cs.len(), 2);
        let ceiling_row = &cs.rows[1];
        assert_eq!(ceiling_row.coeffs.len(), 2);
        assert!(ceiling_row.coeffs.contains_key(&(0, 1)));
        assert!(ceiling_row.coeffs.contains_key(&(2, 1)));
        assert_eq!(ceiling_row.rhs, rat(1, 2));
    }

    #[test]
    fn type_quotas_reject_unknown_labels() {
        let labels: Vec<String> = vec!["red".into()];
        let quotas = vec![TypeQuota {
            type_set: BTreeSet::from(["green".to_string()]),
            object: 0,
            floor: rat_int(0),
            ceiling: rat_int(1),
        }];
        assert!(matches!(
            encode_type_quotas(&labels, &quotas),
            Err(Error::UnknownTypeLabel(_))
        ));
    }

    #[test]
    fn equal_type_labels_make_same_type_agents() {
        let labels: Vec<String> = vec!["red".into(), "red".into(), "blue".into()];
        let quotas = vec![TypeQuota {
            type_set: BTreeSet::from(["red".to_string()]),
            object: 0,
            floor: rat_int(0),
            ceiling: rat_int(1),
        }];
        let cs = encode_type_quotas(&labels, &quotas).unwrap();
        let inst = Instance::new(
            vec!["1".into(), "2".into(), "3".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![1, 1, 1],
            vec![
                WeakOrder::strict([0, 1, 2]),
                WeakOrder::strict([1, 0, 2]),
                WeakOrder::strict([2, 1, 0]),
            ],
            cs,
        );
        assert!(inst.validate().is_empty());
        assert!(same_type(&inst, 0, 1).unwrap());
        assert!(!same_type(&inst, 0, 2).unwrap());

        // the encoded polytope is non-empty and the quota binds: the two
        // red agents together keep at most one unit of object a
        let result = run(&inst, &MechanismConfig::default_for(&inst)).unwrap();
        let red_load = result.assignment.get(0, 0) + result.assignment.get(2, 0);
        assert!(red_load <= rat_int(1));
    }

    #[test]
    fn bundle_enumeration_includes_empty_bundle() {
        let bundles = enumerate_bundles(2, 1);
        assert_eq!(bundles, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(enumerate_bundles(2, 2).len(), 6);
    }

    #[test]
    fn combinatorial_encoding_is_symmetric_and_solvable() {
        // two agents compete for a single-copy base object with k = 1
        let base = vec![("g".to_string(), 1u64)];
        let unit = vec![1u64];
        let empty = vec![0u64];
        let prefs = vec![
            (
                "1".to_string(),
                vec![vec![unit.clone()], vec![empty.clone()]],
            ),
            ("2".to_string(), vec![vec![unit.clone()], vec![empty.clone()]]),
        ];
        let inst = encode_combinatorial(&base, 1, &prefs).unwrap();
        assert_eq!(inst.num_objects(), 2);
        assert!(inst.validate().is_empty());
        assert!(same_type(&inst, 0, 1).unwrap());

        let result = run(&inst, &MechanismConfig::default_for(&inst)).unwrap();
        let unit_obj = inst.object_index("g").unwrap();
        for i in 0..2 {
            assert_eq!(result.assignment.get(i, unit_obj), &rat(1, 2));
        }
    }

    #[test]
    fn combinatorial_encoding_rejects_incomplete_rankings() {
        let base = vec![("g".to_string(), 1u64)];
        let prefs = vec![("1".to_string(), vec![vec![vec![1u64]]])];
        assert!(matches!(
            encode_combinatorial(&base, 1, &prefs),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn expost_pass_through_validates_ranges() {
        let inst = example_instance();
        let cs = inst.constraints().clone();
        let out = encode_expost(&cs, 3, 3).unwrap();
        assert_eq!(out, cs);
        assert!(encode_expost(&cs, 1, 1).is_err());
        assert_eq!(
            encode_expost(&ConstraintSystem::empty(), 0, 0).unwrap(),
            ConstraintSystem::empty()
        );
    }
}
