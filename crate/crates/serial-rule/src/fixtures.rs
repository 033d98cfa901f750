//! Shared unit-test fixtures.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    rat, rat_int, Assignment, ConstraintRow, ConstraintSystem, Instance, Sense, WeakOrder,
};

pub fn example_orders() -> (WeakOrder, WeakOrder, WeakOrder) {
    // agent 1: a > b > c; agent 2: {a,b} > c; agent 3: c > b > a
    let o1 = WeakOrder::strict([0, 1, 2]);
    let o2 = WeakOrder::new(vec![BTreeSet::from([0, 1]), BTreeSet::from([2])]);
    let o3 = WeakOrder::strict([2, 1, 0]);
    (o1, o2, o3)
}

/// The three-agent, three-object instance with side constraints
/// `x[1,a] + x[2,a] <= 1/2` and `x[1,c] + x[2,c] >= 1/2`, used as the
/// reference run throughout the test suite.
pub fn example_instance() -> Instance {
    let (o1, o2, o3) = example_orders();
    let mut row1 = BTreeMap::new();
    row1.insert((0, 0), rat_int(1));
    row1.insert((1, 0), rat_int(1));
    let mut row2 = BTreeMap::new();
    row2.insert((0, 2), rat_int(1));
    row2.insert((1, 2), rat_int(1));
    Instance::new(
        vec!["1".into(), "2".into(), "3".into()],
        vec!["a".into(), "b".into(), "c".into()],
        vec![1, 1, 1],
        vec![o1, o2, o3],
        ConstraintSystem {
            rows: vec![
                ConstraintRow {
                    coeffs: row1,
                    sense: Sense::Le,
                    rhs: rat(1, 2),
                },
                ConstraintRow {
                    coeffs: row2,
                    sense: Sense::Ge,
                    rhs: rat(1, 2),
                },
            ],
        },
    )
}

/// The unique final assignment of the reference run.
pub fn example_final_table() -> Assignment {
    Assignment::from_rows(vec![
        vec![rat(1, 2), rat(1, 4), rat(1, 4)],
        vec![rat_int(0), rat(3, 4), rat(1, 4)],
        vec![rat(1, 2), rat_int(0), rat(1, 2)],
    ])
}
