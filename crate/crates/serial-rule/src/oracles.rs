//! Independent reference implementations for the unconstrained domain.
//!
//! These deliberately share no code with the LP path: `ps_eating` is an
//! event-driven simulation of simultaneous eating for strict preferences,
//! and `eps_reference` is a brute-force extended serial rule for weak
//! preferences that finds bottlenecks by enumerating agent subsets and
//! materializes each event through a small exact max-flow. Being slow is
//! fine; being independent is the point.
//!
//! `eps_reference` tracks cumulative shares on a global clock: at each
//! event every unfinished agent has eaten the same total. A candidate set
//! `Y` binds at ratio `(remaining capacity of Y's acceptable objects +
//! shares already held by Y) / |Y|`; the smallest ratio is the next event,
//! the minimizing set (largest, then lexicographically first) is frozen at
//! that cumulative share, and its acceptable region is consumed exactly.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::model::{Assignment, Instance, Rational};
use crate::{Error, Result};

/// Subset enumeration guard for `eps_reference`.
pub const EPS_MAX_AGENTS: usize = 15;

fn require_unconstrained(inst: &Instance) -> Result<()> {
    if inst.constraints().is_empty() {
        Ok(())
    } else {
        Err(Error::InfeasibleAssignment(
            "oracle requires an unconstrained instance".into(),
        ))
    }
}

/// Simultaneous-eating simulation for strict preferences and an empty
/// constraint system. Quotas may exceed one. Exact rational clock: each
/// step advances to the next object exhaustion (or to time 1), so there are
/// at most `rho + 1` steps.
pub fn ps_eating(inst: &Instance) -> Result<Assignment> {
    require_unconstrained(inst)?;
    if inst.preferences().iter().any(|p| !p.is_strict()) {
        return Err(Error::NonStrictPreferences);
    }
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }

    let n = inst.num_agents();
    let rho = inst.num_objects();
    let rankings: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            inst.preference(i)
                .classes()
                .iter()
                .map(|c| *c.iter().next().expect("strict classes are singletons"))
                .collect()
        })
        .collect();

    let mut remaining: Vec<Rational> = (0..rho)
        .map(|o| Rational::from_integer(inst.quota(o).into()))
        .collect();
    let mut cursor = vec![0usize; n];
    let mut x = Assignment::zero(n, rho);
    let mut clock = Rational::zero();
    let one = Rational::one();

    while clock < one {
        // Each agent eats her best object that still has capacity. Total
        // quota >= n guarantees something is always available before time 1.
        for i in 0..n {
            while remaining[rankings[i][cursor[i]]].is_zero() {
                cursor[i] += 1;
            }
        }
        let mut eaters = vec![0u64; rho];
        for i in 0..n {
            eaters[rankings[i][cursor[i]]] += 1;
        }
        let mut step = &one - &clock;
        for o in 0..rho {
            if eaters[o] > 0 {
                let to_exhaust = &remaining[o] / Rational::from_integer(eaters[o].into());
                if to_exhaust < step {
                    step = to_exhaust;
                }
            }
        }
        for i in 0..n {
            let o = rankings[i][cursor[i]];
            x.add(i, o, &step);
            remaining[o] -= &step;
        }
        clock += &step;
    }
    Ok(x)
}

/// Bipartite transportation by augmenting paths: ships exactly `demand[i]`
/// from each agent into its edge set, respecting object capacities. All
/// arithmetic is exact; orders are fixed, so the flow is deterministic.
/// Panics if the demands are not feasible; callers establish feasibility
/// before materializing.
fn transport(
    demands: &[(usize, Rational)],
    edges: &[BTreeSet<usize>],
    capacity: &mut [Rational],
    x: &mut Assignment,
) {
    let rho = capacity.len();
    let k = demands.len();
    // flow[a][o] for a over the demand list
    let mut flow: Vec<Vec<Rational>> = vec![vec![Rational::zero(); rho]; k];

    for a in 0..k {
        let mut need = demands[a].1.clone();
        while need.is_positive() {
            // BFS over agents (by list position) and objects for an
            // augmenting path from `a` to an object with spare capacity.
            let mut agent_prev: Vec<Option<usize>> = vec![None; k]; // object we arrived from
            let mut object_prev: Vec<Option<usize>> = vec![None; rho]; // agent we arrived from
            let mut seen_agents = vec![false; k];
            seen_agents[a] = true;
            let mut queue = std::collections::VecDeque::from([a]);
            let mut target: Option<usize> = None;
            'bfs: while let Some(cur) = queue.pop_front() {
                for &o in &edges[cur] {
                    if object_prev[o].is_some() {
                        continue;
                    }
                    object_prev[o] = Some(cur);
                    if capacity[o].is_positive() {
                        target = Some(o);
                        break 'bfs;
                    }
                    // try rerouting flow somebody else sent into o
                    for other in 0..k {
                        if !seen_agents[other] && flow[other][o].is_positive() {
                            seen_agents[other] = true;
                            agent_prev[other] = Some(o);
                            queue.push_back(other);
                        }
                    }
                }
            }
            let target = target.expect("event flow is feasible by the bottleneck bound");

            // Bottleneck along the alternating path.
            let mut push = need.clone();
            {
                let mut o = target;
                if capacity[o] < push {
                    push = capacity[o].clone();
                }
                let mut agent = object_prev[o].unwrap();
                while agent != a {
                    let back = agent_prev[agent].unwrap();
                    if flow[agent][back] < push {
                        push = flow[agent][back].clone();
                    }
                    o = back;
                    agent = object_prev[o].unwrap();
                }
            }
            debug_assert!(push.is_positive());

            // Apply along the path.
            let mut o = target;
            capacity[o] -= &push;
            let mut agent = object_prev[o].unwrap();
            flow[agent][o] += &push;
            while agent != a {
                let back = agent_prev[agent].unwrap();
                flow[agent][back] -= &push;
                capacity[back] += &push;
                o = back;
                agent = object_prev[o].unwrap();
                flow[agent][o] += &push;
                capacity[o] -= &push;
            }
            need -= &push;
        }
    }

    for ((agent, _), shipped) in demands.iter().zip(&flow) {
        for (o, amount) in shipped.iter().enumerate() {
            if amount.is_positive() {
                x.add(*agent, o, amount);
            }
        }
    }
}

/// Brute-force extended serial rule for weak preferences, empty constraint
/// system, and at most [`EPS_MAX_AGENTS`] agents.
pub fn eps_reference(inst: &Instance) -> Result<Assignment> {
    require_unconstrained(inst)?;
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    let n = inst.num_agents();
    if n > EPS_MAX_AGENTS {
        return Err(Error::EnumerationGuard {
            limit: EPS_MAX_AGENTS,
            needed: n,
        });
    }
    let rho = inst.num_objects();
    let one = Rational::one();

    let mut capacity: Vec<Rational> = (0..rho)
        .map(|o| Rational::from_integer(inst.quota(o).into()))
        .collect();
    let mut held: Vec<Rational> = vec![Rational::zero(); n];
    let mut level: Vec<usize> = vec![1; n];
    let mut finished: Vec<bool> = vec![false; n];
    let mut x = Assignment::zero(n, rho);

    // Available objects of the agent's current class; advances the class
    // pointer past fully consumed classes first.
    let advance = |level: &mut Vec<usize>, capacity: &[Rational], i: usize| -> BTreeSet<usize> {
        loop {
            let class = &inst.preference(i).classes()[level[i] - 1];
            let avail: BTreeSet<usize> = class
                .iter()
                .copied()
                .filter(|&o| capacity[o].is_positive())
                .collect();
            if !avail.is_empty() {
                return avail;
            }
            assert!(
                level[i] < inst.preference(i).num_classes(),
                "capacity conservation keeps some class available"
            );
            level[i] += 1;
        }
    };

    let mut events = 0usize;
    loop {
        let active: Vec<usize> = (0..n).filter(|&i| !finished[i]).collect();
        if active.is_empty() {
            break;
        }
        events += 1;
        assert!(
            events <= n * rho + n + 1,
            "event count exceeds the freezing bound"
        );

        let acceptable: Vec<BTreeSet<usize>> = active
            .iter()
            .map(|&i| advance(&mut level, &capacity, i))
            .collect();

        // Scan all non-empty subsets of the active agents for the smallest
        // cumulative bottleneck ratio; prefer larger sets, then the
        // lexicographically first, which picks the unique maximal minimizer.
        let mut best: Option<(Rational, u32, Vec<usize>)> = None;
        for mask in 1u64..(1 << active.len()) {
            let mut union: BTreeSet<usize> = BTreeSet::new();
            let mut held_sum = Rational::zero();
            for (pos, &agent) in active.iter().enumerate() {
                if mask & (1 << pos) != 0 {
                    union.extend(acceptable[pos].iter().copied());
                    held_sum += &held[agent];
                }
            }
            let mut cap_sum = held_sum;
            for &o in &union {
                cap_sum += &capacity[o];
            }
            let size = mask.count_ones();
            let ratio = cap_sum / Rational::from_integer(u64::from(size).into());
            let replace = match &best {
                None => true,
                Some((best_ratio, best_size, _)) => {
                    ratio < *best_ratio || (ratio == *best_ratio && size > *best_size)
                }
            };
            if replace {
                let members: Vec<usize> = active
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| mask & (1 << pos) != 0)
                    .map(|(_, &agent)| agent)
                    .collect();
                best = Some((ratio, size, members));
            }
        }
        let (ratio, _, bottleneck) = best.expect("active set is non-empty");

        if ratio >= one {
            // Terminal event: every unfinished agent can be topped up to a
            // full unit share from her current acceptable class.
            let demands: Vec<(usize, Rational)> = active
                .iter()
                .map(|&i| (i, &one - &held[i]))
                .collect();
            let edges: Vec<BTreeSet<usize>> = acceptable.clone();
            transport(&demands, &edges, &mut capacity, &mut x);
            for &i in &active {
                held[i] = one.clone();
                finished[i] = true;
            }
            break;
        }

        // Freeze the bottleneck at the cumulative ratio and consume its
        // acceptable region exactly.
        let demands: Vec<(usize, Rational)> = bottleneck
            .iter()
            .map(|&i| (i, &ratio - &held[i]))
            .collect();
        let edges: Vec<BTreeSet<usize>> = bottleneck
            .iter()
            .map(|&i| {
                let pos = active.iter().position(|&a| a == i).unwrap();
                acceptable[pos].clone()
            })
            .collect();
        transport(&demands, &edges, &mut capacity, &mut x);
        for &i in &bottleneck {
            held[i] = ratio.clone();
            debug_assert!(held[i] < one);
        }
    }
    Ok(x)
}
