//! Direct evaluation of the four properties and their bounded forms, by
//! path and cycle enumeration over the oracle's own graphs.
//!
//! Unbounded properties run on a quotient of the concrete graph: states are
//! normalized configurations where adjacent timestamp differences are
//! clipped at Dmax + 1 and the oldest fact is shifted to time zero. The
//! normalization and the Dmax scan are written here, independently of the
//! main abstraction stack.

use std::collections::{HashMap, VecDeque};

use tickforge_core::model::{is_critical, Configuration, RuleKind, TsFact};
use tickforge_core::syntax::SpecModel;

use crate::exec::{reject_fresh, successors, OracleError};
use crate::graph::oracle_graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleProp {
    Z,
    S,
    V,
    L,
    NZ(u64),
    NS(u64),
    NL(u64),
}

/// Independent syntactic scan for the truncation bound: guard and critical
/// offsets, created delays, and the initial timestamps.
fn own_dmax(spec: &SpecModel, s0: &Configuration) -> u64 {
    let mut d = s0.facts().iter().map(|f| f.ts).max().unwrap_or(0);
    for r in &spec.rules {
        for (_, delay) in &r.created {
            d = d.max(*delay);
        }
        for c in &r.guard {
            d = d.max(c.offset.unsigned_abs());
        }
    }
    for pair in &spec.critical.pairs {
        for c in &pair.constraints {
            d = d.max(c.offset.unsigned_abs());
        }
    }
    d
}

/// Clip adjacent timestamp differences at dmax + 1 and shift the oldest fact
/// to time zero. Two configurations normalize equally exactly when they are
/// indistinguishable by any constraint the specification can state.
fn normalize(config: &Configuration, dmax: u64) -> Configuration {
    let facts = config.facts();
    let mut out = Vec::with_capacity(facts.len());
    let mut ts = 0u64;
    for (i, f) in facts.iter().enumerate() {
        if i > 0 {
            ts += (facts[i].ts - facts[i - 1].ts).min(dmax + 1);
        }
        out.push(TsFact::new(f.fact.clone(), ts));
    }
    Configuration::new(out).expect("normalization keeps the Time fact")
}

struct Quotient {
    states: Vec<Configuration>,
    edges: Vec<Vec<(usize, bool)>>,
    critical: Vec<bool>,
    root: usize,
}

fn quotient_graph(
    spec: &SpecModel,
    s0: &Configuration,
    state_budget: usize,
) -> Result<Quotient, OracleError> {
    reject_fresh(spec)?;
    let balanced = spec
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::Instantaneous)
        .all(|r| r.consumed.len() == r.created.len());
    if !balanced {
        return Err(OracleError::NotBalanced);
    }
    let dmax = own_dmax(spec, s0);
    let root_state = normalize(s0, dmax);
    let mut states = vec![root_state.clone()];
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    index.insert(root_state, 0);
    let mut edges: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    let mut critical = vec![is_critical(&states[0], &spec.critical)];
    let mut queue = VecDeque::new();
    queue.push_back(0usize);

    while let Some(id) = queue.pop_front() {
        if critical[id] {
            continue; // recorded as a sink; compliant traces stop here
        }
        if states.len() > state_budget {
            return Err(OracleError::Budget(state_budget));
        }
        let current = states[id].clone();
        let succ = successors(&current, spec);
        let nexts: Vec<(Configuration, bool)> = if succ.is_empty() {
            vec![(current.tick()?, true)]
        } else {
            succ.into_iter().map(|(_, c)| (c, false)).collect()
        };
        for (next, is_tick) in nexts {
            let norm = normalize(&next, dmax);
            let tid = match index.get(&norm) {
                Some(&t) => t,
                None => {
                    states.push(norm.clone());
                    edges.push(Vec::new());
                    critical.push(is_critical(&norm, &spec.critical));
                    index.insert(norm, states.len() - 1);
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                }
            };
            edges[id].push((tid, is_tick));
        }
    }
    Ok(Quotient {
        states,
        edges,
        critical,
        root: 0,
    })
}

/// Does `w` lie on a compliant cycle, and if `need_tick`, one containing a
/// Tick edge? Search over (state, tick-seen) pairs starting from the
/// successors of `w`.
fn on_cycle(q: &Quotient, w: usize, need_tick: bool) -> bool {
    let n = q.states.len();
    let mut seen = vec![[false; 2]; n];
    let mut queue: VecDeque<(usize, bool)> = VecDeque::new();
    for &(x, is_tick) in &q.edges[w] {
        if !q.critical[x] {
            queue.push_back((x, is_tick));
        } else if x == w {
            unreachable!("w is non-critical");
        }
    }
    while let Some((x, saw)) = queue.pop_front() {
        if x == w && (saw || !need_tick) {
            return true;
        }
        if seen[x][saw as usize] {
            continue;
        }
        seen[x][saw as usize] = true;
        for &(y, is_tick) in &q.edges[x] {
            if !q.critical[y] {
                queue.push_back((y, saw || is_tick));
            }
        }
    }
    false
}

/// Compliant forward reachability from a state (inclusive).
fn compliant_reach(q: &Quotient, from: usize) -> Vec<usize> {
    let mut seen = vec![false; q.states.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    if q.critical[from] {
        return out;
    }
    seen[from] = true;
    queue.push_back(from);
    while let Some(v) = queue.pop_front() {
        out.push(v);
        for &(w, _) in &q.edges[v] {
            if !q.critical[w] && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    out
}

fn unbounded(
    spec: &SpecModel,
    s0: &Configuration,
    prop: OracleProp,
    state_budget: usize,
) -> Result<bool, OracleError> {
    let q = quotient_graph(spec, s0, state_budget)?;
    if q.critical[q.root] {
        // a critical start admits no compliant trace at all
        return Ok(false);
    }
    let reach = compliant_reach(&q, q.root);
    let z = reach.iter().any(|&u| on_cycle(&q, u, true));
    match prop {
        OracleProp::Z => Ok(z),
        OracleProp::S => {
            // every critical state in the quotient was discovered as the
            // first critical hit of some lazy-sampling trace
            Ok(z && !q.critical.iter().any(|&c| c))
        }
        OracleProp::V => {
            if !z {
                return Ok(false);
            }
            // a point of no return: non-critical, reaches no compliant cycle
            let pon = reach.iter().any(|&u| {
                !compliant_reach(&q, u)
                    .iter()
                    .any(|&w| on_cycle(&q, w, false))
            });
            Ok(!pon)
        }
        OracleProp::L => {
            if !z {
                return Ok(false);
            }
            let stuck = reach.iter().any(|&u| {
                !compliant_reach(&q, u)
                    .iter()
                    .any(|&w| on_cycle(&q, w, true))
            });
            Ok(!stuck)
        }
        _ => unreachable!("bounded properties handled separately"),
    }
}

fn bounded(
    spec: &SpecModel,
    s0: &Configuration,
    prop: OracleProp,
    n: u64,
    state_budget: usize,
) -> Result<bool, OracleError> {
    let g = oracle_graph(spec, s0, n, state_budget)?;
    // compliant reachability over the concrete graph
    let mut seen = vec![false; g.len()];
    let mut reach = Vec::new();
    if !g.critical[g.root] {
        let mut queue = VecDeque::new();
        seen[g.root] = true;
        queue.push_back(g.root);
        while let Some(v) = queue.pop_front() {
            reach.push(v);
            for &(w, _) in &g.edges[v] {
                if !g.critical[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let nz = reach.iter().any(|&u| g.ticks[u] == n);
    match prop {
        OracleProp::NZ(_) => Ok(nz),
        OracleProp::NS(_) => Ok(nz && !g.critical.iter().any(|&c| c)),
        OracleProp::NL(_) => {
            if !nz {
                return Ok(false);
            }
            // each compliantly reachable state must extend compliantly to
            // exactly n ticks
            for &u in &reach {
                let mut seen2 = vec![false; g.len()];
                let mut q2 = VecDeque::new();
                seen2[u] = true;
                q2.push_back(u);
                let mut ok = false;
                while let Some(v) = q2.pop_front() {
                    if g.ticks[v] == n {
                        ok = true;
                        break;
                    }
                    for &(w, _) in &g.edges[v] {
                        if !g.critical[w] && !seen2[w] {
                            seen2[w] = true;
                            q2.push_back(w);
                        }
                    }
                }
                if !ok {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        _ => unreachable!(),
    }
}

/// Evaluate a property directly from its definition on the oracle's own
/// graphs.
pub fn oracle_check(
    spec: &SpecModel,
    s0: &Configuration,
    prop: OracleProp,
    state_budget: usize,
) -> Result<bool, OracleError> {
    match prop {
        OracleProp::Z | OracleProp::S | OracleProp::V | OracleProp::L => {
            unbounded(spec, s0, prop, state_budget)
        }
        OracleProp::NZ(n) | OracleProp::NS(n) | OracleProp::NL(n) => {
            bounded(spec, s0, prop, n, state_budget)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tickforge_core::syntax::parse_spec;

    #[test]
    fn empty_critical_spec_makes_s_equal_z() {
        let spec = parse_spec(
            r#"
            pred A; pred B;
            init { Time@0, A@0 }
            pragma progressing;
            rule ab: Time@T, A@T1 -> Time@T, B@(T+1);
            rule ba: Time@T, B@T1 -> Time@T, A@(T+1);
            "#,
        )
        .unwrap();
        let z = oracle_check(&spec, &spec.initial, OracleProp::Z, 10_000).unwrap();
        let s = oracle_check(&spec, &spec.initial, OracleProp::S, 10_000).unwrap();
        assert!(z);
        assert_eq!(z, s);
    }

    #[test]
    fn zeno_trap_defeats_reliability_but_not_recoverability() {
        let spec = parse_spec(
            r#"
            pred A; pred B; pred C; pred D;
            init { Time@0, C@1 }
            rule mk_d: Time@T, C@T1 | { T1 <= T } -> Time@T, D@T;
            rule mk_a: Time@T, C@T1 | { T1 <= T } -> Time@T, A@T;
            rule a_to_b: Time@T, A@T1 -> Time@T, B@T;
            rule b_to_a: Time@T, B@T1 -> Time@T, A@T;
            "#,
        )
        .unwrap();
        let s0 = &spec.initial;
        assert!(oracle_check(&spec, s0, OracleProp::Z, 10_000).unwrap());
        assert!(oracle_check(&spec, s0, OracleProp::S, 10_000).unwrap());
        assert!(oracle_check(&spec, s0, OracleProp::V, 10_000).unwrap());
        assert!(!oracle_check(&spec, s0, OracleProp::L, 10_000).unwrap());
    }
}
