//! Explicit concrete-state graph: configurations with untruncated
//! timestamps, explored under the lazy time sampling up to a tick horizon.

use std::collections::{HashMap, VecDeque};

use tickforge_core::model::{is_critical, Configuration};
use tickforge_core::syntax::SpecModel;

use crate::exec::{reject_fresh, successors, OracleError};

pub struct OracleGraph {
    pub states: Vec<Configuration>,
    pub edges: Vec<Vec<(usize, bool)>>, // (target, is_tick)
    pub critical: Vec<bool>,
    /// ticks consumed from the initial configuration (derived from global time)
    pub ticks: Vec<u64>,
    pub root: usize,
}

impl OracleGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Enumerate the concrete configurations reachable under the lazy time
/// sampling by traces with at most `tick_horizon` Ticks. Brute force: no
/// hash-consing, no representation sharing, states are plain configurations.
pub fn oracle_graph(
    spec: &SpecModel,
    s0: &Configuration,
    tick_horizon: u64,
    state_budget: usize,
) -> Result<OracleGraph, OracleError> {
    reject_fresh(spec)?;
    let t0 = s0.global_time();
    let mut states = vec![s0.clone()];
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    index.insert(s0.clone(), 0);
    let mut edges: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    let mut queue = VecDeque::new();
    queue.push_back(0usize);

    while let Some(id) = queue.pop_front() {
        if states.len() > state_budget {
            return Err(OracleError::Budget(state_budget));
        }
        let current = states[id].clone();
        let succ = successors(&current, spec);
        if succ.is_empty() {
            // the lazy sampling permits Tick exactly here
            if current.global_time() - t0 < tick_horizon {
                let next = current.tick()?;
                let tid = *index.entry(next.clone()).or_insert_with(|| {
                    states.push(next);
                    edges.push(Vec::new());
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                });
                edges[id].push((tid, true));
            }
        } else {
            for (_, next) in succ {
                let tid = *index.entry(next.clone()).or_insert_with(|| {
                    states.push(next);
                    edges.push(Vec::new());
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                });
                edges[id].push((tid, false));
            }
        }
    }

    let critical = states
        .iter()
        .map(|s| is_critical(s, &spec.critical))
        .collect();
    let ticks = states.iter().map(|s| s.global_time() - t0).collect();
    Ok(OracleGraph {
        states,
        edges,
        critical,
        ticks,
        root: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tickforge_core::syntax::parse_spec;

    #[test]
    fn tprime_horizon_two_has_six_states() {
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
        let g = oracle_graph(&spec, &spec.initial, 2, 10_000).unwrap();
        let mut rendered: Vec<String> = g.states.iter().map(|s| s.to_string()).collect();
        rendered.sort();
        assert_eq!(
            rendered,
            vec![
                "{A@1, Time@1}",
                "{B@1, Time@1}",
                "{C@1, Time@1}",
                "{D@1, Time@1}",
                "{D@1, Time@2}",
                "{Time@0, C@1}",
            ]
        );
    }

    #[test]
    fn horizon_zero_is_instantaneous_closure() {
        let spec = parse_spec(
            r#"
            pred A; pred B;
            init { Time@0, A@0 }
            rule ab: Time@T, A@T1 | { T1 <= T } -> Time@T, B@T;
            rule ba: Time@T, B@T1 | { T1 <= T } -> Time@T, A@T;
            "#,
        )
        .unwrap();
        let g = oracle_graph(&spec, &spec.initial, 0, 10_000).unwrap();
        let mut rendered: Vec<String> = g.states.iter().map(|s| s.to_string()).collect();
        rendered.sort();
        assert_eq!(rendered, vec!["{A@0, Time@0}", "{B@0, Time@0}"]);
    }
}
