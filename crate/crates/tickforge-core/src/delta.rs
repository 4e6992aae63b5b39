//! The delta-representation abstraction: a configuration is collapsed to its
//! canonical sequence of untimed facts interleaved with truncated time
//! differences. Two configurations with the same representation satisfy the
//! same constraints, enable the same rule instances and agree on
//! criticality, so traces can be explored over representations instead of
//! concrete states. Gaps larger than Dmax are truncated to infinity, which
//! makes the abstract state space finite for balanced systems.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

use crate::engine::{enabled_steps, must_tick, EngineError, NonceSource};
use crate::model::{is_critical, Configuration, CriticalSpec, Fact, Term, TsFact};
use crate::syntax::{SpecModel, SpecStats};

#[derive(Debug, Error)]
pub enum DeltaError {
    #[error(
        "configuration is not future-bounded for Dmax {dmax}: fact `{fact}` lies more than \
         Dmax ahead of global time (inferred Dmax too small)"
    )]
    NotFutureBounded { fact: String, dmax: u64 },
    #[error("delta representations built with different Dmax ({0} vs {1})")]
    DmaxMismatch(u64, u64),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Truncated time difference between two adjacent entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gap {
    Fin(u64),
    Inf,
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gap::Fin(d) => write!(f, "{d}"),
            Gap::Inf => write!(f, "inf"),
        }
    }
}

/// Canonical delta representation: untimed facts in non-decreasing timestamp
/// order (ties alphabetical, nonce identities canonicalized to first
/// occurrence indices) with the truncated gaps between neighbours.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeltaRep {
    facts: Vec<Fact>,
    gaps: Vec<Gap>,
    dmax: u64,
}

impl DeltaRep {
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    pub fn dmax(&self) -> u64 {
        self.dmax
    }

    /// Position of the Time entry.
    pub fn time_index(&self) -> usize {
        self.facts
            .iter()
            .position(Fact::is_time)
            .expect("one Time entry")
    }

    /// Canonical single-line rendering, stable across runs.
    pub fn render(&self) -> String {
        let mut out = String::from("[");
        for (i, f) in self.facts.iter().enumerate() {
            if i > 0 {
                out.push_str(&format!(" |{}| ", self.gaps[i - 1]));
            }
            out.push_str(&f.to_string());
        }
        out.push(']');
        out
    }

    /// Stable 64-bit fingerprint (FNV-1a over the rendering and Dmax).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.render().as_bytes());
        eat(&self.dmax.to_le_bytes());
        h
    }
}

impl fmt::Display for DeltaRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

fn rename_nonces_in_term(t: &Term, map: &mut HashMap<u64, u64>, next: &mut u64) -> Term {
    match t {
        Term::Nonce(id) => {
            let new = *map.entry(*id).or_insert_with(|| {
                let v = *next;
                *next += 1;
                v
            });
            Term::Nonce(new)
        }
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter()
                .map(|a| rename_nonces_in_term(a, map, next))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn rename_nonces(f: &Fact, map: &mut HashMap<u64, u64>, next: &mut u64) -> Fact {
    Fact {
        pred: f.pred.clone(),
        args: f
            .args
            .iter()
            .map(|a| rename_nonces_in_term(a, map, next))
            .collect(),
    }
}

/// Ids a fact would receive if processed next under the given partial map.
fn projected_ids(f: &Fact, map: &HashMap<u64, u64>, next: u64) -> Vec<u64> {
    let mut local: HashMap<u64, u64> = HashMap::new();
    let mut n = next;
    f.nonces()
        .into_iter()
        .map(|id| {
            if let Some(v) = map.get(&id) {
                *v
            } else if let Some(v) = local.get(&id) {
                *v
            } else {
                let v = n;
                local.insert(id, v);
                n += 1;
                v
            }
        })
        .collect()
}

/// Abstract a configuration for the given Dmax. Fails if some fact lies more
/// than Dmax in the future of the Time fact, which signals that the Dmax was
/// inferred too small for the specification at hand.
pub fn abstract_config(config: &Configuration, dmax: u64) -> Result<DeltaRep, DeltaError> {
    let ordered = config.facts();
    let mut gaps = Vec::with_capacity(ordered.len().saturating_sub(1));
    for w in ordered.windows(2) {
        let d = w[1].ts - w[0].ts;
        gaps.push(if d <= dmax { Gap::Fin(d) } else { Gap::Inf });
    }
    // future-boundedness: no infinite gap at or after the Time entry
    let tpos = ordered
        .iter()
        .position(|f| f.fact.is_time())
        .expect("configurations carry Time");
    for (i, g) in gaps.iter().enumerate() {
        if i >= tpos && *g == Gap::Inf {
            return Err(DeltaError::NotFutureBounded {
                fact: ordered[i + 1].to_string(),
                dmax,
            });
        }
    }

    // canonicalize nonce identities in first-occurrence order; inside runs of
    // facts indistinguishable up to nonce names (same timestamp, same
    // nonce-blind rendering) pick the arrangement with the least projected id
    // sequence so the result is invariant under renaming
    let mut facts: Vec<Fact> = Vec::with_capacity(ordered.len());
    let mut map: HashMap<u64, u64> = HashMap::new();
    let mut next: u64 = 0;
    let mut i = 0;
    while i < ordered.len() {
        let mut j = i + 1;
        while j < ordered.len()
            && ordered[j].ts == ordered[i].ts
            && ordered[j].fact.render_blind() == ordered[i].fact.render_blind()
            && !ordered[i].fact.nonces().is_empty()
        {
            j += 1;
        }
        if j - i <= 1 {
            facts.push(rename_nonces(&ordered[i].fact, &mut map, &mut next));
        } else {
            let mut remaining: Vec<&TsFact> = ordered[i..j].iter().collect();
            while !remaining.is_empty() {
                let best = remaining
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, f)| projected_ids(&f.fact, &map, next))
                    .map(|(k, _)| k)
                    .expect("non-empty");
                let f = remaining.remove(best);
                facts.push(rename_nonces(&f.fact, &mut map, &mut next));
            }
        }
        i = j;
    }
    Ok(DeltaRep { facts, gaps, dmax })
}

/// Structural equality of two representations built with the same Dmax.
/// Canonicalization already makes nonce renaming a no-op.
pub fn equivalent(a: &DeltaRep, b: &DeltaRep) -> Result<bool, DeltaError> {
    if a.dmax != b.dmax {
        return Err(DeltaError::DmaxMismatch(a.dmax, b.dmax));
    }
    Ok(a == b)
}

/// Build the canonical representative configuration: the first entry is
/// placed at time zero and each infinite gap is widened to Dmax + 1, which
/// exceeds every constraint offset the specification can mention.
pub fn materialize(d: &DeltaRep) -> Configuration {
    let mut ts = 0u64;
    let mut facts = Vec::with_capacity(d.facts.len());
    for (i, f) in d.facts.iter().enumerate() {
        if i > 0 {
            ts += match d.gaps[i - 1] {
                Gap::Fin(g) => g,
                Gap::Inf => d.dmax + 1,
            };
        }
        facts.push(TsFact::new(f.clone(), ts));
    }
    Configuration::new(facts).expect("representation carries one Time entry")
}

fn nonce_floor(config: &Configuration) -> u64 {
    config
        .facts()
        .iter()
        .flat_map(|f| f.fact.nonces())
        .max()
        .map(|m| m + 1)
        .unwrap_or(0)
}

/// An abstract step: a rule instance applicable to the representation, with
/// the canonical entry indices it matched and the successor representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractStep {
    pub rule: String,
    pub matched: Vec<usize>,
    pub target: DeltaRep,
}

/// All abstract instantaneous steps from a representation. Verdicts and
/// successors depend only on the representation, not on the representative:
/// the materialized configuration realizes exactly the truncated-difference
/// semantics because Dmax + 1 exceeds every offset in the specification.
pub fn delta_enabled(d: &DeltaRep, spec: &SpecModel) -> Result<Vec<AbstractStep>, DeltaError> {
    let conf = materialize(d);
    let nonces = NonceSource::new();
    for _ in 0..nonce_floor(&conf) {
        nonces.fresh();
    }
    let mut out = Vec::new();
    for choice in enabled_steps(&conf, spec, &nonces)? {
        out.push(AbstractStep {
            rule: choice.rule,
            matched: choice.matched,
            target: abstract_config(&choice.result, d.dmax)?,
        });
    }
    Ok(out)
}

/// Lazy-time-sampling gate at the abstract level.
pub fn delta_must_tick(d: &DeltaRep, spec: &SpecModel) -> bool {
    must_tick(&materialize(d), spec)
}

/// Apply one instantaneous rule instance, identified by the canonical entry
/// indices it matches, to a representation. The result is the abstraction of
/// applying the rule to any representative and does not depend on the
/// representative chosen.
pub fn delta_step(
    d: &DeltaRep,
    spec: &SpecModel,
    rule_name: &str,
    matched: &[usize],
) -> Result<DeltaRep, DeltaError> {
    let instance = delta_enabled(d, spec)?
        .into_iter()
        .find(|s| s.rule == rule_name && s.matched == matched)
        .ok_or_else(|| DeltaError::Engine(EngineError::NotApplicable(rule_name.to_string())))?;
    Ok(instance.target)
}

/// Abstract Tick: advance global time on the representative and re-abstract.
pub fn delta_tick(d: &DeltaRep) -> Result<DeltaRep, DeltaError> {
    abstract_config(&materialize(d).tick()?, d.dmax)
}

/// Representative-independent criticality.
pub fn delta_critical(d: &DeltaRep, cs: &CriticalSpec) -> bool {
    is_critical(&materialize(d), cs)
}

/// The number of distinct delta representations of a specification with the
/// given bounds: (Dmax + 2)^(m-1) * J^m * (E + 2mk)^(mk), evaluated exactly.
pub fn count_bound(stats: &SpecStats) -> BigUint {
    let m = stats.m;
    let k = stats.k;
    let base1 = BigUint::from(stats.dmax + 2);
    let base2 = BigUint::from(stats.j);
    let base3 = BigUint::from(stats.e + 2 * m * k);
    base1.pow(m.saturating_sub(1) as u32) * base2.pow(m as u32) * base3.pow((m * k) as u32)
}

/// Hash-consing pool for representations: stable fingerprints for node
/// identity with full structural comparison on collision.
#[derive(Debug, Default)]
pub struct DeltaPool {
    by_fp: HashMap<u64, Vec<usize>>,
    reps: Vec<DeltaRep>,
}

impl DeltaPool {
    pub fn new() -> Self {
        DeltaPool::default()
    }

    /// Insert-if-absent; returns the node id and whether it was new.
    pub fn intern(&mut self, rep: DeltaRep) -> (usize, bool) {
        let fp = rep.fingerprint();
        let slot = self.by_fp.entry(fp).or_default();
        for &id in slot.iter() {
            if self.reps[id] == rep {
                return (id, false);
            }
        }
        let id = self.reps.len();
        slot.push(id);
        self.reps.push(rep);
        (id, true)
    }

    /// Append without interning. Used where node identity is finer than the
    /// representation itself (the tick-layered graph); a pool must not mix
    /// `intern` and `push_raw`.
    pub fn push_raw(&mut self, rep: DeltaRep) -> usize {
        let id = self.reps.len();
        self.reps.push(rep);
        id
    }

    pub fn get(&self, id: usize) -> &DeltaRep {
        &self.reps[id]
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Fact, TsFact, TIME_PRED};
    use crate::syntax::parse_spec;

    fn c(s: &str) -> Term {
        Term::Const(s.into())
    }
    fn n(v: u64) -> Term {
        Term::Num(v)
    }

    fn cfg(facts: &[(&str, &[Term], u64)]) -> Configuration {
        Configuration::new(
            facts
                .iter()
                .map(|(p, args, t)| TsFact::new(Fact::new(*p, args.to_vec()), *t))
                .collect(),
        )
        .unwrap()
    }

    fn drone_config(shift: u64) -> Configuration {
        cfg(&[
            (TIME_PRED, &[], 4 + shift),
            ("Dr", &[c("d1"), n(1), n(2), n(10)], 4 + shift),
            ("Dr", &[c("d2"), n(5), n(5), n(8)], 4 + shift),
            ("P", &[c("p1"), n(1), n(1)], 3 + shift),
            ("P", &[c("p2"), n(5), n(6)], shift),
        ])
    }

    #[test]
    fn abstracts_drone_configuration() {
        let d = abstract_config(&drone_config(0), 1).unwrap();
        assert_eq!(
            d.render(),
            "[P(p2,5,6) |inf| P(p1,1,1) |1| Dr(d1,1,2,10) |0| Dr(d2,5,5,8) |0| Time]"
        );
    }

    #[test]
    fn single_fact_abstraction() {
        let d = abstract_config(&cfg(&[(TIME_PRED, &[], 7)]), 3).unwrap();
        assert_eq!(d.render(), "[Time]");
        assert!(d.gaps().is_empty());
    }

    #[test]
    fn uniform_time_shift_is_invisible() {
        let a = abstract_config(&drone_config(0), 1).unwrap();
        let b = abstract_config(&drone_config(100), 1).unwrap();
        assert!(equivalent(&a, &b).unwrap());
    }

    #[test]
    fn truncation_hides_large_past_differences() {
        // moving P(p2,..) from @0 to @1 keeps the representation at Dmax = 1:
        // the adjacent difference to P(p1,..)@3 still exceeds the bound
        let shifted = |ts: u64| {
            cfg(&[
                (TIME_PRED, &[], 4),
                ("Dr", &[c("d1"), n(1), n(2), n(10)], 4),
                ("Dr", &[c("d2"), n(5), n(5), n(8)], 4),
                ("P", &[c("p1"), n(1), n(1)], 3),
                ("P", &[c("p2"), n(5), n(6)], ts),
            ])
        };
        let a = abstract_config(&drone_config(0), 1).unwrap();
        let b = abstract_config(&shifted(1), 1).unwrap();
        assert!(equivalent(&a, &b).unwrap());
        // at @2 the adjacent difference becomes 1 and is representable, so
        // the configurations are distinguishable (they satisfy different
        // equality constraints)
        let d = abstract_config(&shifted(2), 1).unwrap();
        assert!(!equivalent(&a, &d).unwrap());
        assert_eq!(
            d.render(),
            "[P(p2,5,6) |1| P(p1,1,1) |1| Dr(d1,1,2,10) |0| Dr(d2,5,5,8) |0| Time]"
        );
    }

    #[test]
    fn dmax_mismatch_is_an_error() {
        let a = abstract_config(&drone_config(0), 1).unwrap();
        let b = abstract_config(&drone_config(0), 2).unwrap();
        assert!(matches!(
            equivalent(&a, &b),
            Err(DeltaError::DmaxMismatch(1, 2))
        ));
    }

    #[test]
    fn future_unbounded_input_is_rejected() {
        let config = cfg(&[(TIME_PRED, &[], 0), ("F", &[], 10)]);
        assert!(matches!(
            abstract_config(&config, 1),
            Err(DeltaError::NotFutureBounded { .. })
        ));
    }

    #[test]
    fn tick_saturates_past_gap() {
        // P one unit in the past at Dmax = 1: after a tick it falls beyond
        let d = abstract_config(&cfg(&[("P", &[], 0), (TIME_PRED, &[], 1)]), 1).unwrap();
        assert_eq!(d.render(), "[P |1| Time]");
        let after = delta_tick(&d).unwrap();
        assert_eq!(after.render(), "[P |inf| Time]");
        // and the saturated state is a tick fixpoint
        assert_eq!(delta_tick(&after).unwrap(), after);
    }

    #[test]
    fn tick_pulls_future_fact_to_present() {
        let d = abstract_config(&cfg(&[(TIME_PRED, &[], 0), ("Q", &[], 1)]), 1).unwrap();
        assert_eq!(d.render(), "[Time |1| Q]");
        let after = delta_tick(&d).unwrap();
        // equal timestamps sort alphabetically: Q before Time
        assert_eq!(after.render(), "[Q |0| Time]");
    }

    #[test]
    fn abstraction_is_idempotent_through_materialize() {
        for dmax in [2u64, 3, 5] {
            let d = abstract_config(&drone_config(3), dmax).unwrap();
            assert_eq!(abstract_config(&materialize(&d), d.dmax()).unwrap(), d);
        }
    }

    #[test]
    fn nonce_renaming_gives_equal_representations() {
        let a = cfg(&[
            (TIME_PRED, &[], 2),
            ("N", &[Term::Nonce(17)], 1),
            ("M", &[Term::Nonce(17), Term::Nonce(4)], 2),
        ]);
        let b = cfg(&[
            (TIME_PRED, &[], 2),
            ("N", &[Term::Nonce(0)], 1),
            ("M", &[Term::Nonce(0), Term::Nonce(99)], 2),
        ]);
        let da = abstract_config(&a, 2).unwrap();
        let db = abstract_config(&b, 2).unwrap();
        assert!(equivalent(&da, &db).unwrap());
        assert_eq!(da.render(), "[N(#0) |1| M(#0,#1) |0| Time]");
    }

    #[test]
    fn tied_nonce_facts_are_ordered_canonically() {
        let a = cfg(&[
            (TIME_PRED, &[], 0),
            ("N", &[Term::Nonce(5)], 0),
            ("N", &[Term::Nonce(9)], 0),
        ]);
        let b = cfg(&[
            (TIME_PRED, &[], 0),
            ("N", &[Term::Nonce(9)], 0),
            ("N", &[Term::Nonce(5)], 0),
        ]);
        let da = abstract_config(&a, 1).unwrap();
        let db = abstract_config(&b, 1).unwrap();
        assert_eq!(da, db);
        assert_eq!(da.render(), "[N(#0) |0| N(#1) |0| Time]");
    }

    #[test]
    fn count_bound_evaluates_the_formula() {
        let stats = SpecStats {
            m: 1,
            k: 1,
            dmax: 0,
            j: 1,
            e: 0,
            balanced: true,
            progressing: true,
        };
        assert_eq!(count_bound(&stats), BigUint::from(2u32));
        let stats = SpecStats {
            m: 2,
            k: 2,
            dmax: 1,
            j: 2,
            e: 1,
            balanced: true,
            progressing: true,
        };
        assert_eq!(count_bound(&stats), BigUint::from(78732u32));
    }

    #[test]
    fn delta_gate_agrees_with_engine_on_corpus_like_spec() {
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
        let d0 = abstract_config(&spec.initial, 1).unwrap();
        assert!(delta_must_tick(&d0, &spec));
        let d1 = delta_tick(&d0).unwrap();
        assert!(!delta_must_tick(&d1, &spec));
        let steps = delta_enabled(&d1, &spec).unwrap();
        let rules: Vec<&str> = steps.iter().map(|s| s.rule.as_str()).collect();
        assert_eq!(rules, vec!["mk_d", "mk_a"]);
    }

    #[test]
    fn delta_step_applies_one_instance() {
        let spec = parse_spec(
            r#"
            pred A; pred B;
            init { Time@0, A@0 }
            pragma progressing;
            rule ab: Time@T, A@T1 -> Time@T, B@(T+1);
            "#,
        )
        .unwrap();
        let d0 = abstract_config(&spec.initial, 1).unwrap();
        let steps = delta_enabled(&d0, &spec).unwrap();
        assert_eq!(steps.len(), 1);
        let target = delta_step(&d0, &spec, "ab", &steps[0].matched).unwrap();
        assert_eq!(target.render(), "[Time |1| B]");
        assert!(delta_step(&d0, &spec, "missing", &steps[0].matched).is_err());
    }

    #[test]
    fn pool_interns_by_structure() {
        let mut pool = DeltaPool::new();
        let a = abstract_config(&drone_config(0), 1).unwrap();
        let b = abstract_config(&drone_config(50), 1).unwrap();
        let (ia, new_a) = pool.intern(a);
        let (ib, new_b) = pool.intern(b);
        assert!(new_a);
        assert!(!new_b);
        assert_eq!(ia, ib);
        assert_eq!(pool.len(), 1);
    }
}
