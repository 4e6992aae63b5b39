//! Concrete operational semantics: rule applicability, application with
//! fresh-value generation, the lazy-time-sampling gate, successor enumeration
//! and trace construction.
//!
//! Under lazy time sampling the Tick rule is permitted exactly when no
//! instantaneous rule instance applies, so Tick is never offered as a step
//! choice here; it is a separate edge gated by [`must_tick`].

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::model::{
    guard_holds, match_multiset_indexed, Configuration, ModelError, Rule, RuleKind, Substitution,
    Term, Trace, TraceStep, TsFact, TICK_RULE,
};
use crate::syntax::SpecModel;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rule `{0}` is not applicable under the given substitution")]
    NotApplicable(String),
    #[error("substitution is not total on the patterns of rule `{0}`")]
    PartialSubstitution(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Source of globally unique fresh values. Identifiers are unique across all
/// concurrent consumers of one source.
#[derive(Debug, Default)]
pub struct NonceSource {
    next: AtomicU64,
}

impl NonceSource {
    pub fn new() -> Self {
        NonceSource {
            next: AtomicU64::new(0),
        }
    }

    pub fn fresh(&self) -> u64 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }
}

/// One applicable instantaneous rule instance.
#[derive(Debug, Clone)]
pub struct StepChoice {
    pub rule: String,
    pub subst: Substitution,
    /// Canonical indices of the matched facts, in preserved-then-consumed
    /// pattern order. Enough to rebuild the substitution during replay.
    pub matched: Vec<usize>,
    pub result: Configuration,
}

/// All applicable (rule, substitution, matched-indices) triples in canonical
/// order: rules in declaration order, substitutions in their canonical order.
/// No fresh values are bound here, so two instances differing only in nonce
/// identity cannot arise.
pub fn enabled_matches(
    config: &Configuration,
    spec: &SpecModel,
) -> Vec<(usize, Substitution, Vec<usize>)> {
    let mut out = Vec::new();
    for (ri, rule) in spec.rules.iter().enumerate() {
        if rule.kind != RuleKind::Instantaneous {
            continue;
        }
        let mut init = Substitution::default();
        init.times
            .insert(rule.time_var.clone(), config.global_time());
        for (sub, idx) in match_multiset_indexed(&rule.lhs(), config, &init) {
            if guard_holds(&rule.guard, &sub) {
                out.push((ri, sub, idx));
            }
        }
    }
    out
}

/// Lazy time sampling: Tick is permitted iff no instantaneous rule instance
/// can be applied.
pub fn must_tick(config: &Configuration, spec: &SpecModel) -> bool {
    enabled_matches(config, spec).is_empty()
}

/// Apply an instantaneous rule (or Tick) under a substitution. The
/// substitution must come from matching the rule against `config` with its
/// guard satisfied; fresh variables are bound to new nonces from `nonces`.
pub fn apply_rule(
    config: &Configuration,
    rule: &Rule,
    subst: &Substitution,
    nonces: &NonceSource,
) -> Result<Configuration, EngineError> {
    if rule.kind == RuleKind::Tick {
        return Ok(config.tick()?);
    }
    // re-check the precondition: the substitution must reproduce itself when
    // matching the left-hand side, and the guard must hold
    let mut check = subst.clone();
    check
        .times
        .insert(rule.time_var.clone(), config.global_time());
    if check.times.get(&rule.time_var) != Some(&config.global_time()) {
        return Err(EngineError::NotApplicable(rule.name.clone()));
    }
    let matches = match_multiset_indexed(&rule.lhs(), config, &check);
    let Some((full, matched)) = matches.into_iter().find(|(s, _)| {
        subst.terms.iter().all(|(k, v)| s.terms.get(k) == Some(v))
            && subst.times.iter().all(|(k, v)| s.times.get(k) == Some(v))
    }) else {
        return Err(EngineError::NotApplicable(rule.name.clone()));
    };
    if !guard_holds(&rule.guard, &full) {
        return Err(EngineError::NotApplicable(rule.name.clone()));
    }
    apply_matched(config, rule, &full, &matched, nonces).map(|(c, _)| c)
}

/// Apply a rule given the full substitution and the matched canonical
/// indices. Returns the result and the substitution extended with fresh
/// bindings.
fn apply_matched(
    config: &Configuration,
    rule: &Rule,
    subst: &Substitution,
    matched: &[usize],
    nonces: &NonceSource,
) -> Result<(Configuration, Substitution), EngineError> {
    let mut full = subst.clone();
    for fv in &rule.fresh {
        full.terms
            .entry(fv.clone())
            .or_insert_with(|| Term::Nonce(nonces.fresh()));
    }
    // consumed facts are the tail of the matched indices
    let consumed_idx: Vec<usize> = matched[rule.preserved.len()..].to_vec();
    let mut added = Vec::with_capacity(rule.created.len());
    for (pat, delay) in &rule.created {
        let fact = full
            .apply_pattern(pat)
            .ok_or_else(|| EngineError::PartialSubstitution(rule.name.clone()))?;
        let ts = config
            .global_time()
            .checked_add(*delay)
            .ok_or(EngineError::Model(ModelError::TimeOverflow))?;
        added.push(TsFact::new(fact, ts));
    }
    let result = config.replace(&consumed_idx, added)?;
    Ok((result, full))
}

/// All instantaneous step choices from a configuration, with results.
pub fn enabled_steps(
    config: &Configuration,
    spec: &SpecModel,
    nonces: &NonceSource,
) -> Result<Vec<StepChoice>, EngineError> {
    let mut out = Vec::new();
    for (ri, sub, matched) in enabled_matches(config, spec) {
        let rule = &spec.rules[ri];
        let (result, full) = apply_matched(config, rule, &sub, &matched, nonces)?;
        out.push(StepChoice {
            rule: rule.name.clone(),
            subst: full,
            matched,
            result,
        });
    }
    Ok(out)
}

/// Step selection policy for simulation runs.
pub enum Policy {
    /// First choice in canonical order.
    First,
    /// Uniform choice with a seeded generator, reproducible across runs.
    Random(Box<ChaCha8Rng>),
    /// Prefer rules whose names appear in the list, in list order; fall back
    /// to the first choice.
    Prefer(Vec<String>),
}

impl Policy {
    pub fn random(seed: u64) -> Policy {
        Policy::Random(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    fn choose(&mut self, choices: &[StepChoice]) -> usize {
        match self {
            Policy::First => 0,
            Policy::Random(rng) => rng.gen_range(0..choices.len()),
            Policy::Prefer(names) => names
                .iter()
                .find_map(|n| choices.iter().position(|c| c.rule == *n))
                .unwrap_or(0),
        }
    }
}

/// Run up to `budget` steps from `from` under the lazy time sampling: an
/// instantaneous step is taken whenever one exists (resolved by the policy),
/// and Tick fires only when nothing else can.
pub fn run_lts(
    spec: &SpecModel,
    from: &Configuration,
    policy: &mut Policy,
    budget: usize,
    nonces: &NonceSource,
) -> Result<Trace, EngineError> {
    let mut trace = Trace {
        initial: from.clone(),
        steps: Vec::new(),
    };
    let mut current = from.clone();
    for _ in 0..budget {
        let choices = enabled_steps(&current, spec, nonces)?;
        let step = if choices.is_empty() {
            let next = current.tick()?;
            TraceStep {
                rule: TICK_RULE.into(),
                subst: Substitution::default(),
                config: next,
            }
        } else {
            let i = policy.choose(&choices);
            let c = choices.into_iter().nth(i).expect("index in range");
            TraceStep {
                rule: c.rule,
                subst: c.subst,
                config: c.result,
            }
        };
        current = step.config.clone();
        trace.steps.push(step);
    }
    Ok(trace)
}

/// Line-oriented textual form: one step per line,
/// `<idx> <rule-name> <bindings> -> <configuration>`.
pub fn render_trace_text(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str(&format!("init {}\n", trace.initial));
    for (i, s) in trace.steps.iter().enumerate() {
        out.push_str(&format!("{} {} {} -> {}\n", i, s.rule, s.subst, s.config));
    }
    out
}

/// Structured JSON form of a trace.
pub fn trace_to_json(trace: &Trace) -> serde_json::Value {
    json!({
        "initial": trace.initial.to_string(),
        "steps": trace
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "idx": i,
                    "rule": s.rule,
                    "bindings": s.subst.to_string(),
                    "config": s.config.to_string(),
                })
            })
            .collect::<Vec<_>>(),
    })
}
