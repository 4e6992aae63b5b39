//! The oracle's own rule application: match against the left-hand side,
//! delete the consumed facts by value, add the created facts at the global
//! time plus their delays.

use thiserror::Error;

use tickforge_core::model::{
    guard_holds, match_multiset, Configuration, Rule, Substitution, TsFact,
};
use tickforge_core::syntax::SpecModel;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("the oracle does not support specifications with fresh values (rule `{0}`)")]
    FreshValues(String),
    #[error("state budget of {0} states exceeded")]
    Budget(usize),
    #[error("the oracle quotient needs a balanced specification")]
    NotBalanced,
    #[error("configuration error: {0}")]
    Model(#[from] tickforge_core::model::ModelError),
}

pub(crate) fn reject_fresh(spec: &SpecModel) -> Result<(), OracleError> {
    for r in &spec.rules {
        if !r.fresh.is_empty() {
            return Err(OracleError::FreshValues(r.name.clone()));
        }
    }
    Ok(())
}

fn apply(config: &Configuration, rule: &Rule, sub: &Substitution) -> Option<Configuration> {
    let mut facts: Vec<TsFact> = config.facts().to_vec();
    for (pat, tv) in &rule.consumed {
        let fact = sub.apply_pattern(pat)?;
        let ts = *sub.times.get(tv)?;
        let pos = facts.iter().position(|f| f.fact == fact && f.ts == ts)?;
        facts.remove(pos);
    }
    for (pat, delay) in &rule.created {
        let fact = sub.apply_pattern(pat)?;
        facts.push(TsFact::new(fact, config.global_time().checked_add(*delay)?));
    }
    Configuration::new(facts).ok()
}

/// All instantaneous successors of a configuration, with the rule names that
/// produced them.
pub fn successors(config: &Configuration, spec: &SpecModel) -> Vec<(String, Configuration)> {
    let mut out = Vec::new();
    for rule in &spec.rules {
        let mut init = Substitution::default();
        init.times
            .insert(rule.time_var.clone(), config.global_time());
        for sub in match_multiset(&rule.lhs(), config, &init) {
            if !guard_holds(&rule.guard, &sub) {
                continue;
            }
            if let Some(next) = apply(config, rule, &sub) {
                out.push((rule.name.clone(), next));
            }
        }
    }
    out
}
