//! Domain types for timed multiset rewriting: terms, facts, configurations,
//! rules, constraints and the primitive operations (matching, size,
//! criticality) everything else builds on.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Reserved predicate for global time. Arity zero, exactly one per configuration.
pub const TIME_PRED: &str = "Time";

/// Name of the built-in tick rule in traces and edge labels.
pub const TICK_RULE: &str = "Tick";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("configuration must contain exactly one Time fact, found {0}")]
    TimeFactCount(usize),
    #[error("timestamp arithmetic overflow")]
    TimeOverflow,
}

/// A first-order term. Numerals are kept as values; `Num(n)` stands for the
/// successor-notation term s^n(z). `NumVar(v, c)` is the pattern form `v + c`
/// and only appears in rule/critical patterns, never in ground facts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Num(u64),
    Var(String),
    NumVar(String, u64),
    Nonce(u64),
    App(String, Vec<Term>),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) | Term::Num(_) | Term::Nonce(_) => true,
            Term::Var(_) | Term::NumVar(_, _) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Symbol count per the size-of-a-fact rule: a numeral of value v counts
    /// v + 1 symbols (successor notation), every other symbol counts one.
    pub fn size(&self) -> u64 {
        match self {
            Term::Const(_) | Term::Var(_) | Term::Nonce(_) => 1,
            Term::Num(v) => v + 1,
            Term::NumVar(_, c) => c + 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<u64>(),
        }
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, blind_nonces: bool) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "{c}"),
            Term::Num(n) => write!(f, "{n}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::NumVar(v, c) => write!(f, "{v}+{c}"),
            Term::Nonce(id) => {
                // the blind marker sorts after lowercase constants, so tied
                // nonce-bearing facts come after constant-only ones
                if blind_nonces {
                    write!(f, "~")
                } else {
                    write!(f, "#{id}")
                }
            }
            Term::App(func, args) => {
                write!(f, "{func}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    a.fmt_with(f, blind_nonces)?;
                }
                write!(f, ")")
            }
        }
    }

    fn collect_nonces(&self, out: &mut Vec<u64>) {
        match self {
            Term::Nonce(id) => out.push(*id),
            Term::App(_, args) => args.iter().for_each(|a| a.collect_nonces(out)),
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, false)
    }
}

/// An untimed fact `P(u1, ..., un)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Fact {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Fact {
            pred: pred.into(),
            args,
        }
    }

    pub fn time() -> Self {
        Fact {
            pred: TIME_PRED.into(),
            args: vec![],
        }
    }

    pub fn is_time(&self) -> bool {
        self.pred == TIME_PRED && self.args.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// Rendering with nonce identities replaced by `#`; used as a sort key so
    /// that canonical orderings are invariant under nonce renaming.
    pub fn render_blind(&self) -> String {
        struct Blind<'a>(&'a Fact);
        impl fmt::Display for Blind<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0.pred)?;
                if !self.0.args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in self.0.args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        a.fmt_with(f, true)?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
        Blind(self).to_string()
    }

    pub fn nonces(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for a in &self.args {
            a.collect_nonces(&mut out);
        }
        out
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A ground fact with its timestamp, `F@t`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TsFact {
    pub fact: Fact,
    pub ts: u64,
}

impl TsFact {
    pub fn new(fact: Fact, ts: u64) -> Self {
        TsFact { fact, ts }
    }
}

impl fmt::Display for TsFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.fact, self.ts)
    }
}

/// Size of a timestamped fact: total number of alphabet symbols in the fact.
/// The timestamp is not counted, so the size is invariant under timestamp
/// change.
pub fn fact_size(f: &TsFact) -> u64 {
    untimed_size(&f.fact)
}

pub fn untimed_size(f: &Fact) -> u64 {
    1 + f.args.iter().map(Term::size).sum::<u64>()
}

/// A multiset of ground timestamped facts with exactly one `Time` fact.
/// Facts are kept sorted in canonical order: by timestamp, then by a
/// nonce-blind rendering, then by nonce identities as a final tiebreak.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    facts: Vec<TsFact>,
    time: u64,
}

fn canonical_key(f: &TsFact) -> (u64, String, Vec<u64>) {
    (f.ts, f.fact.render_blind(), f.fact.nonces())
}

impl Configuration {
    pub fn new(mut facts: Vec<TsFact>) -> Result<Self, ModelError> {
        let times: Vec<u64> = facts
            .iter()
            .filter(|f| f.fact.is_time())
            .map(|f| f.ts)
            .collect();
        if times.len() != 1 {
            return Err(ModelError::TimeFactCount(times.len()));
        }
        facts.sort_by_key(canonical_key);
        Ok(Configuration {
            facts,
            time: times[0],
        })
    }

    pub fn global_time(&self) -> u64 {
        self.time
    }

    /// Facts in canonical order (the order matching keys index into).
    pub fn facts(&self) -> &[TsFact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Rebuild with the Time fact advanced by one unit.
    pub fn tick(&self) -> Result<Configuration, ModelError> {
        let new_time = self.time.checked_add(1).ok_or(ModelError::TimeOverflow)?;
        let facts = self
            .facts
            .iter()
            .map(|f| {
                if f.fact.is_time() {
                    TsFact::new(f.fact.clone(), new_time)
                } else {
                    f.clone()
                }
            })
            .collect();
        Configuration::new(facts)
    }

    /// Remove the facts at the given canonical indices and add `added`,
    /// re-canonicalizing. Indices must be distinct and in range.
    pub fn replace(
        &self,
        removed: &[usize],
        added: Vec<TsFact>,
    ) -> Result<Configuration, ModelError> {
        let mut keep: Vec<bool> = vec![true; self.facts.len()];
        for &i in removed {
            keep[i] = false;
        }
        let mut facts: Vec<TsFact> = self
            .facts
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(f, _)| f.clone())
            .collect();
        facts.extend(added);
        Configuration::new(facts)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, fact) in self.facts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{fact}")?;
        }
        write!(f, "}}")
    }
}

/// Time constraint in normal form: `lhs REL rhs + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Gt,
    Ge,
    Eq,
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rel::Gt => write!(f, ">"),
            Rel::Ge => write!(f, ">="),
            Rel::Eq => write!(f, "="),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub lhs: String,
    pub rel: Rel,
    pub rhs: String,
    pub offset: i64,
}

impl Constraint {
    pub fn new(lhs: impl Into<String>, rel: Rel, rhs: impl Into<String>, offset: i64) -> Self {
        Constraint {
            lhs: lhs.into(),
            rel,
            rhs: rhs.into(),
            offset,
        }
    }

    /// Evaluate under a total assignment of the mentioned time variables.
    pub fn eval(&self, times: &BTreeMap<String, u64>) -> Option<bool> {
        let l = *times.get(&self.lhs)? as i128;
        let r = *times.get(&self.rhs)? as i128 + self.offset as i128;
        Some(match self.rel {
            Rel::Gt => l > r,
            Rel::Ge => l >= r,
            Rel::Eq => l == r,
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use std::cmp::Ordering;
        match self.offset.cmp(&0) {
            Ordering::Equal => write!(f, "{} {} {}", self.lhs, self.rel, self.rhs),
            Ordering::Greater => write!(
                f,
                "{} {} {} + {}",
                self.lhs, self.rel, self.rhs, self.offset
            ),
            Ordering::Less => write!(
                f,
                "{} {} {} - {}",
                self.lhs, self.rel, self.rhs, -self.offset
            ),
        }
    }
}

/// An untimed fact pattern, possibly with variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactPattern {
    pub pred: String,
    pub args: Vec<Term>,
}

impl FactPattern {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        FactPattern {
            pred: pred.into(),
            args,
        }
    }
}

impl fmt::Display for FactPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            Fact {
                pred: self.pred.clone(),
                args: self.args.clone()
            }
        )
    }
}

/// A fact pattern together with its timestamp variable, `F@T`.
pub type TimedPattern = (FactPattern, String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Tick,
    Instantaneous,
}

/// An instantaneous rewrite rule, or the built-in Tick. The `Time@T` fact is
/// structural: `time_var` names T and both sides implicitly carry it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub kind: RuleKind,
    pub time_var: String,
    pub preserved: Vec<TimedPattern>,
    pub consumed: Vec<TimedPattern>,
    pub created: Vec<(FactPattern, u64)>,
    pub guard: Vec<Constraint>,
    pub fresh: Vec<String>,
}

impl Rule {
    pub fn tick() -> Self {
        Rule {
            name: TICK_RULE.into(),
            kind: RuleKind::Tick,
            time_var: String::new(),
            preserved: vec![],
            consumed: vec![],
            created: vec![],
            guard: vec![],
            fresh: vec![],
        }
    }

    /// LHS patterns in matching order: preserved first, then consumed.
    pub fn lhs(&self) -> Vec<TimedPattern> {
        let mut v = self.preserved.clone();
        v.extend(self.consumed.iter().cloned());
        v
    }
}

/// One pair of a critical configuration specification: a pattern multiset and
/// constraints over its time variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalPair {
    pub patterns: Vec<TimedPattern>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CriticalSpec {
    pub pairs: Vec<CriticalPair>,
}

impl CriticalSpec {
    pub fn empty() -> Self {
        CriticalSpec { pairs: vec![] }
    }
}

/// A ground substitution: term variables (including fresh variables mapped to
/// nonces) and time variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    pub terms: BTreeMap<String, Term>,
    pub times: BTreeMap<String, u64>,
}

impl Substitution {
    pub fn apply_term(&self, t: &Term) -> Option<Term> {
        match t {
            Term::Const(_) | Term::Num(_) | Term::Nonce(_) => Some(t.clone()),
            Term::Var(v) => self.terms.get(v).cloned(),
            Term::NumVar(v, c) => match self.terms.get(v)? {
                Term::Num(n) => Some(Term::Num(n.checked_add(*c)?)),
                _ => None,
            },
            Term::App(func, args) => {
                let args = args
                    .iter()
                    .map(|a| self.apply_term(a))
                    .collect::<Option<Vec<_>>>()?;
                Some(Term::App(func.clone(), args))
            }
        }
    }

    pub fn apply_pattern(&self, p: &FactPattern) -> Option<Fact> {
        let args = p
            .args
            .iter()
            .map(|a| self.apply_term(a))
            .collect::<Option<Vec<_>>>()?;
        Some(Fact {
            pred: p.pred.clone(),
            args,
        })
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for (k, v) in &self.terms {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
            first = false;
        }
        for (k, v) in &self.times {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// Unify one pattern term against a ground term, extending `sub`.
fn unify_term(pat: &Term, val: &Term, sub: &mut Substitution) -> bool {
    match (pat, val) {
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::Num(a), Term::Num(b)) => a == b,
        (Term::Nonce(a), Term::Nonce(b)) => a == b,
        (Term::Var(v), _) => match sub.terms.get(v) {
            Some(bound) => bound == val,
            None => {
                sub.terms.insert(v.clone(), val.clone());
                true
            }
        },
        (Term::NumVar(v, c), Term::Num(n)) => {
            let Some(base) = n.checked_sub(*c) else {
                return false;
            };
            match sub.terms.get(v) {
                Some(Term::Num(bound)) => *bound == base,
                Some(_) => false,
                None => {
                    sub.terms.insert(v.clone(), Term::Num(base));
                    true
                }
            }
        }
        (Term::App(f, pargs), Term::App(g, vargs)) => {
            f == g
                && pargs.len() == vargs.len()
                && pargs.iter().zip(vargs).all(|(p, v)| unify_term(p, v, sub))
        }
        _ => false,
    }
}

/// Unify a timed pattern against one concrete fact, extending `sub`.
pub fn unify_timed(pat: &TimedPattern, fact: &TsFact, sub: &mut Substitution) -> bool {
    let (fp, tvar) = pat;
    if fp.pred != fact.fact.pred || fp.args.len() != fact.fact.args.len() {
        return false;
    }
    for (p, v) in fp.args.iter().zip(&fact.fact.args) {
        if !unify_term(p, v, sub) {
            return false;
        }
    }
    match sub.times.get(tvar) {
        Some(bound) => *bound == fact.ts,
        None => {
            sub.times.insert(tvar.clone(), fact.ts);
            true
        }
    }
}

/// Enumerate every substitution mapping the pattern multiset into the
/// configuration (multiset inclusion: one configuration fact per pattern
/// occurrence). Results are deduplicated and returned in canonical order.
pub fn match_multiset(
    patterns: &[TimedPattern],
    config: &Configuration,
    initial: &Substitution,
) -> Vec<Substitution> {
    let mut out = std::collections::BTreeSet::new();
    let mut used = vec![false; config.facts().len()];
    fn go(
        patterns: &[TimedPattern],
        idx: usize,
        config: &Configuration,
        used: &mut Vec<bool>,
        sub: &Substitution,
        out: &mut std::collections::BTreeSet<Substitution>,
    ) {
        if idx == patterns.len() {
            out.insert(sub.clone());
            return;
        }
        for (i, fact) in config.facts().iter().enumerate() {
            if used[i] {
                continue;
            }
            let mut attempt = sub.clone();
            if unify_timed(&patterns[idx], fact, &mut attempt) {
                used[i] = true;
                go(patterns, idx + 1, config, used, &attempt, out);
                used[i] = false;
            }
        }
    }
    go(patterns, 0, config, &mut used, initial, &mut out);
    out.into_iter().collect()
}

/// As `match_multiset` but also returns, for each substitution, the canonical
/// fact indices it matched (lexicographically least witness). Used for
/// machine-checkable witness edges.
pub fn match_multiset_indexed(
    patterns: &[TimedPattern],
    config: &Configuration,
    initial: &Substitution,
) -> Vec<(Substitution, Vec<usize>)> {
    let mut out: BTreeMap<Substitution, Vec<usize>> = BTreeMap::new();
    let mut used = vec![false; config.facts().len()];
    let mut picked = Vec::new();
    fn go(
        patterns: &[TimedPattern],
        idx: usize,
        config: &Configuration,
        used: &mut Vec<bool>,
        picked: &mut Vec<usize>,
        sub: &Substitution,
        out: &mut BTreeMap<Substitution, Vec<usize>>,
    ) {
        if idx == patterns.len() {
            out.entry(sub.clone()).or_insert_with(|| picked.clone());
            return;
        }
        for (i, fact) in config.facts().iter().enumerate() {
            if used[i] {
                continue;
            }
            let mut attempt = sub.clone();
            if unify_timed(&patterns[idx], fact, &mut attempt) {
                used[i] = true;
                picked.push(i);
                go(patterns, idx + 1, config, used, picked, &attempt, out);
                picked.pop();
                used[i] = false;
            }
        }
    }
    go(
        patterns,
        0,
        config,
        &mut used,
        &mut picked,
        initial,
        &mut out,
    );
    out.into_iter().collect()
}

pub fn guard_holds(guard: &[Constraint], sub: &Substitution) -> bool {
    guard.iter().all(|c| c.eval(&sub.times).unwrap_or(false))
}

/// Classify a configuration as critical: some pair has a grounding with the
/// pattern multiset included and all constraints satisfied. Nonces in the
/// configuration are matched through pattern variables, so the verdict is
/// invariant under nonce renaming.
pub fn is_critical(config: &Configuration, cs: &CriticalSpec) -> bool {
    cs.pairs.iter().any(|pair| {
        match_multiset(&pair.patterns, config, &Substitution::default())
            .iter()
            .any(|sub| guard_holds(&pair.constraints, sub))
    })
}

/// One executed step of a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: String,
    pub subst: Substitution,
    pub config: Configuration,
}

/// A finite trace: an initial configuration and the steps taken from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: Configuration,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn last(&self) -> &Configuration {
        self.steps
            .last()
            .map(|s| &s.config)
            .unwrap_or(&self.initial)
    }

    pub fn tick_count(&self) -> usize {
        self.steps.iter().filter(|s| s.rule == TICK_RULE).count()
    }

    pub fn configs(&self) -> impl Iterator<Item = &Configuration> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(name: &str) -> Term {
        Term::Const(name.into())
    }
    fn n(v: u64) -> Term {
        Term::Num(v)
    }
    fn var(name: &str) -> Term {
        Term::Var(name.into())
    }

    fn ts(pred: &str, args: Vec<Term>, t: u64) -> TsFact {
        TsFact::new(Fact::new(pred, args), t)
    }

    /// The example configuration with two drones and two points, global time 4.
    fn drone_config() -> Configuration {
        Configuration::new(vec![
            ts(TIME_PRED, vec![], 4),
            ts("Dr", vec![c("d1"), n(1), n(2), n(10)], 4),
            ts("Dr", vec![c("d2"), n(5), n(5), n(8)], 4),
            ts("P", vec![c("p1"), n(1), n(1)], 3),
            ts("P", vec![c("p2"), n(5), n(6)], 0),
        ])
        .unwrap()
    }

    #[test]
    fn fact_size_counts_symbols() {
        // P(s(z), f(a,X), a) = P, s, z, f, a, X, a -> 7
        let f = ts(
            "P",
            vec![n(1), Term::App("f".into(), vec![c("a"), var("X")]), c("a")],
            12,
        );
        assert_eq!(fact_size(&f), 7);

        assert_eq!(fact_size(&ts(TIME_PRED, vec![], 0)), 1);

        // Dr(d1,1,2,3)@9 = 1 + 1 + 2 + 3 + 4
        let f = ts("Dr", vec![c("d1"), n(1), n(2), n(3)], 9);
        assert_eq!(fact_size(&f), 11);
    }

    #[test]
    fn fact_size_ignores_timestamp() {
        let a = ts("Dr", vec![c("d1"), n(1), n(2), n(3)], 9);
        let b = ts("Dr", vec![c("d1"), n(1), n(2), n(3)], 123456);
        assert_eq!(fact_size(&a), fact_size(&b));
    }

    #[test]
    fn match_binds_both_drones() {
        let pat = vec![(
            FactPattern::new("Dr", vec![var("Id"), var("X"), var("Y"), var("E")]),
            "T".to_string(),
        )];
        let subs = match_multiset(&pat, &drone_config(), &Substitution::default());
        assert_eq!(subs.len(), 2);
        let ids: std::collections::BTreeSet<&Term> = subs.iter().map(|s| &s.terms["Id"]).collect();
        assert_eq!(ids, [&c("d1"), &c("d2")].into_iter().collect());
    }

    #[test]
    fn match_empty_pattern_yields_empty_substitution() {
        let subs = match_multiset(&[], &drone_config(), &Substitution::default());
        assert_eq!(subs, vec![Substitution::default()]);
    }

    #[test]
    fn match_missing_predicate_yields_nothing() {
        let pat = vec![(FactPattern::new("Q", vec![]), "T".to_string())];
        assert!(match_multiset(&pat, &drone_config(), &Substitution::default()).is_empty());
    }

    #[test]
    fn match_does_not_reuse_one_occurrence() {
        let config =
            Configuration::new(vec![ts(TIME_PRED, vec![], 0), ts("A", vec![], 0)]).unwrap();
        let pat = vec![
            (FactPattern::new("A", vec![]), "T1".to_string()),
            (FactPattern::new("A", vec![]), "T2".to_string()),
        ];
        assert!(match_multiset(&pat, &config, &Substitution::default()).is_empty());
    }

    #[test]
    fn numvar_pattern_matches_with_shift() {
        let config = Configuration::new(vec![
            ts(TIME_PRED, vec![], 5),
            ts("Dr", vec![c("d2"), n(5), n(6), n(7)], 5),
        ])
        .unwrap();
        let pat = vec![(
            FactPattern::new(
                "Dr",
                vec![var("Id"), var("X"), var("Y"), Term::NumVar("E".into(), 1)],
            ),
            "T".to_string(),
        )];
        let subs = match_multiset(&pat, &config, &Substitution::default());
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].terms["E"], n(6));

        // value 0 cannot match E+1
        let config0 = Configuration::new(vec![
            ts(TIME_PRED, vec![], 5),
            ts("Dr", vec![c("d2"), n(5), n(6), n(0)], 5),
        ])
        .unwrap();
        assert!(match_multiset(&pat, &config0, &Substitution::default()).is_empty());
    }

    #[test]
    fn empty_critical_spec_is_never_critical() {
        assert!(!is_critical(&drone_config(), &CriticalSpec::empty()));
    }

    #[test]
    fn zero_energy_drone_is_critical() {
        let cs = CriticalSpec {
            pairs: vec![CriticalPair {
                patterns: vec![(
                    FactPattern::new("Dr", vec![var("Id"), var("X"), var("Y"), n(0)]),
                    "T".to_string(),
                )],
                constraints: vec![],
            }],
        };
        let config = Configuration::new(vec![
            ts(TIME_PRED, vec![], 7),
            ts("Dr", vec![c("d1"), n(2), n(2), n(0)], 7),
        ])
        .unwrap();
        assert!(is_critical(&config, &cs));
        assert!(!is_critical(&drone_config(), &cs));
    }

    #[test]
    fn picture_age_pair_is_critical() {
        // <{P(p1,x1,y1)@T1, Time@T}, {T > T1 + M}> with M = 2
        let cs = CriticalSpec {
            pairs: vec![CriticalPair {
                patterns: vec![
                    (
                        FactPattern::new("P", vec![c("p1"), n(1), n(1)]),
                        "T1".to_string(),
                    ),
                    (FactPattern::new(TIME_PRED, vec![]), "T".to_string()),
                ],
                constraints: vec![Constraint::new("T", Rel::Gt, "T1", 2)],
            }],
        };
        let config = Configuration::new(vec![
            ts(TIME_PRED, vec![], 5),
            ts("P", vec![c("p1"), n(1), n(1)], 2),
        ])
        .unwrap();
        assert!(is_critical(&config, &cs)); // 5 > 2 + 2
        let fresh = Configuration::new(vec![
            ts(TIME_PRED, vec![], 4),
            ts("P", vec![c("p1"), n(1), n(1)], 2),
        ])
        .unwrap();
        assert!(!is_critical(&fresh, &cs)); // 4 > 4 fails
    }

    #[test]
    fn criticality_invariant_under_nonce_renaming() {
        let cs = CriticalSpec {
            pairs: vec![CriticalPair {
                patterns: vec![
                    (FactPattern::new("N", vec![var("X")]), "T1".to_string()),
                    (FactPattern::new("N", vec![var("X")]), "T2".to_string()),
                ],
                constraints: vec![],
            }],
        };
        let mk = |a: u64, b: u64| {
            Configuration::new(vec![
                ts(TIME_PRED, vec![], 0),
                ts("N", vec![Term::Nonce(a)], 0),
                ts("N", vec![Term::Nonce(b)], 1),
            ])
            .unwrap()
        };
        // same nonce twice: critical; distinct nonces: not
        assert!(is_critical(&mk(7, 7), &cs));
        assert!(is_critical(&mk(42, 42), &cs));
        assert!(!is_critical(&mk(7, 8), &cs));
        assert!(!is_critical(&mk(100, 3), &cs));
    }

    #[test]
    fn configuration_requires_single_time_fact() {
        assert_eq!(
            Configuration::new(vec![ts("A", vec![], 0)]).unwrap_err(),
            ModelError::TimeFactCount(0)
        );
        assert_eq!(
            Configuration::new(vec![ts(TIME_PRED, vec![], 0), ts(TIME_PRED, vec![], 1)])
                .unwrap_err(),
            ModelError::TimeFactCount(2)
        );
    }

    #[test]
    fn constraint_evaluation_with_negative_offset() {
        let mut times = BTreeMap::new();
        times.insert("T".to_string(), 3u64);
        times.insert("U".to_string(), 5u64);
        // T > U - 3  <=>  3 > 2
        assert_eq!(
            Constraint::new("T", Rel::Gt, "U", -3).eval(&times),
            Some(true)
        );
        // T = U - 2
        assert_eq!(
            Constraint::new("T", Rel::Eq, "U", -2).eval(&times),
            Some(true)
        );
        assert_eq!(
            Constraint::new("T", Rel::Ge, "U", 0).eval(&times),
            Some(false)
        );
    }
}
