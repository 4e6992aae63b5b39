//! Random small balanced specifications for the cross-validation campaigns:
//! a seeded generator emitting `.tmsr` source, so every sample also
//! exercises the parser.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tickforge_core::syntax::{parse_spec, SpecModel};

#[derive(Debug, Clone)]
pub struct RandSpec {
    pub source: String,
    pub spec: SpecModel,
}

pub struct RandParams {
    pub progressing: bool,
    pub with_nonces: bool,
    pub with_criticals: bool,
}

impl Default for RandParams {
    fn default() -> Self {
        RandParams {
            progressing: true,
            with_nonces: false,
            with_criticals: true,
        }
    }
}

/// Generate a small balanced specification: at most three nullary predicates
/// plus an optional unary one, at most four initial facts, two to four
/// rules. With `progressing` every rule creates a strictly future fact and
/// the pragma constrains consumed facts to the past or present.
pub fn random_balanced(seed: u64, params: &RandParams) -> RandSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preds = ["A", "B", "C"];
    let n_preds = rng.gen_range(2..=3usize);
    let use_unary = rng.gen_bool(0.3);

    let mut src = String::new();
    if use_unary {
        src.push_str("sort val = { u, w };\n");
        src.push_str("pred Q(val);\n");
    }
    for p in preds.iter().take(n_preds) {
        src.push_str(&format!("pred {p};\n"));
    }
    if params.with_nonces {
        src.push_str("pred N(nonce);\n");
    }

    // initial facts: Time plus 1..=3 others
    let mut init = vec!["Time@0".to_string()];
    let n_init = rng.gen_range(1..=3usize);
    for _ in 0..n_init {
        let ts = rng.gen_range(0..=1u64);
        if use_unary && rng.gen_bool(0.3) {
            let c = if rng.gen_bool(0.5) { "u" } else { "w" };
            init.push(format!("Q({c})@{ts}"));
        } else {
            let p = preds[rng.gen_range(0..n_preds)];
            init.push(format!("{p}@{ts}"));
        }
    }
    src.push_str(&format!("init {{ {} }}\n", init.join(", ")));
    if params.progressing {
        src.push_str("pragma progressing;\n");
    }

    let pick_fact = |rng: &mut ChaCha8Rng, tvar: &str, qvar: Option<&str>| -> (String, bool) {
        if use_unary && rng.gen_bool(0.25) {
            let arg = match qvar {
                Some(v) if rng.gen_bool(0.5) => v.to_string(),
                _ => (if rng.gen_bool(0.5) { "u" } else { "w" }).to_string(),
            };
            (format!("Q({arg})@{tvar}"), true)
        } else {
            let p = preds[rng.gen_range(0..n_preds)];
            (format!("{p}@{tvar}"), false)
        }
    };

    let n_rules = rng.gen_range(2..=4usize);
    for ri in 0..n_rules {
        if params.with_nonces && ri == 0 {
            // one fresh-value rule: consume something, emit a tagged fact
            let p = preds[rng.gen_range(0..n_preds)];
            let d = if params.progressing {
                rng.gen_range(1..=2u64)
            } else {
                rng.gen_range(0..=2)
            };
            src.push_str(&format!(
                "rule fresh{ri}: Time@T, {p}@T1 | {{ T1 <= T }} -> exists X. Time@T, N(X)@(T+{d});\n"
            ));
            continue;
        }
        let n_consumed = rng.gen_range(1..=2usize);
        let n_preserved = rng.gen_range(0..=1usize);
        let mut lhs = Vec::new();
        let mut qvar_bound = false;
        for i in 0..(n_consumed + n_preserved) {
            let tv = format!("T{}", i + 1);
            let qv = if qvar_bound { None } else { Some("X") };
            let (fact, used_q) = pick_fact(&mut rng, &tv, qv);
            if used_q && fact.contains("(X)") {
                qvar_bound = true;
            }
            lhs.push(fact);
        }
        let preserved: Vec<String> = lhs[n_consumed..].to_vec();
        let mut rhs = preserved.clone();
        for i in 0..n_consumed {
            let d = if params.progressing && i == 0 {
                rng.gen_range(1..=2u64)
            } else {
                rng.gen_range(0..=2u64)
            };
            let stamp = if d == 0 {
                "T".to_string()
            } else {
                format!("(T+{d})")
            };
            let qv = if qvar_bound { Some("X") } else { None };
            let (fact, _) = pick_fact(&mut rng, &stamp, qv);
            rhs.push(fact);
        }
        let mut guard: Vec<String> = Vec::new();
        if !params.progressing {
            // without the pragma, guard roughly half of the consumed facts
            for i in 0..n_consumed {
                if rng.gen_bool(0.5) {
                    guard.push(format!("T{} <= T", i + 1));
                }
            }
        }
        if rng.gen_bool(0.3) {
            let d = rng.gen_range(0..=2u64);
            guard.push(format!("T > T1 + {d}"));
        }
        src.push_str(&format!(
            "rule r{ri}: Time@T, {} | {{ {} }} -> Time@T, {};\n",
            lhs.join(", "),
            guard.join(", "),
            rhs.join(", ")
        ));
    }

    if params.with_criticals {
        let n_crit = rng.gen_range(0..=2usize);
        for _ in 0..n_crit {
            let p = preds[rng.gen_range(0..n_preds)];
            if rng.gen_bool(0.5) {
                src.push_str(&format!("critical {{ {p}@T1 | {{ }} }}\n"));
            } else {
                let d = rng.gen_range(0..=2u64);
                src.push_str(&format!(
                    "critical {{ {p}@T1, Time@T | {{ T > T1 + {d} }} }}\n"
                ));
            }
        }
    }

    let spec = parse_spec(&src).unwrap_or_else(|e| {
        panic!("random spec (seed {seed}) failed to parse: {e:?}\n{src}");
    });
    RandSpec { source: src, spec }
}
