//! Cross-validation between the graph checkers and the brute-force oracle.

use tickforge_core::checkers::{Checker, Outcome};
use tickforge_core::generators::corpus;
use tickforge_oracle::{oracle_check, OracleProp};

const ORACLE_BUDGET: usize = 200_000;

#[test]
fn corpus_verdicts_match_pinned_tables_and_oracle() {
    for entry in corpus() {
        let checker = Checker::new(&entry.spec);
        let s0 = &entry.spec.initial;
        let z = checker.check_z(s0).unwrap();
        let s = checker.check_s(s0).unwrap();
        let v = checker.check_v(s0).unwrap();
        let l = checker.check_l(s0).unwrap();
        for verdict in [&z, &s, &v, &l] {
            assert_ne!(
                verdict.outcome,
                Outcome::Resource,
                "{}: budget too small",
                entry.name
            );
        }
        if let Some(exp) = entry.expected {
            assert_eq!(z.holds(), exp.z, "{}: Z", entry.name);
            assert_eq!(s.holds(), exp.s, "{}: S", entry.name);
            assert_eq!(v.holds(), exp.v, "{}: V", entry.name);
            assert_eq!(l.holds(), exp.l, "{}: L", entry.name);
        }
        let oz = oracle_check(&entry.spec, s0, OracleProp::Z, ORACLE_BUDGET).unwrap();
        let os = oracle_check(&entry.spec, s0, OracleProp::S, ORACLE_BUDGET).unwrap();
        let ov = oracle_check(&entry.spec, s0, OracleProp::V, ORACLE_BUDGET).unwrap();
        let ol = oracle_check(&entry.spec, s0, OracleProp::L, ORACLE_BUDGET).unwrap();
        assert_eq!(z.holds(), oz, "{}: Z vs oracle", entry.name);
        assert_eq!(s.holds(), os, "{}: S vs oracle", entry.name);
        assert_eq!(v.holds(), ov, "{}: V vs oracle", entry.name);
        assert_eq!(l.holds(), ol, "{}: L vs oracle", entry.name);
    }
}

#[test]
fn corpus_bounded_verdicts_agree_with_oracle() {
    for entry in corpus() {
        let checker = Checker::new(&entry.spec);
        let s0 = &entry.spec.initial;
        for n in 0..=3usize {
            let nz = checker.check_nz(s0, n).unwrap();
            let ns = checker.check_ns(s0, n).unwrap();
            let nl = checker.check_nl(s0, n).unwrap();
            let onz =
                oracle_check(&entry.spec, s0, OracleProp::NZ(n as u64), ORACLE_BUDGET).unwrap();
            let ons =
                oracle_check(&entry.spec, s0, OracleProp::NS(n as u64), ORACLE_BUDGET).unwrap();
            let onl =
                oracle_check(&entry.spec, s0, OracleProp::NL(n as u64), ORACLE_BUDGET).unwrap();
            assert_eq!(nz.holds(), onz, "{}: {n}-Z vs oracle", entry.name);
            assert_eq!(ns.holds(), ons, "{}: {n}-S vs oracle", entry.name);
            assert_eq!(nl.holds(), onl, "{}: {n}-L vs oracle", entry.name);
        }
    }
}
