//! End-to-end scenarios wiring the engine, abstraction, checkers and
//! generators together on the benchmark systems.

use num_bigint::BigUint;

use tickforge_core::checkers::{build_graph, CexKind, Checker, Outcome};
use tickforge_core::delta::{abstract_config, count_bound};
use tickforge_core::engine::{enabled_steps, NonceSource};
use tickforge_core::generators::{corpus, gen_drone, DroneParams};
use tickforge_core::model::{Configuration, Fact, Term, TsFact, TIME_PRED};
use tickforge_core::syntax::{analyze, parse_spec};

fn entry(name: &str) -> tickforge_core::generators::CorpusEntry {
    corpus().into_iter().find(|e| e.name == name).unwrap()
}

#[test]
fn graph_of_tdoubleprime_contains_the_doomed_state() {
    let e = entry("Tdoubleprime");
    let g = build_graph(&e.spec, &e.spec.initial, true, 10_000).unwrap();
    let doomed = "[Time |1| C]"; // the configuration {Time@0, C@1}
    assert!(
        (0..g.node_count()).any(|i| g.pool.get(i).render() == doomed),
        "state {doomed} not reached"
    );
}

#[test]
fn pon_examples() {
    // the state {Time@0, C@1} is a point of no return in the branching system
    let e = entry("Tdoubleprime");
    let checker = Checker::new(&e.spec);
    let stats = analyze(&e.spec);
    let doomed = Configuration::new(vec![
        TsFact::new(Fact::time(), 0),
        TsFact::new(Fact::new("C", vec![]), 1),
    ])
    .unwrap();
    let rep = abstract_config(&doomed, stats.dmax).unwrap();
    assert!(checker.is_pon(&rep).unwrap());

    // a critical state is never a point of no return
    let critical = Configuration::new(vec![
        TsFact::new(Fact::time(), 0),
        TsFact::new(Fact::new("D", vec![]), 0),
    ])
    .unwrap();
    let rep = abstract_config(&critical, stats.dmax).unwrap();
    assert!(!checker.is_pon(&rep).unwrap());

    // in the Zeno system, {Time@1, A@1} has no time-divergent continuation
    // yet is not a point of no return: the instantaneous loop is compliant
    let e = entry("Tprime");
    let checker = Checker::new(&e.spec);
    let stats = analyze(&e.spec);
    let zeno = Configuration::new(vec![
        TsFact::new(Fact::time(), 1),
        TsFact::new(Fact::new("A", vec![]), 1),
    ])
    .unwrap();
    let rep = abstract_config(&zeno, stats.dmax).unwrap();
    assert!(!checker.is_pon(&rep).unwrap());
}

#[test]
fn survivability_counterexample_ends_in_the_critical_pair() {
    let e = entry("L_not_S_pts");
    let checker = Checker::new(&e.spec);
    let s = checker.check_s(&e.spec.initial).unwrap();
    assert_eq!(s.outcome, Outcome::Fails);
    assert_eq!(s.cex_kind, Some(CexKind::CriticalReached));
    let cex = s.counterexample.unwrap();
    let report = tickforge_core::checkers::replay_path(&e.spec, &e.spec.initial, &cex).unwrap();
    let last = report.configs.last().unwrap();
    assert_eq!(last.to_string(), "{B@0, Time@0, D@1}");
}

#[test]
fn critical_initial_state_fails_realizability_immediately() {
    let spec = parse_spec(
        r#"
        pred A; pred B;
        init { Time@0, B@0 }
        rule r: Time@T, A@T1 | { T1 <= T } -> Time@T, B@T;
        critical { Time@T | { } }
        "#,
    )
    .unwrap();
    let checker = Checker::new(&spec);
    let z = checker.check_z(&spec.initial).unwrap();
    assert_eq!(z.outcome, Outcome::Fails);
    assert_eq!(z.cex_kind, Some(CexKind::InitialCritical));
    assert_eq!(z.counterexample, Some(vec![]));
}

#[test]
fn bounded_realizability_is_monotone_and_saturates() {
    // Z implies n-Z for every n, and n-Z at n = reachable node count
    // implies Z back
    for e in corpus() {
        let checker = Checker::new(&e.spec);
        let s0 = &e.spec.initial;
        let z = checker.check_z(s0).unwrap().holds();
        if z {
            for n in 0..=4usize {
                assert!(
                    checker.check_nz(s0, n).unwrap().holds(),
                    "{}: Z holds but {n}-Z fails",
                    e.name
                );
            }
        }
        let g = build_graph(&e.spec, s0, true, 100_000).unwrap();
        let saturation = g.node_count();
        if saturation <= 60 {
            let nz = checker.check_nz(s0, saturation).unwrap().holds();
            assert_eq!(
                nz, z,
                "{}: {saturation}-Z differs from Z at saturation",
                e.name
            );
        }
    }
}

#[test]
fn drone_with_one_point_at_base_and_slack_is_realizable() {
    // a single cell grid: the drone alternates clicking and charging
    let g = gen_drone(&DroneParams {
        x_max: 0,
        y_max: 0,
        e_max: 2,
        points: vec![(0, 0)],
        base: (0, 0),
        m_age: 4,
        drones: 1,
        wind: vec![],
        strategy: None,
    })
    .unwrap();
    let checker = Checker::new(&g.spec);
    assert!(checker.check_z(&g.spec.initial).unwrap().holds());
}

#[test]
fn drone_without_drones_cannot_keep_pictures_fresh() {
    let g = gen_drone(&DroneParams {
        drones: 0,
        ..DroneParams::default()
    })
    .unwrap();
    let checker = Checker::new(&g.spec);
    let z = checker.check_z(&g.spec.initial).unwrap();
    assert_eq!(z.outcome, Outcome::Fails);
}

#[test]
fn click_choices_appear_when_a_drone_sits_on_a_stale_point() {
    let g = gen_drone(&DroneParams {
        m_age: 2,
        ..DroneParams::default()
    })
    .unwrap();
    // drone at the point, picture one unit old, full energy
    let config = Configuration::new(vec![
        TsFact::new(Fact::time(), 1),
        TsFact::new(
            Fact::new(
                "Dr",
                vec![
                    Term::Const("d1".into()),
                    Term::Num(0),
                    Term::Num(0),
                    Term::Num(2),
                ],
            ),
            1,
        ),
        TsFact::new(
            Fact::new(
                "P",
                vec![Term::Const("p1".into()), Term::Num(0), Term::Num(0)],
            ),
            0,
        ),
    ])
    .unwrap();
    let nonces = NonceSource::new();
    let steps = enabled_steps(&config, &g.spec, &nonces).unwrap();
    let clicks: Vec<_> = steps
        .iter()
        .filter(|s| s.rule.starts_with("click"))
        .collect();
    assert_eq!(clicks.len(), 1, "exactly one click instance fires");
    // once the picture is fresh (same instant), clicking is impossible
    let fresh = Configuration::new(vec![
        TsFact::new(Fact::time(), 1),
        TsFact::new(
            Fact::new(
                "Dr",
                vec![
                    Term::Const("d1".into()),
                    Term::Num(0),
                    Term::Num(0),
                    Term::Num(2),
                ],
            ),
            1,
        ),
        TsFact::new(
            Fact::new(
                "P",
                vec![Term::Const("p1".into()), Term::Num(0), Term::Num(0)],
            ),
            1,
        ),
    ])
    .unwrap();
    let steps = enabled_steps(&fresh, &g.spec, &nonces).unwrap();
    assert!(steps.iter().all(|s| !s.rule.starts_with("click")));
}

#[test]
fn reachable_representations_stay_under_the_bound_for_tdoubleprime() {
    let e = entry("Tdoubleprime");
    let stats = analyze(&e.spec);
    let g = build_graph(&e.spec, &e.spec.initial, false, 100_000).unwrap();
    assert!(BigUint::from(g.node_count()) <= count_bound(&stats));
}

#[test]
fn wind_moves_drones_without_energy_cost() {
    use tickforge_core::generators::Dir;
    let g = gen_drone(&DroneParams {
        wind: vec![(0, 0, Dir::East)],
        m_age: 2,
        ..DroneParams::default()
    })
    .unwrap();
    assert!(g
        .spec
        .rules
        .iter()
        .any(|r| r.name.starts_with("wind_east_0_0")));
    // the wind rule preserves the energy argument
    let wind = g
        .spec
        .rules
        .iter()
        .find(|r| r.name.starts_with("wind_east"))
        .unwrap();
    assert_eq!(wind.consumed[0].0.args[3], Term::Var("E".into()));
    assert_eq!(wind.created[0].0.args[3], Term::Var("E".into()));
}

#[test]
fn steps_check_out_fact_by_fact() {
    // per-step reverse check across corpus walks: consumed facts are present
    // in the source, created facts in the result, preserved facts in both
    use tickforge_core::engine::{run_lts, Policy};
    for e in corpus() {
        let nonces = NonceSource::new();
        let mut policy = Policy::random(11);
        let trace = run_lts(&e.spec, &e.spec.initial, &mut policy, 25, &nonces).unwrap();
        let m = e.spec.initial.len();
        let mut prev = trace.initial.clone();
        for step in &trace.steps {
            // balanced systems keep the fact count
            assert_eq!(step.config.len(), m, "{}: fact count drifted", e.name);
            if step.rule == tickforge_core::model::TICK_RULE {
                prev = step.config.clone();
                continue;
            }
            let rule = e.spec.rule(&step.rule).unwrap();
            let contains = |c: &Configuration, fact: &Fact, ts: u64| {
                c.facts().iter().any(|f| &f.fact == fact && f.ts == ts)
            };
            for (pat, tv) in &rule.consumed {
                let fact = step.subst.apply_pattern(pat).unwrap();
                assert!(
                    contains(&prev, &fact, step.subst.times[tv]),
                    "{}: consumed fact missing",
                    e.name
                );
            }
            for (pat, delay) in &rule.created {
                let fact = step.subst.apply_pattern(pat).unwrap();
                assert!(
                    contains(&step.config, &fact, prev.global_time() + delay),
                    "{}: created fact missing",
                    e.name
                );
            }
            for (pat, tv) in &rule.preserved {
                let fact = step.subst.apply_pattern(pat).unwrap();
                let ts = step.subst.times[tv];
                assert!(contains(&prev, &fact, ts) && contains(&step.config, &fact, ts));
            }
            prev = step.config.clone();
        }
    }
}

#[test]
fn threaded_graph_construction_is_deterministic() {
    use tickforge_core::checkers::build_graph_with;
    for e in corpus() {
        let a = build_graph_with(&e.spec, &e.spec.initial, true, 100_000, 1).unwrap();
        let b = build_graph_with(&e.spec, &e.spec.initial, true, 100_000, 4).unwrap();
        assert_eq!(a.node_count(), b.node_count(), "{}", e.name);
        assert_eq!(a.edge_count(), b.edge_count(), "{}", e.name);
        for i in 0..a.node_count() {
            assert_eq!(
                a.pool.get(i).render(),
                b.pool.get(i).render(),
                "{}: node {i}",
                e.name
            );
            let ea: Vec<String> = a.edges[i]
                .iter()
                .map(|e| format!("{}->{}", e.label.render(), e.target))
                .collect();
            let eb: Vec<String> = b.edges[i]
                .iter()
                .map(|e| format!("{}->{}", e.label.render(), e.target))
                .collect();
            assert_eq!(ea, eb, "{}: edges of node {i}", e.name);
        }
    }
}

#[test]
fn time_pred_is_the_unique_time_fact() {
    // the Time predicate is reserved and structural
    assert_eq!(TIME_PRED, "Time");
    let err = parse_spec("pred Time; init { Time@0 }").unwrap_err();
    assert!(err.iter().any(|d| d.msg.contains("reserved")));
}
