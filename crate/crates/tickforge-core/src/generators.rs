//! Generators for the benchmark systems: the drone surveillance scenario,
//! the 3-SAT reductions (existential and universal variants), and the small
//! corpus of hand-picked systems whose property verdicts are known and used
//! as regression anchors.
//!
//! Every generator emits `.tmsr` source text and parses it back, so the
//! parser is the single source of rule semantics.

use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::{parse_spec, SpecModel};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("generated specification failed to parse: {0:?}")]
    Parse(Vec<crate::syntax::Diagnostic>),
}

fn parse_generated(source: String) -> Result<Generated, GenError> {
    match parse_spec(&source) {
        Ok(spec) => Ok(Generated { source, spec }),
        Err(d) => Err(GenError::Parse(d)),
    }
}

/// A generated specification: the `.tmsr` source and its parsed model.
#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    pub spec: SpecModel,
}

// ---------------------------------------------------------------------------
// Drone scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    North,
    South,
    East,
    West,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::North, Dir::South, Dir::East, Dir::West];

    pub fn name(&self) -> &'static str {
        match self {
            Dir::North => "north",
            Dir::South => "south",
            Dir::East => "east",
            Dir::West => "west",
        }
    }
}

/// Context handed to a strategy filter when deciding whether a ground move
/// instance is emitted.
#[derive(Debug, Clone)]
pub struct MoveCtx<'a> {
    pub dir: Dir,
    /// position before the move
    pub from: (u64, u64),
    /// energy before the move
    pub energy: u64,
    /// elapsed time since each point's last picture
    pub ages: &'a [u64],
}

#[derive(Clone)]
pub struct DroneParams<'a> {
    pub x_max: u64,
    pub y_max: u64,
    pub e_max: u64,
    pub points: Vec<(u64, u64)>,
    pub base: (u64, u64),
    /// pictures older than this are critical
    pub m_age: u64,
    pub drones: u64,
    /// wind cells: a drone standing there is blown one cell in the direction
    pub wind: Vec<(u64, u64, Dir)>,
    /// per-instance move filter; `None` allows every direction everywhere
    pub strategy: Option<&'a dyn Fn(&MoveCtx) -> bool>,
}

impl Default for DroneParams<'_> {
    fn default() -> Self {
        DroneParams {
            x_max: 1,
            y_max: 1,
            e_max: 2,
            points: vec![(0, 0)],
            base: (0, 0),
            m_age: 1,
            drones: 1,
            wind: vec![],
            strategy: None,
        }
    }
}

/// Enumerate all age vectors with entries in `0..=m`.
fn age_vectors(n: usize, m: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut nxt = Vec::new();
        for v in &out {
            for a in 0..=m {
                let mut w = v.clone();
                w.push(a);
                nxt.push(w);
            }
        }
        out = nxt;
    }
    out
}

/// Generate the drone surveillance system: drones move on a grid, consume
/// one energy per move or picture, recharge at the base, and must keep every
/// point's last picture at most `m_age` time units old. Strategy constraints
/// fix the elapsed picture ages a rule instance applies at, one instance per
/// age vector, so the move rules are expanded to ground strategy rules and
/// the realizability search does the strategizing.
pub fn gen_drone(p: &DroneParams) -> Result<Generated, GenError> {
    if p.e_max < 1 {
        return Err(GenError::Invalid("e_max must be at least 1".into()));
    }
    if p.m_age < 1 {
        return Err(GenError::Invalid("m_age must be at least 1".into()));
    }
    if p.points.is_empty() {
        return Err(GenError::Invalid("at least one point of interest".into()));
    }
    for &(x, y) in &p.points {
        if x > p.x_max || y > p.y_max {
            return Err(GenError::Invalid(format!(
                "point ({x},{y}) outside the grid"
            )));
        }
    }
    if p.base.0 > p.x_max || p.base.1 > p.y_max {
        return Err(GenError::Invalid("base outside the grid".into()));
    }
    for &(x, y, d) in &p.wind {
        let ok = match d {
            Dir::North => y < p.y_max,
            Dir::South => y > 0,
            Dir::East => x < p.x_max,
            Dir::West => x > 0,
        };
        if x > p.x_max || y > p.y_max || !ok {
            return Err(GenError::Invalid(format!(
                "wind at ({x},{y}) towards {} leaves the grid",
                d.name()
            )));
        }
    }

    let n = p.points.len();
    let mut src = String::new();
    let _ = writeln!(src, "sort coordx = 0..{};", p.x_max);
    let _ = writeln!(src, "sort coordy = 0..{};", p.y_max);
    let _ = writeln!(src, "sort energy = 0..{};", p.e_max);
    if p.drones > 0 {
        let ids: Vec<String> = (1..=p.drones).map(|i| format!("d{i}")).collect();
        let _ = writeln!(src, "sort droneid = {{ {} }};", ids.join(", "));
    }
    let pids: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    let _ = writeln!(src, "sort pointid = {{ {} }};", pids.join(", "));
    if p.drones > 0 {
        let _ = writeln!(src, "pred Dr(droneid, coordx, coordy, energy);");
    }
    let _ = writeln!(src, "pred P(pointid, coordx, coordy);");

    let mut init = vec!["Time@0".to_string()];
    for i in 1..=p.drones {
        init.push(format!(
            "Dr(d{i},{},{},{})@0",
            p.base.0,
            p.base.1,
            p.e_max - 1
        ));
    }
    for (i, &(x, y)) in p.points.iter().enumerate() {
        init.push(format!("P(p{},{},{})@0", i + 1, x, y));
    }
    let _ = writeln!(src, "init {{ {} }}", init.join(", "));
    let _ = writeln!(src, "pragma progressing;");

    // preserved picture facts P(p1,..)@T1, ..., P(pn,..)@Tn
    let pictures: Vec<String> = p
        .points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| format!("P(p{},{},{})@T{}", i + 1, x, y, i + 1))
        .collect();
    let strategy_guard = |ages: &[u64]| -> Vec<String> {
        ages.iter()
            .enumerate()
            .map(|(i, a)| format!("T = T{} + {}", i + 1, a))
            .collect()
    };

    if p.drones > 0 {
        let vectors = age_vectors(n, p.m_age);
        let mut emit_move = |dir: Dir, from: (u64, u64), to: (u64, u64)| {
            for e in 0..p.e_max {
                for ages in &vectors {
                    let allowed = match &p.strategy {
                        None => true,
                        Some(f) => f(&MoveCtx {
                            dir,
                            from,
                            energy: e + 1,
                            ages,
                        }),
                    };
                    if !allowed {
                        continue;
                    }
                    let name = format!(
                        "mv_{}_{}_{}_{}_{}",
                        dir.name(),
                        from.0,
                        from.1,
                        e,
                        ages.iter()
                            .map(|a| a.to_string())
                            .collect::<Vec<_>>()
                            .join("_")
                    );
                    let _ = writeln!(
                        src,
                        "rule {name}: Time@T, {}, Dr(Id,{},{},{})@T | {{ {} }} -> Time@T, {}, Dr(Id,{},{},{})@(T+1);",
                        pictures.join(", "),
                        from.0,
                        from.1,
                        e + 1,
                        strategy_guard(ages).join(", "),
                        pictures.join(", "),
                        to.0,
                        to.1,
                        e,
                    );
                }
            }
        };
        for x in 0..=p.x_max {
            for y in 0..=p.y_max {
                if y < p.y_max {
                    emit_move(Dir::North, (x, y), (x, y + 1));
                    emit_move(Dir::South, (x, y + 1), (x, y));
                }
                if x < p.x_max {
                    emit_move(Dir::East, (x, y), (x + 1, y));
                    emit_move(Dir::West, (x + 1, y), (x, y));
                }
            }
        }

        // charge: only at the base, gains one energy unit
        for ages in &vectors {
            let name = format!(
                "charge_{}",
                ages.iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join("_")
            );
            let _ = writeln!(
                src,
                "rule {name}[e in 0..{}]: Time@T, {}, Dr(Id,{},{},e)@T | {{ {} }} -> Time@T, {}, Dr(Id,{},{},e+1)@(T+1);",
                p.e_max - 1,
                pictures.join(", "),
                p.base.0,
                p.base.1,
                strategy_guard(ages).join(", "),
                pictures.join(", "),
                p.base.0,
                p.base.1,
            );
        }

        // click: refresh the co-located point's picture, costs one energy
        for (i, &(px, py)) in p.points.iter().enumerate() {
            let others: Vec<String> = pictures
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s.clone())
                .collect();
            let lhs_pics = {
                let mut v = others.clone();
                v.insert(
                    i.min(v.len()),
                    format!("P(p{},{},{})@T{}", i + 1, px, py, i + 1),
                );
                v
            };
            let rhs_pics = {
                let mut v = others;
                v.insert(i.min(v.len()), format!("P(p{},{},{})@T", i + 1, px, py));
                v
            };
            for ages in &vectors {
                if ages[i] == 0 {
                    continue; // the same point cannot be photographed twice at one instant
                }
                let name = format!(
                    "click_p{}_{}",
                    i + 1,
                    ages.iter()
                        .map(|a| a.to_string())
                        .collect::<Vec<_>>()
                        .join("_")
                );
                let mut guard = strategy_guard(ages);
                guard.push(format!("T{} < T", i + 1));
                let _ = writeln!(
                    src,
                    "rule {name}[e in 0..{}]: Time@T, {}, Dr(Id,{},{},e+1)@T | {{ {} }} -> Time@T, {}, Dr(Id,{},{},e)@(T+1);",
                    p.e_max - 1,
                    lhs_pics.join(", "),
                    px,
                    py,
                    guard.join(", "),
                    rhs_pics.join(", "),
                    px,
                    py,
                );
            }
        }

        // wind: moves the drone without energy cost
        for &(x, y, d) in &p.wind {
            let (tx, ty) = match d {
                Dir::North => (x, y + 1),
                Dir::South => (x, y - 1),
                Dir::East => (x + 1, y),
                Dir::West => (x - 1, y),
            };
            let _ = writeln!(
                src,
                "rule wind_{}_{}_{}: Time@T, Dr(Id,{},{},E)@T | {{ }} -> Time@T, Dr(Id,{},{},E)@(T+1);",
                d.name(),
                x,
                y,
                x,
                y,
                tx,
                ty,
            );
        }

        let _ = writeln!(src, "critical {{ Dr(Id,X,Y,0)@T | {{ }} }}");
    }
    for (i, &(px, py)) in p.points.iter().enumerate() {
        let _ = writeln!(
            src,
            "critical {{ P(p{},{},{})@T1, Time@T | {{ T > T1 + {} }} }}",
            i + 1,
            px,
            py,
            p.m_age
        );
    }
    parse_generated(src)
}

// ---------------------------------------------------------------------------
// 3-SAT reduction
// ---------------------------------------------------------------------------

/// A literal: positive or negative 1-based variable index.
pub type Lit = i64;

#[derive(Debug, Clone)]
pub struct Cnf {
    pub vars: usize,
    pub clauses: Vec<[Lit; 3]>,
}

impl Cnf {
    pub fn new(vars: usize, clauses: Vec<[Lit; 3]>) -> Self {
        Cnf { vars, clauses }
    }

    /// Truth-table satisfiability; the reference all checkers are compared to.
    pub fn satisfiable(&self) -> bool {
        (0..1u64 << self.vars).any(|bits| self.satisfied_by(bits))
    }

    pub fn satisfied_by(&self, bits: u64) -> bool {
        self.clauses.iter().all(|cl| {
            cl.iter().any(|&l| {
                let v = l.unsigned_abs() as usize - 1;
                let val = bits >> v & 1 == 1;
                if l > 0 {
                    val
                } else {
                    !val
                }
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct SatInstance {
    pub source: String,
    pub spec: SpecModel,
    /// tick budget for the bounded checks: twice the clause count
    pub n_ticks: usize,
}

/// Encode a 3-CNF formula. The truth values are guessed during the first
/// time unit and the clauses are erased left to right, one per subsequent
/// time unit, while the formula holds.
///
/// In the existential variant a clause fact that survives past its scheduled
/// erasure step is critical, so a compliant trace with 2*(#clauses) ticks
/// exists exactly when the formula is satisfiable. The universal variant
/// instead declares the fully-erased formula fact critical and adds a dummy
/// chain keeping the system busy, so bounded survivability holds exactly
/// when the formula is unsatisfiable.
pub fn gen_3sat(cnf: &Cnf, conp_variant: bool) -> Result<SatInstance, GenError> {
    if cnf.vars == 0 || cnf.vars > 63 {
        return Err(GenError::Invalid("variable count must be in 1..=63".into()));
    }
    if cnf.clauses.is_empty() {
        return Err(GenError::Invalid("at least one clause".into()));
    }
    for cl in &cnf.clauses {
        for &l in cl {
            if l == 0 || l.unsigned_abs() as usize > cnf.vars {
                return Err(GenError::Invalid(format!("literal {l} out of range")));
            }
        }
    }
    let p = cnf.vars;
    let c = cnf.clauses.len();

    let mut src = String::new();
    for i in 1..=p {
        let _ = writeln!(src, "pred V{i}; pred A{i}_0; pred A{i}_1;");
    }
    for j in 0..=c {
        let _ = writeln!(src, "pred I{j};");
    }
    if conp_variant {
        for j in 0..=2 * c + 1 {
            let _ = writeln!(src, "pred H{j};");
        }
    }
    let mut init: Vec<String> = vec!["Time@0".into()];
    for i in 1..=p {
        init.push(format!("V{i}@0"));
    }
    init.push("I0@0".into());
    if conp_variant {
        init.push("H0@0".into());
    }
    let _ = writeln!(src, "init {{ {} }}", init.join(", "));
    let _ = writeln!(src, "pragma progressing;");

    for i in 1..=p {
        let _ = writeln!(
            src,
            "rule set1_{i}: Time@T, V{i}@T1 | {{ T1 <= T }} -> Time@T, A{i}_1@(T+1);"
        );
        let _ = writeln!(
            src,
            "rule set0_{i}: Time@T, V{i}@T1 | {{ T1 <= T }} -> Time@T, A{i}_0@(T+1);"
        );
    }
    for (j, clause) in cnf.clauses.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        for &l in clause {
            if !seen.insert(l) {
                continue; // repeated literal: one erase rule suffices
            }
            let var = l.unsigned_abs();
            let pol = if l > 0 { 1 } else { 0 };
            let _ = writeln!(
                src,
                "rule sat{}_{}{}: Time@T, A{}_{}@T1, I{}@T2 | {{ T1 <= T, T2 <= T }} -> Time@T, A{}_{}@T1, I{}@(T+1);",
                j,
                if l > 0 { "p" } else { "n" },
                var,
                var,
                pol,
                j,
                var,
                pol,
                j + 1,
            );
        }
    }
    if conp_variant {
        for j in 0..=2 * c {
            let _ = writeln!(
                src,
                "rule dummy{j}: Time@T, H{j}@T1 | {{ T1 <= T }} -> Time@T, H{}@(T+1);",
                j + 1
            );
        }
        let _ = writeln!(src, "critical {{ I{c}@T | {{ }} }}");
    } else {
        // erasure deadlines: holding clause j unerased one step past its
        // schedule is critical
        for j in 0..c {
            let _ = writeln!(src, "critical {{ I{j}@T1, Time@T | {{ T > T1 + 1 }} }}");
        }
    }
    let generated = parse_generated(src)?;
    Ok(SatInstance {
        source: generated.source,
        spec: generated.spec,
        n_ticks: 2 * c,
    })
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

/// Expected property verdicts for a corpus entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ExpectedVerdicts {
    pub z: bool,
    pub s: bool,
    pub v: bool,
    pub l: bool,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: String,
    pub spec: SpecModel,
    /// pinned expected verdicts; entries without a pinned table are
    /// cross-checked against the brute-force reference instead
    pub expected: Option<ExpectedVerdicts>,
    pub progressing: bool,
}

const TPRIME: &str = r#"
pred A; pred B; pred C; pred D;
init { Time@0, C@1 }
rule mk_d: Time@T, C@T1 | { T1 <= T } -> Time@T, D@T;
rule mk_a: Time@T, C@T1 | { T1 <= T } -> Time@T, A@T;
rule a_to_b: Time@T, A@T1 -> Time@T, B@T;
rule b_to_a: Time@T, B@T1 -> Time@T, A@T;
"#;

const L_NOT_S: &str = r#"
pred A; pred B; pred C; pred D;
init { Time@0, A@0, B@0 }
pragma progressing;
rule mk_c: Time@T, A@T1, B@T2 | { T1 <= T, T2 <= T } -> Time@T, B@T2, C@(T+1);
rule mk_d: Time@T, A@T1, B@T2 | { T1 <= T, T2 <= T } -> Time@T, B@T2, D@(T+1);
rule regen: Time@T, B@T1, C@T2 | { T1 <= T, T2 <= T } -> Time@T, A@T, B@(T+1);
critical { B@T1, D@T2 | { } }
"#;

const TDOUBLEPRIME: &str = r#"
pred A; pred B; pred C; pred D;
init { Time@0, A@0 }
pragma progressing;
rule a_to_b: Time@T, A@T1 | { T1 <= T } -> Time@T, B@(T+1);
rule a_to_c: Time@T, A@T1 | { T1 <= T } -> Time@T, C@(T+1);
rule b_to_a: Time@T, B@T1 | { T1 <= T } -> Time@T, A@(T+1);
rule c_to_d: Time@T, C@T1 | { T1 <= T } -> Time@T, D@(T+1);
critical { D@T1 | { } }
"#;

/// The regression corpus: three hand-written systems with pinned verdict
/// tables, a small drone instance and the two SAT demo encodings.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut entries = Vec::new();

    let tprime = parse_spec(TPRIME).expect("corpus system parses");
    entries.push(CorpusEntry {
        name: "Tprime",
        source: TPRIME.trim_start().to_string(),
        spec: tprime,
        expected: Some(ExpectedVerdicts {
            z: true,
            s: true,
            v: true,
            l: false,
        }),
        progressing: false,
    });

    let l_not_s = parse_spec(L_NOT_S).expect("corpus system parses");
    entries.push(CorpusEntry {
        name: "L_not_S_pts",
        source: L_NOT_S.trim_start().to_string(),
        spec: l_not_s,
        expected: Some(ExpectedVerdicts {
            z: true,
            s: false,
            v: true,
            l: true,
        }),
        progressing: true,
    });

    let tdp = parse_spec(TDOUBLEPRIME).expect("corpus system parses");
    entries.push(CorpusEntry {
        name: "Tdoubleprime",
        source: TDOUBLEPRIME.trim_start().to_string(),
        spec: tdp,
        expected: Some(ExpectedVerdicts {
            z: true,
            s: false,
            v: false,
            l: false,
        }),
        progressing: true,
    });

    let drone = gen_drone(&DroneParams {
        m_age: 2,
        ..DroneParams::default()
    })
    .expect("corpus drone generates");
    entries.push(CorpusEntry {
        name: "drone_2x2",
        source: drone.source,
        spec: drone.spec,
        expected: None,
        progressing: true,
    });

    let demo = Cnf::new(2, vec![[1, -2, -2], [-1, 2, 2]]);
    let np = gen_3sat(&demo, false).expect("sat demo generates");
    entries.push(CorpusEntry {
        name: "sat_np_demo",
        source: np.source,
        spec: np.spec,
        expected: None,
        progressing: true,
    });
    let conp = gen_3sat(&demo, true).expect("sat demo generates");
    entries.push(CorpusEntry {
        name: "sat_conp_demo",
        source: conp.source,
        spec: conp.spec,
        expected: None,
        progressing: true,
    });

    entries
}
