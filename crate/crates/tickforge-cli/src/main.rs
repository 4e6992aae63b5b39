//! Command-line front door: validate specifications, run simulations, build
//! state graphs, check properties, generate benchmark instances and emit
//! JSON/DOT reports.
//!
//! Exit codes: 0 = success / property holds; 1 = property fails (with a
//! counterexample emitted); 2 = usage or parse error; 3 = exploration budget
//! exhausted.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tickforge_core::checkers::{
    build_graph_with, to_dot, Checker, Outcome, Verdict, DEFAULT_NODE_BUDGET,
};
use tickforge_core::delta::count_bound;
use tickforge_core::engine::{render_trace_text, run_lts, trace_to_json, NonceSource, Policy};
use tickforge_core::generators::{corpus, gen_3sat, gen_drone, Cnf, Dir, DroneParams};
use tickforge_core::syntax::{analyze, parse_spec, SpecModel};
use tickforge_oracle::{oracle_check, OracleProp};

const BUDGET_ENV: &str = "TICKFORGE_NODE_BUDGET";

#[derive(Parser)]
#[command(
    name = "tickforge",
    about = "Timed multiset rewriting: simulate specifications and decide their \
             realizability, survivability, recoverability and reliability properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Property {
    Z,
    S,
    V,
    L,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a specification and print its syntactic bounds as JSON.
    Validate { file: PathBuf },
    /// Decide a property and print the verdict.
    Check {
        file: PathBuf,
        #[arg(long, value_enum)]
        property: Property,
        /// Check the n-time-bounded variant with exactly this many Ticks.
        #[arg(long)]
        ticks: Option<usize>,
        /// Write the verdict JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the explored state graph in Graphviz DOT form.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Cap the graph-construction worker count.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Simulate a lazy-time-sampling run and print the trace.
    Trace {
        file: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Seed for the random step policy.
        #[arg(long, conflicts_with = "policy")]
        seed: Option<u64>,
        /// `first` or `prefer:<rule,rule,...>`.
        #[arg(long)]
        policy: Option<String>,
        /// Also write the structured JSON form to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate benchmark specifications.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run the brute-force reference (for testing and debugging).
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum)]
        property: Property,
        /// Decide the n-time-bounded variant at this tick horizon.
        #[arg(long)]
        horizon: Option<u64>,
        /// State budget for the enumeration.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Drone surveillance scenario on a grid.
    Drone(DroneArgs),
    /// 3-SAT reduction; literals are signed 1-based variable indices.
    Sat {
        /// Clauses like "1,-2,3;2,2,-1" (three literals each).
        #[arg(long)]
        cnf: String,
        /// Generate the universal (bounded-survivability) variant.
        #[arg(long)]
        conp: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write the regression corpus with expected-verdict sidecars.
    Corpus {
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct DroneArgs {
    #[arg(long, default_value_t = 1)]
    x_max: u64,
    #[arg(long, default_value_t = 1)]
    y_max: u64,
    #[arg(long, default_value_t = 2)]
    e_max: u64,
    /// Points of interest, like "0,0;1,1".
    #[arg(long, default_value = "0,0")]
    points: String,
    /// Base station coordinates.
    #[arg(long, default_value = "0,0")]
    base: String,
    /// Maximum picture age before the state is critical.
    #[arg(long, default_value_t = 1)]
    age: u64,
    #[arg(long, default_value_t = 1)]
    drones: u64,
    /// Wind cells, like "0,0,north;1,1,east".
    #[arg(long, default_value = "")]
    wind: String,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn node_budget() -> usize {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_NODE_BUDGET)
}

fn load_spec(path: &PathBuf) -> Result<SpecModel, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_spec(&text).map_err(|diags| {
        let mut out = format!("{} does not parse:", path.display());
        for d in diags {
            out.push_str(&format!("\n  {d}"));
        }
        out
    })
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate { file } => {
            let spec = load_spec(&file)?;
            let stats = analyze(&spec);
            let json = serde_json::json!({
                "m": stats.m,
                "k": stats.k,
                "dmax": stats.dmax,
                "j": stats.j,
                "e": stats.e,
                "balanced": stats.balanced,
                "progressing": stats.progressing,
                "lsigma_bound": count_bound(&stats).to_string(),
                "rules": spec.rules.len(),
                "rules_before_expansion": spec.src_rule_count,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&json).expect("serializable")
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            file,
            property,
            ticks,
            json,
            dot,
            threads,
        } => {
            let spec = load_spec(&file)?;
            let checker = Checker::with_budget(&spec, node_budget()).threads(threads);
            let s0 = &spec.initial;
            let verdict: Verdict = match (property, ticks) {
                (Property::Z, None) => checker.check_z(s0),
                (Property::S, None) => checker.check_s(s0),
                (Property::V, None) => checker.check_v(s0),
                (Property::L, None) => checker.check_l(s0),
                (Property::Z, Some(n)) => checker.check_nz(s0, n),
                (Property::S, Some(n)) => checker.check_ns(s0, n),
                (Property::L, Some(n)) => checker.check_nl(s0, n),
                (Property::V, Some(_)) => {
                    return Err(
                        "recoverability has no bounded variant; for progressing systems it \
                         coincides with reliability — use --property l with --ticks"
                            .into(),
                    )
                }
            }
            .map_err(|e| e.to_string())?;

            let rendered = verdict.to_json();
            if let Some(path) = json {
                fs::write(
                    &path,
                    serde_json::to_string_pretty(&rendered).expect("serializable"),
                )
                .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            if let Some(path) = dot {
                let g = build_graph_with(&spec, s0, true, node_budget(), threads)
                    .map_err(|e| e.to_string())?;
                fs::write(&path, to_dot(&g)).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&rendered).expect("serializable")
            );
            Ok(match verdict.outcome {
                Outcome::Holds => ExitCode::SUCCESS,
                Outcome::Fails => ExitCode::from(1),
                Outcome::Resource => ExitCode::from(3),
            })
        }
        Command::Trace {
            file,
            steps,
            seed,
            policy,
            json,
        } => {
            let spec = load_spec(&file)?;
            let mut pol = match (seed, policy.as_deref()) {
                (Some(s), _) => Policy::random(s),
                (None, Some("first") | None) => Policy::First,
                (None, Some(p)) => match p.strip_prefix("prefer:") {
                    Some(rules) => {
                        Policy::Prefer(rules.split(',').map(|s| s.trim().to_string()).collect())
                    }
                    None => return Err(format!("unknown policy `{p}`")),
                },
            };
            let nonces = NonceSource::new();
            let trace = run_lts(&spec, &spec.initial, &mut pol, steps, &nonces)
                .map_err(|e| e.to_string())?;
            print!("{}", render_trace_text(&trace));
            if let Some(path) = json {
                fs::write(
                    &path,
                    serde_json::to_string_pretty(&trace_to_json(&trace)).expect("serializable"),
                )
                .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen(gen) => run_gen(gen),
        Command::Oracle {
            file,
            property,
            horizon,
            budget,
        } => {
            let spec = load_spec(&file)?;
            let prop = match (property, horizon) {
                (Property::Z, None) => OracleProp::Z,
                (Property::S, None) => OracleProp::S,
                (Property::V, None) => OracleProp::V,
                (Property::L, None) => OracleProp::L,
                (Property::Z, Some(n)) => OracleProp::NZ(n),
                (Property::S, Some(n)) => OracleProp::NS(n),
                (Property::L, Some(n)) => OracleProp::NL(n),
                (Property::V, Some(_)) => {
                    return Err("recoverability has no bounded variant".into())
                }
            };
            let holds =
                oracle_check(&spec, &spec.initial, prop, budget).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::json!({ "property": format!("{property:?}"), "holds": holds })
            );
            Ok(if holds {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn parse_pair(s: &str) -> Result<(u64, u64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `x,y`, found `{s}`"));
    }
    let x = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad coordinate `{}`", parts[0]))?;
    let y = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad coordinate `{}`", parts[1]))?;
    Ok((x, y))
}

fn run_gen(gen: GenCommand) -> Result<ExitCode, String> {
    match gen {
        GenCommand::Drone(args) => {
            let points = args
                .points
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(parse_pair)
                .collect::<Result<Vec<_>, _>>()?;
            let base = parse_pair(&args.base)?;
            let mut wind = Vec::new();
            for w in args.wind.split(';').filter(|s| !s.trim().is_empty()) {
                let parts: Vec<&str> = w.split(',').collect();
                if parts.len() != 3 {
                    return Err(format!("expected `x,y,dir`, found `{w}`"));
                }
                let x = parts[0]
                    .trim()
                    .parse()
                    .map_err(|_| "bad wind coordinate".to_string())?;
                let y = parts[1]
                    .trim()
                    .parse()
                    .map_err(|_| "bad wind coordinate".to_string())?;
                let dir = match parts[2].trim() {
                    "north" => Dir::North,
                    "south" => Dir::South,
                    "east" => Dir::East,
                    "west" => Dir::West,
                    other => return Err(format!("unknown direction `{other}`")),
                };
                wind.push((x, y, dir));
            }
            let params = DroneParams {
                x_max: args.x_max,
                y_max: args.y_max,
                e_max: args.e_max,
                points,
                base,
                m_age: args.age,
                drones: args.drones,
                wind,
                strategy: None,
            };
            let generated = gen_drone(&params).map_err(|e| e.to_string())?;
            fs::write(&args.output, &generated.source)
                .map_err(|e| format!("{}: {e}", args.output.display()))?;
            eprintln!(
                "wrote {} ({} rules)",
                args.output.display(),
                generated.spec.rules.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        GenCommand::Sat { cnf, conp, output } => {
            let mut clauses = Vec::new();
            let mut max_var = 0i64;
            for clause in cnf.split(';').filter(|s| !s.trim().is_empty()) {
                let lits: Vec<i64> = clause
                    .split(',')
                    .map(|l| l.trim().parse().map_err(|_| format!("bad literal `{l}`")))
                    .collect::<Result<Vec<_>, _>>()?;
                if lits.len() != 3 {
                    return Err(format!("clause `{clause}` must have exactly 3 literals"));
                }
                max_var = max_var.max(lits.iter().map(|l| l.abs()).max().unwrap_or(0));
                clauses.push([lits[0], lits[1], lits[2]]);
            }
            let formula = Cnf::new(max_var as usize, clauses);
            let inst = gen_3sat(&formula, conp).map_err(|e| e.to_string())?;
            fs::write(&output, &inst.source).map_err(|e| format!("{}: {e}", output.display()))?;
            eprintln!(
                "wrote {} (bounded checks use --ticks {})",
                output.display(),
                inst.n_ticks
            );
            Ok(ExitCode::SUCCESS)
        }
        GenCommand::Corpus { output } => {
            fs::create_dir_all(&output).map_err(|e| format!("{}: {e}", output.display()))?;
            for entry in corpus() {
                let spec_path = output.join(format!("{}.tmsr", entry.name));
                fs::write(&spec_path, &entry.source)
                    .map_err(|e| format!("{}: {e}", spec_path.display()))?;
                let sidecar = serde_json::json!({
                    "name": entry.name,
                    "progressing": entry.progressing,
                    "expected": entry.expected,
                });
                let json_path = output.join(format!("{}.expected.json", entry.name));
                fs::write(
                    &json_path,
                    serde_json::to_string_pretty(&sidecar).expect("serializable"),
                )
                .map_err(|e| format!("{}: {e}", json_path.display()))?;
            }
            eprintln!("wrote corpus to {}", output.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
