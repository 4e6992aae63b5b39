//! Property checkers over the finite delta-state graph: realizability (Z),
//! survivability (S), recoverability (V) and reliability (L), plus their
//! n-time-bounded forms on a tick-layered graph.
//!
//! The graph is the closure of the initial representation under abstract
//! steps with the lazy-time-sampling gate: a node either has exactly one
//! Tick edge (when no instantaneous instance applies) or all its
//! instantaneous edges, never both. Loop-existence questions are decided by
//! SCC analysis on the reachable subgraph rather than by iterating to the
//! representation-count bound, which is astronomically large even for toy
//! systems; the bound is still computed and reported as the certificate.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::delta::{
    abstract_config, count_bound, delta_critical, delta_enabled, delta_tick, materialize,
    DeltaError, DeltaPool, DeltaRep,
};
use crate::engine::{apply_rule, must_tick, EngineError, NonceSource};
use crate::model::{is_critical, unify_timed, Configuration, Substitution, TICK_RULE};
use crate::syntax::{analyze, SpecModel, SpecStats};

/// Default exploration budget; override per checker or with
/// `TICKFORGE_NODE_BUDGET` in the CLI.
pub const DEFAULT_NODE_BUDGET: usize = 5_000_000;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("specification is not balanced; the abstract state count is unbounded")]
    NotBalanced,
    #[error(transparent)]
    Delta(#[from] DeltaError),
}

/// Label on a graph edge; carries enough to replay the step concretely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeLabel {
    Tick,
    Apply { rule: String, matched: Vec<usize> },
}

impl EdgeLabel {
    pub fn render(&self) -> String {
        match self {
            EdgeLabel::Tick => TICK_RULE.to_string(),
            EdgeLabel::Apply { rule, matched } => {
                let idx: Vec<String> = matched.iter().map(|i| i.to_string()).collect();
                format!("{}@[{}]", rule, idx.join(","))
            }
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            EdgeLabel::Tick => json!("tick"),
            EdgeLabel::Apply { rule, matched } => json!({ "rule": rule, "matched": matched }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub target: usize,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NodeInfo {
    pub critical: bool,
    pub must_tick: bool,
}

/// Reachable delta-state graph under the lazy time sampling.
pub struct DeltaGraph {
    pub pool: DeltaPool,
    pub info: Vec<NodeInfo>,
    pub edges: Vec<Vec<Edge>>,
    pub root: usize,
    pub exhausted: bool,
}

impl DeltaGraph {
    pub fn node_count(&self) -> usize {
        self.pool.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }
}

/// Breadth-first closure from the abstraction of `s0`. With
/// `restrict_compliant` set, critical nodes are recorded but not expanded
/// (they become frontier sinks), so the graph carries exactly the states
/// reachable on compliant prefixes plus the first critical hit on each path.
pub fn build_graph(
    spec: &SpecModel,
    s0: &Configuration,
    restrict_compliant: bool,
    node_budget: usize,
) -> Result<DeltaGraph, CheckError> {
    build_graph_with(spec, s0, restrict_compliant, node_budget, 1)
}

/// Successor bundle for one expanded node.
enum Expansion {
    MustTick(DeltaRep),
    Steps(Vec<crate::delta::AbstractStep>),
    Sink,
}

fn expand_node(
    spec: &SpecModel,
    rep: &DeltaRep,
    critical: bool,
    restrict_compliant: bool,
) -> Result<Expansion, CheckError> {
    if critical && restrict_compliant {
        return Ok(Expansion::Sink);
    }
    let steps = delta_enabled(rep, spec)?;
    if steps.is_empty() {
        Ok(Expansion::MustTick(delta_tick(rep)?))
    } else {
        Ok(Expansion::Steps(steps))
    }
}

/// As [`build_graph`], fanning node expansion out over `threads` workers.
/// Expansion is pure, insertion stays sequential in frontier order, so the
/// resulting graph (node ids included) is identical to the single-threaded
/// one.
pub fn build_graph_with(
    spec: &SpecModel,
    s0: &Configuration,
    restrict_compliant: bool,
    node_budget: usize,
    threads: usize,
) -> Result<DeltaGraph, CheckError> {
    let stats = analyze(spec);
    if !stats.balanced {
        return Err(CheckError::NotBalanced);
    }
    let dmax = stats.dmax;
    let mut pool = DeltaPool::new();
    let (root, _) = pool.intern(abstract_config(s0, dmax)?);
    let mut info: Vec<NodeInfo> = vec![NodeInfo {
        critical: delta_critical(pool.get(root), &spec.critical),
        must_tick: false,
    }];
    let mut edges: Vec<Vec<Edge>> = vec![Vec::new()];
    let mut frontier: Vec<usize> = vec![root];
    let mut exhausted = false;
    let threads = threads.max(1);

    while !frontier.is_empty() {
        if pool.len() > node_budget {
            exhausted = true;
            break;
        }
        // expand the whole frontier (in parallel when asked to)
        let expansions: Vec<Result<Expansion, CheckError>> = if threads == 1 || frontier.len() < 2 {
            frontier
                .iter()
                .map(|&id| expand_node(spec, pool.get(id), info[id].critical, restrict_compliant))
                .collect()
        } else {
            let jobs: Vec<(DeltaRep, bool)> = frontier
                .iter()
                .map(|&id| (pool.get(id).clone(), info[id].critical))
                .collect();
            let chunk = jobs.len().div_ceil(threads);
            let mut results: Vec<Vec<Result<Expansion, CheckError>>> = Vec::new();
            std::thread::scope(|scope| {
                let handles: Vec<_> = jobs
                    .chunks(chunk)
                    .map(|part| {
                        scope.spawn(move || {
                            part.iter()
                                .map(|(rep, critical)| {
                                    expand_node(spec, rep, *critical, restrict_compliant)
                                })
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    results.push(h.join().expect("expansion worker"));
                }
            });
            results.into_iter().flatten().collect()
        };

        let mut next_frontier = Vec::new();
        for (&id, expansion) in frontier.iter().zip(expansions) {
            let add = |pool: &mut DeltaPool,
                       info: &mut Vec<NodeInfo>,
                       edges: &mut Vec<Vec<Edge>>,
                       next: &mut Vec<usize>,
                       rep: DeltaRep,
                       label: EdgeLabel| {
                let (tid, fresh) = pool.intern(rep);
                if fresh {
                    info.push(NodeInfo {
                        critical: delta_critical(pool.get(tid), &spec.critical),
                        must_tick: false,
                    });
                    edges.push(Vec::new());
                    next.push(tid);
                }
                edges[id].push(Edge { target: tid, label });
            };
            match expansion? {
                Expansion::Sink => {}
                Expansion::MustTick(target) => {
                    info[id].must_tick = true;
                    add(
                        &mut pool,
                        &mut info,
                        &mut edges,
                        &mut next_frontier,
                        target,
                        EdgeLabel::Tick,
                    );
                }
                Expansion::Steps(steps) => {
                    for step in steps {
                        let label = EdgeLabel::Apply {
                            rule: step.rule,
                            matched: step.matched,
                        };
                        add(
                            &mut pool,
                            &mut info,
                            &mut edges,
                            &mut next_frontier,
                            step.target,
                            label,
                        );
                    }
                }
            }
        }
        frontier = next_frontier;
    }
    Ok(DeltaGraph {
        pool,
        info,
        edges,
        root,
        exhausted,
    })
}

// ---------------------------------------------------------------------------
// Graph analyses
// ---------------------------------------------------------------------------

const UNSEEN: usize = usize::MAX;

/// SCC decomposition of the subgraph of non-critical nodes.
struct SccInfo {
    comp: Vec<usize>,
    /// component contains an internal edge (self-loop or size > 1)
    cyclic: Vec<bool>,
    /// component contains an internal Tick edge
    tick_cyclic: Vec<bool>,
}

fn compliant_scc(g: &DeltaGraph) -> SccInfo {
    let n = g.pool.len();
    let usable = |v: usize| !g.info[v].critical;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut comp = vec![UNSEEN; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comp_count = 0usize;

    for start in 0..n {
        if !usable(start) || index[start] != UNSEEN {
            continue;
        }
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&(v, ei)) = call.last() {
            let mut cursor = ei;
            let mut child = None;
            while cursor < g.edges[v].len() {
                let w = g.edges[v][cursor].target;
                cursor += 1;
                if !usable(w) {
                    continue;
                }
                if index[w] == UNSEEN {
                    child = Some(w);
                    break;
                }
                if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            call.last_mut().expect("frame").1 = cursor;
            if let Some(w) = child {
                index[w] = next_index;
                low[w] = next_index;
                next_index += 1;
                stack.push(w);
                on_stack[w] = true;
                call.push((w, 0));
                continue;
            }
            call.pop();
            if let Some(&(p, _)) = call.last() {
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("scc stack");
                    on_stack[w] = false;
                    comp[w] = comp_count;
                    if w == v {
                        break;
                    }
                }
                comp_count += 1;
            }
        }
    }

    let mut comp_size = vec![0usize; comp_count];
    for v in 0..n {
        if usable(v) && comp[v] != UNSEEN {
            comp_size[comp[v]] += 1;
        }
    }
    let mut cyclic = vec![false; comp_count];
    let mut tick_cyclic = vec![false; comp_count];
    for v in 0..n {
        if !usable(v) || comp[v] == UNSEEN {
            continue;
        }
        for e in &g.edges[v] {
            if usable(e.target)
                && comp[e.target] == comp[v]
                && (comp_size[comp[v]] > 1 || e.target == v)
            {
                cyclic[comp[v]] = true;
                if e.label == EdgeLabel::Tick {
                    tick_cyclic[comp[v]] = true;
                }
            }
        }
    }
    SccInfo {
        comp,
        cyclic,
        tick_cyclic,
    }
}

/// Backward closure over non-critical nodes from a seed set.
fn backward_closure(g: &DeltaGraph, seed: &[bool]) -> Vec<bool> {
    let n = g.pool.len();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        if g.info[v].critical {
            continue;
        }
        for e in &g.edges[v] {
            if !g.info[e.target].critical {
                rev[e.target].push(v);
            }
        }
    }
    let mut out = seed.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| out[v]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &rev[v] {
            if !out[u] {
                out[u] = true;
                queue.push_back(u);
            }
        }
    }
    out
}

/// Shortest path from `from` to a goal node. Paths extend only through
/// non-critical nodes; the goal itself may be critical (counterexamples end
/// at the critical witness). Returns the edge labels and the goal node.
fn bfs_path(
    g: &DeltaGraph,
    from: usize,
    goal: impl Fn(usize) -> bool,
) -> Option<(Vec<EdgeLabel>, usize)> {
    if goal(from) {
        return Some((vec![], from));
    }
    let n = g.pool.len();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(v) = queue.pop_front() {
        if g.info[v].critical {
            continue;
        }
        for (ei, e) in g.edges[v].iter().enumerate() {
            if seen[e.target] {
                continue;
            }
            seen[e.target] = true;
            parent[e.target] = Some((v, ei));
            if goal(e.target) {
                let mut labels = Vec::new();
                let mut cur = e.target;
                while let Some((p, pe)) = parent[cur] {
                    labels.push(g.edges[p][pe].label.clone());
                    cur = p;
                }
                labels.reverse();
                return Some((labels, e.target));
            }
            queue.push_back(e.target);
        }
    }
    None
}

/// A cycle through at least one Tick edge inside `entry`'s SCC, starting and
/// ending at `entry`.
fn tick_cycle_in_scc(g: &DeltaGraph, scc: &SccInfo, entry: usize) -> Option<Vec<EdgeLabel>> {
    let cid = scc.comp[entry];
    let in_comp = |v: usize| !g.info[v].critical && scc.comp[v] == cid;
    let mut tick_edge = None;
    'outer: for u in 0..g.pool.len() {
        if !in_comp(u) {
            continue;
        }
        for e in &g.edges[u] {
            if e.label == EdgeLabel::Tick && in_comp(e.target) {
                tick_edge = Some((u, e.target));
                break 'outer;
            }
        }
    }
    let (u, v) = tick_edge?;
    let path_in_comp = |from: usize, to: usize| -> Option<Vec<EdgeLabel>> {
        if from == to {
            return Some(vec![]);
        }
        let n = g.pool.len();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        seen[from] = true;
        queue.push_back(from);
        while let Some(x) = queue.pop_front() {
            for (ei, e) in g.edges[x].iter().enumerate() {
                if !in_comp(e.target) || seen[e.target] {
                    continue;
                }
                seen[e.target] = true;
                parent[e.target] = Some((x, ei));
                if e.target == to {
                    let mut labels = Vec::new();
                    let mut cur = to;
                    while let Some((p, pe)) = parent[cur] {
                        labels.push(g.edges[p][pe].label.clone());
                        cur = p;
                    }
                    labels.reverse();
                    return Some(labels);
                }
                queue.push_back(e.target);
            }
        }
        None
    };
    let mut cycle = path_in_comp(entry, u)?;
    cycle.push(EdgeLabel::Tick);
    cycle.extend(path_in_comp(v, entry)?);
    Some(cycle)
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Holds,
    Fails,
    Resource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexKind {
    InitialCritical,
    CriticalReached,
    PonReached,
    StuckPrefix,
    NoCompletion,
}

impl CexKind {
    fn name(&self) -> &'static str {
        match self {
            CexKind::InitialCritical => "initial-critical",
            CexKind::CriticalReached => "critical-reached",
            CexKind::PonReached => "point-of-no-return-reached",
            CexKind::StuckPrefix => "stuck-prefix",
            CexKind::NoCompletion => "no-completion",
        }
    }
}

/// A lasso (stem plus repeatable cycle); an empty cycle denotes a plain
/// finite-trace witness for the bounded properties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub stem: Vec<EdgeLabel>,
    pub cycle: Vec<EdgeLabel>,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub property: String,
    pub outcome: Outcome,
    pub witness: Option<Witness>,
    pub counterexample: Option<Vec<EdgeLabel>>,
    pub cex_kind: Option<CexKind>,
    pub nodes: usize,
    pub edges: usize,
    pub lsigma_bound: String,
    pub elapsed_ms: u128,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("property".into(), json!(self.property));
        match self.outcome {
            Outcome::Resource => {
                obj.insert("resource_exhausted".into(), json!(true));
            }
            o => {
                obj.insert("holds".into(), json!(o == Outcome::Holds));
            }
        }
        if let Some(w) = &self.witness {
            obj.insert(
                "witness".into(),
                json!({
                    "stem": w.stem.iter().map(EdgeLabel::to_json).collect::<Vec<_>>(),
                    "cycle": w.cycle.iter().map(EdgeLabel::to_json).collect::<Vec<_>>(),
                }),
            );
        }
        if let Some(cex) = &self.counterexample {
            obj.insert(
                "counterexample".into(),
                json!(cex.iter().map(EdgeLabel::to_json).collect::<Vec<_>>()),
            );
            if let Some(k) = self.cex_kind {
                obj.insert("counterexample_kind".into(), json!(k.name()));
            }
        }
        obj.insert("nodes".into(), json!(self.nodes));
        obj.insert("edges".into(), json!(self.edges));
        obj.insert("lsigma_bound".into(), json!(self.lsigma_bound));
        obj.insert("elapsed_ms".into(), json!(self.elapsed_ms as u64));
        if !self.notes.is_empty() {
            obj.insert("notes".into(), json!(self.notes));
        }
        serde_json::Value::Object(obj)
    }
}

enum BoundedProperty {
    Realizability,
    Survivability,
    Reliability,
}

/// Decides the four properties and their bounded variants for one
/// specification.
pub struct Checker<'a> {
    spec: &'a SpecModel,
    pub stats: SpecStats,
    node_budget: usize,
    threads: usize,
}

impl<'a> Checker<'a> {
    pub fn new(spec: &'a SpecModel) -> Self {
        Checker {
            spec,
            stats: analyze(spec),
            node_budget: DEFAULT_NODE_BUDGET,
            threads: 1,
        }
    }

    pub fn with_budget(spec: &'a SpecModel, node_budget: usize) -> Self {
        Checker {
            spec,
            stats: analyze(spec),
            node_budget,
            threads: 1,
        }
    }

    /// Cap the graph-construction worker count.
    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    fn fresh_verdict(&self, property: String, g: &DeltaGraph, started: Instant) -> Verdict {
        Verdict {
            property,
            outcome: Outcome::Resource,
            witness: None,
            counterexample: None,
            cex_kind: None,
            nodes: g.node_count(),
            edges: g.edge_count(),
            lsigma_bound: count_bound(&self.stats).to_string(),
            elapsed_ms: started.elapsed().as_millis(),
            notes: Vec::new(),
        }
    }

    fn survivability_note(&self, v: &mut Verdict) {
        if !self.stats.progressing {
            v.notes.push(
                "input is balanced but not progressing; survivability is decided as \
                 critical-state reachability over lazy-sampling prefixes"
                    .to_string(),
            );
        }
    }

    /// Realizability: some compliant lazy-sampling trace reaches a cycle with
    /// at least one Tick edge. Zeno cycles do not count: an infinite time
    /// trace needs infinitely many Ticks.
    pub fn check_z(&self, s0: &Configuration) -> Result<Verdict, CheckError> {
        let started = Instant::now();
        let g = build_graph_with(self.spec, s0, true, self.node_budget, self.threads)?;
        let mut v = self.fresh_verdict("Z".into(), &g, started);
        if g.exhausted {
            return Ok(v);
        }
        if g.info[g.root].critical {
            v.outcome = Outcome::Fails;
            v.counterexample = Some(vec![]);
            v.cex_kind = Some(CexKind::InitialCritical);
            v.elapsed_ms = started.elapsed().as_millis();
            return Ok(v);
        }
        let scc = compliant_scc(&g);
        let seed: Vec<bool> = (0..g.pool.len())
            .map(|i| !g.info[i].critical && scc.comp[i] != UNSEEN && scc.tick_cyclic[scc.comp[i]])
            .collect();
        if backward_closure(&g, &seed)[g.root] {
            let (stem, entry) = bfs_path(&g, g.root, |x| seed[x]).expect("seed reachable");
            let cycle = tick_cycle_in_scc(&g, &scc, entry).expect("entry lies in a tick scc");
            v.outcome = Outcome::Holds;
            v.witness = Some(Witness { stem, cycle });
        } else {
            v.outcome = Outcome::Fails;
        }
        v.elapsed_ms = started.elapsed().as_millis();
        Ok(v)
    }

    /// Survivability: realizability plus no critical state reachable under
    /// the lazy sampling.
    pub fn check_s(&self, s0: &Configuration) -> Result<Verdict, CheckError> {
        let started = Instant::now();
        let z = self.check_z(s0)?;
        let g = build_graph_with(self.spec, s0, true, self.node_budget, self.threads)?;
        let mut v = self.fresh_verdict("S".into(), &g, started);
        self.survivability_note(&mut v);
        if g.exhausted || z.outcome == Outcome::Resource {
            return Ok(v);
        }
        if z.outcome == Outcome::Fails {
            v.outcome = Outcome::Fails;
            v.counterexample = z.counterexample;
            v.cex_kind = z.cex_kind;
            v.notes.push("realizability already fails".into());
            v.elapsed_ms = started.elapsed().as_millis();
            return Ok(v);
        }
        if let Some(critical) = (0..g.pool.len()).find(|&i| g.info[i].critical) {
            let (path, _) = bfs_path(&g, g.root, |x| x == critical)
                .expect("recorded critical nodes are reachable");
            v.outcome = Outcome::Fails;
            v.counterexample = Some(path);
            v.cex_kind = Some(CexKind::CriticalReached);
        } else {
            v.outcome = Outcome::Holds;
            v.witness = z.witness;
        }
        v.elapsed_ms = started.elapsed().as_millis();
        Ok(v)
    }

    /// Point-of-no-return test: the representation is not critical, yet in
    /// the compliant subgraph it reaches no cycle of any kind, so every
    /// infinite lazy-sampling continuation passes through a critical state.
    /// A compliant Zeno cycle defeats the test: the definition quantifies
    /// over all infinite traces, time-divergent or not.
    pub fn is_pon(&self, d: &DeltaRep) -> Result<bool, CheckError> {
        if delta_critical(d, &self.spec.critical) {
            return Ok(false);
        }
        let conf = materialize(d);
        let g = build_graph_with(self.spec, &conf, true, self.node_budget, self.threads)?;
        let scc = compliant_scc(&g);
        let seed: Vec<bool> = (0..g.pool.len())
            .map(|i| !g.info[i].critical && scc.comp[i] != UNSEEN && scc.cyclic[scc.comp[i]])
            .collect();
        Ok(!backward_closure(&g, &seed)[g.root])
    }

    /// Recoverability: realizability plus no point-of-no-return reachable on
    /// a compliant lazy-sampling trace.
    pub fn check_v(&self, s0: &Configuration) -> Result<Verdict, CheckError> {
        let started = Instant::now();
        let z = self.check_z(s0)?;
        let g = build_graph_with(self.spec, s0, true, self.node_budget, self.threads)?;
        let mut v = self.fresh_verdict("V".into(), &g, started);
        if g.exhausted || z.outcome == Outcome::Resource {
            return Ok(v);
        }
        if z.outcome == Outcome::Fails {
            v.outcome = Outcome::Fails;
            v.counterexample = z.counterexample;
            v.cex_kind = z.cex_kind;
            v.notes.push("realizability already fails".into());
            v.elapsed_ms = started.elapsed().as_millis();
            return Ok(v);
        }
        let scc = compliant_scc(&g);
        let seed: Vec<bool> = (0..g.pool.len())
            .map(|i| !g.info[i].critical && scc.comp[i] != UNSEEN && scc.cyclic[scc.comp[i]])
            .collect();
        let can_cycle = backward_closure(&g, &seed);
        // every non-critical node of the compliant-restricted graph is
        // reachable on a compliant trace; a PON is one reaching no cycle
        let pon = (0..g.pool.len()).find(|&i| !g.info[i].critical && !can_cycle[i]);
        match pon {
            Some(node) => {
                let (path, _) = bfs_path(&g, g.root, |x| x == node).expect("node reachable");
                v.outcome = Outcome::Fails;
                v.counterexample = Some(path);
                v.cex_kind = Some(CexKind::PonReached);
            }
            None => {
                v.outcome = Outcome::Holds;
                v.witness = z.witness;
            }
        }
        v.elapsed_ms = started.elapsed().as_millis();
        Ok(v)
    }

    /// Reliability: realizability plus every compliantly reachable state can
    /// still reach a Tick-bearing cycle inside the compliant subgraph. For
    /// progressing systems this coincides with recoverability, which is
    /// asserted as an internal cross-check.
    pub fn check_l(&self, s0: &Configuration) -> Result<Verdict, CheckError> {
        let started = Instant::now();
        let z = self.check_z(s0)?;
        let g = build_graph_with(self.spec, s0, true, self.node_budget, self.threads)?;
        let mut v = self.fresh_verdict("L".into(), &g, started);
        if g.exhausted || z.outcome == Outcome::Resource {
            return Ok(v);
        }
        if z.outcome == Outcome::Fails {
            v.outcome = Outcome::Fails;
            v.counterexample = z.counterexample;
            v.cex_kind = z.cex_kind;
            v.notes.push("realizability already fails".into());
            v.elapsed_ms = started.elapsed().as_millis();
            return Ok(v);
        }
        let scc = compliant_scc(&g);
        let seed: Vec<bool> = (0..g.pool.len())
            .map(|i| !g.info[i].critical && scc.comp[i] != UNSEEN && scc.tick_cyclic[scc.comp[i]])
            .collect();
        let can = backward_closure(&g, &seed);
        let stuck = (0..g.pool.len()).find(|&i| !g.info[i].critical && !can[i]);
        match stuck {
            Some(node) => {
                let (path, _) = bfs_path(&g, g.root, |x| x == node).expect("node reachable");
                v.outcome = Outcome::Fails;
                v.counterexample = Some(path);
                v.cex_kind = Some(CexKind::StuckPrefix);
            }
            None => {
                v.outcome = Outcome::Holds;
                v.witness = z.witness;
            }
        }
        v.elapsed_ms = started.elapsed().as_millis();

        if self.stats.progressing && v.outcome != Outcome::Resource {
            let recov = self.check_v(s0)?;
            assert_eq!(
                v.outcome, recov.outcome,
                "internal invariant violated: L and V disagree on a progressing system"
            );
        }
        Ok(v)
    }

    pub fn check_nz(&self, s0: &Configuration, n: usize) -> Result<Verdict, CheckError> {
        self.check_layered(s0, n, BoundedProperty::Realizability)
    }

    pub fn check_ns(&self, s0: &Configuration, n: usize) -> Result<Verdict, CheckError> {
        self.check_layered(s0, n, BoundedProperty::Survivability)
    }

    pub fn check_nl(&self, s0: &Configuration, n: usize) -> Result<Verdict, CheckError> {
        self.check_layered(s0, n, BoundedProperty::Reliability)
    }

    fn check_layered(
        &self,
        s0: &Configuration,
        ticks: usize,
        prop: BoundedProperty,
    ) -> Result<Verdict, CheckError> {
        let started = Instant::now();
        let lg = build_layered(self.spec, s0, ticks, self.node_budget)?;
        let name = match prop {
            BoundedProperty::Realizability => format!("{ticks}-Z"),
            BoundedProperty::Survivability => format!("{ticks}-S"),
            BoundedProperty::Reliability => format!("{ticks}-L"),
        };
        let g = &lg.graph;
        let mut v = self.fresh_verdict(name, g, started);
        if let BoundedProperty::Survivability = prop {
            self.survivability_note(&mut v);
        }
        if g.exhausted {
            return Ok(v);
        }
        if g.info[g.root].critical {
            v.outcome = Outcome::Fails;
            v.counterexample = Some(vec![]);
            v.cex_kind = Some(CexKind::InitialCritical);
            v.elapsed_ms = started.elapsed().as_millis();
            return Ok(v);
        }

        // a compliant trace with exactly n ticks = a compliant path into the
        // last layer (trailing instantaneous steps change nothing)
        let at_goal = |i: usize| !g.info[i].critical && lg.layer[i] == ticks;
        let Some((nz_path, _)) = bfs_path(g, g.root, at_goal) else {
            v.outcome = Outcome::Fails;
            v.elapsed_ms = started.elapsed().as_millis();
            return Ok(v);
        };
        match prop {
            BoundedProperty::Realizability => {
                v.outcome = Outcome::Holds;
                v.witness = Some(Witness {
                    stem: nz_path,
                    cycle: vec![],
                });
            }
            BoundedProperty::Survivability => {
                if let Some(critical) = (0..g.pool.len()).find(|&i| g.info[i].critical) {
                    let (path, _) =
                        bfs_path(g, g.root, |x| x == critical).expect("criticals are first hits");
                    v.outcome = Outcome::Fails;
                    v.counterexample = Some(path);
                    v.cex_kind = Some(CexKind::CriticalReached);
                } else {
                    v.outcome = Outcome::Holds;
                    v.witness = Some(Witness {
                        stem: nz_path,
                        cycle: vec![],
                    });
                }
            }
            BoundedProperty::Reliability => {
                // every compliantly reachable node must still complete to
                // exactly n ticks inside the compliant subgraph; nodes of the
                // last layer are their own completions
                let seed: Vec<bool> = (0..g.pool.len()).map(at_goal).collect();
                let can = backward_closure(g, &seed);
                let stuck = (0..g.pool.len()).find(|&i| !g.info[i].critical && !can[i]);
                match stuck {
                    Some(node) => {
                        let (path, _) = bfs_path(g, g.root, |x| x == node).expect("node reachable");
                        v.outcome = Outcome::Fails;
                        v.counterexample = Some(path);
                        v.cex_kind = Some(CexKind::NoCompletion);
                    }
                    None => {
                        v.outcome = Outcome::Holds;
                        v.witness = Some(Witness {
                            stem: nz_path,
                            cycle: vec![],
                        });
                    }
                }
            }
        }
        v.elapsed_ms = started.elapsed().as_millis();
        Ok(v)
    }
}

/// Tick-layered graph: nodes are (representation, ticks-so-far) pairs, Tick
/// edges advance the layer and stop at the requested bound.
struct LayeredGraph {
    graph: DeltaGraph,
    layer: Vec<usize>,
}

fn build_layered(
    spec: &SpecModel,
    s0: &Configuration,
    ticks: usize,
    node_budget: usize,
) -> Result<LayeredGraph, CheckError> {
    let stats = analyze(spec);
    if !stats.balanced {
        return Err(CheckError::NotBalanced);
    }
    let dmax = stats.dmax;
    let mut keys: HashMap<(u64, String, usize), usize> = HashMap::new();
    let mut pool = DeltaPool::new();
    let mut layers: Vec<usize> = Vec::new();
    let mut info: Vec<NodeInfo> = Vec::new();
    let mut edges: Vec<Vec<Edge>> = Vec::new();
    let mut exhausted = false;

    fn intern_layered(
        keys: &mut HashMap<(u64, String, usize), usize>,
        pool: &mut DeltaPool,
        layers: &mut Vec<usize>,
        info: &mut Vec<NodeInfo>,
        edges: &mut Vec<Vec<Edge>>,
        rep: DeltaRep,
        layer: usize,
    ) -> (usize, bool) {
        let key = (rep.fingerprint(), rep.render(), layer);
        if let Some(&id) = keys.get(&key) {
            return (id, false);
        }
        let id = pool.push_raw(rep);
        keys.insert(key, id);
        layers.push(layer);
        info.push(NodeInfo::default());
        edges.push(Vec::new());
        (id, true)
    }

    let root_rep = abstract_config(s0, dmax)?;
    let (root, _) = intern_layered(
        &mut keys,
        &mut pool,
        &mut layers,
        &mut info,
        &mut edges,
        root_rep,
        0,
    );
    let mut queue = VecDeque::new();
    queue.push_back(root);

    while let Some(id) = queue.pop_front() {
        let rep = pool.get(id).clone();
        let critical = delta_critical(&rep, &spec.critical);
        info[id].critical = critical;
        if critical {
            continue; // first hit on each path; traces never extend past it
        }
        if pool.len() > node_budget {
            exhausted = true;
            break;
        }
        let steps = delta_enabled(&rep, spec)?;
        if steps.is_empty() {
            info[id].must_tick = true;
            if layers[id] < ticks {
                let next_layer = layers[id] + 1;
                let target = delta_tick(&rep)?;
                let (tid, fresh) = intern_layered(
                    &mut keys,
                    &mut pool,
                    &mut layers,
                    &mut info,
                    &mut edges,
                    target,
                    next_layer,
                );
                if fresh {
                    queue.push_back(tid);
                }
                edges[id].push(Edge {
                    target: tid,
                    label: EdgeLabel::Tick,
                });
            }
        } else {
            let layer = layers[id];
            for step in steps {
                let (tid, fresh) = intern_layered(
                    &mut keys,
                    &mut pool,
                    &mut layers,
                    &mut info,
                    &mut edges,
                    step.target,
                    layer,
                );
                if fresh {
                    queue.push_back(tid);
                }
                edges[id].push(Edge {
                    target: tid,
                    label: EdgeLabel::Apply {
                        rule: step.rule,
                        matched: step.matched,
                    },
                });
            }
        }
    }
    let graph = DeltaGraph {
        pool,
        info,
        edges,
        root,
        exhausted,
    };
    Ok(LayeredGraph {
        graph,
        layer: layers,
    })
}

// ---------------------------------------------------------------------------
// Witness replay
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("step {step}: Tick taken while an instantaneous rule was applicable")]
    LtsViolation { step: usize },
    #[error("step {step}: {source}")]
    Engine {
        step: usize,
        #[source]
        source: EngineError,
    },
    #[error("step {step}: rule `{rule}` unknown")]
    UnknownRule { step: usize, rule: String },
    #[error("step {step}: matched indices do not unify with the configuration")]
    BadIndices { step: usize },
    #[error("cycle pump {pump} does not return to the loop representation")]
    CycleMismatch { pump: usize },
    #[error(transparent)]
    Delta(#[from] DeltaError),
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub configs: Vec<Configuration>,
    pub ticks: usize,
    /// Indices into `configs` of critical configurations.
    pub critical_hits: Vec<usize>,
}

/// Replay a label path concretely from `s0`, enforcing the lazy-sampling
/// gate on every Tick and re-deriving each substitution from the matched
/// canonical indices.
pub fn replay_path(
    spec: &SpecModel,
    s0: &Configuration,
    labels: &[EdgeLabel],
) -> Result<ReplayReport, ReplayError> {
    let nonces = NonceSource::new();
    let floor = s0
        .facts()
        .iter()
        .flat_map(|f| f.fact.nonces())
        .max()
        .map(|m| m + 1)
        .unwrap_or(0);
    for _ in 0..floor {
        nonces.fresh();
    }
    let mut configs = vec![s0.clone()];
    let mut current = s0.clone();
    let mut ticks = 0usize;
    for (step, label) in labels.iter().enumerate() {
        match label {
            EdgeLabel::Tick => {
                if !must_tick(&current, spec) {
                    return Err(ReplayError::LtsViolation { step });
                }
                current = current.tick().map_err(|e| ReplayError::Engine {
                    step,
                    source: EngineError::Model(e),
                })?;
                ticks += 1;
            }
            EdgeLabel::Apply { rule, matched } => {
                let r = spec.rule(rule).ok_or_else(|| ReplayError::UnknownRule {
                    step,
                    rule: rule.clone(),
                })?;
                let lhs = r.lhs();
                if lhs.len() != matched.len() {
                    return Err(ReplayError::BadIndices { step });
                }
                let mut sub = Substitution::default();
                sub.times.insert(r.time_var.clone(), current.global_time());
                for (pat, &idx) in lhs.iter().zip(matched) {
                    let fact = current
                        .facts()
                        .get(idx)
                        .ok_or(ReplayError::BadIndices { step })?;
                    if !unify_timed(pat, fact, &mut sub) {
                        return Err(ReplayError::BadIndices { step });
                    }
                }
                current = apply_rule(&current, r, &sub, &nonces)
                    .map_err(|e| ReplayError::Engine { step, source: e })?;
            }
        }
        configs.push(current.clone());
    }
    let critical_hits = configs
        .iter()
        .enumerate()
        .filter(|(_, c)| is_critical(c, &spec.critical))
        .map(|(i, _)| i)
        .collect();
    Ok(ReplayReport {
        configs,
        ticks,
        critical_hits,
    })
}

/// Replay a lasso: stem once, then the cycle twice. After each pump the
/// abstraction must return to the representation reached by the stem.
pub fn replay_lasso(
    spec: &SpecModel,
    s0: &Configuration,
    witness: &Witness,
) -> Result<ReplayReport, ReplayError> {
    let stats = analyze(spec);
    let stem_report = replay_path(spec, s0, &witness.stem)?;
    let loop_entry = stem_report
        .configs
        .last()
        .expect("stem report has configs")
        .clone();
    let entry_rep = abstract_config(&loop_entry, stats.dmax)?;
    let mut all_configs = stem_report.configs.clone();
    let mut ticks = stem_report.ticks;
    let mut current = loop_entry;
    for pump in 1..=2 {
        let rep = replay_path(spec, &current, &witness.cycle)?;
        current = rep.configs.last().expect("configs").clone();
        if abstract_config(&current, stats.dmax)? != entry_rep {
            return Err(ReplayError::CycleMismatch { pump });
        }
        ticks += rep.ticks;
        all_configs.extend(rep.configs.into_iter().skip(1));
    }
    let critical_hits = all_configs
        .iter()
        .enumerate()
        .filter(|(_, c)| is_critical(c, &spec.critical))
        .map(|(i, _)| i)
        .collect();
    Ok(ReplayReport {
        configs: all_configs,
        ticks,
        critical_hits,
    })
}

// ---------------------------------------------------------------------------
// DOT export
// ---------------------------------------------------------------------------

/// Graphviz rendering of a delta graph; critical nodes are filled red and
/// the root is filled blue.
pub fn to_dot(g: &DeltaGraph) -> String {
    let mut out = String::from(
        "digraph delta {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n",
    );
    for i in 0..g.pool.len() {
        let rep = g.pool.get(i);
        let style = if g.info[i].critical {
            ", style=filled, fillcolor=\"#ffb3b3\""
        } else if i == g.root {
            ", style=filled, fillcolor=\"#d0e8ff\""
        } else {
            ""
        };
        let label = rep.render().replace('"', "\\\"");
        out.push_str(&format!("  n{} [label=\"{}\"{}];\n", i, label, style));
    }
    for (i, es) in g.edges.iter().enumerate() {
        for e in es {
            let label = match &e.label {
                EdgeLabel::Tick => "tick".to_string(),
                EdgeLabel::Apply { rule, .. } => rule.clone(),
            };
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{}\"];\n",
                i, e.target, label
            ));
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_spec;

    fn tprime() -> SpecModel {
        parse_spec(
            r#"
            pred A; pred B; pred C; pred D;
            init { Time@0, C@1 }
            rule mk_d: Time@T, C@T1 | { T1 <= T } -> Time@T, D@T;
            rule mk_a: Time@T, C@T1 | { T1 <= T } -> Time@T, A@T;
            rule a_to_b: Time@T, A@T1 -> Time@T, B@T;
            rule b_to_a: Time@T, B@T1 -> Time@T, A@T;
            "#,
        )
        .expect("parses")
    }

    #[test]
    fn tprime_realizable_but_not_reliable() {
        let spec = tprime();
        let checker = Checker::new(&spec);
        let z = checker.check_z(&spec.initial).unwrap();
        assert_eq!(z.outcome, Outcome::Holds);
        let w = z.witness.expect("lasso");
        assert!(w.cycle.contains(&EdgeLabel::Tick));
        replay_lasso(&spec, &spec.initial, &w).expect("witness replays");

        let s = checker.check_s(&spec.initial).unwrap();
        assert_eq!(s.outcome, Outcome::Holds); // empty critical spec

        let v = checker.check_v(&spec.initial).unwrap();
        assert_eq!(v.outcome, Outcome::Holds); // no criticals, no PONs

        let l = checker.check_l(&spec.initial).unwrap();
        assert_eq!(l.outcome, Outcome::Fails); // the A<->B Zeno trap
        assert_eq!(l.cex_kind, Some(CexKind::StuckPrefix));
        let cex = l.counterexample.unwrap();
        let report = replay_path(&spec, &spec.initial, &cex).unwrap();
        assert!(report.critical_hits.is_empty());
    }

    #[test]
    fn no_instantaneous_rules_gives_tick_self_loop() {
        let spec = parse_spec("init { Time@0 }").unwrap();
        let g = build_graph(&spec, &spec.initial, true, 1000).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edges[0].len(), 1);
        assert_eq!(g.edges[0][0].target, 0);
        assert_eq!(g.edges[0][0].label, EdgeLabel::Tick);
    }

    #[test]
    fn empty_critical_restriction_is_no_restriction() {
        let spec = tprime();
        let a = build_graph(&spec, &spec.initial, true, 1000).unwrap();
        let b = build_graph(&spec, &spec.initial, false, 1000).unwrap();
        assert_eq!(a.node_count(), b.node_count());
        assert_eq!(a.edge_count(), b.edge_count());
    }

    #[test]
    fn budget_exhaustion_reports_resource() {
        let spec = tprime();
        let checker = Checker::with_budget(&spec, 1);
        let z = checker.check_z(&spec.initial).unwrap();
        assert_eq!(z.outcome, Outcome::Resource);
    }

    #[test]
    fn zero_tick_bounds_are_trivial_on_quiet_specs() {
        let spec = parse_spec("pred A; init { Time@0, A@0 }").unwrap();
        let checker = Checker::new(&spec);
        for verdict in [
            checker.check_nz(&spec.initial, 0).unwrap(),
            checker.check_ns(&spec.initial, 0).unwrap(),
            checker.check_nl(&spec.initial, 0).unwrap(),
        ] {
            assert_eq!(verdict.outcome, Outcome::Holds, "{}", verdict.property);
        }
    }

    #[test]
    fn unbalanced_specs_are_refused() {
        let spec = parse_spec(
            r#"
            pred A; pred B;
            init { Time@0, A@0 }
            rule dup: Time@T, A@T1 | { T1 <= T } -> Time@T, B@T, B@(T+1);
            "#,
        )
        .unwrap();
        let checker = Checker::new(&spec);
        assert!(matches!(
            checker.check_z(&spec.initial),
            Err(CheckError::NotBalanced)
        ));
    }
}
