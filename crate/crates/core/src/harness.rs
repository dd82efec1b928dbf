//! Exhaustive empirical checks of the knowledge-gain and coordination
//! theorems, and of the modal laws of the node-based logic, on enumerated
//! systems.
//!
//! Every check returns a [`TheoremReport`] with instance counts. A report
//! whose antecedent never held is "vacuous" and does not count as a pass.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::causality::{
    classic_broom, classic_centipede, find_uneven_broom_with, find_uneven_centipede_with,
    is_broom, is_centipede, FinderFault,
};
use crate::coordination::{beta_node, response_nodes, solves, CoordinationInstance, ProblemKind, Verdict};
use crate::logic::{timestamp, EvalFault, Evaluator, FormulaL0, FormulaL1, RunSet};
use crate::network::{AgentId, Node, TimePoint};
use crate::runs::{Label, System};

/// Violations kept verbatim per report; the rest are only counted.
pub const MAX_STORED_VIOLATIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub run: usize,
    pub inputs: String,
    pub expected: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Vacuous,
    Violated,
    Precondition,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Vacuous => "vacuous",
            Status::Violated => "violated",
            Status::Precondition => "precondition",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub id: String,
    pub scenario: String,
    pub instances: u64,
    pub antecedent_true: u64,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    pub precondition: Option<String>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl TheoremReport {
    pub fn new(id: &str, system: &System) -> Self {
        TheoremReport {
            id: id.to_string(),
            scenario: String::new(),
            instances: 0,
            antecedent_true: 0,
            violation_count: 0,
            violations: Vec::new(),
            precondition: None,
            notes: Vec::new(),
            elapsed: Duration::ZERO,
        }
        .sized(system)
    }

    fn sized(mut self, system: &System) -> Self {
        self.notes.push(format!("runs={}", system.len()));
        self
    }

    pub fn violate(&mut self, run: usize, inputs: String, expected: String) {
        self.violation_count += 1;
        if self.violations.len() < MAX_STORED_VIOLATIONS {
            self.violations.push(Violation {
                run,
                inputs,
                expected,
            });
        }
    }

    pub fn status(&self) -> Status {
        if self.precondition.is_some() {
            Status::Precondition
        } else if self.violation_count > 0 {
            Status::Violated
        } else if self.antecedent_true == 0 {
            Status::Vacuous
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    /// Line-oriented rendering; timing is left out so output is stable.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "[{}] theorem={} status={} instances={} antecedent={} violations={}",
            self.scenario,
            self.id,
            self.status(),
            self.instances,
            self.antecedent_true,
            self.violation_count
        );
        if let Some(p) = &self.precondition {
            let _ = writeln!(s, "  precondition: {p}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        for v in &self.violations {
            let _ = writeln!(
                s,
                "  violation run={} inputs={} expected={}",
                v.run, v.inputs, v.expected
            );
        }
        let hidden = self.violation_count - self.violations.len() as u64;
        if hidden > 0 {
            let _ = writeln!(s, "  ... {hidden} more violations");
        }
        s
    }
}

/// Faults injected by the self-test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    pub finder: FinderFault,
    pub eval: EvalFault,
}

fn timed<F: FnOnce() -> TheoremReport>(f: F) -> TheoremReport {
    let start = Instant::now();
    let mut r = f();
    r.elapsed = start.elapsed();
    r
}

fn nodes_text(nodes: &[Node]) -> String {
    let v: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
    format!("<{}>", v.join(","))
}

/// Trigger nodes occurring in the system, in order.
fn trigger_nodes(system: &System) -> Vec<Node> {
    let set: BTreeSet<Node> = system.runs().iter().filter_map(|r| r.trigger()).collect();
    set.into_iter().collect()
}

fn runs_triggered_at(system: &System, node: Node) -> RunSet {
    let mut s = RunSet::with_capacity(system.len());
    for r in system.runs() {
        if r.trigger() == Some(node) {
            s.insert(r.id());
        }
    }
    s
}

fn trigger_label(system: &System) -> Label {
    system.scenario().trigger.label.clone()
}

fn is_valid(ev: &Evaluator<'_>, set: &RunSet) -> bool {
    set.count_ones(..) == ev.system().len()
}

fn intersect(a: &RunSet, b: &RunSet) -> RunSet {
    let mut s = a.clone();
    s.intersect_with(b);
    s
}

/// Nested node knowledge requires an uneven centipede: whenever
/// `K_{αk}...K_{α1}K_{α0} tocc(t0, e)` holds in a run where `e` occurs at
/// `α0 = <i0,t0>`, there is an uneven centipede for `<α0..αk>`.
pub fn check_nested_gain(system: &System, max_chain: usize) -> TheoremReport {
    check_nested_gain_with(system, max_chain, Faults::default())
}

pub fn check_nested_gain_with(system: &System, max_chain: usize, faults: Faults) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new("nested-gain", system);
        let ev = Evaluator::with_fault(system, faults.eval);
        let label = trigger_label(system);
        let nodes: Vec<Node> = system.nodes().collect();
        let mut skipped = 0u64;
        for origin in trigger_nodes(system) {
            let base = ev
                .runs_l1(&FormulaL1::Tocc(origin.time, label.clone()))
                .expect("trigger time within horizon");
            if is_valid(&ev, &base) {
                skipped += 1;
                continue;
            }
            let here = runs_triggered_at(system, origin);
            let start = ev.knows(origin, &base);
            let mut chain = vec![origin];
            nested_dfs(
                system, &ev, &nodes, &here, &start, &mut chain, max_chain, faults, &mut rep,
            );
        }
        if skipped > 0 {
            rep.notes.push(format!(
                "{skipped} trigger times skipped: tocc is valid there, so the trigger is not a nondeterministic event"
            ));
        }
        rep
    })
}

#[allow(clippy::too_many_arguments)]
fn nested_dfs(
    system: &System,
    ev: &Evaluator<'_>,
    nodes: &[Node],
    here: &RunSet,
    current: &RunSet,
    chain: &mut Vec<Node>,
    max_chain: usize,
    faults: Faults,
    rep: &mut TheoremReport,
) {
    let here_count = here.count_ones(..) as u64;
    for &alpha in nodes {
        let next = ev.knows(alpha, current);
        let hits = intersect(&next, here);
        rep.instances += here_count;
        chain.push(alpha);
        for r in hits.ones() {
            rep.antecedent_true += 1;
            let run = &system.runs()[r];
            match find_uneven_centipede_with(run, system.topology(), chain, faults.finder) {
                Some(c) if is_centipede(run, system.topology(), &c.spine, &c.targets) == Ok(true) => {}
                _ => rep.violate(r, nodes_text(chain), "uneven centipede".into()),
            }
        }
        if chain.len() <= max_chain && !hits.is_clear() {
            nested_dfs(system, ev, nodes, here, &next, chain, max_chain, faults, rep);
        }
        chain.pop();
    }
}

/// All node sets of size `1..=max` in lexicographic order of node index.
pub fn node_sets(nodes: &[Node], max: usize) -> Vec<Vec<Node>> {
    fn rec(nodes: &[Node], from: usize, max: usize, cur: &mut Vec<Node>, out: &mut Vec<Vec<Node>>) {
        for i in from..nodes.len() {
            cur.push(nodes[i]);
            out.push(cur.clone());
            if cur.len() < max {
                rec(nodes, i + 1, max, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(nodes, 0, max, &mut Vec::new(), &mut out);
    out
}

/// Node common knowledge requires an uneven broom: whenever
/// `C_A tocc(t*, e)` holds with `e` at `α0`, some `θ` has `α0 ⇝ θ` and
/// `θ ⤳ α` for every `α ∈ A`. `t*` is the earliest time in `A`; the
/// latest-time stamp is checked too and reported in the notes.
pub fn check_ck_gain(system: &System, max_set: usize) -> TheoremReport {
    check_ck_gain_with(system, max_set, Faults::default())
}

pub fn check_ck_gain_with(system: &System, max_set: usize, faults: Faults) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new("ck-gain", system);
        let ev = Evaluator::with_fault(system, faults.eval);
        let label = trigger_label(system);
        let nodes: Vec<Node> = system.nodes().collect();
        let sets = node_sets(&nodes, max_set);
        let base: Vec<RunSet> = (0..=system.horizon())
            .map(|t| ev.runs_l1(&FormulaL1::Tocc(t, label.clone())).unwrap())
            .collect();
        let (mut late_true, mut late_bad, mut skipped) = (0u64, 0u64, 0u64);
        for origin in trigger_nodes(system) {
            let here = runs_triggered_at(system, origin);
            let here_count = here.count_ones(..) as u64;
            for a in &sets {
                let set: BTreeSet<Node> = a.iter().copied().collect();
                let early = a.iter().map(|n| n.time).min().unwrap() as usize;
                let late = a.iter().map(|n| n.time).max().unwrap() as usize;
                let mut check = |stamp: usize, main: bool, rep: &mut TheoremReport| {
                    if is_valid(&ev, &base[stamp]) {
                        if main {
                            skipped += 1;
                        }
                        return;
                    }
                    let holds = intersect(&ev.common_knowledge(&set, &base[stamp]), &here);
                    if main {
                        rep.instances += here_count;
                    }
                    for r in holds.ones() {
                        let run = &system.runs()[r];
                        let found = find_uneven_broom_with(run, system.topology(), origin, a, faults.finder)
                            .filter(|b| is_broom(run, system.topology(), b));
                        if main {
                            rep.antecedent_true += 1;
                            if found.is_none() {
                                rep.violate(
                                    r,
                                    format!("origin={origin} A={}", nodes_text(a)),
                                    format!("uneven broom (stamp t={stamp})"),
                                );
                            }
                        } else {
                            late_true += 1;
                            if found.is_none() {
                                late_bad += 1;
                            }
                        }
                    }
                };
                check(early, true, &mut rep);
                check(late, false, &mut rep);
            }
        }
        rep.notes.push(format!(
            "latest-time stamp variant: antecedent={late_true} violations={late_bad}"
        ));
        if skipped > 0 {
            rep.notes.push(format!("{skipped} instances skipped: tocc valid at the stamp"));
        }
        rep
    })
}

fn agent_sequences(agents: &[AgentId], max: usize) -> Vec<Vec<AgentId>> {
    let mut out: Vec<Vec<AgentId>> = Vec::new();
    let mut layer: Vec<Vec<AgentId>> = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &layer {
            for a in agents {
                let mut v = s.clone();
                v.push(*a);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn agent_groups(agents: &[AgentId]) -> Vec<Vec<AgentId>> {
    let n = agents.len();
    (1u32..(1 << n))
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| agents[i])
                .collect()
        })
        .collect()
}

/// The agent-indexed versions: nested `K` at a common time `t'` requires
/// a centipede in `[t, t']`, and `C_G` requires a broom.
pub fn check_classic_gain(system: &System, max_chain: usize) -> TheoremReport {
    check_classic_gain_with(system, max_chain, Faults::default())
}

pub fn check_classic_gain_with(system: &System, max_chain: usize, faults: Faults) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new("classic-gain", system);
        let ev = Evaluator::with_fault(system, faults.eval);
        let label = trigger_label(system);
        let topo = system.topology();
        let agents: Vec<AgentId> = topo.agents().collect();
        let seqs = agent_sequences(&agents, max_chain);
        let groups = agent_groups(&agents);
        let (mut k_true, mut c_true) = (0u64, 0u64);
        for origin in trigger_nodes(system) {
            let here = runs_triggered_at(system, origin);
            let here_count = here.count_ones(..) as u64;
            for t_end in 0..=system.horizon() {
                let occ = FormulaL0::Occ(label.clone());
                if is_valid(&ev, &ev.runs_l0(t_end, &occ).unwrap()) {
                    continue;
                }
                let inner = FormulaL0::K(origin.agent, Box::new(occ.clone()));
                for seq in &seqs {
                    let f = seq
                        .iter()
                        .fold(inner.clone(), |acc, a| FormulaL0::K(*a, Box::new(acc)));
                    let holds = intersect(&ev.runs_l0(t_end, &f).unwrap(), &here);
                    rep.instances += here_count;
                    let mut chain = vec![origin.agent];
                    chain.extend(seq.iter().copied());
                    for r in holds.ones() {
                        rep.antecedent_true += 1;
                        k_true += 1;
                        let run = &system.runs()[r];
                        let found = if faults.finder == FinderFault::None {
                            classic_centipede(run, topo, &chain, origin.time, t_end)
                        } else {
                            let targets = classic_targets(&chain, origin.time, t_end);
                            find_uneven_centipede_with(run, topo, &targets, faults.finder)
                        };
                        if found.is_none() {
                            let a: Vec<String> = chain.iter().map(|a| a.to_string()).collect();
                            rep.violate(
                                r,
                                format!("agents=<{}> interval=[{},{}]", a.join(","), origin.time, t_end),
                                "centipede".into(),
                            );
                        }
                    }
                }
                for g in &groups {
                    let f = FormulaL0::C(g.iter().copied().collect(), Box::new(occ.clone()));
                    let holds = intersect(&ev.runs_l0(t_end, &f).unwrap(), &here);
                    rep.instances += here_count;
                    for r in holds.ones() {
                        rep.antecedent_true += 1;
                        c_true += 1;
                        let run = &system.runs()[r];
                        let found = if faults.finder == FinderFault::None {
                            classic_broom(run, topo, origin, g, t_end)
                        } else {
                            let targets: Vec<Node> =
                                g.iter().map(|&agent| Node { agent, time: t_end }).collect();
                            find_uneven_broom_with(run, topo, origin, &targets, faults.finder)
                        };
                        if found.is_none() {
                            let a: Vec<String> = g.iter().map(|a| a.to_string()).collect();
                            rep.violate(
                                r,
                                format!("G={{{}}} interval=[{},{}]", a.join(","), origin.time, t_end),
                                "broom".into(),
                            );
                        }
                    }
                }
            }
        }
        rep.notes.push(format!("nested-K antecedents={k_true} common-knowledge antecedents={c_true}"));
        rep
    })
}

fn classic_targets(agents: &[AgentId], t: TimePoint, t_end: TimePoint) -> Vec<Node> {
    agents
        .iter()
        .enumerate()
        .map(|(h, &agent)| Node {
            agent,
            time: if h == 0 { t } else { t_end },
        })
        .collect()
}

fn precondition_report(id: &str, system: &System, inst: &CoordinationInstance) -> Option<TheoremReport> {
    match solves(system, inst) {
        Verdict::Solved => None,
        v => {
            let mut rep = TheoremReport::new(id, system);
            rep.precondition = Some(format!("{} instance not solved: {v}", inst.kind));
            Some(rep)
        }
    }
}

/// In every triggered run of a system solving the WTR instance,
/// `K_{αk} K_{β^k_{k-1}} ... K_{β^k_1} tocc(t^k_1, e)` holds. The variant
/// stamped with the realized `t_1` is reported in the notes.
pub fn check_wtr_theorem(system: &System, inst: &CoordinationInstance) -> TheoremReport {
    timed(|| {
        if inst.kind != ProblemKind::Wtr {
            let mut rep = TheoremReport::new("wtr-nested-knowledge", system);
            rep.precondition = Some(format!("expected a WTR instance, got {}", inst.kind));
            return rep;
        }
        if let Some(rep) = precondition_report("wtr-nested-knowledge", system, inst) {
            return rep;
        }
        let mut rep = TheoremReport::new("wtr-nested-knowledge", system);
        let ev = Evaluator::new(system);
        let k = inst.k();
        let (mut t1_true, mut t1_checked) = (0u64, 0u64);
        for run in system.runs().iter().filter(|r| r.trigger().is_some()) {
            rep.instances += 1;
            let nodes = response_nodes(run, inst)
                .expect("solved instance has unique responses")
                .expect("solved instance responds in triggered runs");
            let t_k = nodes[k - 1].time;
            let betas: Result<Vec<Node>, _> = (1..k).map(|h| beta_node(inst, h, t_k)).collect();
            let betas = match betas {
                Ok(b) if b.iter().all(|n| n.time <= system.horizon()) => b,
                other => {
                    rep.violate(
                        run.id(),
                        format!("responses={}", nodes_text(&nodes)),
                        format!("beta nodes within the horizon, got {other:?}"),
                    );
                    continue;
                }
            };
            let stamp = betas.first().map_or(t_k, |b| b.time);
            let mut chain = betas.clone();
            chain.push(nodes[k - 1]);
            let f = FormulaL1::nested_k(&chain, FormulaL1::Tocc(stamp, inst.trigger.clone()));
            rep.antecedent_true += 1;
            if !ev.eval_l1(run, &f).expect("nodes within horizon") {
                rep.violate(run.id(), format!("responses={}", nodes_text(&nodes)), f.to_string());
            }
            let g = FormulaL1::nested_k(&chain, FormulaL1::Tocc(nodes[0].time, inst.trigger.clone()));
            t1_checked += 1;
            if ev.eval_l1(run, &g).unwrap() {
                t1_true += 1;
            }
        }
        rep.notes.push(format!(
            "variant stamped with t1 holds in {t1_true} of {t1_checked} triggered runs"
        ));
        rep
    })
}

/// In every triggered run of a system solving the TTR (or SR) instance,
/// `C_A tocc(t_h, e)` holds for the realized response nodes `A` and the
/// earliest response time `t_h`. For SR the agent-indexed `C_G` at the
/// common time is checked as well, directly and through timestamping.
pub fn check_ttr_theorem(system: &System, inst: &CoordinationInstance) -> TheoremReport {
    timed(|| {
        let id = "ttr-common-knowledge";
        if !matches!(inst.kind, ProblemKind::Ttr | ProblemKind::Sr) {
            let mut rep = TheoremReport::new(id, system);
            rep.precondition = Some(format!("expected a TTR or SR instance, got {}", inst.kind));
            return rep;
        }
        if let Some(rep) = precondition_report(id, system, inst) {
            return rep;
        }
        let mut rep = TheoremReport::new(id, system);
        let ev = Evaluator::new(system);
        let mut simultaneous = true;
        for run in system.runs().iter().filter(|r| r.trigger().is_some()) {
            rep.instances += 1;
            let nodes = response_nodes(run, inst).unwrap().unwrap();
            let earliest = nodes.iter().map(|n| n.time).min().unwrap();
            let latest = nodes.iter().map(|n| n.time).max().unwrap();
            simultaneous &= earliest == latest;
            let f = FormulaL1::c(&nodes, FormulaL1::Tocc(earliest, inst.trigger.clone()));
            rep.antecedent_true += 1;
            if !ev.eval_l1(run, &f).unwrap() {
                rep.violate(run.id(), format!("A={}", nodes_text(&nodes)), f.to_string());
            }
            if inst.kind == ProblemKind::Sr {
                let g = FormulaL0::C(
                    nodes.iter().map(|n| n.agent).collect(),
                    Box::new(FormulaL0::Occ(inst.trigger.clone())),
                );
                let direct = ev.eval_l0(run, earliest, &g).unwrap();
                let stamped = ev.eval_l1(run, &timestamp(&g, earliest)).unwrap();
                if !(direct && stamped) {
                    rep.violate(
                        run.id(),
                        format!("t={earliest}"),
                        format!("{g} at the common time (direct={direct}, stamped={stamped})"),
                    );
                }
            }
        }
        if !simultaneous {
            rep.notes.push("responses are staggered: no common response time exists".into());
        }
        rep
    })
}

/// Verdict of the coordination verifier as a report.
pub fn check_solves(system: &System, inst: &CoordinationInstance) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new(&format!("solves-{}", inst.kind.to_string().to_lowercase()), system);
        rep.instances = system.len() as u64;
        rep.antecedent_true = system.runs().iter().filter(|r| r.trigger().is_some()).count() as u64;
        if let Verdict::Counterexample(c) = solves(system, inst) {
            let nodes: Vec<String> = c
                .nodes
                .iter()
                .map(|n| n.map_or("-".into(), |n| n.to_string()))
                .collect();
            rep.violate(
                c.run,
                format!("clause={:?} nodes=[{}]", c.clause, nodes.join(" ")),
                c.detail,
            );
        }
        rep
    })
}

/// All `L0` formulas of depth at most `depth` over the given labels and
/// agents, visited without being stored. Atoms have depth 0; unary
/// operators are `!`, `K_i`, and `E_G`, `C_G` for every nonempty `G`.
pub fn for_each_l0_formula(
    labels: &[Label],
    agents: &[AgentId],
    depth: usize,
    mut visit: impl FnMut(&FormulaL0),
) {
    let groups = agent_groups(agents);
    let atoms = || labels.iter().cloned().map(FormulaL0::Occ);
    let mut below: Vec<FormulaL0> = atoms().collect();
    for level in 1..=depth {
        let last = level == depth;
        let mut next: Vec<FormulaL0> = Vec::new();
        let mut emit = |f: FormulaL0| {
            if last {
                visit(&f);
            } else {
                next.push(f);
            }
        };
        for f in atoms() {
            emit(f);
        }
        for f in &below {
            emit(FormulaL0::Not(Box::new(f.clone())));
            for a in agents {
                emit(FormulaL0::K(*a, Box::new(f.clone())));
            }
            for g in &groups {
                emit(FormulaL0::E(g.iter().copied().collect(), Box::new(f.clone())));
            }
            for g in &groups {
                emit(FormulaL0::C(g.iter().copied().collect(), Box::new(f.clone())));
            }
        }
        for a in &below {
            for b in &below {
                emit(FormulaL0::And(Box::new(a.clone()), Box::new(b.clone())));
            }
        }
        if last {
            return;
        }
        below = next;
    }
    for f in &below {
        visit(f);
    }
}

/// Exhaustive check that `(R,r,t) ⊨ f` iff `(R,r) ⊨ ts(f,t)` for every
/// formula up to `depth`, run and time.
pub fn check_timestamp_embedding(
    system: &System,
    labels: &[Label],
    agents: &[AgentId],
    depth: usize,
) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new("timestamp-embedding", system);
        let ev = Evaluator::new(system);
        let mut formulas = 0u64;
        for_each_l0_formula(labels, agents, depth, |f| {
            formulas += 1;
            for t in 0..=system.horizon() {
                let a = ev.runs_l0(t, f).unwrap();
                let b = ev.runs_l1(&timestamp(f, t)).unwrap();
                rep.instances += system.len() as u64;
                rep.antecedent_true += system.len() as u64;
                if a != b {
                    let r = a.symmetric_difference(&b).next().unwrap();
                    rep.violate(r, format!("f={f} t={t}"), "equal truth values".into());
                }
            }
        });
        rep.notes.push(format!("formulas={formulas} depth<={depth}"));
        rep
    })
}

/// A modal operator under test: a single node's `K` or `C_A`.
#[derive(Clone, Debug)]
enum Modality {
    K(Node),
    C(BTreeSet<Node>),
}

impl Modality {
    fn apply(&self, ev: &Evaluator<'_>, s: &RunSet) -> RunSet {
        match self {
            Modality::K(n) => ev.knows(*n, s),
            Modality::C(a) => ev.common_knowledge(a, s),
        }
    }

    fn text(&self) -> String {
        match self {
            Modality::K(n) => format!("K[{n}]"),
            Modality::C(a) => {
                let v: Vec<Node> = a.iter().copied().collect();
                format!("C{}", nodes_text(&v))
            }
        }
    }
}

fn labels_in(system: &System) -> Vec<Label> {
    let mut set: BTreeSet<Label> = BTreeSet::new();
    set.insert(trigger_label(system));
    for r in system.runs() {
        for (_, l) in r.actions() {
            set.insert(l.clone());
        }
    }
    set.into_iter().collect()
}

/// Literal atoms `tocc(t, l)` and their negations over the labels seen in
/// the system.
fn literals(system: &System) -> Vec<FormulaL1> {
    let mut out = Vec::new();
    for l in labels_in(system) {
        for t in 0..=system.horizon() {
            let a = FormulaL1::Tocc(t, l.clone());
            out.push(FormulaL1::not(a.clone()));
            out.push(a);
        }
    }
    out
}

fn not(ev: &Evaluator<'_>, s: &RunSet) -> RunSet {
    let mut out = ev.all_runs();
    out.difference_with(s);
    out
}

fn subset(a: &RunSet, b: &RunSet) -> bool {
    a.is_subset(b)
}

/// Seeded sample of modalities, formulas and node sets for the modal laws.
struct LemmaSample {
    modalities: Vec<Modality>,
    formulas: Vec<FormulaL1>,
    triples: Vec<(usize, usize, usize)>,
}

fn sample(system: &System, seed: u64, triples: usize) -> LemmaSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<Node> = system.nodes().collect();
    let mut modalities: Vec<Modality> = nodes.iter().map(|n| Modality::K(*n)).collect();
    for _ in 0..nodes.len() {
        let size = rng.gen_range(1..=3.min(nodes.len()));
        let set: BTreeSet<Node> = nodes.choose_multiple(&mut rng, size).copied().collect();
        modalities.push(Modality::C(set));
    }
    let lits = literals(system);
    let mut formulas = lits.clone();
    for _ in 0..lits.len() {
        let a = lits.choose(&mut rng).unwrap().clone();
        let n = *nodes.choose(&mut rng).unwrap();
        formulas.push(FormulaL1::k(n, a));
    }
    for _ in 0..lits.len() {
        let a = lits.choose(&mut rng).unwrap().clone();
        let b = lits.choose(&mut rng).unwrap().clone();
        formulas.push(FormulaL1::and(a, b));
    }
    let triples = (0..triples)
        .map(|_| {
            (
                rng.gen_range(0..modalities.len()),
                rng.gen_range(0..formulas.len()),
                rng.gen_range(0..formulas.len()),
            )
        })
        .collect();
    LemmaSample {
        modalities,
        formulas,
        triples,
    }
}

/// Number of sampled `(modality, φ, ψ)` triples per system.
pub const LEMMA_TRIPLES: usize = 1500;

/// S5 laws for node knowledge and node common knowledge, the fixpoint
/// axiom, the induction rule, timestamping up to depth 2, and the
/// two-process lemma. One report per law.
pub fn check_logic_lemmas(system: &System, seed: u64) -> Vec<TheoremReport> {
    check_logic_lemmas_with(system, seed, Faults::default())
}

pub fn check_logic_lemmas_with(system: &System, seed: u64, faults: Faults) -> Vec<TheoremReport> {
    let ev = Evaluator::with_fault(system, faults.eval);
    let s = sample(system, seed, LEMMA_TRIPLES);
    let sets: Vec<RunSet> = s
        .formulas
        .iter()
        .map(|f| ev.runs_l1(f).expect("sampled formulas stay within the horizon"))
        .collect();
    let mut k = TheoremReport::new("s5-k", system);
    let mut t = TheoremReport::new("s5-t", system);
    let mut four = TheoremReport::new("s5-4", system);
    let mut five = TheoremReport::new("s5-5", system);
    let mut nec = TheoremReport::new("s5-necessitation", system);
    let mut fix = TheoremReport::new("ck-fixpoint", system);
    let start = Instant::now();
    for &(m, a, b) in &s.triples {
        let modal = &s.modalities[m];
        let (phi, psi) = (&sets[a], &sets[b]);
        let inputs = || format!("M={} phi={} psi={}", modal.text(), s.formulas[a], s.formulas[b]);
        let m_phi = modal.apply(&ev, phi);
        // K: M φ ∧ M(φ → ψ) → M ψ
        let mut imp = not(&ev, phi);
        imp.union_with(psi);
        let lhs = intersect(&m_phi, &modal.apply(&ev, &imp));
        k.instances += 1;
        if !lhs.is_clear() {
            k.antecedent_true += 1;
            if !subset(&lhs, &modal.apply(&ev, psi)) {
                k.violate(lhs.ones().next().unwrap(), inputs(), "M psi".into());
            }
        }
        // T: M φ → φ
        t.instances += 1;
        if !m_phi.is_clear() {
            t.antecedent_true += 1;
            if !subset(&m_phi, phi) {
                t.violate(m_phi.ones().next().unwrap(), inputs(), "phi".into());
            }
        }
        // 4: M φ → M M φ
        four.instances += 1;
        if !m_phi.is_clear() {
            four.antecedent_true += 1;
            if !subset(&m_phi, &modal.apply(&ev, &m_phi)) {
                four.violate(m_phi.ones().next().unwrap(), inputs(), "M M phi".into());
            }
        }
        // 5: ¬M φ → M ¬M φ
        let not_m = not(&ev, &m_phi);
        five.instances += 1;
        if !not_m.is_clear() {
            five.antecedent_true += 1;
            if !subset(&not_m, &modal.apply(&ev, &not_m)) {
                five.violate(not_m.ones().next().unwrap(), inputs(), "M !M phi".into());
            }
        }
        // Necessitation on the valid formula φ ∨ ¬φ and on M φ → φ.
        for valid in [ev.all_runs(), {
            let mut v = not(&ev, &m_phi);
            v.union_with(phi);
            v
        }] {
            nec.instances += 1;
            if is_valid(&ev, &valid) {
                nec.antecedent_true += 1;
                let boxed = modal.apply(&ev, &valid);
                if !is_valid(&ev, &boxed) {
                    nec.violate(not(&ev, &boxed).ones().next().unwrap(), inputs(), "valid M phi".into());
                }
            }
        }
        // Fixpoint: C_A φ → E_A(φ ∧ C_A φ)
        if let Modality::C(set) = modal {
            fix.instances += 1;
            if !m_phi.is_clear() {
                fix.antecedent_true += 1;
                let rhs = ev.everyone_knows(set, &intersect(phi, &m_phi));
                if !subset(&m_phi, &rhs) {
                    fix.violate(m_phi.ones().next().unwrap(), inputs(), "E_A(phi & C_A phi)".into());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let mut out = vec![k, t, four, five, nec, fix];
    for r in &mut out {
        r.elapsed = elapsed;
    }
    out.push(check_induction_with(system, seed, faults));
    let labels = labels_in(system);
    let agents: Vec<AgentId> = system.topology().agents().take(2).collect();
    let mut ts = check_timestamp_embedding(system, &labels[..labels.len().min(2)], &agents, 2);
    if faults.eval != EvalFault::None {
        ts.notes.push("evaluated without faults".into());
    }
    out.push(ts);
    out.push(check_two_process_with(system, faults));
    out
}

/// Induction rule: if `φ → E_A(φ ∧ ψ)` is valid then so is `φ → C_A ψ`,
/// for literal `φ, ψ` and sampled node sets `A`.
pub fn check_induction_with(system: &System, seed: u64, faults: Faults) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new("ck-induction", system);
        let ev = Evaluator::with_fault(system, faults.eval);
        let s = sample(system, seed, 0);
        let lits = literals(system);
        let sets: Vec<RunSet> = lits.iter().map(|f| ev.runs_l1(f).unwrap()).collect();
        let groups: Vec<&BTreeSet<Node>> = s
            .modalities
            .iter()
            .filter_map(|m| match m {
                Modality::C(a) => Some(a),
                Modality::K(_) => None,
            })
            .collect();
        let singles: Vec<BTreeSet<Node>> = system.nodes().map(|n| [n].into_iter().collect()).collect();
        for a in groups.into_iter().chain(singles.iter()) {
            for (i, phi) in sets.iter().enumerate() {
                if phi.is_clear() {
                    continue;
                }
                for (j, psi) in sets.iter().enumerate() {
                    rep.instances += 1;
                    let premise = ev.everyone_knows(a, &intersect(phi, psi));
                    if !subset(phi, &premise) {
                        continue;
                    }
                    rep.antecedent_true += 1;
                    if !subset(phi, &ev.common_knowledge(a, psi)) {
                        let v: Vec<Node> = a.iter().copied().collect();
                        rep.violate(
                            phi.ones().next().unwrap(),
                            format!("A={} phi={} psi={}", nodes_text(&v), lits[i], lits[j]),
                            "phi -> C_A psi".into(),
                        );
                    }
                }
            }
        }
        rep
    })
}

/// Knowledge requires causality: if `K_{α1} tocc(t1, e)` holds in a run
/// where `e` happens at `α0`, then `α0 ⇝ α1`.
pub fn check_two_process_with(system: &System, faults: Faults) -> TheoremReport {
    timed(|| {
        let mut rep = TheoremReport::new("two-process", system);
        let ev = Evaluator::with_fault(system, faults.eval);
        let label = trigger_label(system);
        for t1 in 0..=system.horizon() {
            let base = ev.runs_l1(&FormulaL1::Tocc(t1, label.clone())).unwrap();
            if is_valid(&ev, &base) {
                continue;
            }
            for alpha in system.nodes() {
                let known = ev.knows(alpha, &base);
                for r in known.ones() {
                    let run = &system.runs()[r];
                    let Some(origin) = run.trigger() else { continue };
                    rep.instances += 1;
                    rep.antecedent_true += 1;
                    if !run.causal().causes(origin, alpha) {
                        rep.violate(
                            r,
                            format!("alpha0={origin} alpha1={alpha} t1={t1}"),
                            "alpha0 ~> alpha1".into(),
                        );
                    }
                }
            }
        }
        rep
    })
}

/// Seeded faults of the self-test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    CentipedeSkipHubs,
    BroomOriginOnly,
    CkSingleStep,
    KnowledgeAsTruth,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [
        Mutation::CentipedeSkipHubs,
        Mutation::BroomOriginOnly,
        Mutation::CkSingleStep,
        Mutation::KnowledgeAsTruth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::CentipedeSkipHubs => "centipede-skip-hubs",
            Mutation::BroomOriginOnly => "broom-origin-only",
            Mutation::CkSingleStep => "ck-single-step",
            Mutation::KnowledgeAsTruth => "knowledge-as-truth",
        }
    }
}

/// Runs the checks a mutation should break with the fault injected. The
/// report passes iff at least one of them records a violation.
pub fn check_mutation(system: &System, mutation: Mutation, opts: &SuiteOptions) -> TheoremReport {
    timed(|| {
        let faults = match mutation {
            Mutation::CentipedeSkipHubs => Faults {
                finder: FinderFault::SkipHubs,
                ..Faults::default()
            },
            Mutation::BroomOriginOnly => Faults {
                finder: FinderFault::OriginOnly,
                ..Faults::default()
            },
            Mutation::CkSingleStep => Faults {
                eval: EvalFault::CkSingleStep,
                ..Faults::default()
            },
            Mutation::KnowledgeAsTruth => Faults {
                eval: EvalFault::KnowledgeAsTruth,
                ..Faults::default()
            },
        };
        let reports: Vec<TheoremReport> = match mutation {
            Mutation::CentipedeSkipHubs => {
                vec![check_nested_gain_with(system, opts.max_chain, faults)]
            }
            Mutation::BroomOriginOnly => vec![check_ck_gain_with(system, opts.max_set, faults)],
            Mutation::CkSingleStep => {
                let mut v = check_logic_lemmas_with(system, opts.seed, faults);
                v.push(check_ck_gain_with(system, opts.max_set, faults));
                v
            }
            Mutation::KnowledgeAsTruth => vec![
                check_two_process_with(system, faults),
                check_nested_gain_with(system, opts.max_chain, faults),
            ],
        };
        let mut rep = TheoremReport::new(&format!("mutation-{}", mutation.name()), system);
        rep.instances = reports.len() as u64;
        let flipped: Vec<&TheoremReport> = reports.iter().filter(|r| r.violation_count > 0).collect();
        rep.antecedent_true = flipped.len() as u64;
        for r in &flipped {
            rep.notes.push(format!("flipped {} ({} violations)", r.id, r.violation_count));
        }
        if flipped.is_empty() {
            rep.violate(0, mutation.name().into(), "at least one violated report".into());
        }
        rep
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Nested,
    Ck,
    Classic,
    Lemmas,
    Solve,
    Wtr,
    Ttr,
    Mutations,
    /// Every suite applicable to the scenario except the mutations.
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "nested" => Suite::Nested,
            "ck" => Suite::Ck,
            "classic" => Suite::Classic,
            "lemmas" => Suite::Lemmas,
            "solve" => Suite::Solve,
            "wtr" => Suite::Wtr,
            "ttr" => Suite::Ttr,
            "mutations" => Suite::Mutations,
            "all" => Suite::All,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    pub max_chain: usize,
    pub max_set: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            max_chain: 3,
            max_set: 3,
            seed: 7,
        }
    }
}

/// Runs a suite on one system; `instance` is the scenario's coordination
/// instance, if any.
pub fn run_suite(
    system: &System,
    instance: Option<&CoordinationInstance>,
    suite: Suite,
    opts: &SuiteOptions,
) -> Vec<TheoremReport> {
    let mut out = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Nested) {
        out.push(check_nested_gain(system, opts.max_chain));
    }
    if wants(Suite::Ck) {
        out.push(check_ck_gain(system, opts.max_set));
    }
    if wants(Suite::Classic) {
        out.push(check_classic_gain(system, opts.max_chain));
    }
    if wants(Suite::Lemmas) {
        out.extend(check_logic_lemmas(system, opts.seed));
    }
    let missing = |id: &str| {
        let mut r = TheoremReport::new(id, system);
        r.precondition = Some("scenario has no coordination instance".into());
        r
    };
    if wants(Suite::Solve) {
        match instance {
            Some(i) => out.push(check_solves(system, i)),
            None if suite == Suite::Solve => out.push(missing("solves")),
            None => {}
        }
    }
    if wants(Suite::Wtr) {
        match instance {
            Some(i) if i.kind == ProblemKind::Wtr || suite == Suite::Wtr => {
                out.push(check_wtr_theorem(system, i))
            }
            None if suite == Suite::Wtr => out.push(missing("wtr-nested-knowledge")),
            _ => {}
        }
    }
    if wants(Suite::Ttr) {
        match instance {
            Some(i) if matches!(i.kind, ProblemKind::Ttr | ProblemKind::Sr) || suite == Suite::Ttr => {
                out.push(check_ttr_theorem(system, i))
            }
            None if suite == Suite::Ttr => out.push(missing("ttr-common-knowledge")),
            _ => {}
        }
    }
    if suite == Suite::Mutations {
        for m in Mutation::ALL {
            out.push(check_mutation(system, m, opts));
        }
    }
    out
}
