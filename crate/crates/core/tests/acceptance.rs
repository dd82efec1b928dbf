//! Acceptance suite: one PASS/FAIL line per criterion, plus witness lines.
//! Runs without the libtest harness so the lines always reach the output.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbk::causality::{find_uneven_broom, find_uneven_centipede, is_broom, is_centipede};
use nbk::coordination::{beta_node, response_nodes, solves, ProblemKind, Verdict};
use nbk::harness::{
    check_ck_gain, check_classic_gain, check_logic_lemmas, check_mutation, check_nested_gain,
    check_timestamp_embedding, check_ttr_theorem, check_wtr_theorem, Mutation, SuiteOptions,
};
use nbk::logic::{Evaluator, FormulaL1};
use nbk::network::{AgentId, Node, Topology};
use nbk::runs::{enumerate_runs, node_index, Label, Run, ScenarioSpec, System};

use common::{all_scenarios, load, scenario_path};

const CAUSALITY_LIMIT: Duration = Duration::from_secs(60);
const CK_LIMIT: Duration = Duration::from_secs(60);
const EMBEDDING_LIMIT: Duration = Duration::from_secs(300);
const GAIN_LIMIT: Duration = Duration::from_secs(600);
/// Non-vacuous instances required per modal law.
const MIN_LAW_INSTANCES: u64 = 100;
/// (A, φ) combinations per scenario for the fixpoint comparison.
const CK_COMBOS: usize = 24;
const EMBEDDING_DEPTH: usize = 3;
/// Desk-scale limits for the causality oracle scenarios.
const DESK_AGENTS: u32 = 3;
const DESK_HORIZON: u32 = 6;
const DESK_BOUND: u32 = 3;
const DESK_RUNS: usize = 500;

const DESK: [&str; 7] = [
    "centipede",
    "relay",
    "ring",
    "two-way",
    "wtr-chain",
    "wtr-delta5",
    "sr-star",
];

struct Outcome {
    pass: bool,
    detail: String,
    witness: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            detail,
            witness: Vec::new(),
        }
    }
}

fn within(limit: Duration, start: Instant, o: &mut Outcome) {
    let spent = start.elapsed();
    o.detail.push_str(&format!(" time={:.1}s limit={}s", spent.as_secs_f64(), limit.as_secs()));
    if spent > limit {
        o.pass = false;
    }
}

fn node(a: u32, t: u32) -> Node {
    Node::new(a, t)
}

/// Reflexive-transitive closure over a dense node grid.
fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<FixedBitSet> {
    let mut reach: Vec<FixedBitSet> = (0..n)
        .map(|i| {
            let mut b = FixedBitSet::with_capacity(n);
            b.insert(i);
            b
        })
        .collect();
    for &(a, b) in edges {
        reach[a].insert(b);
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i].contains(k) {
                let row = reach[k].clone();
                reach[i].union_with(&row);
            }
        }
    }
    reach
}

/// Causality by closure of the locality and message clauses.
fn causes_oracle(run: &Run) -> Vec<FixedBitSet> {
    let n = run.agent_count();
    let mut edges = Vec::new();
    for v in run.nodes() {
        if v.time < run.horizon() {
            edges.push((node_index(n, v), node_index(n, Node { time: v.time + 1, ..v })));
        }
    }
    for m in run.messages() {
        if let Some(r) = m.receive_node() {
            edges.push((node_index(n, m.send_node()), node_index(n, r)));
        }
    }
    closure(run.node_count(), &edges)
}

/// Bound guarantee by closure of the locality and channel-bound clauses.
fn guarantee_oracle(topo: &Topology, horizon: u32) -> Vec<FixedBitSet> {
    let n = topo.agent_count();
    let count = (horizon as usize + 1) * n as usize;
    let mut edges = Vec::new();
    for t in 0..=horizon {
        for a in topo.agents() {
            let v = Node { agent: a, time: t };
            if t < horizon {
                edges.push((node_index(n, v), node_index(n, Node { agent: a, time: t + 1 })));
            }
            for c in topo.out_channels(a) {
                if t + c.bound <= horizon {
                    edges.push((node_index(n, v), node_index(n, Node { agent: c.to, time: t + c.bound })));
                }
            }
        }
    }
    closure(count, &edges)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut pairs, mut bad, mut runs) = (0u64, Vec::new(), 0usize);
    for name in DESK {
        let (_, sys) = load(name);
        let topo = sys.topology();
        let desk = topo.agent_count() <= DESK_AGENTS
            && sys.horizon() <= DESK_HORIZON
            && topo.channels().iter().all(|c| c.bound <= DESK_BOUND)
            && sys.len() <= DESK_RUNS;
        if !desk {
            bad.push(format!("{name} exceeds desk limits"));
        }
        let guarantee = guarantee_oracle(topo, sys.horizon());
        let n = topo.agent_count();
        for run in sys.runs() {
            runs += 1;
            let oracle = causes_oracle(run);
            for a in run.nodes() {
                for b in run.nodes() {
                    pairs += 1;
                    let (i, j) = (node_index(n, a), node_index(n, b));
                    if run.causal().causes(a, b) != oracle[i].contains(j) {
                        bad.push(format!("{name} run {} causes({a},{b})", run.id()));
                    }
                    if topo.bound_guarantee(a, b) != guarantee[i].contains(j) {
                        bad.push(format!("{name} run {} guarantee({a},{b})", run.id()));
                    }
                }
            }
        }
    }
    let mut o = Outcome::new(
        bad.is_empty(),
        format!("scenarios={} runs={runs} node-pairs={pairs} mismatches={}", DESK.len(), bad.len()),
    );
    o.witness = bad.into_iter().take(5).collect();
    within(CAUSALITY_LIMIT, start, &mut o);
    o
}

fn ck_combos(sys: &System, seed: u64) -> Vec<(BTreeSet<Node>, FormulaL1)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<Node> = sys.nodes().collect();
    let label = sys.scenario().trigger.label.as_str().to_string();
    let h = sys.horizon();
    let mut out = Vec::new();
    // One combination that is never vacuous: a late node about the
    // earliest trigger time.
    let trigger = &sys.scenario().trigger;
    out.push((
        [Node {
            agent: trigger.agent,
            time: h,
        }]
        .into_iter()
        .collect(),
        FormulaL1::tocc(trigger.window.1, &label),
    ));
    while out.len() < CK_COMBOS {
        let size = rng.gen_range(1..=3);
        let a: BTreeSet<Node> = nodes.choose_multiple(&mut rng, size).copied().collect();
        let t = rng.gen_range(0..=h);
        let phi = match rng.gen_range(0..3) {
            0 => FormulaL1::tocc(t, &label),
            1 => FormulaL1::not(FormulaL1::tocc(t, &label)),
            _ => FormulaL1::k(*nodes.choose(&mut rng).unwrap(), FormulaL1::tocc(t, &label)),
        };
        out.push((a, phi));
    }
    out
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (mut combos, mut nonempty, mut bad) = (0usize, 0usize, Vec::new());
    for (s, name) in DESK.iter().enumerate() {
        let (_, sys) = load(name);
        let ev = Evaluator::new(&sys);
        for (a, phi) in ck_combos(&sys, 100 + s as u64) {
            combos += 1;
            let fix = ev.ck_fixpoint(&a, &phi).unwrap();
            let iter = ev.iterate_e(&a, &phi, sys.len()).unwrap();
            let direct_first = ev.eval_ck_bounded(&sys.runs()[0], &a, &phi, sys.len()).unwrap();
            if !fix.is_clear() {
                nonempty += 1;
            }
            if fix != iter || direct_first != fix.contains(0) {
                bad.push(format!("{name} A={a:?} phi={phi}"));
            }
        }
    }
    let mut o = Outcome::new(
        bad.is_empty() && nonempty > 0,
        format!(
            "scenarios={} combinations={combos} (>= {CK_COMBOS} each) non-empty={nonempty} k=|runs| mismatches={}",
            DESK.len(),
            bad.len()
        ),
    );
    o.witness = bad.into_iter().take(5).collect();
    within(CK_LIMIT, start, &mut o);
    o
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (_, sys) = load("relay");
    let labels = [Label::from("es"), Label::from("b")];
    let agents = [AgentId(1), AgentId(2)];
    let rep = check_timestamp_embedding(&sys, &labels, &agents, EMBEDDING_DEPTH);
    let mut o = Outcome::new(
        rep.passed(),
        format!(
            "relay runs={} times=0..={} {} evaluations={} violations={}",
            sys.len(),
            sys.horizon(),
            rep.notes.last().cloned().unwrap_or_default(),
            rep.instances,
            rep.violation_count
        ),
    );
    o.witness = rep.violations.iter().take(3).map(|v| v.inputs.clone()).collect();
    within(EMBEDDING_LIMIT, start, &mut o);
    o
}

fn criterion_4() -> Outcome {
    const LAWS: [&str; 7] = [
        "s5-k",
        "s5-t",
        "s5-4",
        "s5-5",
        "s5-necessitation",
        "ck-fixpoint",
        "ck-induction",
    ];
    let names = all_scenarios();
    let results: Vec<(String, Vec<nbk::harness::TheoremReport>)> = thread::scope(|s| {
        let handles: Vec<_> = names
            .iter()
            .map(|name| {
                s.spawn(move || {
                    let (_, sys) = load(name);
                    (name.clone(), check_logic_lemmas(&sys, SuiteOptions::default().seed))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut bad = Vec::new();
    let mut least = u64::MAX;
    for (name, reports) in &results {
        for r in reports {
            let law = LAWS.contains(&r.id.as_str());
            if law {
                least = least.min(r.antecedent_true);
            }
            if !r.passed() || (law && r.antecedent_true < MIN_LAW_INSTANCES) {
                bad.push(format!(
                    "{name} {} status={} non-vacuous={}",
                    r.id,
                    r.status(),
                    r.antecedent_true
                ));
            }
        }
    }
    let mut o = Outcome::new(
        bad.is_empty(),
        format!(
            "systems={} laws={} min-non-vacuous={least} (need {MIN_LAW_INSTANCES}) failures={}",
            results.len(),
            LAWS.len(),
            bad.len()
        ),
    );
    o.witness = bad;
    o
}

fn criterion_5() -> Outcome {
    const GAIN: [&str; 8] = [
        "centipede",
        "broom",
        "relay",
        "ring",
        "two-way",
        "wtr-chain",
        "sr-star",
        "charlie",
    ];
    let start = Instant::now();
    let opts = SuiteOptions::default();
    let results: Vec<(String, Vec<nbk::harness::TheoremReport>)> = thread::scope(|s| {
        let handles: Vec<_> = GAIN
            .iter()
            .map(|name| {
                s.spawn(move || {
                    let (_, sys) = load(name);
                    (
                        name.to_string(),
                        vec![
                            check_nested_gain(&sys, opts.max_chain),
                            check_ck_gain(&sys, opts.max_set),
                            check_classic_gain(&sys, opts.max_chain),
                        ],
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut bad = Vec::new();
    let mut witness = Vec::new();
    for (name, reports) in &results {
        for r in reports {
            if !r.passed() {
                bad.push(format!("{name} {} status={}", r.id, r.status()));
            }
        }
        let line: Vec<String> = reports
            .iter()
            .map(|r| format!("{}={}", r.id, r.antecedent_true))
            .collect();
        witness.push(format!("{name}: antecedent-true {}", line.join(" ")));
    }

    // The uneven centipede: α2 = 3@1 lies before α1 = 2@3.
    let (_, csys) = load("centipede");
    let targets = [node(1, 0), node(2, 3), node(3, 1)];
    let f = FormulaL1::nested_k(&targets, FormulaL1::tocc(0, "es"));
    let ev = Evaluator::new(&csys);
    let holds = ev.runs_l1(&f).unwrap();
    let mut cent_ok = targets[2].time < targets[1].time && !holds.is_clear();
    for r in holds.ones() {
        let run = &csys.runs()[r];
        match find_uneven_centipede(run, csys.topology(), &targets) {
            Some(c) if is_centipede(run, csys.topology(), &c.spine, &c.targets) == Ok(true) => {
                if r == holds.ones().next().unwrap() {
                    witness.push(format!(
                        "centipede run {r}: {f} holds; centipede spine={:?}",
                        c.spine.iter().map(|n| n.to_string()).collect::<Vec<_>>()
                    ));
                }
            }
            _ => cent_ok = false,
        }
    }
    witness.push(format!("centipede formula holds in {} of {} runs", holds.count_ones(..), csys.len()));
    if !cent_ok {
        bad.push("uneven centipede not realized".into());
    }

    // The broom: staggered responders at the leaves, hub at the center.
    let (sc, bsys) = load("broom");
    let inst = sc.instance.clone().unwrap();
    let ev = Evaluator::new(&bsys);
    let (mut with_hub_center, mut triggered, mut broom_ok) = (None, 0, true);
    for run in bsys.runs().iter().filter(|r| r.trigger().is_some()) {
        triggered += 1;
        let a = response_nodes(run, &inst).unwrap().unwrap();
        let t_min = a.iter().map(|n| n.time).min().unwrap();
        let set: BTreeSet<Node> = a.iter().copied().collect();
        let ck = ev.ck_fixpoint(&set, &FormulaL1::tocc(t_min, "es")).unwrap();
        let broom = find_uneven_broom(run, bsys.topology(), run.trigger().unwrap(), &a);
        match broom {
            Some(b) if ck.contains(run.id()) && is_broom(run, bsys.topology(), &b) => {
                if b.hub.agent == AgentId(1) && with_hub_center.is_none() {
                    with_hub_center = Some(format!(
                        "broom run {}: C{{{},{}}} tocc({t_min},es) holds; broom origin={} hub={}",
                        run.id(),
                        a[0],
                        a[1],
                        b.origin,
                        b.hub
                    ));
                }
            }
            _ => broom_ok = false,
        }
    }
    match with_hub_center {
        Some(w) if broom_ok => witness.push(format!("{w} ({triggered} triggered runs checked)")),
        _ => bad.push("uneven broom not realized".into()),
    }

    let mut o = Outcome::new(
        bad.is_empty(),
        format!("scenarios={} L=3 |A|<=3 failures={}", GAIN.len(), bad.len()),
    );
    witness.extend(bad);
    o.witness = witness;
    within(GAIN_LIMIT, start, &mut o);
    o
}

fn criterion_6() -> Outcome {
    let mut bad = Vec::new();
    let mut witness = Vec::new();
    for name in ["wtr-chain", "wtr-delta5", "charlie"] {
        let (sc, sys) = load(name);
        let inst = sc.instance.clone().unwrap();
        let solved = solves(&sys, &inst).is_solved();
        let rep = check_wtr_theorem(&sys, &inst);
        let triggered = sys.runs().iter().filter(|r| r.trigger().is_some()).count() as u64;
        if !(solved && rep.passed() && rep.antecedent_true == triggered) {
            bad.push(format!("{name}: solved={solved} theorem={}", rep.status()));
        }
        witness.push(format!("{name}: WTR solved={solved}, nested beta formula holds in {}/{triggered} triggered runs", rep.antecedent_true - rep.violation_count));
    }
    for name in ["broom", "sr-star", "two-way"] {
        let (sc, sys) = load(name);
        let inst = sc.instance.clone().unwrap();
        let solved = solves(&sys, &inst).is_solved();
        let rep = check_ttr_theorem(&sys, &inst);
        let triggered = sys.runs().iter().filter(|r| r.trigger().is_some()).count() as u64;
        if !(solved && rep.passed() && rep.antecedent_true == triggered) {
            bad.push(format!("{name}: solved={solved} theorem={}", rep.status()));
        }
        witness.push(format!(
            "{name}: {} solved={solved}, C_A at the earliest response holds in {}/{triggered} triggered runs",
            inst.kind,
            rep.antecedent_true - rep.violation_count
        ));
    }
    let (sc, sys) = load("wtr-chain-nowait");
    match solves(&sys, sc.instance.as_ref().unwrap()) {
        Verdict::Counterexample(c) => witness.push(format!("wtr-chain-nowait: counterexample run {} ({})", c.run, c.detail)),
        Verdict::Solved => bad.push("wtr-chain-nowait unexpectedly solved".into()),
    }
    let mut identical = 0;
    for name in all_scenarios() {
        let (sc, sys) = load(&name);
        let Some(sr) = sc.instance_as(ProblemKind::Sr) else { continue };
        let ttr = sr.as_ttr().unwrap();
        let (a, b) = (solves(&sys, &sr), solves(&sys, &ttr));
        let same = match (&a, &b) {
            (Verdict::Solved, Verdict::Solved) => true,
            (Verdict::Counterexample(x), Verdict::Counterexample(y)) => x.run == y.run && x.nodes == y.nodes,
            _ => false,
        };
        if same {
            identical += 1;
        } else {
            bad.push(format!("{name}: SR verdict {a} differs from zero-delta TTR verdict {b}"));
        }
    }
    witness.push(format!("SR vs zero-delta TTR: identical verdicts on {identical} systems"));
    let mut o = Outcome::new(bad.is_empty() && identical > 0, format!("failures={}", bad.len()));
    witness.extend(bad);
    o.witness = witness;
    o
}

fn criterion_7() -> Outcome {
    let (sc, sys) = load("charlie");
    let inst = sc.instance.clone().unwrap();
    let ev = Evaluator::new(&sys);
    let mut bad = Vec::new();
    let mut witness = Vec::new();
    if !solves(&sys, &inst).is_solved() {
        bad.push("charlie instance not solved".into());
    }
    let rep = check_wtr_theorem(&sys, &inst);
    if !rep.passed() {
        bad.push(format!("wtr theorem status={}", rep.status()));
    }
    let (mut reversed, mut stated, mut forward, mut triggered) = (0, 0, 0, 0);
    for run in sys.runs().iter().filter(|r| r.trigger().is_some()) {
        triggered += 1;
        let nodes = response_nodes(run, &inst).unwrap().unwrap();
        let (deliver, sign) = (nodes[0], nodes[1]);
        // β: the latest node at which I can deliver, given when You sign.
        let beta = beta_node(&inst, 1, sign.time).unwrap();
        let f = FormulaL1::k(sign, FormulaL1::k(beta, FormulaL1::tocc(beta.time, "deposit")));
        let g = FormulaL1::k(sign, FormulaL1::k(deliver, FormulaL1::tocc(deliver.time, "deposit")));
        let h = FormulaL1::k(deliver, FormulaL1::k(sign, FormulaL1::tocc(sign.time, "deposit")));
        let (fv, gv, hv) = (
            ev.eval_l1(run, &f).unwrap(),
            ev.eval_l1(run, &g).unwrap(),
            ev.eval_l1(run, &h).unwrap(),
        );
        reversed += fv as usize;
        stated += gv as usize;
        forward += hv as usize;
        if triggered == 1 {
            witness.push(format!(
                "charlie run {}: deliver at {deliver}, sign at {sign}, beta={beta}; {f} = {fv}",
                run.id()
            ));
        }
    }
    if reversed != triggered || stated != triggered {
        bad.push(format!("signer-side knowledge missing: {reversed}/{stated} of {triggered}"));
    }
    witness.push(format!(
        "K at the signer about the deliverer's bounded node: {reversed}/{triggered} runs; K[You]K[I] tocc(t_I): {stated}/{triggered}; forward K[I]K[You] tocc(t_You): {forward}/{triggered}"
    ));
    for name in ["charlie-naive", "charlie-after-hearing"] {
        let (sc, sys) = load(name);
        match solves(&sys, sc.instance.as_ref().unwrap()) {
            Verdict::Counterexample(c) => {
                witness.push(format!("{name}: counterexample run {} ({:?}: {})", c.run, c.clause, c.detail));
                for line in sys.runs()[c.run].canonical_text().lines() {
                    witness.push(format!("  {line}"));
                }
            }
            Verdict::Solved => bad.push(format!("{name}: naive policy unexpectedly solves")),
        }
    }
    let mut o = Outcome::new(bad.is_empty(), format!("triggered runs={triggered} failures={}", bad.len()));
    witness.extend(bad);
    o.witness = witness;
    o
}

fn criterion_8() -> Outcome {
    let mut bad = Vec::new();
    let mut witness = Vec::new();
    let (sc, full) = load("broom");
    let inst = sc.instance.clone().unwrap();
    let mut sets: BTreeSet<Vec<Node>> = BTreeSet::new();
    for run in full.runs().iter().filter(|r| r.trigger().is_some()) {
        sets.insert(response_nodes(run, &inst).unwrap().unwrap());
    }
    let topo = full.topology().without_channel(AgentId(2), AgentId(1));
    let cut = enumerate_runs(&ScenarioSpec::new(topo, full.horizon(), sc.spec.trigger.clone())).unwrap();
    let (ev_full, ev_cut) = (Evaluator::new(&full), Evaluator::new(&cut));
    let (mut before, mut after, mut brooms) = (0, 0, 0);
    for a in &sets {
        let set: BTreeSet<Node> = a.iter().copied().collect();
        let t_min = a.iter().map(|n| n.time).min().unwrap();
        let phi = FormulaL1::tocc(t_min, "es");
        before += ev_full.ck_fixpoint(&set, &phi).unwrap().count_ones(..);
        after += ev_cut.ck_fixpoint(&set, &phi).unwrap().count_ones(..);
        for run in cut.runs().iter().filter(|r| r.trigger().is_some()) {
            if find_uneven_broom(run, cut.topology(), run.trigger().unwrap(), a).is_some() {
                brooms += 1;
            }
        }
    }
    witness.push(format!(
        "hub channel 2->1 removed: {} response sets, C_A true in {before} runs before and {after} after; brooms found after: {brooms}",
        sets.len()
    ));
    if before == 0 || after != 0 || brooms != 0 {
        bad.push("negative control did not behave".into());
    }
    let opts = SuiteOptions::default();
    for name in ["centipede", "broom"] {
        let (_, sys) = load(name);
        for m in Mutation::ALL {
            let rep = check_mutation(&sys, m, &opts);
            witness.push(format!("{name} {}: {}", m.name(), rep.notes[1..].join("; ")));
            if !rep.passed() {
                bad.push(format!("{name}: mutation {} survived", m.name()));
            }
        }
    }
    let mut o = Outcome::new(bad.is_empty(), format!("failures={}", bad.len()));
    witness.extend(bad);
    o.witness = witness;
    o
}

fn pipeline(names: &[String]) -> Vec<u8> {
    let exe = env!("CARGO_BIN_EXE_nbk");
    let mut out = Vec::new();
    for name in names {
        let path = scenario_path(name);
        let mut runs = vec![
            vec!["enumerate", "--dump", "--scenario"],
            vec!["verify", "--suite", "all", "--scenario"],
        ];
        if name == "centipede" || name == "broom" {
            runs.push(vec!["verify", "--suite", "mutations", "--scenario"]);
        }
        for mut args in runs {
            let p = path.to_str().unwrap();
            args.push(p);
            let o = Command::new(exe).args(&args).output().expect("binary runs");
            out.extend(format!("$ {} -> {:?}\n", args.join(" "), o.status.code()).into_bytes());
            out.extend(o.stdout);
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let names = all_scenarios();
    let (a, b) = thread::scope(|s| {
        let x = s.spawn(|| pipeline(&names));
        let y = s.spawn(|| pipeline(&names));
        (x.join().unwrap(), y.join().unwrap())
    });
    let same = a == b;
    let mut o = Outcome::new(
        same && !a.is_empty(),
        format!("scenarios={} report bytes={} identical={same}", names.len(), a.len()),
    );
    if !same {
        let at = a.iter().zip(&b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
        o.witness.push(format!("first difference at byte {at}"));
    }
    o
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "causality oracle equivalence", criterion_1),
        (2, "common knowledge fixpoint equals bounded iteration", criterion_2),
        (3, "timestamp embedding, exhaustive to depth 3", criterion_3),
        (4, "modal laws", criterion_4),
        (5, "knowledge gain theorems", criterion_5),
        (6, "coordination theorems", criterion_6),
        (7, "signer/deliverer reversal", criterion_7),
        (8, "negative controls and mutations", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let results: Vec<(u32, &str, Duration, Result<Outcome, String>)> = thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(n, name, f)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let r = std::panic::catch_unwind(f).map_err(|e| {
                        e.downcast_ref::<String>()
                            .cloned()
                            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into())
                    });
                    (n, name, start.elapsed(), r)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (n, name, elapsed, r) in results {
        match r {
            Ok(o) => {
                let verdict = if o.pass { "PASS" } else { "FAIL" };
                failed += (!o.pass) as usize;
                println!("criterion {n} {verdict}: {name}: {} [{:.1}s]", o.detail, elapsed.as_secs_f64());
                for w in o.witness {
                    println!("    {w}");
                }
            }
            Err(msg) => {
                failed += 1;
                println!("criterion {n} FAIL: {name}: panicked: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 9 criteria passed");
}
