//! Command-line front end: `enumerate`, `check`, `find` and `verify`.
//!
//! Exit status is 0 on success, 1 when a verified report is violated,
//! vacuous or blocked by a precondition, and 2 on usage, schema, parse or
//! enumeration errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::causality::{find_uneven_broom, find_uneven_centipede, to_dot, DotOverlay};
use crate::harness::{run_suite, Suite, SuiteOptions};
use crate::logic::{parse_formula, Evaluator, Formula};
use crate::network::{AgentId, Node};
use crate::runs::{enumerate_runs, System};
use crate::scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "nbk", about = "Node-based knowledge and coordination checker", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the enumeration cap.
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate the runs of a scenario and print a summary.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Print every run in canonical form.
        #[arg(long)]
        dump: bool,
    },
    /// Evaluate a formula on every run, or on one run.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        run: Option<usize>,
        /// Evaluation time for agent-indexed formulas; all times if absent.
        #[arg(long)]
        time: Option<u32>,
    },
    /// Look for a centipede or broom in one run.
    Find {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        run: usize,
        /// `centipede 1@0 2@3 3@1` or `broom 1@0 -> 2@4 3@5`.
        #[arg(long)]
        structure: String,
        /// Write a Graphviz diagram of the run here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Run a theorem suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// nested | ck | classic | lemmas | solve | wtr | ttr | mutations | all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 3)]
        max_chain: usize,
        #[arg(long, default_value_t = 3)]
        max_set: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Output of one command: text for stdout and the exit status.
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Runs the CLI and writes its output; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let out = run(args);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}

/// Runs the CLI without touching the process streams.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { stdout: text, stderr: String::new(), code }
            } else {
                Outcome { stdout: String::new(), stderr: text, code }
            };
        }
    };
    let mut stdout = String::new();
    match dispatch(cli.command, &mut stdout) {
        Ok(code) => Outcome { stdout, stderr: String::new(), code },
        Err(Failure(msg)) => Outcome {
            stdout,
            stderr: format!("error: {msg}\n"),
            code: 2,
        },
    }
}

fn load(common: &Common) -> Result<(Scenario, System), Failure> {
    let mut scenario = Scenario::load(&common.scenario)?;
    if let Some(cap) = common.cap {
        scenario.spec = scenario.spec.clone().with_cap(cap);
    }
    let system = enumerate_runs(&scenario.spec)?;
    Ok((scenario, system))
}

fn dispatch(cmd: Command, out: &mut String) -> Result<i32, Failure> {
    match cmd {
        Command::Enumerate { common, dump } => {
            let (scenario, system) = load(&common)?;
            let triggered = system.runs().iter().filter(|r| r.trigger().is_some()).count();
            let _ = writeln!(
                out,
                "scenario {} agents={} horizon={} runs={} triggered={} absent={} states={}",
                scenario.name,
                system.topology().agent_count(),
                system.horizon(),
                system.len(),
                triggered,
                system.len() - triggered,
                system.state_count()
            );
            if dump {
                out.push_str(&system.canonical_text());
            }
            Ok(0)
        }
        Command::Check {
            common,
            formula,
            run,
            time,
        } => {
            let f = parse_formula(&formula)?;
            let (_, system) = load(&common)?;
            if let Some(id) = run {
                if id >= system.len() {
                    return Err(Failure(format!("unknown run {id} (system has {} runs)", system.len())));
                }
            }
            let ev = Evaluator::new(&system);
            let ids: Vec<usize> = match run {
                Some(id) => vec![id],
                None => (0..system.len()).collect(),
            };
            let _ = writeln!(out, "formula {f}");
            match &f {
                Formula::L1(g) => {
                    let set = ev.runs_l1(g)?;
                    for &id in &ids {
                        let _ = writeln!(out, "run {id} {}", set.contains(id));
                    }
                    if run.is_none() {
                        let _ = writeln!(out, "holds in {} of {} runs", set.count_ones(..), system.len());
                    }
                }
                Formula::L0(g) => {
                    let times: Vec<u32> = match time {
                        Some(t) => vec![t],
                        None => (0..=system.horizon()).collect(),
                    };
                    let mut sets = Vec::new();
                    for &t in &times {
                        sets.push(ev.runs_l0(t, g)?);
                    }
                    for &id in &ids {
                        let row: Vec<String> = times
                            .iter()
                            .zip(&sets)
                            .map(|(t, s)| format!("t{t}={}", s.contains(id)))
                            .collect();
                        let _ = writeln!(out, "run {id} {}", row.join(" "));
                    }
                }
            }
            Ok(0)
        }
        Command::Find {
            common,
            run,
            structure,
            dot,
        } => {
            let (_, system) = load(&common)?;
            let r = system
                .runs()
                .get(run)
                .ok_or_else(|| Failure(format!("unknown run {run} (system has {} runs)", system.len())))?;
            let spec = parse_structure(&structure)?;
            for n in spec.nodes() {
                r.check_node(n)?;
            }
            let overlay = match spec {
                StructureSpec::Centipede(targets) => {
                    match find_uneven_centipede(r, system.topology(), &targets) {
                        Some(c) => {
                            let _ = writeln!(
                                out,
                                "centipede spine={} targets={}",
                                list(&c.spine),
                                list(&c.targets)
                            );
                            DotOverlay::centipede(&c)
                        }
                        None => {
                            let _ = writeln!(out, "centipede absent targets={}", list(&targets));
                            DotOverlay::default()
                        }
                    }
                }
                StructureSpec::Broom(origin, targets) => {
                    match find_uneven_broom(r, system.topology(), origin, &targets) {
                        Some(b) => {
                            let _ = writeln!(
                                out,
                                "broom origin={} hub={} targets={}",
                                b.origin,
                                b.hub,
                                list(&b.targets)
                            );
                            DotOverlay::broom(&b)
                        }
                        None => {
                            let _ = writeln!(out, "broom absent origin={origin} targets={}", list(&targets));
                            DotOverlay::default()
                        }
                    }
                }
            };
            if let Some(path) = dot {
                std::fs::write(&path, to_dot(r, &overlay))
                    .map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(0)
        }
        Command::Verify {
            common,
            suite,
            max_chain,
            max_set,
            seed,
        } => {
            let suite = Suite::parse(&suite).ok_or_else(|| Failure(format!("unknown suite {suite}")))?;
            let (scenario, system) = load(&common)?;
            let opts = SuiteOptions {
                max_chain,
                max_set,
                seed,
            };
            let reports = run_suite(&system, scenario.instance.as_ref(), suite, &opts);
            let mut code = 0;
            for mut r in reports {
                r.scenario = scenario.name.clone();
                out.push_str(&r.to_text());
                if !r.passed() {
                    code = 1;
                }
            }
            Ok(code)
        }
    }
}

fn list(nodes: &[Node]) -> String {
    let v: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
    format!("<{}>", v.join(","))
}

#[derive(Debug, PartialEq, Eq)]
enum StructureSpec {
    Centipede(Vec<Node>),
    Broom(Node, Vec<Node>),
}

impl StructureSpec {
    fn nodes(&self) -> Vec<Node> {
        match self {
            StructureSpec::Centipede(v) => v.clone(),
            StructureSpec::Broom(o, v) => std::iter::once(*o).chain(v.iter().copied()).collect(),
        }
    }
}

fn parse_node(s: &str) -> Result<Node, Failure> {
    let bad = || Failure(format!("malformed node {s:?}, expected agent@time"));
    let (a, t) = s.split_once('@').ok_or_else(bad)?;
    let agent: u32 = a.parse().map_err(|_| bad())?;
    let time: u32 = t.parse().map_err(|_| bad())?;
    if agent == 0 {
        return Err(Failure("agents are numbered from 1".into()));
    }
    Ok(Node {
        agent: AgentId(agent),
        time,
    })
}

fn parse_structure(s: &str) -> Result<StructureSpec, Failure> {
    let mut words = s.split_whitespace();
    let kind = words.next().unwrap_or("");
    let rest: Vec<&str> = words.collect();
    match kind {
        "centipede" => {
            if rest.len() < 2 {
                return Err(Failure("a centipede needs at least two target nodes".into()));
            }
            let nodes = rest.iter().map(|w| parse_node(w)).collect::<Result<_, _>>()?;
            Ok(StructureSpec::Centipede(nodes))
        }
        "broom" => match rest.as_slice() {
            [origin, "->", targets @ ..] if !targets.is_empty() => Ok(StructureSpec::Broom(
                parse_node(origin)?,
                targets.iter().map(|w| parse_node(w)).collect::<Result<_, _>>()?,
            )),
            _ => Err(Failure("expected `broom <origin> -> <target>...`".into())),
        },
        _ => Err(Failure(format!("unknown structure {kind:?}, expected centipede or broom"))),
    }
}
