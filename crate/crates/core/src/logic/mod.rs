//! Agent-based (`L0`) and node-based (`L1`) epistemic formulas and their
//! model checker.
//!
//! `L0` formulas are evaluated at a point `(r, t)`; `K_i` ranges over the
//! runs where agent `i` has the same local state at the same time. `L1`
//! formulas carry their own time stamps and are evaluated at a run.
//! Both evaluators work on run sets: every formula denotes the set of runs
//! (at a fixed time, for `L0`) where it holds.

mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::network::{AgentId, Node, TimePoint};
use crate::runs::{Label, Run, System};

pub use parse::parse_formula;

/// A set of runs, indexed by run id.
pub type RunSet = FixedBitSet;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulaL0 {
    Occ(Label),
    And(Box<FormulaL0>, Box<FormulaL0>),
    Not(Box<FormulaL0>),
    K(AgentId, Box<FormulaL0>),
    E(BTreeSet<AgentId>, Box<FormulaL0>),
    C(BTreeSet<AgentId>, Box<FormulaL0>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormulaL1 {
    Tocc(TimePoint, Label),
    And(Box<FormulaL1>, Box<FormulaL1>),
    Not(Box<FormulaL1>),
    K(Node, Box<FormulaL1>),
    E(BTreeSet<Node>, Box<FormulaL1>),
    C(BTreeSet<Node>, Box<FormulaL1>),
}

/// Result of parsing: the level is fixed by the atoms and modalities used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    L0(FormulaL0),
    L1(FormulaL1),
}

impl FormulaL0 {
    pub fn occ(label: &str) -> Self {
        FormulaL0::Occ(Label::from(label))
    }

    pub fn not(f: FormulaL0) -> Self {
        FormulaL0::Not(Box::new(f))
    }

    pub fn and(a: FormulaL0, b: FormulaL0) -> Self {
        FormulaL0::And(Box::new(a), Box::new(b))
    }

    pub fn k(agent: u32, f: FormulaL0) -> Self {
        FormulaL0::K(AgentId(agent), Box::new(f))
    }

    pub fn e(group: &[u32], f: FormulaL0) -> Self {
        FormulaL0::E(group.iter().map(|&a| AgentId(a)).collect(), Box::new(f))
    }

    pub fn c(group: &[u32], f: FormulaL0) -> Self {
        FormulaL0::C(group.iter().map(|&a| AgentId(a)).collect(), Box::new(f))
    }

    /// Operator nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            FormulaL0::Occ(_) => 0,
            FormulaL0::And(a, b) => 1 + a.depth().max(b.depth()),
            FormulaL0::Not(f) | FormulaL0::K(_, f) | FormulaL0::E(_, f) | FormulaL0::C(_, f) => {
                1 + f.depth()
            }
        }
    }
}

impl FormulaL1 {
    pub fn tocc(t: TimePoint, label: &str) -> Self {
        FormulaL1::Tocc(t, Label::from(label))
    }

    pub fn not(f: FormulaL1) -> Self {
        FormulaL1::Not(Box::new(f))
    }

    pub fn and(a: FormulaL1, b: FormulaL1) -> Self {
        FormulaL1::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: FormulaL1, b: FormulaL1) -> Self {
        FormulaL1::not(FormulaL1::and(a, FormulaL1::not(b)))
    }

    pub fn k(node: Node, f: FormulaL1) -> Self {
        FormulaL1::K(node, Box::new(f))
    }

    pub fn e(set: &[Node], f: FormulaL1) -> Self {
        FormulaL1::E(set.iter().copied().collect(), Box::new(f))
    }

    pub fn c(set: &[Node], f: FormulaL1) -> Self {
        FormulaL1::C(set.iter().copied().collect(), Box::new(f))
    }

    /// `K_{n_k} ... K_{n_1} f` for `nodes = [n_1, ..., n_k]`.
    pub fn nested_k(nodes: &[Node], f: FormulaL1) -> Self {
        nodes.iter().fold(f, |acc, n| FormulaL1::k(*n, acc))
    }
}

/// Timestamps an `L0` formula: the result holds at a run iff the input
/// holds at `(run, t)`.
pub fn timestamp(f: &FormulaL0, t: TimePoint) -> FormulaL1 {
    let at = |g: &BTreeSet<AgentId>| -> BTreeSet<Node> {
        g.iter().map(|&agent| Node { agent, time: t }).collect()
    };
    match f {
        FormulaL0::Occ(l) => FormulaL1::Tocc(t, l.clone()),
        FormulaL0::Not(g) => FormulaL1::Not(Box::new(timestamp(g, t))),
        FormulaL0::And(a, b) => {
            FormulaL1::And(Box::new(timestamp(a, t)), Box::new(timestamp(b, t)))
        }
        FormulaL0::K(i, g) => FormulaL1::K(Node { agent: *i, time: t }, Box::new(timestamp(g, t))),
        FormulaL0::E(grp, g) => FormulaL1::E(at(grp), Box::new(timestamp(g, t))),
        FormulaL0::C(grp, g) => FormulaL1::C(at(grp), Box::new(timestamp(g, t))),
    }
}

fn write_agents(f: &mut fmt::Formatter<'_>, set: &BTreeSet<AgentId>) -> fmt::Result {
    let parts: Vec<String> = set.iter().map(|a| a.to_string()).collect();
    write!(f, "{{{}}}", parts.join(", "))
}

fn write_nodes(f: &mut fmt::Formatter<'_>, set: &BTreeSet<Node>) -> fmt::Result {
    let parts: Vec<String> = set.iter().map(|a| a.to_string()).collect();
    write!(f, "{{{}}}", parts.join(", "))
}

impl fmt::Display for FormulaL0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaL0::Occ(l) => write!(f, "occ({l})"),
            FormulaL0::And(a, b) => write!(f, "({a} & {b})"),
            FormulaL0::Not(g) => write!(f, "!{g}"),
            FormulaL0::K(i, g) => write!(f, "K[{i}] {g}"),
            FormulaL0::E(s, g) => {
                f.write_str("E")?;
                write_agents(f, s)?;
                write!(f, " {g}")
            }
            FormulaL0::C(s, g) => {
                f.write_str("C")?;
                write_agents(f, s)?;
                write!(f, " {g}")
            }
        }
    }
}

impl fmt::Display for FormulaL1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaL1::Tocc(t, l) => write!(f, "tocc({t}, {l})"),
            FormulaL1::And(a, b) => write!(f, "({a} & {b})"),
            FormulaL1::Not(g) => write!(f, "!{g}"),
            FormulaL1::K(n, g) => write!(f, "K[{n}] {g}"),
            FormulaL1::E(s, g) => {
                f.write_str("E")?;
                write_nodes(f, s)?;
                write!(f, " {g}")
            }
            FormulaL1::C(s, g) => {
                f.write_str("C")?;
                write_nodes(f, s)?;
                write!(f, " {g}")
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::L0(g) => g.fmt(f),
            Formula::L1(g) => g.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("time {time} lies beyond the horizon {horizon}")]
    TimeBeyondHorizon { time: TimePoint, horizon: TimePoint },
    #[error("agent {0} is not part of the topology")]
    UnknownAgent(AgentId),
    #[error("empty agent or node set")]
    EmptySet,
    #[error("iteration depth must be at least 1")]
    ZeroDepth,
}

/// Seeded evaluator faults for the harness self-test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalFault {
    #[default]
    None,
    /// `K_α φ` evaluated as `φ`.
    KnowledgeAsTruth,
    /// `C_A φ` evaluated as `E_A φ`.
    CkSingleStep,
}

/// Model checker over one system. Run sets of modal subformulas and the
/// component partitions used for common knowledge are memoized.
pub struct Evaluator<'s> {
    system: &'s System,
    fault: EvalFault,
    l1_cache: Mutex<HashMap<FormulaL1, Arc<RunSet>>>,
    l0_cache: Mutex<HashMap<(TimePoint, FormulaL0), Arc<RunSet>>>,
    components: Mutex<HashMap<Vec<Node>, Arc<Vec<u32>>>>,
}

impl<'s> Evaluator<'s> {
    pub fn new(system: &'s System) -> Self {
        Self::with_fault(system, EvalFault::None)
    }

    pub fn with_fault(system: &'s System, fault: EvalFault) -> Self {
        Evaluator {
            system,
            fault,
            l1_cache: Mutex::new(HashMap::new()),
            l0_cache: Mutex::new(HashMap::new()),
            components: Mutex::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &'s System {
        self.system
    }

    fn run_count(&self) -> usize {
        self.system.len()
    }

    pub fn all_runs(&self) -> RunSet {
        let mut s = RunSet::with_capacity(self.run_count());
        s.insert_range(..);
        s
    }

    fn check_time(&self, time: TimePoint) -> Result<(), LogicError> {
        let horizon = self.system.horizon();
        if time > horizon {
            return Err(LogicError::TimeBeyondHorizon { time, horizon });
        }
        Ok(())
    }

    fn check_agent(&self, agent: AgentId) -> Result<(), LogicError> {
        if !self.system.topology().contains(agent) {
            return Err(LogicError::UnknownAgent(agent));
        }
        Ok(())
    }

    fn check_node(&self, node: Node) -> Result<(), LogicError> {
        self.check_agent(node.agent)?;
        self.check_time(node.time)
    }

    pub fn validate_l1(&self, f: &FormulaL1) -> Result<(), LogicError> {
        match f {
            FormulaL1::Tocc(t, _) => self.check_time(*t),
            FormulaL1::And(a, b) => {
                self.validate_l1(a)?;
                self.validate_l1(b)
            }
            FormulaL1::Not(g) => self.validate_l1(g),
            FormulaL1::K(n, g) => {
                self.check_node(*n)?;
                self.validate_l1(g)
            }
            FormulaL1::E(s, g) | FormulaL1::C(s, g) => {
                if s.is_empty() {
                    return Err(LogicError::EmptySet);
                }
                for n in s {
                    self.check_node(*n)?;
                }
                self.validate_l1(g)
            }
        }
    }

    pub fn validate_l0(&self, f: &FormulaL0) -> Result<(), LogicError> {
        match f {
            FormulaL0::Occ(_) => Ok(()),
            FormulaL0::And(a, b) => {
                self.validate_l0(a)?;
                self.validate_l0(b)
            }
            FormulaL0::Not(g) => self.validate_l0(g),
            FormulaL0::K(i, g) => {
                self.check_agent(*i)?;
                self.validate_l0(g)
            }
            FormulaL0::E(s, g) | FormulaL0::C(s, g) => {
                if s.is_empty() {
                    return Err(LogicError::EmptySet);
                }
                for a in s {
                    self.check_agent(*a)?;
                }
                self.validate_l0(g)
            }
        }
    }

    /// Runs where `K_node` holds of a formula true exactly on `inner`.
    pub fn knows(&self, node: Node, inner: &RunSet) -> RunSet {
        if self.fault == EvalFault::KnowledgeAsTruth {
            return inner.clone();
        }
        let classes = self.system.classes_at(node);
        let width = classes.iter().map(|c| *c as usize + 1).max().unwrap_or(0);
        let mut bad = FixedBitSet::with_capacity(width);
        for (r, c) in classes.iter().enumerate() {
            if !inner.contains(r) {
                bad.insert(*c as usize);
            }
        }
        let mut out = RunSet::with_capacity(self.run_count());
        for (r, c) in classes.iter().enumerate() {
            if !bad.contains(*c as usize) {
                out.insert(r);
            }
        }
        out
    }

    pub fn everyone_knows(&self, set: &BTreeSet<Node>, inner: &RunSet) -> RunSet {
        let mut out = self.all_runs();
        for n in set {
            out.intersect_with(&self.knows(*n, inner));
        }
        out
    }

    /// Component id of every run under the union of `~α`, `α ∈ set`.
    pub fn components(&self, set: &BTreeSet<Node>) -> Arc<Vec<u32>> {
        let key: Vec<Node> = set.iter().copied().collect();
        if let Some(c) = self.components.lock().unwrap().get(&key) {
            return c.clone();
        }
        let n = self.run_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for node in set {
            let mut first: HashMap<u32, usize> = HashMap::new();
            for (r, c) in self.system.classes_at(*node).iter().enumerate() {
                let rep = *first.entry(*c).or_insert(r);
                let (a, b) = (find(&mut parent, rep), find(&mut parent, r));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let comp: Vec<u32> = (0..n).map(|r| find(&mut parent, r) as u32).collect();
        let comp = Arc::new(comp);
        self.components.lock().unwrap().insert(key, comp.clone());
        comp
    }

    /// Runs where `C_set` holds of a formula true exactly on `inner`.
    pub fn common_knowledge(&self, set: &BTreeSet<Node>, inner: &RunSet) -> RunSet {
        if self.fault == EvalFault::CkSingleStep {
            return self.everyone_knows(set, inner);
        }
        let comp = self.components(set);
        let mut bad = FixedBitSet::with_capacity(self.run_count());
        for (r, c) in comp.iter().enumerate() {
            if !inner.contains(r) {
                bad.insert(*c as usize);
            }
        }
        let mut out = RunSet::with_capacity(self.run_count());
        for (r, c) in comp.iter().enumerate() {
            if !bad.contains(*c as usize) {
                out.insert(r);
            }
        }
        out
    }

    /// Runs where the `L1` formula holds.
    pub fn runs_l1(&self, f: &FormulaL1) -> Result<RunSet, LogicError> {
        self.validate_l1(f)?;
        Ok(self.sat_l1(f))
    }

    fn sat_l1(&self, f: &FormulaL1) -> RunSet {
        match f {
            FormulaL1::Tocc(t, l) => {
                let mut s = RunSet::with_capacity(self.run_count());
                for r in self.system.runs() {
                    if r.occurred_by(l, *t) {
                        s.insert(r.id());
                    }
                }
                s
            }
            FormulaL1::And(a, b) => {
                let mut s = self.sat_l1(a);
                s.intersect_with(&self.sat_l1(b));
                s
            }
            FormulaL1::Not(g) => {
                let mut s = self.sat_l1(g);
                s.toggle_range(..);
                s
            }
            FormulaL1::K(..) | FormulaL1::E(..) | FormulaL1::C(..) => {
                if let Some(s) = self.l1_cache.lock().unwrap().get(f) {
                    return (**s).clone();
                }
                let s = match f {
                    FormulaL1::K(n, g) => self.knows(*n, &self.sat_l1(g)),
                    FormulaL1::E(set, g) => self.everyone_knows(set, &self.sat_l1(g)),
                    FormulaL1::C(set, g) => self.common_knowledge(set, &self.sat_l1(g)),
                    _ => unreachable!(),
                };
                self.l1_cache
                    .lock()
                    .unwrap()
                    .insert(f.clone(), Arc::new(s.clone()));
                s
            }
        }
    }

    /// Runs `r` with `(R, r, t) ⊨ f`.
    pub fn runs_l0(&self, t: TimePoint, f: &FormulaL0) -> Result<RunSet, LogicError> {
        self.check_time(t)?;
        self.validate_l0(f)?;
        Ok(self.sat_l0(t, f))
    }

    fn sat_l0(&self, t: TimePoint, f: &FormulaL0) -> RunSet {
        let at = |g: &BTreeSet<AgentId>| -> BTreeSet<Node> {
            g.iter().map(|&agent| Node { agent, time: t }).collect()
        };
        match f {
            FormulaL0::Occ(l) => {
                let mut s = RunSet::with_capacity(self.run_count());
                for r in self.system.runs() {
                    if r.occurred_by(l, t) {
                        s.insert(r.id());
                    }
                }
                s
            }
            FormulaL0::And(a, b) => {
                let mut s = self.sat_l0(t, a);
                s.intersect_with(&self.sat_l0(t, b));
                s
            }
            FormulaL0::Not(g) => {
                let mut s = self.sat_l0(t, g);
                s.toggle_range(..);
                s
            }
            FormulaL0::K(..) | FormulaL0::E(..) | FormulaL0::C(..) => {
                let key = (t, f.clone());
                if let Some(s) = self.l0_cache.lock().unwrap().get(&key) {
                    return (**s).clone();
                }
                let s = match f {
                    FormulaL0::K(i, g) => self.knows(Node { agent: *i, time: t }, &self.sat_l0(t, g)),
                    FormulaL0::E(grp, g) => self.everyone_knows(&at(grp), &self.sat_l0(t, g)),
                    FormulaL0::C(grp, g) => self.common_knowledge(&at(grp), &self.sat_l0(t, g)),
                    _ => unreachable!(),
                };
                self.l0_cache.lock().unwrap().insert(key, Arc::new(s.clone()));
                s
            }
        }
    }

    pub fn eval_l1(&self, run: &Run, f: &FormulaL1) -> Result<bool, LogicError> {
        Ok(self.runs_l1(f)?.contains(run.id()))
    }

    pub fn eval_l0(&self, run: &Run, t: TimePoint, f: &FormulaL0) -> Result<bool, LogicError> {
        Ok(self.runs_l0(t, f)?.contains(run.id()))
    }

    /// Runs satisfying `C_set f`, via connected components.
    pub fn ck_fixpoint(&self, set: &BTreeSet<Node>, f: &FormulaL1) -> Result<RunSet, LogicError> {
        if set.is_empty() {
            return Err(LogicError::EmptySet);
        }
        self.runs_l1(&FormulaL1::C(set.clone(), Box::new(f.clone())))
    }

    /// `(E_set)^k f` at `run`, by literal iteration.
    pub fn eval_ck_bounded(
        &self,
        run: &Run,
        set: &BTreeSet<Node>,
        f: &FormulaL1,
        k: usize,
    ) -> Result<bool, LogicError> {
        Ok(self.iterate_e(set, f, k)?.contains(run.id()))
    }

    pub fn iterate_e(
        &self,
        set: &BTreeSet<Node>,
        f: &FormulaL1,
        k: usize,
    ) -> Result<RunSet, LogicError> {
        if k == 0 {
            return Err(LogicError::ZeroDepth);
        }
        if set.is_empty() {
            return Err(LogicError::EmptySet);
        }
        let mut s = self.runs_l1(f)?;
        for n in set {
            self.check_node(*n)?;
        }
        for _ in 0..k {
            s = self.everyone_knows(set, &s);
        }
        Ok(s)
    }
}

pub fn eval_l0(system: &System, run: &Run, t: TimePoint, f: &FormulaL0) -> Result<bool, LogicError> {
    Evaluator::new(system).eval_l0(run, t, f)
}

pub fn eval_l1(system: &System, run: &Run, f: &FormulaL1) -> Result<bool, LogicError> {
    Evaluator::new(system).eval_l1(run, f)
}

pub fn ck_fixpoint(system: &System, set: &BTreeSet<Node>, f: &FormulaL1) -> Result<RunSet, LogicError> {
    Evaluator::new(system).ck_fixpoint(set, f)
}

pub fn eval_ck_bounded(
    system: &System,
    run: &Run,
    set: &BTreeSet<Node>,
    f: &FormulaL1,
    k: usize,
) -> Result<bool, LogicError> {
    Evaluator::new(system).eval_ck_bounded(run, set, f, k)
}
