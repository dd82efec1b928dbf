//! Run semantics under the full-information protocol and exhaustive
//! enumeration of the system of runs for a scenario.
//!
//! Every agent whose log is nonempty sends its whole history on each
//! outgoing channel every round. The environment picks one trigger
//! occurrence (or none) and a delivery time for each message; everything
//! else is deterministic. A message sent at `<i,s>` on a channel with
//! bound `b` is delivered at some time in `s+1..=s+b`. Delivery choices
//! that fall after the horizon are merged into a single "still in flight"
//! outcome, so distinct runs differ somewhere within the horizon.
//!
//! Local states are hash-consed into a per-system table: two nodes have
//! equal local states iff they have the same [`StateId`]. This keeps the
//! nested fip payloads (which grow exponentially when written out) cheap
//! to compare.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causality::CausalRelation;
use crate::coordination::ResponsePolicy;
use crate::network::{AgentId, Node, TimePoint, Topology};

/// Default bound on the number of runs a scenario may enumerate to.
pub const DEFAULT_CAP: usize = 100_000;

/// An event or action label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub String);

impl Label {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_string())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Messages are identified by channel and send time; fip sends at most
/// one message per channel per round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId {
    pub from: AgentId,
    pub to: AgentId,
    pub send_time: TimePoint,
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}@{}", self.from, self.to, self.send_time)
    }
}

/// One message together with the environment's delivery decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub from: AgentId,
    pub to: AgentId,
    pub send_time: TimePoint,
    pub bound: u32,
    /// `None` when the message is still in flight at the horizon.
    pub delivery: Option<TimePoint>,
}

impl Message {
    pub fn id(&self) -> MessageId {
        MessageId {
            from: self.from,
            to: self.to,
            send_time: self.send_time,
        }
    }

    pub fn send_node(&self) -> Node {
        Node {
            agent: self.from,
            time: self.send_time,
        }
    }

    pub fn receive_node(&self) -> Option<Node> {
        self.delivery.map(|time| Node {
            agent: self.to,
            time,
        })
    }

    pub fn deadline(&self) -> TimePoint {
        self.send_time + self.bound
    }

    pub fn is_early(&self) -> bool {
        matches!(self.delivery, Some(d) if d < self.deadline())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    ExternalInput { label: Label },
    Receive { id: MessageId },
    Action { label: Label },
    Send { id: MessageId },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::ExternalInput { label } => write!(f, "input:{label}"),
            Event::Receive { id } => write!(f, "recv:{id}"),
            Event::Action { label } => write!(f, "act:{label}"),
            Event::Send { id } => write!(f, "send:{id}"),
        }
    }
}

/// Record of one delivery decision, as kept by the environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvironmentEntry {
    pub id: MessageId,
    pub send_time: TimePoint,
    pub delivery_time: Option<TimePoint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub label: Label,
    pub agent: AgentId,
    /// Inclusive occurrence window `[w0, w1]`.
    pub window: (TimePoint, TimePoint),
    pub may_be_absent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("trigger agent {0} is not part of the topology")]
    UnknownTriggerAgent(AgentId),
    #[error("trigger window ends at {end}, after the horizon {horizon}")]
    WindowBeyondHorizon { end: TimePoint, horizon: TimePoint },
    #[error("trigger window is empty and the trigger may not be absent")]
    EmptyWindow,
    #[error("enumeration cap must be positive")]
    ZeroCap,
}

/// Everything the environment needs to generate the system of runs.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub topology: Topology,
    pub horizon: TimePoint,
    pub trigger: TriggerSpec,
    pub policy: Option<Arc<dyn ResponsePolicy>>,
    pub cap: usize,
}

impl ScenarioSpec {
    pub fn new(topology: Topology, horizon: TimePoint, trigger: TriggerSpec) -> Self {
        ScenarioSpec {
            topology,
            horizon,
            trigger,
            policy: None,
            cap: DEFAULT_CAP,
        }
    }

    pub fn with_policy(mut self, policy: Arc<dyn ResponsePolicy>) -> Self {
        self.policy = Some(policy);
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.topology.contains(self.trigger.agent) {
            return Err(ScenarioError::UnknownTriggerAgent(self.trigger.agent));
        }
        let (w0, w1) = self.trigger.window;
        if w0 > w1 {
            if !self.trigger.may_be_absent {
                return Err(ScenarioError::EmptyWindow);
            }
        } else if w1 > self.horizon {
            return Err(ScenarioError::WindowBeyondHorizon {
                end: w1,
                horizon: self.horizon,
            });
        }
        if self.cap == 0 {
            return Err(ScenarioError::ZeroCap);
        }
        Ok(())
    }

    /// Trigger choices in canonical order: occurrence times ascending,
    /// then absence.
    pub fn trigger_choices(&self) -> Vec<Option<TimePoint>> {
        let (w0, w1) = self.trigger.window;
        let mut v: Vec<_> = (w0..=w1).map(Some).collect();
        if self.trigger.may_be_absent {
            v.push(None);
        }
        v
    }

    pub fn node_count(&self) -> usize {
        self.topology.agent_count() as usize * (self.horizon as usize + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("enumeration exceeds the cap of {cap} runs (estimated {estimated} runs)")]
    CapExceeded { cap: usize, estimated: u128 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("node {node} lies beyond the horizon {horizon}")]
    BeyondHorizon { node: Node, horizon: TimePoint },
    #[error("agent {0} is not part of the topology")]
    UnknownAgent(AgentId),
    #[error("no run with id {0}")]
    UnknownRun(usize),
    #[error("no run in the system matches the quiet variant for {node} (run {run})")]
    NoQuietVariant { run: usize, node: Node },
}

/// Handle to an interned local state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

/// What an agent can extract from its fip history. This is a function of
/// the local state, so policies reading it stay deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Knowledge {
    /// The trigger occurrence, once the agent has heard of it.
    pub trigger: Option<Node>,
    /// For each agent known to have heard of the trigger, the time it did.
    pub first_heard: BTreeMap<AgentId, TimePoint>,
    /// Every action occurrence in the agent's causal past.
    pub actions: BTreeSet<(Label, Node)>,
    /// When this agent first learned of an action with each label.
    pub learned: BTreeMap<Label, TimePoint>,
}

impl Knowledge {
    /// Earliest known node at which `label` was performed.
    pub fn action_node(&self, label: &Label) -> Option<Node> {
        self.actions
            .iter()
            .filter(|(l, _)| l == label)
            .map(|(_, n)| *n)
            .min()
    }

    fn merge(&mut self, other: &Knowledge) {
        if self.trigger.is_none() {
            self.trigger = other.trigger;
        }
        for (a, t) in &other.first_heard {
            self.first_heard.entry(*a).or_insert(*t);
        }
        self.actions.extend(other.actions.iter().cloned());
    }
}

/// The policy's view of one node: the agent, the time and what it knows
/// before acting in this round.
pub struct LocalView<'a> {
    pub agent: AgentId,
    pub time: TimePoint,
    pub knowledge: &'a Knowledge,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct StateKey {
    agent: AgentId,
    time: TimePoint,
    prev: Option<StateId>,
    input: Option<Label>,
    received: Vec<(MessageId, StateId)>,
    actions: Vec<Label>,
}

#[derive(Debug)]
struct StateEntry {
    key: StateKey,
    knowledge: Knowledge,
    nonempty: bool,
}

#[derive(Debug, Default)]
struct StateTable {
    entries: Vec<StateEntry>,
    index: HashMap<StateKey, StateId>,
}

impl StateTable {
    fn intern(&mut self, key: StateKey, knowledge: Knowledge, nonempty: bool) -> StateId {
        if let Some(id) = self.index.get(&key) {
            return *id;
        }
        let id = StateId(self.entries.len() as u32);
        self.index.insert(key.clone(), id);
        self.entries.push(StateEntry {
            key,
            knowledge,
            nonempty,
        });
        id
    }

    fn get(&self, id: StateId) -> &StateEntry {
        &self.entries[id.0 as usize]
    }
}

/// Dense index of a node: time-major, so index order is `(time, agent)`.
pub fn node_index(agent_count: u32, node: Node) -> usize {
    node.time as usize * agent_count as usize + node.agent.index()
}

pub fn index_node(agent_count: u32, idx: usize) -> Node {
    let n = agent_count as usize;
    Node {
        agent: AgentId((idx % n) as u32 + 1),
        time: (idx / n) as TimePoint,
    }
}

/// One complete execution within the horizon.
#[derive(Debug)]
pub struct Run {
    id: usize,
    agent_count: u32,
    horizon: TimePoint,
    trigger_label: Label,
    trigger: Option<Node>,
    messages: Vec<Message>,
    actions: Vec<(Node, Label)>,
    states: Vec<StateId>,
    causal: OnceLock<CausalRelation>,
}

impl Clone for Run {
    fn clone(&self) -> Self {
        Run {
            id: self.id,
            agent_count: self.agent_count,
            horizon: self.horizon,
            trigger_label: self.trigger_label.clone(),
            trigger: self.trigger,
            messages: self.messages.clone(),
            actions: self.actions.clone(),
            states: self.states.clone(),
            causal: OnceLock::new(),
        }
    }
}

impl Run {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn agent_count(&self) -> u32 {
        self.agent_count
    }

    pub fn horizon(&self) -> TimePoint {
        self.horizon
    }

    pub fn node_count(&self) -> usize {
        self.agent_count as usize * (self.horizon as usize + 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.node_count()).map(|i| index_node(self.agent_count, i))
    }

    pub fn contains_node(&self, node: Node) -> bool {
        node.time <= self.horizon && node.agent.0 >= 1 && node.agent.0 <= self.agent_count
    }

    pub fn check_node(&self, node: Node) -> Result<(), RunError> {
        if node.agent.0 < 1 || node.agent.0 > self.agent_count {
            return Err(RunError::UnknownAgent(node.agent));
        }
        if node.time > self.horizon {
            return Err(RunError::BeyondHorizon {
                node,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    pub fn index(&self, node: Node) -> usize {
        node_index(self.agent_count, node)
    }

    /// Where the trigger occurred, if it did.
    pub fn trigger(&self) -> Option<Node> {
        self.trigger
    }

    pub fn trigger_label(&self) -> &Label {
        &self.trigger_label
    }

    /// All messages in `(send_time, from, to)` order.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Action occurrences sorted by node, then label.
    pub fn actions(&self) -> &[(Node, Label)] {
        &self.actions
    }

    pub fn environment(&self) -> Vec<EnvironmentEntry> {
        self.messages
            .iter()
            .map(|m| EnvironmentEntry {
                id: m.id(),
                send_time: m.send_time,
                delivery_time: m.delivery,
            })
            .collect()
    }

    /// Interned local state at `node`.
    pub fn state_at(&self, node: Node) -> StateId {
        self.states[self.index(node)]
    }

    /// Events located at `node`, in canonical order.
    pub fn events_at(&self, node: Node) -> Vec<Event> {
        let mut out = Vec::new();
        if self.trigger == Some(node) {
            out.push(Event::ExternalInput {
                label: self.trigger_label.clone(),
            });
        }
        let mut recv: Vec<MessageId> = self
            .messages
            .iter()
            .filter(|m| m.receive_node() == Some(node))
            .map(|m| m.id())
            .collect();
        recv.sort();
        out.extend(recv.into_iter().map(|id| Event::Receive { id }));
        out.extend(
            self.actions
                .iter()
                .filter(|(n, _)| *n == node)
                .map(|(_, l)| Event::Action { label: l.clone() }),
        );
        let mut sent: Vec<MessageId> = self
            .messages
            .iter()
            .filter(|m| m.send_node() == node)
            .map(|m| m.id())
            .collect();
        sent.sort();
        out.extend(sent.into_iter().map(|id| Event::Send { id }));
        out
    }

    /// `true` iff an input or action labelled `label` happened at or
    /// before time `t`.
    pub fn occurred_by(&self, label: &Label, t: TimePoint) -> bool {
        if let Some(n) = self.trigger {
            if &self.trigger_label == label && n.time <= t {
                return true;
            }
        }
        self.actions
            .iter()
            .any(|(n, l)| l == label && n.time <= t)
    }

    /// Nodes of all actions labelled `label`.
    pub fn action_nodes(&self, label: &Label) -> Vec<Node> {
        self.actions
            .iter()
            .filter(|(_, l)| l == label)
            .map(|(n, _)| *n)
            .collect()
    }

    /// Lazily computed potential-causality relation.
    pub fn causal(&self) -> &CausalRelation {
        self.causal.get_or_init(|| CausalRelation::compute(self))
    }

    /// Line-oriented canonical dump: one line per node with its events.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let trig = match self.trigger {
            Some(n) => format!("{} {}", self.trigger_label, n),
            None => "absent".to_string(),
        };
        let _ = writeln!(s, "run {} trigger {}", self.id, trig);
        for node in self.nodes() {
            let evs = self.events_at(node);
            let _ = write!(s, "{node}");
            if evs.is_empty() {
                s.push_str(" -");
            }
            for e in evs {
                let _ = write!(s, " {e}");
            }
            s.push('\n');
        }
        s
    }
}

/// An event as recorded in an expanded local state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogEvent {
    Input(Label),
    Receive {
        id: MessageId,
        payload: Box<LocalState>,
    },
    Action(Label),
    Send(MessageId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub time: TimePoint,
    pub event: LogEvent,
}

/// A local state written out in full, with fip payloads embedded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalState {
    pub agent: AgentId,
    pub time: TimePoint,
    pub log: Vec<LogEntry>,
}

/// The finite, exhaustive set of runs for one scenario.
#[derive(Debug)]
pub struct System {
    scenario: ScenarioSpec,
    runs: Vec<Run>,
    table: StateTable,
    classes: Vec<Vec<u32>>,
}

impl System {
    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn topology(&self) -> &Topology {
        &self.scenario.topology
    }

    pub fn horizon(&self) -> TimePoint {
        self.scenario.horizon
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn run(&self, id: usize) -> Result<&Run, RunError> {
        self.runs.get(id).ok_or(RunError::UnknownRun(id))
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.scenario.node_count()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        let n = self.topology().agent_count();
        (0..self.node_count()).map(move |i| index_node(n, i))
    }

    pub fn node_index(&self, node: Node) -> usize {
        node_index(self.topology().agent_count(), node)
    }

    pub fn check_node(&self, node: Node) -> Result<(), RunError> {
        if !self.topology().contains(node.agent) {
            return Err(RunError::UnknownAgent(node.agent));
        }
        if node.time > self.horizon() {
            return Err(RunError::BeyondHorizon {
                node,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    /// Indistinguishability class of every run at `node`: runs `r` and
    /// `r'` have equal local states at `node` iff their entries are equal.
    pub fn classes_at(&self, node: Node) -> &[u32] {
        &self.classes[self.node_index(node)]
    }

    pub fn knowledge(&self, id: StateId) -> &Knowledge {
        &self.table.get(id).knowledge
    }

    /// Number of distinct interned local states.
    pub fn state_count(&self) -> usize {
        self.table.entries.len()
    }

    pub fn local_state(&self, run: &Run, node: Node) -> Result<LocalState, RunError> {
        run.check_node(node)?;
        Ok(self.expand(run.state_at(node)))
    }

    fn expand(&self, id: StateId) -> LocalState {
        let entry = self.table.get(id);
        let key = &entry.key;
        let mut log = match key.prev {
            Some(p) => self.expand(p).log,
            None => Vec::new(),
        };
        let time = key.time;
        if let Some(l) = &key.input {
            log.push(LogEntry {
                time,
                event: LogEvent::Input(l.clone()),
            });
        }
        for (mid, sender) in &key.received {
            log.push(LogEntry {
                time,
                event: LogEvent::Receive {
                    id: *mid,
                    payload: Box::new(self.expand(*sender)),
                },
            });
        }
        for a in &key.actions {
            log.push(LogEntry {
                time,
                event: LogEvent::Action(a.clone()),
            });
        }
        if entry.nonempty {
            for c in self.topology().out_channels(key.agent) {
                log.push(LogEntry {
                    time,
                    event: LogEvent::Send(MessageId {
                        from: key.agent,
                        to: c.to,
                        send_time: time,
                    }),
                });
            }
        }
        LocalState {
            agent: key.agent,
            time,
            log,
        }
    }

    /// Two runs agree on `node`: same local state, same arrivals and
    /// inputs there, and the same actions performed.
    pub fn agree_on(&self, r: &Run, r2: &Run, node: Node) -> bool {
        if !r.contains_node(node) || !r2.contains_node(node) {
            return false;
        }
        if r.state_at(node) != r2.state_at(node) {
            return false;
        }
        let arrivals = |run: &Run| -> Vec<Event> {
            run.events_at(node)
                .into_iter()
                .filter(|e| !matches!(e, Event::Send { .. }))
                .collect()
        };
        arrivals(r) == arrivals(r2)
    }

    /// The run that matches `run` on the past cone of `node` and takes the
    /// latest allowed delivery for every message outside it.
    pub fn find_quiet_variant(&self, run: &Run, node: Node) -> Result<&Run, RunError> {
        run.check_node(node)?;
        let cone = run.causal().past_cone(node);
        let keep: HashMap<MessageId, Option<TimePoint>> = run
            .messages
            .iter()
            .filter(|m| matches!(m.receive_node(), Some(n) if cone.contains(&n)))
            .map(|m| (m.id(), m.delivery))
            .collect();
        let horizon = self.horizon();
        let quiet = |m: &Message| -> Option<TimePoint> {
            match keep.get(&m.id()) {
                Some(d) => *d,
                None => Some(m.deadline()).filter(|d| *d <= horizon),
            }
        };
        let found = self.runs.iter().find(|cand| {
            cand.trigger == run.trigger && cand.messages.iter().all(|m| m.delivery == quiet(m))
        });
        match found {
            Some(r2) if r2.causal().past_cone(node) == cone => Ok(r2),
            _ => Err(RunError::NoQuietVariant {
                run: run.id,
                node,
            }),
        }
    }

    /// `true` iff no two interned states share their pre-action content
    /// but differ in the actions performed.
    pub fn policy_is_deterministic(&self) -> bool {
        let mut seen: HashMap<StateKey, &Vec<Label>> = HashMap::new();
        for e in &self.table.entries {
            let pre = StateKey {
                actions: Vec::new(),
                ..e.key.clone()
            };
            match seen.get(&pre) {
                Some(acts) if **acts != e.key.actions => return false,
                Some(_) => {}
                None => {
                    seen.insert(pre, &e.key.actions);
                }
            }
        }
        true
    }

    /// Canonical dump of every run.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for r in &self.runs {
            s.push_str(&r.canonical_text());
        }
        s
    }
}

/// Enumerates every run of the scenario in canonical order: trigger
/// choice first, then delivery choices of messages ordered by
/// `(send_time, from, to)`, earliest delivery first and "in flight" last.
pub fn enumerate_runs(scenario: &ScenarioSpec) -> Result<System, EnumerationError> {
    scenario.validate()?;
    let mut e = Enumerator::new(scenario, Mode::Exhaustive);
    for trig in scenario.trigger_choices() {
        e.trigger = trig;
        if e.time_step(0).is_err() {
            let estimated = estimate_run_count(scenario, 256, 0x5eed);
            return Err(EnumerationError::CapExceeded {
                cap: scenario.cap,
                estimated,
            });
        }
    }
    let Enumerator { runs, table, .. } = e;
    let n = scenario.topology.agent_count();
    let node_count = scenario.node_count();
    let mut classes = Vec::with_capacity(node_count);
    for idx in 0..node_count {
        let _ = index_node(n, idx);
        let mut dense: HashMap<StateId, u32> = HashMap::new();
        let col = runs
            .iter()
            .map(|r| {
                let next = dense.len() as u32;
                *dense.entry(r.states[idx]).or_insert(next)
            })
            .collect();
        classes.push(col);
    }
    Ok(System {
        scenario: scenario.clone(),
        runs,
        table,
        classes,
    })
}

/// Knuth's random-probe estimate of the number of runs, averaged over
/// `samples` seeded walks of the environment-choice tree.
pub fn estimate_run_count(scenario: &ScenarioSpec, samples: usize, seed: u64) -> u128 {
    let trig = scenario.trigger_choices();
    if trig.is_empty() || samples == 0 {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total: u128 = 0;
    for _ in 0..samples {
        let pick = rng.gen_range(0..trig.len());
        let mut e = Enumerator::new(scenario, Mode::Sample(rng.gen()));
        e.trigger = trig[pick];
        e.weight = trig.len() as u128;
        let _ = e.time_step(0);
        total = total.saturating_add(e.weight);
    }
    total / samples as u128
}

enum Mode {
    Exhaustive,
    Sample(u64),
}

struct CapReached;

struct Enumerator<'s> {
    scenario: &'s ScenarioSpec,
    mode: Mode,
    rng: Option<ChaCha8Rng>,
    weight: u128,
    trigger: Option<TimePoint>,
    table: StateTable,
    runs: Vec<Run>,
    messages: Vec<Message>,
    actions: Vec<(Node, Label)>,
    states: Vec<StateId>,
}

impl<'s> Enumerator<'s> {
    fn new(scenario: &'s ScenarioSpec, mode: Mode) -> Self {
        let rng = match mode {
            Mode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            Mode::Exhaustive => None,
        };
        Enumerator {
            scenario,
            mode,
            rng,
            weight: 1,
            trigger: None,
            table: StateTable::default(),
            runs: Vec::new(),
            messages: Vec::new(),
            actions: Vec::new(),
            states: vec![StateId(0); scenario.node_count()],
        }
    }

    fn agent_count(&self) -> u32 {
        self.scenario.topology.agent_count()
    }

    fn time_step(&mut self, t: TimePoint) -> Result<(), CapReached> {
        let n = self.agent_count();
        let actions_mark = self.actions.len();
        let mut senders = Vec::new();
        for a in 1..=n {
            let agent = AgentId(a);
            let node = Node { agent, time: t };
            let prev = (t > 0).then(|| self.states[node_index(n, Node { agent, time: t - 1 })]);
            let (mut knowledge, mut nonempty) = match prev {
                Some(p) => {
                    let e = self.table.get(p);
                    (e.knowledge.clone(), e.nonempty)
                }
                None => (Knowledge::default(), false),
            };
            let input = (self.trigger == Some(t) && self.scenario.trigger.agent == agent)
                .then(|| self.scenario.trigger.label.clone());
            if input.is_some() {
                knowledge.trigger = Some(node);
                nonempty = true;
            }
            let mut received: Vec<(MessageId, StateId)> = self
                .messages
                .iter()
                .filter(|m| m.to == agent && m.delivery == Some(t))
                .map(|m| (m.id(), self.states[node_index(n, m.send_node())]))
                .collect();
            received.sort();
            for (_, sender) in &received {
                knowledge.merge(&self.table.get(*sender).knowledge);
                nonempty = true;
            }
            if knowledge.trigger.is_some() {
                knowledge.first_heard.entry(agent).or_insert(t);
            }
            let fresh: Vec<Label> = knowledge
                .actions
                .iter()
                .map(|(l, _)| l.clone())
                .filter(|l| !knowledge.learned.contains_key(l))
                .collect();
            for l in fresh {
                knowledge.learned.insert(l, t);
            }
            let mut acts: Vec<Label> = match &self.scenario.policy {
                Some(p) => p.actions(&LocalView {
                    agent,
                    time: t,
                    knowledge: &knowledge,
                }),
                None => Vec::new(),
            };
            acts.sort();
            acts.dedup();
            for l in &acts {
                knowledge.actions.insert((l.clone(), node));
                knowledge.learned.entry(l.clone()).or_insert(t);
                self.actions.push((node, l.clone()));
                nonempty = true;
            }
            let key = StateKey {
                agent,
                time: t,
                prev,
                input,
                received,
                actions: acts,
            };
            let id = self.table.intern(key, knowledge, nonempty);
            self.states[node_index(n, node)] = id;
            if nonempty {
                for c in self.scenario.topology.out_channels(agent) {
                    senders.push(*c);
                }
            }
        }
        let res = self.branch(t, &senders, 0);
        self.actions.truncate(actions_mark);
        res
    }

    fn branch(
        &mut self,
        t: TimePoint,
        outgoing: &[crate::network::Channel],
        k: usize,
    ) -> Result<(), CapReached> {
        let horizon = self.scenario.horizon;
        if k == outgoing.len() {
            if t == horizon {
                return self.emit();
            }
            return self.time_step(t + 1);
        }
        let c = outgoing[k];
        let last = t + c.bound;
        let mut options: Vec<Option<TimePoint>> =
            (t + 1..=last.min(horizon)).map(Some).collect();
        if last > horizon {
            options.push(None);
        }
        if let Some(rng) = self.rng.as_mut() {
            let pick = rng.gen_range(0..options.len());
            self.weight = self.weight.saturating_mul(options.len() as u128);
            options = vec![options[pick]];
        }
        for delivery in options {
            self.messages.push(Message {
                from: c.from,
                to: c.to,
                send_time: t,
                bound: c.bound,
                delivery,
            });
            let res = self.branch(t, outgoing, k + 1);
            self.messages.pop();
            res?;
        }
        Ok(())
    }

    fn emit(&mut self) -> Result<(), CapReached> {
        if let Mode::Sample(_) = self.mode {
            return Ok(());
        }
        if self.runs.len() >= self.scenario.cap {
            return Err(CapReached);
        }
        let mut actions = self.actions.clone();
        actions.sort();
        self.runs.push(Run {
            id: self.runs.len(),
            agent_count: self.agent_count(),
            horizon: self.scenario.horizon,
            trigger_label: self.scenario.trigger.label.clone(),
            trigger: self.trigger.map(|time| Node {
                agent: self.scenario.trigger.agent,
                time,
            }),
            messages: self.messages.clone(),
            actions,
            states: self.states.clone(),
            causal: OnceLock::new(),
        });
        Ok(())
    }
}
