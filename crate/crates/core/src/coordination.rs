//! Coordination problems (ordered, simultaneous, weakly timed and tightly
//! timed response), their verifier, and the response policies that make
//! agents act.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{AgentId, Node, TimePoint, Topology};
use crate::runs::{Label, LocalView, Run, System, TriggerSpec};

/// Maps what an agent knows at a node to the actions it takes there.
/// Implementations must be deterministic.
pub trait ResponsePolicy: fmt::Debug + Send + Sync {
    fn actions(&self, view: &LocalView<'_>) -> Vec<Label>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Or,
    Sr,
    Wtr,
    Ttr,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Or => "OR",
            ProblemKind::Sr => "SR",
            ProblemKind::Wtr => "WTR",
            ProblemKind::Ttr => "TTR",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Response {
    pub agent: AgentId,
    pub action: Label,
}

impl Response {
    pub fn new(agent: u32, action: &str) -> Self {
        Response {
            agent: AgentId(agent),
            action: Label::from(action),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoordinationError {
    #[error("an instance needs at least one response")]
    NoResponses,
    #[error("{kind} with {responses} responses needs {expected} deltas, got {got}")]
    DeltaCount {
        kind: ProblemKind,
        responses: usize,
        expected: usize,
        got: usize,
    },
    #[error("response action {0} is listed twice")]
    RepeatedAction(Label),
    #[error("action {label} occurs more than once in run {run}")]
    DuplicateResponse { run: usize, label: Label },
    #[error("response index {h} is outside 1..={k}")]
    BadIndex { h: usize, k: usize },
    #[error("node for response {h} would lie at negative time {time}")]
    NegativeTime { h: usize, time: i64 },
    #[error("agent {to} cannot be reached from agent {from}")]
    Unreachable { from: AgentId, to: AgentId },
    #[error("agent {0} is not part of the topology")]
    UnknownAgent(AgentId),
    #[error("schedule needs time {needed} but the horizon is {horizon}")]
    Infeasible { needed: i64, horizon: TimePoint },
    #[error("a {0} instance cannot be served by this policy")]
    WrongKind(ProblemKind),
}

/// A trigger together with ordered responses and their timing deltas.
/// WTR carries one delta per consecutive pair, TTR one per response.
/// Deltas may be negative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationInstance {
    pub kind: ProblemKind,
    pub trigger: Label,
    pub responses: Vec<Response>,
    pub deltas: Vec<i64>,
}

impl CoordinationInstance {
    pub fn new(
        kind: ProblemKind,
        trigger: &str,
        responses: Vec<Response>,
        deltas: Vec<i64>,
    ) -> Result<Self, CoordinationError> {
        let inst = CoordinationInstance {
            kind,
            trigger: Label::from(trigger),
            responses,
            deltas,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), CoordinationError> {
        let k = self.responses.len();
        if k == 0 {
            return Err(CoordinationError::NoResponses);
        }
        let expected = match self.kind {
            ProblemKind::Or | ProblemKind::Sr => 0,
            ProblemKind::Wtr => k - 1,
            ProblemKind::Ttr => k,
        };
        if self.deltas.len() != expected {
            return Err(CoordinationError::DeltaCount {
                kind: self.kind,
                responses: k,
                expected,
                got: self.deltas.len(),
            });
        }
        for (h, r) in self.responses.iter().enumerate() {
            if self.responses[..h].iter().any(|p| p.action == r.action) {
                return Err(CoordinationError::RepeatedAction(r.action.clone()));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.responses.len()
    }

    /// The same responses as a TTR instance; SR becomes all-zero deltas.
    pub fn as_ttr(&self) -> Option<CoordinationInstance> {
        match self.kind {
            ProblemKind::Ttr => Some(self.clone()),
            ProblemKind::Sr => Some(CoordinationInstance {
                kind: ProblemKind::Ttr,
                deltas: vec![0; self.k()],
                ..self.clone()
            }),
            _ => None,
        }
    }

    /// The same responses with only the ordering requirement.
    pub fn as_or(&self) -> CoordinationInstance {
        CoordinationInstance {
            kind: ProblemKind::Or,
            deltas: Vec::new(),
            ..self.clone()
        }
    }
}

/// Nodes of the responses in `run`, or `None` if any response is missing.
pub fn response_nodes(
    run: &Run,
    inst: &CoordinationInstance,
) -> Result<Option<Vec<Node>>, CoordinationError> {
    let mut out = Vec::with_capacity(inst.k());
    let mut missing = false;
    for r in &inst.responses {
        let nodes: Vec<Node> = run
            .action_nodes(&r.action)
            .into_iter()
            .filter(|n| n.agent == r.agent)
            .collect();
        if run.action_nodes(&r.action).len() > 1 {
            return Err(CoordinationError::DuplicateResponse {
                run: run.id(),
                label: r.action.clone(),
            });
        }
        match nodes.first() {
            Some(n) => out.push(*n),
            None => missing = true,
        }
    }
    Ok((!missing).then_some(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Clause {
    /// Responses occur iff the trigger does.
    Occurrence,
    /// The kind-specific timing requirement.
    Timing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub run: usize,
    pub clause: Clause,
    pub detail: String,
    /// Realized node of each response, if it occurred once.
    pub nodes: Vec<Option<Node>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Solved,
    Counterexample(Counterexample),
}

impl Verdict {
    pub fn is_solved(&self) -> bool {
        matches!(self, Verdict::Solved)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Solved => f.write_str("solved"),
            Verdict::Counterexample(c) => {
                let nodes: Vec<String> = c
                    .nodes
                    .iter()
                    .map(|n| n.map_or("-".to_string(), |n| n.to_string()))
                    .collect();
                write!(
                    f,
                    "counterexample run={} clause={:?} nodes=[{}] {}",
                    c.run,
                    c.clause,
                    nodes.join(" "),
                    c.detail
                )
            }
        }
    }
}

fn timing_violation(inst: &CoordinationInstance, t: &[i64]) -> Option<String> {
    let k = t.len();
    match inst.kind {
        ProblemKind::Or => (0..k.saturating_sub(1))
            .find(|&h| t[h] > t[h + 1])
            .map(|h| format!("t{} = {} > t{} = {}", h + 1, t[h], h + 2, t[h + 1])),
        ProblemKind::Sr => (1..k)
            .find(|&h| t[h] != t[0])
            .map(|h| format!("t1 = {} != t{} = {}", t[0], h + 1, t[h])),
        ProblemKind::Wtr => (0..k.saturating_sub(1))
            .find(|&h| t[h + 1] < t[h] + inst.deltas[h])
            .map(|h| {
                let d = inst.deltas[h];
                let sign = if d < 0 { '-' } else { '+' };
                format!(
                    "t{} = {} < t{} {sign} {} = {}",
                    h + 2,
                    t[h + 1],
                    h + 1,
                    d.abs(),
                    t[h] + d
                )
            }),
        ProblemKind::Ttr => {
            for h in 0..k {
                for g in 0..k {
                    if t[h] - t[g] != inst.deltas[h] - inst.deltas[g] {
                        return Some(format!(
                            "t{} - t{} = {} but delta difference is {}",
                            h + 1,
                            g + 1,
                            t[h] - t[g],
                            inst.deltas[h] - inst.deltas[g]
                        ));
                    }
                }
            }
            None
        }
    }
}

/// Checks `inst` on every run and returns the first violation in
/// canonical run order.
pub fn solves(system: &System, inst: &CoordinationInstance) -> Verdict {
    for run in system.runs() {
        if let Some(c) = check_run(run, inst) {
            return Verdict::Counterexample(c);
        }
    }
    Verdict::Solved
}

/// The violation in one run, if any.
pub fn check_run(run: &Run, inst: &CoordinationInstance) -> Option<Counterexample> {
    let triggered = run.trigger().is_some() && run.trigger_label() == &inst.trigger;
    let per_response: Vec<Vec<Node>> = inst
        .responses
        .iter()
        .map(|r| run.action_nodes(&r.action))
        .collect();
    let nodes: Vec<Option<Node>> = per_response
        .iter()
        .zip(&inst.responses)
        .map(|(v, r)| match v.as_slice() {
            [n] if n.agent == r.agent => Some(*n),
            _ => None,
        })
        .collect();
    let fail = |clause, detail: String| {
        Some(Counterexample {
            run: run.id(),
            clause,
            detail,
            nodes: nodes.clone(),
        })
    };
    if !triggered {
        if let Some(h) = per_response.iter().position(|v| !v.is_empty()) {
            return fail(
                Clause::Occurrence,
                format!("response {} occurs without the trigger", h + 1),
            );
        }
        return None;
    }
    if let Some(h) = nodes.iter().position(|n| n.is_none()) {
        let count = per_response[h].len();
        let detail = if count == 0 {
            format!("response {} does not occur within the horizon", h + 1)
        } else {
            format!("response {} occurs {} times or at the wrong agent", h + 1, count)
        };
        return fail(Clause::Occurrence, detail);
    }
    let times: Vec<i64> = nodes.iter().map(|n| i64::from(n.unwrap().time)).collect();
    timing_violation(inst, &times).and_then(|d| fail(Clause::Timing, d))
}

/// `β^k_h = <i_h, t_k - Σ_{j=h}^{k-1} δ_j>` for a WTR instance.
pub fn beta_node(inst: &CoordinationInstance, h: usize, t_k: TimePoint) -> Result<Node, CoordinationError> {
    let k = inst.k();
    if h == 0 || h > k {
        return Err(CoordinationError::BadIndex { h, k });
    }
    if inst.kind != ProblemKind::Wtr {
        return Err(CoordinationError::WrongKind(inst.kind));
    }
    let sum: i64 = inst.deltas[h - 1..k - 1].iter().sum();
    let time = i64::from(t_k) - sum;
    if time < 0 {
        return Err(CoordinationError::NegativeTime { h, time });
    }
    Ok(Node {
        agent: inst.responses[h - 1].agent,
        time: time as TimePoint,
    })
}

/// How a chain responder treats the delta to its predecessor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaitRule {
    /// Act once at least `δ` rounds have passed since the predecessor's
    /// action, as read from its timestamp.
    Timestamp,
    /// Act as soon as the predecessor's action is known.
    None,
    /// Act exactly `δ` rounds after hearing of the predecessor's action.
    AfterHearing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainLink {
    pub agent: AgentId,
    pub action: Label,
    /// Predecessor action and delta; `None` for the first responder,
    /// which acts upon hearing of the trigger.
    pub after: Option<(Label, i64)>,
    pub wait: WaitRule,
}

/// Each responder acts after learning of its predecessor's action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainPolicy {
    pub links: Vec<ChainLink>,
}

impl ResponsePolicy for ChainPolicy {
    fn actions(&self, view: &LocalView<'_>) -> Vec<Label> {
        let k = view.knowledge;
        let mut out = Vec::new();
        for link in self.links.iter().filter(|l| l.agent == view.agent) {
            if k.action_node(&link.action).is_some() {
                continue;
            }
            let fire = match &link.after {
                None => k.trigger.is_some(),
                Some((prev, delta)) => match k.action_node(prev) {
                    None => false,
                    Some(n) => {
                        let now = i64::from(view.time);
                        match link.wait {
                            WaitRule::Timestamp => now >= i64::from(n.time) + delta,
                            WaitRule::None => true,
                            WaitRule::AfterHearing => {
                                let heard = k.learned.get(prev).copied().unwrap_or(view.time);
                                now >= i64::from(heard) + delta
                            }
                        }
                    }
                },
            };
            if fire {
                out.push(link.action.clone());
            }
        }
        out
    }
}

/// Chain policy for an OR or WTR instance: responder 1 acts upon hearing
/// of the trigger, responder `h` once it knows responder `h-1` acted
/// (and, for WTR, once the delta has elapsed per `wait`).
pub fn make_chain_policy(
    topo: &Topology,
    trigger: &TriggerSpec,
    inst: &CoordinationInstance,
    wait: WaitRule,
) -> Result<ChainPolicy, CoordinationError> {
    inst.validate()?;
    if !matches!(inst.kind, ProblemKind::Or | ProblemKind::Wtr) {
        return Err(CoordinationError::WrongKind(inst.kind));
    }
    let mut prev_agent = trigger.agent;
    let mut links = Vec::new();
    for (h, r) in inst.responses.iter().enumerate() {
        if !topo.contains(r.agent) {
            return Err(CoordinationError::UnknownAgent(r.agent));
        }
        if topo.wdist(prev_agent, r.agent).finite().is_none() {
            return Err(CoordinationError::Unreachable {
                from: prev_agent,
                to: r.agent,
            });
        }
        let after = (h > 0).then(|| {
            let delta = if inst.kind == ProblemKind::Wtr {
                inst.deltas[h - 1]
            } else {
                0
            };
            (inst.responses[h - 1].action.clone(), delta)
        });
        links.push(ChainLink {
            agent: r.agent,
            action: r.action.clone(),
            after,
            wait,
        });
        prev_agent = r.agent;
    }
    Ok(ChainPolicy { links })
}

/// Hub-anchored schedule for TTR and SR: once the hub hears of the
/// trigger at `t_θ`, responder `h` acts at `t_θ + offset + δ_h`, where the
/// offset is the least value that lets every responder learn `t_θ` in time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BroomPolicy {
    pub hub: AgentId,
    pub offset: i64,
    pub slots: Vec<(AgentId, Label, i64)>,
}

impl ResponsePolicy for BroomPolicy {
    fn actions(&self, view: &LocalView<'_>) -> Vec<Label> {
        let Some(&heard) = view.knowledge.first_heard.get(&self.hub) else {
            return Vec::new();
        };
        let now = i64::from(view.time);
        self.slots
            .iter()
            .filter(|(a, _, d)| *a == view.agent && now == i64::from(heard) + self.offset + d)
            .map(|(_, l, _)| l.clone())
            .collect()
    }
}

pub fn make_broom_policy(
    topo: &Topology,
    trigger: &TriggerSpec,
    horizon: TimePoint,
    inst: &CoordinationInstance,
    hub: AgentId,
) -> Result<BroomPolicy, CoordinationError> {
    inst.validate()?;
    let ttr = inst
        .as_ttr()
        .ok_or(CoordinationError::WrongKind(inst.kind))?;
    if !topo.contains(hub) {
        return Err(CoordinationError::UnknownAgent(hub));
    }
    let to_hub = topo
        .wdist(trigger.agent, hub)
        .finite()
        .ok_or(CoordinationError::Unreachable {
            from: trigger.agent,
            to: hub,
        })?;
    let mut offset = i64::MIN;
    for (r, d) in ttr.responses.iter().zip(&ttr.deltas) {
        if !topo.contains(r.agent) {
            return Err(CoordinationError::UnknownAgent(r.agent));
        }
        let w = topo
            .wdist(hub, r.agent)
            .finite()
            .ok_or(CoordinationError::Unreachable {
                from: hub,
                to: r.agent,
            })?;
        offset = offset.max(i64::from(w) - d);
    }
    let latest_heard = i64::from(trigger.window.1) + i64::from(to_hub);
    let needed = latest_heard + offset + ttr.deltas.iter().copied().max().unwrap_or(0);
    if needed > i64::from(horizon) {
        return Err(CoordinationError::Infeasible { needed, horizon });
    }
    Ok(BroomPolicy {
        hub,
        offset,
        slots: ttr
            .responses
            .iter()
            .zip(&ttr.deltas)
            .map(|(r, d)| (r.agent, r.action.clone(), *d))
            .collect(),
    })
}

/// When a schedule entry fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// This many rounds after the agent first hears of the trigger.
    AfterHearing(i64),
    /// At this absolute time, trigger or not.
    Absolute(TimePoint),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub agent: AgentId,
    pub action: Label,
    pub at: Anchor,
}

/// A fixed table of actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchedulePolicy {
    pub entries: Vec<ScheduleEntry>,
}

impl ResponsePolicy for SchedulePolicy {
    fn actions(&self, view: &LocalView<'_>) -> Vec<Label> {
        let now = i64::from(view.time);
        self.entries
            .iter()
            .filter(|e| e.agent == view.agent)
            .filter(|e| match e.at {
                Anchor::Absolute(t) => t == view.time,
                Anchor::AfterHearing(d) => view
                    .knowledge
                    .first_heard
                    .get(&view.agent)
                    .is_some_and(|h| i64::from(*h) + d == now),
            })
            .map(|e| e.action.clone())
            .collect()
    }
}

pub fn shared<P: ResponsePolicy + 'static>(p: P) -> Arc<dyn ResponsePolicy> {
    Arc::new(p)
}
