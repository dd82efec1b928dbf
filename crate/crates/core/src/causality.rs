//! Potential causality within a run and the communication structures that
//! underlie knowledge gain: uneven centipedes, uneven brooms and bridges.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::network::{AgentId, Node, TimePoint, Topology};
use crate::runs::{index_node, node_index, Run};

/// Message-chain reachability between the nodes of one run.
#[derive(Clone, Debug)]
pub struct CausalRelation {
    agent_count: u32,
    horizon: TimePoint,
    forward: Vec<FixedBitSet>,
    backward: Vec<FixedBitSet>,
}

impl CausalRelation {
    pub fn compute(run: &Run) -> Self {
        let n = run.agent_count();
        let horizon = run.horizon();
        let count = run.node_count();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); count];
        for m in run.messages() {
            if let Some(r) = m.receive_node() {
                succ[node_index(n, m.send_node())].push(node_index(n, r));
            }
        }
        let mut forward = vec![FixedBitSet::with_capacity(count); count];
        // successors always have a strictly larger index or are the next
        // node on the same line, so a reverse sweep sees them first
        for idx in (0..count).rev() {
            let node = index_node(n, idx);
            let mut set = FixedBitSet::with_capacity(count);
            set.insert(idx);
            if node.time < horizon {
                set.union_with(&forward[idx + n as usize]);
            }
            for &s in &succ[idx] {
                set.union_with(&forward[s]);
            }
            forward[idx] = set;
        }
        let mut backward = vec![FixedBitSet::with_capacity(count); count];
        for (a, set) in forward.iter().enumerate() {
            for b in set.ones() {
                backward[b].insert(a);
            }
        }
        CausalRelation {
            agent_count: n,
            horizon,
            forward,
            backward,
        }
    }

    fn idx(&self, node: Node) -> Option<usize> {
        (node.time <= self.horizon && node.agent.0 >= 1 && node.agent.0 <= self.agent_count)
            .then(|| node_index(self.agent_count, node))
    }

    /// `a ⇝ b`. Nodes outside the run are related to nothing.
    pub fn causes(&self, a: Node, b: Node) -> bool {
        match (self.idx(a), self.idx(b)) {
            (Some(i), Some(j)) => self.forward[i].contains(j),
            _ => false,
        }
    }

    /// Every node `b` with `node ⇝ b`, as dense indices.
    pub fn future_set(&self, node: Node) -> &FixedBitSet {
        &self.forward[node_index(self.agent_count, node)]
    }

    pub fn past_set(&self, node: Node) -> &FixedBitSet {
        &self.backward[node_index(self.agent_count, node)]
    }

    pub fn past_cone(&self, node: Node) -> BTreeSet<Node> {
        match self.idx(node) {
            Some(i) => self.backward[i]
                .ones()
                .map(|j| index_node(self.agent_count, j))
                .collect(),
            None => BTreeSet::new(),
        }
    }
}

pub fn potentially_causes(run: &Run, a: Node, b: Node) -> bool {
    run.causal().causes(a, b)
}

/// `{ψ : ψ ⇝ node}`, including the node itself.
pub fn past_cone(run: &Run, node: Node) -> BTreeSet<Node> {
    run.causal().past_cone(node)
}

/// Receive nodes of messages delivered before their deadline.
pub fn early_delivery_nodes(run: &Run) -> BTreeSet<Node> {
    run.messages()
        .iter()
        .filter(|m| m.is_early())
        .filter_map(|m| m.receive_node())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Centipede {
    pub spine: Vec<Node>,
    pub targets: Vec<Node>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Broom {
    pub hub: Node,
    pub origin: Node,
    pub targets: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("spine has {spine} nodes but there are {targets} targets")]
    LengthMismatch { spine: usize, targets: usize },
}

/// Pure check of the centipede conditions.
pub fn is_centipede(
    run: &Run,
    topo: &Topology,
    spine: &[Node],
    targets: &[Node],
) -> Result<bool, StructureError> {
    if spine.len() != targets.len() || spine.len() < 2 {
        return Err(StructureError::LengthMismatch {
            spine: spine.len(),
            targets: targets.len(),
        });
    }
    let k = spine.len() - 1;
    if spine[0] != targets[0] || spine[k] != targets[k] {
        return Ok(false);
    }
    let rel = run.causal();
    if !spine.windows(2).all(|w| rel.causes(w[0], w[1])) {
        return Ok(false);
    }
    Ok((1..k).all(|h| topo.bound_guarantee(spine[h], targets[h])))
}

/// Search hooks used by the harness to inject faults into the finders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FinderFault {
    #[default]
    None,
    /// Only consider spines that run straight along the targets.
    SkipHubs,
    /// Only consider the origin itself as a broom hub.
    OriginOnly,
}

/// Finds an uneven centipede for `targets`, or `None` if there is none.
/// Among all witnesses the one with the smallest spine node at each
/// position (in `(time, agent)` order) is returned.
pub fn find_uneven_centipede(run: &Run, topo: &Topology, targets: &[Node]) -> Option<Centipede> {
    find_uneven_centipede_with(run, topo, targets, FinderFault::None)
}

pub fn find_uneven_centipede_with(
    run: &Run,
    topo: &Topology,
    targets: &[Node],
    fault: FinderFault,
) -> Option<Centipede> {
    if targets.len() < 2 || !targets.iter().all(|t| run.contains_node(*t)) {
        return None;
    }
    let k = targets.len() - 1;
    let n = run.agent_count();
    let count = run.node_count();
    let rel = run.causal();
    let allowed = |h: usize, idx: usize| -> bool {
        let node = index_node(n, idx);
        match fault {
            FinderFault::SkipHubs => node == targets[h],
            _ => topo.bound_guarantee(node, targets[h]),
        }
    };
    // layer h holds spine candidates for position h reachable from α0
    let mut layers: Vec<FixedBitSet> = Vec::with_capacity(k + 1);
    let mut first = FixedBitSet::with_capacity(count);
    first.insert(run.index(targets[0]));
    layers.push(first);
    for h in 1..k {
        let mut reach = FixedBitSet::with_capacity(count);
        for p in layers[h - 1].ones() {
            reach.union_with(rel.future_set(index_node(n, p)));
        }
        let mut layer = FixedBitSet::with_capacity(count);
        for idx in reach.ones() {
            if allowed(h, idx) {
                layer.insert(idx);
            }
        }
        layers.push(layer);
    }
    let mut last = FixedBitSet::with_capacity(count);
    last.insert(run.index(targets[k]));
    layers.push(last);
    // keep only candidates that can still reach the next layer
    for h in (0..k).rev() {
        let next = layers[h + 1].clone();
        let pruned: Vec<usize> = layers[h]
            .ones()
            .filter(|&idx| !rel.future_set(index_node(n, idx)).is_disjoint(&next))
            .collect();
        let mut layer = FixedBitSet::with_capacity(count);
        for idx in pruned {
            layer.insert(idx);
        }
        layers[h] = layer;
    }
    if layers[0].is_clear() {
        return None;
    }
    let mut spine = vec![targets[0]];
    for layer in layers.iter().skip(1) {
        let prev = *spine.last().unwrap();
        let fut = rel.future_set(prev);
        let pick = layer.ones().find(|&idx| fut.contains(idx))?;
        spine.push(index_node(n, pick));
    }
    Some(Centipede {
        spine,
        targets: targets.to_vec(),
    })
}

pub fn is_broom(run: &Run, topo: &Topology, broom: &Broom) -> bool {
    !broom.targets.is_empty()
        && run.causal().causes(broom.origin, broom.hub)
        && broom
            .targets
            .iter()
            .all(|a| topo.bound_guarantee(broom.hub, *a))
}

/// Earliest hub `θ` with `origin ⇝ θ` and `θ ⤳ α` for every target.
pub fn find_uneven_broom(run: &Run, topo: &Topology, origin: Node, targets: &[Node]) -> Option<Broom> {
    find_uneven_broom_with(run, topo, origin, targets, FinderFault::None)
}

pub fn find_uneven_broom_with(
    run: &Run,
    topo: &Topology,
    origin: Node,
    targets: &[Node],
    fault: FinderFault,
) -> Option<Broom> {
    if targets.is_empty() || !run.contains_node(origin) {
        return None;
    }
    let n = run.agent_count();
    let hub = run
        .causal()
        .future_set(origin)
        .ones()
        .map(|idx| index_node(n, idx))
        .filter(|h| fault != FinderFault::OriginOnly || *h == origin)
        .find(|h| targets.iter().all(|a| topo.bound_guarantee(*h, *a)))?;
    Some(Broom {
        hub,
        origin,
        targets: targets.to_vec(),
    })
}

/// Classic centipede for agents `i0..ik` over `[t, t']`: the first target
/// is `<i0,t>`, every other target sits at `t'`.
pub fn classic_centipede(
    run: &Run,
    topo: &Topology,
    agents: &[AgentId],
    t: TimePoint,
    t_end: TimePoint,
) -> Option<Centipede> {
    if t > t_end || agents.len() < 2 {
        return None;
    }
    let targets: Vec<Node> = agents
        .iter()
        .enumerate()
        .map(|(h, &agent)| Node {
            agent,
            time: if h == 0 { t } else { t_end },
        })
        .collect();
    find_uneven_centipede(run, topo, &targets)
}

/// Classic broom: a hub after `origin` guaranteeing delivery to every
/// member of `group` by `t'`.
pub fn classic_broom(
    run: &Run,
    topo: &Topology,
    origin: Node,
    group: &[AgentId],
    t_end: TimePoint,
) -> Option<Broom> {
    if origin.time > t_end {
        return None;
    }
    let targets: Vec<Node> = group
        .iter()
        .map(|&agent| Node { agent, time: t_end })
        .collect();
    find_uneven_broom(run, topo, origin, &targets)
}

/// For `θ ⇝ θ'` without `θ ⤳ θ'`, the earliest early-delivery node `β`
/// with `θ ⇝ β ⤳ θ'`. `None` when the premise fails.
pub fn find_bridge(run: &Run, topo: &Topology, from: Node, to: Node) -> Option<Node> {
    let rel = run.causal();
    if !rel.causes(from, to) || topo.bound_guarantee(from, to) {
        return None;
    }
    early_delivery_nodes(run)
        .into_iter()
        .find(|b| rel.causes(from, *b) && topo.bound_guarantee(*b, to))
}

/// Highlights drawn on top of a run diagram.
#[derive(Clone, Debug, Default)]
pub struct DotOverlay {
    /// Drawn as double circles.
    pub marked: BTreeSet<Node>,
    /// Dashed bound-guarantee edges.
    pub guarantees: Vec<(Node, Node)>,
}

impl DotOverlay {
    pub fn centipede(c: &Centipede) -> Self {
        let k = c.spine.len() - 1;
        DotOverlay {
            marked: c.spine.iter().copied().collect(),
            guarantees: (1..k).map(|h| (c.spine[h], c.targets[h])).collect(),
        }
    }

    pub fn broom(b: &Broom) -> Self {
        DotOverlay {
            marked: [b.hub].into_iter().collect(),
            guarantees: b.targets.iter().map(|a| (b.hub, *a)).collect(),
        }
    }
}

/// Graphviz rendering of a run: one row per agent, solid edges for
/// deliveries and dashed edges for the overlay's guarantees.
pub fn to_dot(run: &Run, overlay: &DotOverlay) -> String {
    let mut s = String::new();
    let name = |n: Node| format!("\"{n}\"");
    let _ = writeln!(s, "digraph run{} {{", run.id());
    let _ = writeln!(s, "  rankdir=LR;");
    let _ = writeln!(s, "  node [shape=circle, fontsize=10];");
    for a in 1..=run.agent_count() {
        let _ = write!(s, "  {{ rank=same;");
        for t in 0..=run.horizon() {
            let _ = write!(s, " {};", name(Node::new(a, t)));
        }
        let _ = writeln!(s, " }}");
    }
    for node in run.nodes() {
        let shape = if overlay.marked.contains(&node) {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(s, "  {} [label=\"{}\", shape={}];", name(node), node, shape);
    }
    for a in 1..=run.agent_count() {
        for t in 0..run.horizon() {
            let _ = writeln!(
                s,
                "  {} -> {} [color=gray, arrowhead=none];",
                name(Node::new(a, t)),
                name(Node::new(a, t + 1))
            );
        }
    }
    for m in run.messages() {
        if let Some(r) = m.receive_node() {
            let _ = writeln!(s, "  {} -> {} [style=solid];", name(m.send_node()), name(r));
        }
    }
    for (a, b) in &overlay.guarantees {
        let _ = writeln!(s, "  {} -> {} [style=dashed];", name(*a), name(*b));
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Channel;
    use crate::runs::{enumerate_runs, Label, ScenarioSpec, TriggerSpec};

    fn sys_two() -> crate::runs::System {
        let topo = Topology::new(2, vec![Channel::new(1, 2, 2)]).unwrap();
        let s = ScenarioSpec::new(
            topo,
            3,
            TriggerSpec {
                label: Label::from("es"),
                agent: AgentId(1),
                window: (0, 0),
                may_be_absent: false,
            },
        );
        enumerate_runs(&s).unwrap()
    }

    #[test]
    fn message_clause_and_step_synch() {
        let sys = sys_two();
        let r = sys
            .runs()
            .iter()
            .find(|r| r.messages()[0].delivery == Some(2) && r.messages()[1].delivery == Some(3))
            .unwrap();
        assert!(potentially_causes(r, Node::new(1, 0), Node::new(2, 2)));
        assert!(!potentially_causes(r, Node::new(2, 2), Node::new(1, 0)));
        assert!(potentially_causes(r, Node::new(2, 2), Node::new(2, 3)));
        assert!(!potentially_causes(r, Node::new(1, 1), Node::new(2, 1)));
        let cone = past_cone(r, Node::new(2, 2));
        for n in [Node::new(1, 0), Node::new(2, 0), Node::new(2, 1), Node::new(2, 2)] {
            assert!(cone.contains(&n));
        }
        assert!(!cone.contains(&Node::new(1, 1)));
    }

    #[test]
    fn early_delivery_is_strict() {
        let sys = sys_two();
        let late = sys
            .runs()
            .iter()
            .find(|r| r.messages().iter().all(|m| m.delivery.is_none_or(|d| d == m.deadline())))
            .unwrap();
        assert!(early_delivery_nodes(late).is_empty());
        let quick = &sys.runs()[0];
        assert_eq!(quick.messages()[0].delivery, Some(1));
        assert!(early_delivery_nodes(quick).contains(&Node::new(2, 1)));
    }

    #[test]
    fn trivial_centipede_and_absence() {
        let sys = sys_two();
        let topo = sys.topology().clone();
        let r = &sys.runs()[0];
        let c = find_uneven_centipede(r, &topo, &[Node::new(1, 0), Node::new(2, 1)]).unwrap();
        assert_eq!(c.spine, vec![Node::new(1, 0), Node::new(2, 1)]);
        assert!(is_centipede(r, &topo, &c.spine, &c.targets).unwrap());
        assert!(find_uneven_centipede(r, &topo, &[Node::new(2, 0), Node::new(1, 3)]).is_none());
        assert!(is_centipede(r, &topo, &c.spine, &c.targets[..1]).is_err());
    }

    #[test]
    fn classic_wrappers_reject_reversed_interval() {
        let sys = sys_two();
        let topo = sys.topology().clone();
        let r = &sys.runs()[0];
        assert!(classic_centipede(r, &topo, &[AgentId(1), AgentId(2)], 3, 2).is_none());
        assert!(classic_broom(r, &topo, Node::new(1, 3), &[AgentId(2)], 2).is_none());
        assert!(classic_centipede(r, &topo, &[AgentId(1), AgentId(2)], 0, 2).is_some());
    }

    #[test]
    fn dot_has_expected_shapes() {
        let sys = sys_two();
        let r = &sys.runs()[0];
        let b = find_uneven_broom(r, sys.topology(), Node::new(1, 0), &[Node::new(2, 2)]).unwrap();
        assert_eq!(b.hub, Node::new(1, 0));
        let dot = to_dot(r, &DotOverlay::broom(&b));
        assert!(dot.contains("\"1@0\" [label=\"1@0\", shape=doublecircle];"));
        assert!(dot.contains("\"1@0\" -> \"2@1\" [style=solid];"));
        assert!(dot.contains("\"1@0\" -> \"2@2\" [style=dashed];"));
    }
}
