//! Static network model: agents, bounded directed channels and the
//! run-independent bound-guarantee relation.
//!
//! A channel `i -> j` with bound `b` promises that a message sent at
//! `<i,t>` is delivered no later than `<j,t+b>`. Chaining such promises
//! gives the bound-guarantee relation; it only depends on the weighted
//! graph, so it is answered here in closed form from shortest-path
//! distances.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete time. Round `t` happens between time `t-1` and time `t`.
pub type TimePoint = u32;

/// An agent of the system, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    /// Zero-based position, used for dense indexing.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An agent-time pair `<i,t>`.
///
/// Nodes order by time first and agent second, which is the scan order
/// used by every witness search in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub agent: AgentId,
    pub time: TimePoint,
}

impl Node {
    pub fn new(agent: u32, time: TimePoint) -> Self {
        Node {
            agent: AgentId(agent),
            time,
        }
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.agent).cmp(&(other.time, other.agent))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.agent, self.time)
    }
}

/// A directed channel with its maximal transmission time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Channel {
    pub from: AgentId,
    pub to: AgentId,
    pub bound: u32,
}

impl Channel {
    pub fn new(from: u32, to: u32, bound: u32) -> Self {
        Channel {
            from: AgentId(from),
            to: AgentId(to),
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("topology must contain at least one agent")]
    NoAgents,
    #[error("channel {from}->{to} is a self-loop")]
    SelfLoop { from: AgentId, to: AgentId },
    #[error("channel {from}->{to} refers to an agent outside 1..={agent_count}")]
    DanglingEndpoint {
        from: AgentId,
        to: AgentId,
        agent_count: u32,
    },
    #[error("channel {from}->{to} has bound 0; bounds must be at least 1")]
    ZeroBound { from: AgentId, to: AgentId },
    #[error("channel {from}->{to} is declared more than once")]
    DuplicateChannel { from: AgentId, to: AgentId },
}

/// Weighted shortest-path distance between two agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(u32),
    Unreachable,
}

impl Distance {
    pub fn finite(self) -> Option<u32> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Unreachable => None,
        }
    }
}

/// Checks the topology invariants, reporting the first violation in
/// channel declaration order.
pub fn validate_topology(agent_count: u32, channels: &[Channel]) -> Result<(), TopologyError> {
    if agent_count == 0 {
        return Err(TopologyError::NoAgents);
    }
    let mut seen = std::collections::HashSet::new();
    for c in channels {
        let in_range = |a: AgentId| a.0 >= 1 && a.0 <= agent_count;
        if !in_range(c.from) || !in_range(c.to) {
            return Err(TopologyError::DanglingEndpoint {
                from: c.from,
                to: c.to,
                agent_count,
            });
        }
        if c.from == c.to {
            return Err(TopologyError::SelfLoop {
                from: c.from,
                to: c.to,
            });
        }
        if c.bound == 0 {
            return Err(TopologyError::ZeroBound {
                from: c.from,
                to: c.to,
            });
        }
        if !seen.insert((c.from, c.to)) {
            return Err(TopologyError::DuplicateChannel {
                from: c.from,
                to: c.to,
            });
        }
    }
    Ok(())
}

/// A validated, immutable network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    agent_count: u32,
    channels: Vec<Channel>,
    dist: Vec<Distance>,
}

impl Topology {
    pub fn new(agent_count: u32, mut channels: Vec<Channel>) -> Result<Self, TopologyError> {
        validate_topology(agent_count, &channels)?;
        channels.sort();
        let dist = shortest_paths(agent_count as usize, &channels);
        Ok(Topology {
            agent_count,
            channels,
            dist,
        })
    }

    pub fn agent_count(&self) -> u32 {
        self.agent_count
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (1..=self.agent_count).map(AgentId)
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        agent.0 >= 1 && agent.0 <= self.agent_count
    }

    /// Channels sorted by `(from, to)`.
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, from: AgentId, to: AgentId) -> Option<&Channel> {
        self.channels.iter().find(|c| c.from == from && c.to == to)
    }

    pub fn bound(&self, from: AgentId, to: AgentId) -> Option<u32> {
        self.channel(from, to).map(|c| c.bound)
    }

    /// Outgoing channels of `agent`, sorted by destination.
    pub fn out_channels(&self, agent: AgentId) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(move |c| c.from == agent)
    }

    /// A copy of this topology with the channel `from -> to` removed.
    pub fn without_channel(&self, from: AgentId, to: AgentId) -> Topology {
        let channels = self
            .channels
            .iter()
            .copied()
            .filter(|c| !(c.from == from && c.to == to))
            .collect();
        Topology::new(self.agent_count, channels).expect("removing a channel keeps validity")
    }

    /// A copy of this topology with one more channel.
    pub fn with_channel(&self, channel: Channel) -> Result<Topology, TopologyError> {
        let mut channels = self.channels.clone();
        channels.push(channel);
        Topology::new(self.agent_count, channels)
    }

    /// Weighted shortest-path distance; zero on the diagonal.
    pub fn wdist(&self, from: AgentId, to: AgentId) -> Distance {
        let n = self.agent_count as usize;
        self.dist[from.index() * n + to.index()]
    }

    /// `a ⤳ b`: a message leaving `a` is guaranteed to have reached `b`.
    pub fn bound_guarantee(&self, a: Node, b: Node) -> bool {
        match self.wdist(a.agent, b.agent) {
            Distance::Finite(d) => u64::from(b.time) >= u64::from(a.time) + u64::from(d),
            Distance::Unreachable => false,
        }
    }

    /// The least time at which `target` is guaranteed to hear from `origin`.
    pub fn min_guarantee_time(&self, origin: Node, target: AgentId) -> Option<TimePoint> {
        self.wdist(origin.agent, target)
            .finite()
            .map(|d| origin.time + d)
    }
}

fn shortest_paths(n: usize, channels: &[Channel]) -> Vec<Distance> {
    let mut d: Vec<Option<u64>> = vec![None; n * n];
    for i in 0..n {
        d[i * n + i] = Some(0);
    }
    for c in channels {
        let slot = &mut d[c.from.index() * n + c.to.index()];
        let b = u64::from(c.bound);
        *slot = Some(slot.map_or(b, |cur| cur.min(b)));
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i * n + k] else { continue };
            for j in 0..n {
                if let Some(kj) = d[k * n + j] {
                    let via = ik + kj;
                    let slot = &mut d[i * n + j];
                    if slot.is_none_or(|cur| via < cur) {
                        *slot = Some(via);
                    }
                }
            }
        }
    }
    d.into_iter()
        .map(|x| match x {
            Some(v) => Distance::Finite(v as u32),
            None => Distance::Unreachable,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Topology {
        Topology::new(3, vec![Channel::new(1, 2, 2), Channel::new(2, 3, 3)]).unwrap()
    }

    #[test]
    fn minimal_network_is_valid() {
        let t = Topology::new(2, vec![Channel::new(1, 2, 2), Channel::new(2, 1, 2)]);
        assert!(t.is_ok());
    }

    #[test]
    fn each_violation_is_named() {
        assert_eq!(
            validate_topology(2, &[Channel::new(1, 1, 1)]),
            Err(TopologyError::SelfLoop {
                from: AgentId(1),
                to: AgentId(1)
            })
        );
        assert!(matches!(
            validate_topology(2, &[Channel::new(1, 3, 1)]),
            Err(TopologyError::DanglingEndpoint { .. })
        ));
        assert!(matches!(
            validate_topology(2, &[Channel::new(1, 2, 0)]),
            Err(TopologyError::ZeroBound { .. })
        ));
        assert!(matches!(
            validate_topology(2, &[Channel::new(1, 2, 1), Channel::new(1, 2, 4)]),
            Err(TopologyError::DuplicateChannel { .. })
        ));
        assert_eq!(validate_topology(0, &[]), Err(TopologyError::NoAgents));
    }

    #[test]
    fn bound_guarantee_examples() {
        let t = Topology::new(2, vec![Channel::new(1, 2, 2)]).unwrap();
        assert!(t.bound_guarantee(Node::new(1, 0), Node::new(2, 2)));
        assert!(!t.bound_guarantee(Node::new(1, 0), Node::new(2, 1)));
        assert!(t.bound_guarantee(Node::new(1, 3), Node::new(1, 3)));
        assert!(!t.bound_guarantee(Node::new(2, 0), Node::new(1, 9)));

        let c = chain();
        assert!(!c.bound_guarantee(Node::new(1, 0), Node::new(3, 4)));
        assert!(c.bound_guarantee(Node::new(1, 0), Node::new(3, 5)));
    }

    #[test]
    fn min_guarantee_time_examples() {
        let t = Topology::new(3, vec![Channel::new(1, 2, 2)]).unwrap();
        assert_eq!(t.min_guarantee_time(Node::new(1, 0), AgentId(2)), Some(2));
        assert_eq!(t.min_guarantee_time(Node::new(1, 4), AgentId(1)), Some(4));
        assert_eq!(t.min_guarantee_time(Node::new(1, 0), AgentId(3)), None);
        assert_eq!(t.wdist(AgentId(1), AgentId(3)), Distance::Unreachable);
    }

    #[test]
    fn node_order_is_time_major() {
        let mut v = vec![Node::new(2, 0), Node::new(1, 1), Node::new(1, 0)];
        v.sort();
        assert_eq!(v, vec![Node::new(1, 0), Node::new(2, 0), Node::new(1, 1)]);
        assert_eq!(Node::new(3, 7).to_string(), "3@7");
    }
}
