//! Scenario files: a TOML description of the network, the trigger, an
//! optional policy and an optional coordination instance.
//!
//! ```toml
//! name = "relay"
//! horizon = 4
//! cap = 100000                      # optional
//!
//! [topology]
//! agents = 2
//! channels = [{ from = 1, to = 2, bound = 2 }]
//!
//! [trigger]
//! label = "es"
//! agent = 1
//! window = [0, 1]
//! may_be_absent = true
//!
//! [instance]                        # optional
//! kind = "wtr"                      # or | sr | wtr | ttr
//! responses = [{ agent = 1, action = "a" }, { agent = 2, action = "b" }]
//! deltas = [2]
//!
//! [policy]                          # optional
//! kind = "chain"                    # chain | broom | schedule
//! wait = "timestamp"                # chain: timestamp | none | after-hearing
//! ```
//!
//! A broom policy names its `hub`. A chain policy may list explicit
//! `links = [{ agent, action, after, delta, wait }]` instead of deriving
//! them from the instance. A schedule policy lists
//! `entries = [{ agent, action, after_hearing }]` or `{ agent, action, at }`.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::coordination::{
    make_broom_policy, make_chain_policy, Anchor, ChainLink, ChainPolicy, CoordinationError,
    CoordinationInstance, ProblemKind, Response, ResponsePolicy, ScheduleEntry, SchedulePolicy,
    WaitRule,
};
use crate::network::{AgentId, Channel, TimePoint, Topology, TopologyError};
use crate::runs::{Label, ScenarioError, ScenarioSpec, TriggerSpec, DEFAULT_CAP};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Syntax(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Coordination(#[from] CoordinationError),
    #[error("policy section: {0}")]
    Policy(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileChannel {
    from: u32,
    to: u32,
    bound: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTopology {
    agents: u32,
    #[serde(default)]
    channels: Vec<FileChannel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTrigger {
    label: String,
    agent: u32,
    window: [u32; 2],
    #[serde(default)]
    may_be_absent: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileResponse {
    agent: u32,
    action: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInstance {
    kind: ProblemKind,
    responses: Vec<FileResponse>,
    #[serde(default)]
    deltas: Vec<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLink {
    agent: u32,
    action: String,
    after: Option<String>,
    #[serde(default)]
    delta: i64,
    wait: Option<WaitRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEntry {
    agent: u32,
    action: String,
    after_hearing: Option<i64>,
    at: Option<TimePoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePolicy {
    kind: String,
    wait: Option<WaitRule>,
    hub: Option<u32>,
    links: Option<Vec<FileLink>>,
    entries: Option<Vec<FileEntry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    horizon: TimePoint,
    cap: Option<usize>,
    topology: FileTopology,
    trigger: FileTrigger,
    instance: Option<FileInstance>,
    policy: Option<FilePolicy>,
}

/// A loaded scenario, ready to enumerate.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub spec: ScenarioSpec,
    pub instance: Option<CoordinationInstance>,
    /// Broom hub, when the policy has one.
    pub hub: Option<AgentId>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let fallback = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Scenario::from_toml(&text, &fallback)
    }

    pub fn from_toml(text: &str, fallback_name: &str) -> Result<Scenario, ScenarioFileError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ScenarioFileError::Syntax(e.to_string()))?;
        let channels = file
            .topology
            .channels
            .iter()
            .map(|c| Channel::new(c.from, c.to, c.bound))
            .collect();
        let topology = Topology::new(file.topology.agents, channels)?;
        let trigger = TriggerSpec {
            label: Label(file.trigger.label.clone()),
            agent: AgentId(file.trigger.agent),
            window: (file.trigger.window[0], file.trigger.window[1]),
            may_be_absent: file.trigger.may_be_absent,
        };
        let mut spec = ScenarioSpec::new(topology.clone(), file.horizon, trigger.clone())
            .with_cap(file.cap.unwrap_or(DEFAULT_CAP));
        spec.validate()?;
        let instance = match file.instance {
            Some(i) => {
                let responses = i
                    .responses
                    .iter()
                    .map(|r| Response::new(r.agent, &r.action))
                    .collect::<Vec<_>>();
                for r in &responses {
                    if !topology.contains(r.agent) {
                        return Err(CoordinationError::UnknownAgent(r.agent).into());
                    }
                }
                Some(CoordinationInstance::new(
                    i.kind,
                    &file.trigger.label,
                    responses,
                    i.deltas,
                )?)
            }
            None => None,
        };
        let mut hub = None;
        if let Some(p) = &file.policy {
            let policy: Arc<dyn ResponsePolicy> = match p.kind.as_str() {
                "chain" => match &p.links {
                    Some(links) => Arc::new(ChainPolicy {
                        links: links
                            .iter()
                            .map(|l| ChainLink {
                                agent: AgentId(l.agent),
                                action: Label(l.action.clone()),
                                after: l.after.as_ref().map(|a| (Label(a.clone()), l.delta)),
                                wait: l.wait.unwrap_or(WaitRule::Timestamp),
                            })
                            .collect(),
                    }),
                    None => {
                        let inst = instance.as_ref().ok_or_else(|| {
                            ScenarioFileError::Policy("chain policy needs an instance or links".into())
                        })?;
                        Arc::new(make_chain_policy(
                            &topology,
                            &trigger,
                            inst,
                            p.wait.unwrap_or(WaitRule::Timestamp),
                        )?)
                    }
                },
                "broom" => {
                    let h = AgentId(p.hub.ok_or_else(|| {
                        ScenarioFileError::Policy("broom policy needs a hub".into())
                    })?);
                    let inst = instance.as_ref().ok_or_else(|| {
                        ScenarioFileError::Policy("broom policy needs an instance".into())
                    })?;
                    hub = Some(h);
                    Arc::new(make_broom_policy(
                        &topology,
                        &trigger,
                        file.horizon,
                        inst,
                        h,
                    )?)
                }
                "schedule" => {
                    let entries = p.entries.as_ref().ok_or_else(|| {
                        ScenarioFileError::Policy("schedule policy needs entries".into())
                    })?;
                    let mut out = Vec::new();
                    for e in entries {
                        let at = match (e.after_hearing, e.at) {
                            (Some(d), None) => Anchor::AfterHearing(d),
                            (None, Some(t)) => Anchor::Absolute(t),
                            _ => {
                                return Err(ScenarioFileError::Policy(
                                    "schedule entry needs exactly one of after_hearing and at".into(),
                                ))
                            }
                        };
                        out.push(ScheduleEntry {
                            agent: AgentId(e.agent),
                            action: Label(e.action.clone()),
                            at,
                        });
                    }
                    Arc::new(SchedulePolicy { entries: out })
                }
                other => {
                    return Err(ScenarioFileError::Policy(format!("unknown policy kind {other}")))
                }
            };
            spec = spec.with_policy(policy);
        }
        Ok(Scenario {
            name: file.name.unwrap_or_else(|| fallback_name.to_string()),
            spec,
            instance,
            hub,
        })
    }

    /// The instance with its kind replaced, if the scenario has one.
    pub fn instance_as(&self, kind: ProblemKind) -> Option<CoordinationInstance> {
        self.instance.as_ref().map(|i| CoordinationInstance {
            kind,
            ..i.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RELAY: &str = r#"
horizon = 3
[topology]
agents = 2
channels = [{ from = 1, to = 2, bound = 2 }]
[trigger]
label = "es"
agent = 1
window = [0, 0]
"#;

    #[test]
    fn loads_minimal_file() {
        let s = Scenario::from_toml(RELAY, "relay").unwrap();
        assert_eq!(s.name, "relay");
        assert_eq!(s.spec.horizon, 3);
        assert!(s.spec.policy.is_none());
        assert!(!s.spec.trigger.may_be_absent);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            Scenario::from_toml("horizon = ", "x"),
            Err(ScenarioFileError::Syntax(_))
        ));
        let dangling = RELAY.replace("to = 2", "to = 5");
        assert!(matches!(
            Scenario::from_toml(&dangling, "x"),
            Err(ScenarioFileError::Topology(_))
        ));
        let late = RELAY.replace("window = [0, 0]", "window = [0, 9]");
        assert!(matches!(
            Scenario::from_toml(&late, "x"),
            Err(ScenarioFileError::Scenario(_))
        ));
        let extra = format!("{RELAY}\n[policy]\nkind = \"broom\"\n");
        assert!(matches!(
            Scenario::from_toml(&extra, "x"),
            Err(ScenarioFileError::Policy(_))
        ));
    }
}
