use nbk::network::{AgentId, Channel, Node, Topology};
use nbk::runs::{enumerate_runs, EnvironmentEntry, Label, Run, ScenarioSpec, System, TriggerSpec};

/// Agent 1 fans out to 2 and 3; 3 never sends, so toggling a delivery to 3
/// changes nothing else in the run.
fn fan(window: (u32, u32), absent: bool) -> System {
    let topo = Topology::new(3, vec![Channel::new(1, 2, 2), Channel::new(1, 3, 2)]).unwrap();
    let spec = ScenarioSpec::new(
        topo,
        3,
        TriggerSpec {
            label: Label::from("es"),
            agent: AgentId(1),
            window,
            may_be_absent: absent,
        },
    );
    enumerate_runs(&spec).unwrap()
}

fn env(r: &Run) -> Vec<EnvironmentEntry> {
    r.environment()
}

#[test]
fn agreement_is_reflexive() {
    let sys = fan((0, 1), true);
    for r in sys.runs() {
        for n in r.nodes() {
            assert!(sys.agree_on(r, r, n));
        }
    }
}

#[test]
fn late_toggle_elsewhere_keeps_agreement() {
    let sys = fan((0, 0), false);
    let mut pairs = 0;
    for a in sys.runs() {
        for b in sys.runs() {
            let (ea, eb) = (env(a), env(b));
            if a.id() >= b.id() || ea.len() != eb.len() {
                continue;
            }
            let diff: Vec<usize> = (0..ea.len()).filter(|&k| ea[k] != eb[k]).collect();
            let [k] = diff[..] else { continue };
            if ea[k].id != eb[k].id || ea[k].id.to != AgentId(3) {
                continue;
            }
            let first = ea[k].delivery_time.unwrap_or(u32::MAX).min(eb[k].delivery_time.unwrap_or(u32::MAX));
            for t in 0..first.min(4) {
                assert!(sys.agree_on(a, b, Node::new(3, t)));
            }
            for t in 0..=3 {
                assert!(sys.agree_on(a, b, Node::new(2, t)));
                assert!(sys.agree_on(a, b, Node::new(1, t)));
            }
            assert!(!sys.agree_on(a, b, Node::new(3, first)));
            pairs += 1;
        }
    }
    assert!(pairs > 0);
}

#[test]
fn different_trigger_times_disagree_after_the_trigger() {
    let sys = fan((0, 1), false);
    let at = |t| sys.runs().iter().filter(move |r| r.trigger() == Some(Node::new(1, t)));
    for a in at(0) {
        for b in at(1) {
            assert!(!sys.agree_on(a, b, Node::new(1, 1)));
            assert!(!sys.agree_on(a, b, Node::new(1, 3)));
            assert!(sys.agree_on(a, b, Node::new(2, 0)));
        }
    }
}

#[test]
fn quiet_variant_of_a_full_cone_is_the_run() {
    let sys = fan((0, 0), false);
    // agent 1 hears nothing, so every delivery lies outside its cones
    for r in sys.runs() {
        let q = sys.find_quiet_variant(r, Node::new(1, 3)).unwrap();
        assert!(q.messages().iter().all(|m| m.delivery == Some(m.deadline()).filter(|d| *d <= 3)));
    }
    // a message delivered at the horizon is in the cone of its receiver there
    let all_late: Vec<&Run> = sys
        .runs()
        .iter()
        .filter(|r| r.messages().iter().all(|m| m.delivery == Some(m.deadline()).filter(|d| *d <= 3)))
        .collect();
    assert_eq!(all_late.len(), 1);
    for n in all_late[0].nodes() {
        assert_eq!(sys.find_quiet_variant(all_late[0], n).unwrap().id(), all_late[0].id());
    }
}

fn early_time(m: &nbk::runs::Message) -> Option<u32> {
    Some(m.send_time + 1).filter(|d| *d <= 3)
}

#[test]
fn early_delivery_outside_the_cone_is_made_late() {
    let sys = fan((0, 0), false);
    let early = sys
        .runs()
        .iter()
        .find(|r| r.messages().iter().all(|m| m.delivery == early_time(m)))
        .unwrap();
    // 2@3 hears everything sent to 2 but nothing sent to 3
    let q = sys.find_quiet_variant(early, Node::new(2, 3)).unwrap();
    assert_ne!(q.id(), early.id());
    for m in q.messages() {
        if m.to == AgentId(3) {
            assert_eq!(m.delivery, Some(m.deadline()).filter(|d| *d <= 3), "{}", m.id());
        } else {
            assert_eq!(m.delivery, early_time(m));
        }
    }
}

#[test]
fn untriggered_run_has_the_empty_quiet_variant() {
    let sys = fan((1, 1), true);
    let silent = sys.runs().iter().find(|r| r.trigger().is_none()).unwrap();
    assert!(silent.messages().is_empty());
    for n in silent.nodes() {
        assert_eq!(sys.find_quiet_variant(silent, n).unwrap().id(), silent.id());
    }
}
