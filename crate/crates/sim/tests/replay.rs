use std::collections::{BTreeMap, BTreeSet};

use consent_core::content::NodeView;
use consent_core::engine::check_restriction;
use consent_core::{AccountId, ConsentBoundary, NodeId, ThreadId};
use consent_sim::driver::{Call, Driver, FailClosed, NodePersona};
use consent_sim::generate::generate;
use consent_sim::scenario::{Op, Step, UserSpec};
use consent_sim::shadow::Shadow;
use consent_sim::{replay, InProcess, ReplayOptions, Scenario};
use serde_json::json;

fn run(s: &Scenario) -> consent_sim::ReplayReport {
    replay(s, &mut InProcess::for_scenario(s), &ReplayOptions::thorough())
}

#[test]
fn same_seed_gives_identical_text_and_report() {
    let a = generate(11, 15, 150);
    let b = generate(11, 15, 150);
    assert_eq!(a.to_jsonl().as_bytes(), b.to_jsonl().as_bytes());
    let (ra, rb) = (run(&a), run(&b));
    assert_eq!(ra, rb);
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
}

#[test]
fn empty_scenario_gives_empty_report() {
    let s = Scenario::parse("{\"kind\":\"header\",\"name\":\"empty\"}\n").unwrap();
    let r = run(&s);
    assert!(r.is_clean());
    assert_eq!((r.actions, r.mutations), (0, 0));
    assert!(r.final_audiences.is_empty() && r.notifications.is_empty());
}

#[test]
fn single_public_post_reaches_all_three_users() {
    let text = r#"{"kind":"header","name":"trivial"}
{"kind":"user","handle":"mod","moderator":true}
{"kind":"user","handle":"ana"}
{"kind":"user","handle":"ben"}
{"kind":"action","actor":"ana","op":"create_post","node":"p","persona":"ana","body":"hello"}
{"kind":"action","actor":"mod","op":"expect_audience","target":"p","audience":["ana","ben","mod"]}
"#;
    let s = Scenario::parse(text).unwrap();
    let shadow = Shadow::from_scenario(&s);
    assert_eq!(shadow.audience(shadow.node_index("p").unwrap()).len(), 3);
    let r = run(&s);
    assert!(r.is_clean(), "{:?}", r.expectation_failures);
    assert_eq!(r.final_audiences["p"], ["ana", "ben", "mod"]);
}

#[test]
fn generated_restrictions_narrow_and_widenings_do_not() {
    let mut narrowing = 0;
    let mut widening = 0;
    for seed in 0..40 {
        let s = generate(seed, 20, 200);
        let mut current: BTreeMap<String, ConsentBoundary> = BTreeMap::new();
        for step in &s.steps {
            let Step::Action(a) = &step.item else { continue };
            let parse = |v: &serde_json::Value| serde_json::from_value::<ConsentBoundary>(v.clone()).unwrap();
            match &a.op {
                Op::CreatePost { node, boundary, .. } | Op::CreateComment { node, boundary, .. } if a.expect == "ok" => {
                    current.insert(node.clone(), parse(boundary));
                }
                Op::SetBoundaryVisibility { target, show } if a.expect == "ok" => {
                    current.get_mut(target).unwrap().show_boundary = *show;
                }
                Op::Restrict { target, boundary } => {
                    let old = current.get(target).unwrap();
                    let new = parse(boundary);
                    match a.expect.as_str() {
                        "widening_violation" => {
                            assert!(check_restriction(old, &new).is_err(), "seed {seed} line {}", step.line);
                            widening += 1;
                        }
                        _ => {
                            assert_eq!(check_restriction(old, &new), Ok(()), "seed {seed} line {}", step.line);
                            narrowing += 1;
                            if a.expect == "ok" {
                                current.insert(target.clone(), new);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    assert!(narrowing > 50 && widening > 5, "{narrowing} narrowing, {widening} widening");
}

/// Wraps the real platform and corrupts one kind of answer.
struct Faulty {
    inner: InProcess,
    fault: Fault,
}

#[derive(Clone, Copy, PartialEq)]
enum Fault {
    ExtraViewer,
    LostMail,
    MailOnRestrict,
    GrowOnTraitRemoval,
}

impl Driver for Faulty {
    fn mode(&self) -> &'static str {
        "faulty"
    }
    fn register(&mut self, user: &UserSpec) -> Result<AccountId, String> {
        self.inner.register(user)
    }
    fn apply(&mut self, actor: AccountId, call: &Call) -> Result<Option<NodeId>, String> {
        self.inner.apply(actor, call)
    }
    fn audience(&mut self, node: NodeId) -> Option<BTreeSet<AccountId>> {
        let mut a = self.inner.audience(node)?;
        if self.fault == Fault::ExtraViewer && node.0 > 1 {
            a.insert(AccountId(3));
        }
        Some(a)
    }
    fn feed(&mut self, viewer: AccountId) -> Result<Vec<NodeView>, String> {
        self.inner.feed(viewer)
    }
    fn thread(&mut self, viewer: AccountId, thread: ThreadId) -> Result<Vec<NodeView>, String> {
        self.inner.thread(viewer, thread)
    }
    fn drain_notifications(&mut self) -> BTreeMap<NodeId, BTreeSet<AccountId>> {
        let mut mail = self.inner.drain_notifications();
        match self.fault {
            Fault::LostMail => mail.values_mut().for_each(|r| {
                r.pop_first();
            }),
            Fault::MailOnRestrict if mail.is_empty() => {
                mail.insert(NodeId(1), [AccountId(1)].into());
            }
            _ => {}
        }
        mail
    }
    fn node_personas(&mut self) -> Vec<NodePersona> {
        self.inner.node_personas()
    }
    fn fail_closed(&mut self) -> Option<FailClosed> {
        let mut fc = self.inner.fail_closed()?;
        if self.fault == Fault::GrowOnTraitRemoval {
            fc.violations += 1;
        }
        Some(fc)
    }
}

fn restriction_world() -> Scenario {
    let text = [
        json!({"kind":"header","name":"faults"}),
        json!({"kind":"user","handle":"mod","moderator":true}),
        json!({"kind":"user","handle":"ana","traits":{"races":["asian"]}}),
        json!({"kind":"user","handle":"ben","traits":{"races":["white"]}}),
        json!({"kind":"user","handle":"cai","traits":{"races":["asian"]}}),
        json!({"kind":"action","actor":"ana","op":"create_post","node":"p","persona":"ana","body":"x"}),
        json!({"kind":"action","actor":"cai","op":"create_comment","node":"c","parent":"p","persona":"cai","body":"y","boundary":{"races_allowed":["asian"]}}),
        json!({"kind":"action","actor":"ana","op":"restrict","target":"p","boundary":{"races_allowed":["asian"]}}),
    ]
    .iter()
    .map(|v| v.to_string() + "\n")
    .collect::<String>();
    Scenario::parse(&text).unwrap()
}

#[test]
fn corrupted_answers_are_reported() {
    let s = restriction_world();
    assert!(run(&s).is_clean());
    for fault in [Fault::ExtraViewer, Fault::LostMail, Fault::MailOnRestrict, Fault::GrowOnTraitRemoval] {
        let mut driver = Faulty {
            inner: InProcess::for_scenario(&s),
            fault,
        };
        let r = replay(&s, &mut driver, &ReplayOptions::thorough());
        let i = r.invariants;
        let caught = match fault {
            Fault::ExtraViewer => i.audience_mismatches > 0 && i.monotonicity_violations > 0,
            Fault::LostMail => i.notification_mismatches > 0,
            Fault::MailOnRestrict => i.restriction_notifications > 0,
            Fault::GrowOnTraitRemoval => i.fail_closed_violations > 0,
        };
        assert!(caught && !r.is_clean(), "fault {} went unnoticed: {i:?}", fault as u8);
    }
}
