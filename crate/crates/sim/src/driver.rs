//! The two ways of running a scenario against the platform.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use consent_core::clock::LogicalClock;
use consent_core::content::NodeView;
use consent_core::engine::Member;
use consent_core::error::{class_of, ErrorClass};
use consent_core::identity::{DomainAllowList, SignupDecision};
use consent_core::{
    AccountId, ConsentBoundary, NodeId, Platform, PlatformConfig, PlatformError, ThreadId, TraitField, TraitPatch,
    TraitProfile, Vocabulary,
};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::scenario::{Scenario, UserSpec};

/// A scenario action with labels and handles resolved to platform ids.
#[derive(Debug, Clone, PartialEq)]
pub enum Call {
    ClaimPersona(String),
    UpdateTraits(Value),
    SetDefaultBoundary(Option<Value>),
    CreatePost {
        persona: String,
        body: String,
        boundary: Value,
    },
    CreateComment {
        parent: NodeId,
        persona: String,
        body: String,
        boundary: Value,
    },
    Restrict {
        node: NodeId,
        boundary: Value,
    },
    SetVisibility {
        node: NodeId,
        show: bool,
    },
    Delete(NodeId),
    ModerateRemove {
        node: NodeId,
        reason: String,
    },
    Resolve {
        node: NodeId,
        recipients: BTreeSet<AccountId>,
    },
    ReviewSignup {
        account: AccountId,
        decision: String,
    },
    Deactivate(AccountId),
}

/// Error codes as both drivers report them. Everything that means "not
/// there for you" collapses to `not_found`, since the HTTP layer cannot
/// tell those apart either.
pub fn normalise(code: &str) -> String {
    if class_of(code) == ErrorClass::NotFound {
        "not_found".into()
    } else {
        code.into()
    }
}

/// Export-record fields the persona check needs.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePersona {
    pub node: NodeId,
    pub thread: ThreadId,
    pub persona: String,
}

/// The ways a 404 can be provoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Thread(ThreadId),
    Comment(NodeId),
    LastUsedBoundary(NodeId),
}

/// Counts from the trait-removal check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FailClosed {
    pub checks: u64,
    pub violations: u64,
}

pub trait Driver {
    fn mode(&self) -> &'static str;

    /// Registers without approving.
    fn register(&mut self, user: &UserSpec) -> Result<AccountId, String>;

    /// Runs one mutation. Returns the new node for creations.
    fn apply(&mut self, actor: AccountId, call: &Call) -> Result<Option<NodeId>, String>;

    /// Current audience of a node, or `None` when it does not exist.
    fn audience(&mut self, node: NodeId) -> Option<BTreeSet<AccountId>>;

    fn feed(&mut self, viewer: AccountId) -> Result<Vec<NodeView>, String>;

    fn thread(&mut self, viewer: AccountId, thread: ThreadId) -> Result<Vec<NodeView>, String>;

    /// Notifications sent since the last call, as node -> recipients.
    fn drain_notifications(&mut self) -> BTreeMap<NodeId, BTreeSet<AccountId>>;

    /// Persona recorded on every node, from the platform's own records.
    fn node_personas(&mut self) -> Vec<NodePersona>;

    /// Removes each declared trait from each profile in turn and counts
    /// audiences that would grow. Only possible with direct access.
    fn fail_closed(&mut self) -> Option<FailClosed> {
        None
    }

    /// Status and body of a request that must look like a missing node.
    fn probe(&mut self, _viewer: AccountId, _probe: Probe) -> Option<(u16, String)> {
        None
    }

    /// Wire-level findings so far, for drivers that see raw responses.
    fn wire(&self) -> Option<crate::report::WireReport> {
        None
    }
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, String> {
    serde_json::from_value(v.clone()).map_err(|_| "invalid_request".to_string())
}

fn code(e: PlatformError) -> String {
    e.code().to_string()
}

/// Drives a [`Platform`] directly, with a logical clock.
pub struct InProcess {
    pub platform: Platform,
    seen_events: usize,
}

impl InProcess {
    pub fn new(platform: Platform) -> Self {
        InProcess {
            platform,
            seen_events: 0,
        }
    }

    /// A fresh platform configured for `scenario`: its email domains, its
    /// moderator and the built-in vocabulary.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let config = PlatformConfig {
            allowlist: DomainAllowList::from_domains(scenario.domains()),
            moderator_email: scenario.moderator_email(),
            vocab: Vocabulary::seed(),
            purge_deleted: false,
        };
        Self::new(Platform::new(config).with_clock(Arc::new(LogicalClock::default())))
    }
}

impl Driver for InProcess {
    fn mode(&self) -> &'static str {
        "in-process"
    }

    fn register(&mut self, user: &UserSpec) -> Result<AccountId, String> {
        let traits: TraitProfile = parse(&user.traits)?;
        let acct = self.platform.register(&user.email(), traits, &user.persona()).map_err(code)?;
        Ok(acct.id)
    }

    fn apply(&mut self, actor: AccountId, call: &Call) -> Result<Option<NodeId>, String> {
        let p = &self.platform;
        match call {
            Call::ClaimPersona(name) => p.claim_persona(actor, name).map(|_| None),
            Call::UpdateTraits(patch) => {
                let patch: TraitPatch = parse(patch)?;
                p.update_traits(actor, &patch).map(|_| None)
            }
            Call::SetDefaultBoundary(b) => {
                let b: Option<ConsentBoundary> = b.as_ref().map(parse).transpose()?;
                p.set_default_boundary(actor, b).map(|_| None)
            }
            Call::CreatePost { persona, body, boundary } => {
                let b = parse(boundary)?;
                p.create_post(actor, persona, body, b).map(|n| Some(n.id))
            }
            Call::CreateComment {
                parent,
                persona,
                body,
                boundary,
            } => {
                let b = parse(boundary)?;
                p.create_comment(actor, persona, *parent, body, b).map(|n| Some(n.id))
            }
            Call::Restrict { node, boundary } => {
                let b = parse(boundary)?;
                p.restrict_node_boundary(actor, *node, b).map(|_| None)
            }
            Call::SetVisibility { node, show } => p.toggle_boundary_visibility(actor, *node, *show).map(|_| None),
            Call::Delete(node) => p.delete_node(actor, *node).map(|_| None),
            Call::ModerateRemove { node, reason } => p.moderate_remove(actor, *node, reason).map(|_| None),
            Call::Resolve { node, recipients } => p.resolve_other_info(actor, *node, recipients.clone()).map(|_| None),
            Call::ReviewSignup { account, decision } => {
                let d: SignupDecision = parse(&Value::String(decision.clone()))?;
                p.approve_signup(actor, *account, d).map(|_| None)
            }
            Call::Deactivate(target) => p.deactivate(actor, *target).map(|_| None),
        }
        .map_err(code)
    }

    fn audience(&mut self, node: NodeId) -> Option<BTreeSet<AccountId>> {
        let exists = self.platform.read(|s| s.content().node(node).is_some());
        if !exists {
            return None;
        }
        self.platform.audience(node).map(|a| a.into_inner())
    }

    fn feed(&mut self, viewer: AccountId) -> Result<Vec<NodeView>, String> {
        self.platform.get_feed(viewer).map_err(code)
    }

    fn thread(&mut self, viewer: AccountId, thread: ThreadId) -> Result<Vec<NodeView>, String> {
        self.platform.get_thread(viewer, thread).map_err(code)
    }

    fn drain_notifications(&mut self) -> BTreeMap<NodeId, BTreeSet<AccountId>> {
        let events = self.platform.read(|s| s.notifications()[self.seen_events..].to_vec());
        self.seen_events += events.len();
        let mut out: BTreeMap<NodeId, BTreeSet<AccountId>> = BTreeMap::new();
        for e in events {
            out.entry(e.node_id).or_default().extend(e.recipients);
        }
        out
    }

    fn node_personas(&mut self) -> Vec<NodePersona> {
        self.platform.read(|s| {
            s.content()
                .export_records()
                .into_iter()
                .map(|r| NodePersona {
                    node: r.node_id,
                    thread: r.thread_id,
                    persona: r.persona.to_string(),
                })
                .collect()
        })
    }

    fn fail_closed(&mut self) -> Option<FailClosed> {
        Some(self.platform.read(|s| {
            let content = s.content();
            let nodes: Vec<NodeId> = content.nodes().map(|n| n.id).collect();
            let mut out = FailClosed::default();
            for acct in s.identity().accounts().filter(|a| a.is_active() && !a.moderator) {
                let full = acct.member();
                let before: Vec<bool> = nodes.iter().map(|n| content.in_audience(*n, &full)).collect();
                for field in TraitField::ALL.into_iter().filter(|f| acct.profile.is_declared(*f)) {
                    let reduced = acct.profile.without(field);
                    let member = Member {
                        profile: &reduced,
                        ..full
                    };
                    for (i, n) in nodes.iter().enumerate() {
                        out.checks += 1;
                        if !before[i] && content.in_audience(*n, &member) {
                            out.violations += 1;
                        }
                    }
                }
            }
            out
        }))
    }
}
