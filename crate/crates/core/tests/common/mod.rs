#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use consent_core::clock::LogicalClock;
use consent_core::identity::{DomainAllowList, SignupDecision};
use consent_core::notify::MemoryOutbox;
use consent_core::{AccountId, ConsentBoundary, Platform, PlatformConfig, TraitProfile, Vocabulary};
use serde_json::Value;

pub struct World {
    pub platform: Platform,
    pub moderator: AccountId,
    pub outbox: Arc<MemoryOutbox>,
}

impl World {
    pub fn new() -> Self {
        let outbox = Arc::new(MemoryOutbox::default());
        let platform = Platform::new(PlatformConfig {
            allowlist: DomainAllowList::from_domains(["univ.edu"]),
            moderator_email: Some("mod@univ.edu".into()),
            vocab: Vocabulary::seed(),
            purge_deleted: false,
        })
        .with_clock(Arc::new(LogicalClock::default()))
        .with_transport(outbox.clone());
        let moderator = platform
            .register("mod@univ.edu", TraitProfile::default(), "moderator")
            .unwrap()
            .id;
        World {
            platform,
            moderator,
            outbox,
        }
    }

    /// Registers and approves a user whose first persona is `persona`.
    pub fn user(&self, persona: &str, profile: TraitProfile) -> AccountId {
        let id = self
            .platform
            .register(&format!("{persona}@univ.edu"), profile, persona)
            .unwrap()
            .id;
        self.platform
            .approve_signup(self.moderator, id, SignupDecision::Approve)
            .unwrap();
        id
    }

    pub fn user_json(&self, persona: &str, profile: Value) -> AccountId {
        self.user(persona, serde_json::from_value(profile).unwrap())
    }
}

pub fn boundary(doc: Value) -> ConsentBoundary {
    serde_json::from_value(doc).unwrap()
}

/// Viewer description for the reference evaluator.
pub struct Viewer {
    pub account: AccountId,
    pub profile: Value,
    pub personas: BTreeSet<String>,
    pub moderator: bool,
}

/// One node of a path, root first.
pub struct Step<'a> {
    pub author: AccountId,
    pub boundary: Value,
    pub explicit: Option<&'a BTreeSet<AccountId>>,
}

fn strings(v: &Value) -> BTreeSet<String> {
    v.as_array()
        .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

/// Reference evaluation of one boundary document against one profile
/// document, written directly from the matching rules.
pub fn reference_passes(b: &Value, p: &Value, personas: &BTreeSet<String>) -> bool {
    let advisors = || {
        let mut all = strings(&p["current_advisors"]);
        all.extend(strings(&p["prior_advisors"]));
        all
    };
    b.as_object().unwrap().iter().all(|(key, val)| match key.as_str() {
        "gender_allowed" => p["gender"].as_str().is_some_and(|g| strings(val).contains(g)),
        "races_allowed" => !strings(&p["races"]).is_disjoint(&strings(val)),
        "require_international" => val != &Value::Bool(true) || p["international"] == Value::Bool(true),
        "challenges_any" => !strings(&p["challenges_experienced"]).is_disjoint(&strings(val)),
        "require_advising_change" => {
            val != &Value::Bool(true) || p["advising_status_changed"] == Value::Bool(true)
        }
        "programs_allowed" => p["phd_program"].as_str().is_some_and(|x| strings(val).contains(x)),
        "advised_by_any" => !advisors().is_disjoint(&strings(val)),
        "not_advised_by" => {
            p.get("current_advisors").is_some()
                && p.get("prior_advisors").is_some()
                && advisors().is_disjoint(&strings(val))
        }
        "usernames_allowed" => !personas.is_disjoint(&strings(val)),
        "other_info" | "show_boundary" | "show_to_parent_author" => true,
        other => panic!("unexpected boundary key {other}"),
    })
}

/// Whether `v` may see the last node of `path`.
pub fn reference_sees(v: &Viewer, path: &[Step<'_>]) -> bool {
    path.iter().enumerate().all(|(i, step)| {
        let privileged = v.moderator || v.account == step.author;
        let reply_grant = i > 0
            && step.boundary["show_to_parent_author"] != Value::Bool(false)
            && path[i - 1].author == v.account;
        let own = privileged || reply_grant || reference_passes(&step.boundary, &v.profile, &v.personas);
        let chosen = step.explicit.is_none_or(|set| privileged || set.contains(&v.account));
        own && chosen
    })
}
