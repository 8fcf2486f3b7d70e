//! Moderator audit trail and review queue.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::boundary::ConsentBoundary;
use crate::clock::Timestamp;
use crate::identity::{SignupDecision, TraitAuditRecord};
use crate::ids::{AccountId, NodeId, PersonaName, ThreadId};
use crate::profile::TraitProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ModAction {
    ReviewSignup {
        account: AccountId,
        decision: SignupDecision,
    },
    ResolveOtherInfo {
        node: NodeId,
        recipients: BTreeSet<AccountId>,
    },
    RemoveNode {
        node: NodeId,
        reason: String,
    },
    DeactivateAccount {
        account: AccountId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModerationRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub moderator: AccountId,
    #[serde(flatten)]
    pub action: ModAction,
}

/// Append-only, totally ordered log of moderator actions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModerationLog {
    records: Vec<ModerationRecord>,
}

impl ModerationLog {
    pub fn record(&mut self, moderator: AccountId, at: Timestamp, action: ModAction) -> &ModerationRecord {
        let seq = self.records.len() as u64 + 1;
        self.records.push(ModerationRecord {
            seq,
            at,
            moderator,
            action,
        });
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[ModerationRecord] {
        &self.records
    }

    /// Removals with their stated reasons.
    pub fn removals(&self) -> impl Iterator<Item = (NodeId, &str)> {
        self.records.iter().filter_map(|r| match &r.action {
            ModAction::RemoveNode { node, reason } => Some((*node, reason.as_str())),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingSignup {
    pub account_id: AccountId,
    pub email: String,
    pub persona: PersonaName,
    pub requested_traits: TraitProfile,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldNode {
    pub node_id: NodeId,
    pub thread_id: ThreadId,
    pub parent_id: Option<NodeId>,
    pub author: AccountId,
    pub persona: PersonaName,
    pub body: String,
    pub boundary: ConsentBoundary,
    pub created_at: Timestamp,
}

/// Everything waiting on the moderator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueView {
    pub pending_signups: Vec<PendingSignup>,
    pub held_nodes: Vec<HeldNode>,
    pub trait_audits: Vec<TraitAuditRecord>,
}

impl QueueView {
    pub fn len(&self) -> usize {
        self.pending_signups.len() + self.held_nodes.len() + self.trait_audits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    #[test]
    fn records_are_sequenced_and_removals_listable() {
        let mut log = ModerationLog::default();
        let m = AccountId(1);
        log.record(m, Utc::now(), ModAction::DeactivateAccount { account: AccountId(4) });
        log.record(
            m,
            Utc::now(),
            ModAction::RemoveNode {
                node: NodeId(9),
                reason: "harassment".into(),
            },
        );
        assert_eq!(log.records().iter().map(|r| r.seq).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(log.removals().collect::<Vec<_>>(), [(NodeId(9), "harassment")]);
        let json = serde_json::to_value(&log.records()[1]).unwrap();
        assert_eq!(json["action"], "remove_node");
        assert_eq!(json["reason"], "harassment");
    }
}
