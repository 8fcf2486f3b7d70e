use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Outcome of one replay. Contains no timings, so equal inputs give equal
/// reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub mode: String,
    pub actions: usize,
    pub mutations: usize,
    pub expectation_failures: Vec<ExpectationFailure>,
    /// Total number of oracle disagreements; `mismatches` keeps the first
    /// few in full.
    pub mismatch_count: usize,
    pub mismatches: Vec<Mismatch>,
    pub invariants: Invariants,
    pub stats: Stats,
    /// Node label -> handles in its audience at the end of the replay.
    pub final_audiences: BTreeMap<String, Vec<String>>,
    pub notifications: Vec<LedgerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire: Option<WireReport>,
}

impl ReplayReport {
    /// No failed expectation, no oracle disagreement, no broken invariant.
    pub fn is_clean(&self) -> bool {
        self.expectation_failures.is_empty()
            && self.mismatch_count == 0
            && self.invariants.total() == 0
            && self.wire.as_ref().is_none_or(|w| w.violations() == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationFailure {
    /// 0-based index among the scenario's actions.
    pub action: usize,
    pub line: usize,
    pub actor: String,
    pub op: String,
    pub expected: String,
    pub got: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub line: usize,
    pub check: String,
    pub detail: String,
}

/// Violation counters. All zero on a correct platform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invariants {
    pub audience_mismatches: u64,
    pub monotonicity_violations: u64,
    pub feed_mismatches: u64,
    pub thread_mismatches: u64,
    pub notification_mismatches: u64,
    pub notification_leaks: u64,
    pub restriction_notifications: u64,
    pub persona_violations: u64,
    pub boundary_leaks: u64,
    pub fail_closed_violations: u64,
}

impl Invariants {
    pub fn total(&self) -> u64 {
        self.audience_mismatches
            + self.monotonicity_violations
            + self.feed_mismatches
            + self.thread_mismatches
            + self.notification_mismatches
            + self.notification_leaks
            + self.restriction_notifications
            + self.persona_violations
            + self.boundary_leaks
            + self.fail_closed_violations
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub users: usize,
    pub posts: usize,
    pub comments: usize,
    pub held: usize,
    pub deleted: usize,
    pub max_depth: usize,
    pub mean_comments_per_post: f64,
    pub notifications: usize,
    pub notified: usize,
    pub audience_checks: u64,
    pub feed_checks: u64,
    pub thread_checks: u64,
    pub persona_checks: u64,
    pub boundary_view_checks: u64,
    pub fail_closed_checks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub line: usize,
    pub node: String,
    pub recipients: Vec<String>,
}

/// What a scan of raw HTTP responses found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireReport {
    pub responses_scanned: u64,
    pub email_leaks: u64,
    pub foreign_account_ids: u64,
    pub not_found_probes: u64,
    pub not_found_mismatches: u64,
    /// A few offending responses, for diagnosis.
    pub samples: Vec<String>,
}

impl WireReport {
    pub fn violations(&self) -> u64 {
        self.email_leaks + self.foreign_account_ids + self.not_found_mismatches
    }
}
