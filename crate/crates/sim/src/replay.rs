//! Replays a scenario through a driver while the shadow world follows
//! along, comparing the two after every mutation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use consent_core::content::NodeView;
use consent_core::{AccountId, NodeId, ThreadId};
use serde_json::Value;

use crate::driver::{normalise, Call, Driver, Probe};
use crate::oracle::Rule;
use crate::report::{ExpectationFailure, LedgerEntry, Mismatch, ReplayReport};
use crate::scenario::{Action, Op, Scenario, Step, UserSpec};
use crate::shadow::{Shadow, Snapshot, State, Status};

const MAX_MISMATCHES: usize = 100;
/// Ids handed out for labels the scenario never defines.
const MISSING_BASE: u64 = 1_000_000_000;
const PROBES_PER_KIND: usize = 4;

/// How often the expensive comparisons run, counted in mutations. Zero
/// means only at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayOptions {
    /// Every node's audience and every user's feed.
    pub audit_every: usize,
    /// Every user's view of every thread, and persona bindings.
    pub threads_every: usize,
    /// Trait-removal check; needs direct access to the platform.
    pub fail_closed_every: usize,
    /// 404 probes at the end; needs raw HTTP responses.
    pub probes: bool,
}

impl ReplayOptions {
    /// Everything after every mutation.
    pub fn thorough() -> Self {
        ReplayOptions {
            audit_every: 1,
            threads_every: 1,
            fail_closed_every: 1,
            probes: true,
        }
    }

    /// Audiences and feeds after every mutation, the rest periodically.
    pub fn standard() -> Self {
        ReplayOptions {
            audit_every: 1,
            threads_every: 10,
            fail_closed_every: 50,
            probes: true,
        }
    }
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn replay(scenario: &Scenario, driver: &mut dyn Driver, opts: &ReplayOptions) -> ReplayReport {
    let mut r = Replayer {
        report: ReplayReport {
            scenario: scenario.header.name.clone(),
            mode: driver.mode().to_string(),
            ..Default::default()
        },
        driver,
        opts: *opts,
        shadow: Shadow::default(),
        accounts: Vec::new(),
        by_account: HashMap::new(),
        node_ids: Vec::new(),
        by_node: HashMap::new(),
        missing: BTreeMap::new(),
        moderator: None,
        emitted: BTreeMap::new(),
        predicted: BTreeMap::new(),
    };
    let mut last_line = 0;
    for step in &scenario.steps {
        last_line = step.line;
        match &step.item {
            Step::User(u) => r.add_user(step.line, u),
            Step::Action(a) => r.action(step.line, a),
        }
    }
    r.finish(last_line);
    r.report
}

struct Replayer<'d> {
    driver: &'d mut dyn Driver,
    opts: ReplayOptions,
    shadow: Shadow,
    accounts: Vec<Option<AccountId>>,
    by_account: HashMap<AccountId, usize>,
    node_ids: Vec<NodeId>,
    by_node: HashMap<NodeId, usize>,
    missing: BTreeMap<String, NodeId>,
    moderator: Option<usize>,
    /// Node -> who the platform notified.
    emitted: BTreeMap<usize, BTreeSet<usize>>,
    /// Node -> who the oracle says should have been notified.
    predicted: BTreeMap<usize, BTreeSet<usize>>,
    report: ReplayReport,
}

fn list(items: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(","))
}

impl Replayer<'_> {
    fn mismatch(&mut self, line: usize, check: &str, detail: String) {
        self.report.mismatch_count += 1;
        if self.report.mismatches.len() < MAX_MISMATCHES {
            self.report.mismatches.push(Mismatch {
                line,
                check: check.to_string(),
                detail,
            });
        }
    }

    fn fail(&mut self, line: usize, actor: &str, op: &str, expected: String, got: String) {
        self.report.expectation_failures.push(ExpectationFailure {
            action: self.report.actions.saturating_sub(1),
            line,
            actor: actor.to_string(),
            op: op.to_string(),
            expected,
            got,
        });
    }

    fn handles(&self, users: &BTreeSet<usize>) -> Vec<String> {
        let mut h: Vec<String> = users.iter().map(|u| self.shadow.users[*u].handle.clone()).collect();
        h.sort();
        h
    }

    fn node_label(&self, id: NodeId) -> String {
        match self.by_node.get(&id) {
            Some(idx) => self.shadow.nodes[*idx].label.clone(),
            None => format!("#{id}"),
        }
    }

    fn node_id(&mut self, label: &str) -> NodeId {
        if let Some(idx) = self.shadow.node_index(label) {
            return self.node_ids[idx];
        }
        let next = NodeId(MISSING_BASE + self.missing.len() as u64);
        *self.missing.entry(label.to_string()).or_insert(next)
    }

    fn account_of(&self, handle: &str) -> Result<AccountId, String> {
        self.shadow
            .user_index(handle)
            .and_then(|u| self.accounts[u])
            .ok_or_else(|| format!("unregistered user {handle}"))
    }

    fn users_of(&self, ids: &BTreeSet<AccountId>, line: usize, check: &str) -> (BTreeSet<usize>, Vec<String>) {
        let mut users = BTreeSet::new();
        let mut unknown = Vec::new();
        for id in ids {
            match self.by_account.get(id) {
                Some(u) => {
                    users.insert(*u);
                }
                None => unknown.push(format!("{check} at line {line}: unknown account {id}")),
            }
        }
        (users, unknown)
    }

    fn add_user(&mut self, line: usize, spec: &UserSpec) {
        let result = self.driver.register(spec);
        let idx = self.shadow.add_user(spec);
        match result {
            Ok(id) => {
                self.accounts.push(Some(id));
                self.by_account.insert(id, idx);
            }
            Err(code) => {
                self.accounts.push(None);
                self.shadow.set_status(idx, Status::Rejected);
                self.fail(line, &spec.handle, "register", "ok".into(), code);
                return;
            }
        }
        let id = self.accounts[idx].expect("just registered");
        if spec.moderator {
            self.moderator = Some(idx);
        } else if spec.approve {
            let outcome = match self.moderator.and_then(|m| self.accounts[m]) {
                Some(m) => self
                    .driver
                    .apply(
                        m,
                        &Call::ReviewSignup {
                            account: id,
                            decision: "approve".into(),
                        },
                    )
                    .map(|_| ()),
                None => Err("no moderator to approve sign-up".into()),
            };
            match outcome {
                Ok(()) => self.shadow.set_status(idx, Status::Active),
                Err(code) => self.fail(line, &spec.handle, "review_signup", "ok".into(), code),
            }
        }
        for name in &spec.personas {
            match self.driver.apply(id, &Call::ClaimPersona(name.clone())) {
                Ok(_) => self.shadow.claim(idx, name),
                Err(code) => self.fail(line, &spec.handle, "claim_persona", "ok".into(), code),
            }
        }
        self.report.mutations += 1;
        self.check_mail(line, false, BTreeMap::new());
        self.audit(line, false);
    }

    fn action(&mut self, line: usize, action: &Action) {
        self.report.actions += 1;
        if action.op.is_assertion() {
            self.assertion(line, action);
        } else {
            self.mutation(line, action);
        }
    }

    fn resolve(&mut self, actor: usize, op: &Op) -> Result<Call, String> {
        Ok(match op {
            Op::ClaimPersona { name } => Call::ClaimPersona(name.clone()),
            Op::UpdateTraits { patch } => Call::UpdateTraits(patch.clone()),
            Op::SetDefaultBoundary { boundary } => Call::SetDefaultBoundary(boundary.clone()),
            Op::CreatePost {
                persona,
                body,
                boundary,
                ..
            } => Call::CreatePost {
                persona: persona.clone(),
                body: body.clone(),
                boundary: boundary.clone(),
            },
            Op::CreateComment {
                parent,
                persona,
                body,
                boundary,
                ..
            } => Call::CreateComment {
                parent: self.node_id(parent),
                persona: persona.clone(),
                body: body.clone(),
                boundary: boundary.clone(),
            },
            Op::Restrict { target, boundary } => Call::Restrict {
                node: self.node_id(target),
                boundary: boundary.clone(),
            },
            Op::SetBoundaryVisibility { target, show } => Call::SetVisibility {
                node: self.node_id(target),
                show: *show,
            },
            Op::Delete { target } => Call::Delete(self.node_id(target)),
            Op::ModerateRemove { target, reason } => Call::ModerateRemove {
                node: self.node_id(target),
                reason: reason.clone(),
            },
            Op::ResolveOtherInfo { target, recipients } => Call::Resolve {
                node: self.node_id(target),
                recipients: recipients.iter().map(|h| self.account_of(h)).collect::<Result<_, _>>()?,
            },
            Op::ReviewSignup { user, decision } => Call::ReviewSignup {
                account: self.account_of(user)?,
                decision: decision.clone(),
            },
            Op::Deactivate { user } => {
                let target = match user {
                    Some(h) => self.account_of(h)?,
                    None => self.accounts[actor].ok_or("unregistered actor")?,
                };
                Call::Deactivate(target)
            }
            Op::ExpectAudience { .. } | Op::ExpectRecipients { .. } | Op::ExpectFeed { .. } | Op::ExpectThread { .. } => {
                unreachable!("assertions are not sent to the platform")
            }
        })
    }

    fn mutation(&mut self, line: usize, action: &Action) {
        let actor = self.shadow.user_index(&action.actor).expect("actors are checked when parsing");
        let op_name = action.op.name();
        let Some(account) = self.accounts[actor] else {
            self.fail(line, &action.actor, op_name, action.expect.clone(), "unregistered actor".into());
            return;
        };
        let call = match self.resolve(actor, &action.op) {
            Ok(c) => c,
            Err(msg) => {
                self.fail(line, &action.actor, op_name, action.expect.clone(), msg);
                return;
            }
        };
        let result = self.driver.apply(account, &call).map_err(|c| normalise(&c));
        let got = match &result {
            Ok(_) => crate::scenario::OK.to_string(),
            Err(code) => code.clone(),
        };
        let expected = normalise(&action.expect);
        if got != expected {
            self.fail(line, &action.actor, op_name, expected, got);
        }
        let mut predicted = BTreeMap::new();
        if let Ok(created) = result {
            self.follow(line, actor, &action.op, created, &mut predicted);
        }
        self.report.mutations += 1;
        self.check_mail(line, matches!(action.op, Op::Restrict { .. }), predicted);
        self.audit(line, false);
    }

    /// Applies a mutation the platform accepted to the shadow world, and
    /// records who the oracle expects to be notified.
    fn follow(
        &mut self,
        line: usize,
        actor: usize,
        op: &Op,
        created: Option<NodeId>,
        predicted: &mut BTreeMap<usize, BTreeSet<usize>>,
    ) {
        let target = |s: &Self, label: &str| s.shadow.node_index(label);
        match op {
            Op::ClaimPersona { name } => self.shadow.claim(actor, name),
            Op::UpdateTraits { patch } => self.shadow.patch_traits(actor, patch),
            Op::SetDefaultBoundary { .. } => {}
            Op::CreatePost {
                node, persona, boundary, ..
            } => {
                let Some(id) = created else {
                    return self.mismatch(line, "create", "no node id returned".into());
                };
                let idx = self.shadow.add_post(node, actor, persona, boundary);
                self.created(idx, id, predicted);
            }
            Op::CreateComment {
                node,
                parent,
                persona,
                boundary,
                ..
            } => {
                let (Some(id), Some(p)) = (created, target(self, parent)) else {
                    return self.mismatch(line, "create", format!("comment under unknown parent {parent}"));
                };
                let idx = self.shadow.add_comment(node, p, actor, persona, boundary);
                self.created(idx, id, predicted);
            }
            Op::Restrict { target: t, boundary } => match target(self, t) {
                Some(idx) => self.shadow.set_boundary(idx, boundary),
                None => self.mismatch(line, "restrict", format!("accepted on unknown node {t}")),
            },
            Op::SetBoundaryVisibility { target: t, show } => match target(self, t) {
                Some(idx) => self.shadow.set_show(idx, *show),
                None => self.mismatch(line, "visibility", format!("accepted on unknown node {t}")),
            },
            Op::Delete { target: t } | Op::ModerateRemove { target: t, .. } => match target(self, t) {
                Some(idx) => self.shadow.delete(idx),
                None => self.mismatch(line, "delete", format!("accepted on unknown node {t}")),
            },
            Op::ResolveOtherInfo { target: t, recipients } => match target(self, t) {
                Some(idx) => {
                    let chosen = recipients.iter().filter_map(|h| self.shadow.user_index(h)).collect();
                    self.shadow.resolve(idx, chosen);
                    predicted.insert(idx, self.shadow.recipients(idx));
                }
                None => self.mismatch(line, "resolve", format!("accepted on unknown node {t}")),
            },
            Op::ReviewSignup { user, decision } => {
                if let Some(u) = self.shadow.user_index(user) {
                    let status = if decision == "approve" { Status::Active } else { Status::Rejected };
                    self.shadow.set_status(u, status);
                }
            }
            Op::Deactivate { user } => {
                let u = user.as_deref().and_then(|h| self.shadow.user_index(h)).unwrap_or(actor);
                self.shadow.set_status(u, Status::Deactivated);
            }
            Op::ExpectAudience { .. } | Op::ExpectRecipients { .. } | Op::ExpectFeed { .. } | Op::ExpectThread { .. } => {}
        }
    }

    fn created(&mut self, idx: usize, id: NodeId, predicted: &mut BTreeMap<usize, BTreeSet<usize>>) {
        debug_assert_eq!(idx, self.node_ids.len());
        self.node_ids.push(id);
        self.by_node.insert(id, idx);
        if self.shadow.nodes[idx].state == State::Published {
            predicted.insert(idx, self.shadow.recipients(idx));
        }
    }

    /// Compares what the platform sent with what the oracle predicted, and
    /// checks that nobody outside a node's audience was told about it.
    fn check_mail(&mut self, line: usize, restriction: bool, mut predicted: BTreeMap<usize, BTreeSet<usize>>) {
        let raw = self.driver.drain_notifications();
        let mut actual: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (node, ids) in raw {
            let Some(&idx) = self.by_node.get(&node) else {
                self.mismatch(line, "notification", format!("mail about unknown node {node}"));
                continue;
            };
            let (users, unknown) = self.users_of(&ids, line, "notification");
            for u in unknown {
                self.mismatch(line, "notification", u);
            }
            actual.entry(idx).or_default().extend(users);
        }
        actual.retain(|_, s| !s.is_empty());
        for (n, set) in &predicted {
            self.predicted.insert(*n, set.clone());
        }
        predicted.retain(|_, s| !s.is_empty());

        if restriction && !actual.is_empty() {
            self.report.invariants.restriction_notifications += 1;
        }
        for (n, set) in &actual {
            let audience = self.shadow.audience(*n);
            let leaked: BTreeSet<usize> = set.difference(&audience).copied().collect();
            if !leaked.is_empty() {
                self.report.invariants.notification_leaks += leaked.len() as u64;
                let detail = format!("{} notified outside audience: {:?}", self.shadow.nodes[*n].label, self.handles(&leaked));
                self.mismatch(line, "notification_leak", detail);
            }
        }
        if actual != predicted {
            self.report.invariants.notification_mismatches += 1;
            let show = |s: &Self, m: &BTreeMap<usize, BTreeSet<usize>>| {
                m.iter()
                    .map(|(n, u)| format!("{}:{}", s.shadow.nodes[*n].label, list(s.handles(u))))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let detail = format!("sent {{{}}} expected {{{}}}", show(self, &actual), show(self, &predicted));
            self.mismatch(line, "notification", detail);
        }
        for (n, set) in actual {
            self.report.stats.notifications += 1;
            self.report.stats.notified += set.len();
            self.report.notifications.push(LedgerEntry {
                line,
                node: self.shadow.nodes[n].label.clone(),
                recipients: self.handles(&set),
            });
            self.emitted.insert(n, set);
        }
    }

    fn assertion(&mut self, line: usize, action: &Action) {
        let actor = self.shadow.user_index(&action.actor).expect("actors are checked when parsing");
        let op_name = action.op.name();
        let sorted = |v: &[String]| {
            let mut v = v.to_vec();
            v.sort();
            list(v)
        };
        let (expected, got, oracle) = match &action.op {
            Op::ExpectAudience { target, audience } => {
                let idx = self.shadow.node_index(target);
                let id = self.node_id(target);
                let got = match self.driver.audience(id) {
                    Some(ids) => {
                        let (users, _) = self.users_of(&ids, line, op_name);
                        list(self.handles(&users))
                    }
                    None => "not_found".into(),
                };
                let oracle = match idx {
                    Some(i) => list(self.handles(&self.shadow.audience(i))),
                    None => "not_found".into(),
                };
                (sorted(audience), got, oracle)
            }
            Op::ExpectRecipients { target, recipients } => {
                let idx = self.shadow.node_index(target);
                let pick = |m: &BTreeMap<usize, BTreeSet<usize>>| {
                    idx.and_then(|i| m.get(&i)).map(|s| list(self.handles(s))).unwrap_or_else(|| list([]))
                };
                (sorted(recipients), pick(&self.emitted), pick(&self.predicted))
            }
            Op::ExpectFeed { nodes } => {
                let got = match self.accounts[actor] {
                    Some(acct) => match self.driver.feed(acct) {
                        Ok(views) => list(views.iter().map(|v| self.node_label(v.node_id))),
                        Err(code) => code,
                    },
                    None => "unregistered actor".into(),
                };
                let snap = self.shadow.snapshot();
                let oracle = list(snap.feed(actor).into_iter().map(|n| self.shadow.nodes[n].label.clone()));
                (list(nodes.iter().cloned()), got, oracle)
            }
            Op::ExpectThread { target, nodes } => {
                let root = self.shadow.node_index(target).map(|i| self.shadow.nodes[i].thread);
                let thread = ThreadId(match root {
                    Some(r) => self.node_ids[r].0,
                    None => self.node_id(target).0,
                });
                let got = match self.accounts[actor] {
                    Some(acct) => match self.driver.thread(acct, thread) {
                        Ok(views) => list(views.iter().map(|v| self.node_label(v.node_id))),
                        Err(code) if normalise(&code) == "not_found" => list([]),
                        Err(code) => code,
                    },
                    None => "unregistered actor".into(),
                };
                let snap = self.shadow.snapshot();
                let oracle = root
                    .and_then(|r| snap.thread(r, actor))
                    .map(|ns| list(ns.into_iter().map(|n| self.shadow.nodes[n].label.clone())))
                    .unwrap_or_else(|| list([]));
                (list(nodes.iter().cloned()), got, oracle)
            }
            _ => unreachable!("only assertions reach here"),
        };
        if oracle != expected {
            self.mismatch(line, "fixture", format!("{op_name}: fixture says {expected}, oracle says {oracle}"));
        }
        if got != expected {
            self.fail(line, &action.actor, op_name, expected, got);
        }
    }

    fn check_views(&mut self, line: usize, shadow: &Shadow, viewer: usize, views: &[NodeView]) {
        for v in views {
            let Some(&idx) = self.by_node.get(&v.node_id) else {
                self.mismatch(line, "view", format!("unknown node {} shown to {}", v.node_id, shadow.users[viewer].handle));
                continue;
            };
            self.report.stats.boundary_view_checks += 1;
            let node = &shadow.nodes[idx];
            if v.persona.as_str() != node.persona {
                let detail = format!("{} shown as @{}, written as @{}", node.label, v.persona, node.persona);
                self.mismatch(line, "view_persona", detail);
            }
            match (&v.boundary, node.rule.show_boundary) {
                (Some(_), false) => {
                    self.report.invariants.boundary_leaks += 1;
                    let detail = format!("hidden boundary of {} shown to {}", node.label, shadow.users[viewer].handle);
                    self.mismatch(line, "boundary_leak", detail);
                }
                (Some(b), true) => {
                    let shown = serde_json::to_value(b).unwrap_or(Value::Null);
                    if Rule::from_json(&shown) != node.rule {
                        let detail = format!("{} shows a boundary other than its own", node.label);
                        self.mismatch(line, "boundary_view", detail);
                    }
                }
                (None, true) => {
                    let detail = format!("{} hides a boundary its author chose to show", node.label);
                    self.mismatch(line, "boundary_view", detail);
                }
                (None, false) => {}
            }
        }
    }

    fn audit(&mut self, line: usize, everything: bool) {
        let m = self.report.mutations;
        let due = |every: usize| everything || (every > 0 && m.is_multiple_of(every));
        if !due(self.opts.audit_every) {
            return;
        }
        let shadow = std::mem::take(&mut self.shadow);
        let snap = shadow.snapshot();
        self.audit_audiences(line, &snap);
        self.audit_feeds(line, &snap);
        if due(self.opts.threads_every) {
            self.audit_threads(line, &snap);
            drop(snap);
            self.shadow = shadow;
            self.audit_personas(line);
        } else {
            drop(snap);
            self.shadow = shadow;
        }
        if due(self.opts.fail_closed_every) {
            if let Some(fc) = self.driver.fail_closed() {
                self.report.stats.fail_closed_checks += fc.checks;
                self.report.invariants.fail_closed_violations += fc.violations;
                if fc.violations > 0 {
                    self.mismatch(line, "fail_closed", format!("{} audiences grew after removing a trait", fc.violations));
                }
            }
        }
    }

    fn audit_audiences(&mut self, line: usize, snap: &Snapshot<'_>) {
        let mut engine: Vec<Option<BTreeSet<usize>>> = Vec::with_capacity(self.node_ids.len());
        for idx in 0..self.node_ids.len() {
            self.report.stats.audience_checks += 1;
            let label = &snap.shadow.nodes[idx].label;
            let Some(ids) = self.driver.audience(self.node_ids[idx]) else {
                self.report.invariants.audience_mismatches += 1;
                self.mismatch(line, "audience", format!("{label} has no audience"));
                engine.push(None);
                continue;
            };
            let (users, unknown) = self.users_of(&ids, line, "audience");
            for u in unknown {
                self.mismatch(line, "audience", u);
            }
            let want = &snap.audiences[idx];
            if &users != want {
                self.report.invariants.audience_mismatches += 1;
                let extra: BTreeSet<usize> = users.difference(want).copied().collect();
                let lacking: BTreeSet<usize> = want.difference(&users).copied().collect();
                let detail = format!(
                    "{label}: platform adds {}, omits {}",
                    list(self.handles_in(snap, &extra)),
                    list(self.handles_in(snap, &lacking))
                );
                self.mismatch(line, "audience", detail);
            }
            if let Some(p) = snap.shadow.nodes[idx].parent {
                let parent = engine[p].as_ref();
                if parent.is_some_and(|parent| !users.is_subset(parent)) {
                    self.report.invariants.monotonicity_violations += 1;
                    let detail = format!("{label} reaches beyond {}", snap.shadow.nodes[p].label);
                    self.mismatch(line, "monotonicity", detail);
                }
            }
            engine.push(Some(users));
        }
    }

    fn handles_in(&self, snap: &Snapshot<'_>, users: &BTreeSet<usize>) -> Vec<String> {
        users.iter().map(|u| snap.shadow.users[*u].handle.clone()).collect()
    }

    fn active_users(&self, snap: &Snapshot<'_>) -> Vec<(usize, AccountId)> {
        snap.shadow
            .users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.active())
            .filter_map(|(i, _)| self.accounts[i].map(|a| (i, a)))
            .collect()
    }

    fn audit_feeds(&mut self, line: usize, snap: &Snapshot<'_>) {
        for (u, acct) in self.active_users(snap) {
            self.report.stats.feed_checks += 1;
            let want: Vec<NodeId> = snap.feed(u).into_iter().map(|n| self.node_ids[n]).collect();
            match self.driver.feed(acct) {
                Ok(views) => {
                    let got: Vec<NodeId> = views.iter().map(|v| v.node_id).collect();
                    if got != want {
                        self.report.invariants.feed_mismatches += 1;
                        let detail = format!("feed of {}: {:?} expected {:?}", snap.shadow.users[u].handle, got, want);
                        self.mismatch(line, "feed", detail);
                    }
                    self.check_views(line, snap.shadow, u, &views);
                }
                Err(code) => {
                    self.report.invariants.feed_mismatches += 1;
                    self.mismatch(line, "feed", format!("feed of {} failed: {code}", snap.shadow.users[u].handle));
                }
            }
        }
    }

    fn audit_threads(&mut self, line: usize, snap: &Snapshot<'_>) {
        let roots: Vec<usize> = (0..snap.shadow.nodes.len()).filter(|n| snap.shadow.nodes[*n].parent.is_none()).collect();
        for (u, acct) in self.active_users(snap) {
            for &root in &roots {
                self.report.stats.thread_checks += 1;
                let want = snap.thread(root, u).map(|ns| ns.into_iter().map(|n| self.node_ids[n]).collect::<Vec<_>>());
                let got = self.driver.thread(acct, ThreadId(self.node_ids[root].0));
                let ok = match (&got, &want) {
                    (Ok(views), Some(w)) => views.iter().map(|v| v.node_id).eq(w.iter().copied()),
                    (Err(code), None) => normalise(code) == "not_found",
                    _ => false,
                };
                if !ok {
                    self.report.invariants.thread_mismatches += 1;
                    let got = got.as_ref().map(|vs| vs.iter().map(|v| v.node_id).collect::<Vec<_>>());
                    let detail = format!(
                        "thread {} for {}: {:?} expected {:?}",
                        snap.shadow.nodes[root].label, snap.shadow.users[u].handle, got, want
                    );
                    self.mismatch(line, "thread", detail);
                }
                if let Ok(views) = &got {
                    self.check_views(line, snap.shadow, u, views);
                }
            }
        }
    }

    /// One persona per author per thread, matching what was written.
    fn audit_personas(&mut self, line: usize) {
        let mut used: BTreeMap<(usize, ThreadId), BTreeSet<String>> = BTreeMap::new();
        for rec in self.driver.node_personas() {
            self.report.stats.persona_checks += 1;
            let Some(&idx) = self.by_node.get(&rec.node) else {
                self.mismatch(line, "persona", format!("record for unknown node {}", rec.node));
                continue;
            };
            let node = &self.shadow.nodes[idx];
            let author = node.author;
            if rec.persona != node.persona {
                let detail = format!("{} recorded as @{}, written as @{}", node.label, rec.persona, node.persona);
                self.mismatch(line, "persona", detail);
            }
            used.entry((author, rec.thread)).or_default().insert(rec.persona);
        }
        for ((author, thread), personas) in used {
            if personas.len() > 1 {
                self.report.invariants.persona_violations += 1;
                let detail = format!("{} used {:?} in thread {thread}", self.shadow.users[author].handle, personas);
                self.mismatch(line, "persona", detail);
            }
        }
    }

    /// Invisible and nonexistent nodes must produce byte-identical errors.
    fn probe_not_found(&mut self, line: usize) {
        let snap = self.shadow.snapshot();
        let ghost = NodeId(u64::from(u32::MAX) * 7);
        let users: Vec<(usize, AccountId)> = self
            .active_users(&snap)
            .into_iter()
            .filter(|(u, _)| !snap.shadow.users[*u].moderator)
            .collect();
        let mut probes = 0u64;
        let mut bad = 0u64;
        let mut samples = Vec::new();
        for (u, acct) in users {
            let hidden: Vec<usize> = (0..snap.shadow.nodes.len())
                .filter(|n| !snap.visible(*n, u) && snap.shadow.nodes[*n].author != u)
                .collect();
            let roots: Vec<usize> = hidden.iter().copied().filter(|n| snap.shadow.nodes[*n].parent.is_none()).take(PROBES_PER_KIND).collect();
            let others: Vec<usize> = hidden.iter().copied().take(PROBES_PER_KIND).collect();
            let mut cases: Vec<(Probe, Probe)> = roots
                .iter()
                .map(|r| (Probe::Thread(ThreadId(self.node_ids[*r].0)), Probe::Thread(ThreadId(ghost.0))))
                .collect();
            for n in &others {
                let id = self.node_ids[*n];
                cases.push((Probe::Comment(id), Probe::Comment(ghost)));
                cases.push((Probe::LastUsedBoundary(id), Probe::LastUsedBoundary(ghost)));
            }
            for (real, fake) in cases {
                let Some(a) = self.driver.probe(acct, real) else { return };
                let Some(b) = self.driver.probe(acct, fake) else { return };
                probes += 1;
                if a != b || a.0 != 404 {
                    bad += 1;
                    if samples.len() < 5 {
                        samples.push(format!("{real:?} -> {a:?}; {fake:?} -> {b:?}"));
                    }
                }
            }
        }
        drop(snap);
        if let Some(w) = &mut self.report.wire {
            w.not_found_probes += probes;
            w.not_found_mismatches += bad;
            w.samples.extend(samples.iter().cloned());
        }
        for s in samples {
            self.mismatch(line, "not_found_probe", s);
        }
    }

    fn finish(&mut self, line: usize) {
        self.audit(line, true);
        self.report.wire = self.driver.wire();
        if self.opts.probes {
            self.probe_not_found(line);
        }
        let s = &self.shadow;
        let stats = &mut self.report.stats;
        stats.users = s.users.len();
        stats.posts = s.nodes.iter().filter(|n| n.parent.is_none()).count();
        stats.comments = s.nodes.len() - stats.posts;
        stats.held = s.nodes.iter().filter(|n| n.state == State::Held).count();
        stats.deleted = s.nodes.iter().filter(|n| n.state == State::Deleted).count();
        stats.max_depth = s.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        stats.mean_comments_per_post = if stats.posts == 0 {
            0.0
        } else {
            stats.comments as f64 / stats.posts as f64
        };
        for idx in 0..self.node_ids.len() {
            let audience = match self.driver.audience(self.node_ids[idx]) {
                Some(ids) => self.users_of(&ids, line, "audience").0,
                None => self.shadow.audience(idx),
            };
            let label = self.shadow.nodes[idx].label.clone();
            let handles = self.handles(&audience);
            self.report.final_audiences.insert(label, handles);
        }
    }
}
