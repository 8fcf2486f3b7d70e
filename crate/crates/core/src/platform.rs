//! The platform: identity, content, notifications and moderation behind one
//! lock.
//!
//! Every mutation takes the write lock, so writes are totally ordered and
//! persona uniqueness is linearizable. Reads share the lock. Mail is handed
//! to the transport only after the write that produced it has committed;
//! messages that fail stay queued and are retried on the next flush.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::boundary::ConsentBoundary;
use crate::clock::{Clock, SystemClock};
use crate::content::{view, ContentNode, ContentStore, NodeState, NodeView};
use crate::engine::{validate_boundary, AudienceSet, BoundaryTarget};
use crate::error::PlatformError;
use crate::identity::{Account, DomainAllowList, IdentityError, IdentityRegistry, Persona, SignupDecision};
use crate::ids::{AccountId, NodeId, PersonaName, ThreadId};
use crate::jsonl::JsonlSink;
use crate::moderation::{HeldNode, ModAction, ModerationLog, PendingSignup, QueueView};
use crate::notify::{
    comment_recipients, post_recipients, render_preview, NotificationEvent, NotificationKind,
    NullTransport, OutboundEmail, Transport,
};
use crate::profile::{TraitPatch, TraitProfile};
use crate::vocab::Vocabulary;

pub type Result<T, E = PlatformError> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
pub struct PlatformConfig {
    pub allowlist: DomainAllowList,
    /// The single moderator account, by sign-up address.
    pub moderator_email: Option<String>,
    pub vocab: Vocabulary,
    /// Drop bodies of deleted nodes instead of keeping them for audit.
    pub purge_deleted: bool,
}

/// Everything that is persisted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct State {
    identity: IdentityRegistry,
    content: ContentStore,
    moderation: ModerationLog,
    notifications: Vec<NotificationEvent>,
}

impl State {
    pub fn identity(&self) -> &IdentityRegistry {
        &self.identity
    }

    pub fn content(&self) -> &ContentStore {
        &self.content
    }

    pub fn moderation(&self) -> &ModerationLog {
        &self.moderation
    }

    pub fn notifications(&self) -> &[NotificationEvent] {
        &self.notifications
    }

    fn emit(&mut self, node: NodeId, now: crate::clock::Timestamp) -> Vec<OutboundEmail> {
        let node = self.content.node(node).expect("emitting for a stored node").clone();
        let audience = self.content.audience(node.id, &self.identity).unwrap_or_default();
        let (kind, recipients) = if node.is_post() {
            (NotificationKind::NewPost, post_recipients(&audience, node.author))
        } else {
            let participants = self.identity.thread_participant_accounts(node.thread);
            (
                NotificationKind::NewComment,
                comment_recipients(&audience, &participants, node.author),
            )
        };
        let event = NotificationEvent {
            seq: self.notifications.len() as u64 + 1,
            node_id: node.id,
            thread_id: node.thread,
            kind,
            persona: node.persona.clone(),
            recipients,
            preview: render_preview(&node.body),
            created_at: now,
        };
        let mail = event
            .recipients
            .iter()
            .filter_map(|id| self.identity.account(*id).ok())
            .map(|acct| OutboundEmail::render(&event, &acct.contact_email))
            .collect();
        self.notifications.push(event);
        mail
    }
}

pub struct Platform {
    config: PlatformConfig,
    state: RwLock<State>,
    clock: Arc<dyn Clock>,
    transport: Arc<dyn Transport>,
    outbox: Mutex<VecDeque<OutboundEmail>>,
    audit_sink: Option<JsonlSink>,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Platform {
    pub fn new(config: PlatformConfig) -> Self {
        let state = State {
            identity: IdentityRegistry::new(config.allowlist.clone(), config.moderator_email.as_deref()),
            content: ContentStore::new(),
            ..Default::default()
        };
        Platform {
            config,
            state: RwLock::new(state),
            clock: Arc::new(SystemClock),
            transport: Arc::new(NullTransport),
            outbox: Mutex::new(VecDeque::new()),
            audit_sink: None,
        }
    }

    /// Restores persisted state. Domain policy and moderator come from
    /// `config`, not from the snapshot.
    pub fn restore(config: PlatformConfig, mut state: State) -> Self {
        let fresh = IdentityRegistry::new(config.allowlist.clone(), config.moderator_email.as_deref());
        state.identity.adopt_policy(&fresh);
        let mut platform = Platform::new(config);
        platform.state = RwLock::new(state);
        platform
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    /// Mirrors every moderator action to an append-only file.
    pub fn with_audit_sink(mut self, sink: JsonlSink) -> Self {
        self.audit_sink = Some(sink);
        self
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.config.vocab
    }

    /// Runs `f` against a consistent view of the state.
    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        f(&self.state.read())
    }

    pub fn snapshot(&self) -> State {
        self.state.read().clone()
    }

    fn record(&self, state: &mut State, moderator: AccountId, action: ModAction) {
        let record = state.moderation.record(moderator, self.clock.now(), action);
        if let Some(sink) = &self.audit_sink {
            if let Err(e) = sink.append(record) {
                log::warn!("moderation audit export to {} failed: {e}", sink.path().display());
            }
        }
    }

    fn send(&self, mail: Vec<OutboundEmail>) {
        self.outbox.lock().extend(mail);
        self.flush_outbox();
    }

    /// Delivers queued mail. Returns how many messages are still queued.
    pub fn flush_outbox(&self) -> usize {
        let mut queue = self.outbox.lock();
        while let Some(msg) = queue.front() {
            match self.transport.deliver(&msg.address, &msg.subject, &msg.body) {
                Ok(()) => {
                    queue.pop_front();
                }
                Err(e) => {
                    log::warn!("mail delivery failed, will retry: {e}");
                    break;
                }
            }
        }
        queue.len()
    }

    // Accounts

    pub fn register(&self, email: &str, traits: TraitProfile, persona: &str) -> Result<Account> {
        let now = self.clock.now();
        let mut s = self.state.write();
        Ok(s.identity.register(email, traits, persona, &self.config.vocab, now)?.clone())
    }

    pub fn approve_signup(&self, moderator: AccountId, account: AccountId, decision: SignupDecision) -> Result<Account> {
        let mut s = self.state.write();
        let acct = s.identity.approve_signup(moderator, account, decision)?.clone();
        self.record(&mut s, moderator, ModAction::ReviewSignup { account, decision });
        Ok(acct)
    }

    pub fn account(&self, id: AccountId) -> Result<Account> {
        Ok(self.state.read().identity.account(id)?.clone())
    }

    pub fn find_account_by_email(&self, email: &str) -> Option<Account> {
        self.state.read().identity.find_by_email(email).cloned()
    }

    /// Profile edits apply to every later audience computation. Mail that
    /// already went out is not recalled.
    pub fn update_traits(&self, account: AccountId, patch: &TraitPatch) -> Result<TraitProfile> {
        let now = self.clock.now();
        let mut s = self.state.write();
        let (profile, _) = s.identity.update_traits(account, patch, &self.config.vocab, now)?;
        Ok(profile)
    }

    pub fn claim_persona(&self, account: AccountId, name: &str) -> Result<Persona> {
        let now = self.clock.now();
        let mut s = self.state.write();
        Ok(s.identity.claim_persona(account, name, now)?.clone())
    }

    pub fn set_default_boundary(&self, account: AccountId, boundary: Option<ConsentBoundary>) -> Result<()> {
        let mut s = self.state.write();
        if let Some(b) = &boundary {
            let profile = &s.identity.active_account(account)?.profile;
            validate_boundary(b, profile, &self.config.vocab, BoundaryTarget::Post)?;
        }
        s.identity.set_default_boundary(account, boundary)?;
        Ok(())
    }

    pub fn set_default_persona(&self, account: AccountId, persona: &str) -> Result<()> {
        let name = PersonaName::new(persona).map_err(IdentityError::from)?;
        self.state.write().identity.set_default_persona(account, &name)?;
        Ok(())
    }

    pub fn change_email(&self, account: AccountId, email: &str) -> Result<()> {
        self.state.write().identity.change_email(account, email)?;
        Ok(())
    }

    pub fn deactivate(&self, actor: AccountId, target: AccountId) -> Result<()> {
        let mut s = self.state.write();
        s.identity.deactivate(actor, target)?;
        if actor != target {
            self.record(&mut s, actor, ModAction::DeactivateAccount { account: target });
        }
        Ok(())
    }

    // Content

    fn persona_name(raw: &str) -> Result<PersonaName> {
        PersonaName::new(raw).map_err(|e| IdentityError::from(e).into())
    }

    pub fn create_post(&self, author: AccountId, persona: &str, body: &str, boundary: ConsentBoundary) -> Result<ContentNode> {
        let persona = Self::persona_name(persona)?;
        let now = self.clock.now();
        let (node, mail) = {
            let mut s = self.state.write();
            let State { identity, content, .. } = &mut *s;
            let node = content
                .create_post(identity, &self.config.vocab, author, &persona, body, boundary, now)?
                .clone();
            let mail = match node.state {
                NodeState::Published => s.emit(node.id, now),
                _ => Vec::new(),
            };
            (node, mail)
        };
        self.send(mail);
        Ok(node)
    }

    pub fn create_comment(
        &self,
        author: AccountId,
        persona: &str,
        parent: NodeId,
        body: &str,
        boundary: ConsentBoundary,
    ) -> Result<ContentNode> {
        let persona = Self::persona_name(persona)?;
        let now = self.clock.now();
        let (node, mail) = {
            let mut s = self.state.write();
            let State { identity, content, .. } = &mut *s;
            let node = content
                .create_comment(identity, &self.config.vocab, author, &persona, parent, body, boundary, now)?
                .clone();
            let mail = match node.state {
                NodeState::Published => s.emit(node.id, now),
                _ => Vec::new(),
            };
            (node, mail)
        };
        self.send(mail);
        Ok(node)
    }

    /// Narrows a node's boundary. Emits nothing.
    pub fn restrict_node_boundary(&self, caller: AccountId, node: NodeId, boundary: ConsentBoundary) -> Result<ContentNode> {
        let now = self.clock.now();
        let mut s = self.state.write();
        let State { identity, content, .. } = &mut *s;
        Ok(content
            .restrict_node_boundary(identity, &self.config.vocab, caller, node, boundary, now)?
            .clone())
    }

    pub fn toggle_boundary_visibility(&self, caller: AccountId, node: NodeId, show: bool) -> Result<ContentNode> {
        let now = self.clock.now();
        let mut s = self.state.write();
        let State { identity, content, .. } = &mut *s;
        Ok(content.toggle_boundary_visibility(identity, caller, node, show, now)?.clone())
    }

    /// Author or moderator deletion. Hides the node's whole subtree.
    pub fn delete_node(&self, caller: AccountId, node: NodeId) -> Result<()> {
        let mut s = self.state.write();
        let State { identity, content, .. } = &mut *s;
        let is_author = content.node(node).is_some_and(|n| n.author == caller);
        content.delete_node(identity, caller, node, self.config.purge_deleted)?;
        if !is_author && s.identity.require_moderator(caller).is_ok() {
            let action = ModAction::RemoveNode {
                node,
                reason: String::new(),
            };
            self.record(&mut s, caller, action);
        }
        Ok(())
    }

    pub fn last_used_boundary(&self, account: AccountId, thread: ThreadId) -> Result<ConsentBoundary> {
        let s = self.state.read();
        Ok(s.content.last_used_boundary(&s.identity, account, thread)?)
    }

    /// Thread containing `node`, provided the caller can see the node or
    /// wrote it.
    pub fn thread_of(&self, caller: AccountId, node: NodeId) -> Result<ThreadId> {
        let s = self.state.read();
        Ok(s.content.thread_of_visible(&s.identity, caller, node)?)
    }

    pub fn get_feed(&self, viewer: AccountId) -> Result<Vec<NodeView>> {
        let s = self.state.read();
        Ok(s.content.feed(&s.identity, viewer)?)
    }

    pub fn get_thread(&self, viewer: AccountId, thread: ThreadId) -> Result<Vec<NodeView>> {
        let s = self.state.read();
        Ok(s.content.thread(&s.identity, viewer, thread)?)
    }

    /// Current audience of a node over active accounts, ignoring its state.
    /// Diagnostic; never exposed to non-moderators.
    pub fn audience(&self, node: NodeId) -> Option<AudienceSet> {
        let s = self.state.read();
        s.content.audience(node, &s.identity)
    }

    pub fn notifications(&self) -> Vec<NotificationEvent> {
        self.state.read().notifications.clone()
    }

    // Moderation

    pub fn list_queue(&self, moderator: AccountId) -> Result<QueueView> {
        let s = self.state.read();
        s.identity.require_moderator(moderator)?;
        let pending_signups = s
            .identity
            .accounts()
            .filter(|a| a.status == crate::identity::AccountStatus::Pending)
            .map(|a| PendingSignup {
                account_id: a.id,
                email: a.contact_email.clone(),
                persona: a.default_persona.clone(),
                requested_traits: a.initial_profile.clone(),
                created_at: a.created_at,
            })
            .collect();
        let held_nodes = s
            .content
            .held_nodes()
            .map(|n| HeldNode {
                node_id: n.id,
                thread_id: n.thread,
                parent_id: n.parent,
                author: n.author,
                persona: n.persona.clone(),
                body: n.body.clone(),
                boundary: n.boundary.clone(),
                created_at: n.created_at,
            })
            .collect();
        let trait_audits = s.identity.trait_audit_feed().into_iter().cloned().collect();
        Ok(QueueView {
            pending_signups,
            held_nodes,
            trait_audits,
        })
    }

    /// Publishes a held node to the chosen accounts, still limited by its
    /// structured boundary and its ancestors. Notifications go out now.
    pub fn resolve_other_info(
        &self,
        moderator: AccountId,
        node: NodeId,
        recipients: BTreeSet<AccountId>,
    ) -> Result<ContentNode> {
        let now = self.clock.now();
        let (resolved, mail) = {
            let mut s = self.state.write();
            s.identity.require_moderator(moderator)?;
            if let Some(unknown) = recipients.iter().find(|id| s.identity.account(**id).is_err()) {
                return Err(IdentityError::UnknownAccount(*unknown).into());
            }
            let resolved = s.content.resolve_held(node, recipients.clone())?.clone();
            self.record(&mut s, moderator, ModAction::ResolveOtherInfo { node, recipients });
            let mail = s.emit(node, now);
            (resolved, mail)
        };
        self.send(mail);
        Ok(resolved)
    }

    pub fn moderate_remove(&self, moderator: AccountId, node: NodeId, reason: &str) -> Result<()> {
        let mut s = self.state.write();
        s.identity.require_moderator(moderator)?;
        let State { identity, content, .. } = &mut *s;
        content.delete_node(identity, moderator, node, self.config.purge_deleted)?;
        let action = ModAction::RemoveNode {
            node,
            reason: reason.to_string(),
        };
        self.record(&mut s, moderator, action);
        Ok(())
    }

    /// Viewer-facing form of a node just written by `caller`.
    pub fn view_own(&self, node: &ContentNode) -> NodeView {
        let s = self.state.read();
        let depth = s.content.path(node.id).len().saturating_sub(1);
        view(node, depth)
    }
}
