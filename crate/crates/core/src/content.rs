//! Posts, comments and threads, with per-viewer visibility.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::boundary::ConsentBoundary;
use crate::clock::Timestamp;
use crate::engine::{
    admits, boundary_metadata_view, check_restriction, compose_audience, validate_boundary,
    AudienceSet, BoundaryTarget, ChainLink, Member, RestrictionError, ValidationError,
};
use crate::identity::{IdentityError, IdentityRegistry};
use crate::ids::{AccountId, NodeId, PersonaName, ThreadId};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContentError {
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Restriction(#[from] RestrictionError),
    /// Also returned for nodes that exist but are invisible to the caller.
    #[error("node not found")]
    NodeNotFound,
    #[error("cannot reply to a node outside your audience")]
    ParentNotVisible,
    #[error("thread not found")]
    UnknownThread,
    #[error("only the author may do this")]
    NotAuthor,
    #[error("only the author or the moderator may delete this")]
    NotAuthorized,
    #[error("node is not held for review")]
    NotHeld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Published,
    Held,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRevision {
    pub at: Timestamp,
    pub boundary: ConsentBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentNode {
    pub id: NodeId,
    pub thread: ThreadId,
    pub parent: Option<NodeId>,
    pub author: AccountId,
    pub persona: PersonaName,
    pub body: String,
    pub boundary: ConsentBoundary,
    pub state: NodeState,
    pub created_at: Timestamp,
    pub boundary_history: Vec<BoundaryRevision>,
    /// Moderator-chosen recipients once a held node is resolved.
    pub resolved_audience: Option<BTreeSet<AccountId>>,
}

impl ContentNode {
    pub fn is_post(&self) -> bool {
        self.parent.is_none()
    }
}

/// A node as one viewer is allowed to see it. Carries no account ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub node_id: NodeId,
    pub thread_id: ThreadId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<NodeId>,
    pub depth: usize,
    pub persona: PersonaName,
    pub body: String,
    pub state: NodeState,
    pub created_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<ConsentBoundary>,
}

/// Export record for one node, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: NodeId,
    pub thread_id: ThreadId,
    pub parent_id: Option<NodeId>,
    pub persona: PersonaName,
    pub body: String,
    pub boundary: ConsentBoundary,
    pub state: NodeState,
    pub created_at: Timestamp,
    pub boundary_changed_at: Vec<Timestamp>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ContentStore {
    nodes: BTreeMap<NodeId, ContentNode>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    next_node: u64,
}

impl ContentStore {
    pub fn new() -> Self {
        ContentStore {
            next_node: 1,
            ..Default::default()
        }
    }

    pub fn node(&self, id: NodeId) -> Option<&ContentNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ContentNode> {
        self.nodes.values()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Nodes from the root post down to `id`.
    pub fn path(&self, id: NodeId) -> Vec<&ContentNode> {
        let mut path = Vec::new();
        let mut cursor = self.nodes.get(&id);
        while let Some(node) = cursor {
            path.push(node);
            cursor = node.parent.and_then(|p| self.nodes.get(&p));
        }
        path.reverse();
        path
    }

    pub fn chain(&self, id: NodeId) -> Vec<ChainLink<'_>> {
        self.path(id)
            .into_iter()
            .map(|n| ChainLink {
                node: n.id,
                parent: n.parent,
                author: n.author,
                boundary: &n.boundary,
                explicit_audience: n.resolved_audience.as_ref(),
            })
            .collect()
    }

    /// Audience of a node over the active population, ignoring node states.
    pub fn audience(&self, id: NodeId, registry: &IdentityRegistry) -> Option<AudienceSet> {
        let chain = self.chain(id);
        compose_audience(&chain, &registry.population()).ok()
    }

    fn path_is(&self, id: NodeId, ok: impl Fn(NodeState) -> bool) -> bool {
        let path = self.path(id);
        !path.is_empty() && path.iter().all(|n| ok(n.state))
    }

    fn deleted_path(&self, id: NodeId) -> bool {
        !self.path_is(id, |s| s != NodeState::Deleted)
    }

    /// Whether `viewer` is in the node's audience, walking the chain one
    /// viewer at a time.
    pub fn in_audience(&self, id: NodeId, viewer: &Member<'_>) -> bool {
        let chain = self.chain(id);
        if chain.is_empty() {
            return false;
        }
        let mut parent_author = None;
        for link in &chain {
            if !admits(link, parent_author, viewer) {
                return false;
            }
            parent_author = Some(link.author);
        }
        true
    }

    /// Published, with every ancestor published, and the viewer in its audience.
    pub fn visible_to(&self, id: NodeId, viewer: &Member<'_>) -> bool {
        self.path_is(id, |s| s == NodeState::Published) && self.in_audience(id, viewer)
    }

    fn member<'r>(registry: &'r IdentityRegistry, account: AccountId) -> Result<Member<'r>, ContentError> {
        Ok(registry.active_account(account)?.member())
    }

    fn insert(&mut self, mut node: ContentNode) -> &ContentNode {
        node.id = NodeId(self.next_node);
        self.next_node += 1;
        if node.parent.is_none() {
            node.thread = ThreadId::from(node.id);
        }
        if let Some(parent) = node.parent {
            self.children.entry(parent).or_default().push(node.id);
        }
        let id = node.id;
        self.nodes.entry(id).or_insert(node)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn create_post(
        &mut self,
        registry: &mut IdentityRegistry,
        vocab: &Vocabulary,
        author: AccountId,
        persona: &PersonaName,
        body: &str,
        boundary: ConsentBoundary,
        now: Timestamp,
    ) -> Result<&ContentNode, ContentError> {
        let acct = registry.active_account(author)?;
        if !acct.personas.contains(persona) {
            return Err(IdentityError::PersonaNotOwned(persona.clone()).into());
        }
        validate_boundary(&boundary, &acct.profile, vocab, BoundaryTarget::Post)?;
        let node = self.insert(ContentNode {
            id: NodeId(0),
            thread: ThreadId(0),
            parent: None,
            author,
            persona: persona.clone(),
            body: body.to_string(),
            state: initial_state(&boundary),
            boundary_history: vec![BoundaryRevision {
                at: now,
                boundary: boundary.clone(),
            }],
            boundary,
            created_at: now,
            resolved_audience: None,
        });
        registry.bind_thread_persona(author, node.thread, persona)?;
        Ok(node)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn create_comment(
        &mut self,
        registry: &mut IdentityRegistry,
        vocab: &Vocabulary,
        author: AccountId,
        persona: &PersonaName,
        parent: NodeId,
        body: &str,
        boundary: ConsentBoundary,
        now: Timestamp,
    ) -> Result<&ContentNode, ContentError> {
        let viewer = Self::member(registry, author)?;
        if !self.visible_to(parent, &viewer) {
            return Err(ContentError::ParentNotVisible);
        }
        let thread = self.nodes[&parent].thread;
        registry.check_thread_persona(author, thread, persona)?;
        let participants = registry.thread_participants(thread);
        let target = BoundaryTarget::Comment {
            thread_participants: &participants,
        };
        validate_boundary(&boundary, viewer.profile, vocab, target)?;
        registry.bind_thread_persona(author, thread, persona)?;
        Ok(self.insert(ContentNode {
            id: NodeId(0),
            thread,
            parent: Some(parent),
            author,
            persona: persona.clone(),
            body: body.to_string(),
            state: initial_state(&boundary),
            boundary_history: vec![BoundaryRevision {
                at: now,
                boundary: boundary.clone(),
            }],
            boundary,
            created_at: now,
            resolved_audience: None,
        }))
    }

    /// Resolves an author-only operation's target. Nodes the caller cannot
    /// see are reported as missing.
    fn authored(
        &self,
        registry: &IdentityRegistry,
        caller: AccountId,
        id: NodeId,
    ) -> Result<&ContentNode, ContentError> {
        let viewer = Self::member(registry, caller)?;
        let node = self.nodes.get(&id).ok_or(ContentError::NodeNotFound)?;
        if self.deleted_path(id) {
            return Err(ContentError::NodeNotFound);
        }
        if node.author == caller {
            Ok(node)
        } else if self.visible_to(id, &viewer) {
            Err(ContentError::NotAuthor)
        } else {
            Err(ContentError::NodeNotFound)
        }
    }

    /// Replaces a node's boundary with a narrower one. Descendants shrink with
    /// it through composition; nobody is told.
    pub fn restrict_node_boundary(
        &mut self,
        registry: &IdentityRegistry,
        vocab: &Vocabulary,
        caller: AccountId,
        id: NodeId,
        new: ConsentBoundary,
        now: Timestamp,
    ) -> Result<&ContentNode, ContentError> {
        let node = self.authored(registry, caller, id)?;
        check_restriction(&node.boundary, &new)?;
        let profile = &registry.active_account(caller)?.profile;
        let participants;
        let target = if node.is_post() {
            BoundaryTarget::Post
        } else {
            participants = registry.thread_participants(node.thread);
            BoundaryTarget::Comment {
                thread_participants: &participants,
            }
        };
        validate_boundary(&new, profile, vocab, target)?;
        let node = self.nodes.get_mut(&id).expect("checked above");
        node.boundary = new.clone();
        node.boundary_history.push(BoundaryRevision { at: now, boundary: new });
        Ok(node)
    }

    pub fn toggle_boundary_visibility(
        &mut self,
        registry: &IdentityRegistry,
        caller: AccountId,
        id: NodeId,
        show: bool,
        now: Timestamp,
    ) -> Result<&ContentNode, ContentError> {
        self.authored(registry, caller, id)?;
        let node = self.nodes.get_mut(&id).expect("checked above");
        if node.boundary.show_boundary != show {
            node.boundary.show_boundary = show;
            node.boundary_history.push(BoundaryRevision {
                at: now,
                boundary: node.boundary.clone(),
            });
        }
        Ok(node)
    }

    /// Marks a node deleted, hiding its whole subtree. With `purge` the body
    /// is dropped as well; otherwise it is kept for moderator audit.
    pub fn delete_node(
        &mut self,
        registry: &IdentityRegistry,
        caller: AccountId,
        id: NodeId,
        purge: bool,
    ) -> Result<&ContentNode, ContentError> {
        let moderator = registry.require_moderator(caller).is_ok();
        if moderator {
            if !self.nodes.contains_key(&id) || self.deleted_path(id) {
                return Err(ContentError::NodeNotFound);
            }
        } else {
            match self.authored(registry, caller, id) {
                Err(ContentError::NotAuthor) => return Err(ContentError::NotAuthorized),
                other => other?,
            };
        }
        let node = self.nodes.get_mut(&id).expect("checked above");
        node.state = NodeState::Deleted;
        if purge {
            node.body.clear();
        }
        Ok(node)
    }

    /// Publishes a held node to `recipients`, intersected with its boundary.
    pub fn resolve_held(
        &mut self,
        id: NodeId,
        recipients: BTreeSet<AccountId>,
    ) -> Result<&ContentNode, ContentError> {
        if self.deleted_path(id) {
            return Err(ContentError::NodeNotFound);
        }
        let node = self.nodes.get_mut(&id).ok_or(ContentError::NodeNotFound)?;
        if node.state != NodeState::Held {
            return Err(ContentError::NotHeld);
        }
        node.state = NodeState::Published;
        node.resolved_audience = Some(recipients);
        Ok(node)
    }

    pub fn held_nodes(&self) -> impl Iterator<Item = &ContentNode> {
        self.nodes.values().filter(|n| n.state == NodeState::Held)
    }

    /// Boundary to prefill for the caller's next node in `thread`: their most
    /// recent one there, else their account default, else public.
    pub fn last_used_boundary(
        &self,
        registry: &IdentityRegistry,
        account: AccountId,
        thread: ThreadId,
    ) -> Result<ConsentBoundary, ContentError> {
        let acct = registry.active_account(account)?;
        let recent = self
            .nodes
            .values()
            .filter(|n| n.thread == thread && n.author == account)
            .max_by_key(|n| (n.created_at, n.id));
        Ok(recent
            .map(|n| n.boundary.clone())
            .or_else(|| acct.default_boundary.clone())
            .unwrap_or_default())
    }

    /// Posts visible to `viewer`, newest first.
    pub fn feed(&self, registry: &IdentityRegistry, viewer: AccountId) -> Result<Vec<NodeView>, ContentError> {
        let member = Self::member(registry, viewer)?;
        let mut posts: Vec<&ContentNode> = self
            .nodes
            .values()
            .filter(|n| n.is_post() && self.visible_to(n.id, &member))
            .collect();
        posts.sort_by_key(|n| std::cmp::Reverse((n.created_at, n.id)));
        Ok(posts.into_iter().map(|n| view(n, 0)).collect())
    }

    /// The part of a thread visible to `viewer`, in depth-first order with
    /// siblings oldest first. A thread whose post is invisible is reported
    /// as unknown.
    pub fn thread(
        &self,
        registry: &IdentityRegistry,
        viewer: AccountId,
        thread: ThreadId,
    ) -> Result<Vec<NodeView>, ContentError> {
        let member = Self::member(registry, viewer)?;
        let root = thread.root();
        if !self.nodes.get(&root).is_some_and(|n| n.is_post()) || !self.visible_to(root, &member) {
            return Err(ContentError::UnknownThread);
        }
        let mut out = Vec::new();
        let mut stack = vec![(root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            out.push(view(&self.nodes[&id], depth));
            for child in self.children(id).iter().rev() {
                // A child can only be visible if its parent is.
                let node = &self.nodes[child];
                if node.state == NodeState::Published && self.in_audience(*child, &member) {
                    stack.push((*child, depth + 1));
                }
            }
        }
        Ok(out)
    }

    /// Thread id of a node the caller can see (or authored).
    pub fn thread_of_visible(
        &self,
        registry: &IdentityRegistry,
        viewer: AccountId,
        id: NodeId,
    ) -> Result<ThreadId, ContentError> {
        let member = Self::member(registry, viewer)?;
        match self.nodes.get(&id) {
            Some(n) if self.visible_to(id, &member) => Ok(n.thread),
            Some(n) if n.author == viewer && !self.deleted_path(id) => Ok(n.thread),
            _ => Err(ContentError::NodeNotFound),
        }
    }

    pub fn export_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .values()
            .map(|n| NodeRecord {
                node_id: n.id,
                thread_id: n.thread,
                parent_id: n.parent,
                persona: n.persona.clone(),
                body: n.body.clone(),
                boundary: n.boundary.clone(),
                state: n.state,
                created_at: n.created_at,
                boundary_changed_at: n.boundary_history.iter().map(|r| r.at).collect(),
            })
            .collect()
    }
}

fn initial_state(boundary: &ConsentBoundary) -> NodeState {
    if boundary.needs_review() {
        NodeState::Held
    } else {
        NodeState::Published
    }
}

/// Viewer-facing form of a node the viewer is known to be able to see.
pub fn view(node: &ContentNode, depth: usize) -> NodeView {
    NodeView {
        node_id: node.id,
        thread_id: node.thread,
        parent_id: node.parent,
        depth,
        persona: node.persona.clone(),
        body: node.body.clone(),
        state: node.state,
        created_at: node.created_at,
        boundary: boundary_metadata_view(&node.boundary, true).cloned(),
    }
}
