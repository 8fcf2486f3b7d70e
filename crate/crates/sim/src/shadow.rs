//! The oracle's own copy of the world: accounts, nodes and thread
//! bindings, advanced in step with the system under test.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::Value;

use crate::oracle::{Rule, Traits};
use crate::scenario::{Op, Scenario, Step, UserSpec, OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pending,
    Active,
    Rejected,
    Deactivated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Published,
    Held,
    Deleted,
}

#[derive(Debug, Clone)]
pub struct User {
    pub handle: String,
    pub email: String,
    pub traits_json: Value,
    pub traits: Traits,
    pub personas: BTreeSet<String>,
    pub moderator: bool,
    pub status: Status,
}

impl User {
    pub fn active(&self) -> bool {
        self.status == Status::Active
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub label: String,
    pub parent: Option<usize>,
    /// Index of the thread's root post.
    pub thread: usize,
    pub depth: usize,
    pub author: usize,
    pub persona: String,
    pub boundary_json: Value,
    pub rule: Rule,
    pub state: State,
    pub explicit: Option<BTreeSet<usize>>,
}

/// Users and nodes are addressed by their index, in introduction order.
#[derive(Debug, Clone, Default)]
pub struct Shadow {
    pub users: Vec<User>,
    pub nodes: Vec<Node>,
    /// Thread root -> user -> persona used there.
    pub bindings: BTreeMap<usize, BTreeMap<usize, String>>,
    children: Vec<Vec<usize>>,
    handles: HashMap<String, usize>,
    labels: HashMap<String, usize>,
    owners: HashMap<String, usize>,
}

impl Shadow {
    pub fn user_index(&self, handle: &str) -> Option<usize> {
        self.handles.get(handle).copied()
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    pub fn persona_owner(&self, name: &str) -> Option<usize> {
        self.owners.get(&name.to_ascii_lowercase()).copied()
    }

    pub fn add_user(&mut self, spec: &UserSpec) -> usize {
        let idx = self.users.len();
        let persona = spec.persona().to_ascii_lowercase();
        self.users.push(User {
            handle: spec.handle.clone(),
            email: spec.email().to_ascii_lowercase(),
            traits: Traits::from_json(&spec.traits),
            traits_json: spec.traits.clone(),
            personas: [persona.clone()].into(),
            moderator: spec.moderator,
            status: if spec.moderator { Status::Active } else { Status::Pending },
        });
        self.handles.insert(spec.handle.clone(), idx);
        self.owners.insert(persona, idx);
        idx
    }

    pub fn set_status(&mut self, user: usize, status: Status) {
        self.users[user].status = status;
    }

    pub fn claim(&mut self, user: usize, name: &str) {
        let name = name.to_ascii_lowercase();
        self.users[user].personas.insert(name.clone());
        self.owners.insert(name, user);
    }

    /// Absent keys stay, `null` clears, anything else replaces.
    pub fn patch_traits(&mut self, user: usize, patch: &Value) {
        let u = &mut self.users[user];
        let mut obj = u.traits_json.as_object().cloned().unwrap_or_default();
        if let Some(p) = patch.as_object() {
            for (k, v) in p {
                if v.is_null() {
                    obj.remove(k);
                } else {
                    obj.insert(k.clone(), v.clone());
                }
            }
        }
        u.traits_json = Value::Object(obj);
        u.traits = Traits::from_json(&u.traits_json);
    }

    fn insert(&mut self, label: &str, parent: Option<usize>, author: usize, persona: &str, boundary: &Value) -> usize {
        let idx = self.nodes.len();
        let (thread, depth) = match parent {
            Some(p) => (self.nodes[p].thread, self.nodes[p].depth + 1),
            None => (idx, 0),
        };
        let rule = Rule::from_json(boundary);
        let persona = persona.to_ascii_lowercase();
        self.nodes.push(Node {
            label: label.to_string(),
            parent,
            thread,
            depth,
            author,
            persona: persona.clone(),
            boundary_json: boundary.clone(),
            state: if rule.needs_review() { State::Held } else { State::Published },
            rule,
            explicit: None,
        });
        self.labels.insert(label.to_string(), idx);
        self.children.push(Vec::new());
        if let Some(p) = parent {
            self.children[p].push(idx);
        }
        self.bindings.entry(thread).or_default().entry(author).or_insert(persona);
        idx
    }

    pub fn add_post(&mut self, label: &str, author: usize, persona: &str, boundary: &Value) -> usize {
        self.insert(label, None, author, persona, boundary)
    }

    pub fn add_comment(&mut self, label: &str, parent: usize, author: usize, persona: &str, boundary: &Value) -> usize {
        self.insert(label, Some(parent), author, persona, boundary)
    }

    pub fn set_boundary(&mut self, node: usize, boundary: &Value) {
        let n = &mut self.nodes[node];
        n.boundary_json = boundary.clone();
        n.rule = Rule::from_json(boundary);
    }

    pub fn set_show(&mut self, node: usize, show: bool) {
        let mut b = self.nodes[node].boundary_json.clone();
        if let Some(obj) = b.as_object_mut() {
            obj.insert("show_boundary".into(), Value::Bool(show));
        }
        self.set_boundary(node, &b);
    }

    pub fn delete(&mut self, node: usize) {
        self.nodes[node].state = State::Deleted;
    }

    pub fn resolve(&mut self, node: usize, recipients: BTreeSet<usize>) {
        let n = &mut self.nodes[node];
        n.state = State::Published;
        n.explicit = Some(recipients);
    }

    /// Root-first path to `node`.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Whether `user` gets past this one node's restriction, ignoring the
    /// nodes above it.
    fn passes(&self, node: usize, user: usize) -> bool {
        let n = &self.nodes[node];
        let u = &self.users[user];
        let privileged = u.moderator || n.author == user;
        let replied_to = n.rule.parent_author_grant && n.parent.is_some_and(|p| self.nodes[p].author == user);
        let chosen = n.explicit.as_ref().is_none_or(|set| set.contains(&user));
        (privileged || replied_to || n.rule.admits(&u.traits, &u.personas)) && (privileged || chosen)
    }

    /// Per-viewer check: `user` is active and passes every node from the
    /// root down to `node`.
    pub fn in_audience(&self, node: usize, user: usize) -> bool {
        self.users[user].active() && self.path(node).into_iter().all(|n| self.passes(n, user))
    }

    pub fn audience(&self, node: usize) -> BTreeSet<usize> {
        (0..self.users.len()).filter(|u| self.in_audience(node, *u)).collect()
    }

    /// Audience of every node at once. Parents are always stored before
    /// their children, so one pass suffices.
    pub fn audiences(&self) -> Vec<BTreeSet<usize>> {
        let mut out: Vec<BTreeSet<usize>> = Vec::with_capacity(self.nodes.len());
        for (idx, n) in self.nodes.iter().enumerate() {
            let candidates: Vec<usize> = match n.parent {
                Some(p) => out[p].iter().copied().collect(),
                None => (0..self.users.len()).filter(|u| self.users[*u].active()).collect(),
            };
            out.push(candidates.into_iter().filter(|u| self.passes(idx, *u)).collect());
        }
        out
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn path_deleted(&self, node: usize) -> bool {
        self.path(node).into_iter().any(|n| self.nodes[n].state == State::Deleted)
    }

    /// Published, on a published path, and `user` in the audience.
    pub fn visible(&self, node: usize, user: usize) -> bool {
        self.path(node).into_iter().all(|n| self.nodes[n].state == State::Published) && self.in_audience(node, user)
    }

    /// Freezes the current audiences for repeated visibility queries.
    pub fn snapshot(&self) -> Snapshot<'_> {
        let mut published = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let above = n.parent.is_none_or(|p| published[p]);
            published.push(above && n.state == State::Published);
        }
        Snapshot {
            shadow: self,
            audiences: self.audiences(),
            published,
        }
    }

    pub fn participants(&self, thread: usize) -> BTreeSet<usize> {
        self.bindings.get(&thread).map(|b| b.keys().copied().collect()).unwrap_or_default()
    }

    pub fn participant_personas(&self, thread: usize) -> BTreeSet<String> {
        self.bindings.get(&thread).map(|b| b.values().cloned().collect()).unwrap_or_default()
    }

    pub fn bound_persona(&self, thread: usize, user: usize) -> Option<&String> {
        self.bindings.get(&thread).and_then(|b| b.get(&user))
    }

    /// Who should be told about `node` now that it is published: its
    /// audience for a post, and for a comment only the thread's participants
    /// within its audience. Never the author.
    pub fn recipients(&self, node: usize) -> BTreeSet<usize> {
        let n = &self.nodes[node];
        let mut audience = self.audience(node);
        if n.parent.is_some() {
            let participants = self.participants(n.thread);
            audience.retain(|u| participants.contains(u));
        }
        audience.remove(&n.author);
        audience
    }
}

/// Audiences of every node at one instant.
pub struct Snapshot<'a> {
    pub shadow: &'a Shadow,
    pub audiences: Vec<BTreeSet<usize>>,
    published: Vec<bool>,
}

impl Snapshot<'_> {
    pub fn visible(&self, node: usize, user: usize) -> bool {
        self.published[node] && self.audiences[node].contains(&user)
    }

    /// Visible posts, newest first.
    pub fn feed(&self, user: usize) -> Vec<usize> {
        (0..self.audiences.len())
            .rev()
            .filter(|n| self.shadow.nodes[*n].parent.is_none() && self.visible(*n, user))
            .collect()
    }

    /// The visible part of a thread in display order: depth first, older
    /// siblings first. `None` when the post itself is not visible.
    pub fn thread(&self, root: usize, user: usize) -> Option<Vec<usize>> {
        let node = self.shadow.nodes.get(root)?;
        if node.parent.is_some() || !self.visible(root, user) {
            return None;
        }
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in self.shadow.children(n).iter().rev() {
                if self.visible(*c, user) {
                    stack.push(*c);
                }
            }
        }
        Some(out)
    }
}

impl Shadow {
    /// The world a scenario describes, taking every action expected to
    /// succeed as having succeeded. Nothing is run against the platform.
    pub fn from_scenario(scenario: &Scenario) -> Shadow {
        let mut s = Shadow::default();
        for step in &scenario.steps {
            match &step.item {
                Step::User(u) => {
                    let idx = s.add_user(u);
                    if u.approve {
                        s.set_status(idx, Status::Active);
                    }
                    for p in &u.personas {
                        s.claim(idx, p);
                    }
                }
                Step::Action(a) if a.expect == OK => {
                    let actor = s.user_index(&a.actor).expect("actors are checked when parsing");
                    s.apply(actor, &a.op);
                }
                Step::Action(_) => {}
            }
        }
        s
    }

    fn apply(&mut self, actor: usize, op: &Op) {
        let node = |s: &Self, label: &str| s.node_index(label);
        match op {
            Op::ClaimPersona { name } => self.claim(actor, name),
            Op::UpdateTraits { patch } => self.patch_traits(actor, patch),
            Op::CreatePost {
                node: label,
                persona,
                boundary,
                ..
            } => {
                self.add_post(label, actor, persona, boundary);
            }
            Op::CreateComment {
                node: label,
                parent,
                persona,
                boundary,
                ..
            } => {
                if let Some(p) = node(self, parent) {
                    self.add_comment(label, p, actor, persona, boundary);
                }
            }
            Op::Restrict { target, boundary } => {
                if let Some(n) = node(self, target) {
                    self.set_boundary(n, boundary);
                }
            }
            Op::SetBoundaryVisibility { target, show } => {
                if let Some(n) = node(self, target) {
                    self.set_show(n, *show);
                }
            }
            Op::Delete { target } | Op::ModerateRemove { target, .. } => {
                if let Some(n) = node(self, target) {
                    self.delete(n);
                }
            }
            Op::ResolveOtherInfo { target, recipients } => {
                if let Some(n) = node(self, target) {
                    let chosen = recipients.iter().filter_map(|h| self.user_index(h)).collect();
                    self.resolve(n, chosen);
                }
            }
            Op::ReviewSignup { user, decision } => {
                if let Some(u) = self.user_index(user) {
                    let status = if decision == "approve" { Status::Active } else { Status::Rejected };
                    self.set_status(u, status);
                }
            }
            Op::Deactivate { user } => {
                let u = user.as_deref().and_then(|h| self.user_index(h)).unwrap_or(actor);
                self.set_status(u, Status::Deactivated);
            }
            _ => {}
        }
    }
}
