//! Random worlds. Every generated action carries the outcome the shadow
//! world predicts for it, so a replay that matches is a pass.

use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::scenario::{Action, Header, Numbered, Op, Scenario, Step, UserSpec};
use crate::shadow::{Shadow, State, Status};

pub const GENDERS: [&str; 3] = ["woman", "man", "nonbinary"];
pub const RACES: [&str; 6] = ["asian", "black", "hispanic", "white", "native", "pacific"];
pub const PROGRAMS: [&str; 2] = ["cs", "info"];
pub const FACULTY: [&str; 6] = ["john-smith", "jane-doe", "ana-lima", "wei-chen", "omar-haddad", "ruth-okafor"];
pub const CHALLENGES: [&str; 9] = [
    "micromanagement",
    "communication-issue",
    "lack-of-feedback",
    "lack-of-support",
    "unrealistic-expectations",
    "authorship-dispute",
    "funding-pressure",
    "work-life-balance",
    "harassment",
];

/// Comments never go deeper than this.
pub const MAX_DEPTH: usize = 6;
const MODERATOR: usize = 0;

fn pick<'a>(rng: &mut ChaCha8Rng, from: &[&'a str], min: usize, max: usize) -> Vec<&'a str> {
    let n = rng.gen_range(min..=max.min(from.len()));
    let mut out: Vec<&str> = from.choose_multiple(rng, n).copied().collect();
    out.sort();
    out
}

fn random_traits(rng: &mut ChaCha8Rng) -> Value {
    let mut t = Map::new();
    if rng.gen_bool(0.85) {
        t.insert("gender".into(), json!(GENDERS.choose(rng)));
    }
    if rng.gen_bool(0.8) {
        t.insert("races".into(), json!(pick(rng, &RACES, 1, 2)));
    }
    if rng.gen_bool(0.8) {
        t.insert("international".into(), json!(rng.gen_bool(0.35)));
    }
    if rng.gen_bool(0.85) {
        t.insert("phd_program".into(), json!(PROGRAMS.choose(rng)));
    }
    if rng.gen_bool(0.8) {
        t.insert("current_advisors".into(), json!(pick(rng, &FACULTY, 1, 2)));
    }
    if rng.gen_bool(0.6) {
        t.insert("prior_advisors".into(), json!(pick(rng, &FACULTY, 0, 1)));
    }
    if rng.gen_bool(0.75) {
        t.insert("challenges_experienced".into(), json!(pick(rng, &CHALLENGES, 1, 3)));
    }
    if rng.gen_bool(0.8) {
        t.insert("advising_status_changed".into(), json!(rng.gen_bool(0.3)));
    }
    Value::Object(t)
}

fn random_patch(rng: &mut ChaCha8Rng) -> Value {
    let mut p = Map::new();
    for _ in 0..rng.gen_range(1..=2) {
        let clear = rng.gen_bool(0.2);
        let (k, v) = match rng.gen_range(0..6) {
            0 => ("gender", json!(GENDERS.choose(rng))),
            1 => ("races", json!(pick(rng, &RACES, 1, 2))),
            2 => ("international", json!(rng.gen_bool(0.5))),
            3 => ("challenges_experienced", json!(pick(rng, &CHALLENGES, 1, 3))),
            4 => ("advising_status_changed", json!(rng.gen_bool(0.5))),
            _ => ("current_advisors", json!(pick(rng, &FACULTY, 1, 2))),
        };
        p.insert(k.into(), if clear { Value::Null } else { v });
    }
    Value::Object(p)
}

/// How adventurous generated boundaries are.
#[derive(Clone, Copy)]
struct Style {
    /// Scales the chance of each restriction.
    strictness: f64,
    other_info: f64,
}

struct Gen {
    rng: ChaCha8Rng,
    shadow: Shadow,
    steps: Vec<Numbered<Step>>,
    next_label: usize,
    next_persona: usize,
    style: Style,
}

impl Gen {
    fn new(seed: u64, style: Style) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            shadow: Shadow::default(),
            steps: Vec::new(),
            next_label: 0,
            next_persona: 0,
            style,
        }
    }

    fn push(&mut self, step: Step) {
        let line = self.steps.len() + 2;
        self.steps.push(Numbered { line, item: step });
    }

    fn act(&mut self, actor: usize, op: Op, expect: &str) {
        let action = Action {
            actor: self.shadow.users[actor].handle.clone(),
            op,
            expect: expect.to_string(),
        };
        self.push(Step::Action(action));
    }

    fn add_user(&mut self, spec: UserSpec) {
        let idx = self.shadow.add_user(&spec);
        if !spec.moderator && spec.approve {
            self.shadow.set_status(idx, Status::Active);
        }
        for p in &spec.personas {
            self.shadow.claim(idx, p);
        }
        self.push(Step::User(spec));
    }

    fn users(&mut self, n: usize, pending: f64) {
        let mut moderator = UserSpec::new("mod", json!({}));
        moderator.moderator = true;
        self.add_user(moderator);
        for i in 1..=n {
            let mut spec = UserSpec::new(&format!("u{i:02}"), random_traits(&mut self.rng));
            spec.approve = !self.rng.gen_bool(pending);
            if spec.approve && self.rng.gen_bool(0.15) {
                spec.personas.push(format!("u{i:02}_alt"));
            }
            self.add_user(spec);
        }
    }

    fn label(&mut self, prefix: &str) -> String {
        self.next_label += 1;
        format!("{prefix}{}", self.next_label)
    }

    fn active_members(&self) -> Vec<usize> {
        (0..self.shadow.users.len())
            .filter(|u| *u != MODERATOR && self.shadow.users[*u].active())
            .collect()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool((p * self.style.strictness).clamp(0.0, 1.0))
    }

    /// A boundary `author` may set, using only identities they hold.
    fn boundary(&mut self, author: usize, thread: Option<usize>) -> Value {
        let t = self.shadow.users[author].traits.clone();
        let mut b = Map::new();
        if let Some(g) = &t.gender {
            if self.chance(0.12) {
                let mut set: BTreeSet<&str> = pick(&mut self.rng, &GENDERS, 0, 1).into_iter().collect();
                set.insert(g.as_str());
                b.insert("gender_allowed".into(), json!(set));
            }
        }
        if !t.races.is_empty() && self.chance(0.15) {
            let own = t.races.iter().choose(&mut self.rng).expect("non-empty").clone();
            let mut set: BTreeSet<String> = pick(&mut self.rng, &RACES, 0, 1).into_iter().map(String::from).collect();
            set.insert(own);
            b.insert("races_allowed".into(), json!(set));
        }
        if t.international == Some(true) && self.chance(0.2) {
            b.insert("require_international".into(), json!(true));
        }
        if self.chance(0.12) {
            b.insert("challenges_any".into(), json!(pick(&mut self.rng, &CHALLENGES, 1, 3)));
        }
        if self.chance(0.08) {
            b.insert("require_advising_change".into(), json!(true));
        }
        if self.chance(0.1) {
            b.insert("programs_allowed".into(), json!(pick(&mut self.rng, &PROGRAMS, 1, 1)));
        }
        if self.chance(0.08) {
            b.insert("advised_by_any".into(), json!(pick(&mut self.rng, &FACULTY, 1, 2)));
        }
        if self.chance(0.08) {
            b.insert("not_advised_by".into(), json!(pick(&mut self.rng, &FACULTY, 1, 1)));
        }
        let names: Vec<String> = match thread {
            Some(th) => self.shadow.participant_personas(th).into_iter().collect(),
            None => self.shadow.users.iter().flat_map(|u| u.personas.iter().cloned()).collect(),
        };
        if !names.is_empty() && self.chance(0.06) {
            let n = self.rng.gen_range(1..=names.len().min(3));
            let mut chosen: Vec<&String> = names.choose_multiple(&mut self.rng, n).collect();
            chosen.sort();
            b.insert("usernames_allowed".into(), json!(chosen));
        }
        if self.rng.gen_bool(self.style.other_info) {
            b.insert("other_info".into(), json!("only people who worked in the same lab"));
        }
        if self.rng.gen_bool(0.3) {
            b.insert("show_boundary".into(), json!(true));
        }
        if thread.is_some() && self.rng.gen_bool(0.2) {
            b.insert("show_to_parent_author".into(), json!(false));
        }
        Value::Object(b)
    }

    fn post(&mut self, author: usize) {
        let persona = self.shadow.users[author].personas.iter().choose(&mut self.rng).cloned().expect("one persona");
        let boundary = self.boundary(author, None);
        let node = self.label("p");
        self.shadow.add_post(&node, author, &persona, &boundary);
        let body = format!("post {node}");
        self.act(author, Op::CreatePost { node, persona, body, boundary }, "ok");
    }

    /// Nodes `user` could reply to.
    fn replyable(&self, user: usize) -> Vec<usize> {
        let snap = self.shadow.snapshot();
        (0..self.shadow.nodes.len())
            .filter(|n| self.shadow.nodes[*n].depth + 1 < MAX_DEPTH && snap.visible(*n, user))
            .collect()
    }

    fn comment_on(&mut self, author: usize, parent: usize) {
        let thread = self.shadow.nodes[parent].thread;
        let persona = match self.shadow.bound_persona(thread, author) {
            Some(p) => p.clone(),
            None => self.shadow.users[author].personas.iter().choose(&mut self.rng).cloned().expect("one persona"),
        };
        let boundary = self.boundary(author, Some(thread));
        let node = self.label("c");
        let parent_label = self.shadow.nodes[parent].label.clone();
        self.shadow.add_comment(&node, parent, author, &persona, &boundary);
        let body = format!("reply {node}");
        let op = Op::CreateComment {
            node,
            parent: parent_label,
            persona,
            body,
            boundary,
        };
        self.act(author, op, "ok");
    }

    /// Returns false when `author` has nothing to reply to.
    fn comment(&mut self, author: usize) -> bool {
        let options = self.replyable(author);
        let Some(&parent) = options.choose(&mut self.rng) else {
            return false;
        };
        self.comment_on(author, parent);
        true
    }

    fn own_live_nodes(&self, user: usize) -> Vec<usize> {
        (0..self.shadow.nodes.len())
            .filter(|n| self.shadow.nodes[*n].author == user && !self.shadow.path_deleted(*n))
            .collect()
    }

    /// A strictly narrower version of `node`'s boundary.
    fn narrowed(&mut self, node: usize) -> Value {
        let n = &self.shadow.nodes[node];
        let author = self.shadow.users[n.author].traits.clone();
        let is_comment = n.parent.is_some();
        let mut b = n.boundary_json.as_object().cloned().unwrap_or_default();
        let shrink = |rng: &mut ChaCha8Rng, b: &mut Map<String, Value>, key: &str, all: &[&str], keep: Option<&str>| {
            let current: Option<Vec<String>> = b
                .get(key)
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect());
            let next: Vec<String> = match current {
                None => match keep {
                    Some(k) => vec![k.to_string()],
                    None => pick(rng, all, 1, 2).into_iter().map(String::from).collect(),
                },
                Some(cur) if cur.len() > 1 => {
                    let mut v: Vec<String> = match keep.filter(|k| cur.iter().any(|c| c == k)) {
                        Some(k) => vec![k.to_string()],
                        None => vec![cur.choose(rng).expect("non-empty").clone()],
                    };
                    v.sort();
                    v
                }
                Some(cur) => cur,
            };
            b.insert(key.into(), json!(next));
        };
        match self.rng.gen_range(0..7) {
            0 => {
                b.insert("require_advising_change".into(), json!(true));
            }
            1 if author.international == Some(true) => {
                b.insert("require_international".into(), json!(true));
            }
            2 => shrink(&mut self.rng, &mut b, "challenges_any", &CHALLENGES, None),
            3 => shrink(&mut self.rng, &mut b, "programs_allowed", &PROGRAMS, None),
            4 if !author.races.is_empty() || b.contains_key("races_allowed") => {
                let own = author.races.iter().next().cloned();
                shrink(&mut self.rng, &mut b, "races_allowed", &RACES, own.as_deref());
            }
            5 if is_comment => {
                b.insert("show_to_parent_author".into(), json!(false));
            }
            _ => {
                let mut set: BTreeSet<String> = b
                    .get("not_advised_by")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
                    .unwrap_or_default();
                set.insert(FACULTY.choose(&mut self.rng).expect("non-empty").to_string());
                b.insert("not_advised_by".into(), json!(set));
            }
        }
        Value::Object(b)
    }

    /// Whether `author` still holds every identity `boundary` names.
    fn holds(&self, author: usize, boundary: &Value) -> bool {
        let t = &self.shadow.users[author].traits;
        let list = |k: &str| -> Option<BTreeSet<String>> {
            boundary
                .get(k)
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        };
        if let Some(g) = list("gender_allowed") {
            if !t.gender.as_ref().is_some_and(|x| g.contains(x)) {
                return false;
            }
        }
        if let Some(r) = list("races_allowed") {
            if t.races.is_disjoint(&r) {
                return false;
            }
        }
        let intl = boundary.get("require_international").and_then(Value::as_bool).unwrap_or(false);
        !(intl && t.international != Some(true))
    }

    fn restrict(&mut self, user: usize) -> bool {
        let Some(&node) = self.own_live_nodes(user).choose(&mut self.rng) else {
            return false;
        };
        let boundary = self.narrowed(node);
        let ok = self.holds(user, &boundary);
        if ok {
            self.shadow.set_boundary(node, &boundary);
        }
        let target = self.shadow.nodes[node].label.clone();
        self.act(user, Op::Restrict { target, boundary }, if ok { "ok" } else { "identity_not_held" });
        true
    }

    fn widen(&mut self, user: usize) -> bool {
        const RESTRICTIONS: [&str; 8] = [
            "gender_allowed",
            "races_allowed",
            "require_international",
            "challenges_any",
            "require_advising_change",
            "programs_allowed",
            "advised_by_any",
            "not_advised_by",
        ];
        let candidates: Vec<(usize, &str)> = self
            .own_live_nodes(user)
            .into_iter()
            .flat_map(|n| {
                let b = &self.shadow.nodes[n].boundary_json;
                RESTRICTIONS
                    .iter()
                    .filter(|k| b.get(**k).is_some_and(|v| v != &json!(false)))
                    .map(move |k| (n, *k))
                    .collect::<Vec<_>>()
            })
            .collect();
        let Some(&(node, key)) = candidates.choose(&mut self.rng) else {
            return false;
        };
        let mut b = self.shadow.nodes[node].boundary_json.as_object().cloned().unwrap_or_default();
        b.remove(key);
        let target = self.shadow.nodes[node].label.clone();
        self.act(user, Op::Restrict { target, boundary: Value::Object(b) }, "widening_violation");
        true
    }

    fn toggle(&mut self, user: usize) -> bool {
        let Some(&node) = self.own_live_nodes(user).choose(&mut self.rng) else {
            return false;
        };
        let show = self.rng.gen_bool(0.5);
        self.shadow.set_show(node, show);
        let target = self.shadow.nodes[node].label.clone();
        self.act(user, Op::SetBoundaryVisibility { target, show }, "ok");
        true
    }

    fn delete(&mut self, user: usize) -> bool {
        let Some(&node) = self.own_live_nodes(user).choose(&mut self.rng) else {
            return false;
        };
        self.shadow.delete(node);
        let target = self.shadow.nodes[node].label.clone();
        self.act(user, Op::Delete { target }, "ok");
        true
    }

    fn moderate(&mut self) -> bool {
        let live: Vec<usize> = (0..self.shadow.nodes.len()).filter(|n| !self.shadow.path_deleted(*n)).collect();
        let Some(&node) = live.choose(&mut self.rng) else {
            return false;
        };
        self.shadow.delete(node);
        let target = self.shadow.nodes[node].label.clone();
        let op = Op::ModerateRemove {
            target,
            reason: "off topic".into(),
        };
        self.act(MODERATOR, op, "ok");
        true
    }

    fn resolve_held(&mut self) -> bool {
        let held: Vec<usize> = (0..self.shadow.nodes.len())
            .filter(|n| self.shadow.nodes[*n].state == State::Held && !self.shadow.path_deleted(*n))
            .collect();
        let Some(&node) = held.choose(&mut self.rng) else {
            return false;
        };
        let members = self.active_members();
        let n = self.rng.gen_range(0..=members.len().min(5));
        let chosen: BTreeSet<usize> = members.choose_multiple(&mut self.rng, n).copied().collect();
        let recipients = chosen.iter().map(|u| self.shadow.users[*u].handle.clone()).collect();
        self.shadow.resolve(node, chosen);
        let target = self.shadow.nodes[node].label.clone();
        self.act(MODERATOR, Op::ResolveOtherInfo { target, recipients }, "ok");
        true
    }

    /// Replying to something the actor cannot see.
    fn probe_hidden(&mut self, user: usize) -> bool {
        let snap = self.shadow.snapshot();
        let hidden: Vec<usize> = (0..self.shadow.nodes.len()).filter(|n| !snap.visible(*n, user)).collect();
        drop(snap);
        let parent = match hidden.choose(&mut self.rng) {
            Some(n) if self.rng.gen_bool(0.8) => self.shadow.nodes[*n].label.clone(),
            _ => "ghost".to_string(),
        };
        let persona = self.shadow.users[user].personas.iter().next().cloned().expect("one persona");
        let op = Op::CreateComment {
            node: self.label("x"),
            parent,
            persona,
            body: "can anyone see this".into(),
            boundary: json!({}),
        };
        self.act(user, op, "not_found");
        true
    }

    /// Replying under a second persona in a thread already joined.
    fn probe_mismatch(&mut self, user: usize) -> bool {
        if self.shadow.users[user].personas.len() < 2 {
            return false;
        }
        let options: Vec<usize> = self
            .replyable(user)
            .into_iter()
            .filter(|n| self.shadow.bound_persona(self.shadow.nodes[*n].thread, user).is_some())
            .collect();
        let Some(&parent) = options.choose(&mut self.rng) else {
            return false;
        };
        let bound = self.shadow.bound_persona(self.shadow.nodes[parent].thread, user).cloned();
        let Some(other) = self.shadow.users[user].personas.iter().find(|p| Some(*p) != bound.as_ref()).cloned() else {
            return false;
        };
        let op = Op::CreateComment {
            node: self.label("x"),
            parent: self.shadow.nodes[parent].label.clone(),
            persona: other,
            body: "second voice".into(),
            boundary: json!({}),
        };
        self.act(user, op, "persona_mismatch");
        true
    }

    fn claim(&mut self, user: usize) -> bool {
        self.next_persona += 1;
        let name = format!("{}_n{}", self.shadow.users[user].handle, self.next_persona);
        self.shadow.claim(user, &name);
        self.act(user, Op::ClaimPersona { name }, "ok");
        true
    }

    fn claim_taken(&mut self, user: usize) -> bool {
        let taken: Vec<String> = self
            .shadow
            .users
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != user)
            .flat_map(|(_, u)| u.personas.iter().cloned())
            .collect();
        let Some(name) = taken.choose(&mut self.rng).cloned() else {
            return false;
        };
        self.act(user, Op::ClaimPersona { name }, "persona_taken");
        true
    }

    fn update_traits(&mut self, user: usize) -> bool {
        let patch = random_patch(&mut self.rng);
        self.shadow.patch_traits(user, &patch);
        self.act(user, Op::UpdateTraits { patch }, "ok");
        true
    }

    fn review(&mut self) -> bool {
        let pending: Vec<usize> = (0..self.shadow.users.len())
            .filter(|u| self.shadow.users[*u].status == Status::Pending)
            .collect();
        let Some(&user) = pending.choose(&mut self.rng) else {
            return false;
        };
        let approve = self.rng.gen_bool(0.9);
        self.shadow
            .set_status(user, if approve { Status::Active } else { Status::Rejected });
        let op = Op::ReviewSignup {
            user: self.shadow.users[user].handle.clone(),
            decision: if approve { "approve" } else { "reject" }.into(),
        };
        self.act(MODERATOR, op, "ok");
        true
    }

    fn deactivate(&mut self, user: usize) -> bool {
        if self.active_members().len() <= 3 {
            return false;
        }
        self.shadow.set_status(user, Status::Deactivated);
        self.act(user, Op::Deactivate { user: None }, "ok");
        true
    }

    /// One random action; returns false when the choice did not apply.
    fn step(&mut self) -> bool {
        let members = self.active_members();
        let Some(&user) = members.choose(&mut self.rng) else {
            return self.review();
        };
        let roll = self.rng.gen_range(0..1000);
        match roll {
            0..=139 => {
                self.post(user);
                true
            }
            140..=599 => self.comment(user),
            600..=659 => self.restrict(user),
            660..=679 => self.widen(user),
            680..=719 => self.toggle(user),
            720..=749 => self.delete(user),
            750..=759 => self.moderate(),
            760..=799 => self.resolve_held(),
            800..=829 => self.probe_hidden(user),
            830..=849 => self.probe_mismatch(user),
            850..=859 => self.claim_taken(user),
            860..=889 => self.claim(user),
            890..=949 => self.update_traits(user),
            950..=984 => self.review(),
            985..=989 => self.deactivate(user),
            _ => {
                let boundary = if self.rng.gen_bool(0.5) {
                    Some(self.boundary(user, None)).filter(|b| b.get("other_info").is_none() && b.get("usernames_allowed").is_none())
                } else {
                    None
                };
                self.act(user, Op::SetDefaultBoundary { boundary }, "ok");
                true
            }
        }
    }

    fn finish(self, name: String, seed: u64, description: &str) -> Scenario {
        Scenario {
            header: Header {
                name,
                seed: Some(seed),
                description: description.to_string(),
            },
            steps: self.steps,
        }
    }
}

/// A random world: a moderator, `users` members and `actions` actions, a
/// few of which are expected to be refused.
pub fn generate(seed: u64, users: usize, actions: usize) -> Scenario {
    let mut g = Gen::new(
        seed,
        Style {
            strictness: 1.0,
            other_info: 0.04,
        },
    );
    g.users(users, 0.1);
    let mut made = 0;
    while made < actions {
        if g.step() {
            made += 1;
        }
    }
    g.finish(format!("fuzz-{seed}"), seed, "generated world")
}

pub const FIELD_USERS: usize = 46;
pub const FIELD_POSTS: usize = 18;
pub const FIELD_COMMENTS: usize = 139;

/// A deployment-sized world: 46 members and a moderator writing 18 posts
/// and 139 comments, all accepted.
pub fn field_study(seed: u64) -> Scenario {
    let mut g = Gen::new(
        seed,
        Style {
            strictness: 0.6,
            other_info: 0.0,
        },
    );
    g.users(FIELD_USERS, 0.0);
    let total = FIELD_POSTS + FIELD_COMMENTS;
    let mut posts = 0;
    let mut comments = 0;
    while posts + comments < total {
        // Posts are spread over the run so every thread gets replies.
        let due = posts * total <= (posts + comments) * FIELD_POSTS;
        let members = g.active_members();
        if posts < FIELD_POSTS && (due || comments == FIELD_COMMENTS) {
            let author = *members.choose(&mut g.rng).expect("members");
            g.post(author);
            posts += 1;
            continue;
        }
        let mut order = members.clone();
        order.shuffle(&mut g.rng);
        let done = order.into_iter().any(|u| g.comment(u));
        assert!(done, "nobody can see anything to reply to");
        comments += 1;
    }
    g.finish(format!("field-study-{seed}"), seed, "18 posts and 139 comments from 46 members")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_world() {
        assert_eq!(generate(7, 10, 60).to_jsonl(), generate(7, 10, 60).to_jsonl());
        assert_ne!(generate(7, 10, 60).to_jsonl(), generate(8, 10, 60).to_jsonl());
    }

    #[test]
    fn generated_text_parses_back() {
        let s = generate(3, 8, 80);
        assert_eq!(Scenario::parse(&s.to_jsonl()).unwrap(), s);
    }

    #[test]
    fn field_study_has_the_right_shape() {
        let s = field_study(1);
        assert_eq!(s.users().count(), FIELD_USERS + 1);
        let mut posts = 0;
        let mut comments = 0;
        for a in s.actions() {
            assert_eq!(a.expect, "ok");
            match a.op {
                Op::CreatePost { .. } => posts += 1,
                Op::CreateComment { .. } => comments += 1,
                _ => {}
            }
        }
        assert_eq!((posts, comments), (FIELD_POSTS, FIELD_COMMENTS));
    }
}
