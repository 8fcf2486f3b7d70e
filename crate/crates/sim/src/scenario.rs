//! Scenario files: one JSON object per line, tagged by `kind`.
//!
//! See `SCENARIOS.md` next to this crate for the full schema.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Line {
    Header(Header),
    User(UserSpec),
    Action(Action),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    /// Scenario-local name used by actions. Defaults the persona and email.
    pub handle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<String>,
    #[serde(default = "empty_object", skip_serializing_if = "is_empty_object")]
    pub traits: Value,
    /// Further personas claimed right after approval.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub personas: Vec<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub moderator: bool,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub approve: bool,
}

impl UserSpec {
    pub fn new(handle: &str, traits: Value) -> Self {
        UserSpec {
            handle: handle.to_string(),
            email: None,
            persona: None,
            traits,
            personas: Vec::new(),
            moderator: false,
            approve: true,
        }
    }

    pub fn email(&self) -> String {
        self.email.clone().unwrap_or_else(|| format!("{}@univ.edu", self.handle))
    }

    pub fn persona(&self) -> String {
        self.persona.clone().unwrap_or_else(|| self.handle.clone())
    }
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

fn is_empty_object(v: &Value) -> bool {
    v.as_object().is_some_and(|m| m.is_empty())
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_true(b: &bool) -> bool {
    *b
}

fn yes() -> bool {
    true
}

pub const OK: &str = "ok";

fn ok() -> String {
    OK.to_string()
}

fn is_ok(s: &String) -> bool {
    s == OK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub actor: String,
    #[serde(flatten)]
    pub op: Op,
    /// `ok`, or the error code the action must fail with.
    #[serde(default = "ok", skip_serializing_if = "is_ok")]
    pub expect: String,
}

/// Node references are scenario-local labels. A label that was never
/// defined stands for a node id that does not exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    ClaimPersona {
        name: String,
    },
    UpdateTraits {
        patch: Value,
    },
    SetDefaultBoundary {
        boundary: Option<Value>,
    },
    CreatePost {
        node: String,
        persona: String,
        #[serde(default)]
        body: String,
        #[serde(default = "empty_object")]
        boundary: Value,
    },
    CreateComment {
        node: String,
        parent: String,
        persona: String,
        #[serde(default)]
        body: String,
        #[serde(default = "empty_object")]
        boundary: Value,
    },
    Restrict {
        target: String,
        boundary: Value,
    },
    SetBoundaryVisibility {
        target: String,
        show: bool,
    },
    Delete {
        target: String,
    },
    ModerateRemove {
        target: String,
        #[serde(default)]
        reason: String,
    },
    ResolveOtherInfo {
        target: String,
        recipients: Vec<String>,
    },
    ReviewSignup {
        user: String,
        decision: String,
    },
    /// Deactivates `user`, or the actor when absent.
    Deactivate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user: Option<String>,
    },
    /// Asserts the node's current audience, as user handles.
    ExpectAudience {
        target: String,
        audience: Vec<String>,
    },
    /// Asserts who was notified when the node was published.
    ExpectRecipients {
        target: String,
        recipients: Vec<String>,
    },
    /// Asserts the actor's feed, newest first.
    ExpectFeed {
        nodes: Vec<String>,
    },
    /// Asserts the actor's view of the thread containing `target`, in
    /// display order. An empty list means the thread is not found.
    ExpectThread {
        target: String,
        nodes: Vec<String>,
    },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::ClaimPersona { .. } => "claim_persona",
            Op::UpdateTraits { .. } => "update_traits",
            Op::SetDefaultBoundary { .. } => "set_default_boundary",
            Op::CreatePost { .. } => "create_post",
            Op::CreateComment { .. } => "create_comment",
            Op::Restrict { .. } => "restrict",
            Op::SetBoundaryVisibility { .. } => "set_boundary_visibility",
            Op::Delete { .. } => "delete",
            Op::ModerateRemove { .. } => "moderate_remove",
            Op::ResolveOtherInfo { .. } => "resolve_other_info",
            Op::ReviewSignup { .. } => "review_signup",
            Op::Deactivate { .. } => "deactivate",
            Op::ExpectAudience { .. } => "expect_audience",
            Op::ExpectRecipients { .. } => "expect_recipients",
            Op::ExpectFeed { .. } => "expect_feed",
            Op::ExpectThread { .. } => "expect_thread",
        }
    }

    pub fn is_assertion(&self) -> bool {
        matches!(
            self,
            Op::ExpectAudience { .. } | Op::ExpectRecipients { .. } | Op::ExpectFeed { .. } | Op::ExpectThread { .. }
        )
    }
}

/// A scenario line with its 1-based position in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Numbered<T> {
    pub line: usize,
    pub item: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    User(UserSpec),
    Action(Action),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub header: Header,
    pub steps: Vec<Numbered<Step>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut scenario = Scenario::default();
        let mut handles = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(trimmed).map_err(|source| ScenarioError::Parse { line, source })?;
            let invalid = |message: String| ScenarioError::Invalid { line, message };
            match parsed {
                Line::Header(h) => {
                    if !scenario.steps.is_empty() {
                        return Err(invalid("header must come before users and actions".into()));
                    }
                    scenario.header = h;
                }
                Line::User(u) => {
                    if !handles.insert(u.handle.clone()) {
                        return Err(invalid(format!("duplicate user handle {:?}", u.handle)));
                    }
                    scenario.steps.push(Numbered { line, item: Step::User(u) });
                }
                Line::Action(a) => {
                    if !handles.contains(&a.actor) {
                        return Err(invalid(format!("unknown actor {:?}", a.actor)));
                    }
                    scenario.steps.push(Numbered {
                        line,
                        item: Step::Action(a),
                    });
                }
            }
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serialises back to the line format. Parsing the output gives an
    /// equal scenario, up to line numbers.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let line = |l: &Line| serde_json::to_string(l).expect("scenario lines serialise");
        if !self.header.name.is_empty() || self.header.seed.is_some() {
            writeln!(out, "{}", line(&Line::Header(self.header.clone()))).unwrap();
        }
        for step in &self.steps {
            let l = match &step.item {
                Step::User(u) => Line::User(u.clone()),
                Step::Action(a) => Line::Action(a.clone()),
            };
            writeln!(out, "{}", line(&l)).unwrap();
        }
        out
    }

    pub fn users(&self) -> impl Iterator<Item = &UserSpec> {
        self.steps.iter().filter_map(|s| match &s.item {
            Step::User(u) => Some(u),
            _ => None,
        })
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.steps.iter().filter_map(|s| match &s.item {
            Step::Action(a) => Some(a),
            _ => None,
        })
    }

    /// The moderator account's email, if the scenario declares one.
    pub fn moderator_email(&self) -> Option<String> {
        self.users().find(|u| u.moderator).map(UserSpec::email)
    }

    /// Email domains used by the scenario's users.
    pub fn domains(&self) -> Vec<String> {
        let mut domains: Vec<String> = self
            .users()
            .filter_map(|u| u.email().rsplit_once('@').map(|(_, d)| d.to_ascii_lowercase()))
            .collect();
        domains.sort();
        domains.dedup();
        domains
    }
}
