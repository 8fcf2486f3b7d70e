//! Replay over the HTTP API, scanning every response a user receives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Seek, SeekFrom};
use std::path::PathBuf;

use consent_core::content::NodeView;
use consent_core::notify::OutboundEmail;
use consent_core::{AccountId, NodeId, ThreadId};
use consent_server::{RunningServer, ServerConfig, StartError};
use reqwest::blocking::Client;
use reqwest::Method;
use serde_json::{json, Value};

use crate::driver::{Call, Driver, NodePersona, Probe};
use crate::report::WireReport;
use crate::scenario::{Scenario, UserSpec};

const PASSWORD: &str = "replay-password-1";
const MAX_SAMPLES: usize = 10;

/// Email-shaped substrings: a local part, `@`, and a dotted domain.
pub fn find_emails(text: &str) -> Vec<String> {
    let local = |c: char| c.is_ascii_alphanumeric() || "._%+-".contains(c);
    let domain = |c: char| c.is_ascii_alphanumeric() || ".-".contains(c);
    let mut found = Vec::new();
    for (at, _) in text.match_indices('@') {
        let start = text[..at].rfind(|c: char| !local(c)).map_or(0, |i| i + 1);
        let end = text[at + 1..].find(|c: char| !domain(c)).map_or(text.len(), |i| at + 1 + i);
        let (user, host) = (&text[start..at], text[at + 1..end].trim_end_matches('.'));
        if !user.is_empty() && host.contains('.') && !host.starts_with('.') {
            found.push(format!("{user}@{host}"));
        }
    }
    found
}

/// Account ids (`acct-N`) mentioned in a response.
pub fn find_account_ids(text: &str) -> Vec<AccountId> {
    text.match_indices("acct-")
        .filter_map(|(i, m)| {
            let digits: String = text[i + m.len()..].chars().take_while(char::is_ascii_digit).collect();
            digits.parse().ok().map(AccountId)
        })
        .collect()
}

pub struct HttpDriver {
    base: String,
    client: Client,
    emails: BTreeMap<AccountId, String>,
    by_email: HashMap<String, AccountId>,
    tokens: HashMap<AccountId, String>,
    moderator: Option<AccountId>,
    threads: BTreeSet<ThreadId>,
    outbox: Option<PathBuf>,
    outbox_offset: u64,
    wire: WireReport,
    // Dropped last: the server must outlive the client calls above.
    _server: Option<RunningServer>,
    _dir: Option<tempfile::TempDir>,
}

impl HttpDriver {
    /// Talks to a server that is already running. Without an outbox path
    /// notifications cannot be observed.
    pub fn connect(base: &str, outbox: Option<PathBuf>) -> Self {
        let outbox_offset = outbox
            .as_ref()
            .and_then(|p| std::fs::metadata(p).ok())
            .map_or(0, |m| m.len());
        HttpDriver {
            base: base.trim_end_matches('/').to_string(),
            client: Client::new(),
            emails: BTreeMap::new(),
            by_email: HashMap::new(),
            tokens: HashMap::new(),
            moderator: None,
            threads: BTreeSet::new(),
            outbox,
            outbox_offset,
            wire: WireReport::default(),
            _server: None,
            _dir: None,
        }
    }

    /// Starts a private server on a free local port, configured for
    /// `scenario`, with mail written to a temporary outbox.
    pub fn embedded(scenario: &Scenario) -> Result<Self, StartError> {
        let dir = tempfile::tempdir().map_err(|source| StartError::Io {
            what: "temporary directory".into(),
            source,
        })?;
        let outbox = dir.path().join("outbox.jsonl");
        let config = ServerConfig {
            listen: "127.0.0.1:0".into(),
            allowed_domains: scenario.domains(),
            moderator_email: scenario.moderator_email(),
            outbox: Some(outbox.clone()),
            session_request_cap: u64::MAX,
            ..ServerConfig::default()
        };
        let server = consent_server::spawn(&config.listen, consent_server::build_state(&config)?)?;
        let mut driver = Self::connect(&server.url(), Some(outbox));
        driver._server = Some(server);
        driver._dir = Some(dir);
        Ok(driver)
    }

    fn scan(&mut self, own: Option<AccountId>, body: &str) {
        self.wire.responses_scanned += 1;
        let mut bad = false;
        let emails = find_emails(body);
        if !emails.is_empty() {
            self.wire.email_leaks += emails.len() as u64;
            bad = true;
        }
        let foreign = find_account_ids(body).into_iter().filter(|id| Some(*id) != own).count();
        if foreign > 0 {
            self.wire.foreign_account_ids += foreign as u64;
            bad = true;
        }
        if bad && self.wire.samples.len() < MAX_SAMPLES {
            self.wire.samples.push(body.chars().take(300).collect());
        }
    }

    fn raw(&self, token: Option<&str>, method: Method, path: &str, body: Option<&Value>) -> (u16, String) {
        let mut req = self.client.request(method, format!("{}{}", self.base, path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(b);
        }
        match req.send() {
            Ok(resp) => {
                let status = resp.status().as_u16();
                (status, resp.text().unwrap_or_default())
            }
            Err(e) => (0, json!({ "error": format!("transport: {e}") }).to_string()),
        }
    }

    fn token(&mut self, who: AccountId) -> Result<String, String> {
        if let Some(t) = self.tokens.get(&who) {
            return Ok(t.clone());
        }
        let email = self.emails.get(&who).cloned().ok_or("unknown_account")?;
        let (status, text) = self.raw(
            None,
            Method::POST,
            "/session",
            Some(&json!({ "email": email, "password": PASSWORD })),
        );
        self.scan(Some(who), &text);
        let v = decode(status, &text)?;
        let token = v["token"].as_str().ok_or("bad_session_response")?.to_string();
        self.tokens.insert(who, token.clone());
        Ok(token)
    }

    /// One authenticated request. Responses to anyone but the moderator
    /// are scanned for data that should never reach a user.
    fn call(&mut self, who: AccountId, method: Method, path: &str, body: Option<Value>) -> (u16, String) {
        let token = match self.token(who) {
            Ok(t) => t,
            Err(code) => return (403, json!({ "error": code }).to_string()),
        };
        let (status, text) = self.raw(Some(&token), method, path, body.as_ref());
        if Some(who) != self.moderator {
            self.scan(Some(who), &text);
        }
        (status, text)
    }

    fn request(&mut self, who: AccountId, method: Method, path: &str, body: Option<Value>) -> Result<Value, String> {
        let (status, text) = self.call(who, method, path, body);
        decode(status, &text)
    }

    fn node_result(&mut self, v: Value) -> Result<Option<NodeId>, String> {
        let view: NodeView = serde_json::from_value(v).map_err(|_| "bad_node_response".to_string())?;
        self.threads.insert(view.thread_id);
        Ok(Some(view.node_id))
    }
}

fn decode(status: u16, text: &str) -> Result<Value, String> {
    let v: Value = if text.is_empty() { Value::Null } else { serde_json::from_str(text).unwrap_or(Value::Null) };
    if (200..300).contains(&status) {
        Ok(v)
    } else {
        Err(v["error"].as_str().map(str::to_string).unwrap_or_else(|| format!("http_{status}")))
    }
}

fn nodes_of(v: Value) -> Result<Vec<NodeView>, String> {
    serde_json::from_value(v["nodes"].clone()).map_err(|_| "bad_nodes_response".to_string())
}

impl Driver for HttpDriver {
    fn mode(&self) -> &'static str {
        "http"
    }

    fn register(&mut self, user: &UserSpec) -> Result<AccountId, String> {
        let body = json!({
            "email": user.email(),
            "password": PASSWORD,
            "persona": user.persona(),
            "traits": user.traits,
        });
        let (status, text) = self.raw(None, Method::POST, "/register", Some(&body));
        let v = decode(status, &text)?;
        let id: AccountId = serde_json::from_value(v["account_id"].clone()).map_err(|_| "bad_register_response")?;
        self.scan(Some(id), &text);
        let email = user.email().to_ascii_lowercase();
        self.emails.insert(id, email.clone());
        self.by_email.insert(email, id);
        if user.moderator {
            self.moderator = Some(id);
        }
        Ok(id)
    }

    fn apply(&mut self, actor: AccountId, call: &Call) -> Result<Option<NodeId>, String> {
        use Method as M;
        match call {
            Call::ClaimPersona(name) => self.request(actor, M::POST, "/personas", Some(json!({ "name": name }))).map(|_| None),
            Call::UpdateTraits(patch) => {
                self.request(actor, M::PATCH, "/account", Some(json!({ "traits": patch }))).map(|_| None)
            }
            Call::SetDefaultBoundary(b) => self
                .request(actor, M::PATCH, "/account", Some(json!({ "default_boundary": b })))
                .map(|_| None),
            Call::CreatePost { persona, body, boundary } => {
                let req = json!({ "persona": persona, "body": body, "boundary": boundary });
                let v = self.request(actor, M::POST, "/posts", Some(req))?;
                self.node_result(v)
            }
            Call::CreateComment {
                parent,
                persona,
                body,
                boundary,
            } => {
                let req = json!({ "persona": persona, "body": body, "boundary": boundary });
                let v = self.request(actor, M::POST, &format!("/posts/{parent}/comments"), Some(req))?;
                self.node_result(v)
            }
            Call::Restrict { node, boundary } => self
                .request(actor, M::PATCH, &format!("/nodes/{node}/boundary"), Some(json!({ "boundary": boundary })))
                .map(|_| None),
            Call::SetVisibility { node, show } => self
                .request(
                    actor,
                    M::PATCH,
                    &format!("/nodes/{node}/boundary-visibility"),
                    Some(json!({ "show_boundary": show })),
                )
                .map(|_| None),
            Call::Delete(node) => self.request(actor, M::DELETE, &format!("/nodes/{node}"), None).map(|_| None),
            Call::ModerateRemove { node, reason } => self
                .request(actor, M::DELETE, &format!("/mod/nodes/{node}"), Some(json!({ "reason": reason })))
                .map(|_| None),
            Call::Resolve { node, recipients } => self
                .request(
                    actor,
                    M::POST,
                    &format!("/mod/nodes/{node}/resolve"),
                    Some(json!({ "recipients": recipients })),
                )
                .map(|_| None),
            Call::ReviewSignup { account, decision } => self
                .request(
                    actor,
                    M::POST,
                    &format!("/mod/signups/{account}"),
                    Some(json!({ "decision": decision })),
                )
                .map(|_| None),
            Call::Deactivate(target) if *target == actor => {
                self.request(actor, M::DELETE, "/account", None).map(|_| None)
            }
            Call::Deactivate(target) => self
                .request(actor, M::POST, &format!("/mod/accounts/{target}/deactivate"), None)
                .map(|_| None),
        }
    }

    fn audience(&mut self, node: NodeId) -> Option<BTreeSet<AccountId>> {
        let moderator = self.moderator?;
        let v = self.request(moderator, Method::GET, &format!("/mod/nodes/{node}/audience"), None).ok()?;
        serde_json::from_value(v["audience"].clone()).ok()
    }

    fn feed(&mut self, viewer: AccountId) -> Result<Vec<NodeView>, String> {
        nodes_of(self.request(viewer, Method::GET, "/feed", None)?)
    }

    fn thread(&mut self, viewer: AccountId, thread: ThreadId) -> Result<Vec<NodeView>, String> {
        nodes_of(self.request(viewer, Method::GET, &format!("/threads/{thread}"), None)?)
    }

    fn drain_notifications(&mut self) -> BTreeMap<NodeId, BTreeSet<AccountId>> {
        let mut out: BTreeMap<NodeId, BTreeSet<AccountId>> = BTreeMap::new();
        let Some(path) = &self.outbox else { return out };
        let Ok(mut file) = std::fs::File::open(path) else { return out };
        let mut text = String::new();
        if file.seek(SeekFrom::Start(self.outbox_offset)).is_err() || file.read_to_string(&mut text).is_err() {
            return out;
        }
        // Only whole lines; a partly written message is picked up next time.
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        self.outbox_offset += complete as u64;
        for line in text[..complete].lines() {
            let Ok(mail) = serde_json::from_str::<OutboundEmail>(line) else { continue };
            let node = mail
                .body
                .rsplit_once("#node-")
                .and_then(|(_, rest)| rest.trim().parse().ok())
                .map(NodeId);
            let who = self.by_email.get(&mail.address.to_ascii_lowercase()).copied();
            if let (Some(node), Some(who)) = (node, who) {
                out.entry(node).or_default().insert(who);
            }
        }
        out
    }

    /// Read from the moderator's thread views, so held and deleted nodes
    /// are not covered.
    fn node_personas(&mut self) -> Vec<NodePersona> {
        let Some(moderator) = self.moderator else { return Vec::new() };
        let threads: Vec<ThreadId> = self.threads.iter().copied().collect();
        let mut out = Vec::new();
        for t in threads {
            if let Ok(views) = self.thread(moderator, t) {
                out.extend(views.into_iter().map(|v| NodePersona {
                    node: v.node_id,
                    thread: v.thread_id,
                    persona: v.persona.to_string(),
                }));
            }
        }
        out
    }

    fn probe(&mut self, viewer: AccountId, probe: Probe) -> Option<(u16, String)> {
        Some(match probe {
            Probe::Thread(t) => self.call(viewer, Method::GET, &format!("/threads/{t}"), None),
            Probe::Comment(n) => self.call(
                viewer,
                Method::POST,
                &format!("/posts/{n}/comments"),
                Some(json!({ "body": "probe" })),
            ),
            Probe::LastUsedBoundary(n) => self.call(viewer, Method::GET, &format!("/nodes/{n}/last-used-boundary"), None),
        })
    }

    fn wire(&self) -> Option<WireReport> {
        Some(self.wire.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn email_scanner() {
        assert_eq!(find_emails(r#"{"a":"x@univ.edu"}"#), ["x@univ.edu"]);
        assert!(find_emails("reply to @abc123, or @river21.").is_empty());
        assert_eq!(find_emails("mail a.b+c@cs.state.edu."), ["a.b+c@cs.state.edu"]);
    }

    #[test]
    fn account_id_scanner() {
        assert_eq!(find_account_ids(r#"["acct-3","acct-12"] acct-x"#), [AccountId(3), AccountId(12)]);
    }
}
