use std::path::Path;

use consent_server::{build_state, spawn, RunningServer, ServerConfig};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

fn config(dir: &Path) -> ServerConfig {
    ServerConfig {
        listen: "127.0.0.1:0".into(),
        data_dir: Some(dir.join("data")),
        allowed_domains: vec!["univ.edu".into()],
        moderator_email: Some("mod@univ.edu".into()),
        outbox: Some(dir.join("outbox.jsonl")),
        audit_log: Some(dir.join("audit.jsonl")),
        session_request_cap: 200,
        ..Default::default()
    }
}

fn start(config: &ServerConfig) -> RunningServer {
    spawn(&config.listen, build_state(config).unwrap()).unwrap()
}

struct Api {
    base: String,
    http: Client,
}

struct Resp {
    status: StatusCode,
    body: Value,
    text: String,
}

impl Api {
    fn new(server: &RunningServer) -> Self {
        Api {
            base: server.url(),
            http: Client::new(),
        }
    }

    fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<Value>) -> Resp {
        let mut req = self
            .http
            .request(method.parse().unwrap(), format!("{}{}", self.base, path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let res = req.send().unwrap();
        let status = res.status();
        let text = res.text().unwrap();
        let body = serde_json::from_str(&text).unwrap_or(Value::Null);
        Resp { status, body, text }
    }

    fn register(&self, persona: &str, traits: Value) -> String {
        let r = self.call(
            "POST",
            "/register",
            None,
            Some(json!({"email": format!("{persona}@univ.edu"), "password": "hunter2hunter2",
                        "persona": persona, "traits": traits})),
        );
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        r.body["account_id"].as_str().unwrap().to_string()
    }

    fn login(&self, email: &str) -> Resp {
        self.call("POST", "/session", None, Some(json!({"email": email, "password": "hunter2hunter2"})))
    }

    fn token(&self, email: &str) -> String {
        let r = self.login(email);
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        r.body["token"].as_str().unwrap().to_string()
    }

    /// Registers, approves and logs in a user.
    fn user(&self, moderator: &str, persona: &str, traits: Value) -> (String, String) {
        let id = self.register(persona, traits);
        let r = self.call("POST", &format!("/mod/signups/{id}"), Some(moderator), Some(json!({"decision": "approve"})));
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        (id, self.token(&format!("{persona}@univ.edu")))
    }
}

fn moderator(api: &Api) -> String {
    let r = api.call(
        "POST",
        "/register",
        None,
        Some(json!({"email": "mod@univ.edu", "password": "hunter2hunter2", "persona": "moderator"})),
    );
    assert_eq!(r.body["status"], "active");
    api.token("mod@univ.edu")
}

#[test]
fn end_to_end_flow_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(&config(dir.path()));
    let api = Api::new(&server);
    let m = moderator(&api);

    // Sign-up review gates login.
    let pending = api.register("po1r3", json!({"international": true, "current_advisors": ["ana-lima"],
        "prior_advisors": [], "challenges_experienced": ["communication-issue"]}));
    assert_eq!(api.login("po1r3@univ.edu").status, StatusCode::FORBIDDEN);
    let q = api.call("GET", "/mod/queue", Some(&m), None);
    assert_eq!(q.body["pending_signups"].as_array().unwrap().len(), 1);
    api.call("POST", &format!("/mod/signups/{pending}"), Some(&m), Some(json!({"decision": "approve"})));
    let author = api.token("po1r3@univ.edu");
    let (_, reader) = api.user(&m, "phding", json!({"international": true, "current_advisors": ["jane-doe"],
        "prior_advisors": [], "challenges_experienced": ["lack-of-feedback"]}));
    let (_, outsider) = api.user(&m, "outsider", json!({}));

    let boundary = json!({"require_international": true, "not_advised_by": ["john-smith"],
        "challenges_any": ["communication-issue", "lack-of-feedback"], "show_boundary": true,
        "show_to_parent_author": true});
    let post = api.call("POST", "/posts", Some(&author), Some(json!({"body": "advice wanted", "boundary": boundary})));
    assert_eq!(post.status, StatusCode::CREATED, "{}", post.text);
    let thread = post.body["thread_id"].as_u64().unwrap();
    let node = post.body["node_id"].as_u64().unwrap();

    let seen = api.call("GET", &format!("/threads/{thread}"), Some(&reader), None);
    assert_eq!(seen.status, StatusCode::OK);
    assert_eq!(seen.body["nodes"][0]["boundary"], boundary);

    // Invisible and nonexistent look the same.
    let hidden = api.call("GET", &format!("/threads/{thread}"), Some(&outsider), None);
    let missing = api.call("GET", "/threads/999", Some(&outsider), None);
    let garbage = api.call("GET", "/threads/abc", Some(&outsider), None);
    for r in [&hidden, &missing, &garbage] {
        assert_eq!(r.status, StatusCode::NOT_FOUND);
        assert_eq!(r.text, hidden.text);
    }
    let hidden_reply = api.call("POST", &format!("/posts/{node}/comments"), Some(&outsider), Some(json!({"body": "x"})));
    assert_eq!((hidden_reply.status, &hidden_reply.text), (StatusCode::NOT_FOUND, &hidden.text));

    let reply = api.call("POST", &format!("/posts/{node}/comments"), Some(&reader), Some(json!({"body": "me too"})));
    assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.text);
    assert_eq!(reply.body["persona"], "phding");
    // The reply took the reader's last-used boundary: public, as nothing was used yet.
    assert!(reply.body.get("boundary").is_none());

    let widen = api.call("PATCH", &format!("/nodes/{node}/boundary"), Some(&author), Some(json!({"boundary": {}})));
    assert_eq!((widen.status, widen.body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("widening_violation")));
    let not_mine = api.call("PATCH", &format!("/nodes/{node}/boundary-visibility"), Some(&reader), Some(json!({"show_boundary": false})));
    assert_eq!(not_mine.status, StatusCode::FORBIDDEN);
    let off = api.call("PATCH", &format!("/nodes/{node}/boundary-visibility"), Some(&author), Some(json!({"show_boundary": false})));
    assert_eq!(off.status, StatusCode::OK);
    let seen = api.call("GET", &format!("/threads/{thread}"), Some(&reader), None);
    assert!(seen.body["nodes"][0].get("boundary").is_none());

    let last = api.call("GET", &format!("/nodes/{node}/last-used-boundary"), Some(&author), None);
    assert_eq!(last.body["boundary"]["require_international"], true);

    // Mail went to the audience only.
    let outbox = std::fs::read_to_string(dir.path().join("outbox.jsonl")).unwrap();
    let to: Vec<String> = outbox
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["address"].as_str().unwrap().to_string())
        .collect();
    assert!(to.contains(&"phding@univ.edu".to_string()));
    assert!(!to.contains(&"outsider@univ.edu".to_string()));

    // Non-moderator responses never carry addresses.
    for (token, path) in [(&reader, "/feed"), (&reader, "/account"), (&reader, &format!("/threads/{thread}") as &str)] {
        let r = api.call("GET", path, Some(token), None);
        assert!(!r.text.contains('@'), "{path}: {}", r.text);
    }

    let del = api.call("DELETE", &format!("/mod/nodes/{node}"), Some(&m), Some(json!({"reason": "test"})));
    assert_eq!(del.status, StatusCode::NO_CONTENT);
    assert_eq!(api.call("GET", "/feed", Some(&reader), None).body["nodes"], json!([]));
    let audit = std::fs::read_to_string(dir.path().join("audit.jsonl")).unwrap();
    assert!(audit.lines().any(|l| l.contains("remove_node") && l.contains("\"test\"")));
}

#[test]
fn status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(&config(dir.path()));
    let api = Api::new(&server);
    let m = moderator(&api);
    let (_, a) = api.user(&m, "alpha", json!({}));

    assert_eq!(api.call("GET", "/feed", None, None).status, StatusCode::UNAUTHORIZED);
    assert_eq!(api.call("GET", "/feed", Some("bogus"), None).status, StatusCode::UNAUTHORIZED);
    assert_eq!(api.call("GET", "/mod/queue", Some(&a), None).status, StatusCode::FORBIDDEN);
    let taken = api.call("POST", "/personas", Some(&a), Some(json!({"name": "moderator"})));
    assert_eq!((taken.status, taken.body["error"].as_str()), (StatusCode::CONFLICT, Some("persona_taken")));
    let bad = api.call("POST", "/personas", Some(&a), Some(json!({"name": "a b!"})));
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    let ok = api.call("POST", "/personas", Some(&a), Some(json!({"name": "Alpha_Two"})));
    assert_eq!((ok.status, ok.body["name"].as_str()), (StatusCode::CREATED, Some("alpha_two")));
    let gated = api.call("POST", "/posts", Some(&a), Some(json!({"body": "x", "boundary": {"gender_allowed": ["woman"]}})));
    assert_eq!(gated.body["error"], "identity_not_held");
    let malformed = api.call("POST", "/posts", Some(&a), Some(json!({"body": "x", "boundary": {"colour": 1}})));
    assert_eq!(malformed.status, StatusCode::UNPROCESSABLE_ENTITY);
    let gmail = api.call("POST", "/register", None, Some(json!({"email": "x@gmail.com", "password": "longenough", "persona": "xyz"})));
    assert_eq!(gmail.body["error"], "domain_not_allowed");
    let weak = api.call("POST", "/register", None, Some(json!({"email": "y@univ.edu", "password": "short", "persona": "yyy"})));
    assert_eq!(weak.body["error"], "weak_password");
    let wrong = api.call("POST", "/session", None, Some(json!({"email": "alpha@univ.edu", "password": "nope-nope"})));
    assert_eq!(wrong.status, StatusCode::UNAUTHORIZED);
    assert_eq!(api.call("GET", "/no/such/route", Some(&a), None).status, StatusCode::NOT_FOUND);

    let vocab = api.call("GET", "/vocab", Some(&a), None);
    assert!(vocab.body["challenges"].as_array().unwrap().iter().any(|c| c["id"] == "lack-of-feedback"));

    let patched = api.call(
        "PATCH",
        "/account",
        Some(&a),
        Some(json!({"traits": {"international": true}, "default_boundary": {"require_international": true}})),
    );
    assert_eq!(patched.status, StatusCode::OK, "{}", patched.text);
    assert_eq!(patched.body["default_boundary"]["require_international"], true);
    let cleared = api.call("PATCH", "/account", Some(&a), Some(json!({"default_boundary": null})));
    assert_eq!(cleared.body["default_boundary"], Value::Null);
}

#[test]
fn session_cap_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.session_request_cap = 3;
    let server = start(&cfg);
    let api = Api::new(&server);
    let m = moderator(&api);
    for _ in 0..3 {
        assert_eq!(api.call("GET", "/account", Some(&m), None).status, StatusCode::OK);
    }
    assert_eq!(api.call("GET", "/account", Some(&m), None).status, StatusCode::TOO_MANY_REQUESTS);
    let fresh = api.token("mod@univ.edu");
    assert_eq!(api.call("GET", "/account", Some(&fresh), None).status, StatusCode::OK);
}

#[test]
fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let node = {
        let server = start(&cfg);
        let api = Api::new(&server);
        let m = moderator(&api);
        let (_, a) = api.user(&m, "alpha", json!({}));
        api.call("POST", "/posts", Some(&a), Some(json!({"body": "persisted"}))).body["node_id"].clone()
    };
    let server = start(&cfg);
    let api = Api::new(&server);
    let a = api.token("alpha@univ.edu");
    let feed = api.call("GET", "/feed", Some(&a), None);
    assert_eq!(feed.body["nodes"][0]["node_id"], node);
    assert_eq!(feed.body["nodes"][0]["body"], "persisted");
}
