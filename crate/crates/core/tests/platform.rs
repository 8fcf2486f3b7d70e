mod common;

use std::collections::BTreeSet;

use common::{boundary, World};
use consent_core::content::NodeState;
use consent_core::identity::SignupDecision;
use consent_core::notify::NotificationKind;
use consent_core::{AccountId, ConsentBoundary, ErrorClass, Platform, PlatformConfig, TraitPatch, TraitProfile};
use serde_json::json;

fn restricted_post_boundary() -> ConsentBoundary {
    boundary(json!({
        "require_international": true,
        "not_advised_by": ["john-smith"],
        "challenges_any": ["communication-issue", "lack-of-feedback"],
        "show_boundary": true
    }))
}

fn ids(v: &[AccountId]) -> BTreeSet<AccountId> {
    v.iter().copied().collect()
}

#[test]
fn restricted_post_reaches_exactly_the_matching_users() {
    let w = World::new();
    let author = w.user_json(
        "po1r3",
        json!({"international": true, "current_advisors": ["ana-lima"], "prior_advisors": [],
               "challenges_experienced": ["communication-issue"]}),
    );
    let phding = w.user_json(
        "phding",
        json!({"international": true, "current_advisors": ["jane-doe"], "prior_advisors": [],
               "challenges_experienced": ["lack-of-feedback"]}),
    );
    let advised_by_smith = w.user_json(
        "smithstudent",
        json!({"international": true, "current_advisors": ["john-smith"], "prior_advisors": [],
               "challenges_experienced": ["communication-issue", "lack-of-feedback"]}),
    );
    let undeclared_intl = w.user_json(
        "quietone",
        json!({"current_advisors": ["jane-doe"], "prior_advisors": [],
               "challenges_experienced": ["lack-of-feedback"]}),
    );

    let post = w.platform.create_post(author, "po1r3", "advice wanted", restricted_post_boundary()).unwrap();
    assert_eq!(post.state, NodeState::Published);
    let audience = w.platform.audience(post.id).unwrap().into_inner();
    assert_eq!(audience, ids(&[w.moderator, author, phding]));

    assert_eq!(w.platform.get_feed(phding).unwrap().len(), 1);
    assert!(w.platform.get_feed(advised_by_smith).unwrap().is_empty());
    assert!(w.platform.get_feed(undeclared_intl).unwrap().is_empty());

    let events = w.platform.notifications();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, NotificationKind::NewPost);
    assert_eq!(events[0].recipients, ids(&[w.moderator, phding]));
    let addresses: Vec<_> = w.outbox.messages().into_iter().map(|m| m.address).collect();
    assert_eq!(addresses, ["mod@univ.edu", "phding@univ.edu"]);

    // Shown to the audience because the author opted in.
    let thread = w.platform.get_thread(phding, post.thread).unwrap();
    assert_eq!(thread[0].boundary.as_ref(), Some(&restricted_post_boundary()));
    let err = w.platform.get_thread(advised_by_smith, post.thread).unwrap_err();
    assert_eq!(err.class(), ErrorClass::NotFound);
}

#[test]
fn identity_dimensions_require_the_author_to_hold_them() {
    let w = World::new();
    let a = w.user("nogender", TraitProfile::default());
    let err = w
        .platform
        .create_post(a, "nogender", "hi", boundary(json!({"gender_allowed": ["woman"]})))
        .unwrap_err();
    assert_eq!(err.code(), "identity_not_held");
    let err = w
        .platform
        .create_post(a, "nogender", "hi", boundary(json!({"challenges_any": []})))
        .unwrap_err();
    assert_eq!(err.code(), "empty_restriction");
    let err = w
        .platform
        .create_post(a, "nogender", "hi", boundary(json!({"advised_by_any": ["nobody-here"]})))
        .unwrap_err();
    assert_eq!(err.code(), "unknown_vocabulary_id");
}

#[test]
fn commenting_needs_a_visible_parent_and_one_persona_per_thread() {
    let w = World::new();
    let intl = json!({"international": true});
    let a = w.user_json("abc123", intl.clone());
    let b = w.user_json("river21", intl);
    let outsider = w.user("outsider", TraitProfile::default());
    w.platform.claim_persona(b, "happyphdstudent").unwrap();

    let post = w
        .platform
        .create_post(a, "abc123", "post", boundary(json!({"require_international": true})))
        .unwrap();
    let err = w
        .platform
        .create_comment(outsider, "outsider", post.id, "hi", ConsentBoundary::public())
        .unwrap_err();
    assert_eq!(err.code(), "parent_not_visible");
    assert_eq!(err.class(), ErrorClass::NotFound);

    w.platform
        .create_comment(b, "happyphdstudent", post.id, "first", ConsentBoundary::public())
        .unwrap();
    w.platform
        .create_comment(b, "happyphdstudent", post.id, "again", ConsentBoundary::public())
        .unwrap();
    let err = w
        .platform
        .create_comment(b, "river21", post.id, "switch", ConsentBoundary::public())
        .unwrap_err();
    assert_eq!(err.code(), "persona_mismatch");
    let err = w
        .platform
        .create_comment(b, "abc123", post.id, "steal", ConsentBoundary::public())
        .unwrap_err();
    assert_eq!(err.code(), "invalid_persona");

    // Usernames must come from the thread.
    let err = w
        .platform
        .create_comment(
            a,
            "abc123",
            post.id,
            "to ghost",
            boundary(json!({"usernames_allowed": ["ghost99"]})),
        )
        .unwrap_err();
    assert_eq!(err.code(), "username_not_in_thread");
}

#[test]
fn comment_notifications_go_to_participants_in_the_audience() {
    let w = World::new();
    let a = w.user("abc123", TraitProfile::default());
    let b = w.user("river21", TraitProfile::default());
    let c = w.user("third", TraitProfile::default());
    let bystander = w.user("bystander", TraitProfile::default());
    let post = w.platform.create_post(a, "abc123", "post", ConsentBoundary::public()).unwrap();
    w.platform.create_comment(b, "river21", post.id, "b", ConsentBoundary::public()).unwrap();
    w.platform.create_comment(c, "third", post.id, "c", ConsentBoundary::public()).unwrap();
    let events = w.platform.notifications();
    assert_eq!(events[2].recipients, ids(&[a, b]));

    // Restricted to one persona: only that participant hears about it.
    let only_abc = boundary(json!({"usernames_allowed": ["abc123"], "show_to_parent_author": false}));
    let n = w.platform.create_comment(b, "river21", post.id, "psst", only_abc).unwrap();
    let last = w.platform.notifications().pop().unwrap();
    assert_eq!(last.node_id, n.id);
    assert_eq!(last.recipients, ids(&[a]));
    assert!(!last.recipients.contains(&c));
    assert!(!last.recipients.contains(&bystander));
    let to_c = w.outbox.messages().into_iter().filter(|m| m.address == "third@univ.edu").count();
    assert_eq!(to_c, 1, "only the post notification reached the excluded participant");
}

#[test]
fn restriction_sequence_shrinks_audiences_silently() {
    let w = World::new();
    let p6 = w.user_json("pp6", json!({"races": ["asian"], "advising_status_changed": true}));
    let asian_switched = w.user_json("uu1", json!({"races": ["asian"], "advising_status_changed": true}));
    let asian = w.user_json("uu2", json!({"races": ["asian"], "advising_status_changed": false}));
    let other = w.user_json("uu3", json!({"races": ["white"]}));
    let poster = w.user("poster", TraitProfile::default());

    let post = w.platform.create_post(poster, "poster", "p", ConsentBoundary::public()).unwrap();
    let reply = w
        .platform
        .create_comment(other, "uu3", post.id, "first", ConsentBoundary::public())
        .unwrap();
    let comment = w
        .platform
        .create_comment(p6, "pp6", reply.id, "mine", ConsentBoundary::public())
        .unwrap();
    let sent = w.platform.notifications().len();
    let mails = w.outbox.messages().len();

    let before = w.platform.audience(comment.id).unwrap().into_inner();
    let step1 = boundary(json!({"races_allowed": ["asian"]}));
    w.platform.restrict_node_boundary(p6, comment.id, step1).unwrap();
    let mid = w.platform.audience(comment.id).unwrap().into_inner();
    let step2 = boundary(json!({"races_allowed": ["asian"], "require_advising_change": true}));
    w.platform.restrict_node_boundary(p6, comment.id, step2.clone()).unwrap();
    let after = w.platform.audience(comment.id).unwrap().into_inner();

    assert!(mid.is_subset(&before) && mid.len() < before.len());
    assert!(after.is_subset(&mid) && after.len() < mid.len());
    assert!(after.contains(&asian_switched) && !after.contains(&asian));
    // The parent's author keeps the reply-to grant.
    assert!(after.contains(&other));
    assert_eq!(w.platform.notifications().len(), sent);
    assert_eq!(w.outbox.messages().len(), mails);

    let err = w
        .platform
        .restrict_node_boundary(p6, comment.id, ConsentBoundary::public())
        .unwrap_err();
    assert_eq!(err.code(), "widening_violation");
    let err = w.platform.restrict_node_boundary(other, comment.id, step2).unwrap_err();
    assert_eq!(err.code(), "not_author");

    let node = w.platform.read(|s| s.content().node(comment.id).unwrap().clone());
    assert_eq!(node.boundary_history.len(), 3);
}

#[test]
fn excluded_replier_loses_the_post_and_their_own_reply() {
    let w = World::new();
    let author = w.user_json("author", json!({"international": true}));
    let replier = w.user_json("replier", json!({"international": false}));
    let post = w.platform.create_post(author, "author", "p", ConsentBoundary::public()).unwrap();
    let reply = w
        .platform
        .create_comment(replier, "replier", post.id, "r", ConsentBoundary::public())
        .unwrap();
    w.platform
        .restrict_node_boundary(author, post.id, boundary(json!({"require_international": true})))
        .unwrap();
    assert!(w.platform.get_feed(replier).unwrap().is_empty());
    assert!(!w.platform.audience(reply.id).unwrap().contains(&replier));
    assert_eq!(
        w.platform.get_thread(replier, post.thread).unwrap_err().class(),
        ErrorClass::NotFound
    );
    // The author can still withdraw the reply.
    w.platform.delete_node(replier, reply.id).unwrap();
}

#[test]
fn held_nodes_wait_for_moderator_resolution() {
    let w = World::new();
    let author = w.user_json("author", json!({"international": true}));
    let intl1 = w.user_json("intl1", json!({"international": true}));
    let intl2 = w.user_json("intl2", json!({"international": true}));
    let domestic = w.user_json("domestic", json!({"international": false}));
    let b = boundary(json!({"require_international": true, "other_info": "students in my lab cohort"}));
    let post = w.platform.create_post(author, "author", "held", b).unwrap();
    assert_eq!(post.state, NodeState::Held);
    assert!(w.platform.notifications().is_empty());
    assert!(w.platform.get_feed(intl1).unwrap().is_empty());
    assert!(w.platform.get_feed(author).unwrap().is_empty());
    let err = w
        .platform
        .create_comment(intl1, "intl1", post.id, "x", ConsentBoundary::public())
        .unwrap_err();
    assert_eq!(err.class(), ErrorClass::NotFound);

    let queue = w.platform.list_queue(w.moderator).unwrap();
    assert_eq!(queue.held_nodes.len(), 1);
    assert_eq!(
        w.platform.list_queue(intl1).unwrap_err().code(),
        "not_moderator"
    );

    let err = w
        .platform
        .resolve_other_info(w.moderator, post.id, [AccountId(999)].into())
        .unwrap_err();
    assert_eq!(err.code(), "unknown_account");

    let chosen: BTreeSet<_> = [intl1, domestic, author].into();
    w.platform.resolve_other_info(w.moderator, post.id, chosen).unwrap();
    let audience = w.platform.audience(post.id).unwrap().into_inner();
    assert_eq!(audience, ids(&[w.moderator, author, intl1]));
    assert!(!audience.contains(&intl2));
    let events = w.platform.notifications();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].recipients, ids(&[w.moderator, intl1]));

    let err = w
        .platform
        .resolve_other_info(w.moderator, post.id, BTreeSet::new())
        .unwrap_err();
    assert_eq!(err.code(), "not_held");
    assert!(w.platform.list_queue(w.moderator).unwrap().held_nodes.is_empty());
}

#[test]
fn deletion_hides_subtrees() {
    let w = World::new();
    let a = w.user("alpha", TraitProfile::default());
    let b = w.user("bravo", TraitProfile::default());
    let c = w.user("charlie", TraitProfile::default());
    let post = w.platform.create_post(a, "alpha", "p", ConsentBoundary::public()).unwrap();
    let mid = w.platform.create_comment(b, "bravo", post.id, "mid", ConsentBoundary::public()).unwrap();
    let below = w.platform.create_comment(c, "charlie", mid.id, "below", ConsentBoundary::public()).unwrap();
    let sibling = w.platform.create_comment(c, "charlie", post.id, "sib", ConsentBoundary::public()).unwrap();

    assert_eq!(w.platform.delete_node(c, mid.id).unwrap_err().code(), "not_authorized");
    w.platform.delete_node(b, mid.id).unwrap();
    let seen: Vec<_> = w.platform.get_thread(c, post.thread).unwrap().iter().map(|v| v.node_id).collect();
    assert_eq!(seen, [post.id, sibling.id]);
    assert!(!seen.contains(&below.id));
    assert_eq!(w.platform.delete_node(b, mid.id).unwrap_err().code(), "not_found");

    w.platform.moderate_remove(w.moderator, sibling.id, "harassment").unwrap();
    let removals: Vec<_> = w.platform.read(|s| {
        s.moderation().removals().map(|(n, r)| (n, r.to_string())).collect()
    });
    assert_eq!(removals, [(sibling.id, "harassment".to_string())]);
    assert_eq!(
        w.platform.moderate_remove(c, post.id, "x").unwrap_err().code(),
        "not_moderator"
    );

    w.platform.delete_node(a, post.id).unwrap();
    for viewer in [a, b, c, w.moderator] {
        assert!(w.platform.get_feed(viewer).unwrap().is_empty());
        assert!(w.platform.get_thread(viewer, post.thread).is_err());
    }
    // Bodies are kept for audit.
    let body = w.platform.read(|s| s.content().node(mid.id).unwrap().body.clone());
    assert_eq!(body, "mid");
}

#[test]
fn last_used_boundary_prefers_thread_history_then_default() {
    let w = World::new();
    let a = w.user_json("alpha", json!({"international": true}));
    let b = w.user_json("bravo", json!({"international": true}));
    let post = w.platform.create_post(a, "alpha", "p", ConsentBoundary::public()).unwrap();
    assert!(w.platform.last_used_boundary(b, post.thread).unwrap().is_public());

    let default = boundary(json!({"require_international": true}));
    w.platform.set_default_boundary(b, Some(default.clone())).unwrap();
    assert_eq!(w.platform.last_used_boundary(b, post.thread).unwrap(), default);

    let used = boundary(json!({"usernames_allowed": ["alpha"]}));
    w.platform.create_comment(b, "bravo", post.id, "c", used.clone()).unwrap();
    assert_eq!(w.platform.last_used_boundary(b, post.thread).unwrap(), used);

    let err = w
        .platform
        .set_default_boundary(a, Some(boundary(json!({"gender_allowed": ["woman"]}))))
        .unwrap_err();
    assert_eq!(err.code(), "identity_not_held");
}

#[test]
fn trait_updates_apply_to_later_audience_checks_and_are_audited() {
    let w = World::new();
    let a = w.user("alpha", TraitProfile::default());
    let b = w.user("bravo", TraitProfile::default());
    w.platform
        .update_traits(a, &serde_json::from_value(json!({"challenges_experienced": ["micromanagement"]})).unwrap())
        .unwrap();
    let post = w
        .platform
        .create_post(a, "alpha", "p", boundary(json!({"challenges_any": ["micromanagement"]})))
        .unwrap();
    assert!(w.platform.get_feed(b).unwrap().is_empty());

    let before = w.platform.list_queue(w.moderator).unwrap().trait_audits.len();
    w.platform.update_traits(b, &TraitPatch::default()).unwrap();
    assert_eq!(w.platform.list_queue(w.moderator).unwrap().trait_audits.len(), before);

    let patch: TraitPatch =
        serde_json::from_value(json!({"challenges_experienced": ["micromanagement"], "prior_advisors": ["john-smith"]}))
            .unwrap();
    w.platform.update_traits(b, &patch).unwrap();
    assert_eq!(w.platform.get_feed(b).unwrap()[0].node_id, post.id);
    let audits = w.platform.list_queue(w.moderator).unwrap().trait_audits;
    assert_eq!(audits.len(), before + 2);
    let prior = audits.iter().find(|r| r.account == b && r.field.key() == "prior_advisors").unwrap();
    assert_eq!(prior.old, serde_json::Value::Null);
    assert_eq!(prior.new, json!(["john-smith"]));

    let bad: TraitPatch = serde_json::from_value(json!({"phd_program": "astrology"})).unwrap();
    assert_eq!(w.platform.update_traits(b, &bad).unwrap_err().code(), "unknown_vocabulary_id");
}

#[test]
fn hidden_boundaries_look_like_public_nodes() {
    let w = World::new();
    let a = w.user_json("alpha", json!({"international": true}));
    let b = w.user_json("bravo", json!({"international": true}));
    let public = w.platform.create_post(a, "alpha", "same", ConsentBoundary::public()).unwrap();
    let hidden = w
        .platform
        .create_post(a, "alpha", "same", boundary(json!({"require_international": true})))
        .unwrap();
    let view = |id| {
        let thread = w.platform.get_thread(b, consent_core::ThreadId::from(id)).unwrap();
        let mut v = serde_json::to_value(&thread[0]).unwrap();
        let obj = v.as_object_mut().unwrap();
        for volatile in ["node_id", "thread_id", "created_at"] {
            obj.remove(volatile);
        }
        v
    };
    assert_eq!(view(public.id), view(hidden.id));
    assert!(view(hidden.id).get("boundary").is_none());

    w.platform.toggle_boundary_visibility(a, hidden.id, true).unwrap();
    assert!(view(hidden.id).get("boundary").is_some());
    w.platform.toggle_boundary_visibility(a, hidden.id, false).unwrap();
    assert!(view(hidden.id).get("boundary").is_none());
    assert_eq!(
        w.platform.toggle_boundary_visibility(b, hidden.id, true).unwrap_err().code(),
        "not_author"
    );
}

#[test]
fn public_post_in_a_47_user_population_notifies_46() {
    let w = World::new();
    let mut users = vec![w.moderator];
    for i in 1..47 {
        users.push(w.user(&format!("user{i:02}"), TraitProfile::default()));
    }
    assert_eq!(users.len(), 47);
    w.platform.create_post(users[1], "user01", "hello", ConsentBoundary::public()).unwrap();
    assert_eq!(w.platform.notifications()[0].recipients.len(), 46);
}

#[test]
fn author_only_audience_notifies_nobody() {
    let w = World::new();
    let a = w.user("alpha", TraitProfile::default());
    let _b = w.user("bravo", TraitProfile::default());
    w.platform
        .create_post(a, "alpha", "p", boundary(json!({"usernames_allowed": ["alpha"]})))
        .unwrap();
    assert_eq!(w.platform.notifications()[0].recipients, ids(&[w.moderator]));
}

#[test]
fn deactivated_and_pending_accounts_are_outside_every_audience() {
    let w = World::new();
    let a = w.user("alpha", TraitProfile::default());
    let b = w.user("bravo", TraitProfile::default());
    let pending = w.platform.register("pend@univ.edu", TraitProfile::default(), "pend").unwrap().id;
    let post = w.platform.create_post(b, "bravo", "kept", ConsentBoundary::public()).unwrap();
    assert!(!w.platform.audience(post.id).unwrap().contains(&pending));

    w.platform.deactivate(b, b).unwrap();
    let audience = w.platform.audience(post.id).unwrap();
    assert!(!audience.contains(&b));
    assert_eq!(w.platform.get_feed(a).unwrap().len(), 1, "content outlives the account");
    assert_eq!(w.platform.get_feed(b).unwrap_err().code(), "account_not_active");
    assert_eq!(
        w.platform.claim_persona(a, "bravo").unwrap_err().code(),
        "persona_taken",
        "personas are never recycled"
    );
}

#[test]
fn signup_review_is_one_shot() {
    let w = World::new();
    let a = w.platform.register("a@univ.edu", TraitProfile::default(), "aaa").unwrap().id;
    let other = w.user("other", TraitProfile::default());
    assert_eq!(
        w.platform.approve_signup(other, a, SignupDecision::Approve).unwrap_err().code(),
        "not_moderator"
    );
    w.platform.approve_signup(w.moderator, a, SignupDecision::Reject).unwrap();
    assert_eq!(
        w.platform.approve_signup(w.moderator, a, SignupDecision::Approve).unwrap_err().code(),
        "not_pending"
    );
    assert_eq!(
        w.platform.register("x@gmail.com", TraitProfile::default(), "xyz").unwrap_err().code(),
        "domain_not_allowed"
    );
    assert_eq!(
        w.platform.register("a@univ.edu", TraitProfile::default(), "bbb").unwrap_err().code(),
        "duplicate_email"
    );
    let records = w.platform.read(|s| s.moderation().records().len());
    assert_eq!(records, 2);
}

#[test]
fn queue_lists_signups_and_held_nodes() {
    let w = World::new();
    assert!(w.platform.list_queue(w.moderator).unwrap().is_empty());
    let a = w.user("alpha", TraitProfile::default());
    w.platform.register("new@univ.edu", TraitProfile::default(), "newbie").unwrap();
    w.platform
        .create_post(a, "alpha", "p", boundary(json!({"other_info": "my cohort"})))
        .unwrap();
    let q = w.platform.list_queue(w.moderator).unwrap();
    assert_eq!((q.pending_signups.len(), q.held_nodes.len()), (1, 1));
}

#[test]
fn snapshot_restores_the_same_world() {
    let w = World::new();
    let a = w.user("alpha", TraitProfile::default());
    let post = w.platform.create_post(a, "alpha", "p", ConsentBoundary::public()).unwrap();
    let text = serde_json::to_string(&w.platform.snapshot()).unwrap();
    let state = serde_json::from_str(&text).unwrap();
    let restored = Platform::restore(
        PlatformConfig {
            allowlist: consent_core::identity::DomainAllowList::from_domains(["univ.edu"]),
            moderator_email: Some("mod@univ.edu".into()),
            vocab: consent_core::Vocabulary::seed(),
            purge_deleted: false,
        },
        state,
    );
    assert_eq!(restored.get_feed(a).unwrap()[0].node_id, post.id);
    let next = restored.create_post(a, "alpha", "q", ConsentBoundary::public()).unwrap();
    assert!(next.id > post.id);
}
