//! Publish-time notification recipients and email-shaped payloads.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::engine::AudienceSet;
use crate::ids::{AccountId, NodeId, PersonaName, ThreadId};
use crate::jsonl::JsonlSink;

pub const PREVIEW_WORDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    NewPost,
    NewComment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationEvent {
    pub seq: u64,
    pub node_id: NodeId,
    pub thread_id: ThreadId,
    pub kind: NotificationKind,
    pub persona: PersonaName,
    pub recipients: BTreeSet<AccountId>,
    pub preview: String,
    pub created_at: Timestamp,
}

/// First twenty whitespace-separated words, with an ellipsis when cut.
/// Bodies that already fit are returned unchanged.
pub fn render_preview(body: &str) -> String {
    let mut words = body.split_whitespace();
    let head: Vec<&str> = words.by_ref().take(PREVIEW_WORDS).collect();
    if words.next().is_none() {
        body.to_string()
    } else {
        format!("{}…", head.join(" "))
    }
}

/// Everyone in the audience except the author.
pub fn post_recipients(audience: &AudienceSet, author: AccountId) -> BTreeSet<AccountId> {
    audience.iter().copied().filter(|a| *a != author).collect()
}

/// Thread participants who are also in the comment's audience, except the
/// author. A participant the comment excludes gets nothing, not even a
/// preview.
pub fn comment_recipients(
    audience: &AudienceSet,
    participants: &BTreeSet<AccountId>,
    author: AccountId,
) -> BTreeSet<AccountId> {
    participants
        .iter()
        .copied()
        .filter(|a| *a != author && audience.contains(a))
        .collect()
}

/// Outgoing message for one recipient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundEmail {
    pub address: String,
    pub subject: String,
    pub body: String,
}

impl OutboundEmail {
    pub fn render(event: &NotificationEvent, address: &str) -> Self {
        let subject = match event.kind {
            NotificationKind::NewPost => format!("New post from @{}", event.persona),
            NotificationKind::NewComment => format!("@{} commented in a thread you joined", event.persona),
        };
        let body = format!(
            "{}\n\nRead it at /threads/{}#node-{}\n",
            event.preview, event.thread_id, event.node_id
        );
        OutboundEmail {
            address: address.to_string(),
            subject,
            body,
        }
    }
}

/// Mail delivery. Implementations must tolerate redelivery.
pub trait Transport: Send + Sync {
    fn deliver(&self, address: &str, subject: &str, body: &str) -> io::Result<()>;
}

/// Drops every message.
#[derive(Debug, Default)]
pub struct NullTransport;

impl Transport for NullTransport {
    fn deliver(&self, _: &str, _: &str, _: &str) -> io::Result<()> {
        Ok(())
    }
}

/// Keeps messages in memory.
#[derive(Debug, Default)]
pub struct MemoryOutbox {
    sent: Mutex<Vec<OutboundEmail>>,
}

impl MemoryOutbox {
    pub fn messages(&self) -> Vec<OutboundEmail> {
        self.sent.lock().clone()
    }
}

impl Transport for MemoryOutbox {
    fn deliver(&self, address: &str, subject: &str, body: &str) -> io::Result<()> {
        self.sent.lock().push(OutboundEmail {
            address: address.into(),
            subject: subject.into(),
            body: body.into(),
        });
        Ok(())
    }
}

/// Appends each message as a JSON line to a local file.
#[derive(Debug)]
pub struct OutboxFile {
    sink: JsonlSink,
}

impl OutboxFile {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(OutboxFile {
            sink: JsonlSink::open(path)?,
        })
    }
}

impl Transport for OutboxFile {
    fn deliver(&self, address: &str, subject: &str, body: &str) -> io::Result<()> {
        self.sink.append(&OutboundEmail {
            address: address.into(),
            subject: subject.into(),
            body: body.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (1..=n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn short_bodies_are_unchanged() {
        let body = words(19);
        assert_eq!(render_preview(&body), body);
        let twenty = format!("  {}\n", words(20));
        assert_eq!(render_preview(&twenty), twenty);
    }

    #[test]
    fn long_bodies_are_cut_at_twenty_words() {
        assert_eq!(render_preview(&words(25)), format!("{}…", words(20)));
    }

    #[test]
    fn empty_body() {
        assert_eq!(render_preview(""), "");
    }

    #[test]
    fn recipients_exclude_author_and_outsiders() {
        let audience: AudienceSet = [1, 2, 3].map(AccountId).into_iter().collect();
        assert_eq!(post_recipients(&audience, AccountId(1)), [2, 3].map(AccountId).into());
        let only_author: AudienceSet = [AccountId(1)].into_iter().collect();
        assert!(post_recipients(&only_author, AccountId(1)).is_empty());

        let participants = [1, 3, 4].map(AccountId).into();
        assert_eq!(
            comment_recipients(&audience, &participants, AccountId(1)),
            [AccountId(3)].into()
        );
    }

    #[test]
    fn outbox_file_appends_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/outbox.jsonl");
        let outbox = OutboxFile::open(&path).unwrap();
        outbox.deliver("a@univ.edu", "s1", "b1").unwrap();
        outbox.deliver("b@univ.edu", "s2", "b2").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<OutboundEmail> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].address, "b@univ.edu");
    }
}
