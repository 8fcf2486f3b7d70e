use std::collections::BTreeSet;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::matching::{matches, MatchContext};
use crate::boundary::ConsentBoundary;
use crate::ids::{AccountId, NodeId, PersonaName};
use crate::profile::TraitProfile;

/// An eligible audience member: an active account with its profile and
/// personas.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub account: AccountId,
    pub profile: &'a TraitProfile,
    pub personas: &'a BTreeSet<PersonaName>,
    pub moderator: bool,
}

/// One node on the path from a root post to a target node.
#[derive(Debug, Clone, Copy)]
pub struct ChainLink<'a> {
    pub node: NodeId,
    pub parent: Option<NodeId>,
    pub author: AccountId,
    pub boundary: &'a ConsentBoundary,
    /// Recipients chosen by the moderator for a node with free-text
    /// requirements. Intersected with the structured boundary, never a
    /// replacement for it.
    pub explicit_audience: Option<&'a BTreeSet<AccountId>>,
}

/// The accounts allowed to view a node at one instant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AudienceSet(BTreeSet<AccountId>);

impl AudienceSet {
    pub fn into_inner(self) -> BTreeSet<AccountId> {
        self.0
    }
}

impl Deref for AudienceSet {
    type Target = BTreeSet<AccountId>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl FromIterator<AccountId> for AudienceSet {
    fn from_iter<I: IntoIterator<Item = AccountId>>(iter: I) -> Self {
        AudienceSet(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("empty node chain")]
    Empty,
    #[error("chain does not start at a root post")]
    RootHasParent,
    #[error("node {child} does not hang off {expected}")]
    MalformedChain { child: NodeId, expected: NodeId },
}

/// Whether `viewer` passes one link's own restriction: its boundary, or the
/// reply-to grant for the parent's author, then the moderator's explicit
/// recipient list if there is one. Ancestors are not considered here.
pub fn admits(link: &ChainLink<'_>, parent_author: Option<AccountId>, viewer: &Member<'_>) -> bool {
    let ctx = MatchContext {
        viewer: viewer.account,
        profile: viewer.profile,
        personas: viewer.personas,
        author: link.author,
        moderator: viewer.moderator,
    };
    let own = matches(link.boundary, &ctx)
        || (link.boundary.show_to_parent_author && parent_author == Some(viewer.account));
    let explicit = link.explicit_audience.is_none_or(|chosen| {
        viewer.moderator || viewer.account == link.author || chosen.contains(&viewer.account)
    });
    own && explicit
}

/// Audience of the last node in `chain`, composed down from the root post.
///
/// Each level keeps only viewers who pass its own restriction (the parent's
/// author passes when the reply-to grant is on) and who were in the parent's
/// audience, so audiences can only shrink down a thread.
pub fn compose_audience(
    chain: &[ChainLink<'_>],
    population: &[Member<'_>],
) -> Result<AudienceSet, ChainError> {
    let (root, rest) = chain.split_first().ok_or(ChainError::Empty)?;
    if root.parent.is_some() {
        return Err(ChainError::RootHasParent);
    }
    let mut audience: AudienceSet = population
        .iter()
        .filter(|m| admits(root, None, m))
        .map(|m| m.account)
        .collect();
    let mut parent = root;
    for link in rest {
        if link.parent != Some(parent.node) {
            return Err(ChainError::MalformedChain {
                child: link.node,
                expected: parent.node,
            });
        }
        let own: BTreeSet<AccountId> = population
            .iter()
            .filter(|m| admits(link, Some(parent.author), m))
            .map(|m| m.account)
            .collect();
        audience = AudienceSet(audience.0.intersection(&own).copied().collect());
        parent = link;
    }
    Ok(audience)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Restriction;

    struct Person {
        id: u64,
        profile: TraitProfile,
        personas: BTreeSet<PersonaName>,
    }

    fn person(id: u64, persona: &str, profile: TraitProfile) -> Person {
        Person {
            id,
            profile,
            personas: [PersonaName::new(persona).unwrap()].into(),
        }
    }

    fn members(people: &[Person]) -> Vec<Member<'_>> {
        people
            .iter()
            .map(|p| Member {
                account: AccountId(p.id),
                profile: &p.profile,
                personas: &p.personas,
                moderator: false,
            })
            .collect()
    }

    fn ids(xs: &[u64]) -> BTreeSet<AccountId> {
        xs.iter().copied().map(AccountId).collect()
    }

    // Post by abc123 (account 1) restricted to users who changed advising;
    // river21 (account 2) replies restricted to @abc123 or international
    // users who changed advising.
    fn reply_thread_people() -> Vec<Person> {
        let changed = |intl: Option<bool>| TraitProfile {
            advising_status_changed: Some(true),
            international: intl,
            ..Default::default()
        };
        vec![
            person(1, "abc123", changed(Some(false))),
            person(2, "river21", changed(Some(true))),
            person(3, "kiwi_77", changed(Some(true))),
            person(4, "dunes", changed(Some(false))),
            person(5, "marlin", changed(None)),
            person(6, "stays_put", TraitProfile {
                international: Some(true),
                advising_status_changed: Some(false),
                ..Default::default()
            }),
            person(7, "quiet", TraitProfile::default()),
        ]
    }

    #[test]
    fn reply_thread_reply_audience() {
        let people = reply_thread_people();
        let pop = members(&people);
        let post_b = ConsentBoundary {
            require_advising_change: true,
            ..ConsentBoundary::public()
        };
        let reply_b = ConsentBoundary {
            require_international: true,
            require_advising_change: true,
            ..ConsentBoundary::public()
        };
        let post = ChainLink {
            node: NodeId(10),
            parent: None,
            author: AccountId(1),
            boundary: &post_b,
            explicit_audience: None,
        };
        let reply = ChainLink {
            node: NodeId(11),
            parent: Some(NodeId(10)),
            author: AccountId(2),
            boundary: &reply_b,
            explicit_audience: None,
        };
        let post_aud = compose_audience(&[post], &pop).unwrap();
        assert_eq!(*post_aud, ids(&[1, 2, 3, 4, 5]));
        let reply_aud = compose_audience(&[post, reply], &pop).unwrap();
        assert!(reply_aud.is_subset(&post_aud));
        // abc123 gets in through the reply-to grant, not through traits.
        assert_eq!(*reply_aud, ids(&[1, 2, 3]));

        // The same reply with an explicit username list instead of the grant.
        let reply_named = ConsentBoundary {
            usernames_allowed: Restriction::Restricted([PersonaName::new("abc123").unwrap()].into()),
            show_to_parent_author: false,
            ..ConsentBoundary::public()
        };
        let named = ChainLink {
            boundary: &reply_named,
            ..reply
        };
        assert_eq!(*compose_audience(&[post, named], &pop).unwrap(), ids(&[1, 2]));
    }

    #[test]
    fn unrestricted_comment_inherits_post_audience() {
        let people = reply_thread_people();
        let pop = members(&people);
        let post_b = ConsentBoundary {
            require_international: true,
            ..ConsentBoundary::public()
        };
        let open = ConsentBoundary::public();
        let post = ChainLink {
            node: NodeId(1),
            parent: None,
            author: AccountId(2),
            boundary: &post_b,
            explicit_audience: None,
        };
        let comment = ChainLink {
            node: NodeId(2),
            parent: Some(NodeId(1)),
            author: AccountId(3),
            boundary: &open,
            explicit_audience: None,
        };
        assert_eq!(
            compose_audience(&[post, comment], &pop).unwrap(),
            compose_audience(&[post], &pop).unwrap()
        );
    }

    #[test]
    fn parent_author_grant_does_not_bypass_ancestors() {
        let people = reply_thread_people();
        let pop = members(&people);
        // Post by 2 restricted to international; 6 (international) comments;
        // 2 replies to 6 restricted to users who changed advising. 6 still gets
        // the reply via the grant. If the post excluded 6, the grant would not help.
        let post_b = ConsentBoundary {
            require_international: true,
            ..ConsentBoundary::public()
        };
        let open = ConsentBoundary::public();
        let changed = ConsentBoundary {
            require_advising_change: true,
            ..ConsentBoundary::public()
        };
        let post = ChainLink {
            node: NodeId(1),
            parent: None,
            author: AccountId(2),
            boundary: &post_b,
            explicit_audience: None,
        };
        let c1 = ChainLink {
            node: NodeId(2),
            parent: Some(NodeId(1)),
            author: AccountId(6),
            boundary: &open,
            explicit_audience: None,
        };
        let c2 = ChainLink {
            node: NodeId(3),
            parent: Some(NodeId(2)),
            author: AccountId(2),
            boundary: &changed,
            explicit_audience: None,
        };
        let aud = compose_audience(&[post, c1, c2], &pop).unwrap();
        assert_eq!(*aud, ids(&[2, 3, 6]));

        let narrow_b = ConsentBoundary {
            require_international: true,
            require_advising_change: true,
            ..ConsentBoundary::public()
        };
        let narrowed_post = ChainLink {
            boundary: &narrow_b,
            ..post
        };
        let aud = compose_audience(&[narrowed_post, c1, c2], &pop).unwrap();
        assert!(!aud.contains(&AccountId(6)));
    }

    #[test]
    fn explicit_audience_intersects() {
        let people = reply_thread_people();
        let pop = members(&people);
        let b = ConsentBoundary {
            require_advising_change: true,
            other_info: Some("lab cohort".into()),
            ..ConsentBoundary::public()
        };
        let chosen = ids(&[3, 6, 7]);
        let link = ChainLink {
            node: NodeId(1),
            parent: None,
            author: AccountId(1),
            boundary: &b,
            explicit_audience: Some(&chosen),
        };
        // 6 and 7 fail the structured dimension; the author stays in.
        assert_eq!(*compose_audience(&[link], &pop).unwrap(), ids(&[1, 3]));
    }

    #[test]
    fn malformed_chains_are_rejected() {
        let b = ConsentBoundary::public();
        let link = |node, parent: Option<u64>| ChainLink {
            node: NodeId(node),
            parent: parent.map(NodeId),
            author: AccountId(1),
            boundary: &b,
            explicit_audience: None,
        };
        assert_eq!(compose_audience(&[], &[]), Err(ChainError::Empty));
        assert_eq!(
            compose_audience(&[link(2, Some(1))], &[]),
            Err(ChainError::RootHasParent)
        );
        assert!(matches!(
            compose_audience(&[link(1, None), link(3, Some(2))], &[]),
            Err(ChainError::MalformedChain { .. })
        ));
    }
}
