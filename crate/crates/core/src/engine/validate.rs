use std::collections::BTreeSet;

use crate::boundary::{ConsentBoundary, Dimension, Restriction};
use crate::ids::PersonaName;
use crate::profile::TraitProfile;
use crate::vocab::{VocabKind, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("author does not hold the identity restricted by {0}")]
    IdentityNotHeld(Dimension),
    #[error("{0} is restricted to an empty set")]
    EmptyRestriction(Dimension),
    #[error("unknown {kind:?} id {id:?}")]
    UnknownVocabularyId { kind: VocabKind, id: String },
    #[error("{0} has not participated in this thread")]
    UsernameNotInThread(PersonaName),
}

/// What the boundary is being attached to.
#[derive(Debug, Clone, Copy)]
pub enum BoundaryTarget<'a> {
    Post,
    /// Personas already bound to the thread.
    Comment {
        thread_participants: &'a BTreeSet<PersonaName>,
    },
}

/// Checks a boundary against its author's declared profile.
///
/// Authors may restrict an identity dimension only to a set that contains
/// their own declared value, so an undeclared identity cannot be restricted
/// on at all. Checks run in a fixed order and the first failure is returned.
pub fn validate_boundary(
    boundary: &ConsentBoundary,
    author: &TraitProfile,
    vocab: &Vocabulary,
    target: BoundaryTarget<'_>,
) -> Result<(), ValidationError> {
    check_non_empty(boundary)?;
    check_identity(boundary, author)?;
    check_vocabulary(boundary, vocab)?;
    if let (BoundaryTarget::Comment { thread_participants }, Restriction::Restricted(names)) =
        (target, &boundary.usernames_allowed)
    {
        if let Some(stranger) = names.iter().find(|n| !thread_participants.contains(*n)) {
            return Err(ValidationError::UsernameNotInThread(stranger.clone()));
        }
    }
    Ok(())
}

fn check_non_empty(b: &ConsentBoundary) -> Result<(), ValidationError> {
    fn empty<T>(r: &Restriction<BTreeSet<T>>) -> bool {
        matches!(r, Restriction::Restricted(s) if s.is_empty())
    }
    let empties = [
        (Dimension::Gender, empty(&b.gender_allowed)),
        (Dimension::Races, empty(&b.races_allowed)),
        (Dimension::Challenges, empty(&b.challenges_any)),
        (Dimension::Programs, empty(&b.programs_allowed)),
        (Dimension::AdvisedBy, empty(&b.advised_by_any)),
        (Dimension::Usernames, empty(&b.usernames_allowed)),
    ];
    match empties.into_iter().find(|(_, e)| *e) {
        Some((dim, _)) => Err(ValidationError::EmptyRestriction(dim)),
        None => Ok(()),
    }
}

fn check_identity(b: &ConsentBoundary, author: &TraitProfile) -> Result<(), ValidationError> {
    if let Restriction::Restricted(allowed) = &b.gender_allowed {
        if !author.gender.as_ref().is_some_and(|g| allowed.contains(g)) {
            return Err(ValidationError::IdentityNotHeld(Dimension::Gender));
        }
    }
    if let Restriction::Restricted(allowed) = &b.races_allowed {
        if author.races.is_disjoint(allowed) {
            return Err(ValidationError::IdentityNotHeld(Dimension::Races));
        }
    }
    if b.require_international && author.international != Some(true) {
        return Err(ValidationError::IdentityNotHeld(Dimension::International));
    }
    Ok(())
}

fn check_vocabulary(b: &ConsentBoundary, vocab: &Vocabulary) -> Result<(), ValidationError> {
    let unknown = |kind, id: &str| ValidationError::UnknownVocabularyId {
        kind,
        id: id.to_string(),
    };
    if let Some(c) = b
        .challenges_any
        .restricted()
        .and_then(|s| s.iter().find(|c| !vocab.has_challenge(c)))
    {
        return Err(unknown(VocabKind::Challenge, c.as_str()));
    }
    if let Some(p) = b
        .programs_allowed
        .restricted()
        .and_then(|s| s.iter().find(|p| !vocab.has_program(p)))
    {
        return Err(unknown(VocabKind::Program, p.as_str()));
    }
    let faculty = b
        .advised_by_any
        .restricted()
        .into_iter()
        .flatten()
        .chain(&b.not_advised_by);
    for f in faculty {
        if !vocab.has_faculty(f) {
            return Err(unknown(VocabKind::Faculty, f.as_str()));
        }
    }
    Ok(())
}
