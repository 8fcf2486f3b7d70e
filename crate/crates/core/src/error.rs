use serde::{Deserialize, Serialize};

use crate::content::ContentError;
use crate::engine::{RestrictionError, ValidationError};
use crate::identity::IdentityError;

/// Every failure a platform operation can report.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error(transparent)]
    Identity(IdentityError),
    #[error(transparent)]
    Validation(ValidationError),
    #[error(transparent)]
    Restriction(RestrictionError),
    #[error(transparent)]
    Content(ContentError),
}

impl From<IdentityError> for PlatformError {
    fn from(e: IdentityError) -> Self {
        PlatformError::Identity(e)
    }
}

impl From<ValidationError> for PlatformError {
    fn from(e: ValidationError) -> Self {
        PlatformError::Validation(e)
    }
}

impl From<RestrictionError> for PlatformError {
    fn from(e: RestrictionError) -> Self {
        PlatformError::Restriction(e)
    }
}

impl From<ContentError> for PlatformError {
    fn from(e: ContentError) -> Self {
        match e {
            ContentError::Identity(e) => PlatformError::Identity(e),
            ContentError::Validation(e) => PlatformError::Validation(e),
            ContentError::Restriction(e) => PlatformError::Restriction(e),
            other => PlatformError::Content(other),
        }
    }
}

/// Coarse outcome class, used to pick a response status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Missing, or invisible to the caller. The two must look the same.
    NotFound,
    Forbidden,
    Conflict,
    Invalid,
}

impl PlatformError {
    /// Stable snake_case code for the error.
    pub fn code(&self) -> &'static str {
        use ContentError as C;
        use IdentityError as I;
        match self {
            PlatformError::Identity(e) => match e {
                I::InvalidEmail => "invalid_email",
                I::DomainNotAllowed(_) => "domain_not_allowed",
                I::DuplicateEmail => "duplicate_email",
                I::PersonaTaken(_) => "persona_taken",
                I::InvalidName(_) => "invalid_name",
                I::UnknownAccount(_) => "unknown_account",
                I::NotPending => "not_pending",
                I::NotModerator => "not_moderator",
                I::AccountNotActive => "account_not_active",
                I::UnknownVocabularyId { .. } => "unknown_vocabulary_id",
                I::PersonaNotOwned(_) => "invalid_persona",
                I::PersonaMismatch { .. } => "persona_mismatch",
            },
            PlatformError::Validation(e) => match e {
                ValidationError::IdentityNotHeld(_) => "identity_not_held",
                ValidationError::EmptyRestriction(_) => "empty_restriction",
                ValidationError::UnknownVocabularyId { .. } => "unknown_vocabulary_id",
                ValidationError::UsernameNotInThread(_) => "username_not_in_thread",
            },
            PlatformError::Restriction(e) => match e {
                RestrictionError::WideningViolation(_) | RestrictionError::ParentGrantWidened => {
                    "widening_violation"
                }
                RestrictionError::OtherInfoChanged => "other_info_changed",
            },
            PlatformError::Content(e) => match e {
                C::NodeNotFound => "not_found",
                C::ParentNotVisible => "parent_not_visible",
                C::UnknownThread => "unknown_thread",
                C::NotAuthor => "not_author",
                C::NotAuthorized => "not_authorized",
                C::NotHeld => "not_held",
                C::Identity(_) | C::Validation(_) | C::Restriction(_) => {
                    unreachable!("flattened by From<ContentError>")
                }
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        class_of(self.code())
    }
}

/// Class of an error code, as produced by [`PlatformError::code`].
pub fn class_of(code: &str) -> ErrorClass {
    match code {
        "not_found" | "parent_not_visible" | "unknown_thread" => ErrorClass::NotFound,
        "not_moderator" | "not_author" | "not_authorized" | "account_not_active" => ErrorClass::Forbidden,
        "persona_taken" | "duplicate_email" | "not_pending" | "not_held" | "persona_mismatch" => {
            ErrorClass::Conflict
        }
        _ => ErrorClass::Invalid,
    }
}
