//! Consent-boundary audience engine and the platform services around it.
//!
//! A [`ConsentBoundary`] is attached to every post and comment. The engine
//! decides who may see a node from the boundaries along its reply chain and
//! the self-declared traits of each account; the rest of the crate handles
//! pseudonymous identity, storage, notification and moderation.

pub mod boundary;
pub mod clock;
pub mod content;
pub mod engine;
pub mod error;
pub mod identity;
pub mod ids;
pub mod jsonl;
pub mod moderation;
pub mod notify;
pub mod platform;
pub mod profile;
pub mod vocab;

pub use boundary::{ConsentBoundary, Dimension, Restriction};
pub use error::{ErrorClass, PlatformError};
pub use ids::{AccountId, ChallengeId, FacultyId, NodeId, PersonaName, ProgramId, ThreadId};
pub use platform::{Platform, PlatformConfig, State};
pub use profile::{TraitField, TraitPatch, TraitProfile};
pub use vocab::Vocabulary;
