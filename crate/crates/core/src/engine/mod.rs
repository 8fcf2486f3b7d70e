//! Pure evaluation of consent boundaries.
//!
//! Nothing in here holds state: every function is a total function of its
//! arguments, so the engine can be called concurrently from anywhere.

mod compose;
mod matching;
mod metadata;
mod restriction;
mod validate;

pub use compose::{admits, compose_audience, AudienceSet, ChainError, ChainLink, Member};
pub use matching::{matches, MatchContext};
pub use metadata::boundary_metadata_view;
pub use restriction::{check_restriction, RestrictionError};
pub use validate::{validate_boundary, BoundaryTarget, ValidationError};
