//! The consent boundary document and its canonical serialization.
//!
//! The canonical form is compact JSON with keys in declaration order. An
//! unrestricted dimension is encoded by the absence of its key; the two
//! boolean requirements appear only when switched on and an empty
//! `not_advised_by` is omitted. `show_boundary` and `show_to_parent_author`
//! are always written. The same document is used by the API, scenario files
//! and the browser client.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ids::{ChallengeId, FacultyId, PersonaName, ProgramId};

/// One boundary dimension: either no constraint, or a constraint value.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Restriction<T> {
    #[default]
    Unrestricted,
    Restricted(T),
}

impl<T> Restriction<T> {
    pub fn is_unrestricted(&self) -> bool {
        matches!(self, Restriction::Unrestricted)
    }

    pub fn restricted(&self) -> Option<&T> {
        match self {
            Restriction::Unrestricted => None,
            Restriction::Restricted(v) => Some(v),
        }
    }
}

impl<T: Serialize> Serialize for Restriction<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Restriction::Unrestricted => s.serialize_none(),
            Restriction::Restricted(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Restriction<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        T::deserialize(d).map(Restriction::Restricted)
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn yes() -> bool {
    true
}

/// A per-node audience predicate.
///
/// Dimensions combine by conjunction; the values inside one multi-valued
/// dimension combine by disjunction. Boolean requirements can only demand
/// that a property holds, so `false` is the same as unrestricted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsentBoundary {
    #[serde(default, skip_serializing_if = "Restriction::is_unrestricted")]
    pub gender_allowed: Restriction<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Restriction::is_unrestricted")]
    pub races_allowed: Restriction<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub require_international: bool,
    #[serde(default, skip_serializing_if = "Restriction::is_unrestricted")]
    pub challenges_any: Restriction<BTreeSet<ChallengeId>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub require_advising_change: bool,
    #[serde(default, skip_serializing_if = "Restriction::is_unrestricted")]
    pub programs_allowed: Restriction<BTreeSet<ProgramId>>,
    #[serde(default, skip_serializing_if = "Restriction::is_unrestricted")]
    pub advised_by_any: Restriction<BTreeSet<FacultyId>>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub not_advised_by: BTreeSet<FacultyId>,
    #[serde(default, skip_serializing_if = "Restriction::is_unrestricted")]
    pub usernames_allowed: Restriction<BTreeSet<PersonaName>>,
    #[serde(
        default,
        deserialize_with = "non_blank",
        skip_serializing_if = "Option::is_none"
    )]
    pub other_info: Option<String>,
    #[serde(default)]
    pub show_boundary: bool,
    #[serde(default = "yes")]
    pub show_to_parent_author: bool,
}

// Blank free text carries no request for moderator review.
fn non_blank<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let raw = Option::<String>::deserialize(d)?;
    Ok(raw.filter(|s| !s.trim().is_empty()))
}

impl Default for ConsentBoundary {
    fn default() -> Self {
        ConsentBoundary::public()
    }
}

impl ConsentBoundary {
    /// Visible to every verified user.
    pub fn public() -> Self {
        ConsentBoundary {
            gender_allowed: Restriction::Unrestricted,
            races_allowed: Restriction::Unrestricted,
            require_international: false,
            challenges_any: Restriction::Unrestricted,
            require_advising_change: false,
            programs_allowed: Restriction::Unrestricted,
            advised_by_any: Restriction::Unrestricted,
            not_advised_by: BTreeSet::new(),
            usernames_allowed: Restriction::Unrestricted,
            other_info: None,
            show_boundary: false,
            show_to_parent_author: true,
        }
    }

    /// True when no dimension constrains the audience.
    pub fn is_public(&self) -> bool {
        Dimension::ALL.iter().all(|d| !self.constrains(*d))
    }

    pub fn constrains(&self, dim: Dimension) -> bool {
        match dim {
            Dimension::Gender => !self.gender_allowed.is_unrestricted(),
            Dimension::Races => !self.races_allowed.is_unrestricted(),
            Dimension::International => self.require_international,
            Dimension::Challenges => !self.challenges_any.is_unrestricted(),
            Dimension::AdvisingChange => self.require_advising_change,
            Dimension::Programs => !self.programs_allowed.is_unrestricted(),
            Dimension::AdvisedBy => !self.advised_by_any.is_unrestricted(),
            Dimension::NotAdvisedBy => !self.not_advised_by.is_empty(),
            Dimension::Usernames => !self.usernames_allowed.is_unrestricted(),
            Dimension::OtherInfo => self.other_info.is_some(),
        }
    }

    /// True when the free-text field asks for moderator review.
    pub fn needs_review(&self) -> bool {
        self.other_info.is_some()
    }

    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("boundary serialisation is infallible")
    }

    pub fn from_canonical(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Names of the boundary dimensions, spelled as their document keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "gender_allowed")]
    Gender,
    #[serde(rename = "races_allowed")]
    Races,
    #[serde(rename = "require_international")]
    International,
    #[serde(rename = "challenges_any")]
    Challenges,
    #[serde(rename = "require_advising_change")]
    AdvisingChange,
    #[serde(rename = "programs_allowed")]
    Programs,
    #[serde(rename = "advised_by_any")]
    AdvisedBy,
    #[serde(rename = "not_advised_by")]
    NotAdvisedBy,
    #[serde(rename = "usernames_allowed")]
    Usernames,
    #[serde(rename = "other_info")]
    OtherInfo,
}

impl Dimension {
    pub const ALL: [Dimension; 10] = [
        Dimension::Gender,
        Dimension::Races,
        Dimension::International,
        Dimension::Challenges,
        Dimension::AdvisingChange,
        Dimension::Programs,
        Dimension::AdvisedBy,
        Dimension::NotAdvisedBy,
        Dimension::Usernames,
        Dimension::OtherInfo,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Gender => "gender_allowed",
            Dimension::Races => "races_allowed",
            Dimension::International => "require_international",
            Dimension::Challenges => "challenges_any",
            Dimension::AdvisingChange => "require_advising_change",
            Dimension::Programs => "programs_allowed",
            Dimension::AdvisedBy => "advised_by_any",
            Dimension::NotAdvisedBy => "not_advised_by",
            Dimension::Usernames => "usernames_allowed",
            Dimension::OtherInfo => "other_info",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}
