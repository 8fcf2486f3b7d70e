//! Voluntarily declared user traits, the substrate boundaries match against.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::ids::{ChallengeId, FacultyId, ProgramId};

/// A user's declared traits. Every field is independently omissible and an
/// omitted field means "undeclared". Set-valued fields treat the empty set as
/// undeclared, except the advisor fields where `Some(empty)` is an explicit
/// "none" (a student between advisors, or one who never switched).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub races: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub international: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phd_program: Option<ProgramId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_advisors: Option<BTreeSet<FacultyId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_advisors: Option<BTreeSet<FacultyId>>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub challenges_experienced: BTreeSet<ChallengeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advising_status_changed: Option<bool>,
}

impl TraitProfile {
    /// Union of current and prior advisors, for advisor-based dimensions.
    pub fn all_advisors(&self) -> impl Iterator<Item = &FacultyId> {
        self.current_advisors
            .iter()
            .chain(self.prior_advisors.iter())
            .flatten()
    }

    pub fn is_declared(&self, field: TraitField) -> bool {
        match field {
            TraitField::Gender => self.gender.is_some(),
            TraitField::Races => !self.races.is_empty(),
            TraitField::International => self.international.is_some(),
            TraitField::PhdProgram => self.phd_program.is_some(),
            TraitField::CurrentAdvisors => self.current_advisors.is_some(),
            TraitField::PriorAdvisors => self.prior_advisors.is_some(),
            TraitField::ChallengesExperienced => !self.challenges_experienced.is_empty(),
            TraitField::AdvisingStatusChanged => self.advising_status_changed.is_some(),
        }
    }

    /// Returns a copy with `field` reset to undeclared.
    pub fn without(&self, field: TraitField) -> TraitProfile {
        let mut p = self.clone();
        match field {
            TraitField::Gender => p.gender = None,
            TraitField::Races => p.races.clear(),
            TraitField::International => p.international = None,
            TraitField::PhdProgram => p.phd_program = None,
            TraitField::CurrentAdvisors => p.current_advisors = None,
            TraitField::PriorAdvisors => p.prior_advisors = None,
            TraitField::ChallengesExperienced => p.challenges_experienced.clear(),
            TraitField::AdvisingStatusChanged => p.advising_status_changed = None,
        }
        p
    }

    /// JSON value of one field, `null` when undeclared. Used by the audit trail.
    pub fn field_value(&self, field: TraitField) -> serde_json::Value {
        use serde_json::{json, Value};
        if !self.is_declared(field) {
            return Value::Null;
        }
        match field {
            TraitField::Gender => json!(self.gender),
            TraitField::Races => json!(self.races),
            TraitField::International => json!(self.international),
            TraitField::PhdProgram => json!(self.phd_program),
            TraitField::CurrentAdvisors => json!(self.current_advisors),
            TraitField::PriorAdvisors => json!(self.prior_advisors),
            TraitField::ChallengesExperienced => json!(self.challenges_experienced),
            TraitField::AdvisingStatusChanged => json!(self.advising_status_changed),
        }
    }

    /// Sets one field from its audit-trail JSON value (`null` clears it).
    pub fn set_field_value(
        &mut self,
        field: TraitField,
        value: &serde_json::Value,
    ) -> Result<(), serde_json::Error> {
        let mut obj = match serde_json::to_value(&*self)? {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("profiles serialise as objects"),
        };
        if value.is_null() {
            obj.remove(field.key());
        } else {
            obj.insert(field.key().to_string(), value.clone());
        }
        *self = serde_json::from_value(serde_json::Value::Object(obj))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraitField {
    Gender,
    Races,
    International,
    PhdProgram,
    CurrentAdvisors,
    PriorAdvisors,
    ChallengesExperienced,
    AdvisingStatusChanged,
}

impl TraitField {
    pub const ALL: [TraitField; 8] = [
        TraitField::Gender,
        TraitField::Races,
        TraitField::International,
        TraitField::PhdProgram,
        TraitField::CurrentAdvisors,
        TraitField::PriorAdvisors,
        TraitField::ChallengesExperienced,
        TraitField::AdvisingStatusChanged,
    ];

    pub fn key(self) -> &'static str {
        match self {
            TraitField::Gender => "gender",
            TraitField::Races => "races",
            TraitField::International => "international",
            TraitField::PhdProgram => "phd_program",
            TraitField::CurrentAdvisors => "current_advisors",
            TraitField::PriorAdvisors => "prior_advisors",
            TraitField::ChallengesExperienced => "challenges_experienced",
            TraitField::AdvisingStatusChanged => "advising_status_changed",
        }
    }
}

impl fmt::Display for TraitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Partial profile update. An absent key leaves the field alone, `null`
/// clears it, any other value replaces it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitPatch {
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub gender: Option<Option<String>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub races: Option<Option<BTreeSet<String>>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub international: Option<Option<bool>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub phd_program: Option<Option<ProgramId>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub current_advisors: Option<Option<BTreeSet<FacultyId>>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub prior_advisors: Option<Option<BTreeSet<FacultyId>>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub challenges_experienced: Option<Option<BTreeSet<ChallengeId>>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub advising_status_changed: Option<Option<bool>>,
}

// Distinguishes an explicit `null` (Some(None)) from an absent key (None).
fn present<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

impl TraitPatch {
    pub fn is_empty(&self) -> bool {
        *self == TraitPatch::default()
    }

    /// Applies the patch to a copy of `base`.
    pub fn apply_to(&self, base: &TraitProfile) -> TraitProfile {
        let mut p = base.clone();
        if let Some(v) = &self.gender {
            p.gender = v.clone();
        }
        if let Some(v) = &self.races {
            p.races = v.clone().unwrap_or_default();
        }
        if let Some(v) = self.international {
            p.international = v;
        }
        if let Some(v) = &self.phd_program {
            p.phd_program = v.clone();
        }
        if let Some(v) = &self.current_advisors {
            p.current_advisors = v.clone();
        }
        if let Some(v) = &self.prior_advisors {
            p.prior_advisors = v.clone();
        }
        if let Some(v) = &self.challenges_experienced {
            p.challenges_experienced = v.clone().unwrap_or_default();
        }
        if let Some(v) = self.advising_status_changed {
            p.advising_status_changed = v;
        }
        p
    }
}
