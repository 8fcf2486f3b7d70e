//! Reference visibility semantics over raw JSON documents.
//!
//! Nothing here calls into the engine: profiles and boundaries are read
//! straight from their JSON form and the rules are restated from the
//! definition of a consent boundary.
//!
//! - A viewer sees a node when they satisfy every restriction the author
//!   set; inside one restriction any listed value will do.
//! - A trait the viewer never declared satisfies nothing.
//! - A reply can only reach people who could see what it replies to.

use std::collections::BTreeSet;

use serde_json::Value;

/// Profile fields as the oracle reads them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traits {
    pub gender: Option<String>,
    pub races: BTreeSet<String>,
    pub international: Option<bool>,
    pub program: Option<String>,
    pub current_advisors: Option<BTreeSet<String>>,
    pub prior_advisors: Option<BTreeSet<String>>,
    pub challenges: BTreeSet<String>,
    pub advising_changed: Option<bool>,
}

/// Profile keys, in the order the metamorphic check walks them.
pub const TRAIT_KEYS: [&str; 8] = [
    "gender",
    "races",
    "international",
    "phd_program",
    "current_advisors",
    "prior_advisors",
    "challenges_experienced",
    "advising_status_changed",
];

fn string_set(v: Option<&Value>) -> Option<BTreeSet<String>> {
    let items = v?.as_array()?;
    Some(items.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
}

fn string(v: Option<&Value>) -> Option<String> {
    v?.as_str().map(str::to_string)
}

fn flag(v: Option<&Value>) -> Option<bool> {
    v?.as_bool()
}

impl Traits {
    pub fn from_json(v: &Value) -> Traits {
        Traits {
            gender: string(v.get("gender")),
            races: string_set(v.get("races")).unwrap_or_default(),
            international: flag(v.get("international")),
            program: string(v.get("phd_program")),
            current_advisors: string_set(v.get("current_advisors")),
            prior_advisors: string_set(v.get("prior_advisors")),
            challenges: string_set(v.get("challenges_experienced")).unwrap_or_default(),
            advising_changed: flag(v.get("advising_status_changed")),
        }
    }

    /// Whether the profile says anything for `key`. Empty lists say nothing,
    /// except for the advisor lists where an empty list means "none".
    pub fn declares(&self, key: &str) -> bool {
        match key {
            "gender" => self.gender.is_some(),
            "races" => !self.races.is_empty(),
            "international" => self.international.is_some(),
            "phd_program" => self.program.is_some(),
            "current_advisors" => self.current_advisors.is_some(),
            "prior_advisors" => self.prior_advisors.is_some(),
            "challenges_experienced" => !self.challenges.is_empty(),
            "advising_status_changed" => self.advising_changed.is_some(),
            _ => false,
        }
    }

    fn advisors(&self) -> BTreeSet<&String> {
        self.current_advisors.iter().chain(self.prior_advisors.iter()).flatten().collect()
    }
}

/// A boundary as the oracle reads it. `None` means the dimension was left
/// open.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rule {
    pub gender: Option<BTreeSet<String>>,
    pub races: Option<BTreeSet<String>>,
    pub international: bool,
    pub challenges: Option<BTreeSet<String>>,
    pub advising_change: bool,
    pub programs: Option<BTreeSet<String>>,
    pub advised_by: Option<BTreeSet<String>>,
    pub not_advised_by: BTreeSet<String>,
    pub usernames: Option<BTreeSet<String>>,
    pub other_info: Option<String>,
    pub show_boundary: bool,
    pub parent_author_grant: bool,
}

impl Rule {
    pub fn from_json(v: &Value) -> Rule {
        let lower = |s: BTreeSet<String>| s.into_iter().map(|n| n.to_ascii_lowercase()).collect();
        Rule {
            gender: string_set(v.get("gender_allowed")),
            races: string_set(v.get("races_allowed")),
            international: flag(v.get("require_international")).unwrap_or(false),
            challenges: string_set(v.get("challenges_any")),
            advising_change: flag(v.get("require_advising_change")).unwrap_or(false),
            programs: string_set(v.get("programs_allowed")),
            advised_by: string_set(v.get("advised_by_any")),
            not_advised_by: string_set(v.get("not_advised_by")).unwrap_or_default(),
            usernames: string_set(v.get("usernames_allowed")).map(lower),
            other_info: string(v.get("other_info")).filter(|s| !s.trim().is_empty()),
            show_boundary: flag(v.get("show_boundary")).unwrap_or(false),
            parent_author_grant: flag(v.get("show_to_parent_author")).unwrap_or(true),
        }
    }

    /// Free text that has to be read by the moderator before anyone sees
    /// the node.
    pub fn needs_review(&self) -> bool {
        self.other_info.is_some()
    }

    /// Whether someone with these traits and usernames satisfies every
    /// restriction. Author and moderator exemptions are applied by the
    /// caller.
    pub fn admits(&self, t: &Traits, personas: &BTreeSet<String>) -> bool {
        let any_of = |allowed: &BTreeSet<String>, have: &BTreeSet<String>| have.iter().any(|h| allowed.contains(h));
        let one_of = |allowed: &BTreeSet<String>, have: &Option<String>| have.as_ref().is_some_and(|h| allowed.contains(h));

        if let Some(allowed) = &self.gender {
            if !one_of(allowed, &t.gender) {
                return false;
            }
        }
        if let Some(allowed) = &self.races {
            if !any_of(allowed, &t.races) {
                return false;
            }
        }
        if self.international && t.international != Some(true) {
            return false;
        }
        if let Some(allowed) = &self.challenges {
            if !any_of(allowed, &t.challenges) {
                return false;
            }
        }
        if self.advising_change && t.advising_changed != Some(true) {
            return false;
        }
        if let Some(allowed) = &self.programs {
            if !one_of(allowed, &t.program) {
                return false;
            }
        }
        let advisors = t.advisors();
        if let Some(allowed) = &self.advised_by {
            if !advisors.iter().any(|a| allowed.contains(*a)) {
                return false;
            }
        }
        if !self.not_advised_by.is_empty() {
            // Someone who has not said who advises them, or who advised them
            // before, cannot be shown to be clear of the excluded faculty.
            if t.current_advisors.is_none() || t.prior_advisors.is_none() {
                return false;
            }
            if advisors.iter().any(|a| self.not_advised_by.contains(*a)) {
                return false;
            }
        }
        if let Some(allowed) = &self.usernames {
            if !any_of(allowed, personas) {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sees(boundary: Value, traits: Value) -> bool {
        Rule::from_json(&boundary).admits(&Traits::from_json(&traits), &BTreeSet::new())
    }

    #[test]
    fn empty_boundary_admits_everyone() {
        assert!(sees(json!({}), json!({})));
    }

    #[test]
    fn worked_example_population() {
        let b = json!({
            "require_international": true,
            "not_advised_by": ["john-smith"],
            "challenges_any": ["communication-issue", "lack-of-feedback"]
        });
        let fit = json!({
            "international": true,
            "current_advisors": ["jane-doe"],
            "prior_advisors": [],
            "challenges_experienced": ["lack-of-feedback", "micromanagement"]
        });
        assert!(sees(b.clone(), fit.clone()));
        let mut prior_smith = fit.clone();
        prior_smith["prior_advisors"] = json!(["john-smith"]);
        assert!(!sees(b.clone(), prior_smith));
        let mut silent = fit.clone();
        silent.as_object_mut().unwrap().remove("prior_advisors");
        assert!(!sees(b.clone(), silent));
        let mut domestic = fit;
        domestic["international"] = json!(false);
        assert!(!sees(b, domestic));
    }

    #[test]
    fn blank_free_text_is_not_a_review_request() {
        assert!(!Rule::from_json(&json!({"other_info": "  "})).needs_review());
        assert!(Rule::from_json(&json!({"other_info": "my lab"})).needs_review());
        assert!(Rule::from_json(&json!({})).parent_author_grant);
    }

    #[test]
    fn usernames_compare_case_insensitively() {
        let rule = Rule::from_json(&json!({"usernames_allowed": ["River21"]}));
        assert!(rule.admits(&Traits::default(), &["river21".to_string()].into()));
    }
}
