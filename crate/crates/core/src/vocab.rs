//! Controlled vocabularies: PhD programs, faculty, and the advising-challenge
//! taxonomy. Each list is a JSON array of `{ "id": ..., "label": ... }`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ids::{ChallengeId, FacultyId, ProgramId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: String,
    pub label: String,
}

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate vocabulary id {0:?}")]
    Duplicate(String),
}

/// Which vocabulary an id belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabKind {
    Program,
    Faculty,
    Challenge,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub programs: BTreeMap<String, String>,
    pub faculty: BTreeMap<String, String>,
    pub challenges: BTreeMap<String, String>,
}

impl Vocabulary {
    pub fn from_entries(
        programs: Vec<VocabEntry>,
        faculty: Vec<VocabEntry>,
        challenges: Vec<VocabEntry>,
    ) -> Result<Self, VocabError> {
        fn index(entries: Vec<VocabEntry>) -> Result<BTreeMap<String, String>, VocabError> {
            let mut out = BTreeMap::new();
            for e in entries {
                if out.insert(e.id.clone(), e.label).is_some() {
                    return Err(VocabError::Duplicate(e.id));
                }
            }
            Ok(out)
        }
        Ok(Vocabulary {
            programs: index(programs)?,
            faculty: index(faculty)?,
            challenges: index(challenges)?,
        })
    }

    pub fn load(programs: &Path, faculty: &Path, challenges: &Path) -> Result<Self, VocabError> {
        fn read(path: &Path) -> Result<Vec<VocabEntry>, VocabError> {
            let shown = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|source| VocabError::Io {
                path: shown.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| VocabError::Parse {
                path: shown,
                source,
            })
        }
        Self::from_entries(read(programs)?, read(faculty)?, read(challenges)?)
    }

    /// Built-in vocabulary: two programs, a handful of faculty, and the
    /// advising-challenge taxonomy.
    pub fn seed() -> Self {
        let e = |id: &str, label: &str| VocabEntry {
            id: id.into(),
            label: label.into(),
        };
        Self::from_entries(
            vec![
                e("cs", "Computer Science PhD"),
                e("info", "Information Science PhD"),
            ],
            vec![
                e("john-smith", "John Smith"),
                e("jane-doe", "Jane Doe"),
                e("ana-lima", "Ana Lima"),
                e("wei-chen", "Wei Chen"),
                e("omar-haddad", "Omar Haddad"),
                e("ruth-okafor", "Ruth Okafor"),
            ],
            vec![
                e("micromanagement", "Micromanagement"),
                e("communication-issue", "Communication issues"),
                e("lack-of-feedback", "Lack of feedback"),
                e("lack-of-support", "Lack of support"),
                e("unrealistic-expectations", "Unrealistic expectations"),
                e("authorship-dispute", "Authorship disputes"),
                e("funding-pressure", "Funding pressure"),
                e("work-life-balance", "Work-life balance"),
                e("harassment", "Harassment or disrespect"),
            ],
        )
        .expect("seed vocabulary has unique ids")
    }

    pub fn has_program(&self, id: &ProgramId) -> bool {
        self.programs.contains_key(id.as_str())
    }

    pub fn has_faculty(&self, id: &FacultyId) -> bool {
        self.faculty.contains_key(id.as_str())
    }

    pub fn has_challenge(&self, id: &ChallengeId) -> bool {
        self.challenges.contains_key(id.as_str())
    }

    /// First id in the profile that the vocabulary does not know.
    pub fn unknown_in_profile(&self, p: &crate::profile::TraitProfile) -> Option<(VocabKind, String)> {
        if let Some(prog) = p.phd_program.as_ref().filter(|p| !self.has_program(p)) {
            return Some((VocabKind::Program, prog.to_string()));
        }
        if let Some(f) = p.all_advisors().find(|f| !self.has_faculty(f)) {
            return Some((VocabKind::Faculty, f.to_string()));
        }
        p.challenges_experienced
            .iter()
            .find(|c| !self.has_challenge(c))
            .map(|c| (VocabKind::Challenge, c.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_json_lists_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &str| {
            let p = dir.path().join(name);
            std::fs::write(&p, body).unwrap();
            p
        };
        let programs = write("programs.json", r#"[{"id":"cs","label":"CS"}]"#);
        let faculty = write("faculty.json", r#"[{"id":"john-smith","label":"John Smith"}]"#);
        let challenges = write("challenges.json", r#"[{"id":"micromanagement","label":"M"}]"#);
        let v = Vocabulary::load(&programs, &faculty, &challenges).unwrap();
        assert!(v.has_faculty(&"john-smith".into()));
        assert!(!v.has_program(&"info".into()));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = VocabEntry {
            id: "x".into(),
            label: "X".into(),
        };
        assert!(matches!(
            Vocabulary::from_entries(vec![e.clone(), e], vec![], vec![]),
            Err(VocabError::Duplicate(_))
        ));
    }
}
