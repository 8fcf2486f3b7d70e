//! Server configuration: one TOML file, then `CONSENT_*` environment
//! overrides. Relative paths in the file are taken relative to the file.

use std::path::{Path, PathBuf};

use consent_core::identity::DomainAllowList;
use consent_core::vocab::{VocabError, Vocabulary};
use consent_core::PlatformConfig;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid value for {key}: {value:?}")]
    Env { key: &'static str, value: String },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("vocabulary paths must be given together")]
    PartialVocab,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(default, deny_unknown_fields)]
pub struct VocabPaths {
    pub programs: Option<PathBuf>,
    pub faculty: Option<PathBuf>,
    pub challenges: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    /// Where the state snapshot lives. Without it state is memory-only.
    pub data_dir: Option<PathBuf>,
    /// Allow-list file, one domain per line.
    pub domain_allowlist: Option<PathBuf>,
    /// Domains listed inline, added to the file's.
    pub allowed_domains: Vec<String>,
    pub vocab: VocabPaths,
    pub moderator_email: Option<String>,
    /// Mail goes here as JSON lines. Without it mail is dropped.
    pub outbox: Option<PathBuf>,
    /// Moderator actions are mirrored here as JSON lines.
    pub audit_log: Option<PathBuf>,
    /// Requests allowed per session token.
    pub session_request_cap: u64,
    pub purge_deleted: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: None,
            domain_allowlist: None,
            allowed_domains: Vec::new(),
            vocab: VocabPaths::default(),
            moderator_email: None,
            outbox: None,
            audit_log: None,
            session_request_cap: 10_000,
            purge_deleted: false,
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl ServerConfig {
    /// Reads `file` (if any), then applies overrides from `env`.
    pub fn load(file: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(path) => {
                let mut c: ServerConfig = toml::from_str(&read(path)?)?;
                c.rebase(path.parent().unwrap_or(Path::new(".")));
                c
            }
            None => ServerConfig::default(),
        };
        config.apply_env(env)?;
        Ok(config)
    }

    pub fn from_env_and_file(file: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(file, |k| std::env::var(k).ok())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.domain_allowlist);
        fix(&mut self.vocab.programs);
        fix(&mut self.vocab.faculty);
        fix(&mut self.vocab.challenges);
        fix(&mut self.outbox);
        fix(&mut self.audit_log);
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let path = |k: &str| env(k).map(PathBuf::from);
        if let Some(v) = env("CONSENT_LISTEN") {
            self.listen = v;
        }
        let paths: [(&str, &mut Option<PathBuf>); 7] = [
            ("CONSENT_DATA_DIR", &mut self.data_dir),
            ("CONSENT_DOMAIN_ALLOWLIST", &mut self.domain_allowlist),
            ("CONSENT_VOCAB_PROGRAMS", &mut self.vocab.programs),
            ("CONSENT_VOCAB_FACULTY", &mut self.vocab.faculty),
            ("CONSENT_VOCAB_CHALLENGES", &mut self.vocab.challenges),
            ("CONSENT_OUTBOX", &mut self.outbox),
            ("CONSENT_AUDIT_LOG", &mut self.audit_log),
        ];
        for (key, slot) in paths {
            if let Some(p) = path(key) {
                *slot = Some(p);
            }
        }
        if let Some(v) = env("CONSENT_ALLOWED_DOMAINS") {
            self.allowed_domains = v.split(',').map(|d| d.trim().to_string()).filter(|d| !d.is_empty()).collect();
        }
        if let Some(v) = env("CONSENT_MODERATOR_EMAIL") {
            self.moderator_email = Some(v);
        }
        if let Some(v) = env("CONSENT_SESSION_REQUEST_CAP") {
            self.session_request_cap = v.parse().map_err(|_| ConfigError::Env {
                key: "CONSENT_SESSION_REQUEST_CAP",
                value: v,
            })?;
        }
        if let Some(v) = env("CONSENT_PURGE_DELETED") {
            self.purge_deleted = v.parse().map_err(|_| ConfigError::Env {
                key: "CONSENT_PURGE_DELETED",
                value: v,
            })?;
        }
        Ok(())
    }

    pub fn allowlist(&self) -> Result<DomainAllowList, ConfigError> {
        let mut text = match &self.domain_allowlist {
            Some(path) => read(path)?,
            None => String::new(),
        };
        for d in &self.allowed_domains {
            text.push('\n');
            text.push_str(d);
        }
        Ok(DomainAllowList::parse(&text))
    }

    /// The configured vocabulary, or the built-in one when no paths are set.
    pub fn vocabulary(&self) -> Result<Vocabulary, ConfigError> {
        match (&self.vocab.programs, &self.vocab.faculty, &self.vocab.challenges) {
            (None, None, None) => Ok(Vocabulary::seed()),
            (Some(p), Some(f), Some(c)) => Ok(Vocabulary::load(p, f, c)?),
            _ => Err(ConfigError::PartialVocab),
        }
    }

    pub fn platform_config(&self) -> Result<PlatformConfig, ConfigError> {
        Ok(PlatformConfig {
            allowlist: self.allowlist()?,
            moderator_email: self.moderator_email.clone(),
            vocab: self.vocabulary()?,
            purge_deleted: self.purge_deleted,
        })
    }
}
