//! Accounts, trait declarations, and the persona registry.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::boundary::ConsentBoundary;
use crate::clock::Timestamp;
use crate::engine::Member;
use crate::ids::{AccountId, InvalidPersonaName, PersonaName, ThreadId};
use crate::profile::{TraitField, TraitPatch, TraitProfile};
use crate::vocab::{VocabKind, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("malformed email address")]
    InvalidEmail,
    #[error("email domain {0:?} is not on the institutional allow-list")]
    DomainNotAllowed(String),
    #[error("email address already registered")]
    DuplicateEmail,
    #[error("persona {0} is taken")]
    PersonaTaken(PersonaName),
    #[error(transparent)]
    InvalidName(#[from] InvalidPersonaName),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("account is not pending review")]
    NotPending,
    #[error("moderator privileges required")]
    NotModerator,
    #[error("account is not active")]
    AccountNotActive,
    #[error("unknown {kind:?} id {id:?}")]
    UnknownVocabularyId { kind: VocabKind, id: String },
    #[error("persona {0} does not belong to this account")]
    PersonaNotOwned(PersonaName),
    #[error("already posting as {bound} in this thread")]
    PersonaMismatch { bound: PersonaName },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountStatus {
    Pending,
    Active,
    Rejected,
    Deactivated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignupDecision {
    Approve,
    Reject,
}

/// One changed profile field. Values are the field's JSON form, `null` when
/// undeclared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitAuditRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub account: AccountId,
    pub field: TraitField,
    pub old: serde_json::Value,
    pub new: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    pub contact_email: String,
    /// Institutional domain checked at sign-up. Kept when the contact
    /// address later changes.
    pub verified_domain: String,
    pub email_domain_verified: bool,
    pub status: AccountStatus,
    pub moderator: bool,
    pub default_persona: PersonaName,
    pub personas: BTreeSet<PersonaName>,
    pub default_boundary: Option<ConsentBoundary>,
    pub profile: TraitProfile,
    /// Profile as submitted at sign-up; replaying `trait_audit` over it gives `profile`.
    pub initial_profile: TraitProfile,
    pub created_at: Timestamp,
    pub trait_audit: Vec<TraitAuditRecord>,
}

impl Account {
    pub fn is_active(&self) -> bool {
        self.status == AccountStatus::Active
    }

    pub fn member(&self) -> Member<'_> {
        Member {
            account: self.id,
            profile: &self.profile,
            personas: &self.personas,
            moderator: self.moderator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: PersonaName,
    pub owner: AccountId,
    pub created_at: Timestamp,
}

/// Institutional email domains. A listed domain also admits its subdomains.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainAllowList {
    domains: BTreeSet<String>,
}

impl DomainAllowList {
    /// One domain per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let domains = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        DomainAllowList { domains }
    }

    pub fn from_domains<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        DomainAllowList {
            domains: domains
                .into_iter()
                .map(|d| d.as_ref().to_ascii_lowercase())
                .collect(),
        }
    }

    pub fn allows(&self, domain: &str) -> bool {
        let domain = domain.to_ascii_lowercase();
        self.domains.iter().any(|d| {
            domain == *d
                || domain
                    .strip_suffix(d.as_str())
                    .is_some_and(|head| head.ends_with('.'))
        })
    }
}

/// Lowercased address and its domain, if well formed.
pub fn parse_email(raw: &str) -> Result<(String, String), IdentityError> {
    let email = raw.trim().to_ascii_lowercase();
    let (local, domain) = email.split_once('@').ok_or(IdentityError::InvalidEmail)?;
    let domain_ok = domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !domain.contains("..");
    let chars_ok = !email.chars().any(|c| c.is_whitespace() || c.is_control());
    if local.is_empty() || domain.contains('@') || !domain_ok || !chars_ok {
        return Err(IdentityError::InvalidEmail);
    }
    let domain = domain.to_string();
    Ok((email, domain))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IdentityRegistry {
    allowlist: DomainAllowList,
    moderator_email: Option<String>,
    accounts: BTreeMap<AccountId, Account>,
    by_email: BTreeMap<String, AccountId>,
    personas: BTreeMap<PersonaName, Persona>,
    bindings: BTreeMap<ThreadId, BTreeMap<AccountId, PersonaName>>,
    next_account: u64,
    next_audit_seq: u64,
}

impl IdentityRegistry {
    /// `moderator_email`, when it registers, becomes the single moderator
    /// account and skips review.
    pub fn new(allowlist: DomainAllowList, moderator_email: Option<&str>) -> Self {
        IdentityRegistry {
            allowlist,
            moderator_email: moderator_email.map(|e| e.trim().to_ascii_lowercase()),
            next_account: 1,
            next_audit_seq: 1,
            ..Default::default()
        }
    }

    /// Takes the domain policy and moderator address from `other`.
    pub fn adopt_policy(&mut self, other: &IdentityRegistry) {
        self.allowlist = other.allowlist.clone();
        self.moderator_email = other.moderator_email.clone();
    }

    pub fn account(&self, id: AccountId) -> Result<&Account, IdentityError> {
        self.accounts.get(&id).ok_or(IdentityError::UnknownAccount(id))
    }

    fn account_mut(&mut self, id: AccountId) -> Result<&mut Account, IdentityError> {
        self.accounts.get_mut(&id).ok_or(IdentityError::UnknownAccount(id))
    }

    pub fn active_account(&self, id: AccountId) -> Result<&Account, IdentityError> {
        let acct = self.account(id)?;
        if acct.is_active() {
            Ok(acct)
        } else {
            Err(IdentityError::AccountNotActive)
        }
    }

    pub fn find_by_email(&self, email: &str) -> Option<&Account> {
        let email = email.trim().to_ascii_lowercase();
        self.by_email.get(&email).and_then(|id| self.accounts.get(id))
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    /// Active accounts, the only eligible audience members.
    pub fn population(&self) -> Vec<Member<'_>> {
        self.accounts
            .values()
            .filter(|a| a.is_active())
            .map(Account::member)
            .collect()
    }

    pub fn moderator(&self) -> Option<&Account> {
        self.accounts.values().find(|a| a.moderator && a.is_active())
    }

    pub fn persona(&self, name: &PersonaName) -> Option<&Persona> {
        self.personas.get(name)
    }

    /// Creates a pending account and reserves its first persona.
    pub fn register(
        &mut self,
        email: &str,
        traits: TraitProfile,
        persona: &str,
        vocab: &Vocabulary,
        now: Timestamp,
    ) -> Result<&Account, IdentityError> {
        let (email, domain) = parse_email(email)?;
        if !self.allowlist.allows(&domain) {
            return Err(IdentityError::DomainNotAllowed(domain));
        }
        if self.by_email.contains_key(&email) {
            return Err(IdentityError::DuplicateEmail);
        }
        if let Some((kind, id)) = vocab.unknown_in_profile(&traits) {
            return Err(IdentityError::UnknownVocabularyId { kind, id });
        }
        let name = PersonaName::new(persona)?;
        if self.personas.contains_key(&name) {
            return Err(IdentityError::PersonaTaken(name));
        }

        let id = AccountId(self.next_account);
        self.next_account += 1;
        let moderator = self.moderator_email.as_deref() == Some(email.as_str())
            && self.moderator().is_none();
        self.personas.insert(
            name.clone(),
            Persona {
                name: name.clone(),
                owner: id,
                created_at: now,
            },
        );
        self.by_email.insert(email.clone(), id);
        let account = Account {
            id,
            contact_email: email,
            verified_domain: domain,
            email_domain_verified: true,
            status: if moderator {
                AccountStatus::Active
            } else {
                AccountStatus::Pending
            },
            moderator,
            default_persona: name.clone(),
            personas: [name].into(),
            default_boundary: None,
            initial_profile: traits.clone(),
            profile: traits,
            created_at: now,
            trait_audit: Vec::new(),
        };
        Ok(self.accounts.entry(id).or_insert(account))
    }

    /// Errors unless `id` is the active moderator.
    pub fn require_moderator(&self, id: AccountId) -> Result<&Account, IdentityError> {
        match self.accounts.get(&id) {
            Some(a) if a.moderator && a.is_active() => Ok(a),
            _ => Err(IdentityError::NotModerator),
        }
    }

    pub fn approve_signup(
        &mut self,
        moderator: AccountId,
        account: AccountId,
        decision: SignupDecision,
    ) -> Result<&Account, IdentityError> {
        self.require_moderator(moderator)?;
        let acct = self.account_mut(account)?;
        if acct.status != AccountStatus::Pending {
            return Err(IdentityError::NotPending);
        }
        acct.status = match decision {
            SignupDecision::Approve => AccountStatus::Active,
            SignupDecision::Reject => AccountStatus::Rejected,
        };
        Ok(acct)
    }

    /// Applies a profile patch and appends one audit record per changed field.
    pub fn update_traits(
        &mut self,
        account: AccountId,
        patch: &TraitPatch,
        vocab: &Vocabulary,
        now: Timestamp,
    ) -> Result<(TraitProfile, Vec<TraitAuditRecord>), IdentityError> {
        let acct = self.account(account)?;
        if !acct.is_active() {
            return Err(IdentityError::AccountNotActive);
        }
        let updated = patch.apply_to(&acct.profile);
        if let Some((kind, id)) = vocab.unknown_in_profile(&updated) {
            return Err(IdentityError::UnknownVocabularyId { kind, id });
        }
        let current = acct.profile.clone();
        let mut records = Vec::new();
        for field in TraitField::ALL {
            let (old, new) = (current.field_value(field), updated.field_value(field));
            if old != new {
                records.push(TraitAuditRecord {
                    seq: self.next_audit_seq,
                    at: now,
                    account,
                    field,
                    old,
                    new,
                });
                self.next_audit_seq += 1;
            }
        }
        let acct = self.account_mut(account)?;
        acct.profile = updated.clone();
        acct.trait_audit.extend(records.iter().cloned());
        Ok((updated, records))
    }

    /// Every trait change across all accounts, oldest first.
    pub fn trait_audit_feed(&self) -> Vec<&TraitAuditRecord> {
        let mut feed: Vec<_> = self.accounts.values().flat_map(|a| &a.trait_audit).collect();
        feed.sort_by_key(|r| r.seq);
        feed
    }

    pub fn claim_persona(
        &mut self,
        account: AccountId,
        raw: &str,
        now: Timestamp,
    ) -> Result<&Persona, IdentityError> {
        self.active_account(account)?;
        let name = PersonaName::new(raw)?;
        if self.personas.contains_key(&name) {
            return Err(IdentityError::PersonaTaken(name));
        }
        self.account_mut(account)?.personas.insert(name.clone());
        Ok(self.personas.entry(name.clone()).or_insert(Persona {
            name,
            owner: account,
            created_at: now,
        }))
    }

    /// Locks `persona` as the account's name in `thread`. Repeating the same
    /// persona is a no-op; a different one is refused.
    pub fn bind_thread_persona(
        &mut self,
        account: AccountId,
        thread: ThreadId,
        persona: &PersonaName,
    ) -> Result<(), IdentityError> {
        self.check_thread_persona(account, thread, persona)?;
        self.bindings
            .entry(thread)
            .or_default()
            .entry(account)
            .or_insert_with(|| persona.clone());
        Ok(())
    }

    /// The checks `bind_thread_persona` performs, without binding.
    pub fn check_thread_persona(
        &self,
        account: AccountId,
        thread: ThreadId,
        persona: &PersonaName,
    ) -> Result<(), IdentityError> {
        match self.personas.get(persona) {
            Some(p) if p.owner == account => {}
            _ => return Err(IdentityError::PersonaNotOwned(persona.clone())),
        }
        match self.thread_persona(account, thread) {
            Some(bound) if bound != persona => Err(IdentityError::PersonaMismatch {
                bound: bound.clone(),
            }),
            _ => Ok(()),
        }
    }

    pub fn thread_persona(&self, account: AccountId, thread: ThreadId) -> Option<&PersonaName> {
        self.bindings.get(&thread).and_then(|b| b.get(&account))
    }

    /// Personas that have posted or commented in the thread.
    pub fn thread_participants(&self, thread: ThreadId) -> BTreeSet<PersonaName> {
        self.bindings
            .get(&thread)
            .map(|b| b.values().cloned().collect())
            .unwrap_or_default()
    }

    pub fn thread_participant_accounts(&self, thread: ThreadId) -> BTreeSet<AccountId> {
        self.bindings
            .get(&thread)
            .map(|b| b.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn set_default_boundary(
        &mut self,
        account: AccountId,
        boundary: Option<ConsentBoundary>,
    ) -> Result<(), IdentityError> {
        self.active_account(account)?;
        self.account_mut(account)?.default_boundary = boundary;
        Ok(())
    }

    pub fn set_default_persona(
        &mut self,
        account: AccountId,
        persona: &PersonaName,
    ) -> Result<(), IdentityError> {
        let acct = self.active_account(account)?;
        if !acct.personas.contains(persona) {
            return Err(IdentityError::PersonaNotOwned(persona.clone()));
        }
        self.account_mut(account)?.default_persona = persona.clone();
        Ok(())
    }

    /// Changes the contact address. Any well-formed address is accepted;
    /// the sign-up domain evidence is left untouched.
    pub fn change_email(&mut self, account: AccountId, raw: &str) -> Result<(), IdentityError> {
        self.active_account(account)?;
        let (email, _) = parse_email(raw)?;
        match self.by_email.get(&email) {
            Some(owner) if *owner == account => return Ok(()),
            Some(_) => return Err(IdentityError::DuplicateEmail),
            None => {}
        }
        let acct = self.account_mut(account)?;
        let old = std::mem::replace(&mut acct.contact_email, email.clone());
        self.by_email.remove(&old);
        self.by_email.insert(email, account);
        Ok(())
    }

    /// Removes the account from every audience. Its personas stay reserved.
    pub fn deactivate(&mut self, actor: AccountId, target: AccountId) -> Result<(), IdentityError> {
        if actor != target {
            self.require_moderator(actor)?;
        }
        let acct = self.account_mut(target)?;
        acct.status = AccountStatus::Deactivated;
        Ok(())
    }
}
