use std::collections::BTreeSet;

use crate::boundary::{ConsentBoundary, Restriction};
use crate::ids::{AccountId, PersonaName};
use crate::profile::TraitProfile;

/// Who is looking, and at whose content.
#[derive(Debug, Clone, Copy)]
pub struct MatchContext<'a> {
    pub viewer: AccountId,
    pub profile: &'a TraitProfile,
    /// Personas owned by `viewer`.
    pub personas: &'a BTreeSet<PersonaName>,
    pub author: AccountId,
    pub moderator: bool,
}

/// Whether a viewer falls inside a single boundary.
///
/// All restricted dimensions must pass. An undeclared trait fails every
/// dimension that looks at it, including the advisor exclusion list, which
/// needs both advisor fields declared before it can be satisfied.
pub fn matches(boundary: &ConsentBoundary, ctx: &MatchContext<'_>) -> bool {
    if ctx.moderator || ctx.viewer == ctx.author {
        return true;
    }
    let p = ctx.profile;

    if let Restriction::Restricted(allowed) = &boundary.gender_allowed {
        match &p.gender {
            Some(g) if allowed.contains(g) => {}
            _ => return false,
        }
    }
    if let Restriction::Restricted(allowed) = &boundary.races_allowed {
        if p.races.is_disjoint(allowed) {
            return false;
        }
    }
    if boundary.require_international && p.international != Some(true) {
        return false;
    }
    if let Restriction::Restricted(any) = &boundary.challenges_any {
        if p.challenges_experienced.is_disjoint(any) {
            return false;
        }
    }
    if boundary.require_advising_change && p.advising_status_changed != Some(true) {
        return false;
    }
    if let Restriction::Restricted(allowed) = &boundary.programs_allowed {
        if !p.phd_program.as_ref().is_some_and(|prog| allowed.contains(prog)) {
            return false;
        }
    }
    if let Restriction::Restricted(any) = &boundary.advised_by_any {
        if !p.all_advisors().any(|f| any.contains(f)) {
            return false;
        }
    }
    if !boundary.not_advised_by.is_empty() {
        let declared = p.current_advisors.is_some() && p.prior_advisors.is_some();
        if !declared || p.all_advisors().any(|f| boundary.not_advised_by.contains(f)) {
            return false;
        }
    }
    if let Restriction::Restricted(names) = &boundary.usernames_allowed {
        if ctx.personas.is_disjoint(names) {
            return false;
        }
    }
    true
}
