use std::collections::BTreeSet;

use crate::boundary::{ConsentBoundary, Dimension, Restriction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RestrictionError {
    #[error("edit widens {0}")]
    WideningViolation(Dimension),
    #[error("edit re-enables the reply-to grant for the parent's author")]
    ParentGrantWidened,
    #[error("the other-information text cannot be edited after posting")]
    OtherInfoChanged,
}

/// Accepts `new` only if it is a dimension-wise narrowing of `old`.
///
/// The check is syntactic so that it stays sound for accounts that register
/// later. `show_boundary` is free to change. The reply-to grant may be
/// switched off but not back on, since that would widen the audience.
pub fn check_restriction(old: &ConsentBoundary, new: &ConsentBoundary) -> Result<(), RestrictionError> {
    use RestrictionError::WideningViolation as Widen;

    narrows(&old.gender_allowed, &new.gender_allowed).then_some(()).ok_or(Widen(Dimension::Gender))?;
    narrows(&old.races_allowed, &new.races_allowed).then_some(()).ok_or(Widen(Dimension::Races))?;
    if old.require_international && !new.require_international {
        return Err(Widen(Dimension::International));
    }
    narrows(&old.challenges_any, &new.challenges_any)
        .then_some(())
        .ok_or(Widen(Dimension::Challenges))?;
    if old.require_advising_change && !new.require_advising_change {
        return Err(Widen(Dimension::AdvisingChange));
    }
    narrows(&old.programs_allowed, &new.programs_allowed)
        .then_some(())
        .ok_or(Widen(Dimension::Programs))?;
    narrows(&old.advised_by_any, &new.advised_by_any)
        .then_some(())
        .ok_or(Widen(Dimension::AdvisedBy))?;
    if !old.not_advised_by.is_subset(&new.not_advised_by) {
        return Err(Widen(Dimension::NotAdvisedBy));
    }
    narrows(&old.usernames_allowed, &new.usernames_allowed)
        .then_some(())
        .ok_or(Widen(Dimension::Usernames))?;
    if old.other_info != new.other_info {
        return Err(RestrictionError::OtherInfoChanged);
    }
    if !old.show_to_parent_author && new.show_to_parent_author {
        return Err(RestrictionError::ParentGrantWidened);
    }
    Ok(())
}

fn narrows<T: Ord>(old: &Restriction<BTreeSet<T>>, new: &Restriction<BTreeSet<T>>) -> bool {
    match (old, new) {
        (_, Restriction::Unrestricted) => old.is_unrestricted(),
        (Restriction::Unrestricted, Restriction::Restricted(_)) => true,
        (Restriction::Restricted(o), Restriction::Restricted(n)) => n.is_subset(o),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asian() -> ConsentBoundary {
        ConsentBoundary {
            races_allowed: Restriction::Restricted(["asian".to_string()].into()),
            ..ConsentBoundary::public()
        }
    }

    #[test]
    fn public_to_asian_to_asian_and_switched() {
        let step2 = ConsentBoundary {
            require_advising_change: true,
            ..asian()
        };
        assert_eq!(check_restriction(&ConsentBoundary::public(), &asian()), Ok(()));
        assert_eq!(check_restriction(&asian(), &step2), Ok(()));
        assert_eq!(
            check_restriction(&step2, &asian()),
            Err(RestrictionError::WideningViolation(Dimension::AdvisingChange))
        );
    }

    #[test]
    fn dropping_a_restriction_is_widening() {
        assert_eq!(
            check_restriction(&asian(), &ConsentBoundary::public()),
            Err(RestrictionError::WideningViolation(Dimension::Races))
        );
    }

    #[test]
    fn sets_may_only_shrink_and_exclusions_only_grow() {
        let two = ConsentBoundary {
            races_allowed: Restriction::Restricted(["asian".to_string(), "black".to_string()].into()),
            not_advised_by: ["john-smith".into()].into(),
            ..ConsentBoundary::public()
        };
        let one = ConsentBoundary {
            races_allowed: Restriction::Restricted(["asian".to_string()].into()),
            not_advised_by: ["john-smith".into(), "jane-doe".into()].into(),
            ..ConsentBoundary::public()
        };
        assert_eq!(check_restriction(&two, &one), Ok(()));
        assert!(check_restriction(&one, &two).is_err());
        let fewer_excl = ConsentBoundary {
            not_advised_by: BTreeSet::new(),
            ..two.clone()
        };
        assert_eq!(
            check_restriction(&two, &fewer_excl),
            Err(RestrictionError::WideningViolation(Dimension::NotAdvisedBy))
        );
    }

    #[test]
    fn display_flag_is_exempt_and_grant_only_turns_off() {
        let shown = ConsentBoundary {
            show_boundary: true,
            ..asian()
        };
        assert_eq!(check_restriction(&shown, &asian()), Ok(()));
        assert_eq!(check_restriction(&asian(), &shown), Ok(()));

        let no_grant = ConsentBoundary {
            show_to_parent_author: false,
            ..asian()
        };
        assert_eq!(check_restriction(&asian(), &no_grant), Ok(()));
        assert_eq!(
            check_restriction(&no_grant, &asian()),
            Err(RestrictionError::ParentGrantWidened)
        );
    }

    #[test]
    fn other_info_is_frozen() {
        let held = ConsentBoundary {
            other_info: Some("my lab".into()),
            ..ConsentBoundary::public()
        };
        assert_eq!(check_restriction(&held, &held), Ok(()));
        assert_eq!(
            check_restriction(&ConsentBoundary::public(), &held),
            Err(RestrictionError::OtherInfoChanged)
        );
    }
}
