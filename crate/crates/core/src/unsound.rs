//! Bounded-deviation classification for runs with unreliable agents.
//!
//! A guarded executor is never fully sound once agents answer some steps:
//! a wrong answer can leak through. What can be guaranteed is a bound on
//! how far results deviate, provided the per-role answer deviations stay
//! small enough. The reference level is the deviation of an agent whose
//! success probability matches the conventional three-sigma quantile:
//!
//! ```text
//! P3     = 0.9332
//! SIGMA3 = sigma(P3) = 0.2496 (to four places)
//! ```
//!
//! Two sufficient conditions bound the deviation of a test case's verdict:
//!
//! 1. every role deviation (navigation, readiness, assertion) is below
//!    `SIGMA3`, or
//! 2. the case is entirely strict, so readiness and assertions never rely
//!    on agent judgment, and the navigation deviation alone is below
//!    `SIGMA3`.
//!
//! `classify` reports which of the two holds; with neither, no bound is
//! claimed.

use serde::Serialize;

use crate::strict::StrictnessProfile;

/// Success probability at the conventional three-sigma quantile.
pub const P3: f64 = 0.9332;

/// Reference deviation level: `sigma(P3)` rounded to four places.
pub const SIGMA3: f64 = 0.2496;

/// Per-role answer deviations of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaTriple {
    pub sigma_nav: f64,
    pub sigma_readiness: f64,
    pub sigma_assert: f64,
}

impl SigmaTriple {
    /// All three roles below the bound (strictly).
    #[must_use]
    pub fn all_below(&self, bound: f64) -> bool {
        self.sigma_nav < bound && self.sigma_readiness < bound && self.sigma_assert < bound
    }

    #[must_use]
    pub fn max(&self) -> f64 {
        self.sigma_nav
            .max(self.sigma_readiness)
            .max(self.sigma_assert)
    }
}

/// Which sufficient condition establishes the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundWitness {
    /// Every role deviation is below the reference level.
    AllRolesBelow,
    /// The case is fully strict and navigation deviation is below the level.
    StrictCaseNavBelow,
}

/// Outcome of the classification for one case and one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub bounded: bool,
    /// Conditions that hold; empty exactly when `bounded` is false.
    pub witnesses: Vec<BoundWitness>,
    /// Why no bound holds, empty when one does.
    pub blockers: Vec<String>,
}

/// Classifies whether the verdict deviation of a case is bounded at the
/// reference level, given the agent's measured deviations.
#[must_use]
pub fn classify(profile: &StrictnessProfile, sigmas: &SigmaTriple) -> Classification {
    let mut witnesses = Vec::new();
    if sigmas.all_below(SIGMA3) {
        witnesses.push(BoundWitness::AllRolesBelow);
    }
    if profile.all_strict() && sigmas.sigma_nav < SIGMA3 {
        witnesses.push(BoundWitness::StrictCaseNavBelow);
    }
    if !witnesses.is_empty() {
        return Classification {
            bounded: true,
            witnesses,
            blockers: Vec::new(),
        };
    }
    let mut blockers = Vec::new();
    for (name, sigma) in [
        ("navigation", sigmas.sigma_nav),
        ("readiness", sigmas.sigma_readiness),
        ("assertion", sigmas.sigma_assert),
    ] {
        if sigma >= SIGMA3 {
            blockers.push(format!("{name} deviation {sigma:.4} is not below {SIGMA3}"));
        }
    }
    if !profile.all_strict() {
        blockers.push("the case has non-strict steps, so role deviations all matter".into());
    }
    Classification {
        bounded: false,
        witnesses: Vec::new(),
        blockers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strict::strictness_of;
    use crate::suite::parse_test_suite;

    fn profile(text: &str) -> StrictnessProfile {
        let suite = parse_test_suite(text).unwrap();
        strictness_of(&suite.cases[0])
    }

    const STRICT_CASE: &str = "\
# test strict
action: Open the website 'u://x'
action: Click on 'Go'
assert: 'Done' is present
";

    const MIXED_CASE: &str = "\
# test mixed
action: Open the website 'u://x'
action: Meander toward the goal
assert: everything looks right
";

    #[test]
    fn reference_level_matches_its_probability() {
        let sigma = (P3 * (1.0 - P3)).sqrt();
        assert!((sigma - SIGMA3).abs() < 5e-4, "sigma({P3}) = {sigma}");
    }

    #[test]
    fn all_roles_below_bounds_any_case() {
        let sigmas = SigmaTriple {
            sigma_nav: 0.1,
            sigma_readiness: 0.2,
            sigma_assert: 0.24,
        };
        let c = classify(&profile(MIXED_CASE), &sigmas);
        assert!(c.bounded);
        assert_eq!(c.witnesses, vec![BoundWitness::AllRolesBelow]);
    }

    #[test]
    fn strict_case_only_needs_navigation() {
        let sigmas = SigmaTriple {
            sigma_nav: 0.2,
            sigma_readiness: 0.5,
            sigma_assert: 0.5,
        };
        let c = classify(&profile(STRICT_CASE), &sigmas);
        assert!(c.bounded);
        assert_eq!(c.witnesses, vec![BoundWitness::StrictCaseNavBelow]);
        // The same deviations leave a mixed case unbounded.
        let c = classify(&profile(MIXED_CASE), &sigmas);
        assert!(!c.bounded);
        assert_eq!(c.blockers.len(), 3);
    }

    #[test]
    fn both_witnesses_can_hold_at_once() {
        let sigmas = SigmaTriple {
            sigma_nav: 0.1,
            sigma_readiness: 0.1,
            sigma_assert: 0.1,
        };
        let c = classify(&profile(STRICT_CASE), &sigmas);
        assert_eq!(
            c.witnesses,
            vec![
                BoundWitness::AllRolesBelow,
                BoundWitness::StrictCaseNavBelow
            ]
        );
    }

    #[test]
    fn the_bound_is_strict_at_the_boundary() {
        let sigmas = SigmaTriple {
            sigma_nav: SIGMA3,
            sigma_readiness: 0.0,
            sigma_assert: 0.0,
        };
        let c = classify(&profile(STRICT_CASE), &sigmas);
        assert!(!c.bounded, "equal to the level is not below it");
    }

    #[test]
    fn triple_helpers() {
        let s = SigmaTriple {
            sigma_nav: 0.1,
            sigma_readiness: 0.3,
            sigma_assert: 0.2,
        };
        assert_eq!(s.max(), 0.3);
        assert!(s.all_below(0.31));
        assert!(!s.all_below(0.3));
    }
}
