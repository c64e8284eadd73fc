//! Recognizers for the behavioral regimes of executed runs.
//!
//! Three agent populations produce three characteristic run shapes:
//!
//! - healthy: every step succeeds and the run passes;
//! - error-prone: the agent sometimes reports hard errors but never lies,
//!   so runs end in a pass or halt inconclusive at a guardrail, and a
//!   failure verdict is impossible;
//! - hallucinating: the agent sometimes answers confidently wrong but
//!   never errors, so failure verdicts become reachable and a wrong answer
//!   can override a guardrail.
//!
//! The recognizers judge a finished run from its records alone, with no
//! access to ground truth, which is what makes them usable as acceptance
//! checks on batches produced under each population.

use serde::Serialize;

use crate::executor::{ExecutionResult, StepKind, StepOutcome};
use crate::model::Verdict;
use crate::strict::StrictOutcome;

/// How a halted run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Halt {
    /// The page did not change as claimed, or success was not claimed.
    NotObserve,
    /// The page was judged not ready for the next instruction.
    NotReady,
    /// An agent reported a hard error.
    AgentError,
    /// An assertion evaluated false.
    FailedAssertion,
}

/// What stopped the run, `None` when it ran to completion.
#[must_use]
pub fn halt_kind(r: &ExecutionResult) -> Option<Halt> {
    let last = r.steps.last()?;
    match (last.kind, last.outcome) {
        (_, StepOutcome::Continued) => None,
        (StepKind::Observe, _) => Some(Halt::NotObserve),
        (StepKind::Readiness, _) => {
            if last.error.is_some() {
                Some(Halt::AgentError)
            } else {
                Some(Halt::NotReady)
            }
        }
        (StepKind::Assertion, StepOutcome::Halted(Verdict::Fail)) => Some(Halt::FailedAssertion),
        (StepKind::Assertion, _) => Some(Halt::AgentError),
        // Navigation itself never halts; its guardrails do.
        (StepKind::Nav, _) => None,
    }
}

/// A fully green run: passed, every step continued with a true result and
/// no errors anywhere.
#[must_use]
pub fn matches_healthy(r: &ExecutionResult) -> bool {
    r.verdict == Verdict::Pass
        && r.steps.iter().all(|s| {
            s.outcome == StepOutcome::Continued && s.result == Some(true) && s.error.is_none()
        })
}

/// A run compatible with an agent that errs but never lies: no failure
/// verdict, and an inconclusive run stops at a guardrail or an error.
#[must_use]
pub fn matches_error_prone(r: &ExecutionResult) -> bool {
    match r.verdict {
        Verdict::Fail => false,
        Verdict::Pass => true,
        Verdict::Inc => matches!(
            halt_kind(r),
            Some(Halt::NotObserve | Halt::NotReady | Halt::AgentError)
        ),
    }
}

/// A run compatible with an agent that lies but never errors: any verdict,
/// as long as no step recorded a hard error.
#[must_use]
pub fn matches_hallucinating(r: &ExecutionResult) -> bool {
    r.steps.iter().all(|s| s.error.is_none())
}

/// Readiness steps where the strict formula said "not ready" but an agent
/// answer let the run continue anyway. Under a truthful agent this count is
/// zero on any run; a positive count is the signature of a masked fault.
#[must_use]
pub fn overridden_readiness_count(r: &ExecutionResult) -> usize {
    r.steps
        .iter()
        .filter(|s| {
            s.kind == StepKind::Readiness
                && matches!(&s.strict, Some(e) if e.outcome == StrictOutcome::False)
                && s.result == Some(true)
        })
        .count()
}
