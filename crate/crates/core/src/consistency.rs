//! Consistency measures and agent calibration.
//!
//! An unreliable agent answers each consulted step correctly with some
//! probability p. The per-step deviation score
//!
//! ```text
//! sigma(p) = sqrt(p * (1 - p))
//! ```
//!
//! is the standard deviation of that Bernoulli answer. A step settled by a
//! strict formula scores a full 1; a step that consults the agent scores
//! `1 - 2 * sigma`, discounting twice the deviation. Navigation is always
//! agent-performed, so its score factor applies to every navigation step,
//! multiplied by the readiness factor guarding it. The consistency of a
//! test case is the mean step score
//!
//! ```text
//! consistency(tc) = (sum_i s_r(a_i) * s_n(a_i) + sum_j s_a(A_j)) / l
//! ```
//!
//! with `s_r`, `s_a` equal to 1 on strict steps (decided by parsing alone)
//! and `1 - 2 * sigma_role` otherwise, and `s_n = 1 - 2 * sigma_nav`.
//!
//! `eval_agents` estimates the per-role success rates of an agent by
//! replaying suite steps as isolated trials against ground truth, which is
//! how those sigmas are obtained for a real agent.

use serde::Serialize;
use thiserror::Error;

use crate::agents::{expr_truth, readiness_truth, Agent, NavStatus};
use crate::executor::ExecutionResult;
use crate::model::{TestCase, Verdict};
use crate::sim::{AutModel, SimSession};
use crate::strict::{strictness_of, StrictOptions};
use crate::unsound::SigmaTriple;

/// Standard deviation of a Bernoulli answer with success probability `p`.
/// Probabilities are clamped into [0, 1].
#[must_use]
pub fn agent_sigma(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p)).sqrt()
}

/// Score of one step answered by an agent with deviation `sigma`.
#[must_use]
pub fn agent_step_score(sigma: f64) -> f64 {
    1.0 - 2.0 * sigma
}

/// Per-step score factors of one test case under the given deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepScores {
    /// One product `s_r * s_n` per navigation step.
    pub nav: Vec<f64>,
    /// One `s_a` per assertion.
    pub assertions: Vec<f64>,
}

/// Computes every step score of a case. Strictness is decided by parsing
/// alone; how a step happens to evaluate at run time never changes its score.
#[must_use]
pub fn step_scores(tc: &TestCase, sigmas: &SigmaTriple) -> StepScores {
    let profile = strictness_of(tc);
    let s_n = agent_step_score(sigmas.sigma_nav);
    let nav = profile
        .nav
        .iter()
        .map(|&strict| {
            let s_r = if strict {
                1.0
            } else {
                agent_step_score(sigmas.sigma_readiness)
            };
            s_r * s_n
        })
        .collect();
    let assertions = profile
        .assertions
        .iter()
        .map(|&strict| {
            if strict {
                1.0
            } else {
                agent_step_score(sigmas.sigma_assert)
            }
        })
        .collect();
    StepScores { nav, assertions }
}

/// Mean step score of the case: its estimated consistency.
#[must_use]
pub fn consistency_of(tc: &TestCase, sigmas: &SigmaTriple) -> f64 {
    let scores = step_scores(tc, sigmas);
    let l = tc.len();
    assert!(l > 0, "a test case has at least one step");
    let total: f64 = scores.nav.iter().sum::<f64>() + scores.assertions.iter().sum::<f64>();
    total / l as f64
}

/// Fraction of runs agreeing with the most frequent verdict; the observed
/// counterpart of the estimated consistency.
#[must_use]
pub fn observed_consistency(results: &[ExecutionResult]) -> f64 {
    assert!(!results.is_empty(), "needs at least one run");
    let hist = crate::executor::verdict_histogram(results);
    let modal = hist.values().copied().max().unwrap_or(0);
    modal as f64 / results.len() as f64
}

/// The most frequent verdict of a batch; ties break PASS < FAIL < INC.
#[must_use]
pub fn modal_verdict(results: &[ExecutionResult]) -> Verdict {
    assert!(!results.is_empty(), "needs at least one run");
    let hist = crate::executor::verdict_histogram(results);
    hist.into_iter()
        .max_by_key(|(_, n)| *n)
        .map(|(v, _)| v)
        .expect("non-empty")
}

/// Magnitude of relative error of an estimate against an observation.
/// `None` when the observation is zero, where relative error is undefined.
#[must_use]
pub fn mre(estimated: f64, observed: f64) -> Option<f64> {
    if observed == 0.0 {
        None
    } else {
        Some((estimated - observed).abs() / observed.abs())
    }
}

/// Success tally of one agent role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoleStats {
    pub trials: usize,
    pub successes: usize,
}

impl RoleStats {
    pub(crate) fn record(&mut self, success: bool) {
        self.trials += 1;
        if success {
            self.successes += 1;
        }
    }

    /// Estimated success probability, `None` before any trial.
    #[must_use]
    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }

    /// Estimated deviation, `None` before any trial.
    #[must_use]
    pub fn sigma(&self) -> Option<f64> {
        self.rate().map(agent_sigma)
    }
}

/// Calibration result: per-role tallies of isolated ground-truth trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AgentStats {
    pub nav: RoleStats,
    pub readiness: RoleStats,
    pub assertion: RoleStats,
}

impl AgentStats {
    /// Deviation triple, requiring at least one trial per role.
    #[must_use]
    pub fn sigmas(&self) -> Option<SigmaTriple> {
        Some(SigmaTriple {
            sigma_nav: self.nav.sigma()?,
            sigma_readiness: self.readiness.sigma()?,
            sigma_assert: self.assertion.sigma()?,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("case '{case}', step {step}: navigation must be strict for calibration")]
    NonStrictNav { case: String, step: usize },
    #[error("no ground truth for assertion \"{text}\"")]
    UncoveredAssertion { text: String },
    #[error("case '{case}', step {step}: recorded expectation {expected} but ground truth is {computed}")]
    ExpectationMismatch {
        case: String,
        step: usize,
        expected: bool,
        computed: bool,
    },
    #[error("ground truth unavailable: {0}")]
    GroundTruth(String),
}

/// Replays the suite's steps as isolated trials and tallies how often the
/// agent matches ground truth in each role.
///
/// A shadow session per case is advanced by the strict actions themselves,
/// so every trial starts from the true page for its step regardless of what
/// the agent answered before; trials are therefore independent samples of
/// the agent's per-call behavior. Each navigation trial runs on a throwaway
/// clone and succeeds when the observable outcome (page changed and success
/// claimed) matches ground truth; readiness and assertion trials succeed
/// when the boolean answer matches ground truth. An agent error is a failed
/// trial. Per-step `expect=` annotations, where present, are cross-checked
/// against computed ground truth and a mismatch aborts calibration.
pub fn eval_agents(
    model: &AutModel,
    cases: &[TestCase],
    agent: &mut dyn Agent,
    opts: &StrictOptions,
    repeats: usize,
) -> Result<AgentStats, EvalError> {
    // Upfront coverage checks so trials cannot hit missing ground truth.
    for tc in cases {
        for (i, step) in tc.nav_actions.iter().enumerate() {
            let parses = step.strict_form.is_some()
                || crate::strict::parse_nav_action(step.raw_text.trim()).is_some();
            if !parses {
                return Err(EvalError::NonStrictNav {
                    case: tc.id.clone(),
                    step: i + 1,
                });
            }
        }
    }
    if let Some(text) = model.uncovered_assertions(cases).into_iter().next() {
        return Err(EvalError::UncoveredAssertion { text });
    }

    let mut stats = AgentStats::default();
    for _ in 0..repeats {
        for tc in cases {
            run_case_trials(model, tc, agent, opts, &mut stats)?;
        }
    }
    Ok(stats)
}

fn check_expectation(tc: &TestCase, step: usize, computed: bool) -> Result<(), EvalError> {
    if let Some(exp) = &tc.expectations {
        let expected = exp[step - 1];
        if expected != computed {
            return Err(EvalError::ExpectationMismatch {
                case: tc.id.clone(),
                step,
                expected,
                computed,
            });
        }
    }
    Ok(())
}

fn run_case_trials(
    model: &AutModel,
    tc: &TestCase,
    agent: &mut dyn Agent,
    opts: &StrictOptions,
    stats: &mut AgentStats,
) -> Result<(), EvalError> {
    let k = tc.nav_actions.len();
    let mut shadow = SimSession::new(model);
    for i in 1..=k {
        let step = &tc.nav_actions[i - 1];
        let action = step
            .strict_form
            .clone()
            .or_else(|| crate::strict::parse_nav_action(step.raw_text.trim()))
            .expect("checked strict upfront");

        // Ground truth of the observable navigation outcome.
        let mut truth_probe = shadow.clone();
        let before = truth_probe.snapshot();
        truth_probe.apply_action(&action);
        let truth = truth_probe.snapshot() != before;
        check_expectation(tc, i, truth)?;

        // The agent's attempt, on its own throwaway clone.
        let mut trial = shadow.clone();
        let before = trial.snapshot();
        let got = match agent.perform_nav(&mut trial, step) {
            Ok(r) => Some(trial.snapshot() != before && r.status == NavStatus::Success),
            Err(_) => None,
        };
        stats.nav.record(got == Some(truth));

        // Ground truth advances regardless of what the agent did.
        shadow.apply_action(&action);

        if i < k {
            let upcoming = &tc.nav_actions[i];
            let truth = readiness_truth(&shadow, upcoming, opts)
                .map_err(|e| EvalError::GroundTruth(e.to_string()))?;
            let trial = shadow.clone();
            let got = agent
                .check_readiness(&trial, upcoming)
                .ok()
                .map(|r| r.value);
            stats.readiness.record(got == Some(truth));
        }
    }
    for (j, expr) in tc.assertions.iter().enumerate() {
        let truth =
            expr_truth(&shadow, expr, opts).map_err(|e| EvalError::GroundTruth(e.to_string()))?;
        check_expectation(tc, k + j + 1, truth)?;
        let trial = shadow.clone();
        let got = agent.check_assertion(&trial, expr).ok().map(|r| r.value);
        stats.assertion.record(got == Some(truth));
    }
    Ok(())
}
