//! The agent interface and its oracle and fault-injected implementations.
//!
//! An agent fills three roles during execution: performing a navigation
//! instruction on the session, answering whether the page is ready for an
//! upcoming action, and answering whether an assertion holds. Every answer
//! carries the facts the agent based it on; hard failures (transport, bad
//! payloads, injected outages) surface as errors, which the executor turns
//! into inconclusive runs rather than guesses.
//!
//! `OracleAgent` answers from the simulated application's ground truth and
//! never errs. `FaultAgent` wraps that ground truth and corrupts it with a
//! per-role Bernoulli coin, either erroring out or confidently lying,
//! which is how agent unreliability is reproduced on demand.

use serde::Serialize;
use thiserror::Error;

use crate::model::{AssertionExpr, AssertionLeaf, NavAction, StrictAction};
use crate::rng::SimRng;
use crate::sim::SimSession;
use crate::strict::{
    assert_strict, parse_assertion_leaf, readiness_strict, StrictOptions, StrictOutcome,
};

/// What a navigation agent claims after attempting an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NavStatus {
    Success,
    Failed,
    Unknown,
}

impl NavStatus {
    pub fn parse(s: &str) -> Option<NavStatus> {
        match s {
            "Success" => Some(NavStatus::Success),
            "Failed" => Some(NavStatus::Failed),
            "Unknown" => Some(NavStatus::Unknown),
            _ => None,
        }
    }
}

/// Navigation answer: claimed status plus supporting facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NavReport {
    pub status: NavStatus,
    pub facts: Vec<String>,
}

/// Boolean answer (readiness or assertion) plus supporting facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoolReport {
    pub value: bool,
    pub facts: Vec<String>,
}

/// Why an agent produced no answer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("injected failure: {0}")]
    Injected(String),
    #[error("no answer possible: {0}")]
    NoAnswer(String),
}

/// The three capabilities execution needs from an agent.
///
/// Navigation acts on the session; the two queries only read it.
pub trait Agent {
    /// Attempts the instruction on the session and reports the outcome.
    fn perform_nav(
        &mut self,
        session: &mut SimSession<'_>,
        step: &NavAction,
    ) -> Result<NavReport, AgentError>;

    /// Whether the current page is ready for the upcoming action.
    fn check_readiness(
        &mut self,
        session: &SimSession<'_>,
        upcoming: &NavAction,
    ) -> Result<BoolReport, AgentError>;

    /// Whether the assertion holds on the current page.
    fn check_assertion(
        &mut self,
        session: &SimSession<'_>,
        expr: &AssertionExpr,
    ) -> Result<BoolReport, AgentError>;
}

fn page_facts(session: &SimSession<'_>) -> Vec<String> {
    let snap = session.snapshot();
    vec![
        format!("showing '{}'", session.page_label()),
        format!("url '{}'", snap.url),
        format!("{} elements on the page", snap.elements.len()),
    ]
}

/// Ground truth for one assertion leaf on the current page: strict evaluation
/// when the text parses, the model's rule table otherwise.
fn leaf_truth(
    session: &SimSession<'_>,
    leaf: &AssertionLeaf,
    opts: &StrictOptions,
) -> Result<bool, AgentError> {
    let strict_form = leaf
        .strict_form
        .clone()
        .or_else(|| parse_assertion_leaf(leaf.raw_text.trim()));
    if let Some(sa) = strict_form {
        let annotated = AssertionExpr::Leaf(AssertionLeaf {
            raw_text: leaf.raw_text.clone(),
            strict_form: Some(sa),
        });
        let res = assert_strict(&annotated, &session.snapshot(), opts);
        return match res.outcome {
            StrictOutcome::True => Ok(true),
            StrictOutcome::False => Ok(false),
            // Annotated leaves always decide.
            StrictOutcome::NotApplicable => Err(AgentError::NoAnswer(format!(
                "'{}' did not decide",
                leaf.raw_text
            ))),
        };
    }
    session
        .model()
        .oracle_truth(&leaf.raw_text, &session.snapshot())
        .ok_or_else(|| {
            AgentError::NoAnswer(format!("no ground truth for \"{}\"", leaf.raw_text.trim()))
        })
}

/// Ground truth for a whole assertion expression on the current page:
/// strict evaluation per parseable leaf, the model's rule table for the
/// rest, combined through the boolean structure.
pub fn expr_truth(
    session: &SimSession<'_>,
    expr: &AssertionExpr,
    opts: &StrictOptions,
) -> Result<bool, AgentError> {
    match expr {
        AssertionExpr::Leaf(leaf) => leaf_truth(session, leaf, opts),
        AssertionExpr::And { children } => {
            for c in children {
                if !expr_truth(session, c, opts)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        AssertionExpr::Or { children } => {
            for c in children {
                if expr_truth(session, c, opts)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Ground truth for readiness of an upcoming action: its strict formula on
/// the current page. Free-text actions have no formula to consult.
pub fn readiness_truth(
    session: &SimSession<'_>,
    upcoming: &NavAction,
    opts: &StrictOptions,
) -> Result<bool, AgentError> {
    let form = upcoming
        .strict_form
        .clone()
        .or_else(|| crate::strict::parse_nav_action(upcoming.raw_text.trim()));
    match form {
        Some(action) => {
            let annotated = NavAction {
                raw_text: upcoming.raw_text.clone(),
                strict_form: Some(action),
            };
            let res = readiness_strict(&annotated, &session.snapshot(), opts);
            match res.outcome {
                StrictOutcome::True => Ok(true),
                StrictOutcome::False => Ok(false),
                StrictOutcome::NotApplicable => Err(AgentError::NoAnswer(format!(
                    "'{}' has no readiness formula",
                    upcoming.raw_text
                ))),
            }
        }
        None => Err(AgentError::NoAnswer(format!(
            "cannot judge readiness of free-text step '{}'",
            upcoming.raw_text
        ))),
    }
}

/// Performs a strict action on the session and reports honestly. Free-text
/// instructions have no executable realization here.
fn oracle_nav(
    session: &mut SimSession<'_>,
    step: &NavAction,
) -> Result<(NavReport, Option<StrictAction>), AgentError> {
    let action = step
        .strict_form
        .clone()
        .or_else(|| crate::strict::parse_nav_action(step.raw_text.trim()))
        .ok_or_else(|| {
            AgentError::NoAnswer(format!(
                "cannot realize free-text instruction '{}'",
                step.raw_text
            ))
        })?;
    let before = session.snapshot();
    session.apply_action(&action);
    let after = session.snapshot();
    let status = if after != before {
        NavStatus::Success
    } else {
        NavStatus::Failed
    };
    let mut facts = page_facts(session);
    if status == NavStatus::Failed {
        facts.push("the action had no effect".into());
    }
    Ok((NavReport { status, facts }, Some(action)))
}

/// Answers every query from the simulated application's ground truth.
#[derive(Debug, Clone, Default)]
pub struct OracleAgent {
    pub opts: StrictOptions,
}

impl OracleAgent {
    #[must_use]
    pub fn new(opts: StrictOptions) -> Self {
        OracleAgent { opts }
    }
}

impl Agent for OracleAgent {
    fn perform_nav(
        &mut self,
        session: &mut SimSession<'_>,
        step: &NavAction,
    ) -> Result<NavReport, AgentError> {
        oracle_nav(session, step).map(|(r, _)| r)
    }

    fn check_readiness(
        &mut self,
        session: &SimSession<'_>,
        upcoming: &NavAction,
    ) -> Result<BoolReport, AgentError> {
        let value = readiness_truth(session, upcoming, &self.opts)?;
        let mut facts = page_facts(session);
        facts.push(format!(
            "page is {} for '{}'",
            if value { "ready" } else { "not ready" },
            upcoming.raw_text
        ));
        Ok(BoolReport { value, facts })
    }

    fn check_assertion(
        &mut self,
        session: &SimSession<'_>,
        expr: &AssertionExpr,
    ) -> Result<BoolReport, AgentError> {
        let value = expr_truth(session, expr, &self.opts)?;
        let mut facts = page_facts(session);
        facts.push(format!("claim evaluates {value}"));
        Ok(BoolReport { value, facts })
    }
}

/// How an unreliable agent misbehaves when its coin comes up failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// Report a hard error; never a wrong answer.
    Error,
    /// Give a confidently wrong answer; never an error.
    Hallucinate,
}

/// What a hallucinating navigation failure does to the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NavFault {
    /// Claim success without touching the page.
    ReportOnly,
    /// Follow a uniformly chosen wrong enabled transition, then claim
    /// success. Falls back to claiming without acting when every enabled
    /// transition is the intended one.
    ActWrongly,
}

/// Per-role unreliability: each call succeeds with `p_success`, otherwise
/// misbehaves per `mode`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaultProfile {
    pub p_success: f64,
    pub mode: FailureMode,
    /// Only consulted for hallucinated navigation.
    pub nav_fault: NavFault,
}

impl FaultProfile {
    #[must_use]
    pub fn new(p_success: f64, mode: FailureMode) -> Self {
        FaultProfile {
            p_success,
            mode,
            nav_fault: NavFault::ReportOnly,
        }
    }

    #[must_use]
    pub fn acting(mut self) -> Self {
        self.nav_fault = NavFault::ActWrongly;
        self
    }
}

/// Ground-truth agent wrapped with per-role fault injection.
///
/// Exactly one Bernoulli draw per call decides between the true answer and
/// the configured misbehavior, so failure events across calls are
/// independent with the configured rates. Roles without a profile answer
/// truthfully every time.
#[derive(Debug, Clone)]
pub struct FaultAgent {
    pub opts: StrictOptions,
    pub nav: Option<FaultProfile>,
    pub readiness: Option<FaultProfile>,
    pub assertion: Option<FaultProfile>,
    rng: SimRng,
}

impl FaultAgent {
    #[must_use]
    pub fn new(
        opts: StrictOptions,
        nav: Option<FaultProfile>,
        readiness: Option<FaultProfile>,
        assertion: Option<FaultProfile>,
        seed: u64,
    ) -> Self {
        FaultAgent {
            opts,
            nav,
            readiness,
            assertion,
            rng: SimRng::new(seed),
        }
    }

    /// One draw: `true` means answer honestly this time.
    fn honest(&mut self, profile: &Option<FaultProfile>) -> bool {
        match profile {
            Some(p) => self.rng.bernoulli(p.p_success),
            None => true,
        }
    }
}

impl Agent for FaultAgent {
    fn perform_nav(
        &mut self,
        session: &mut SimSession<'_>,
        step: &NavAction,
    ) -> Result<NavReport, AgentError> {
        if self.honest(&self.nav.clone()) {
            return oracle_nav(session, step).map(|(r, _)| r);
        }
        let profile = self.nav.expect("failure draw implies a profile");
        match profile.mode {
            FailureMode::Error => Err(AgentError::Injected("navigation outage".into())),
            FailureMode::Hallucinate => {
                let intended = step
                    .strict_form
                    .clone()
                    .or_else(|| crate::strict::parse_nav_action(step.raw_text.trim()));
                if profile.nav_fault == NavFault::ActWrongly {
                    let wrong: Vec<_> = session
                        .enabled_transitions()
                        .into_iter()
                        .filter(|t| match &intended {
                            Some(a) => !t.action.pattern_eq(a),
                            None => true,
                        })
                        .collect();
                    if !wrong.is_empty() {
                        let pick = wrong[self.rng.index(wrong.len())].clone();
                        session.apply_transition(&pick);
                        let mut facts = page_facts(session);
                        facts.push("the instruction was carried out".into());
                        return Ok(NavReport {
                            status: NavStatus::Success,
                            facts,
                        });
                    }
                }
                let mut facts = page_facts(session);
                facts.push("the instruction was carried out".into());
                Ok(NavReport {
                    status: NavStatus::Success,
                    facts,
                })
            }
        }
    }

    fn check_readiness(
        &mut self,
        session: &SimSession<'_>,
        upcoming: &NavAction,
    ) -> Result<BoolReport, AgentError> {
        if self.honest(&self.readiness.clone()) {
            let value = readiness_truth(session, upcoming, &self.opts)?;
            return Ok(BoolReport {
                value,
                facts: page_facts(session),
            });
        }
        match self.readiness.expect("failure draw implies a profile").mode {
            FailureMode::Error => Err(AgentError::Injected("readiness outage".into())),
            FailureMode::Hallucinate => {
                let truth = readiness_truth(session, upcoming, &self.opts)?;
                let mut facts = page_facts(session);
                facts.push("the page looks settled".into());
                Ok(BoolReport {
                    value: !truth,
                    facts,
                })
            }
        }
    }

    fn check_assertion(
        &mut self,
        session: &SimSession<'_>,
        expr: &AssertionExpr,
    ) -> Result<BoolReport, AgentError> {
        if self.honest(&self.assertion.clone()) {
            let value = expr_truth(session, expr, &self.opts)?;
            return Ok(BoolReport {
                value,
                facts: page_facts(session),
            });
        }
        match self.assertion.expect("failure draw implies a profile").mode {
            FailureMode::Error => Err(AgentError::Injected("assertion outage".into())),
            FailureMode::Hallucinate => {
                let truth = expr_truth(session, expr, &self.opts)?;
                let mut facts = page_facts(session);
                facts.push("checked the page content".into());
                Ok(BoolReport {
                    value: !truth,
                    facts,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::load_aut_model;
    use crate::strict::{annotate_assertion_leaf, annotate_nav};

    const MODEL: &str = r#"
page home url=u://home
elem go type=link desc="Proceed"
elem banner type=statictext desc="Welcome aboard"
page next url=u://next
elem back type=link desc="Return"
trans home Open the website 'u://home' -> home
trans home Click on 'Proceed' -> next
trans next Click on 'Return' -> home
oracle "the page greets the visitor" exists contains='welcome'
"#;

    fn leaf_expr(text: &str) -> AssertionExpr {
        AssertionExpr::Leaf(annotate_assertion_leaf(text))
    }

    #[test]
    fn oracle_nav_reports_success_exactly_on_page_change() {
        let m = load_aut_model(MODEL).unwrap();
        let mut s = SimSession::new(&m);
        let mut agent = OracleAgent::default();

        let open = annotate_nav("Open the website 'u://home'");
        let r = agent.perform_nav(&mut s, &open).unwrap();
        assert_eq!(r.status, NavStatus::Success);

        let dud = annotate_nav("Click on 'Nothing here'");
        let r = agent.perform_nav(&mut s, &dud).unwrap();
        assert_eq!(r.status, NavStatus::Failed);
        assert!(r.facts.iter().any(|f| f.contains("no effect")));

        let free_text = annotate_nav("Wander to the next page somehow");
        assert!(matches!(
            agent.perform_nav(&mut s, &free_text),
            Err(AgentError::NoAnswer(_))
        ));
    }

    #[test]
    fn oracle_readiness_follows_the_strict_formula() {
        let m = load_aut_model(MODEL).unwrap();
        let mut s = SimSession::new(&m);
        s.apply_action(&StrictAction::Open {
            url: "u://home".into(),
        });
        let mut agent = OracleAgent::default();

        let ok = agent
            .check_readiness(&s, &annotate_nav("Click on 'Proceed'"))
            .unwrap();
        assert!(ok.value);
        let missing = agent
            .check_readiness(&s, &annotate_nav("Click on 'Return'"))
            .unwrap();
        assert!(!missing.value);
    }

    #[test]
    fn oracle_assertions_combine_strict_and_rule_table() {
        let m = load_aut_model(MODEL).unwrap();
        let mut s = SimSession::new(&m);
        s.apply_action(&StrictAction::Open {
            url: "u://home".into(),
        });
        let mut agent = OracleAgent::default();

        assert!(
            agent
                .check_assertion(&s, &leaf_expr("'Proceed' is present"))
                .unwrap()
                .value
        );
        assert!(
            agent
                .check_assertion(&s, &leaf_expr("the page greets the visitor"))
                .unwrap()
                .value
        );
        let and = AssertionExpr::And {
            children: vec![
                leaf_expr("'Proceed' is present"),
                leaf_expr("'Return' is present"),
            ],
        };
        assert!(!agent.check_assertion(&s, &and).unwrap().value);
        let or = AssertionExpr::Or {
            children: vec![
                leaf_expr("'Proceed' is present"),
                leaf_expr("'Return' is present"),
            ],
        };
        assert!(agent.check_assertion(&s, &or).unwrap().value);
        assert!(matches!(
            agent.check_assertion(&s, &leaf_expr("totally uncovered claim")),
            Err(AgentError::NoAnswer(_))
        ));
    }

    #[test]
    fn error_mode_never_lies() {
        let m = load_aut_model(MODEL).unwrap();
        let profile = FaultProfile::new(0.5, FailureMode::Error);
        let mut agent = FaultAgent::new(StrictOptions::default(), None, None, Some(profile), 42);
        let mut s = SimSession::new(&m);
        s.apply_action(&StrictAction::Open {
            url: "u://home".into(),
        });
        let mut errors = 0;
        let mut truths = 0;
        for _ in 0..200 {
            match agent.check_assertion(&s, &leaf_expr("'Proceed' is present")) {
                Ok(r) => {
                    assert!(r.value, "error mode must never flip the answer");
                    truths += 1;
                }
                Err(AgentError::Injected(_)) => errors += 1,
                Err(e) => panic!("unexpected error kind: {e}"),
            }
        }
        assert!(errors > 50 && truths > 50, "both outcomes occur at p=0.5");
    }

    #[test]
    fn hallucinate_mode_never_errors_and_flips_exactly() {
        let m = load_aut_model(MODEL).unwrap();
        let profile = FaultProfile::new(0.7, FailureMode::Hallucinate);
        let mut agent = FaultAgent::new(StrictOptions::default(), None, Some(profile), None, 7);
        let mut s = SimSession::new(&m);
        s.apply_action(&StrictAction::Open {
            url: "u://home".into(),
        });
        let upcoming = annotate_nav("Click on 'Proceed'");
        let mut wrong = 0;
        for _ in 0..500 {
            let r = agent
                .check_readiness(&s, &upcoming)
                .expect("hallucinate never errors");
            if !r.value {
                wrong += 1;
            }
        }
        // Truth is `ready`; flips happen at rate 1 - 0.7.
        assert!(
            (wrong as f64 / 500.0 - 0.3).abs() < 0.08,
            "wrong rate {wrong}/500"
        );
    }

    #[test]
    fn hallucinated_nav_report_only_claims_without_acting() {
        let m = load_aut_model(MODEL).unwrap();
        let profile = FaultProfile::new(0.0, FailureMode::Hallucinate);
        let mut agent = FaultAgent::new(StrictOptions::default(), Some(profile), None, None, 9);
        let mut s = SimSession::new(&m);
        s.apply_action(&StrictAction::Open {
            url: "u://home".into(),
        });
        let r = agent
            .perform_nav(&mut s, &annotate_nav("Click on 'Proceed'"))
            .unwrap();
        assert_eq!(r.status, NavStatus::Success, "claims success");
        assert_eq!(s.current_page(), Some("home"), "without moving");
    }

    #[test]
    fn hallucinated_nav_act_wrongly_avoids_the_intended_row() {
        let m = load_aut_model(MODEL).unwrap();
        let profile = FaultProfile::new(0.0, FailureMode::Hallucinate).acting();
        for seed in 0..20 {
            let mut agent =
                FaultAgent::new(StrictOptions::default(), Some(profile), None, None, seed);
            let mut s = SimSession::new(&m);
            s.apply_action(&StrictAction::Open {
                url: "u://home".into(),
            });
            let r = agent
                .perform_nav(&mut s, &annotate_nav("Click on 'Proceed'"))
                .unwrap();
            assert_eq!(r.status, NavStatus::Success);
            // The only wrong enabled row is the open row back to home, so
            // the page must not be `next`.
            assert_eq!(s.current_page(), Some("home"), "seed {seed}");
        }
    }

    #[test]
    fn act_wrongly_falls_back_to_report_only_when_cornered() {
        let single = "\
page only url=u://x
elem e type=link desc=\"Self\"
trans only Open the website 'u://x' -> only
";
        let m = load_aut_model(single).unwrap();
        let profile = FaultProfile::new(0.0, FailureMode::Hallucinate).acting();
        let mut agent = FaultAgent::new(StrictOptions::default(), Some(profile), None, None, 3);
        let mut s = SimSession::new(&m);
        // From blank, the only enabled transition is the intended open.
        let r = agent
            .perform_nav(&mut s, &annotate_nav("Open the website 'u://x'"))
            .unwrap();
        assert_eq!(r.status, NavStatus::Success);
        assert_eq!(s.current_page(), None, "claimed without acting");
    }

    #[test]
    fn roles_without_profile_stay_honest() {
        let m = load_aut_model(MODEL).unwrap();
        let profile = FaultProfile::new(0.0, FailureMode::Hallucinate);
        let mut agent = FaultAgent::new(StrictOptions::default(), None, None, Some(profile), 11);
        let mut s = SimSession::new(&m);
        s.apply_action(&StrictAction::Open {
            url: "u://home".into(),
        });
        let nav = agent
            .perform_nav(&mut s, &annotate_nav("Click on 'Proceed'"))
            .unwrap();
        assert_eq!(nav.status, NavStatus::Success);
        assert_eq!(s.current_page(), Some("next"));
        let ready = agent
            .check_readiness(&s, &annotate_nav("Click on 'Return'"))
            .unwrap();
        assert!(ready.value);
    }

    #[test]
    fn fault_rates_match_the_configured_probability() {
        let m = load_aut_model(MODEL).unwrap();
        for &p in &[0.0, 0.25, 0.9, 1.0] {
            let profile = FaultProfile::new(p, FailureMode::Error);
            let mut agent =
                FaultAgent::new(StrictOptions::default(), None, None, Some(profile), 1234);
            let mut s = SimSession::new(&m);
            s.apply_action(&StrictAction::Open {
                url: "u://home".into(),
            });
            let n = 2000;
            let mut ok = 0;
            for _ in 0..n {
                if agent
                    .check_assertion(&s, &leaf_expr("'Proceed' is present"))
                    .is_ok()
                {
                    ok += 1;
                }
            }
            let observed = ok as f64 / n as f64;
            assert!((observed - p).abs() < 0.03, "p={p} observed={observed}");
        }
    }
}
