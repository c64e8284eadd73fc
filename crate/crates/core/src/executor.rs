//! Guarded step-by-step execution of one test case against a session.
//!
//! Execution builds a labeled transition system while it runs. Each
//! navigation step contributes a four-segment chain
//!
//! ```text
//! q_(i-1) --?a_i--> q_i.1 --!g_i--> q_i.2 --observe--> q_i.3 --ready--> q_i
//! ```
//!
//! where `?a_i` is the instruction handed to the agent, `!g_i` the page the
//! session then shows, `observe` the guardrail "the page changed and the
//! agent claims success", and `ready` the guardrail "the page is ready for
//! the next instruction". Each assertion contributes one internal step.
//! When a guardrail fails, the run halts into a fresh inconclusive sink; a
//! false assertion halts into a failure sink; a run that consumes every step
//! marks its final state as passed.
//!
//! Guardrail discipline for readiness: a strict formula that evaluates true
//! settles the step alone. In every other case, including formula-false, the
//! agent is consulted and its answer decides. Assertions differ: a strict
//! formula that decides (true or false) is final, and only steps outside
//! the templates fall to the agent. An agent error at any consulted point
//! halts the run as inconclusive instead of guessing.

use serde::Serialize;

use crate::agents::{Agent, NavStatus};
use crate::iolts::{Iolts, Label};
use crate::model::{validate_test_case, TestCase, Verdict};
use crate::sim::{AutModel, SimSession};
use crate::strict::{
    assert_strict, readiness_strict, StrictEvalResult, StrictOptions, StrictOutcome,
};

/// Knobs for one execution.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    pub strict: StrictOptions,
}

/// What part of a step a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Nav,
    Observe,
    Readiness,
    Assertion,
}

/// Who decided the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    /// A strict formula settled it; no agent involved.
    Strict,
    /// An agent's answer settled it.
    Agent,
    /// Nobody was asked: snapshot comparison or a vacuous check.
    NoAgent,
}

/// Whether the run continued past the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "verdict")]
pub enum StepOutcome {
    Continued,
    Halted(Verdict),
}

/// One evaluated step (or guardrail) of a run.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    /// Step number in the case: navigation steps count 1..=k, assertions
    /// continue k+1..=l. Observe and readiness records share their
    /// navigation step's number.
    pub index: usize,
    pub kind: StepKind,
    pub text: String,
    pub path: EvalPath,
    /// Strict evaluation detail where one was computed.
    pub strict: Option<StrictEvalResult>,
    /// The boolean the step settled on, when it reached one.
    pub result: Option<bool>,
    pub outcome: StepOutcome,
    /// Page label after the step.
    pub page_after: String,
    /// Facts reported by whoever answered.
    pub facts: Vec<String>,
    /// Agent error message, when the step hit one.
    pub error: Option<String>,
}

/// Everything one execution produced.
#[derive(Debug, Clone, Serialize)]
pub struct ExecutionResult {
    pub case_id: String,
    pub verdict: Verdict,
    /// The transition system the run built, verdict sinks included.
    pub iolts: Iolts,
    /// Observable labels along the realized path.
    pub covered_trace: Vec<Label>,
    /// Every state the run visited, in order, ending in the verdict state.
    pub covered_states: Vec<String>,
    pub steps: Vec<StepRecord>,
}

impl ExecutionResult {
    /// Count of navigation steps the run attempted.
    #[must_use]
    pub fn navs_attempted(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.kind == StepKind::Nav)
            .count()
    }
}

struct RunBuilder {
    iolts: Iolts,
    covered_states: Vec<String>,
    covered_trace: Vec<Label>,
    steps: Vec<StepRecord>,
}

impl RunBuilder {
    fn new() -> Self {
        RunBuilder {
            iolts: Iolts::new("q0"),
            covered_states: vec!["q0".into()],
            covered_trace: Vec::new(),
            steps: Vec::new(),
        }
    }

    fn here(&self) -> String {
        self.covered_states
            .last()
            .expect("path never empty")
            .clone()
    }

    fn walk(&mut self, label: Label, to: &str) {
        let from = self.here();
        if label.is_observable() {
            self.covered_trace.push(label.clone());
        }
        self.iolts.add_transition(from, label, to);
        self.covered_states.push(to.to_string());
    }

    fn halt(&mut self, label: Label, verdict: Verdict, sink: String) {
        self.walk(label, &sink);
        self.iolts.mark_verdict(sink, verdict);
    }
}

/// Runs one test case on a fresh session over `model`, with `agent` filling
/// every role. The case must be structurally valid.
pub fn execute(
    model: &AutModel,
    tc: &TestCase,
    agent: &mut dyn Agent,
    opts: &ExecOptions,
) -> ExecutionResult {
    let problems = validate_test_case(tc, tc.assertions.is_empty());
    assert!(
        problems.is_empty(),
        "invalid test case '{}': {}",
        tc.id,
        problems.join("; ")
    );

    let mut session = SimSession::new(model);
    let mut b = RunBuilder::new();
    let k = tc.nav_actions.len();
    let mut verdict: Option<Verdict> = None;

    for i in 1..=k {
        let step = &tc.nav_actions[i - 1];
        let before = session.snapshot();
        let nav_res = agent.perform_nav(&mut session, step);
        let claimed = matches!(
            &nav_res,
            Ok(r) if r.status == NavStatus::Success
        );
        b.walk(Label::input(step.raw_text.trim()), &format!("q{i}.1"));
        let page_after = session.page_label().to_string();
        b.walk(Label::output(page_after.clone()), &format!("q{i}.2"));
        let (facts, error) = match nav_res {
            Ok(r) => (r.facts, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        b.steps.push(StepRecord {
            index: i,
            kind: StepKind::Nav,
            text: step.raw_text.trim().to_string(),
            path: EvalPath::Agent,
            strict: None,
            result: Some(claimed),
            outcome: StepOutcome::Continued,
            page_after: page_after.clone(),
            facts,
            error,
        });

        // Observe: the page changed and the agent claims it succeeded.
        let changed = session.snapshot() != before;
        let observed = changed && claimed;
        if observed {
            b.walk(Label::internal("observe"), &format!("q{i}.3"));
            b.steps.push(StepRecord {
                index: i,
                kind: StepKind::Observe,
                text: format!("page changed and step {i} claimed success"),
                path: EvalPath::NoAgent,
                strict: None,
                result: Some(true),
                outcome: StepOutcome::Continued,
                page_after: page_after.clone(),
                facts: Vec::new(),
                error: None,
            });
        } else {
            b.halt(
                Label::internal("not-observe"),
                Verdict::Inc,
                format!("inc#{i}"),
            );
            b.steps.push(StepRecord {
                index: i,
                kind: StepKind::Observe,
                text: if changed {
                    format!("step {i} did not claim success")
                } else {
                    format!("page did not change at step {i}")
                },
                path: EvalPath::NoAgent,
                strict: None,
                result: Some(false),
                outcome: StepOutcome::Halted(Verdict::Inc),
                page_after,
                facts: Vec::new(),
                error: None,
            });
            verdict = Some(Verdict::Inc);
            break;
        }

        // Readiness, aimed at the next instruction; vacuous after the last.
        if i == k {
            b.walk(Label::internal("ready"), &format!("q{i}"));
            b.steps.push(StepRecord {
                index: i,
                kind: StepKind::Readiness,
                text: "(end of navigation)".into(),
                path: EvalPath::NoAgent,
                strict: None,
                result: Some(true),
                outcome: StepOutcome::Continued,
                page_after: session.page_label().to_string(),
                facts: Vec::new(),
                error: None,
            });
            continue;
        }
        let upcoming = &tc.nav_actions[i];
        let strict_res = readiness_strict(upcoming, &session.snapshot(), &opts.strict);
        let mut record = StepRecord {
            index: i,
            kind: StepKind::Readiness,
            text: upcoming.raw_text.trim().to_string(),
            path: EvalPath::Strict,
            strict: Some(strict_res.clone()),
            result: None,
            outcome: StepOutcome::Continued,
            page_after: session.page_label().to_string(),
            facts: Vec::new(),
            error: None,
        };
        if strict_res.outcome == StrictOutcome::True {
            record.result = Some(true);
            b.walk(Label::internal("ready"), &format!("q{i}"));
            b.steps.push(record);
            continue;
        }
        // Formula false or absent: the agent gets the final word.
        record.path = EvalPath::Agent;
        match agent.check_readiness(&session, upcoming) {
            Ok(r) => {
                record.result = Some(r.value);
                record.facts = r.facts;
                if r.value {
                    b.walk(Label::internal("ready"), &format!("q{i}"));
                    b.steps.push(record);
                } else {
                    b.halt(
                        Label::internal("not-ready"),
                        Verdict::Inc,
                        format!("inc#{i}"),
                    );
                    record.outcome = StepOutcome::Halted(Verdict::Inc);
                    b.steps.push(record);
                    verdict = Some(Verdict::Inc);
                    break;
                }
            }
            Err(e) => {
                record.error = Some(e.to_string());
                b.halt(Label::internal("error"), Verdict::Inc, format!("inc#{i}"));
                record.outcome = StepOutcome::Halted(Verdict::Inc);
                b.steps.push(record);
                verdict = Some(Verdict::Inc);
                break;
            }
        }
    }

    if verdict.is_none() {
        for (j, expr) in tc.assertions.iter().enumerate() {
            let idx = k + j + 1;
            let state = format!("q{}", k + j + 1);
            let text = expr.to_string();
            let strict_res = assert_strict(expr, &session.snapshot(), &opts.strict);
            let mut record = StepRecord {
                index: idx,
                kind: StepKind::Assertion,
                text: text.clone(),
                path: EvalPath::Strict,
                strict: Some(strict_res.clone()),
                result: None,
                outcome: StepOutcome::Continued,
                page_after: session.page_label().to_string(),
                facts: Vec::new(),
                error: None,
            };
            let settled = match strict_res.outcome {
                StrictOutcome::True => Some(true),
                StrictOutcome::False => Some(false),
                StrictOutcome::NotApplicable => None,
            };
            let value = match settled {
                Some(v) => Ok(v),
                None => {
                    record.path = EvalPath::Agent;
                    match agent.check_assertion(&session, expr) {
                        Ok(r) => {
                            record.facts = r.facts;
                            Ok(r.value)
                        }
                        Err(e) => Err(e),
                    }
                }
            };
            match value {
                Ok(true) => {
                    record.result = Some(true);
                    b.walk(Label::internal(text), &state);
                    b.steps.push(record);
                }
                Ok(false) => {
                    record.result = Some(false);
                    record.outcome = StepOutcome::Halted(Verdict::Fail);
                    b.halt(
                        Label::internal(format!("not({text})")),
                        Verdict::Fail,
                        format!("fail#{idx}"),
                    );
                    b.steps.push(record);
                    verdict = Some(Verdict::Fail);
                    break;
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    record.outcome = StepOutcome::Halted(Verdict::Inc);
                    b.halt(Label::internal("error"), Verdict::Inc, format!("inc#{idx}"));
                    b.steps.push(record);
                    verdict = Some(Verdict::Inc);
                    break;
                }
            }
        }
    }

    let verdict = verdict.unwrap_or_else(|| {
        // Every step consumed without a halt: the run passed.
        let last = b.here();
        b.iolts.mark_verdict(last, Verdict::Pass);
        Verdict::Pass
    });

    ExecutionResult {
        case_id: tc.id.clone(),
        verdict,
        iolts: b.iolts,
        covered_trace: b.covered_trace,
        covered_states: b.covered_states,
        steps: b.steps,
    }
}

/// Structural conformance of a result to the execution chain shape:
/// the realized path must be a connected chain from `q0` built of
/// input/output pairs per navigation step, guardrail internals, one internal
/// per assertion, with exactly the final state carrying the verdict.
#[must_use]
pub fn validate_shape(result: &ExecutionResult) -> Vec<String> {
    let mut v = result.iolts.validate();
    if result.covered_states.first().map(String::as_str) != Some(result.iolts.initial.as_str()) {
        v.push("covered path does not start at the initial state".into());
    }

    // Expected label pattern from the step records.
    #[derive(Debug, PartialEq)]
    enum Want {
        Input(String),
        Output(String),
        Internal(Vec<String>),
    }
    let mut want: Vec<Want> = Vec::new();
    for s in &result.steps {
        match s.kind {
            StepKind::Nav => {
                want.push(Want::Input(s.text.clone()));
                want.push(Want::Output(s.page_after.clone()));
            }
            StepKind::Observe => {
                want.push(Want::Internal(vec!["observe".into(), "not-observe".into()]))
            }
            StepKind::Readiness => want.push(Want::Internal(vec![
                "ready".into(),
                "not-ready".into(),
                "error".into(),
            ])),
            StepKind::Assertion => want.push(Want::Internal(vec![
                s.text.clone(),
                format!("not({})", s.text),
                "error".into(),
            ])),
        }
    }
    if result.covered_states.len() != want.len() + 1 {
        v.push(format!(
            "path has {} states but the steps describe {} transitions",
            result.covered_states.len(),
            want.len()
        ));
        return v;
    }
    let mut trace = Vec::new();
    for (n, pair) in result.covered_states.windows(2).enumerate() {
        let found = result
            .iolts
            .transitions
            .iter()
            .find(|t| t.from == pair[0] && t.to == pair[1]);
        let Some(t) = found else {
            v.push(format!(
                "no transition between '{}' and '{}'",
                pair[0], pair[1]
            ));
            continue;
        };
        let ok = match (&want[n], &t.label) {
            (Want::Input(s), Label::Input(l)) => s == l,
            (Want::Output(s), Label::Output(l)) => s == l,
            (Want::Internal(opts), Label::Internal(l)) => opts.contains(l),
            _ => false,
        };
        if !ok {
            v.push(format!(
                "segment {n}: label {} does not fit {:?}",
                t.label, want[n]
            ));
        }
        if t.label.is_observable() {
            trace.push(t.label.clone());
        }
    }
    if trace != result.covered_trace {
        v.push("covered trace disagrees with the realized path".into());
    }

    let last = result.covered_states.last().expect("path never empty");
    match result.iolts.verdict_states.get(last) {
        Some(verd) if *verd == result.verdict => {}
        Some(verd) => v.push(format!(
            "final state marked {verd} but the run says {}",
            result.verdict
        )),
        None => v.push("final state carries no verdict".into()),
    }
    for state in result.iolts.verdict_states.keys() {
        if state != last {
            v.push(format!("verdict on non-final state '{state}'"));
        }
    }
    v
}

/// Runs the case `n` times, building a fresh agent per run.
pub fn run_batch<F>(
    model: &AutModel,
    tc: &TestCase,
    n: usize,
    opts: &ExecOptions,
    mut make_agent: F,
) -> Vec<ExecutionResult>
where
    F: FnMut(usize) -> Box<dyn Agent>,
{
    (0..n)
        .map(|run| {
            let mut agent = make_agent(run);
            execute(model, tc, agent.as_mut(), opts)
        })
        .collect()
}

/// Verdict counts over a batch.
#[must_use]
pub fn verdict_histogram(
    results: &[ExecutionResult],
) -> std::collections::BTreeMap<Verdict, usize> {
    let mut h = std::collections::BTreeMap::new();
    for r in results {
        *h.entry(r.verdict).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{FailureMode, FaultAgent, FaultProfile, OracleAgent};
    use crate::iolts::passes;
    use crate::sim::load_aut_model;
    use crate::suite::parse_test_suite;

    const MODEL: &str = r#"
page home url=u://home
elem go type=link desc="Proceed"
elem decoy type=link desc="Decoy"
elem title type=statictext desc="Start here"
page next url=u://next
elem back type=link desc="Return"
elem done type=statictext desc="All done"
trans home Open the website 'u://home' -> home
trans home Click on 'Proceed' -> next
trans next Click on 'Return' -> home
oracle "the page says it is done" exists contains='all done'
"#;

    const SUITE: &str = "\
# test happy
action: Open the website 'u://home'
action: Click on 'Proceed'
assert: 'Return' is present
assert: the page says it is done
";

    fn setup() -> (crate::sim::AutModel, TestCase) {
        let model = load_aut_model(MODEL).unwrap();
        let suite = parse_test_suite(SUITE).unwrap();
        (model, suite.cases[0].clone())
    }

    #[test]
    fn oracle_run_passes_with_the_expected_chain() {
        let (model, tc) = setup();
        let mut agent = OracleAgent::default();
        let r = execute(&model, &tc, &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(passes(&r));
        assert_eq!(validate_shape(&r), Vec::<String>::new());
        // 2 navs * 3 records + 2 assertions.
        assert_eq!(r.steps.len(), 8);
        // Observable trace: ?open !home ?click !next.
        assert_eq!(r.covered_trace.len(), 4);
        assert_eq!(r.covered_trace[3], Label::output("next"));
        // Final state carries the pass verdict.
        assert_eq!(r.iolts.verdict_states.get("q4"), Some(&Verdict::Pass));
    }

    #[test]
    fn first_open_counts_as_a_page_change() {
        let (model, _) = setup();
        let suite = parse_test_suite(
            "# test open_only\naction: Open the website 'u://home'\nassert: 'Proceed' is present\n",
        )
        .unwrap();
        let mut agent = OracleAgent::default();
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        assert_eq!(
            r.verdict,
            Verdict::Pass,
            "blank start makes the first open observable"
        );
    }

    #[test]
    fn failed_assertion_yields_fail_with_fail_sink() {
        let (model, _) = setup();
        let suite = parse_test_suite(
            "# test wrong\naction: Open the website 'u://home'\nassert: 'Return' is present\n",
        )
        .unwrap();
        let mut agent = OracleAgent::default();
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!passes(&r));
        assert!(validate_shape(&r).is_empty());
        assert!(r.covered_states.last().unwrap().starts_with("fail#"));
    }

    #[test]
    fn ineffective_action_halts_inconclusive_at_observe() {
        let (model, _) = setup();
        // 'Decoy' exists on home, so readiness lets the step through; the
        // click then moves nothing and observe halts the run.
        let suite = parse_test_suite(
            "# test dud\naction: Open the website 'u://home'\naction: Click on 'Decoy'\nassert: 'Proceed' is present\n",
        )
        .unwrap();
        let mut agent = OracleAgent::default();
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Inc);
        assert!(passes(&r), "inconclusive runs reach no failure state");
        assert!(validate_shape(&r).is_empty());
        let ready = r
            .steps
            .iter()
            .find(|s| s.kind == StepKind::Readiness && s.index == 1)
            .unwrap();
        assert_eq!((ready.path, ready.result), (EvalPath::Strict, Some(true)));
        let observe = r
            .steps
            .iter()
            .find(|s| s.kind == StepKind::Observe && s.index == 2)
            .unwrap();
        assert_eq!(observe.result, Some(false));
        assert_eq!(observe.outcome, StepOutcome::Halted(Verdict::Inc));
    }

    #[test]
    fn readiness_consults_agent_when_formula_is_false() {
        let (model, _) = setup();
        let suite = parse_test_suite(
            "# test unready\naction: Open the website 'u://home'\naction: Click on 'Return'\nassert: 'Start here' is present\n",
        )
        .unwrap();
        // 'Return' lives on the next page, so the formula after step 1 is
        // false; the honest agent agrees and the run halts inconclusive.
        let mut agent = OracleAgent::default();
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Inc);
        let ready = r
            .steps
            .iter()
            .find(|s| s.kind == StepKind::Readiness && s.index == 1)
            .unwrap();
        assert_eq!(ready.path, EvalPath::Agent);
        assert_eq!(ready.result, Some(false));
        assert!(r.covered_states.last().unwrap().starts_with("inc#"));
    }

    #[test]
    fn hallucinated_readiness_can_mask_and_later_steps_still_guard() {
        let (model, _) = setup();
        let suite = parse_test_suite(
            "# test masked\naction: Open the website 'u://home'\naction: Click on 'Return'\nassert: 'Start here' is present\n",
        )
        .unwrap();
        // Readiness formula is false; a hallucinating readiness agent flips
        // it to true, so execution continues into the doomed click.
        let profile = FaultProfile::new(0.0, FailureMode::Hallucinate);
        let mut agent = FaultAgent::new(StrictOptions::default(), None, Some(profile), None, 5);
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        // The wrong click then has no effect, so observe halts the run.
        assert_eq!(r.verdict, Verdict::Inc);
        let ready = r
            .steps
            .iter()
            .find(|s| s.kind == StepKind::Readiness && s.index == 1)
            .unwrap();
        assert_eq!(ready.result, Some(true), "the lie got through");
        let observe = r
            .steps
            .iter()
            .find(|s| s.kind == StepKind::Observe && s.index == 2)
            .unwrap();
        assert_eq!(observe.result, Some(false), "the next guardrail caught it");
    }

    #[test]
    fn navigation_only_case_passes_after_final_block() {
        let (model, _) = setup();
        let suite = parse_test_suite(
            "option: navigation-only\n# test navonly\naction: Open the website 'u://home'\naction: Click on 'Proceed'\n",
        )
        .unwrap();
        let mut agent = OracleAgent::default();
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(validate_shape(&r).is_empty());
        assert_eq!(r.iolts.verdict_states.get("q2"), Some(&Verdict::Pass));
    }

    #[test]
    fn agent_error_on_assertion_is_inconclusive() {
        let (model, tc) = setup();
        // Assertion role always errors; the second assertion needs the
        // agent (it has no strict form), the first does not.
        let profile = FaultProfile::new(0.0, FailureMode::Error);
        let mut agent = FaultAgent::new(StrictOptions::default(), None, None, Some(profile), 1);
        let r = execute(&model, &tc, &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Inc);
        assert!(validate_shape(&r).is_empty());
        let last = r.steps.last().unwrap();
        assert_eq!(last.kind, StepKind::Assertion);
        assert_eq!(last.index, 4);
        assert!(last.error.is_some());
    }

    #[test]
    fn batch_runs_are_independent_and_countable() {
        let (model, tc) = setup();
        let results = run_batch(&model, &tc, 25, &ExecOptions::default(), |_| {
            Box::new(OracleAgent::default())
        });
        let h = verdict_histogram(&results);
        assert_eq!(h.get(&Verdict::Pass), Some(&25));
    }

    #[test]
    fn strict_false_assertion_fails_without_consulting_the_agent() {
        let (model, _) = setup();
        let suite = parse_test_suite(
            "# test strictfail\naction: Open the website 'u://home'\nassert: 'Return' is present\n",
        )
        .unwrap();
        // A lying assertion agent would say true; the strict formula must
        // decide first and fail the run regardless.
        let profile = FaultProfile::new(0.0, FailureMode::Hallucinate);
        let mut agent = FaultAgent::new(StrictOptions::default(), None, None, Some(profile), 2);
        let r = execute(&model, &suite.cases[0], &mut agent, &ExecOptions::default());
        assert_eq!(r.verdict, Verdict::Fail);
        let assertion = r
            .steps
            .iter()
            .find(|s| s.kind == StepKind::Assertion)
            .unwrap();
        assert_eq!(assertion.path, EvalPath::Strict);
    }
}
