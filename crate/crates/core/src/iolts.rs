//! Input-output labeled transition systems and conformance checking.
//!
//! States are named, labels are partitioned into inputs (`?a`, actions sent
//! to the system), outputs (`!g`, pages the system produces) and internal
//! actions (guardrail evaluations), and some states carry verdicts. Trace
//! semantics elide internal actions: `traces`, `after` and `out` all work on
//! observable labels with internal closure, matching the usual definitions
//!
//! ```text
//! traces(S)  = { sigma | S =sigma=> }
//! S after sigma = { s | S =sigma=> s }
//! out(Q)     = { !o | some q in Q enables !o after internal steps }
//! aut ioco spec  iff  forall sigma in traces(spec):
//!                     out(aut after sigma) is a subset of out(spec after sigma)
//! ```
//!
//! `out({}) = {}`, so an input the implementation does not accept never
//! breaks conformance: ioco constrains outputs only.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::Verdict;

/// A transition label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// `?text`: an action offered to the system under test.
    Input(String),
    /// `!text`: an observable response (here: the page the GUI shows).
    Output(String),
    /// Internal bookkeeping (observe, readiness, assertion evaluations).
    Internal(String),
}

impl Label {
    #[must_use]
    pub fn input(s: impl Into<String>) -> Self {
        Label::Input(s.into())
    }
    #[must_use]
    pub fn output(s: impl Into<String>) -> Self {
        Label::Output(s.into())
    }
    #[must_use]
    pub fn internal(s: impl Into<String>) -> Self {
        Label::Internal(s.into())
    }

    #[must_use]
    pub fn is_observable(&self) -> bool {
        !matches!(self, Label::Internal(_))
    }

    #[must_use]
    pub fn text(&self) -> &str {
        match self {
            Label::Input(s) | Label::Output(s) | Label::Internal(s) => s,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Input(s) => write!(f, "?{s}"),
            Label::Output(s) => write!(f, "!{s}"),
            Label::Internal(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for Label {
    /// Serialized as the display string; the `?`/`!` prefix encodes the kind.
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// One labeled transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Transition {
    pub from: String,
    pub label: Label,
    pub to: String,
}

/// An input-output labeled transition system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iolts {
    pub states: BTreeSet<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
    /// Verdict-carrying states; they are sinks.
    pub verdict_states: BTreeMap<String, Verdict>,
}

impl Iolts {
    #[must_use]
    pub fn new(initial: impl Into<String>) -> Self {
        let initial = initial.into();
        let mut states = BTreeSet::new();
        states.insert(initial.clone());
        Iolts {
            states,
            initial,
            transitions: Vec::new(),
            verdict_states: BTreeMap::new(),
        }
    }

    pub fn add_transition(&mut self, from: impl Into<String>, label: Label, to: impl Into<String>) {
        let t = Transition {
            from: from.into(),
            label,
            to: to.into(),
        };
        self.states.insert(t.from.clone());
        self.states.insert(t.to.clone());
        if !self.transitions.contains(&t) {
            self.transitions.push(t);
        }
    }

    pub fn mark_verdict(&mut self, state: impl Into<String>, verdict: Verdict) {
        let state = state.into();
        self.states.insert(state.clone());
        self.verdict_states.insert(state, verdict);
    }

    /// Structural violations: dangling endpoints, outgoing edges from verdict
    /// states, unknown initial.
    #[must_use]
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.states.contains(&self.initial) {
            v.push(format!("initial state '{}' is not a state", self.initial));
        }
        for t in &self.transitions {
            if !self.states.contains(&t.from) || !self.states.contains(&t.to) {
                v.push(format!(
                    "transition {} --{}--> {} has a dangling endpoint",
                    t.from, t.label, t.to
                ));
            }
            if self.verdict_states.contains_key(&t.from) {
                v.push(format!(
                    "verdict state '{}' has an outgoing transition",
                    t.from
                ));
            }
        }
        v
    }

    /// Internal-closure of a state set: everything reachable through internal
    /// transitions, including the states themselves. Terminates on internal
    /// cycles via the visited set.
    #[must_use]
    pub fn eps_closure(&self, states: &BTreeSet<String>) -> BTreeSet<String> {
        let mut seen = states.clone();
        let mut queue: VecDeque<String> = states.iter().cloned().collect();
        while let Some(s) = queue.pop_front() {
            for t in self.transitions.iter().filter(|t| t.from == s) {
                if let Label::Internal(_) = t.label {
                    if seen.insert(t.to.clone()) {
                        queue.push_back(t.to.clone());
                    }
                }
            }
        }
        seen
    }

    /// One observable step from a closed state set (no closure applied).
    fn step(&self, closed: &BTreeSet<String>, label: &Label) -> BTreeSet<String> {
        self.transitions
            .iter()
            .filter(|t| closed.contains(&t.from) && &t.label == label)
            .map(|t| t.to.clone())
            .collect()
    }

    /// States reachable through the observable trace, with internal closure
    /// before, between and after the labels.
    #[must_use]
    pub fn after(&self, trace: &[Label]) -> BTreeSet<String> {
        debug_assert!(
            trace.iter().all(Label::is_observable),
            "after() takes observable traces"
        );
        let mut current = self.eps_closure(&BTreeSet::from([self.initial.clone()]));
        for label in trace {
            let next = self.step(&current, label);
            if next.is_empty() {
                return BTreeSet::new();
            }
            current = self.eps_closure(&next);
        }
        current
    }

    /// Output labels enabled from the set, allowing internal steps first.
    /// `out({}) = {}`.
    #[must_use]
    pub fn out(&self, states: &BTreeSet<String>) -> BTreeSet<String> {
        let closed = self.eps_closure(states);
        self.transitions
            .iter()
            .filter(|t| closed.contains(&t.from))
            .filter_map(|t| match &t.label {
                Label::Output(o) => Some(o.clone()),
                _ => None,
            })
            .collect()
    }

    /// Observable labels enabled (after internal closure) from a state set.
    fn enabled(&self, closed: &BTreeSet<String>) -> BTreeSet<Label> {
        self.transitions
            .iter()
            .filter(|t| closed.contains(&t.from) && t.label.is_observable())
            .map(|t| t.label.clone())
            .collect()
    }

    /// All observable traces up to `max_depth` labels.
    #[must_use]
    pub fn traces(&self, max_depth: usize) -> TraceSet {
        let mut found: BTreeSet<Vec<Label>> = BTreeSet::new();
        let mut complete = true;
        let start = self.eps_closure(&BTreeSet::from([self.initial.clone()]));
        // Frontier keyed by trace so converging paths merge their state sets.
        let mut frontier: BTreeMap<Vec<Label>, BTreeSet<String>> = BTreeMap::new();
        frontier.insert(Vec::new(), start);
        for depth in 0..=max_depth {
            let mut next: BTreeMap<Vec<Label>, BTreeSet<String>> = BTreeMap::new();
            for (trace, states) in &frontier {
                found.insert(trace.clone());
                let labels = self.enabled(states);
                if depth == max_depth {
                    if !labels.is_empty() {
                        complete = false;
                    }
                    continue;
                }
                for label in labels {
                    let stepped = self.step(states, &label);
                    if stepped.is_empty() {
                        continue;
                    }
                    let closed = self.eps_closure(&stepped);
                    let mut t = trace.clone();
                    t.push(label);
                    next.entry(t).or_default().extend(closed);
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        TraceSet {
            traces: found,
            complete,
        }
    }

    /// A system is deterministic when it has no internal transitions and no
    /// state enables the same label toward two different states. Only such
    /// systems are accepted as conformance-check references.
    #[must_use]
    pub fn is_deterministic(&self) -> bool {
        let mut seen: BTreeSet<(&str, &Label)> = BTreeSet::new();
        for t in &self.transitions {
            if let Label::Internal(_) = t.label {
                return false;
            }
            if !seen.insert((t.from.as_str(), &t.label)) {
                return false;
            }
        }
        true
    }

    /// Multi-line text rendering for docs and diffs, stable across runs.
    #[must_use]
    pub fn render_text(&self) -> String {
        let mut out = format!("initial: {}\n", self.initial);
        let mut lines: Vec<String> = self
            .transitions
            .iter()
            .map(|t| format!("{} --{}--> {}", t.from, t.label, t.to))
            .collect();
        lines.sort();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        for (s, v) in &self.verdict_states {
            out.push_str(&format!("verdict {s}: {v}\n"));
        }
        out
    }
}

/// Observable traces with a completeness marker: `complete` is true when the
/// enumeration exhausted the system rather than hitting the depth bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSet {
    pub traces: BTreeSet<Vec<Label>>,
    pub complete: bool,
}

impl TraceSet {
    #[must_use]
    pub fn contains(&self, trace: &[Label]) -> bool {
        self.traces.contains(trace)
    }
}

/// Renders a trace for reports and diagnostics.
#[must_use]
pub fn render_trace(trace: &[Label]) -> String {
    trace
        .iter()
        .map(Label::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IocoError {
    #[error("conformance reference is nondeterministic; determinize it first")]
    NondeterministicSpec,
}

/// One conformance violation: after `trace`, the implementation can produce
/// `unexpected_output` but the reference cannot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IocoViolation {
    pub trace: Vec<Label>,
    pub unexpected_output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IocoReport {
    pub conformant: bool,
    pub violations: Vec<IocoViolation>,
    /// False when the reference's trace enumeration hit the depth bound, in
    /// which case "conformant" means "no violation within the bound".
    pub complete: bool,
}

/// Checks `aut ioco spec` over all reference traces up to `max_depth`.
pub fn ioco_check(aut: &Iolts, spec: &Iolts, max_depth: usize) -> Result<IocoReport, IocoError> {
    if !spec.is_deterministic() {
        return Err(IocoError::NondeterministicSpec);
    }
    let spec_traces = spec.traces(max_depth);
    let mut violations = Vec::new();
    for trace in &spec_traces.traces {
        let impl_states = aut.after(trace);
        if impl_states.is_empty() {
            // The implementation never follows this trace; out({}) = {}.
            continue;
        }
        let impl_out = aut.out(&impl_states);
        let spec_out = spec.out(&spec.after(trace));
        for extra in impl_out.difference(&spec_out) {
            violations.push(IocoViolation {
                trace: trace.clone(),
                unexpected_output: extra.clone(),
            });
        }
    }
    Ok(IocoReport {
        conformant: violations.is_empty(),
        violations,
        complete: spec_traces.complete,
    })
}

/// Whether an executed test case run stayed clear of FAIL: true iff no state
/// on the realized path carries a FAIL verdict. Inconclusive runs pass.
#[must_use]
pub fn passes(result: &crate::executor::ExecutionResult) -> bool {
    result
        .covered_states
        .iter()
        .all(|s| result.iolts.verdict_states.get(s) != Some(&Verdict::Fail))
}
