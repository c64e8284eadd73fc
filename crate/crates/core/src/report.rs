//! Run reports as JSON lines.
//!
//! A report is a sequence of self-describing lines, one JSON object each,
//! discriminated by a `type` field: one `meta` line up front, then `run`
//! lines per execution, `case_summary` lines per case, and optionally a
//! `calibration` line. Everything except the meta line's `unix_time_ms` is
//! a pure function of inputs and seed, so two runs with the same seed
//! produce byte-identical reports once that field is masked.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::consistency::{self, AgentStats, RoleStats};
use crate::executor::{verdict_histogram, ExecutionResult};
use crate::iolts::render_trace;
use crate::model::TestCase;
use crate::regimes::{halt_kind, overridden_readiness_count, Halt};
use crate::strict::strictness_of;
use crate::unsound::{classify, Classification, SigmaTriple};

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportLine {
    Meta(MetaLine),
    Run(RunLine),
    CaseSummary(CaseSummaryLine),
    Calibration(CalibrationLine),
}

/// Identity of a report: which tool produced it, from which inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetaLine {
    pub tool: String,
    pub version: String,
    /// Suite file the run came from.
    pub suite: String,
    /// Application model the run executed against.
    pub model: String,
    /// Agent choice, as given on the command line.
    pub agents: String,
    /// Runs per case.
    pub n: usize,
    pub seed: u64,
    /// Wall-clock stamp; the only nondeterministic field of a report.
    pub unix_time_ms: u64,
}

impl MetaLine {
    #[must_use]
    pub fn new(suite: &str, model: &str, agents: &str, n: usize, seed: u64) -> Self {
        let unix_time_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        MetaLine {
            tool: "nltest".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            suite: suite.into(),
            model: model.into(),
            agents: agents.into(),
            n,
            seed,
            unix_time_ms,
        }
    }
}

/// One execution of one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunLine {
    pub case_id: String,
    /// Zero-based run index within the case.
    pub run: usize,
    pub verdict: String,
    /// Observable labels along the realized path.
    pub trace: String,
    /// Why the run stopped short, when it did.
    pub halt: Option<Halt>,
    /// Readiness checks where the agent overrode a failing formula.
    pub overridden_readiness: usize,
    /// Steps executed before the run settled.
    pub steps: usize,
}

impl RunLine {
    #[must_use]
    pub fn from_result(run: usize, r: &ExecutionResult) -> Self {
        RunLine {
            case_id: r.case_id.clone(),
            run,
            verdict: r.verdict.to_string(),
            trace: render_trace(&r.covered_trace),
            halt: halt_kind(r),
            overridden_readiness: overridden_readiness_count(r),
            steps: r.steps.len(),
        }
    }
}

/// Aggregate over all runs of one case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSummaryLine {
    pub case_id: String,
    pub n: usize,
    /// Verdict histogram, keyed by verdict name.
    pub verdicts: BTreeMap<String, usize>,
    pub modal_verdict: String,
    /// Fraction of runs agreeing with the modal verdict.
    pub observed_consistency: f64,
    /// Formula-based prediction, when deviations are known.
    pub estimated_consistency: Option<f64>,
    /// Relative gap between the two, `None` when observed is zero.
    pub mre: Option<f64>,
    pub strict_nav: bool,
    pub strict_assertions: bool,
    /// Soundness-bound classification, when deviations are known.
    pub bounded: Option<Classification>,
}

impl CaseSummaryLine {
    /// Summarizes `results`, which must be non-empty and all from `tc`.
    #[must_use]
    pub fn summarize(
        tc: &TestCase,
        results: &[ExecutionResult],
        sigmas: Option<&SigmaTriple>,
    ) -> Self {
        assert!(!results.is_empty(), "needs at least one run");
        debug_assert!(results.iter().all(|r| r.case_id == tc.id));
        let verdicts = verdict_histogram(results)
            .into_iter()
            .map(|(v, c)| (v.to_string(), c))
            .collect();
        let observed = consistency::observed_consistency(results);
        let estimated = sigmas.map(|s| consistency::consistency_of(tc, s));
        let profile = strictness_of(tc);
        CaseSummaryLine {
            case_id: tc.id.clone(),
            n: results.len(),
            verdicts,
            modal_verdict: consistency::modal_verdict(results).to_string(),
            observed_consistency: observed,
            estimated_consistency: estimated,
            mre: estimated.and_then(|e| consistency::mre(e, observed)),
            strict_nav: profile.nav.iter().all(|b| *b),
            strict_assertions: profile.assertions.iter().all(|b| *b),
            bounded: sigmas.map(|s| classify(&profile, s)),
        }
    }
}

/// Per-role calibration of one agent role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoleSummary {
    pub trials: usize,
    pub successes: usize,
    pub rate: Option<f64>,
    pub sigma: Option<f64>,
}

impl From<RoleStats> for RoleSummary {
    fn from(s: RoleStats) -> Self {
        RoleSummary {
            trials: s.trials,
            successes: s.successes,
            rate: s.rate(),
            sigma: s.sigma(),
        }
    }
}

/// Calibration of all three roles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationLine {
    pub nav: RoleSummary,
    pub readiness: RoleSummary,
    pub assertion: RoleSummary,
}

impl From<&AgentStats> for CalibrationLine {
    fn from(s: &AgentStats) -> Self {
        CalibrationLine {
            nav: s.nav.into(),
            readiness: s.readiness.into(),
            assertion: s.assertion.into(),
        }
    }
}

/// Streams report lines to a writer, one JSON object per line.
#[derive(Debug)]
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter { out }
    }

    pub fn push(&mut self, line: &ReportLine) -> io::Result<()> {
        let s = serde_json::to_string(line).map_err(io::Error::other)?;
        self.out.write_all(s.as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Renders a whole report to a string.
#[must_use]
pub fn to_jsonl(lines: &[ReportLine]) -> String {
    let mut w = JsonlWriter::new(Vec::new());
    for line in lines {
        w.push(line).expect("writing to a Vec cannot fail");
    }
    String::from_utf8(w.finish().expect("flushing a Vec cannot fail"))
        .expect("serde_json emits UTF-8")
}

/// Zeroes every `unix_time_ms` field so reports can be compared across
/// invocations.
#[must_use]
pub fn mask_times(jsonl: &str) -> String {
    let mut out = String::with_capacity(jsonl.len());
    for line in jsonl.lines() {
        match serde_json::from_str::<serde_json::Value>(line) {
            Ok(mut v) => {
                if let Some(t) = v.get_mut("unix_time_ms") {
                    *t = serde_json::Value::from(0u64);
                }
                out.push_str(&serde_json::to_string(&v).expect("value reserializes"));
            }
            Err(_) => out.push_str(line),
        }
        out.push('\n');
    }
    out
}
