//! Command-line driver: runs suites, calibrates agents, analyzes
//! consistency and checks model conformance.
//!
//! Exit codes: 0 when every run passed, 1 when any run failed (or, for
//! `ioco`, when the implementation does not conform), 2 when runs were
//! inconclusive but none failed, 3 for configuration or input errors.

mod config;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nltest_core::agents::{Agent, FailureMode, FaultAgent, FaultProfile, OracleAgent};
use nltest_core::consistency::{self, eval_agents};
use nltest_core::executor::{execute, ExecOptions, ExecutionResult};
use nltest_core::iolts::{ioco_check, render_trace};
use nltest_core::llm::LlmAgent;
use nltest_core::model::Verdict;
use nltest_core::report::{
    CalibrationLine, CaseSummaryLine, JsonlWriter, MetaLine, ReportLine, RunLine,
};
use nltest_core::rng::derive_seed;
use nltest_core::sim::{load_aut_model, spec_of, AutModel};
use nltest_core::strict::{strictness_of, StrictOptions};
use nltest_core::suite::parse_test_suite;
use nltest_core::unsound::{classify, SigmaTriple};
use nltest_core::TestSuite;

#[derive(Parser)]
#[command(name = "nltest", version, about = "Natural-language GUI test runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a suite against an application model.
    Run(RunArgs),
    /// Measure per-role agent reliability on annotated suites.
    EvalAgents(EvalArgs),
    /// Predict verdict consistency from per-role deviations.
    Analyze(AnalyzeArgs),
    /// Check conformance of one application model against another.
    Ioco(IocoArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    /// Answer every role from simulator ground truth.
    Oracle,
    /// Ground truth degraded by per-role fault profiles.
    Fault,
    /// Forward every role to a chat-completion endpoint.
    Llm,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Oracle => "oracle",
            AgentKind::Fault => "fault",
            AgentKind::Llm => "llm",
        })
    }
}

/// Per-role fault profile in `p:mode` form, e.g. `0.9:error`,
/// `0.5:hallucinate` or `0.5:hallucinate-act`.
#[derive(Debug, Clone, Copy)]
struct FaultSpec {
    p: f64,
    mode: FailureMode,
    acting: bool,
}

impl FromStr for FaultSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (p_text, mode_text) = s
            .split_once(':')
            .ok_or_else(|| format!("'{s}' is not of the form p:mode"))?;
        let p: f64 = p_text
            .parse()
            .map_err(|_| format!("'{p_text}' is not a probability"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability {p} is outside [0, 1]"));
        }
        let (mode, acting) = match mode_text {
            "error" => (FailureMode::Error, false),
            "hallucinate" => (FailureMode::Hallucinate, false),
            "hallucinate-act" => (FailureMode::Hallucinate, true),
            other => {
                return Err(format!(
                    "unknown mode '{other}' (expected error, hallucinate or hallucinate-act)"
                ))
            }
        };
        Ok(FaultSpec { p, mode, acting })
    }
}

impl FaultSpec {
    fn profile(self) -> FaultProfile {
        let p = FaultProfile::new(self.p, self.mode);
        if self.acting {
            p.acting()
        } else {
            p
        }
    }
}

/// Deviation triple in `nav,readiness,assertion` form.
#[derive(Debug, Clone, Copy)]
struct SigmaArg(SigmaTriple);

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        let [nav, readiness, assert] = parts.as_slice() else {
            return Err(format!("'{s}' is not of the form nav,readiness,assertion"));
        };
        let parse = |t: &str| -> Result<f64, String> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| format!("'{t}' is not a number"))?;
            if !(0.0..=0.5).contains(&v) {
                return Err(format!("deviation {v} is outside [0, 0.5]"));
            }
            Ok(v)
        };
        Ok(SigmaArg(SigmaTriple {
            sigma_nav: parse(nav)?,
            sigma_readiness: parse(readiness)?,
            sigma_assert: parse(assert)?,
        }))
    }
}

#[derive(Args)]
struct LlmFlags {
    /// TOML config file with an [llm] section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chat-completion URL, overriding config and environment.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent with every request.
    #[arg(long)]
    llm_model: Option<String>,
    /// Per-request timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
}

impl LlmFlags {
    fn resolve(&self) -> Result<nltest_core::llm::LlmConfig> {
        config::resolve_llm(
            self.config.as_deref(),
            self.endpoint.as_deref(),
            self.llm_model.as_deref(),
            self.timeout_ms,
        )
    }
}

#[derive(Args)]
struct RunArgs {
    /// Suite file to execute.
    #[arg(long)]
    suite: PathBuf,
    /// Application model to execute against.
    #[arg(long)]
    model: PathBuf,
    /// Agent backend.
    #[arg(long, value_enum, default_value_t = AgentKind::Oracle)]
    agents: AgentKind,
    /// Runs per case.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Root seed; every run derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; defaults to <suite-stem>-seed<seed>.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fault profile of the navigation role (fault agents only).
    #[arg(long)]
    fault_nav: Option<FaultSpec>,
    /// Fault profile of the readiness role (fault agents only).
    #[arg(long)]
    fault_readiness: Option<FaultSpec>,
    /// Fault profile of the assertion role (fault agents only).
    #[arg(long)]
    fault_assert: Option<FaultSpec>,
    #[command(flatten)]
    llm: LlmFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Annotated suite supplying ground-truthed steps.
    #[arg(long)]
    suite: PathBuf,
    /// Application model the trials run against.
    #[arg(long)]
    model: PathBuf,
    /// Agent backend under measurement.
    #[arg(long, value_enum, default_value_t = AgentKind::Oracle)]
    agents: AgentKind,
    /// Trial repetitions over the whole suite.
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSONL report path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    fault_nav: Option<FaultSpec>,
    #[arg(long)]
    fault_readiness: Option<FaultSpec>,
    #[arg(long)]
    fault_assert: Option<FaultSpec>,
    #[command(flatten)]
    llm: LlmFlags,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Suite to analyze; no model or execution involved.
    #[arg(long)]
    suite: PathBuf,
    /// Per-role deviations as nav,readiness,assertion.
    #[arg(long)]
    sigmas: SigmaArg,
    /// Optional JSONL output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IocoArgs {
    /// Implementation model.
    #[arg(long)]
    model: PathBuf,
    /// Reference model; defaults to the implementation itself.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Trace depth bound of the check.
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::EvalAgents(args) => cmd_eval(&args),
        Cmd::Analyze(args) => cmd_analyze(&args),
        Cmd::Ioco(args) => cmd_ioco(&args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("nltest: {e:#}");
            std::process::exit(3);
        }
    }
}

fn load_model(path: &Path) -> Result<AutModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))?;
    load_aut_model(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_suite(path: &Path) -> Result<TestSuite> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading suite {}", path.display()))?;
    parse_test_suite(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Ground-truth-backed agents need an answer for every free-text
/// assertion; refuse up front instead of failing mid-run.
fn require_oracle_coverage(model: &AutModel, suite: &TestSuite) -> Result<()> {
    let missing = model.uncovered_assertions(&suite.cases);
    if !missing.is_empty() {
        bail!(
            "the model's oracle table has no entry for: {}",
            missing
                .iter()
                .map(|m| format!("\"{m}\""))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(())
}

struct AgentFactory {
    kind: AgentKind,
    nav: Option<FaultProfile>,
    readiness: Option<FaultProfile>,
    assertion: Option<FaultProfile>,
    llm: Option<nltest_core::llm::LlmConfig>,
    seed: u64,
}

impl AgentFactory {
    fn prepare(
        kind: AgentKind,
        nav: Option<FaultSpec>,
        readiness: Option<FaultSpec>,
        assertion: Option<FaultSpec>,
        llm: &LlmFlags,
        seed: u64,
    ) -> Result<Self> {
        if kind != AgentKind::Fault && (nav.is_some() || readiness.is_some() || assertion.is_some())
        {
            bail!("--fault-* flags require --agents fault");
        }
        let llm_cfg = if kind == AgentKind::Llm {
            let cfg = llm.resolve()?;
            // Probe the client config once so a bad setup fails here.
            LlmAgent::new(cfg.clone()).map_err(|e| anyhow!("llm configuration: {e}"))?;
            Some(cfg)
        } else {
            None
        };
        Ok(AgentFactory {
            kind,
            nav: nav.map(FaultSpec::profile),
            readiness: readiness.map(FaultSpec::profile),
            assertion: assertion.map(FaultSpec::profile),
            llm: llm_cfg,
            seed,
        })
    }

    fn build(&self, stream: u64) -> Box<dyn Agent> {
        match self.kind {
            AgentKind::Oracle => Box::new(OracleAgent::default()),
            AgentKind::Fault => Box::new(FaultAgent::new(
                StrictOptions::default(),
                self.nav,
                self.readiness,
                self.assertion,
                derive_seed(self.seed, stream),
            )),
            AgentKind::Llm => {
                let cfg = self.llm.clone().expect("llm config resolved in prepare");
                Box::new(LlmAgent::new(cfg).expect("client construction already probed"))
            }
        }
    }

    fn describe(&self) -> String {
        self.kind.to_string()
    }
}

fn default_out(suite: &Path, seed: u64) -> PathBuf {
    let stem = suite
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    PathBuf::from(format!("{stem}-seed{seed}.jsonl"))
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let model = load_model(&args.model)?;
    let suite = load_suite(&args.suite)?;
    let factory = AgentFactory::prepare(
        args.agents,
        args.fault_nav,
        args.fault_readiness,
        args.fault_assert,
        &args.llm,
        args.seed,
    )?;
    if args.agents != AgentKind::Llm {
        require_oracle_coverage(&model, &suite)?;
    }

    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| default_out(&args.suite, args.seed));
    let file = File::create(&out_path)
        .with_context(|| format!("creating report {}", out_path.display()))?;
    let mut report = JsonlWriter::new(BufWriter::new(file));
    report.push(&ReportLine::Meta(MetaLine::new(
        &args.suite.display().to_string(),
        &args.model.display().to_string(),
        &factory.describe(),
        args.n,
        args.seed,
    )))?;

    let opts = ExecOptions::default();
    let mut any_fail = false;
    let mut any_inc = false;
    for (case_idx, tc) in suite.cases.iter().enumerate() {
        let mut results: Vec<ExecutionResult> = Vec::with_capacity(args.n);
        for run in 0..args.n {
            let stream = derive_seed(case_idx as u64, run as u64);
            let mut agent = factory.build(stream);
            let result = execute(&model, tc, agent.as_mut(), &opts);
            report.push(&ReportLine::Run(RunLine::from_result(run, &result)))?;
            match result.verdict {
                Verdict::Fail => any_fail = true,
                Verdict::Inc => any_inc = true,
                Verdict::Pass => {}
            }
            results.push(result);
        }
        let summary = CaseSummaryLine::summarize(tc, &results, None);
        println!(
            "{}: {} of {} runs {} (consistency {:.3})",
            summary.case_id,
            summary
                .verdicts
                .get(&summary.modal_verdict)
                .copied()
                .unwrap_or(0),
            summary.n,
            summary.modal_verdict,
            summary.observed_consistency,
        );
        report.push(&ReportLine::CaseSummary(summary))?;
    }
    report.finish()?.flush()?;
    println!("report written to {}", out_path.display());
    Ok(if any_fail {
        1
    } else if any_inc {
        2
    } else {
        0
    })
}

fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let model = load_model(&args.model)?;
    let suite = load_suite(&args.suite)?;
    let factory = AgentFactory::prepare(
        args.agents,
        args.fault_nav,
        args.fault_readiness,
        args.fault_assert,
        &args.llm,
        args.seed,
    )?;
    let mut agent = factory.build(0);
    let stats = eval_agents(
        &model,
        &suite.cases,
        agent.as_mut(),
        &StrictOptions::default(),
        args.repeats,
    )
    .map_err(|e| anyhow!("calibration: {e}"))?;

    let line = CalibrationLine::from(&stats);
    for (role, summary) in [
        ("nav", line.nav),
        ("readiness", line.readiness),
        ("assertion", line.assertion),
    ] {
        match (summary.rate, summary.sigma) {
            (Some(rate), Some(sigma)) => println!(
                "{role}: {}/{} ok, rate {rate:.4}, sigma {sigma:.4}",
                summary.successes, summary.trials
            ),
            _ => println!("{role}: no trials"),
        }
    }
    if let Some(sigmas) = stats.sigmas() {
        println!(
            "sigmas: {:.4},{:.4},{:.4}",
            sigmas.sigma_nav, sigmas.sigma_readiness, sigmas.sigma_assert
        );
    }

    if let Some(out_path) = &args.out {
        let file = File::create(out_path)
            .with_context(|| format!("creating report {}", out_path.display()))?;
        let mut report = JsonlWriter::new(BufWriter::new(file));
        report.push(&ReportLine::Meta(MetaLine::new(
            &args.suite.display().to_string(),
            &args.model.display().to_string(),
            &factory.describe(),
            args.repeats,
            args.seed,
        )))?;
        report.push(&ReportLine::Calibration(line))?;
        report.finish()?.flush()?;
        println!("report written to {}", out_path.display());
    }
    Ok(0)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let suite = load_suite(&args.suite)?;
    let sigmas = args.sigmas.0;
    let mut lines = Vec::new();
    for tc in &suite.cases {
        let profile = strictness_of(tc);
        let estimated = consistency::consistency_of(tc, &sigmas);
        let classification = classify(&profile, &sigmas);
        println!(
            "{}: estimated consistency {:.3}, strict nav {}/{}, strict assertions {}/{}, \
             weakly unsound at worst: {}",
            tc.id,
            estimated,
            profile.nav.iter().filter(|b| **b).count(),
            profile.nav.len(),
            profile.assertions.iter().filter(|b| **b).count(),
            profile.assertions.len(),
            if classification.bounded {
                "yes"
            } else {
                "not established"
            },
        );
        for blocker in &classification.blockers {
            println!("  blocker: {blocker}");
        }
        lines.push(serde_json::json!({
            "type": "analysis",
            "case_id": tc.id,
            "estimated_consistency": estimated,
            "strict_nav": profile.nav,
            "strict_assertions": profile.assertions,
            "bounded": classification,
        }));
    }
    if let Some(out_path) = &args.out {
        let mut file = BufWriter::new(
            File::create(out_path)
                .with_context(|| format!("creating report {}", out_path.display()))?,
        );
        for line in &lines {
            writeln!(file, "{line}")?;
        }
        file.flush()?;
        println!("report written to {}", out_path.display());
    }
    Ok(0)
}

fn cmd_ioco(args: &IocoArgs) -> Result<i32> {
    let impl_model = load_model(&args.model)?;
    let impl_sys = spec_of(&impl_model);
    let ref_sys = match &args.against {
        Some(path) => spec_of(&load_model(path)?),
        None => impl_sys.clone(),
    };
    let report = ioco_check(&impl_sys, &ref_sys, args.max_depth)
        .map_err(|e| anyhow!("conformance check: {e}"))?;
    if report.conformant {
        println!(
            "conformant up to depth {} ({})",
            args.max_depth,
            if report.complete {
                "complete"
            } else {
                "trace set truncated at the bound"
            },
        );
        Ok(0)
    } else {
        for v in &report.violations {
            println!(
                "violation: after '{}' the implementation may output '{}'",
                render_trace(&v.trace),
                v.unexpected_output,
            );
        }
        Ok(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_spec_parses_probability_and_mode() {
        let spec: FaultSpec = "0.9:error".parse().unwrap();
        assert_eq!(spec.p, 0.9);
        assert_eq!(spec.mode, FailureMode::Error);
        assert!(!spec.acting);

        let spec: FaultSpec = "0.5:hallucinate-act".parse().unwrap();
        assert_eq!(spec.mode, FailureMode::Hallucinate);
        assert!(spec.acting);
        assert_eq!(
            spec.profile().nav_fault,
            nltest_core::agents::NavFault::ActWrongly
        );
    }

    #[test]
    fn fault_spec_rejects_bad_input() {
        for bad in ["", "0.5", "2:error", "-0.1:error", "0.5:guess", "x:error"] {
            assert!(bad.parse::<FaultSpec>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn sigma_arg_parses_triple_in_range() {
        let SigmaArg(t) = "0.038, 0.149, 0.132".parse().unwrap();
        assert_eq!(
            (t.sigma_nav, t.sigma_readiness, t.sigma_assert),
            (0.038, 0.149, 0.132)
        );
        for bad in ["0.1,0.2", "0.1,0.2,0.3,0.4", "0.6,0.1,0.1", "a,b,c"] {
            assert!(bad.parse::<SigmaArg>().is_err(), "accepted {bad:?}");
        }
    }
}
