//! Acceptance gate: one test per release criterion.
//!
//! Each test prints a summary line (visible with `--nocapture`); the
//! pass/fail signal is the test outcome itself. Fixtures live in
//! `fixtures/` at the workspace root.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use nltest_core::agents::{Agent, FailureMode, FaultAgent, FaultProfile, OracleAgent};
use nltest_core::consistency::{
    agent_sigma, agent_step_score, consistency_of, eval_agents, modal_verdict, mre,
    observed_consistency,
};
use nltest_core::executor::{run_batch, ExecOptions};
use nltest_core::iolts::{ioco_check, Iolts, Label};
use nltest_core::model::Verdict;
use nltest_core::regimes::{
    matches_error_prone, matches_hallucinating, matches_healthy, overridden_readiness_count,
};
use nltest_core::report::mask_times;
use nltest_core::rng::{derive_seed, SimRng};
use nltest_core::sim::{load_aut_model, mutate, spec_of, AutModel, Mutation, StateChange};
use nltest_core::strict::{strictness_of, StrictOptions};
use nltest_core::suite::parse_test_suite;
use nltest_core::unsound::{classify, SigmaTriple, P3, SIGMA3};
use nltest_core::{TestCase, TestSuite};

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn fixture_model(name: &str) -> AutModel {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture model readable");
    load_aut_model(&text).expect("fixture model valid")
}

fn fixture_suite(name: &str) -> TestSuite {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture suite readable");
    parse_test_suite(&text).expect("fixture suite valid")
}

fn only_case(suite: &TestSuite) -> &TestCase {
    assert_eq!(suite.cases.len(), 1);
    &suite.cases[0]
}

fn triple(p: f64, mode: FailureMode, acting_nav: bool) -> [Option<FaultProfile>; 3] {
    let base = FaultProfile::new(p, mode);
    let nav = if acting_nav { base.acting() } else { base };
    [Some(nav), Some(base), Some(base)]
}

fn fault_maker(
    profiles: [Option<FaultProfile>; 3],
    seed: u64,
) -> impl FnMut(usize) -> Box<dyn Agent> {
    move |run| {
        let [nav, readiness, assertion] = profiles;
        Box::new(FaultAgent::new(
            StrictOptions::default(),
            nav,
            readiness,
            assertion,
            derive_seed(seed, run as u64),
        ))
    }
}

#[test]
fn criterion_1_sigma_formula_reference_points() {
    let at_p3 = agent_sigma(P3);
    assert!(
        (at_p3 - SIGMA3).abs() < 5e-4,
        "sigma({P3}) = {at_p3}, expected {SIGMA3} within 5e-4"
    );
    assert_eq!(agent_sigma(0.5), 0.5);
    assert_eq!(agent_sigma(1.0), 0.0);
    println!("criterion 1: sigma({P3}) = {at_p3:.6}, sigma(0.5) = 0.5, sigma(1) = 0");
}

#[test]
fn criterion_2_measure_plugins_reproduce_published_rows() {
    // First row: deviations 0.038 (nav), 0.149 (readiness), 0.132 (assertion).
    let s_n = agent_step_score(0.038);
    assert!((s_n - 0.924).abs() < 1e-12, "s_n = {s_n}, expected 0.924");
    let llama = SigmaTriple {
        sigma_nav: 0.038,
        sigma_readiness: 0.149,
        sigma_assert: 0.132,
    };
    assert!(
        llama.all_below(SIGMA3),
        "all three deviations sit below the reference level"
    );

    // Second row: 0.158 / 0.348 / 0.431; two strict navigations and one
    // agent assertion average to (0.684 + 0.684 + 0.138) / 3.
    let qwen = SigmaTriple {
        sigma_nav: 0.158,
        sigma_readiness: 0.348,
        sigma_assert: 0.431,
    };
    assert!(!qwen.all_below(SIGMA3));
    let suite = parse_test_suite(
        "# test worked\n\
         action: Open the website 'https://site.example/en'\n\
         action: Click on 'News'\n\
         assert: the page has links\n",
    )
    .unwrap();
    let tc = only_case(&suite);
    let profile = strictness_of(tc);
    assert_eq!(profile.nav, vec![true, true]);
    assert_eq!(profile.assertions, vec![false]);
    let estimate = consistency_of(tc, &qwen);
    assert!(
        (estimate - 0.502).abs() < 1e-3,
        "estimate = {estimate}, expected 0.502"
    );
    let class = classify(&profile, &qwen);
    assert!(
        !class.bounded,
        "mixed case with large deviations must not be classed bounded"
    );
    println!("criterion 2: s_n = {s_n:.3}, worked example = {estimate:.3}");
}

#[test]
fn criterion_3_case_a_oracle_runs_all_pass() {
    let opts = ExecOptions::default();
    let mut total = 0;
    for (model_name, suite_name, n) in [
        ("uca_mini.aut", "uca_mini.suite", 1000),
        ("uca_site.aut", "uca_site.suite", 100),
        ("forms.aut", "forms.suite", 100),
    ] {
        let model = fixture_model(model_name);
        let suite = fixture_suite(suite_name);
        for tc in &suite.cases {
            let results = run_batch(&model, tc, n, &opts, |_| Box::new(OracleAgent::default()));
            for r in &results {
                assert_eq!(r.verdict, Verdict::Pass, "case {} must pass", tc.id);
                assert!(
                    matches_healthy(r),
                    "case {} run fits the healthy regime",
                    tc.id
                );
                assert!(nltest_core::iolts::passes(r));
            }
            total += results.len();
        }
    }
    println!("criterion 3: {total} oracle runs, all PASS, all in the healthy regime");
}

#[test]
fn criterion_4_case_b_error_agents_never_fail() {
    let model = fixture_model("uca_mini.aut");
    let suite = fixture_suite("uca_mini.suite");
    let tc = only_case(&suite);
    let opts = ExecOptions::default();
    let mut verdicts = [0usize; 3];
    for (i, p) in [0.0, 0.5, 0.9].into_iter().enumerate() {
        let results = run_batch(
            &model,
            tc,
            1000,
            &opts,
            fault_maker(triple(p, FailureMode::Error, false), 40 + i as u64),
        );
        for r in &results {
            assert_ne!(
                r.verdict,
                Verdict::Fail,
                "error-mode agents cannot produce FAIL"
            );
            assert!(
                matches_error_prone(r),
                "trace outside the error-prone regime"
            );
        }
        verdicts[i] = results
            .iter()
            .filter(|r| r.verdict == Verdict::Pass)
            .count();
    }
    println!("criterion 4: 3000 error-mode runs, zero FAIL; PASS counts by p: {verdicts:?}");
}

#[test]
fn criterion_5_case_c_hallucination_witness_and_containment() {
    // The roundtrip case can be steered onto the link-free contact page by a
    // wrongly acting navigation fault, making the following readiness
    // formula false; a lying readiness answer then masks the wrong page.
    let model = fixture_model("uca_site.aut");
    let suite = fixture_suite("uca_site.suite");
    let tc = &suite.cases[0];
    assert_eq!(tc.id, "eu_roundtrip");
    let results = run_batch(
        &model,
        tc,
        1000,
        &ExecOptions::default(),
        fault_maker(triple(0.5, FailureMode::Hallucinate, true), 99),
    );
    let fails = results
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .count();
    assert!(
        fails > 0,
        "hallucinating agents must produce at least one FAIL"
    );
    for r in &results {
        assert!(
            matches_hallucinating(r),
            "trace outside the hallucinating regime"
        );
    }
    let masked = results
        .iter()
        .filter(|r| overridden_readiness_count(r) > 0)
        .count();
    assert!(
        masked > 0,
        "at least one run must mask a failed readiness formula"
    );
    println!("criterion 5: 1000 hallucinating runs, {fails} FAIL, {masked} with masked readiness");
}

#[test]
fn criterion_6_ioco_mutants() {
    for name in ["uca_mini.aut", "uca_site.aut", "forms.aut"] {
        let s = spec_of(&fixture_model(name));
        let report = ioco_check(&s, &s, 12).unwrap();
        assert!(report.conformant, "{name} must conform to itself");
    }

    // Transition indices follow declaration order in the fixture files.
    let mini = fixture_model("uca_mini.aut");
    let site = fixture_model("uca_site.aut");
    let mutants: Vec<(&str, &AutModel, Mutation, bool)> = vec![
        (
            "mini: first link rewired",
            &mini,
            Mutation::RedirectTransition {
                index: 1,
                new_to: "news".into(),
            },
            false,
        ),
        (
            "mini: second link rewired",
            &mini,
            Mutation::RedirectTransition {
                index: 2,
                new_to: "eu".into(),
            },
            false,
        ),
        (
            "mini: dropped link row",
            &mini,
            Mutation::DropTransition { index: 2 },
            true,
        ),
        (
            "mini: removed widget",
            &mini,
            Mutation::RemoveElement {
                page: "home".into(),
                element: "nav2".into(),
            },
            true,
        ),
        (
            "mini: hidden widget",
            &mini,
            Mutation::AlterElementState {
                page: "eu".into(),
                element: "blurb".into(),
                change: StateChange::SetVisible(false),
            },
            true,
        ),
        (
            "site: return link rewired",
            &site,
            Mutation::RedirectTransition {
                index: 4,
                new_to: "news".into(),
            },
            false,
        ),
        (
            "site: reworded widget",
            &site,
            Mutation::AlterElementState {
                page: "home".into(),
                element: "welcome".into(),
                change: StateChange::SetDescription("Hello".into()),
            },
            true,
        ),
    ];
    let mut detected = 0;
    for (label, original, mutation, equivalent) in &mutants {
        let mutant = mutate(original, mutation).expect("mutant stays valid");
        let report = ioco_check(&spec_of(&mutant), &spec_of(original), 12).unwrap();
        if *equivalent {
            // Element-level and dropped-row mutants cannot add outputs, so
            // they conform by construction; asserting it here is the
            // verification of that argument.
            assert!(report.conformant, "{label}: expected output-equivalent");
        } else {
            assert!(!report.conformant, "{label}: expected an ioco violation");
            detected += 1;
        }
    }
    assert!(mutants.len() >= 6);
    println!(
        "criterion 6: self-conformance on 3 fixtures; {} of {} mutants detected, \
         rest verified output-equivalent",
        detected,
        mutants.len()
    );
}

/// Saturation of single (projected trace, state) pairs: an implementation
/// of trace semantics on purpose unlike the checker's closure-over-sets.
fn brute_pairs(s: &Iolts, max_depth: usize) -> BTreeSet<(Vec<Label>, String)> {
    let mut seen = BTreeSet::new();
    let mut work = vec![(Vec::new(), s.initial.clone())];
    seen.insert((Vec::new(), s.initial.clone()));
    while let Some((trace, state)) = work.pop() {
        for tr in s.transitions.iter().filter(|t| t.from == state) {
            let next = match &tr.label {
                Label::Internal(_) => (trace.clone(), tr.to.clone()),
                _ if trace.len() < max_depth => {
                    let mut t = trace.clone();
                    t.push(tr.label.clone());
                    (t, tr.to.clone())
                }
                _ => continue,
            };
            if seen.insert(next.clone()) {
                work.push(next);
            }
        }
    }
    seen
}

fn brute_after(s: &Iolts, trace: &[Label]) -> BTreeSet<String> {
    brute_pairs(s, trace.len())
        .into_iter()
        .filter(|(t, _)| t == trace)
        .map(|(_, q)| q)
        .collect()
}

fn brute_out(s: &Iolts, states: &BTreeSet<String>) -> BTreeSet<String> {
    let mut reach = states.clone();
    loop {
        let grown: Vec<String> = reach
            .iter()
            .flat_map(|q| {
                s.transitions
                    .iter()
                    .filter(move |t| t.from == *q && matches!(t.label, Label::Internal(_)))
                    .map(|t| t.to.clone())
            })
            .collect();
        let before = reach.len();
        reach.extend(grown);
        if reach.len() == before {
            break;
        }
    }
    reach
        .iter()
        .flat_map(|q| s.transitions.iter().filter(move |t| t.from == *q))
        .filter_map(|t| match &t.label {
            Label::Output(o) => Some(o.clone()),
            _ => None,
        })
        .collect()
}

fn brute_ioco(imp: &Iolts, spec: &Iolts, max_depth: usize) -> bool {
    let spec_traces: BTreeSet<Vec<Label>> = brute_pairs(spec, max_depth)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    for trace in &spec_traces {
        let imp_states = brute_after(imp, trace);
        if imp_states.is_empty() {
            continue;
        }
        let spec_states = brute_after(spec, trace);
        if !brute_out(imp, &imp_states).is_subset(&brute_out(spec, &spec_states)) {
            return false;
        }
    }
    true
}

fn random_spec(rng: &mut SimRng) -> Iolts {
    let n = 1 + rng.index(8);
    let mut s = Iolts::new("s0");
    for i in 0..n {
        s.states.insert(format!("s{i}"));
    }
    let labels = [
        Label::input("a"),
        Label::input("b"),
        Label::output("x"),
        Label::output("y"),
    ];
    for i in 0..n {
        for label in &labels {
            if rng.bernoulli(0.45) {
                s.add_transition(format!("s{i}"), label.clone(), format!("s{}", rng.index(n)));
            }
        }
    }
    s
}

fn random_impl(rng: &mut SimRng) -> Iolts {
    let n = 1 + rng.index(8);
    let mut s = Iolts::new("s0");
    for i in 0..n {
        s.states.insert(format!("s{i}"));
    }
    let labels = [
        Label::input("a"),
        Label::input("b"),
        Label::output("x"),
        Label::output("y"),
        Label::internal("tau"),
    ];
    for _ in 0..rng.index(16) {
        let from = format!("s{}", rng.index(n));
        let to = format!("s{}", rng.index(n));
        s.add_transition(from, labels[rng.index(labels.len())].clone(), to);
    }
    s
}

#[test]
fn criterion_6_ioco_random_agreement() {
    let mut rng = SimRng::new(2468);
    let mut conformant = 0;
    for round in 0..200 {
        let spec = random_spec(&mut rng);
        let imp = random_impl(&mut rng);
        let fast = ioco_check(&imp, &spec, 4).unwrap().conformant;
        let brute = brute_ioco(&imp, &spec, 4);
        assert_eq!(fast, brute, "round {round} disagrees");
        conformant += usize::from(fast);
    }
    println!(
        "criterion 6 (random): 200 instances agree with saturation oracle, \
         {conformant} conformant"
    );
}

#[test]
fn criterion_7_monte_carlo_sigma_convergence() {
    let model = fixture_model("uca_site.aut");
    let suite = fixture_suite("eval_mc.suite");
    let opts = StrictOptions::default();
    for (p, sigma_ref, seed) in [(P3, SIGMA3, 7u64), (0.9, 0.3, 8u64)] {
        let [nav, readiness, assertion] = triple(p, FailureMode::Hallucinate, false);
        let mut agent = FaultAgent::new(opts, nav, readiness, assertion, seed);
        let stats = eval_agents(&model, &suite.cases, &mut agent, &opts, 1500).unwrap();
        for (role, s) in [
            ("nav", stats.nav),
            ("readiness", stats.readiness),
            ("assertion", stats.assertion),
        ] {
            assert!(
                s.trials >= 10_000,
                "{role} needs 10k trials, got {}",
                s.trials
            );
            let sigma = s.sigma().unwrap();
            assert!(
                (sigma - sigma_ref).abs() < 0.02,
                "{role} at p={p}: sigma {sigma:.4}, expected {sigma_ref} within 0.02"
            );
        }
        let t = stats.sigmas().unwrap();
        println!(
            "criterion 7: p={p} -> sigma {:.4}/{:.4}/{:.4} (ref {sigma_ref})",
            t.sigma_nav, t.sigma_readiness, t.sigma_assert
        );
    }
}

#[test]
fn criterion_8_estimated_vs_observed_consistency() {
    // Fully strict suite under oracle agents: estimate and observation both
    // land at exactly 1.
    let model = fixture_model("forms.aut");
    let suite = fixture_suite("forms.suite");
    let opts = StrictOptions::default();
    let mut oracle = OracleAgent::default();
    let stats = eval_agents(&model, &suite.cases, &mut oracle, &opts, 30).unwrap();
    let sigmas = stats.sigmas().unwrap();
    assert_eq!(
        (
            sigmas.sigma_nav,
            sigmas.sigma_readiness,
            sigmas.sigma_assert
        ),
        (0.0, 0.0, 0.0)
    );
    for tc in &suite.cases {
        let results = run_batch(&model, tc, 200, &ExecOptions::default(), |_| {
            Box::new(OracleAgent::default())
        });
        let observed = observed_consistency(&results);
        let estimated = consistency_of(tc, &sigmas);
        assert_eq!(observed, 1.0);
        assert_eq!(estimated, 1.0);
        assert_eq!(mre(estimated, observed), Some(0.0));
    }

    // One honest navigation plus one agent assertion lying with rate 1-p:
    // PASS count is Binomial(N, p), so the modal fraction converges on p.
    let p = 0.75;
    let model = fixture_model("uca_mini.aut");
    let suite = fixture_suite("single_assert.suite");
    let tc = only_case(&suite);
    let n = 5000;
    let results = run_batch(
        &model,
        tc,
        n,
        &ExecOptions::default(),
        fault_maker(
            [
                None,
                None,
                Some(FaultProfile::new(p, FailureMode::Hallucinate)),
            ],
            55,
        ),
    );
    let pass_rate = results
        .iter()
        .filter(|r| r.verdict == Verdict::Pass)
        .count() as f64
        / n as f64;
    assert!(
        (pass_rate - p).abs() < 0.03,
        "pass rate {pass_rate:.4}, expected {p}"
    );
    assert_eq!(modal_verdict(&results), Verdict::Pass);
    let observed = observed_consistency(&results);
    assert!(
        (observed - p).abs() < 0.03,
        "observed consistency {observed:.4}, expected {p} within 0.03"
    );
    println!(
        "criterion 8: strict suite exact at 1.0; single-assertion pass rate \
         {pass_rate:.4} vs p={p}"
    );
}

#[test]
fn criterion_9_run_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    let run = |out_path: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_nltest"))
            .args([
                "run",
                "--suite",
                fixture_path("uca_mini.suite").to_str().unwrap(),
                "--model",
                fixture_path("uca_mini.aut").to_str().unwrap(),
                "--agents",
                "fault",
                "--fault-nav",
                "0.9:hallucinate-act",
                "--fault-readiness",
                "0.8:hallucinate",
                "--fault-assert",
                "0.7:error",
                "--n",
                "50",
                "--seed",
                "123",
                "--out",
                out_path.to_str().unwrap(),
            ])
            .current_dir(dir.path())
            .status()
            .expect("binary runs");
        assert!(status.code().is_some(), "terminated by signal");
    };
    run(&out("a.jsonl"));
    run(&out("b.jsonl"));
    let a = std::fs::read_to_string(out("a.jsonl")).unwrap();
    let b = std::fs::read_to_string(out("b.jsonl")).unwrap();
    assert!(
        a.lines().count() > 50,
        "report holds meta, run and summary lines"
    );
    assert_eq!(
        mask_times(&a),
        mask_times(&b),
        "reports differ beyond the timestamp"
    );
    println!("criterion 9: two seeded invocations agree byte-for-byte modulo timestamp");
}
