//! Core data model: test cases, strict step forms, page snapshots, verdicts.
//!
//! A test case is a sequence of natural-language navigation actions followed
//! by a sequence of natural-language assertions. Each step may additionally
//! carry a machine-readable strict form when its text matches one of the
//! recognized templates (see the `strict` module and `docs/strict-forms.md`).

use std::fmt;

use serde::Serialize;

/// Final outcome of executing one test case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    /// Inconclusive: a guardrail stopped the run before a definite answer.
    #[serde(rename = "INC")]
    Inc,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inc => "INC",
        })
    }
}

/// Widget vocabulary for simulated pages. Unknown types are rejected when a
/// model file is loaded, not silently defaulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ElemType {
    Link,
    Button,
    List,
    Checkbox,
    Input,
    StaticText,
    Image,
}

impl ElemType {
    pub const ALL: [ElemType; 7] = [
        ElemType::Link,
        ElemType::Button,
        ElemType::List,
        ElemType::Checkbox,
        ElemType::Input,
        ElemType::StaticText,
        ElemType::Image,
    ];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            ElemType::Link => "link",
            ElemType::Button => "button",
            ElemType::List => "list",
            ElemType::Checkbox => "checkbox",
            ElemType::Input => "input",
            ElemType::StaticText => "statictext",
            ElemType::Image => "image",
        }
    }

    pub fn parse(s: &str) -> Option<ElemType> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One widget on a simulated page.
///
/// `checked` is meaningful only for checkboxes, `options` only for lists and
/// `value` only for inputs; loaders enforce that, and `validate` re-checks it
/// for programmatically built pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UiElement {
    pub id: String,
    pub description: String,
    pub elem_type: ElemType,
    pub checked: bool,
    pub visible: bool,
    pub options: Vec<String>,
    pub value: String,
}

impl UiElement {
    /// Plain element of a type with no state flags.
    #[must_use]
    pub fn new(id: impl Into<String>, description: impl Into<String>, elem_type: ElemType) -> Self {
        UiElement {
            id: id.into(),
            description: description.into(),
            elem_type,
            checked: false,
            visible: true,
            options: Vec::new(),
            value: String::new(),
        }
    }

    /// Field-consistency violations, empty when well-formed.
    #[must_use]
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.id.is_empty() {
            v.push("element id must be non-empty".into());
        }
        if self.checked && self.elem_type != ElemType::Checkbox {
            v.push(format!(
                "element '{}': checked is only valid for checkboxes",
                self.id
            ));
        }
        if !self.options.is_empty() && self.elem_type != ElemType::List {
            v.push(format!(
                "element '{}': options are only valid for lists",
                self.id
            ));
        }
        if !self.value.is_empty()
            && self.elem_type != ElemType::Input
            && self.elem_type != ElemType::List
        {
            v.push(format!(
                "element '{}': value is only valid for inputs and lists",
                self.id
            ));
        }
        v
    }
}

/// Observable state of one page: its URL and its widgets.
///
/// Two snapshots are "the same GUI" exactly when they are structurally equal;
/// that equality is what the executor's observe check uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageSnapshot {
    pub url: String,
    pub elements: Vec<UiElement>,
}

impl PageSnapshot {
    #[must_use]
    pub fn new(url: impl Into<String>) -> Self {
        PageSnapshot {
            url: url.into(),
            elements: Vec::new(),
        }
    }

    /// Snapshot of "no page loaded yet": the state a session starts in.
    #[must_use]
    pub fn blank() -> Self {
        PageSnapshot {
            url: String::new(),
            elements: Vec::new(),
        }
    }

    /// Violations: duplicate element ids plus per-element inconsistencies.
    #[must_use]
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.elements {
            if !seen.insert(e.id.as_str()) {
                v.push(format!("duplicate element id '{}'", e.id));
            }
            v.extend(e.validate());
        }
        v
    }
}

/// A navigation step whose text matched one of the six action templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrictAction {
    Open { url: String },
    Click { target: String },
    Select { target: String, option: String },
    Check { target: String },
    Uncheck { target: String },
    Fill { target: String, value: String },
}

impl StrictAction {
    /// True when both actions denote the same template instance, comparing
    /// targets and values case-insensitively. Transition lookup in the
    /// simulator and duplicate detection at load both use this relation.
    #[must_use]
    pub fn pattern_eq(&self, other: &StrictAction) -> bool {
        use StrictAction::*;
        match (self, other) {
            (Open { url: a }, Open { url: b }) => a.eq_ignore_ascii_case(b),
            (Click { target: a }, Click { target: b }) => a.eq_ignore_ascii_case(b),
            (
                Select {
                    target: a,
                    option: oa,
                },
                Select {
                    target: b,
                    option: ob,
                },
            ) => a.eq_ignore_ascii_case(b) && oa.eq_ignore_ascii_case(ob),
            (Check { target: a }, Check { target: b }) => a.eq_ignore_ascii_case(b),
            (Uncheck { target: a }, Uncheck { target: b }) => a.eq_ignore_ascii_case(b),
            (
                Fill {
                    target: a,
                    value: va,
                },
                Fill {
                    target: b,
                    value: vb,
                },
            ) => a.eq_ignore_ascii_case(b) && va.eq_ignore_ascii_case(vb),
            _ => false,
        }
    }
}

impl fmt::Display for StrictAction {
    /// Canonical template text; feeding it back through the action parser
    /// yields an equal value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrictAction::Open { url } => write!(f, "Open the website '{url}'"),
            StrictAction::Click { target } => write!(f, "Click on '{target}'"),
            StrictAction::Select { target, option } => {
                write!(f, "Select '{option}' in '{target}'")
            }
            StrictAction::Check { target } => write!(f, "Check '{target}'"),
            StrictAction::Uncheck { target } => write!(f, "Uncheck '{target}'"),
            StrictAction::Fill { target, value } => write!(f, "Fill '{target}' with '{value}'"),
        }
    }
}

/// Comparison mode for counted presence assertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountComparison {
    Exactly,
    AtLeast,
}

/// An assertion leaf whose text matched one of the six assertion templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrictAssertion {
    IsPresent {
        target: String,
    },
    IsNotPresent {
        target: String,
    },
    IsChecked {
        target: String,
    },
    IsVisible {
        target: String,
    },
    IsPresentCount {
        target: String,
        count: usize,
        /// `None` means the step text did not pick a mode; the evaluator's
        /// configured default (at-least) applies.
        comparison: Option<CountComparison>,
    },
    TextContains {
        needle: String,
    },
}

impl fmt::Display for StrictAssertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrictAssertion::IsPresent { target } => write!(f, "'{target}' is present"),
            StrictAssertion::IsNotPresent { target } => write!(f, "'{target}' is not present"),
            StrictAssertion::IsChecked { target } => write!(f, "'{target}' is checked"),
            StrictAssertion::IsVisible { target } => write!(f, "'{target}' is visible"),
            StrictAssertion::IsPresentCount {
                target,
                count,
                comparison,
            } => match comparison {
                None => write!(f, "'{target}' is present {count} times"),
                Some(CountComparison::Exactly) => {
                    write!(f, "'{target}' is present exactly {count} times")
                }
                Some(CountComparison::AtLeast) => {
                    write!(f, "'{target}' is present at least {count} times")
                }
            },
            StrictAssertion::TextContains { needle } => {
                write!(f, "the page contains the text '{needle}'")
            }
        }
    }
}

/// One navigation step as written, with its strict form when recognized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NavAction {
    pub raw_text: String,
    pub strict_form: Option<StrictAction>,
}

/// One assertion leaf as written, with its strict form when recognized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertionLeaf {
    pub raw_text: String,
    pub strict_form: Option<StrictAssertion>,
}

/// Boolean combination of assertion leaves. Suite files produce the flat
/// normal form (an OR of ANDs of leaves); arbitrary trees can be built
/// programmatically and are evaluated recursively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AssertionExpr {
    Leaf(AssertionLeaf),
    And { children: Vec<AssertionExpr> },
    Or { children: Vec<AssertionExpr> },
}

impl AssertionExpr {
    #[must_use]
    pub fn leaf(raw_text: impl Into<String>, strict_form: Option<StrictAssertion>) -> Self {
        AssertionExpr::Leaf(AssertionLeaf {
            raw_text: raw_text.into(),
            strict_form,
        })
    }

    /// All leaves, left to right.
    pub fn leaves(&self) -> Vec<&AssertionLeaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a AssertionLeaf>) {
        match self {
            AssertionExpr::Leaf(l) => out.push(l),
            AssertionExpr::And { children } | AssertionExpr::Or { children } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    fn validate_into(&self, out: &mut Vec<String>) {
        match self {
            AssertionExpr::Leaf(l) => {
                if l.raw_text.trim().is_empty() {
                    out.push("assertion leaf text must be non-empty".into());
                }
            }
            AssertionExpr::And { children } | AssertionExpr::Or { children } => {
                if children.len() < 2 {
                    out.push("composite assertion needs at least two operands".into());
                }
                for c in children {
                    c.validate_into(out);
                }
            }
        }
    }
}

impl fmt::Display for AssertionExpr {
    /// Renders the suite-file surface text. Nested non-normal-form trees get
    /// parentheses for readability even though the file grammar has none.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn render(e: &AssertionExpr, f: &mut fmt::Formatter<'_>, parent_and: bool) -> fmt::Result {
            match e {
                AssertionExpr::Leaf(l) => f.write_str(&l.raw_text),
                AssertionExpr::And { children } => {
                    for (i, c) in children.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" AND ")?;
                        }
                        render(c, f, true)?;
                    }
                    Ok(())
                }
                AssertionExpr::Or { children } => {
                    if parent_and {
                        f.write_str("(")?;
                    }
                    for (i, c) in children.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" OR ")?;
                        }
                        render(c, f, false)?;
                    }
                    if parent_and {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        render(self, f, false)
    }
}

/// A natural-language test case: navigation first, assertions after.
///
/// The split into two fields makes the "navigation precedes assertions"
/// ordering true by construction; `validate_test_case` checks the remaining
/// clauses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestCase {
    pub id: String,
    pub nav_actions: Vec<NavAction>,
    pub assertions: Vec<AssertionExpr>,
    /// Expected per-step outcomes for agent evaluation runs; when present it
    /// has exactly `len()` entries (navigation steps first, then assertions).
    pub expectations: Option<Vec<bool>>,
}

impl TestCase {
    /// Total step count `l` (navigation plus assertions).
    #[must_use]
    pub fn len(&self) -> usize {
        self.nav_actions.len() + self.assertions.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A parsed suite file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
    /// Set by the `option: navigation-only` directive; such suites may hold
    /// cases without assertions.
    pub navigation_only: bool,
}

/// Checks every test-case invariant and returns the violated clauses.
///
/// `navigation_only` relaxes the requirement that at least one assertion
/// follows the navigation prefix.
#[must_use]
pub fn validate_test_case(tc: &TestCase, navigation_only: bool) -> Vec<String> {
    let mut v = Vec::new();
    if tc.id.trim().is_empty() {
        v.push("test id must be non-empty".into());
    }
    if tc.nav_actions.is_empty() {
        v.push("test case needs at least one navigation action".into());
    }
    if tc.assertions.is_empty() && !navigation_only {
        v.push("test case needs at least one assertion (suite is not navigation-only)".into());
    }
    for a in &tc.nav_actions {
        if a.raw_text.trim().is_empty() {
            v.push("navigation action text must be non-empty".into());
        }
    }
    for a in &tc.assertions {
        a.validate_into(&mut v);
    }
    if let Some(exp) = &tc.expectations {
        if exp.len() != tc.len() {
            v.push(format!(
                "expectations list has {} entries, expected {} (one per step)",
                exp.len(),
                tc.len()
            ));
        }
    }
    v
}
