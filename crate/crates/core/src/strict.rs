//! Strict step recognition and evaluation.
//!
//! A step is *strict* when its text matches one of twelve templates: six
//! navigation actions (open, click, select, check, uncheck, fill) and six
//! assertions (presence, absence, checked, visible, counted presence, page
//! text). Strict steps can be checked against a page snapshot by formula,
//! with no agent involved. Everything else is agent territory.
//!
//! Recognition is by anchored regular expressions over the whole step text,
//! so it is deterministic and total: any text either matches exactly one
//! template or is unrecognized, and unrecognized is an ordinary value, not an
//! error. The templates are a public contract, documented with examples in
//! `docs/strict-forms.md`.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::model::{
    AssertionExpr, AssertionLeaf, CountComparison, ElemType, NavAction, PageSnapshot, StrictAction,
    StrictAssertion, TestCase, UiElement,
};

/// Identifier of one of the twelve recognized templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FormId(pub u8);

impl FormId {
    #[must_use]
    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "Open",
            2 => "Click",
            3 => "Select",
            4 => "Check",
            5 => "Uncheck",
            6 => "Fill",
            7 => "IsPresent",
            8 => "IsNotPresent",
            9 => "IsChecked",
            10 => "IsVisible",
            11 => "IsPresentCount",
            12 => "TextContains",
            _ => "Unknown",
        }
    }
}

impl fmt::Display for FormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.0, self.name())
    }
}

/// Template registry entry: id, name, and a canonical example instance.
pub struct FormInfo {
    pub id: FormId,
    pub name: &'static str,
    pub example: &'static str,
}

/// The complete template registry. Exactly twelve entries; the example of
/// each entry parses back to that form (checked by tests).
#[must_use]
pub fn all_forms() -> [FormInfo; 12] {
    [
        FormInfo {
            id: FormId(1),
            name: "Open",
            example: "Open the website 'https://www.uca.fr/en'",
        },
        FormInfo {
            id: FormId(2),
            name: "Click",
            example: "Click on 'European University'",
        },
        FormInfo {
            id: FormId(3),
            name: "Select",
            example: "Select 'French' in 'Language'",
        },
        FormInfo {
            id: FormId(4),
            name: "Check",
            example: "Check 'Subscribe to newsletter'",
        },
        FormInfo {
            id: FormId(5),
            name: "Uncheck",
            example: "Uncheck 'Dark mode'",
        },
        FormInfo {
            id: FormId(6),
            name: "Fill",
            example: "Fill 'Search courses' with 'compilers'",
        },
        FormInfo {
            id: FormId(7),
            name: "IsPresent",
            example: "'Sign in' is present",
        },
        FormInfo {
            id: FormId(8),
            name: "IsNotPresent",
            example: "'Error' is not present",
        },
        FormInfo {
            id: FormId(9),
            name: "IsChecked",
            example: "'Dark mode' is checked",
        },
        FormInfo {
            id: FormId(10),
            name: "IsVisible",
            example: "'Save' is visible",
        },
        FormInfo {
            id: FormId(11),
            name: "IsPresentCount",
            example: "'Course' is present exactly 4 times",
        },
        FormInfo {
            id: FormId(12),
            name: "TextContains",
            example: "the page contains the text 'Welcome'",
        },
    ]
}

/// Form id for a recognized action.
#[must_use]
pub fn action_form(a: &StrictAction) -> FormId {
    match a {
        StrictAction::Open { .. } => FormId(1),
        StrictAction::Click { .. } => FormId(2),
        StrictAction::Select { .. } => FormId(3),
        StrictAction::Check { .. } => FormId(4),
        StrictAction::Uncheck { .. } => FormId(5),
        StrictAction::Fill { .. } => FormId(6),
    }
}

/// Form id for a recognized assertion.
#[must_use]
pub fn assertion_form(a: &StrictAssertion) -> FormId {
    match a {
        StrictAssertion::IsPresent { .. } => FormId(7),
        StrictAssertion::IsNotPresent { .. } => FormId(8),
        StrictAssertion::IsChecked { .. } => FormId(9),
        StrictAssertion::IsVisible { .. } => FormId(10),
        StrictAssertion::IsPresentCount { .. } => FormId(11),
        StrictAssertion::TextContains { .. } => FormId(12),
    }
}

static RE_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^open(?: the website)?\s+(?:'([^']+)'|(\S+))$").unwrap());
static RE_CLICK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^click(?: on)?(?: the (?:link|button))?\s+(?:'([^']+)'|(.+))$").unwrap()
});
static RE_SELECT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^select\s+'([^']+)'\s+(?:in|from)\s+'([^']+)'$").unwrap());
static RE_CHECK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^check\s+(?:the\s+)?(?:'([^']+)'|(.+?))(?:\s+checkbox)?$").unwrap()
});
static RE_UNCHECK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^uncheck\s+(?:the\s+)?(?:'([^']+)'|(.+?))(?:\s+checkbox)?$").unwrap()
});
static RE_FILL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^fill\s+(?:in\s+)?(?:the\s+)?'([^']+)'\s+with\s+'([^']+)'$").unwrap()
});

static RE_PRESENT_COUNT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:the )?(?:'([^']+)'|(.+?)) is present (?:(exactly|at least) )?(\d+) times?$",
    )
    .unwrap()
});
static RE_NOT_PRESENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:the )?(?:'([^']+)'|(.+?)) is not present$").unwrap());
static RE_PRESENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:the )?(?:'([^']+)'|(.+?)) is present$").unwrap());
static RE_CHECKED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:the )?(?:'([^']+)'|(.+?)) is checked$").unwrap());
static RE_VISIBLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:the )?(?:'([^']+)'|(.+?)) is visible$").unwrap());
static RE_TEXT_CONTAINS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^the page contains(?: the text)?\s+(?:'([^']+)'|(.+))$").unwrap()
});

fn captured(caps: &regex::Captures<'_>, a: usize, b: usize) -> String {
    caps.get(a)
        .or_else(|| caps.get(b))
        .map(|m| m.as_str().trim().to_string())
        .unwrap_or_default()
}

/// Recognizes a navigation action. `None` means the text is outside the six
/// action templates; that is an expected everyday outcome, not a failure.
#[must_use]
pub fn parse_nav_action(text: &str) -> Option<StrictAction> {
    let t = text.trim();
    if let Some(c) = RE_OPEN.captures(t) {
        return Some(StrictAction::Open {
            url: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_SELECT.captures(t) {
        return Some(StrictAction::Select {
            option: c[1].trim().to_string(),
            target: c[2].trim().to_string(),
        });
    }
    if let Some(c) = RE_FILL.captures(t) {
        return Some(StrictAction::Fill {
            target: c[1].trim().to_string(),
            value: c[2].trim().to_string(),
        });
    }
    if let Some(c) = RE_UNCHECK.captures(t) {
        return Some(StrictAction::Uncheck {
            target: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_CHECK.captures(t) {
        return Some(StrictAction::Check {
            target: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_CLICK.captures(t) {
        return Some(StrictAction::Click {
            target: captured(&c, 1, 2),
        });
    }
    None
}

/// Recognizes an assertion leaf. Order matters: the more specific templates
/// (counted presence, negated presence) are tried before the general ones.
#[must_use]
pub fn parse_assertion_leaf(text: &str) -> Option<StrictAssertion> {
    let t = text.trim();
    if let Some(c) = RE_PRESENT_COUNT.captures(t) {
        let comparison = c.get(3).map(|m| {
            if m.as_str().eq_ignore_ascii_case("exactly") {
                CountComparison::Exactly
            } else {
                CountComparison::AtLeast
            }
        });
        let count: usize = c[4].parse().ok()?;
        return Some(StrictAssertion::IsPresentCount {
            target: captured(&c, 1, 2),
            count,
            comparison,
        });
    }
    if let Some(c) = RE_NOT_PRESENT.captures(t) {
        return Some(StrictAssertion::IsNotPresent {
            target: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_PRESENT.captures(t) {
        return Some(StrictAssertion::IsPresent {
            target: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_CHECKED.captures(t) {
        return Some(StrictAssertion::IsChecked {
            target: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_VISIBLE.captures(t) {
        return Some(StrictAssertion::IsVisible {
            target: captured(&c, 1, 2),
        });
    }
    if let Some(c) = RE_TEXT_CONTAINS.captures(t) {
        return Some(StrictAssertion::TextContains {
            needle: captured(&c, 1, 2),
        });
    }
    None
}

/// Builds a [`NavAction`] with its strict annotation.
#[must_use]
pub fn annotate_nav(text: impl Into<String>) -> NavAction {
    let raw_text = text.into();
    let strict_form = parse_nav_action(&raw_text);
    NavAction {
        raw_text,
        strict_form,
    }
}

/// Builds an [`AssertionLeaf`] with its strict annotation.
#[must_use]
pub fn annotate_assertion_leaf(text: impl Into<String>) -> AssertionLeaf {
    let raw_text = text.into();
    let strict_form = parse_assertion_leaf(&raw_text);
    AssertionLeaf {
        raw_text,
        strict_form,
    }
}

/// Three-valued outcome of a strict evaluation. `NotApplicable` means the
/// step (or some leaf of it) is outside the strict templates, which is a
/// different situation from a formula that evaluated to false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrictOutcome {
    True,
    False,
    NotApplicable,
}

/// Result of a strict evaluation against one page snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct StrictEvalResult {
    pub outcome: StrictOutcome,
    /// Present exactly when `outcome` is not `NotApplicable`. For composite
    /// assertions it names the first leaf's form.
    pub matched_form: Option<FormId>,
    pub explanation: String,
}

impl StrictEvalResult {
    fn not_applicable(explanation: String) -> Self {
        StrictEvalResult {
            outcome: StrictOutcome::NotApplicable,
            matched_form: None,
            explanation,
        }
    }

    fn decided(value: bool, form: FormId, explanation: String) -> Self {
        StrictEvalResult {
            outcome: if value {
                StrictOutcome::True
            } else {
                StrictOutcome::False
            },
            matched_form: Some(form),
            explanation,
        }
    }
}

/// How strict targets are matched against element descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Case-insensitive substring of the description (the default).
    #[default]
    Substring,
    /// Case-insensitive whole-description equality.
    Exact,
}

/// Knobs for strict evaluation.
#[derive(Debug, Clone, Copy)]
pub struct StrictOptions {
    pub match_mode: MatchMode,
    /// Comparison used by counted presence when the step text names none.
    pub count_default: CountComparison,
}

impl Default for StrictOptions {
    fn default() -> Self {
        StrictOptions {
            match_mode: MatchMode::Substring,
            count_default: CountComparison::AtLeast,
        }
    }
}

fn desc_matches(description: &str, target: &str, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Substring => description.to_lowercase().contains(&target.to_lowercase()),
        MatchMode::Exact => description.eq_ignore_ascii_case(target),
    }
}

fn matching<'a>(
    page: &'a PageSnapshot,
    target: &str,
    mode: MatchMode,
) -> impl Iterator<Item = &'a UiElement> + 'a {
    let target = target.to_string();
    page.elements
        .iter()
        .filter(move |e| desc_matches(&e.description, &target, mode))
}

/// Evaluates whether a navigation action is executable on `page`, by formula.
///
/// Open is always ready: loading a URL needs nothing from the current page.
/// The other five forms require a suitably typed element matching the target,
/// plus the state precondition of the form (an unchecked box for check, a
/// checked one for uncheck, the option on offer for select). Unrecognized
/// actions are `NotApplicable`.
#[must_use]
pub fn readiness_strict(
    action: &NavAction,
    page: &PageSnapshot,
    opts: &StrictOptions,
) -> StrictEvalResult {
    let Some(strict) = &action.strict_form else {
        return StrictEvalResult::not_applicable(format!(
            "'{}' is not one of the recognized action templates",
            action.raw_text
        ));
    };
    let form = action_form(strict);
    let mode = opts.match_mode;
    match strict {
        StrictAction::Open { url } => {
            StrictEvalResult::decided(true, form, format!("open '{url}' is always ready"))
        }
        StrictAction::Click { target } => {
            let hit = matching(page, target, mode)
                .find(|e| matches!(e.elem_type, ElemType::Link | ElemType::Button));
            match hit {
                Some(e) => StrictEvalResult::decided(
                    true,
                    form,
                    format!(
                        "{} '{}' matches click target '{target}'",
                        e.elem_type, e.description
                    ),
                ),
                None => StrictEvalResult::decided(
                    false,
                    form,
                    format!("no link or button matching '{target}' in page content"),
                ),
            }
        }
        StrictAction::Select { target, option } => {
            let lists: Vec<&UiElement> = matching(page, target, mode)
                .filter(|e| e.elem_type == ElemType::List)
                .collect();
            if lists.is_empty() {
                return StrictEvalResult::decided(
                    false,
                    form,
                    format!("no list matching '{target}' in page content"),
                );
            }
            let has_option = lists
                .iter()
                .any(|e| e.options.iter().any(|o| o.eq_ignore_ascii_case(option)));
            if has_option {
                StrictEvalResult::decided(
                    true,
                    form,
                    format!("list '{target}' offers option '{option}'"),
                )
            } else {
                StrictEvalResult::decided(
                    false,
                    form,
                    format!("list matching '{target}' has no option '{option}'"),
                )
            }
        }
        StrictAction::Check { target } => {
            let boxes: Vec<&UiElement> = matching(page, target, mode)
                .filter(|e| e.elem_type == ElemType::Checkbox)
                .collect();
            if boxes.is_empty() {
                StrictEvalResult::decided(
                    false,
                    form,
                    format!("no checkbox matching '{target}' in page content"),
                )
            } else if boxes.iter().any(|e| !e.checked) {
                StrictEvalResult::decided(
                    true,
                    form,
                    format!("checkbox matching '{target}' is unchecked"),
                )
            } else {
                StrictEvalResult::decided(
                    false,
                    form,
                    format!("checkbox matching '{target}' is already checked"),
                )
            }
        }
        StrictAction::Uncheck { target } => {
            let boxes: Vec<&UiElement> = matching(page, target, mode)
                .filter(|e| e.elem_type == ElemType::Checkbox)
                .collect();
            if boxes.is_empty() {
                StrictEvalResult::decided(
                    false,
                    form,
                    format!("no checkbox matching '{target}' in page content"),
                )
            } else if boxes.iter().any(|e| e.checked) {
                StrictEvalResult::decided(
                    true,
                    form,
                    format!("checkbox matching '{target}' is checked"),
                )
            } else {
                StrictEvalResult::decided(
                    false,
                    form,
                    format!("checkbox matching '{target}' is not checked"),
                )
            }
        }
        StrictAction::Fill { target, .. } => {
            let hit = matching(page, target, mode).find(|e| e.elem_type == ElemType::Input);
            match hit {
                Some(_) => StrictEvalResult::decided(
                    true,
                    form,
                    format!("input matching '{target}' in page content"),
                ),
                None => StrictEvalResult::decided(
                    false,
                    form,
                    format!("no input matching '{target}' in page content"),
                ),
            }
        }
    }
}

fn eval_strict_leaf(a: &StrictAssertion, page: &PageSnapshot, opts: &StrictOptions) -> bool {
    let mode = opts.match_mode;
    match a {
        StrictAssertion::IsPresent { target } => matching(page, target, mode).next().is_some(),
        StrictAssertion::IsNotPresent { target } => matching(page, target, mode).next().is_none(),
        StrictAssertion::IsChecked { target } => matching(page, target, mode).any(|e| e.checked),
        StrictAssertion::IsVisible { target } => matching(page, target, mode).any(|e| e.visible),
        StrictAssertion::IsPresentCount {
            target,
            count,
            comparison,
        } => {
            let n = matching(page, target, mode).count();
            match comparison.unwrap_or(opts.count_default) {
                CountComparison::Exactly => n == *count,
                CountComparison::AtLeast => n >= *count,
            }
        }
        StrictAssertion::TextContains { needle } => page.elements.iter().any(|e| {
            e.description
                .to_lowercase()
                .contains(&needle.to_lowercase())
        }),
    }
}

fn eval_expr(expr: &AssertionExpr, page: &PageSnapshot, opts: &StrictOptions) -> bool {
    match expr {
        // Callers have already ruled out unannotated leaves.
        AssertionExpr::Leaf(l) => l
            .strict_form
            .as_ref()
            .map(|s| eval_strict_leaf(s, page, opts))
            .unwrap_or(false),
        AssertionExpr::And { children } => children.iter().all(|c| eval_expr(c, page, opts)),
        AssertionExpr::Or { children } => children.iter().any(|c| eval_expr(c, page, opts)),
    }
}

/// Evaluates an assertion expression against a page, by formula.
///
/// The whole expression is strict only when every leaf is; one unrecognized
/// leaf makes the result `NotApplicable`, because a partial formula answer
/// for a boolean combination would be unsound.
#[must_use]
pub fn assert_strict(
    expr: &AssertionExpr,
    page: &PageSnapshot,
    opts: &StrictOptions,
) -> StrictEvalResult {
    let leaves = expr.leaves();
    if let Some(bad) = leaves.iter().find(|l| l.strict_form.is_none()) {
        return StrictEvalResult::not_applicable(format!(
            "leaf '{}' is not one of the recognized assertion templates",
            bad.raw_text
        ));
    }
    let value = eval_expr(expr, page, opts);
    let form = leaves
        .first()
        .and_then(|l| l.strict_form.as_ref())
        .map(assertion_form)
        .expect("expression has at least one leaf");
    let detail = leaves
        .iter()
        .map(|l| {
            let v = l
                .strict_form
                .as_ref()
                .map(|s| eval_strict_leaf(s, page, opts))
                .unwrap_or(false);
            format!("[{}]={}", l.raw_text, v)
        })
        .collect::<Vec<_>>()
        .join(" ");
    StrictEvalResult::decided(value, form, detail)
}

/// Which steps of a test case are strict, decided by parsing alone.
///
/// The consistency measures need exactly this: a strict navigation step has a
/// formula-backed readiness check, and a strict assertion never consults an
/// agent, regardless of how either evaluates at run time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrictnessProfile {
    /// One entry per navigation action: true when the action text parsed.
    pub nav: Vec<bool>,
    /// One entry per assertion: true when every leaf parsed.
    pub assertions: Vec<bool>,
}

impl StrictnessProfile {
    /// True when every step of the profile is strict.
    #[must_use]
    pub fn all_strict(&self) -> bool {
        self.nav.iter().all(|b| *b) && self.assertions.iter().all(|b| *b)
    }
}

#[must_use]
pub fn strictness_of(tc: &TestCase) -> StrictnessProfile {
    StrictnessProfile {
        nav: tc
            .nav_actions
            .iter()
            .map(|a| a.strict_form.is_some())
            .collect(),
        assertions: tc
            .assertions
            .iter()
            .map(|a| a.leaves().iter().all(|l| l.strict_form.is_some()))
            .collect(),
    }
}
