//! Deterministic simulated web application: page graph, session, faults.
//!
//! A model is a finite set of page snapshots plus a transition table keyed by
//! strict actions. State changes after an interaction are modeled as distinct
//! pages (copies of the page with different widget state), so any effective
//! action produces a structurally different snapshot. The model also carries
//! ground-truth rules for assertion texts the strict evaluator cannot parse.
//!
//! `spec_of` derives the reference transition system used for conformance
//! checking, and `mutate` builds faulty variants for detector tests.
//!
//! Model file format (line oriented, `#` comments):
//!
//! ```text
//! page <id> url=<url>
//! elem <id> type=<t> desc="<text>" [checked] [hidden] [options=a,b] [value="<v>"]
//! trans <from> <action text> -> <to>
//! oracle "<assertion text>" exists [type=<t>] [contains='<term>']
//! ```
//!
//! `elem` lines attach to the page declared most recently above them. The
//! first declared page is the initial one. Page and element ids are limited
//! to `[A-Za-z0-9_.-]` and the id `blank` is reserved for the empty start
//! state of a session.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::iolts::{Iolts, Label};
use crate::model::{ElemType, PageSnapshot, StrictAction, TestCase, UiElement};
use crate::strict::{parse_assertion_leaf, parse_nav_action};

/// Page id a session reports before any page is open. Never a model page id.
pub const BLANK_PAGE_ID: &str = "blank";

/// One row of the transition table: on `from`, performing `action` shows `to`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRule {
    pub from: String,
    pub action: StrictAction,
    pub to: String,
}

/// Ground truth for one assertion text that has no strict form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRule {
    /// Matched against step text case-insensitively after trimming.
    pub text: String,
    pub predicate: OraclePredicate,
}

/// Page predicates the ground-truth rules can express.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OraclePredicate {
    /// Some element of the type exists.
    ExistsType { elem_type: ElemType },
    /// Some element of the type has a description containing the term.
    ExistsTypeContaining { elem_type: ElemType, term: String },
    /// Some element has a description containing the term.
    ExistsContaining { term: String },
}

impl OraclePredicate {
    #[must_use]
    pub fn eval(&self, page: &PageSnapshot) -> bool {
        let contains =
            |e: &UiElement, term: &str| e.description.to_lowercase().contains(&term.to_lowercase());
        match self {
            OraclePredicate::ExistsType { elem_type } => {
                page.elements.iter().any(|e| e.elem_type == *elem_type)
            }
            OraclePredicate::ExistsTypeContaining { elem_type, term } => page
                .elements
                .iter()
                .any(|e| e.elem_type == *elem_type && contains(e, term)),
            OraclePredicate::ExistsContaining { term } => {
                page.elements.iter().any(|e| contains(e, term))
            }
        }
    }
}

/// A loaded application model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutModel {
    /// Pages in declaration order; the first one is only special in that
    /// URL lookup prefers earlier pages on a tie.
    pub pages: Vec<(String, PageSnapshot)>,
    pub transitions: Vec<TransitionRule>,
    pub oracle_rules: Vec<OracleRule>,
}

impl AutModel {
    #[must_use]
    pub fn page(&self, id: &str) -> Option<&PageSnapshot> {
        self.pages.iter().find(|(pid, _)| pid == id).map(|(_, p)| p)
    }

    /// First declared page with the URL, compared case-insensitively.
    #[must_use]
    pub fn page_by_url(&self, url: &str) -> Option<(&str, &PageSnapshot)> {
        self.pages
            .iter()
            .find(|(_, p)| p.url.eq_ignore_ascii_case(url))
            .map(|(id, p)| (id.as_str(), p))
    }

    /// Ground truth for an unparsed assertion text on a page, `None` when no
    /// rule covers the text.
    #[must_use]
    pub fn oracle_truth(&self, text: &str, page: &PageSnapshot) -> Option<bool> {
        let needle = text.trim();
        self.oracle_rules
            .iter()
            .find(|r| r.text.trim().eq_ignore_ascii_case(needle))
            .map(|r| r.predicate.eval(page))
    }

    /// Structural invariant violations, empty when the model is well-formed.
    #[must_use]
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.pages.is_empty() {
            v.push("model must declare at least one page".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for (id, page) in &self.pages {
            if !is_valid_id(id) {
                v.push(format!("page id '{id}' is not [A-Za-z0-9_.-]+"));
            }
            if id == BLANK_PAGE_ID {
                v.push(format!("page id '{BLANK_PAGE_ID}' is reserved"));
            }
            if !ids.insert(id.clone()) {
                v.push(format!("duplicate page id '{id}'"));
            }
            if page.url.trim().is_empty() {
                v.push(format!("page '{id}' has an empty url"));
            }
            v.extend(
                page.validate()
                    .into_iter()
                    .map(|m| format!("page '{id}': {m}")),
            );
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if self.page(&t.from).is_none() {
                v.push(format!("transition {i}: unknown source page '{}'", t.from));
            }
            if self.page(&t.to).is_none() {
                v.push(format!("transition {i}: unknown target page '{}'", t.to));
            }
            for other in &self.transitions[i + 1..] {
                if other.from == t.from && other.action.pattern_eq(&t.action) {
                    v.push(format!(
                        "transitions from '{}' on '{}' are ambiguous",
                        t.from, t.action
                    ));
                }
            }
            // An open row must land on the page its URL resolves to, or the
            // session and the derived reference system would disagree.
            if let StrictAction::Open { url } = &t.action {
                match self.page_by_url(url) {
                    Some((id, _)) if id == t.to => {}
                    Some((id, _)) => v.push(format!(
                        "transition {i}: open of '{url}' resolves to page '{id}', not '{}'",
                        t.to
                    )),
                    None => v.push(format!("transition {i}: open of '{url}' matches no page")),
                }
            }
        }
        for (i, r) in self.oracle_rules.iter().enumerate() {
            if self.oracle_rules[i + 1..]
                .iter()
                .any(|o| o.text.trim().eq_ignore_ascii_case(r.text.trim()))
            {
                v.push(format!("duplicate ground-truth rule for \"{}\"", r.text));
            }
        }
        v
    }

    /// Rows enabled in a session currently showing `current` (`None` while
    /// blank): every row of that page, plus open rows, which work anywhere.
    #[must_use]
    pub fn enabled_transitions(&self, current: Option<&str>) -> Vec<&TransitionRule> {
        self.transitions
            .iter()
            .filter(|t| {
                matches!(t.action, StrictAction::Open { .. }) || Some(t.from.as_str()) == current
            })
            .collect()
    }

    /// Assertion texts in the cases that neither the strict evaluator nor the
    /// ground-truth rules cover. Such texts would make oracle-backed agents
    /// unanswerable, so callers reject them up front.
    #[must_use]
    pub fn uncovered_assertions(&self, cases: &[TestCase]) -> Vec<String> {
        let mut missing = Vec::new();
        for tc in cases {
            for expr in &tc.assertions {
                for leaf in expr.leaves() {
                    let text = leaf.raw_text.trim();
                    let covered = parse_assertion_leaf(text).is_some()
                        || self
                            .oracle_rules
                            .iter()
                            .any(|r| r.text.trim().eq_ignore_ascii_case(text));
                    if !covered
                        && !missing
                            .iter()
                            .any(|m: &String| m.eq_ignore_ascii_case(text))
                    {
                        missing.push(text.to_string());
                    }
                }
            }
        }
        missing
    }
}

fn is_valid_id(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

/// Load error with the 1-based source line.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ModelError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError {
        line,
        message: message.into(),
    }
}

/// Splits an attribute tail into `(key, value)` pairs and bare flags
/// (`value = None`). Values may be bare tokens or quoted with `"` or `'`;
/// quoted values keep spaces.
fn attr_tokens(s: &str) -> Result<Vec<(String, Option<String>)>, String> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() || c == '=' {
                break;
            }
            key.push(c);
            chars.next();
        }
        if key.is_empty() {
            return Err(format!("stray '{c}' in attribute list"));
        }
        if chars.peek() == Some(&'=') {
            chars.next();
            let value = match chars.peek() {
                Some(&q) if q == '"' || q == '\'' => {
                    chars.next();
                    let mut v = String::new();
                    loop {
                        match chars.next() {
                            Some(c) if c == q => break,
                            Some(c) => v.push(c),
                            None => return Err(format!("unterminated quote in '{key}' value")),
                        }
                    }
                    v
                }
                _ => {
                    let mut v = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_whitespace() {
                            break;
                        }
                        v.push(c);
                        chars.next();
                    }
                    v
                }
            };
            out.push((key, Some(value)));
        } else {
            out.push((key, None));
        }
    }
    Ok(out)
}

/// Reads a leading quoted string, returning it and the rest of the line.
fn take_quoted(s: &str) -> Option<(String, &str)> {
    let rest = s.trim_start();
    let mut chars = rest.char_indices();
    match chars.next() {
        Some((_, '"')) => {}
        _ => return None,
    }
    for (i, c) in chars {
        if c == '"' {
            return Some((rest[1..i].to_string(), &rest[i + 1..]));
        }
    }
    None
}

/// Parses a model file. Structural invariants are checked both inline (for
/// precise line numbers) and via `AutModel::validate` as a backstop.
pub fn load_aut_model(text: &str) -> Result<AutModel, ModelError> {
    let mut model = AutModel {
        pages: Vec::new(),
        transitions: Vec::new(),
        oracle_rules: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match keyword {
            "page" => {
                let (id, tail) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .map(|(a, b)| (a, b.trim()))
                    .unwrap_or((rest.trim(), ""));
                if !is_valid_id(id) {
                    return Err(err(n, format!("invalid page id '{id}'")));
                }
                if id == BLANK_PAGE_ID {
                    return Err(err(n, format!("page id '{BLANK_PAGE_ID}' is reserved")));
                }
                if model.page(id).is_some() {
                    return Err(err(n, format!("duplicate page id '{id}'")));
                }
                let attrs = attr_tokens(tail).map_err(|m| err(n, m))?;
                let mut url = None;
                for (k, v) in attrs {
                    match (k.as_str(), v) {
                        ("url", Some(u)) => url = Some(u),
                        (other, _) => {
                            return Err(err(n, format!("unknown page attribute '{other}'")))
                        }
                    }
                }
                let url = url.ok_or_else(|| err(n, "page line needs url=<url>"))?;
                model.pages.push((id.to_string(), PageSnapshot::new(url)));
            }
            "elem" => {
                let (id, tail) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .map(|(a, b)| (a, b.trim()))
                    .unwrap_or((rest.trim(), ""));
                if !is_valid_id(id) {
                    return Err(err(n, format!("invalid element id '{id}'")));
                }
                let attrs = attr_tokens(tail).map_err(|m| err(n, m))?;
                let mut elem_type = None;
                let mut desc = None;
                let mut checked = false;
                let mut hidden = false;
                let mut options = Vec::new();
                let mut value = String::new();
                for (k, v) in attrs {
                    match (k.as_str(), v) {
                        ("type", Some(t)) => {
                            elem_type =
                                Some(ElemType::parse(&t).ok_or_else(|| {
                                    err(n, format!("unknown element type '{t}'"))
                                })?);
                        }
                        ("desc", Some(d)) => desc = Some(d),
                        ("checked", None) => checked = true,
                        ("hidden", None) => hidden = true,
                        ("options", Some(o)) => {
                            options = o.split(',').map(|s| s.trim().to_string()).collect();
                        }
                        ("value", Some(val)) => value = val,
                        (other, _) => {
                            return Err(err(n, format!("unknown element attribute '{other}'")))
                        }
                    }
                }
                let elem_type = elem_type.ok_or_else(|| err(n, "elem line needs type=<t>"))?;
                let desc = desc.ok_or_else(|| err(n, "elem line needs desc=\"<text>\""))?;
                let elem = UiElement {
                    id: id.to_string(),
                    description: desc,
                    elem_type,
                    checked,
                    visible: !hidden,
                    options,
                    value,
                };
                let problems = elem.validate();
                if let Some(p) = problems.first() {
                    return Err(err(n, p.clone()));
                }
                let page = model
                    .pages
                    .last_mut()
                    .ok_or_else(|| err(n, "elem line before any page"))?;
                if page.1.elements.iter().any(|e| e.id == id) {
                    return Err(err(n, format!("duplicate element id '{id}' on page")));
                }
                page.1.elements.push(elem);
            }
            "trans" => {
                let (from, tail) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err(n, "trans line needs <from> <action> -> <to>"))?;
                let (action_text, to) = tail
                    .rsplit_once(" -> ")
                    .map(|(a, b)| (a.trim(), b.trim()))
                    .ok_or_else(|| err(n, "trans line needs ' -> <to>'"))?;
                let action = parse_nav_action(action_text)
                    .ok_or_else(|| err(n, format!("action '{action_text}' matches no template")))?;
                if model
                    .transitions
                    .iter()
                    .any(|t| t.from == from && t.action.pattern_eq(&action))
                {
                    return Err(err(
                        n,
                        format!("ambiguous transition from '{from}' on '{action}'"),
                    ));
                }
                model.transitions.push(TransitionRule {
                    from: from.to_string(),
                    action,
                    to: to.to_string(),
                });
            }
            "oracle" => {
                let (text_arg, tail) = take_quoted(rest)
                    .ok_or_else(|| err(n, "oracle line needs a quoted assertion text"))?;
                let attrs = attr_tokens(tail).map_err(|m| err(n, m))?;
                let mut exists = false;
                let mut elem_type = None;
                let mut term = None;
                for (k, v) in attrs {
                    match (k.as_str(), v) {
                        ("exists", None) => exists = true,
                        ("type", Some(t)) => {
                            elem_type =
                                Some(ElemType::parse(&t).ok_or_else(|| {
                                    err(n, format!("unknown element type '{t}'"))
                                })?);
                        }
                        ("contains", Some(s)) => term = Some(s),
                        (other, _) => {
                            return Err(err(n, format!("unknown oracle attribute '{other}'")))
                        }
                    }
                }
                if !exists {
                    return Err(err(n, "oracle line needs the 'exists' predicate"));
                }
                let predicate = match (elem_type, term) {
                    (Some(t), Some(s)) => OraclePredicate::ExistsTypeContaining {
                        elem_type: t,
                        term: s,
                    },
                    (Some(t), None) => OraclePredicate::ExistsType { elem_type: t },
                    (None, Some(s)) => OraclePredicate::ExistsContaining { term: s },
                    (None, None) => return Err(err(n, "oracle 'exists' needs type= or contains=")),
                };
                if model
                    .oracle_rules
                    .iter()
                    .any(|r| r.text.trim().eq_ignore_ascii_case(text_arg.trim()))
                {
                    return Err(err(
                        n,
                        format!("duplicate ground-truth rule for \"{text_arg}\""),
                    ));
                }
                model.oracle_rules.push(OracleRule {
                    text: text_arg,
                    predicate,
                });
            }
            other => return Err(err(n, format!("unknown directive '{other}'"))),
        }
    }
    let problems = model.validate();
    if let Some(p) = problems.first() {
        return Err(err(0, p.clone()));
    }
    Ok(model)
}

/// One entry of a session's interaction log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryEntry {
    pub action: String,
    /// Page shown after the action, `None` while still blank.
    pub page: Option<String>,
}

/// A browsing session over a model. Starts blank: no page loaded, the first
/// effective action is normally an open.
#[derive(Debug, Clone)]
pub struct SimSession<'a> {
    model: &'a AutModel,
    current: Option<String>,
    history: Vec<HistoryEntry>,
}

impl<'a> SimSession<'a> {
    #[must_use]
    pub fn new(model: &'a AutModel) -> Self {
        SimSession {
            model,
            current: None,
            history: Vec::new(),
        }
    }

    #[must_use]
    pub fn model(&self) -> &'a AutModel {
        self.model
    }

    /// Current page id, `None` while blank.
    #[must_use]
    pub fn current_page(&self) -> Option<&str> {
        self.current.as_deref()
    }

    /// Current page id for labeling, `blank` while no page is open.
    #[must_use]
    pub fn page_label(&self) -> &str {
        self.current.as_deref().unwrap_or(BLANK_PAGE_ID)
    }

    /// Structural snapshot of what the session shows right now.
    #[must_use]
    pub fn snapshot(&self) -> PageSnapshot {
        match &self.current {
            // Current page always exists: transitions were validated at load.
            Some(id) => self
                .model
                .page(id)
                .expect("session on a known page")
                .clone(),
            None => PageSnapshot::blank(),
        }
    }

    #[must_use]
    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Rows enabled right now; open rows are enabled from anywhere.
    #[must_use]
    pub fn enabled_transitions(&self) -> Vec<&'a TransitionRule> {
        self.model.enabled_transitions(self.current.as_deref())
    }

    /// Performs a strict action. Opens jump by URL lookup; anything else
    /// follows the transition table from the current page. An action with no
    /// matching row changes nothing, like clicking where nothing reacts.
    /// Returns the page id shown afterwards.
    pub fn apply_action(&mut self, action: &StrictAction) -> Option<&str> {
        let target = match action {
            StrictAction::Open { url } => self.model.page_by_url(url).map(|(id, _)| id),
            _ => self
                .current
                .as_deref()
                .and_then(|cur| {
                    self.model
                        .transitions
                        .iter()
                        .find(|t| t.from == cur && t.action.pattern_eq(action))
                })
                .map(|t| t.to.as_str()),
        };
        if let Some(id) = target {
            self.current = Some(id.to_string());
        }
        self.history.push(HistoryEntry {
            action: action.to_string(),
            page: self.current.clone(),
        });
        self.current.as_deref()
    }

    /// Follows one specific table row, for fault injection that picks a wrong
    /// transition on purpose. The row must be enabled.
    pub fn apply_transition(&mut self, rule: &TransitionRule) {
        debug_assert!(
            matches!(rule.action, StrictAction::Open { .. })
                || Some(rule.from.as_str()) == self.current.as_deref(),
            "transition must be enabled"
        );
        self.current = Some(rule.to.clone());
        self.history.push(HistoryEntry {
            action: rule.action.to_string(),
            page: self.current.clone(),
        });
    }

    /// Back to the blank start state.
    pub fn reset(&mut self) {
        self.current = None;
        self.history.clear();
    }
}

/// Derives the reference transition system of a model.
///
/// Every page becomes a state. Each table row `p --a--> p'` becomes
/// `p --?a--> m --!p'--> p'` with a fresh mid state, so offering the action
/// and observing the resulting page are separate steps. Open rows work from
/// anywhere in a session but a reference system needs one start, so they are
/// hoisted onto a fresh pre-initial entry state; the initial state is that
/// entry state when any open row exists, else the first declared page.
///
/// Fresh state names contain `#`, which page ids cannot, so they never
/// collide. The result is deterministic by the model's ambiguity invariant.
#[must_use]
pub fn spec_of(model: &AutModel) -> Iolts {
    let has_open = model
        .transitions
        .iter()
        .any(|t| matches!(t.action, StrictAction::Open { .. }));
    let initial = if has_open {
        "#entry".to_string()
    } else {
        model
            .pages
            .first()
            .map(|(id, _)| id.clone())
            .unwrap_or_else(|| "#entry".into())
    };
    let mut iolts = Iolts::new(initial);
    for (id, _) in &model.pages {
        iolts.states.insert(id.clone());
    }
    let mut entry_edges: Vec<(String, String)> = Vec::new();
    for (i, t) in model.transitions.iter().enumerate() {
        let mid = format!("#via{i}");
        let label = t.action.to_string();
        if let StrictAction::Open { .. } = t.action {
            // Open rows collapse onto the entry state; identical hoisted
            // edges (same url opened from several pages) merge.
            if entry_edges.iter().any(|(l, to)| *l == label && *to == t.to) {
                continue;
            }
            entry_edges.push((label.clone(), t.to.clone()));
            iolts.add_transition("#entry", Label::input(label), mid.clone());
        } else {
            iolts.add_transition(t.from.clone(), Label::input(label), mid.clone());
        }
        iolts.add_transition(mid, Label::output(t.to.clone()), t.to.clone());
    }
    iolts
}

/// A single seeded fault applied to a copy of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mutation {
    /// Deletes a widget from a page.
    RemoveElement { page: String, element: String },
    /// Flips or rewrites widget state in place.
    AlterElementState {
        page: String,
        element: String,
        change: StateChange,
    },
    /// Points a table row at a different page.
    RedirectTransition { index: usize, new_to: String },
    /// Deletes a table row.
    DropTransition { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateChange {
    SetChecked(bool),
    SetVisible(bool),
    SetValue(String),
    SetDescription(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutationError {
    #[error("unknown target: {0}")]
    UnknownTarget(String),
    #[error("transition index {0} out of range")]
    BadIndex(usize),
    #[error("open transitions are bound to their target's url; redirect something else")]
    RedirectOpen,
    #[error("mutation breaks a model invariant: {0}")]
    InvariantViolation(String),
}

/// Applies one fault to a copy, leaving the original untouched. The result
/// is revalidated so a mutant can never violate the model invariants.
pub fn mutate(model: &AutModel, mutation: &Mutation) -> Result<AutModel, MutationError> {
    let mut m = model.clone();
    match mutation {
        Mutation::RemoveElement { page, element } => {
            let p = m
                .pages
                .iter_mut()
                .find(|(id, _)| id == page)
                .ok_or_else(|| MutationError::UnknownTarget(format!("page '{page}'")))?;
            let before = p.1.elements.len();
            p.1.elements.retain(|e| e.id != *element);
            if p.1.elements.len() == before {
                return Err(MutationError::UnknownTarget(format!(
                    "element '{element}' on page '{page}'"
                )));
            }
        }
        Mutation::AlterElementState {
            page,
            element,
            change,
        } => {
            let p = m
                .pages
                .iter_mut()
                .find(|(id, _)| id == page)
                .ok_or_else(|| MutationError::UnknownTarget(format!("page '{page}'")))?;
            let e = p
                .1
                .elements
                .iter_mut()
                .find(|e| e.id == *element)
                .ok_or_else(|| {
                    MutationError::UnknownTarget(format!("element '{element}' on page '{page}'"))
                })?;
            match change {
                StateChange::SetChecked(b) => e.checked = *b,
                StateChange::SetVisible(b) => e.visible = *b,
                StateChange::SetValue(v) => e.value = v.clone(),
                StateChange::SetDescription(d) => e.description = d.clone(),
            }
        }
        Mutation::RedirectTransition { index, new_to } => {
            let t = m
                .transitions
                .get_mut(*index)
                .ok_or(MutationError::BadIndex(*index))?;
            if matches!(t.action, StrictAction::Open { .. }) {
                return Err(MutationError::RedirectOpen);
            }
            if model.page(new_to).is_none() {
                return Err(MutationError::UnknownTarget(format!("page '{new_to}'")));
            }
            t.to = new_to.clone();
        }
        Mutation::DropTransition { index } => {
            if *index >= m.transitions.len() {
                return Err(MutationError::BadIndex(*index));
            }
            m.transitions.remove(*index);
        }
    }
    let problems = m.validate();
    if let Some(p) = problems.first() {
        return Err(MutationError::InvariantViolation(p.clone()));
    }
    Ok(m)
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::RemoveElement { page, element } => {
                write!(f, "remove element '{element}' from '{page}'")
            }
            Mutation::AlterElementState {
                page,
                element,
                change,
            } => {
                write!(f, "alter '{element}' on '{page}': {change:?}")
            }
            Mutation::RedirectTransition { index, new_to } => {
                write!(f, "redirect transition {index} to '{new_to}'")
            }
            Mutation::DropTransition { index } => write!(f, "drop transition {index}"),
        }
    }
}
