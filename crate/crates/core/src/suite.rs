//! Suite file format: parsing and serialization.
//!
//! A suite file is line oriented:
//!
//! ```text
//! # test news_links
//! action: Open the website 'https://www.uca.fr/en'
//! action: Click on 'European University'
//! assert: the page has links
//! assert: 'ARTEMIS' is present AND the page has links | expect=true
//! ```
//!
//! `# test <id>` starts a case, any other `#` line is a comment,
//! `action:` adds one navigation step and `assert:` one assertion. Within an assertion, ` AND ` and ` OR ` build a
//! composite; AND binds tighter than OR and there are no parentheses. Any
//! step line may end with ` | expect=true` or ` | expect=false`; within one
//! case it is all steps or none. A suite that only exercises navigation can
//! declare `option: navigation-only` before its first case, which lifts the
//! requirement that every case ends in at least one assertion.

use serde::Serialize;
use thiserror::Error;

use crate::model::{validate_test_case, AssertionExpr, NavAction, TestCase, TestSuite};
use crate::strict::{annotate_assertion_leaf, annotate_nav};

/// Parse failure, pointing at the offending line.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("line {line}: {message}")]
pub struct SuiteParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> SuiteParseError {
    SuiteParseError {
        line,
        message: message.into(),
    }
}

struct CaseBuilder {
    id: String,
    header_line: usize,
    nav: Vec<NavAction>,
    asserts: Vec<AssertionExpr>,
    expects: Vec<Option<bool>>,
    seen_assert: bool,
}

impl CaseBuilder {
    fn finish(self, navigation_only: bool) -> Result<TestCase, SuiteParseError> {
        if self.nav.is_empty() {
            return Err(err(
                self.header_line,
                format!("test '{}' has no navigation actions", self.id),
            ));
        }
        if self.asserts.is_empty() && !navigation_only {
            return Err(err(
                self.header_line,
                format!(
                    "test '{}' has no assertions (declare 'option: navigation-only' to allow this)",
                    self.id
                ),
            ));
        }
        let annotated = self.expects.iter().filter(|e| e.is_some()).count();
        let expectations = if annotated == 0 {
            None
        } else if annotated == self.expects.len() {
            Some(self.expects.iter().map(|e| e.unwrap()).collect())
        } else {
            return Err(err(
                self.header_line,
                format!(
                    "test '{}' mixes annotated and unannotated steps; expect= must cover all steps or none",
                    self.id
                ),
            ));
        };
        Ok(TestCase {
            id: self.id,
            nav_actions: self.nav,
            assertions: self.asserts,
            expectations,
        })
    }
}

/// Splits a trailing ` | expect=...` annotation off a step line.
fn split_expect(text: &str, line: usize) -> Result<(&str, Option<bool>), SuiteParseError> {
    match text.rfind(" | expect=") {
        None => Ok((text.trim(), None)),
        Some(at) => {
            let value = &text[at + " | expect=".len()..];
            let expect = match value.trim() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(err(
                        line,
                        format!("expect= must be true or false, got '{other}'"),
                    ))
                }
            };
            Ok((text[..at].trim(), Some(expect)))
        }
    }
}

/// Parses assertion text into its OR-of-ANDs tree. AND binds tighter.
fn parse_assertion_expr(text: &str, line: usize) -> Result<AssertionExpr, SuiteParseError> {
    let mut or_parts = Vec::new();
    for or_part in text.split(" OR ") {
        let mut and_parts = Vec::new();
        for leaf_text in or_part.split(" AND ") {
            let leaf_text = leaf_text.trim();
            if leaf_text.is_empty() {
                return Err(err(line, "empty assertion operand"));
            }
            and_parts.push(AssertionExpr::Leaf(annotate_assertion_leaf(leaf_text)));
        }
        or_parts.push(match and_parts.len() {
            1 => and_parts.pop().unwrap(),
            _ => AssertionExpr::And {
                children: and_parts,
            },
        });
    }
    Ok(match or_parts.len() {
        1 => or_parts.pop().unwrap(),
        _ => AssertionExpr::Or { children: or_parts },
    })
}

/// Parses a whole suite document.
///
/// The grammar is total: any document made of the line forms above parses.
/// Structural violations (a case without navigation, an `action:` after an
/// `assert:`, steps outside any case) are reported with their line number.
pub fn parse_test_suite(text: &str) -> Result<TestSuite, SuiteParseError> {
    let mut suite = TestSuite {
        cases: Vec::new(),
        navigation_only: false,
    };
    let mut current: Option<CaseBuilder> = None;
    let mut seen_ids = std::collections::BTreeSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# test ") {
            if let Some(done) = current.take() {
                suite.cases.push(done.finish(suite.navigation_only)?);
            }
            let id = rest.trim().to_string();
            if id.is_empty() {
                return Err(err(line_no, "test id must be non-empty"));
            }
            if !seen_ids.insert(id.clone()) {
                return Err(err(line_no, format!("duplicate test id '{id}'")));
            }
            current = Some(CaseBuilder {
                id,
                header_line: line_no,
                nav: Vec::new(),
                asserts: Vec::new(),
                expects: Vec::new(),
                seen_assert: false,
            });
        } else if line.starts_with('#') {
            // Comment; a mistyped `# test` header surfaces on the next
            // step line as "outside any test".
            continue;
        } else if let Some(rest) = line.strip_prefix("option:") {
            if current.is_some() || !suite.cases.is_empty() {
                return Err(err(line_no, "option: lines must precede the first test"));
            }
            match rest.trim() {
                "navigation-only" => suite.navigation_only = true,
                other => return Err(err(line_no, format!("unknown suite option '{other}'"))),
            }
        } else if let Some(rest) = line.strip_prefix("action:") {
            let case = current
                .as_mut()
                .ok_or_else(|| err(line_no, "action: line outside any test"))?;
            if case.seen_assert {
                return Err(err(
                    line_no,
                    "navigation action after an assertion; all actions must precede all assertions",
                ));
            }
            let (step_text, expect) = split_expect(rest, line_no)?;
            if step_text.is_empty() {
                return Err(err(line_no, "action text must be non-empty"));
            }
            case.nav.push(annotate_nav(step_text));
            case.expects.push(expect);
        } else if let Some(rest) = line.strip_prefix("assert:") {
            let case = current
                .as_mut()
                .ok_or_else(|| err(line_no, "assert: line outside any test"))?;
            if case.nav.is_empty() {
                return Err(err(
                    line_no,
                    "assertion before any navigation action in this test",
                ));
            }
            case.seen_assert = true;
            let (step_text, expect) = split_expect(rest, line_no)?;
            if step_text.is_empty() {
                return Err(err(line_no, "assertion text must be non-empty"));
            }
            case.asserts.push(parse_assertion_expr(step_text, line_no)?);
            case.expects.push(expect);
        } else {
            return Err(err(line_no, format!("unrecognized line '{line}'")));
        }
    }
    if let Some(done) = current.take() {
        suite.cases.push(done.finish(suite.navigation_only)?);
    }
    for case in &suite.cases {
        // The builder enforces everything validate checks, so a violation here
        // is a parser bug; surface it instead of shipping a bad suite.
        let violations = validate_test_case(case, suite.navigation_only);
        if let Some(v) = violations.first() {
            return Err(err(0, format!("test '{}': {v}", case.id)));
        }
    }
    Ok(suite)
}

/// Serialization failure: the suite holds content the file grammar cannot
/// express (separator words inside a leaf, a nested non-flat expression).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct SuiteWriteError(pub String);

const FORBIDDEN_IN_STEP: [&str; 3] = [" AND ", " OR ", " | expect="];

fn writable_leaf(text: &str) -> Result<(), SuiteWriteError> {
    if text.contains('\n') {
        return Err(SuiteWriteError(format!(
            "step text '{text}' contains a newline"
        )));
    }
    for sep in FORBIDDEN_IN_STEP {
        if text.contains(sep) {
            return Err(SuiteWriteError(format!(
                "step text '{text}' contains reserved '{sep}'"
            )));
        }
    }
    Ok(())
}

fn render_expr(expr: &AssertionExpr) -> Result<String, SuiteWriteError> {
    fn render_and_operand(e: &AssertionExpr) -> Result<String, SuiteWriteError> {
        match e {
            AssertionExpr::Leaf(l) => {
                writable_leaf(&l.raw_text)?;
                Ok(l.raw_text.clone())
            }
            _ => Err(SuiteWriteError(
                "assertion tree is not in OR-of-ANDs normal form".into(),
            )),
        }
    }
    fn render_or_operand(e: &AssertionExpr) -> Result<String, SuiteWriteError> {
        match e {
            AssertionExpr::And { children } => {
                let parts: Result<Vec<_>, _> = children.iter().map(render_and_operand).collect();
                Ok(parts?.join(" AND "))
            }
            other => render_and_operand(other),
        }
    }
    match expr {
        AssertionExpr::Or { children } => {
            let parts: Result<Vec<_>, _> = children.iter().map(render_or_operand).collect();
            Ok(parts?.join(" OR "))
        }
        other => render_or_operand(other),
    }
}

/// Writes a suite back into the file format. Parsing the output yields a
/// structurally equal suite.
pub fn serialize_test_suite(suite: &TestSuite) -> Result<String, SuiteWriteError> {
    let mut out = String::new();
    if suite.navigation_only {
        out.push_str("option: navigation-only\n\n");
    }
    for (ci, case) in suite.cases.iter().enumerate() {
        if ci > 0 {
            out.push('\n');
        }
        out.push_str(&format!("# test {}\n", case.id));
        let expect_of = |step: usize| -> String {
            match &case.expectations {
                Some(e) => format!(" | expect={}", e[step]),
                None => String::new(),
            }
        };
        for (i, nav) in case.nav_actions.iter().enumerate() {
            writable_leaf(&nav.raw_text)?;
            out.push_str(&format!("action: {}{}\n", nav.raw_text, expect_of(i)));
        }
        for (j, assertion) in case.assertions.iter().enumerate() {
            let text = render_expr(assertion)?;
            out.push_str(&format!(
                "assert: {}{}\n",
                text,
                expect_of(case.nav_actions.len() + j)
            ));
        }
    }
    Ok(out)
}
