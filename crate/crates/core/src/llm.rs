//! Agent backed by a chat-completion HTTP endpoint.
//!
//! Each role (navigation, readiness, assertion) sends a fixed system prompt
//! plus a user message carrying the step text and the page content as an
//! element list, one `{id, description, type}` line per element. The
//! endpoint speaks the common chat-completions shape: POST of
//! `{model, messages, temperature}`, answer under
//! `choices[0].message.content`.
//!
//! The content must be exactly the role's JSON template:
//!
//! ```text
//! navigation  { "facts": [...], "task_accomplished": "Success|Failed|Unknown" }
//! readiness   { "facts": [...], "result": true|false }
//! assertion   { "facts": [...], "Verdict": true|false }
//! ```
//!
//! Anything else, a transport failure or a timeout becomes an agent error,
//! which the executor treats as an inconclusive halt, never as an answer.
//!
//! A navigation answer only reports; to realize the effect on the simulated
//! session, the instruction's strict form is applied locally when the
//! endpoint claims success. Free-text instructions have no local
//! realization, so a claimed success without an effect is caught by the
//! page-change guardrail downstream.

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentError, BoolReport, NavReport, NavStatus};
use crate::model::{AssertionExpr, NavAction, PageSnapshot};
use crate::sim::SimSession;

/// System prompt of the navigation role.
pub const NAV_PROMPT: &str = r#"You are an autonomous agent whose role is to perform
interactions on Web pages with a web browser.

# ROLE AND OBJECTIVE
You will be given an instruction that describes an
interaction to be performed on the web page. Your task
is to execute the corresponding interaction on the page.

# PROCESS
1. Identify the element in the instruction
2. Find the exact corresponding element in the page.
3. Use a function to interact with the page
4. Generate a set of facts that are contained in the output

# Common functions:
click, fill, type, press, or any other playwright locator
method

# OUTPUT FORMAT
You must respond with valid JSON strictly using the
following format:
{ "facts": ["fact 1", "fact 2", "..."], "task_accomplished": "Success|Failed|Unknown" }"#;

/// System prompt of the readiness role.
pub const READINESS_PROMPT: &str = r#"You are an evaluation agent tasked with
determining whether an action can be performed
on a Web page.

#ROLE AND OBJECTIVE
You will be given a page content and an action.
Your task is to check if an action can be
performed on the page.
The page content is a list of elements
formatted as {id, description, type'}
Read the descriptions and the types of the
elements carefully
Respond 'True' if the action can be performed
on the page and 'False' otherwise.
Let think step by step and return the final
response.

# PROCESS
1. Identify all the elements related to the
action (link, statictext, etc.) in the given
page content
2. Extract the descriptions and types of the
elements
3. Check if the interaction given in the
action is possible
3. Conclude if the action can be performed

#OUTPUT FORMAT
You must respond with valid JSON strictly
using the following format:
{ "facts": ["fact 1", "fact 2", "..."], "result": true|false }"#;

/// System prompt of the assertion role.
pub const ASSERT_PROMPT: &str = r#"You are an evaluation agent tasked to evaluate
an Assertion of a test case.

#ROLE AND OBJECTIVE
You will be given a page content and an
assertion.
Your task is to evaluate the assertion on the
page content.
The page content is a list of elements
formatted as {id, description, type'}
Read the descriptions and the types of the
elements carefully
Respond 'True' if the Assertion is True and
'False' otherwise
Let think step by step and return the final
response.

# PROCESS
1. Identify all the elements related to the
assertion (link, statictext, etc.) in the
given page content
2. Extract the descriptions and types of the
elements
2. Check if some elements meet the assertion
3. Conclude on the result of the assertion
based on your observations

#OUTPUT FORMAT
You must respond with valid JSON strictly
using the following format:
{ "facts": ["fact 1", "fact 2", "..."], "Verdict": true|false }"#;

/// Connection settings for the endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmConfig {
    /// Full URL of the chat-completion route.
    pub endpoint: String,
    /// Model name sent with every request.
    pub model: String,
    /// Per-request timeout.
    pub timeout_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "default".into(),
            timeout_ms: 30_000,
        }
    }
}

/// One element line of the page serialization.
fn element_line(e: &crate::model::UiElement) -> String {
    format!("{{{}, {}, {}}}", e.id, e.description, e.elem_type)
}

/// Page content as the element list the prompts describe.
#[must_use]
pub fn serialize_page(page: &PageSnapshot) -> String {
    page.elements
        .iter()
        .map(element_line)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

/// Pulls `facts` out of a parsed template object; every entry must be a
/// string.
fn parse_facts(v: &serde_json::Value) -> Result<Vec<String>, AgentError> {
    let arr = v
        .get("facts")
        .and_then(|f| f.as_array())
        .ok_or_else(|| AgentError::Malformed(format!("missing \"facts\" array in: {v}")))?;
    arr.iter()
        .map(|f| {
            f.as_str()
                .map(str::to_string)
                .ok_or_else(|| AgentError::Malformed(format!("non-string fact in: {v}")))
        })
        .collect()
}

fn parse_template(content: &str) -> Result<serde_json::Value, AgentError> {
    serde_json::from_str::<serde_json::Value>(content.trim())
        .map_err(|_| AgentError::Malformed(format!("not the JSON template: {content}")))
}

/// Parses the navigation template into a report.
pub fn parse_nav_content(content: &str) -> Result<NavReport, AgentError> {
    let v = parse_template(content)?;
    let facts = parse_facts(&v)?;
    let status = v
        .get("task_accomplished")
        .and_then(|s| s.as_str())
        .and_then(NavStatus::parse)
        .ok_or_else(|| AgentError::Malformed(format!("bad \"task_accomplished\" in: {content}")))?;
    Ok(NavReport { status, facts })
}

/// Parses a boolean template (`result` for readiness, `Verdict` for
/// assertions) into a report.
pub fn parse_bool_content(content: &str, key: &str) -> Result<BoolReport, AgentError> {
    let v = parse_template(content)?;
    let facts = parse_facts(&v)?;
    let value = v
        .get(key)
        .and_then(|b| b.as_bool())
        .ok_or_else(|| AgentError::Malformed(format!("bad \"{key}\" in: {content}")))?;
    Ok(BoolReport { value, facts })
}

/// Agent that forwards every role to the configured endpoint.
#[derive(Debug)]
pub struct LlmAgent {
    cfg: LlmConfig,
    client: reqwest::blocking::Client,
}

impl LlmAgent {
    /// Builds the agent; fails only on an unusable client configuration.
    pub fn new(cfg: LlmConfig) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(LlmAgent { cfg, client })
    }

    /// One round trip: system prompt + user message, template content back.
    fn ask(&self, system: &str, user: &str) -> Result<String, AgentError> {
        let request = ChatRequest {
            model: &self.cfg.model,
            messages: [
                ChatMessage {
                    role: "system",
                    content: system,
                },
                ChatMessage {
                    role: "user",
                    content: user,
                },
            ],
            temperature: 0.0,
        };
        let response = self
            .client
            .post(&self.cfg.endpoint)
            .json(&request)
            .send()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(AgentError::Transport(format!("endpoint answered {status}")));
        }
        let body: ChatResponse = response
            .json()
            .map_err(|e| AgentError::Malformed(format!("bad response body: {e}")))?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AgentError::Malformed("response carries no choices".into()))
    }
}

impl Agent for LlmAgent {
    fn perform_nav(
        &mut self,
        session: &mut SimSession<'_>,
        step: &NavAction,
    ) -> Result<NavReport, AgentError> {
        let user = format!(
            "Instruction: {}\nPage content:\n{}",
            step.raw_text.trim(),
            serialize_page(&session.snapshot())
        );
        let content = self.ask(NAV_PROMPT, &user)?;
        let report = parse_nav_content(&content)?;
        if report.status == NavStatus::Success {
            let strict = step
                .strict_form
                .clone()
                .or_else(|| crate::strict::parse_nav_action(step.raw_text.trim()));
            if let Some(action) = strict {
                session.apply_action(&action);
            }
        }
        Ok(report)
    }

    fn check_readiness(
        &mut self,
        session: &SimSession<'_>,
        upcoming: &NavAction,
    ) -> Result<BoolReport, AgentError> {
        let user = format!(
            "Action: {}\nPage content:\n{}",
            upcoming.raw_text.trim(),
            serialize_page(&session.snapshot())
        );
        let content = self.ask(READINESS_PROMPT, &user)?;
        parse_bool_content(&content, "result")
    }

    fn check_assertion(
        &mut self,
        session: &SimSession<'_>,
        expr: &AssertionExpr,
    ) -> Result<BoolReport, AgentError> {
        let user = format!(
            "Assertion: {}\nPage content:\n{}",
            expr,
            serialize_page(&session.snapshot())
        );
        let content = self.ask(ASSERT_PROMPT, &user)?;
        parse_bool_content(&content, "Verdict")
    }
}
