//! Wire-level tests of the endpoint-backed agent against a real local HTTP
//! server speaking the chat-completions shape.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver};
use std::thread::JoinHandle;

use nltest_core::executor::{execute, ExecOptions};
use nltest_core::llm::{LlmAgent, LlmConfig, ASSERT_PROMPT, NAV_PROMPT, READINESS_PROMPT};
use nltest_core::model::Verdict;
use nltest_core::sim::load_aut_model;
use nltest_core::suite::parse_test_suite;

// The 'Archive' row has no backing element, so its readiness formula is
// false and the executor must fall back to the wire. The assertion has no
// strict form, so it goes to the wire too.
const MODEL: &str = r#"
page home url=u://home
elem nav1 type=link desc="European University"
elem title type=statictext desc="Start here"
page eu url=u://eu
elem blurb type=statictext desc="ARTEMIS alliance overview"
trans home Open the website 'u://home' -> home
trans home Click on 'Archive' -> eu
"#;

const SUITE: &str = "\
# test eu
action: Open the website 'u://home'
action: Click on 'Archive'
assert: the alliance overview is shown
";

/// Serves exactly `contents.len()` chat requests, answering the i-th with
/// a completion whose message content is `contents[i]`, then stops.
/// Captured raw request bodies arrive on the returned channel.
struct MockEndpoint {
    url: String,
    bodies: Receiver<String>,
    handle: Option<JoinHandle<()>>,
}

impl MockEndpoint {
    fn serve(contents: Vec<String>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock endpoint");
        let url = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let (tx, rx) = channel();
        let handle = std::thread::spawn(move || {
            let total = contents.len();
            let mut served = 0;
            while served < total {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                while served < total {
                    let Some(body) = read_request(&mut stream) else {
                        break;
                    };
                    let _ = tx.send(body);
                    let content = &contents[served];
                    served += 1;
                    let payload = serde_json::json!({
                        "choices": [{"message": {"role": "assistant", "content": content}}]
                    })
                    .to_string();
                    let response = format!(
                        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\n\
                         Content-Length: {}\r\n\r\n{}",
                        payload.len(),
                        payload
                    );
                    if stream.write_all(response.as_bytes()).is_err() {
                        break;
                    }
                }
            }
        });
        MockEndpoint {
            url,
            bodies: rx,
            handle: Some(handle),
        }
    }

    fn config(&self) -> LlmConfig {
        LlmConfig {
            endpoint: self.url.clone(),
            model: "mock-model".into(),
            timeout_ms: 5_000,
        }
    }

    fn next_body(&self) -> serde_json::Value {
        let raw = self
            .bodies
            .recv_timeout(std::time::Duration::from_secs(5))
            .expect("mock endpoint captured a request");
        serde_json::from_str(&raw).expect("request body is JSON")
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Reads one HTTP request off the stream and returns its body, or `None`
/// once the peer is done.
fn read_request(stream: &mut TcpStream) -> Option<String> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        if let Some(at) = find_double_crlf(&buf) {
            break at;
        }
        match stream.read(&mut chunk) {
            Ok(0) => return None,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(_) => return None,
        }
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_lowercase();
    let length: usize = headers
        .lines()
        .find_map(|l| l.strip_prefix("content-length:"))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0);
    let mut body = buf.split_off(header_end + 4);
    while body.len() < length {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => body.extend_from_slice(&chunk[..n]),
            Err(_) => return None,
        }
    }
    Some(String::from_utf8_lossy(&body).into_owned())
}

fn find_double_crlf(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn nav_ok() -> String {
    r#"{"facts":["did it"],"task_accomplished":"Success"}"#.into()
}

fn ready_ok() -> String {
    r#"{"facts":["element seen"],"result":true}"#.into()
}

fn verdict(v: bool) -> String {
    format!(r#"{{"facts":["looked at the page"],"Verdict":{v}}}"#)
}

fn fixture() -> (nltest_core::sim::AutModel, nltest_core::TestCase) {
    let model = load_aut_model(MODEL).unwrap();
    let suite = parse_test_suite(SUITE).unwrap();
    (model, suite.cases.into_iter().next().unwrap())
}

#[test]
fn full_case_passes_over_the_wire() {
    let (model, tc) = fixture();
    // Two navigations, one readiness gap between them, one assertion.
    let mock = MockEndpoint::serve(vec![nav_ok(), ready_ok(), nav_ok(), verdict(true)]);
    let mut agent = LlmAgent::new(mock.config()).unwrap();
    let result = execute(&model, &tc, &mut agent, &ExecOptions::default());
    assert_eq!(result.verdict, Verdict::Pass);

    // First request: navigation role, system prompt verbatim, model echoed.
    let first = mock.next_body();
    assert_eq!(first["model"], "mock-model");
    assert_eq!(first["temperature"], 0.0);
    assert_eq!(first["messages"][0]["role"], "system");
    assert_eq!(first["messages"][0]["content"], NAV_PROMPT);
    let user = first["messages"][1]["content"].as_str().unwrap();
    assert!(user.contains("Open the website 'u://home'"));

    // Second request: readiness role with the serialized element list.
    let second = mock.next_body();
    assert_eq!(second["messages"][0]["content"], READINESS_PROMPT);
    let user = second["messages"][1]["content"].as_str().unwrap();
    assert!(user.contains("Click on 'Archive'"));
    assert!(user.contains("{nav1, European University, link}"));
    assert!(user.contains("{title, Start here, statictext}"));

    // Fourth request: assertion role sees the destination page.
    let _third = mock.next_body();
    let fourth = mock.next_body();
    assert_eq!(fourth["messages"][0]["content"], ASSERT_PROMPT);
    let user = fourth["messages"][1]["content"].as_str().unwrap();
    assert!(user.contains("the alliance overview is shown"));
    assert!(user.contains("{blurb, ARTEMIS alliance overview, statictext}"));
}

#[test]
fn prose_content_is_an_inconclusive_halt() {
    let (model, tc) = fixture();
    let mock = MockEndpoint::serve(vec!["I clicked the link, all good!".into()]);
    let mut agent = LlmAgent::new(mock.config()).unwrap();
    let result = execute(&model, &tc, &mut agent, &ExecOptions::default());
    assert_eq!(result.verdict, Verdict::Inc);
    let nav = &result.steps[0];
    let err = nav.error.as_ref().expect("off-template answer recorded");
    assert!(
        err.contains("I clicked the link"),
        "raw text preserved: {err}"
    );
}

#[test]
fn wrong_template_key_is_rejected_per_role() {
    let (model, tc) = fixture();
    // Readiness answered with the assertion role's key.
    let mock = MockEndpoint::serve(vec![nav_ok(), r#"{"facts":[],"Verdict":true}"#.into()]);
    let mut agent = LlmAgent::new(mock.config()).unwrap();
    let result = execute(&model, &tc, &mut agent, &ExecOptions::default());
    assert_eq!(result.verdict, Verdict::Inc);
    let readiness = result.steps.iter().find(|s| s.error.is_some()).unwrap();
    assert!(readiness.error.as_ref().unwrap().contains("result"));
}

#[test]
fn unreachable_endpoint_is_an_inconclusive_halt() {
    let (model, tc) = fixture();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    drop(listener);
    let mut agent = LlmAgent::new(LlmConfig {
        endpoint: dead,
        model: "mock-model".into(),
        timeout_ms: 2_000,
    })
    .unwrap();
    let result = execute(&model, &tc, &mut agent, &ExecOptions::default());
    assert_eq!(result.verdict, Verdict::Inc);
    assert!(result.steps[0].error.is_some());
}

#[test]
fn false_verdict_fails_the_case() {
    let (model, tc) = fixture();
    let mock = MockEndpoint::serve(vec![nav_ok(), ready_ok(), nav_ok(), verdict(false)]);
    let mut agent = LlmAgent::new(mock.config()).unwrap();
    let result = execute(&model, &tc, &mut agent, &ExecOptions::default());
    assert_eq!(result.verdict, Verdict::Fail);
}
