//! Guarded execution of natural-language GUI test cases.
//!
//! A test case is a list of navigation actions followed by assertions, both
//! written in plain language. Execution drives an application through the
//! actions and checks the assertions, asking an agent (an LLM, an oracle, or
//! a fault-injected stand-in) whenever a step has no machine-checkable strict
//! form. Guardrails between steps stop runs that drift, so an unreliable
//! agent can only widen the inconclusive outcome, never turn a failing run
//! into a pass.
//!
//! Module map:
//! - [`model`]: test cases, strict forms, page snapshots, verdicts
//! - [`suite`]: the suite file format
//! - [`strict`]: template parsing and strict evaluation
//! - [`sim`]: the deterministic simulated application and fault mutations
//! - [`iolts`]: labeled transition systems and conformance checking
//! - [`agents`]: the agent interface, oracle and fault-injected agents
//! - [`llm`]: the wire-protocol agent backed by a chat-completion endpoint
//! - [`executor`]: the guarded step-by-step execution loop
//! - [`regimes`]: recognizers for the three behavioral regimes
//! - [`consistency`]: per-step score measures and agent calibration
//! - [`unsound`]: the weak-unsoundness classification
//! - [`report`]: run reports and their serialization
//! - [`rng`]: a small deterministic generator so runs are replayable

pub mod agents;
pub mod consistency;
pub mod executor;
pub mod iolts;
pub mod llm;
pub mod model;
pub mod regimes;
pub mod report;
pub mod rng;
pub mod sim;
pub mod strict;
pub mod suite;
pub mod unsound;

pub use model::{TestCase, TestSuite, Verdict};
