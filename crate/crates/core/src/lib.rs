//! Conversational orchestration for human-robot collaborative assembly: intent
//! matching, dialogue management, a back-end protocol, and a deterministic
//! simulator that compares conversational control with a command baseline.

pub mod assembly;
pub mod backend;
pub mod dialogue;
pub mod fixtures;
pub mod intent;
pub mod metrics;
pub mod rng;
pub mod robot;
pub mod script;
pub mod sim;
pub mod time;
