#![allow(dead_code)]

pub mod dialogue_fuzz;
pub mod envelopes;
pub mod plan_oracle;
