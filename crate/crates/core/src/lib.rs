//! Structured re-optimization: a mutable model state edited through typed
//! patches, re-solved by a built-in LP/MIP kernel inside a bounded
//! plan-validate-retry loop.

pub mod agents;
pub mod llm;
pub mod model;
pub mod patch;
pub mod scenario;
pub mod solver;
pub mod toolbox;
