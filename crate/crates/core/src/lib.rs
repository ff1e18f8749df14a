pub mod agents;
pub mod diagnostics;
pub mod env;
pub mod eval_stats;
pub mod nn;
pub mod pg;
pub mod normalize;
pub mod qlearn;
pub mod runner;
pub mod scenario;
