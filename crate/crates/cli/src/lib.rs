//! Library surface behind the `hamrule` binary: scenario loading, run
//! orchestration, artifact emission and figure generation. Exposed so the
//! integration tests drive the same code paths the CLI does.

pub mod emit;
pub mod plot;
pub mod runner;
pub mod scenario;
