//! Resource allocation across robot teams by an ecology-inspired transfer
//! rule: a donor hands an agent to a recipient only when the weighted
//! marginal benefit exceeds the weighted marginal cost, candidate transfers
//! are narrowed by two bidding rounds, and agreed transfers execute only if
//! the system-wide objective strictly improves. With strictly increasing,
//! discretely concave mission evaluations the loop terminates at the global
//! optimum on complete team graphs.
//!
//! The crate ships:
//! - [`eval`]: the evaluator abstraction with analytic and tabulated forms;
//! - [`hamilton`] / [`bidding`] / [`collab`]: the transfer rule, the bidding
//!   rounds, and the iterative collaboration loop;
//! - [`coverage`]: a Voronoi coverage-control mission (grid locational cost,
//!   Lloyd's algorithm) plugged in as a live mission evaluator;
//! - [`oracle`]: brute-force enumeration of the allocation simplex plus the
//!   randomized property harness.

pub mod bidding;
pub mod collab;
pub mod coverage;
pub mod eval;
pub mod hamilton;
pub mod oracle;
pub mod team;

pub use bidding::{
    build_plan, incoming_bid, outgoing_bid, select_incoming, select_outgoing, CollaborationPlan,
    PlanError, Transfer,
};
pub use collab::{
    apply_plan, collaboration_step, global_objective, run_collaboration, AgentChange,
    CollabConfig, CollabError, CollaborationSession, CountMission, IterationRecord, MissionError,
    RunTrace, TeamMission, Termination, COVERAGE_EPSILON_G,
};
pub use eval::{
    make_analytic, validate_assumption2, AnalyticEvaluator, AnalyticKind, Assumption2Report,
    EvalError, MissionEvaluator, TabulatedEvaluator,
};
pub use hamilton::{
    filter_graph, hamilton_allows, marginal_benefit, marginal_cost, FilteredEdge, FilteredGraph,
};
pub use oracle::{
    brute_force_optimal, harness::property_harness, harness::HarnessConfig,
    harness::HarnessReport, sample_allocation, AllocationSpace, OracleError,
};
pub use team::{Allocation, TeamError, TeamGraph, TeamId, TeamSpec, Teams};
