//! Location-allocation solver for classification yards in a rail freight network.
//!
//! The upper level picks one investment plan per potential node under a capital
//! budget; the lower level routes every car flow either directly to its
//! destination or through an intermediate yard for reclassification, minimizing
//! accumulation delay plus reclassification car-hours under yard capacity and
//! classification-track limits.
//!
//! Module map:
//!
//! - [`instance`]: domain types, the instance file format, validation and
//!   itinerary derivation.
//! - [`flow`]: flows, workloads, service flows, track demand, feasibility and
//!   the daily operating cost of one routing.
//! - [`tcs`]: exact and local-search solvers for the routing (lower) level.
//! - [`invest`]: capital recovery, budget checks and the investment (upper)
//!   level search.
//! - [`report`]: the versioned run report and the console summary.
//! - [`generate`]: seeded synthetic instances.

#[cfg(test)]
mod fixtures;
pub mod flow;
pub mod generate;
pub mod instance;
pub mod invest;
pub mod report;
pub mod tcs;

pub use flow::{
    check_feasibility, compute_flows, evaluate_assignment, operating_cost, track_demand,
    tracks_used, CostBreakdown, DecisionError, EffectiveYard, Evaluation, FeasibilityReport,
    FlowError, FlowState, InvestmentDecision, Route, Scenario, TcsAssignment, TrackError,
    Violation, ViolationKind,
};
pub use generate::{generate_instance, GenerateError, GeneratorSpec};
pub use instance::{
    count_investment_combinations, load_instance, parse_instance, serialize_instance,
    validate_instance, Demand, EconomicParams, Edge, Instance, InstanceDoc, InvestmentPlan, Issue,
    Itinerary, ItineraryError, LoadError, Node, NodeIdx, Pair, ParseError, Rule, Severity, TrackFn,
    ValidationReport, YardAttributes,
};
pub use invest::{
    annualized_investment, budget_feasible, capital_recovery_factor, evaluate_decision, prepared,
    solve, write_log, AnnealConfig, LocationPlan, RecordStatus, SolveError, SolveOutcome,
    SolveRecord, UpperMode, UpperSolveConfig,
};
pub use report::{ReportError, RunReport, REPORT_HEADER};
pub use tcs::{
    evaluate_z, solve_exact, solve_heuristic, solve_tcs, Optimality, TcsError, TcsMode, TcsPlan,
    TcsSolveConfig,
};
