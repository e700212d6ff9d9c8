//! Flow evaluation for one investment decision and one routing.
//!
//! For a destination `j`, every origin `i` with cars bound for `j` either
//! runs them directly (`Route::Direct`) or hands them to the intermediate
//! yard `k` (`Route::Via(k)`), where they join `k`'s own cars for `j`:
//!
//! ```text
//! f_ij = N_ij + sum over s with route(s, j) = Via(i) of f_sj
//! F_k  = sum over (i, j) with route(i, j) = Via(k) of f_ij
//! D_ij = f_ij [route(i, j) = Direct] + sum over t with route(i, t) = Via(j) of f_it
//! ```
//!
//! The per-destination relay graph has out-degree at most one, so flows are
//! propagated in topological order and a leftover node means a cycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, NodeIdx, Pair, TrackFn};

/// Relative slack used when comparing a load against a limit.
const LIMIT_TOLERANCE: f64 = 1e-9;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + LIMIT_TOLERANCE * rhs.abs().max(1.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("decision vector has {got} entries, instance has {expected} potential nodes")]
    WrongLength { expected: usize, got: usize },
    #[error("node {0} is not a potential node")]
    NotPotential(String),
    #[error("no plan chosen for potential node {0}")]
    Missing(String),
    #[error("plan {plan} out of range for node {node} (max {max})")]
    PlanOutOfRange {
        node: String,
        plan: usize,
        max: usize,
    },
}

/// One plan index per potential node; 0 is the implicit no-investment plan,
/// `p >= 1` selects the `p`-th listed plan.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InvestmentDecision {
    choice: BTreeMap<NodeIdx, usize>,
}

impl InvestmentDecision {
    /// Every potential node at plan 0.
    pub fn baseline(inst: &Instance) -> Self {
        InvestmentDecision {
            choice: inst.potential_nodes().into_iter().map(|k| (k, 0)).collect(),
        }
    }

    pub fn from_choices(
        inst: &Instance,
        choice: BTreeMap<NodeIdx, usize>,
    ) -> Result<Self, DecisionError> {
        for (&k, &p) in &choice {
            let node = inst.node(k);
            if !node.is_potential {
                return Err(DecisionError::NotPotential(node.id.clone()));
            }
            if p > node.plans.len() {
                return Err(DecisionError::PlanOutOfRange {
                    node: node.id.clone(),
                    plan: p,
                    max: node.plans.len(),
                });
            }
        }
        if let Some(k) = inst
            .potential_nodes()
            .into_iter()
            .find(|k| !choice.contains_key(k))
        {
            return Err(DecisionError::Missing(inst.id(k).to_string()));
        }
        Ok(InvestmentDecision { choice })
    }

    /// Builds a decision from plan indices listed in potential-node id order.
    pub fn from_vector(inst: &Instance, plans: &[usize]) -> Result<Self, DecisionError> {
        let nodes = inst.potential_nodes();
        if nodes.len() != plans.len() {
            return Err(DecisionError::WrongLength {
                expected: nodes.len(),
                got: plans.len(),
            });
        }
        Self::from_choices(inst, nodes.into_iter().zip(plans.iter().copied()).collect())
    }

    pub fn choices(&self) -> &BTreeMap<NodeIdx, usize> {
        &self.choice
    }

    pub fn plan_of(&self, node: NodeIdx) -> usize {
        self.choice.get(&node).copied().unwrap_or(0)
    }

    /// Plan indices in potential-node id order.
    pub fn vector(&self) -> Vec<usize> {
        self.choice.values().copied().collect()
    }

    /// Raw (not annualized) investment of the chosen plans.
    pub fn invested(&self, inst: &Instance) -> f64 {
        self.choice
            .iter()
            .filter(|(_, &p)| p > 0)
            .map(|(&k, &p)| inst.node(k).plans[p - 1].cost)
            .fold(0.0, |acc, x| acc + x)
    }
}

/// Limits and reclassification cost of a yard once the decision is applied.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveYard {
    /// Classification capacity available to through traffic, railcars/day.
    pub capacity: f64,
    /// Classification tracks available to through traffic.
    pub tracks: f64,
    /// Reclassification car-hours per railcar.
    pub tau: f64,
}

/// An instance together with an investment decision.
#[derive(Clone, Debug)]
pub struct Scenario<'a> {
    instance: &'a Instance,
    decision: InvestmentDecision,
    effective: Vec<EffectiveYard>,
}

impl<'a> Scenario<'a> {
    pub fn new(instance: &'a Instance, decision: InvestmentDecision) -> Self {
        let effective = instance
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let a = &n.attrs;
                let mut yard = EffectiveYard {
                    capacity: (a.capacity_total - a.capacity_local).max(0.0),
                    tracks: a.tracks_total.saturating_sub(a.tracks_local) as f64,
                    tau: a.reclass_cost,
                };
                let p = decision.plan_of(NodeIdx(i));
                if n.is_potential && p > 0 {
                    let plan = &n.plans[p - 1];
                    yard.capacity += plan.capacity_gain;
                    yard.tracks += plan.tracks_gain as f64;
                    yard.tau = plan.reclass_cost_after;
                }
                yard
            })
            .collect();
        Scenario {
            instance,
            decision,
            effective,
        }
    }

    pub fn baseline(instance: &'a Instance) -> Self {
        Self::new(instance, InvestmentDecision::baseline(instance))
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn decision(&self) -> &InvestmentDecision {
        &self.decision
    }

    pub fn effective(&self, node: NodeIdx) -> &EffectiveYard {
        &self.effective[node.0]
    }

    /// Test and what-if hook: replaces the effective limits of one node.
    pub fn with_effective(mut self, node: NodeIdx, yard: EffectiveYard) -> Self {
        self.effective[node.0] = yard;
        self
    }
}

/// Where the cars at `i` bound for `j` go next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Route {
    Direct,
    Via(NodeIdx),
}

/// One route per (origin, destination) pair. Pairs that carry no flow may be
/// absent; entries for them are ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TcsAssignment {
    routes: BTreeMap<Pair, Route>,
}

impl TcsAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every demand pair routed directly.
    pub fn all_direct(inst: &Instance) -> Self {
        TcsAssignment {
            routes: inst
                .demand_matrix()
                .into_keys()
                .map(|p| (p, Route::Direct))
                .collect(),
        }
    }

    pub fn set(&mut self, origin: NodeIdx, destination: NodeIdx, route: Route) {
        self.routes.insert((origin, destination), route);
    }

    pub fn get(&self, origin: NodeIdx, destination: NodeIdx) -> Option<Route> {
        self.routes.get(&(origin, destination)).copied()
    }

    pub fn routes(&self) -> &BTreeMap<Pair, Route> {
        &self.routes
    }

    /// Keeps only the pairs in `keep`.
    pub fn restricted_to<'p>(&self, keep: impl IntoIterator<Item = &'p Pair>) -> Self {
        TcsAssignment {
            routes: keep
                .into_iter()
                .filter_map(|p| self.routes.get(p).map(|&r| (*p, r)))
                .collect(),
        }
    }
}

impl FromIterator<(Pair, Route)> for TcsAssignment {
    fn from_iter<T: IntoIterator<Item = (Pair, Route)>>(iter: T) -> Self {
        TcsAssignment {
            routes: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("routing cycle toward {destination} through {node}")]
    RoutingCycle { destination: String, node: String },
    #[error("pair {origin} -> {destination} carries flow but has no route")]
    UnassignedPair { origin: String, destination: String },
    #[error("pair {origin} -> {destination} is routed via {via}, which is not on its itinerary")]
    InvalidVia {
        origin: String,
        destination: String,
        via: String,
    },
}

/// Flows `f`, workloads `F` and service flows `D`, railcars/day. Only
/// positive entries are stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowState {
    pub flow: BTreeMap<Pair, f64>,
    pub workload: BTreeMap<NodeIdx, f64>,
    pub service: BTreeMap<Pair, f64>,
    pub provided_services: BTreeSet<Pair>,
}

impl FlowState {
    pub fn flow(&self, origin: NodeIdx, destination: NodeIdx) -> f64 {
        self.flow
            .get(&(origin, destination))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn workload(&self, node: NodeIdx) -> f64 {
        self.workload.get(&node).copied().unwrap_or(0.0)
    }

    pub fn service(&self, origin: NodeIdx, destination: NodeIdx) -> f64 {
        self.service
            .get(&(origin, destination))
            .copied()
            .unwrap_or(0.0)
    }
}

pub fn compute_flows(scn: &Scenario, asg: &TcsAssignment) -> Result<FlowState, FlowError> {
    let inst = scn.instance();
    let id = |n: NodeIdx| inst.id(n).to_string();

    let mut by_dest: BTreeMap<NodeIdx, BTreeMap<NodeIdx, f64>> = BTreeMap::new();
    for ((o, d), v) in inst.demand_matrix() {
        if o != d && v > 0.0 {
            by_dest.entry(d).or_default().insert(o, v);
        }
    }

    let mut flow = BTreeMap::new();
    for (j, origins) in by_dest {
        let mut next: BTreeMap<NodeIdx, Option<NodeIdx>> = BTreeMap::new();
        let mut stack: Vec<NodeIdx> = origins.keys().rev().copied().collect();
        while let Some(i) = stack.pop() {
            if next.contains_key(&i) {
                continue;
            }
            let route = asg.get(i, j).ok_or_else(|| FlowError::UnassignedPair {
                origin: id(i),
                destination: id(j),
            })?;
            let succ = match route {
                Route::Direct => None,
                Route::Via(k) => {
                    let on_itinerary = k != i
                        && k != j
                        && inst.itinerary(i, j).is_some_and(|it| it.via.contains(&k));
                    if !on_itinerary {
                        return Err(FlowError::InvalidVia {
                            origin: id(i),
                            destination: id(j),
                            via: id(k),
                        });
                    }
                    Some(k)
                }
            };
            next.insert(i, succ);
            if let Some(k) = succ {
                stack.push(k);
            }
        }

        let mut indegree: BTreeMap<NodeIdx, usize> = next.keys().map(|&k| (k, 0)).collect();
        for k in next.values().flatten() {
            *indegree.get_mut(k).expect("successors are discovered") += 1;
        }
        let mut inflow = origins;
        let mut ready: BTreeSet<NodeIdx> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&k, _)| k)
            .collect();
        let mut processed = 0;
        while let Some(i) = ready.pop_first() {
            processed += 1;
            let f = inflow.get(&i).copied().unwrap_or(0.0);
            flow.insert((i, j), f);
            if let Some(k) = next[&i] {
                *inflow.entry(k).or_insert(0.0) += f;
                let d = indegree.get_mut(&k).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(k);
                }
            }
        }
        if processed < next.len() {
            let stuck = indegree
                .iter()
                .find(|(_, &d)| d > 0)
                .map(|(&k, _)| k)
                .unwrap();
            return Err(FlowError::RoutingCycle {
                destination: id(j),
                node: id(stuck),
            });
        }
    }

    let mut workload: BTreeMap<NodeIdx, f64> = BTreeMap::new();
    let mut service: BTreeMap<Pair, f64> = BTreeMap::new();
    for (&(i, j), &f) in &flow {
        match asg.get(i, j).expect("checked during propagation") {
            Route::Direct => *service.entry((i, j)).or_insert(0.0) += f,
            Route::Via(k) => {
                *service.entry((i, k)).or_insert(0.0) += f;
                *workload.entry(k).or_insert(0.0) += f;
            }
        }
    }
    let provided_services = service
        .iter()
        .filter(|(_, &d)| d > 0.0)
        .map(|(&p, _)| p)
        .collect();
    Ok(FlowState {
        flow,
        workload,
        service,
        provided_services,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("service flow {0} is negative")]
    Negative(f64),
    #[error("service flow {demand} exceeds the largest step threshold {max}")]
    Overflow { demand: f64, max: f64 },
}

/// Classification tracks needed by a service carrying `demand` railcars/day.
pub fn track_demand(demand: f64, track_fn: &TrackFn) -> Result<f64, TrackError> {
    if demand < 0.0 {
        return Err(TrackError::Negative(demand));
    }
    match track_fn {
        TrackFn::Linear => Ok(demand / 200.0),
        TrackFn::Step { .. } if demand == 0.0 => Ok(0.0),
        TrackFn::Step { thresholds: None } => {
            let mut n = (demand / 200.0).ceil();
            if demand > 200.0 * n {
                n += 1.0;
            }
            Ok(n)
        }
        TrackFn::Step {
            thresholds: Some(t),
        } => t
            .iter()
            .position(|&a| demand <= a)
            .map(|n| (n + 1) as f64)
            .ok_or(TrackError::Overflow {
                demand,
                max: t.last().copied().unwrap_or(0.0),
            }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    CapacityExceeded,
    TracksExceeded,
    RoutingCycle,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::CapacityExceeded => "capacity-exceeded",
            ViolationKind::TracksExceeded => "tracks-exceeded",
            ViolationKind::RoutingCycle => "routing-cycle",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: NodeIdx,
    /// Destination involved, for routing cycles.
    pub destination: Option<NodeIdx>,
    pub lhs: f64,
    pub rhs: f64,
}

impl Violation {
    pub fn describe(&self, inst: &Instance) -> String {
        match self.destination {
            Some(d) => format!(
                "{} at {} toward {}",
                self.kind,
                inst.id(self.node),
                inst.id(d)
            ),
            None => format!(
                "{} at {}: {} > {}",
                self.kind,
                inst.id(self.node),
                self.lhs,
                self.rhs
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest `lhs - rhs` among the violations.
    pub fn worst_excess(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| v.lhs - v.rhs)
            .fold(0.0, f64::max)
    }
}

/// Tracks occupied at each dispatching yard: one track-demand term per
/// outbound service. A step overflow counts as infinitely many tracks.
pub fn tracks_used(scn: &Scenario, flows: &FlowState) -> BTreeMap<NodeIdx, f64> {
    let track_fn = &scn.instance().economics().track_fn;
    let mut used: BTreeMap<NodeIdx, f64> = BTreeMap::new();
    for (&(i, _), &d) in &flows.service {
        let t = track_demand(d, track_fn).unwrap_or(f64::INFINITY);
        *used.entry(i).or_insert(0.0) += t;
    }
    used
}

pub fn check_feasibility(
    scn: &Scenario,
    asg: &TcsAssignment,
    flows: &FlowState,
) -> FeasibilityReport {
    debug_assert!(flows.flow.keys().all(|&(i, j)| asg.get(i, j).is_some()));
    let mut violations = Vec::new();
    for (&k, &load) in &flows.workload {
        let cap = scn.effective(k).capacity;
        if exceeds(load, cap) {
            violations.push(Violation {
                kind: ViolationKind::CapacityExceeded,
                node: k,
                destination: None,
                lhs: load,
                rhs: cap,
            });
        }
    }
    for (i, used) in tracks_used(scn, flows) {
        let available = scn.effective(i).tracks;
        if exceeds(used, available) {
            violations.push(Violation {
                kind: ViolationKind::TracksExceeded,
                node: i,
                destination: None,
                lhs: used,
                rhs: available,
            });
        }
    }
    FeasibilityReport { violations }
}

/// Daily operating cost, car-hours.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub accumulation: f64,
    pub reclassification: f64,
    pub z_total: f64,
}

pub fn operating_cost(scn: &Scenario, _asg: &TcsAssignment, flows: &FlowState) -> CostBreakdown {
    let inst = scn.instance();
    let econ = inst.economics();
    let accumulation: f64 = flows
        .provided_services
        .iter()
        .map(|&(i, j)| inst.node(i).attrs.accumulation_param * econ.train_size(i, j))
        .fold(0.0, |acc, x| acc + x);
    let reclassification: f64 = flows
        .workload
        .iter()
        .map(|(&k, &load)| load * scn.effective(k).tau)
        .fold(0.0, |acc, x| acc + x);
    CostBreakdown {
        accumulation,
        reclassification,
        z_total: accumulation + reclassification,
    }
}

/// Flows, feasibility and cost in one pass. A routing cycle comes back as an
/// infeasible evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub flows: FlowState,
    pub report: FeasibilityReport,
    pub cost: CostBreakdown,
}

pub fn evaluate_assignment(scn: &Scenario, asg: &TcsAssignment) -> Result<Evaluation, FlowError> {
    let flows = compute_flows(scn, asg)?;
    let report = check_feasibility(scn, asg, &flows);
    let cost = operating_cost(scn, asg, &flows);
    Ok(Evaluation {
        flows,
        report,
        cost,
    })
}
