//! Train connecting service (routing) solvers for a fixed investment
//! decision.
//!
//! Both solvers work on the closure of pairs that can carry flow: the demand
//! pairs plus every relay pair `(k, j)` reachable through itineraries. A
//! routing is a vector with one option per closure pair, option 0 being
//! `Direct` and option `c >= 1` the `c`-th intermediate yard in id order.
//! Options of pairs that carry no flow are irrelevant; the canonical vector
//! sets them to 0, and solutions compare by (cost, canonical vector).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{
    evaluate_assignment, CostBreakdown, Evaluation, FeasibilityReport, FlowState, Route, Scenario,
    TcsAssignment, ViolationKind,
};
use crate::instance::Pair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TcsMode {
    Exact,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcsSolveConfig {
    pub mode: TcsMode,
    /// Largest closure size the exact solver accepts.
    pub exact_pair_limit: usize,
    pub restarts: usize,
    /// Move evaluations per restart.
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for TcsSolveConfig {
    fn default() -> Self {
        TcsSolveConfig {
            mode: TcsMode::Exact,
            exact_pair_limit: 12,
            restarts: 8,
            max_iterations: 10_000,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimality {
    ProvenOptimal,
    HeuristicBest,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcsPlan {
    /// Routes of the pairs that carry flow.
    pub assignment: TcsAssignment,
    pub flows: FlowState,
    pub cost: CostBreakdown,
    pub feasible: bool,
    pub optimality: Optimality,
    /// Empty for feasible plans; for infeasible ones, the violations of the
    /// best repair attempt.
    pub report: FeasibilityReport,
    pub evaluations: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TcsError {
    #[error("{pairs} routable pairs exceed the exact solver limit of {limit}; use the heuristic")]
    PairLimitExceeded { pairs: usize, limit: usize },
    #[error("pair {origin} -> {destination} can carry flow but has no itinerary")]
    MissingItinerary { origin: String, destination: String },
    #[error("no feasible routing: {0}")]
    Infeasible(String),
}

/// The routing problem compiled to index form.
struct Lower<'s, 'a> {
    scn: &'s Scenario<'a>,
    pairs: Vec<Pair>,
    options: Vec<Vec<Route>>,
    /// Closure index of the relay pair reached by each option.
    relay: Vec<Vec<Option<usize>>>,
    roots: Vec<usize>,
}

impl<'s, 'a> Lower<'s, 'a> {
    fn new(scn: &'s Scenario<'a>) -> Result<Self, TcsError> {
        let inst = scn.instance();
        let closure = inst
            .itinerary_closure()
            .map_err(|(o, d)| TcsError::MissingItinerary {
                origin: inst.id(o).to_string(),
                destination: inst.id(d).to_string(),
            })?;
        let pairs: Vec<Pair> = closure.into_iter().filter(|(o, d)| o != d).collect();
        let index: BTreeMap<Pair, usize> = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let mut options = Vec::with_capacity(pairs.len());
        let mut relay = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            let mut via: Vec<_> = inst
                .itinerary(i, j)
                .map(|it| it.via.clone())
                .unwrap_or_default();
            via.retain(|&k| k != i && k != j);
            via.sort();
            via.dedup();
            let mut opts = vec![Route::Direct];
            let mut next = vec![None];
            for k in via {
                opts.push(Route::Via(k));
                next.push(index.get(&(k, j)).copied());
            }
            options.push(opts);
            relay.push(next);
        }
        let roots = inst
            .demand_matrix()
            .into_iter()
            .filter(|&((o, d), v)| o != d && v > 0.0)
            .map(|(p, _)| index[&p])
            .collect();
        Ok(Lower {
            scn,
            pairs,
            options,
            relay,
            roots,
        })
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn assignment(&self, choices: &[usize]) -> TcsAssignment {
        self.pairs
            .iter()
            .zip(choices)
            .enumerate()
            .map(|(i, (&p, &c))| (p, self.options[i][c]))
            .collect()
    }

    /// Pairs reached from the demand pairs. With `decided`, only decided
    /// pairs pass their flow on.
    fn active(&self, choices: &[usize], decided: Option<&[bool]>) -> Vec<bool> {
        let mut active = vec![false; self.len()];
        let mut stack = self.roots.clone();
        while let Some(p) = stack.pop() {
            if active[p] {
                continue;
            }
            active[p] = true;
            if decided.is_some_and(|d| !d[p]) {
                continue;
            }
            if let Some(q) = self.relay[p][choices[p]] {
                stack.push(q);
            }
        }
        active
    }

    fn canonical(&self, choices: &[usize]) -> Vec<usize> {
        let active = self.active(choices, None);
        choices
            .iter()
            .zip(active)
            .map(|(&c, a)| if a { c } else { 0 })
            .collect()
    }

    fn evaluate(&self, choices: &[usize]) -> Option<Evaluation> {
        evaluate_assignment(self.scn, &self.assignment(choices)).ok()
    }

    fn feasible_cost(&self, choices: &[usize]) -> Option<f64> {
        self.evaluate(choices)
            .filter(|ev| ev.report.is_feasible())
            .map(|ev| ev.cost.z_total)
    }

    /// Sets the smallest pair on an active relay cycle to `Direct`. Returns
    /// whether a cycle was found.
    fn break_cycle(&self, choices: &mut [usize]) -> bool {
        let active = self.active(choices, None);
        for start in (0..self.len()).filter(|&p| active[p]) {
            let mut seen = vec![false; self.len()];
            let mut p = start;
            loop {
                if seen[p] {
                    let mut member = p;
                    let mut smallest = p;
                    loop {
                        member = self.relay[member][choices[member]].unwrap();
                        smallest = smallest.min(member);
                        if member == p {
                            break;
                        }
                    }
                    choices[smallest] = 0;
                    return true;
                }
                seen[p] = true;
                match self.relay[p][choices[p]] {
                    Some(q) => p = q,
                    None => break,
                }
            }
        }
        false
    }

    fn plan(&self, choices: &[usize], optimality: Optimality, evaluations: u64) -> TcsPlan {
        let ev = self
            .evaluate(choices)
            .expect("plans are built from cycle-free routings");
        let feasible = ev.report.is_feasible();
        let assignment = self.assignment(choices).restricted_to(ev.flows.flow.keys());
        TcsPlan {
            assignment,
            flows: ev.flows,
            cost: ev.cost,
            feasible,
            optimality: if feasible {
                optimality
            } else {
                Optimality::Infeasible
            },
            report: ev.report,
            evaluations,
        }
    }
}

fn better(cost: f64, choices: &[usize], best: &Option<(f64, Vec<usize>)>) -> bool {
    match best {
        None => true,
        Some((bc, bv)) => match cost.total_cmp(bc) {
            Ordering::Less => true,
            Ordering::Equal => choices < bv.as_slice(),
            Ordering::Greater => false,
        },
    }
}

/// Exhaustive search over routings. Branches only on pairs that carry flow
/// under the choices made so far, which visits every canonical routing
/// exactly once.
pub fn solve_exact(scn: &Scenario, config: &TcsSolveConfig) -> Result<TcsPlan, TcsError> {
    let lower = Lower::new(scn)?;
    if lower.len() > config.exact_pair_limit {
        return Err(TcsError::PairLimitExceeded {
            pairs: lower.len(),
            limit: config.exact_pair_limit,
        });
    }

    struct Search<'l, 's, 'a> {
        lower: &'l Lower<'s, 'a>,
        choices: Vec<usize>,
        decided: Vec<bool>,
        best: Option<(f64, Vec<usize>)>,
        leaves: u64,
    }

    impl Search<'_, '_, '_> {
        fn run(&mut self) {
            let active = self.lower.active(&self.choices, Some(&self.decided));
            let next = (0..self.lower.len()).find(|&p| active[p] && !self.decided[p]);
            match next {
                None => {
                    self.leaves += 1;
                    if let Some(cost) = self.lower.feasible_cost(&self.choices) {
                        if better(cost, &self.choices, &self.best) {
                            self.best = Some((cost, self.choices.clone()));
                        }
                    }
                }
                Some(p) => {
                    self.decided[p] = true;
                    for c in 0..self.lower.options[p].len() {
                        self.choices[p] = c;
                        self.run();
                    }
                    self.choices[p] = 0;
                    self.decided[p] = false;
                }
            }
        }
    }

    let mut search = Search {
        lower: &lower,
        choices: vec![0; lower.len()],
        decided: vec![false; lower.len()],
        best: None,
        leaves: 0,
    };
    search.run();
    Ok(match search.best {
        Some((_, choices)) => lower.plan(&choices, Optimality::ProvenOptimal, search.leaves),
        None => lower.plan(&vec![0; lower.len()], Optimality::Infeasible, search.leaves),
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Greedy repair toward feasibility: relay cycles are cut, yards over
/// capacity send their largest relayed flow direct, and yards short of
/// tracks reroute their smallest direct service through the least-loaded
/// intermediate yard with spare capacity.
fn repair(lower: &Lower, mut choices: Vec<usize>, evals: &mut u64) -> Option<(Vec<usize>, f64)> {
    let limit = 4 * lower.len() + 16;
    for _ in 0..limit {
        if lower.break_cycle(&mut choices) {
            continue;
        }
        *evals += 1;
        let ev = lower.evaluate(&choices)?;
        let Some(v) = ev.report.violations.first() else {
            return Some((choices, ev.cost.z_total));
        };
        let active = lower.active(&choices, None);
        let flow_of = |p: usize| ev.flows.flow(lower.pairs[p].0, lower.pairs[p].1);
        match v.kind {
            ViolationKind::CapacityExceeded => {
                let k = v.node;
                let victim = (0..lower.len())
                    .filter(|&p| active[p] && lower.options[p][choices[p]] == Route::Via(k))
                    .max_by(|&a, &b| flow_of(a).total_cmp(&flow_of(b)).then(b.cmp(&a)))?;
                choices[victim] = 0;
            }
            ViolationKind::TracksExceeded => {
                let i = v.node;
                let mut moves: Vec<(f64, usize, usize)> = Vec::new();
                for p in (0..lower.len()).filter(|&p| active[p] && choices[p] == 0) {
                    let (o, d) = lower.pairs[p];
                    if o != i {
                        continue;
                    }
                    let f = flow_of(p);
                    let target = (1..lower.options[p].len())
                        .filter_map(|c| match lower.options[p][c] {
                            Route::Via(k) => {
                                let load = ev.flows.workload(k);
                                let room = lower.scn.effective(k).capacity - load;
                                (room >= f).then_some((load, k, c))
                            }
                            Route::Direct => None,
                        })
                        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    if let Some((_, _, c)) = target {
                        moves.push((ev.flows.service(o, d), p, c));
                    }
                }
                let &(_, p, c) = moves
                    .iter()
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?;
                choices[p] = c;
            }
            ViolationKind::RoutingCycle => unreachable!("cycles are cut before evaluation"),
        }
    }
    None
}

struct RestartOutcome {
    best: Option<(f64, Vec<usize>)>,
    evaluations: u64,
}

fn run_restart(lower: &Lower, config: &TcsSolveConfig, restart: usize) -> RestartOutcome {
    let mut evals = 0;
    let zeros = vec![0; lower.len()];
    let start = if restart == 0 {
        repair(lower, zeros, &mut evals)
    } else {
        let mut rng =
            ChaCha8Rng::seed_from_u64(splitmix(config.rng_seed ^ splitmix(restart as u64)));
        let random: Vec<usize> = lower
            .options
            .iter()
            .map(|o| rng.random_range(0..o.len()))
            .collect();
        repair(lower, random, &mut evals).or_else(|| repair(lower, zeros, &mut evals))
    };
    let Some((mut current, mut cost)) = start else {
        return RestartOutcome {
            best: None,
            evaluations: evals,
        };
    };

    let budget = config.max_iterations as u64 + evals;
    'search: while evals < budget {
        let active = lower.active(&current, None);
        for p in (0..lower.len()).filter(|&p| active[p]) {
            for c in (0..lower.options[p].len()).filter(|&c| c != current[p]) {
                if evals >= budget {
                    break 'search;
                }
                let mut candidate = current.clone();
                candidate[p] = c;
                evals += 1;
                if let Some(z) = lower.feasible_cost(&candidate) {
                    if z < cost - 1e-9 * cost.abs().max(1.0) {
                        current = candidate;
                        cost = z;
                        continue 'search;
                    }
                }
            }
        }
        break;
    }
    let canonical = lower.canonical(&current);
    RestartOutcome {
        best: Some((cost, canonical)),
        evaluations: evals,
    }
}

/// Multi-start first-improvement local search over single-pair route
/// changes. Restart 0 starts from the repaired all-direct routing, later
/// restarts from seeded random routings.
pub fn solve_heuristic(scn: &Scenario, config: &TcsSolveConfig) -> Result<TcsPlan, TcsError> {
    let lower = Lower::new(scn)?;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| run_restart(&lower, config, r))
        .collect();
    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (cost, choices) in outcomes.into_iter().filter_map(|o| o.best) {
        if better(cost, &choices, &best) {
            best = Some((cost, choices));
        }
    }
    Ok(match best {
        Some((_, choices)) => lower.plan(&choices, Optimality::HeuristicBest, evaluations),
        None => lower.plan(&vec![0; lower.len()], Optimality::Infeasible, evaluations),
    })
}

/// Dispatches on `config.mode`.
pub fn solve_tcs(scn: &Scenario, config: &TcsSolveConfig) -> Result<TcsPlan, TcsError> {
    match config.mode {
        TcsMode::Exact => solve_exact(scn, config),
        TcsMode::Heuristic => solve_heuristic(scn, config),
    }
}

/// Daily operating cost `Z(Y)` of the best routing, car-hours.
pub fn evaluate_z(scn: &Scenario, config: &TcsSolveConfig) -> Result<f64, TcsError> {
    let plan = solve_tcs(scn, config)?;
    if plan.feasible {
        Ok(plan.cost.z_total)
    } else {
        let inst = scn.instance();
        let diag: Vec<String> = plan
            .report
            .violations
            .iter()
            .map(|v| v.describe(inst))
            .collect();
        Err(TcsError::Infeasible(diag.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::flow::{check_feasibility, EffectiveYard, InvestmentDecision};
    use crate::instance::NodeIdx;
    use proptest::prelude::*;

    fn heuristic() -> TcsSolveConfig {
        TcsSolveConfig {
            mode: TcsMode::Heuristic,
            ..Default::default()
        }
    }

    #[test]
    fn line_prefers_relay_through_b() {
        let inst = fixtures::line3();
        let scn = Scenario::baseline(&inst);
        let plan = solve_exact(&scn, &TcsSolveConfig::default()).unwrap();
        let (a, b, c) = (NodeIdx(0), NodeIdx(1), NodeIdx(2));
        assert_eq!(plan.assignment.get(a, c), Some(Route::Via(b)));
        assert_eq!(plan.cost.z_total, 1200.0);
        assert_eq!(plan.optimality, Optimality::ProvenOptimal);
        assert!(plan.feasible);
        let h = solve_heuristic(&scn, &heuristic()).unwrap();
        assert_eq!(h.cost.z_total, 1200.0);
        assert_eq!(h.optimality, Optimality::HeuristicBest);
    }

    #[test]
    fn tight_intermediate_forces_direct() {
        let inst = fixtures::line3_potential_b(0.0);
        let scn = Scenario::baseline(&inst);
        let plan = solve_exact(&scn, &TcsSolveConfig::default()).unwrap();
        assert_eq!(
            plan.assignment.get(NodeIdx(0), NodeIdx(2)),
            Some(Route::Direct)
        );
        assert_eq!(plan.cost.z_total, 1500.0);
        let built = InvestmentDecision::from_vector(&inst, &[1]).unwrap();
        let scn = Scenario::new(&inst, built);
        assert_eq!(
            solve_exact(&scn, &TcsSolveConfig::default())
                .unwrap()
                .cost
                .z_total,
            1200.0
        );
    }

    #[test]
    fn zero_capacity_everywhere_is_all_direct() {
        let inst = fixtures::line3();
        let mut scn = Scenario::baseline(&inst);
        for k in 0..3 {
            let eff = scn.effective(NodeIdx(k)).clone();
            scn = scn.with_effective(
                NodeIdx(k),
                EffectiveYard {
                    capacity: 0.0,
                    ..eff
                },
            );
        }
        for config in [TcsSolveConfig::default(), heuristic()] {
            let plan = solve_tcs(&scn, &config).unwrap();
            assert!(plan
                .assignment
                .routes()
                .values()
                .all(|&r| r == Route::Direct));
            assert_eq!(plan.cost.z_total, 1500.0);
        }
    }

    #[test]
    fn single_adjacent_demand() {
        let inst = fixtures::single_service(12.0, 50.0);
        let z = evaluate_z(&Scenario::baseline(&inst), &TcsSolveConfig::default()).unwrap();
        assert_eq!(z, 600.0);
    }

    #[test]
    fn evaluate_z_examples() {
        let inst = fixtures::line3();
        assert_eq!(
            evaluate_z(&Scenario::baseline(&inst), &TcsSolveConfig::default()).unwrap(),
            1200.0
        );
        let inst = fixtures::empty_demand();
        assert_eq!(
            evaluate_z(&Scenario::baseline(&inst), &TcsSolveConfig::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn infeasible_is_reported() {
        let inst = fixtures::star_origin();
        let scn = Scenario::baseline(&inst);
        let plan = solve_exact(&scn, &TcsSolveConfig::default()).unwrap();
        assert!(!plan.feasible);
        assert_eq!(plan.optimality, Optimality::Infeasible);
        assert!(matches!(
            evaluate_z(&scn, &TcsSolveConfig::default()),
            Err(TcsError::Infeasible(_))
        ));
    }

    #[test]
    fn pair_limit() {
        let inst = fixtures::line3();
        let config = TcsSolveConfig {
            exact_pair_limit: 2,
            ..Default::default()
        };
        assert_eq!(
            solve_exact(&Scenario::baseline(&inst), &config),
            Err(TcsError::PairLimitExceeded { pairs: 3, limit: 2 })
        );
    }

    #[test]
    fn heuristic_never_beats_exact_and_is_sound() {
        for seed in 0..60 {
            let inst = fixtures::random_small(seed);
            let scn = Scenario::baseline(&inst);
            let exact = solve_exact(&scn, &TcsSolveConfig::default()).unwrap();
            let h = solve_heuristic(&scn, &heuristic()).unwrap();
            for plan in [&exact, &h] {
                if plan.feasible {
                    let asg = plan.assignment.clone();
                    let flows = compute_flows_for(&scn, &asg);
                    assert!(check_feasibility(&scn, &asg, &flows).is_feasible());
                }
            }
            if h.feasible {
                assert!(exact.feasible);
                assert!(h.cost.z_total >= exact.cost.z_total - 1e-9 * exact.cost.z_total.max(1.0));
            }
        }
    }

    fn compute_flows_for(scn: &Scenario, asg: &TcsAssignment) -> FlowState {
        crate::flow::compute_flows(scn, asg).unwrap()
    }

    #[test]
    fn deterministic_across_pools_and_listing_order() {
        for seed in 0..20 {
            let inst = fixtures::random_small(seed);
            let rev = fixtures::random_small_reversed(seed);
            let one = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap();
            let four = rayon::ThreadPoolBuilder::new()
                .num_threads(4)
                .build()
                .unwrap();
            for config in [TcsSolveConfig::default(), heuristic()] {
                let a = one
                    .install(|| solve_tcs(&Scenario::baseline(&inst), &config))
                    .unwrap();
                let b = four
                    .install(|| solve_tcs(&Scenario::baseline(&inst), &config))
                    .unwrap();
                let c = solve_tcs(&Scenario::baseline(&rev), &config).unwrap();
                assert_eq!(a, b);
                assert_eq!(a.cost.z_total, c.cost.z_total);
                assert_eq!(a.assignment, c.assignment);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn more_capacity_never_costs_more(seed in 0u64..10_000, extra in 0.0f64..200.0) {
            let inst = fixtures::random_small(seed);
            let base = Scenario::baseline(&inst);
            let mut grown = Scenario::baseline(&inst);
            for k in 0..inst.nodes().len() {
                let eff = grown.effective(NodeIdx(k)).clone();
                grown = grown.with_effective(NodeIdx(k), EffectiveYard { capacity: eff.capacity + extra, ..eff });
            }
            let a = solve_exact(&base, &TcsSolveConfig::default()).unwrap();
            let b = solve_exact(&grown, &TcsSolveConfig::default()).unwrap();
            if a.feasible {
                prop_assert!(b.feasible);
                prop_assert!(b.cost.z_total <= a.cost.z_total);
            }
        }
    }
}
