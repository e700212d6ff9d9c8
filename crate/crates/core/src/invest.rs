//! Investment (upper-level) search.
//!
//! The annual objective of a decision is the annualized capital of the chosen
//! plans plus `days_per_year * car_hour_value * Z`, where `Z` is the daily
//! car-hour cost of the best routing under that decision. The budget applies
//! to the raw, undiscounted plan costs.

use std::borrow::Cow;
use std::collections::HashMap;
use std::io::{self, Write};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{DecisionError, InvestmentDecision, Scenario};
use crate::instance::{count_investment_combinations, Instance, ItineraryError};
use crate::tcs::{solve_tcs, TcsError, TcsPlan, TcsSolveConfig};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{count} investment combinations exceed the enumeration limit of {limit}; try --mode anneal")]
    EnumerateLimit { count: BigUint, limit: u64 },
    #[error("no decision is both within budget and routable ({evaluated} evaluated)")]
    NoFeasibleDecision { evaluated: usize },
    #[error("lifetime must be at least one year")]
    ZeroLifetime,
    #[error(transparent)]
    Tcs(#[from] TcsError),
    #[error(transparent)]
    Itinerary(#[from] ItineraryError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

/// Factor turning a lump sum into an equal annual payment over `lifetime`
/// years at `discount_rate`: `r (1+r)^T / ((1+r)^T - 1)`, and `1/T` at
/// `r = 0`.
pub fn capital_recovery_factor(discount_rate: f64, lifetime: u32) -> Result<f64, SolveError> {
    if lifetime == 0 {
        return Err(SolveError::ZeroLifetime);
    }
    let t = lifetime as f64;
    if discount_rate == 0.0 {
        return Ok(1.0 / t);
    }
    // r / (1 - (1+r)^-T), evaluated without forming (1+r)^T
    Ok(discount_rate / -(-t * discount_rate.ln_1p()).exp_m1())
}

/// Annualized capital of the chosen plans. Plan 0 contributes nothing; a
/// zero-lifetime plan (rejected by validation) annualizes to infinity.
pub fn annualized_investment(inst: &Instance, decision: &InvestmentDecision) -> f64 {
    let rate = inst.economics().discount_rate;
    decision
        .choices()
        .iter()
        .filter(|(_, &p)| p > 0)
        .map(|(&k, &p)| {
            let plan = &inst.node(k).plans[p - 1];
            capital_recovery_factor(rate, plan.lifetime_years).unwrap_or(f64::INFINITY) * plan.cost
        })
        .fold(0.0, |acc, x| acc + x)
}

/// Raw plan costs within the budget (inclusive).
pub fn budget_feasible(inst: &Instance, decision: &InvestmentDecision) -> bool {
    decision.invested(inst) <= inst.economics().budget
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpperMode {
    Enumerate,
    Anneal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealConfig {
    pub initial_temp: f64,
    /// Geometric cooling factor in (0, 1).
    pub cooling_rate: f64,
    pub steps: usize,
    pub rng_seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temp: 1000.0,
            cooling_rate: 0.95,
            steps: 500,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperSolveConfig {
    pub mode: UpperMode,
    pub enumerate_limit: u64,
    pub anneal: AnnealConfig,
    pub lower: TcsSolveConfig,
}

impl Default for UpperSolveConfig {
    fn default() -> Self {
        UpperSolveConfig {
            mode: UpperMode::Enumerate,
            enumerate_limit: 1_000_000,
            anneal: AnnealConfig::default(),
            lower: TcsSolveConfig::default(),
        }
    }
}

/// A decision with its routing and annual cost. When the routing level is
/// infeasible, `annual_operation` and `objective` are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationPlan {
    pub decision: InvestmentDecision,
    pub tcs: TcsPlan,
    /// Raw investment of the chosen plans.
    pub invested: f64,
    pub annualized_capital: f64,
    pub annual_operation: Option<f64>,
    pub objective: Option<f64>,
    pub within_budget: bool,
}

/// One line of the solve log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub decision: Vec<usize>,
    pub invested: f64,
    pub within_budget: bool,
    pub z: Option<f64>,
    pub objective: Option<f64>,
    pub status: RecordStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Evaluated,
    OverBudget,
    Infeasible,
}

impl SolveRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

pub fn write_log<W: Write>(records: &[SolveRecord], mut out: W) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub plan: LocationPlan,
    pub log: Vec<SolveRecord>,
    /// Decisions whose routing level was solved.
    pub evaluated: usize,
    pub baseline_objective: Option<f64>,
}

/// Borrows the instance when every flow-carrying pair already has an
/// itinerary, otherwise derives them.
pub fn prepared(inst: &Instance) -> Result<Cow<'_, Instance>, ItineraryError> {
    if inst.is_routable() {
        Ok(Cow::Borrowed(inst))
    } else {
        inst.derive_itineraries().map(Cow::Owned)
    }
}

fn evaluate_prepared(
    inst: &Instance,
    decision: InvestmentDecision,
    config: &UpperSolveConfig,
) -> Result<LocationPlan, SolveError> {
    let annualized_capital = annualized_investment(inst, &decision);
    let within_budget = budget_feasible(inst, &decision);
    let invested = decision.invested(inst);
    let scn = Scenario::new(inst, decision);
    let tcs = solve_tcs(&scn, &config.lower)?;
    let econ = inst.economics();
    let annual_operation = tcs
        .feasible
        .then_some(econ.days_per_year * econ.car_hour_value * tcs.cost.z_total);
    Ok(LocationPlan {
        decision: scn.decision().clone(),
        objective: annual_operation.map(|op| annualized_capital + op),
        tcs,
        invested,
        annualized_capital,
        annual_operation,
        within_budget,
    })
}

/// Solves the routing level for `decision` and prices it. Over-budget
/// decisions are evaluated and flagged, not rejected.
pub fn evaluate_decision(
    inst: &Instance,
    decision: &InvestmentDecision,
    config: &UpperSolveConfig,
) -> Result<LocationPlan, SolveError> {
    let inst = prepared(inst)?;
    evaluate_prepared(&inst, decision.clone(), config)
}

fn record_for(inst: &Instance, vector: Vec<usize>, plan: Option<&LocationPlan>) -> SolveRecord {
    match plan {
        None => {
            let d = InvestmentDecision::from_vector(inst, &vector)
                .expect("decoded decisions are valid");
            SolveRecord {
                invested: d.invested(inst),
                decision: vector,
                within_budget: false,
                z: None,
                objective: None,
                status: RecordStatus::OverBudget,
            }
        }
        Some(p) => SolveRecord {
            decision: vector,
            invested: p.invested,
            within_budget: p.within_budget,
            z: p.tcs.feasible.then_some(p.tcs.cost.z_total),
            objective: p.objective,
            status: if p.objective.is_some() {
                RecordStatus::Evaluated
            } else {
                RecordStatus::Infeasible
            },
        },
    }
}

/// Mixed-radix decoding: the first potential node is the most significant
/// digit, so index order is lexicographic decision order.
fn decode(mut index: u64, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for (slot, &r) in out.iter_mut().zip(radix).rev() {
        *slot = (index % r as u64) as usize;
        index /= r as u64;
    }
    out
}

/// Searches the investment decisions.
///
/// `Enumerate` visits every decision (in parallel when a thread pool is
/// available) and keeps the lowest objective, ties going to the
/// lexicographically smallest decision vector. `Anneal` walks single-node plan
/// changes from the no-investment baseline, rejecting over-budget moves, with
/// geometric cooling. Both modes evaluate the baseline, so the result is never
/// worse than it when it is feasible.
pub fn solve(inst: &Instance, config: &UpperSolveConfig) -> Result<SolveOutcome, SolveError> {
    let inst = prepared(inst)?;
    let inst: &Instance = &inst;
    let radix: Vec<usize> = inst
        .potential_nodes()
        .into_iter()
        .map(|k| inst.node(k).plans.len() + 1)
        .collect();

    let (best, log, evaluated, baseline_objective) = match config.mode {
        UpperMode::Enumerate => {
            let count = count_investment_combinations(inst, true);
            if count > BigUint::from(config.enumerate_limit) {
                return Err(SolveError::EnumerateLimit {
                    count,
                    limit: config.enumerate_limit,
                });
            }
            let total: u64 = count.try_into().expect("bounded by the u64 limit");
            let rows: Vec<(SolveRecord, Option<f64>)> = (0..total)
                .into_par_iter()
                .map(|idx| -> Result<_, SolveError> {
                    let vector = decode(idx, &radix);
                    let decision = InvestmentDecision::from_vector(inst, &vector)?;
                    if !budget_feasible(inst, &decision) {
                        return Ok((record_for(inst, vector, None), None));
                    }
                    let plan = evaluate_prepared(inst, decision, config)?;
                    Ok((record_for(inst, vector, Some(&plan)), plan.objective))
                })
                .collect::<Result<_, _>>()?;
            let evaluated = rows
                .iter()
                .filter(|(r, _)| r.status != RecordStatus::OverBudget)
                .count();
            let baseline = rows[0].1;
            let best = rows
                .iter()
                .enumerate()
                .filter_map(|(i, (_, obj))| obj.map(|o| (o, i)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, i)| rows[i].0.decision.clone());
            let log = rows.into_iter().map(|(r, _)| r).collect();
            (best, log, evaluated, baseline)
        }
        UpperMode::Anneal => anneal(inst, &radix, config)?,
    };

    let Some(best) = best else {
        return Err(SolveError::NoFeasibleDecision { evaluated });
    };
    let decision = InvestmentDecision::from_vector(inst, &best)?;
    let plan = evaluate_prepared(inst, decision, config)?;
    Ok(SolveOutcome {
        plan,
        log,
        evaluated,
        baseline_objective,
    })
}

type SearchResult = (Option<Vec<usize>>, Vec<SolveRecord>, usize, Option<f64>);

fn anneal(
    inst: &Instance,
    radix: &[usize],
    config: &UpperSolveConfig,
) -> Result<SearchResult, SolveError> {
    let mut cache: HashMap<Vec<usize>, Option<f64>> = HashMap::new();
    let mut log = Vec::new();
    let mut evaluated = 0;
    let mut objective_of =
        |vector: &[usize], log: &mut Vec<SolveRecord>| -> Result<Option<f64>, SolveError> {
            if let Some(&o) = cache.get(vector) {
                return Ok(o);
            }
            let decision = InvestmentDecision::from_vector(inst, vector)?;
            let obj = if budget_feasible(inst, &decision) {
                let plan = evaluate_prepared(inst, decision, config)?;
                evaluated += 1;
                log.push(record_for(inst, vector.to_vec(), Some(&plan)));
                plan.objective
            } else {
                log.push(record_for(inst, vector.to_vec(), None));
                None
            };
            cache.insert(vector.to_vec(), obj);
            Ok(obj)
        };

    let a = &config.anneal;
    let mut rng = ChaCha8Rng::seed_from_u64(a.rng_seed);
    let mut current = vec![0; radix.len()];
    let baseline = objective_of(&current, &mut log)?;
    let mut current_obj = baseline;
    let mut best: Option<(f64, Vec<usize>)> = baseline.map(|o| (o, current.clone()));
    let mut temp = a.initial_temp;

    let movable: Vec<usize> = (0..radix.len()).filter(|&i| radix[i] > 1).collect();
    if !movable.is_empty() {
        for _ in 0..a.steps {
            let slot = movable[rng.random_range(0..movable.len())];
            let mut plan = rng.random_range(0..radix[slot] - 1);
            if plan >= current[slot] {
                plan += 1;
            }
            let mut candidate = current.clone();
            candidate[slot] = plan;
            let obj = objective_of(&candidate, &mut log)?;
            let u: f64 = rng.random();
            temp *= a.cooling_rate;
            let Some(obj) = obj else { continue };
            let accept = match current_obj {
                None => true,
                Some(cur) => obj <= cur || (temp > 0.0 && u < (-(obj - cur) / temp).exp()),
            };
            let improves = match &best {
                None => true,
                Some((b, bv)) => obj < *b || (obj == *b && candidate < *bv),
            };
            if improves {
                best = Some((obj, candidate.clone()));
            }
            if accept {
                current = candidate;
                current_obj = Some(obj);
            }
        }
    }
    Ok((best.map(|(_, v)| v), log, evaluated, baseline))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::tcs::TcsMode;

    #[test]
    fn crf_examples() {
        assert!((capital_recovery_factor(0.1, 1).unwrap() - 1.1).abs() < 1e-12);
        assert!((capital_recovery_factor(0.1, 20).unwrap() - 0.117_459_624_1).abs() < 1e-9);
        assert_eq!(capital_recovery_factor(0.0, 5).unwrap(), 0.2);
        assert!(matches!(
            capital_recovery_factor(0.1, 0),
            Err(SolveError::ZeroLifetime)
        ));
    }

    #[test]
    fn crf_properties() {
        for rate in [0.01, 0.05, 0.1, 0.3] {
            let mut prev = f64::INFINITY;
            for t in 1..=100 {
                let v = capital_recovery_factor(rate, t).unwrap();
                assert!(v < prev, "not decreasing at {rate} {t}");
                assert!(v > rate);
                prev = v;
            }
        }
        for rate in [0.05, 0.1] {
            assert!((capital_recovery_factor(rate, 1_000_000).unwrap() - rate).abs() < 1e-9);
        }
    }

    #[test]
    fn annualized_examples() {
        let inst = fixtures::line3_potential_b(5000.0);
        assert_eq!(
            annualized_investment(&inst, &InvestmentDecision::baseline(&inst)),
            0.0
        );
        let built = InvestmentDecision::from_vector(&inst, &[1]).unwrap();
        let expected = 1000.0 * capital_recovery_factor(0.1, 20).unwrap();
        assert_eq!(annualized_investment(&inst, &built), expected);
    }

    #[test]
    fn budget_boundary_is_inclusive() {
        let inst = fixtures::line3_potential_b(1000.0);
        let built = InvestmentDecision::from_vector(&inst, &[1]).unwrap();
        assert!(budget_feasible(&inst, &built));
        assert!(budget_feasible(&inst, &InvestmentDecision::baseline(&inst)));
        let inst = fixtures::line3_potential_b(999.0);
        assert!(!budget_feasible(&inst, &built));
    }

    #[test]
    fn baseline_objective_of_line() {
        let inst = fixtures::line3();
        let plan = evaluate_decision(
            &inst,
            &InvestmentDecision::baseline(&inst),
            &UpperSolveConfig::default(),
        )
        .unwrap();
        assert_eq!(plan.tcs.cost.z_total, 1200.0);
        assert_eq!(plan.objective, Some(438_000.0));
        assert_eq!(plan.annualized_capital, 0.0);
    }

    #[test]
    fn zero_demand_objective_is_zero() {
        let inst = fixtures::empty_demand();
        let out = solve(&inst, &UpperSolveConfig::default()).unwrap();
        assert_eq!(out.plan.objective, Some(0.0));
        assert!(out.plan.decision.choices().is_empty());
    }

    #[test]
    fn no_potential_nodes_returns_baseline() {
        let inst = fixtures::line3();
        for mode in [UpperMode::Enumerate, UpperMode::Anneal] {
            let config = UpperSolveConfig {
                mode,
                ..Default::default()
            };
            let out = solve(&inst, &config).unwrap();
            assert!(out.plan.decision.choices().is_empty());
            assert_eq!(out.plan.objective, Some(438_000.0));
            assert_eq!(out.log.len(), 1);
        }
    }

    #[test]
    fn zero_budget_forces_no_investment() {
        let inst = fixtures::line3_potential_b(0.0);
        let out = solve(&inst, &UpperSolveConfig::default()).unwrap();
        assert_eq!(out.plan.decision.vector(), vec![0]);
        // only the direct routing fits B's 50 cars/day
        assert_eq!(out.plan.tcs.cost.z_total, 1500.0);
        assert_eq!(out.log[1].status, RecordStatus::OverBudget);
    }

    #[test]
    fn plan_chosen_iff_cheaper_than_savings() {
        // with the plan Z drops from 1500 to 1200: 365 * 300 per year saved
        let crf = capital_recovery_factor(0.1, 20).unwrap();
        let threshold = 365.0 * 300.0 / crf;
        for (cost, expect) in [(threshold * 0.99, 1), (threshold * 1.01, 0)] {
            let inst = fixtures::line3_potential_b_cost(1e9, cost);
            for mode in [UpperMode::Enumerate, UpperMode::Anneal] {
                let config = UpperSolveConfig {
                    mode,
                    ..Default::default()
                };
                let out = solve(&inst, &config).unwrap();
                assert_eq!(
                    out.plan.decision.vector(),
                    vec![expect],
                    "cost {cost} {mode:?}"
                );
                let base: f64 = 365.0 * 1500.0;
                let built = crf * cost + 365.0 * 1200.0;
                assert_eq!(out.plan.objective, Some(base.min(built)));
            }
        }
    }

    #[test]
    fn enumerate_limit_is_enforced() {
        let inst = fixtures::line3_potential_b(0.0);
        let config = UpperSolveConfig {
            enumerate_limit: 1,
            ..Default::default()
        };
        assert!(matches!(
            solve(&inst, &config),
            Err(SolveError::EnumerateLimit { .. })
        ));
    }

    #[test]
    fn budget_monotonicity_and_baseline_dominance() {
        for seed in 0..15 {
            let inst = fixtures::random_small(seed);
            let mut prev: Option<f64> = None;
            for budget in [0.0, 500.0, 1500.0, 4000.0] {
                let inst = inst.with_budget(budget);
                let config = UpperSolveConfig::default();
                let Ok(out) = solve(&inst, &config) else {
                    continue;
                };
                let obj = out.plan.objective.unwrap();
                if let Some(p) = prev {
                    assert!(obj <= p, "seed {seed} budget {budget}");
                }
                if let Some(b) = out.baseline_objective {
                    assert!(obj <= b);
                }
                let anneal = solve(
                    &inst,
                    &UpperSolveConfig {
                        mode: UpperMode::Anneal,
                        ..Default::default()
                    },
                )
                .unwrap();
                assert!(anneal.plan.objective.unwrap() >= obj - 1e-9);
                if let Some(b) = anneal.baseline_objective {
                    assert!(anneal.plan.objective.unwrap() <= b);
                }
                prev = Some(obj);
            }
        }
    }

    #[test]
    fn enumeration_is_deterministic_across_pools() {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let mut solved = 0;
        for seed in 0..10 {
            let inst = fixtures::random_small(seed).with_budget(3000.0);
            for tcs in [TcsMode::Exact, TcsMode::Heuristic] {
                let config = UpperSolveConfig {
                    lower: TcsSolveConfig {
                        mode: tcs,
                        ..Default::default()
                    },
                    ..Default::default()
                };
                let a = one.install(|| solve(&inst, &config));
                let b = four.install(|| solve(&inst, &config));
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        assert_eq!(a, b);
                        solved += 1;
                    }
                    (a, b) => assert_eq!(format!("{a:?}"), format!("{b:?}")),
                }
            }
        }
        assert!(solved > 0);
    }

    #[test]
    fn decode_is_lexicographic() {
        let radix = [2, 3];
        let all: Vec<_> = (0..6).map(|i| decode(i, &radix)).collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(all[5], vec![1, 2]);
    }
}
