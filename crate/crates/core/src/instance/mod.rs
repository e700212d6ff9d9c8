//! Problem instances: nodes, yard attributes, investment plans, itineraries,
//! demands and economic parameters.
//!
//! An [`Instance`] is immutable once built. Nodes are stored sorted by their
//! identifier, so [`NodeIdx`] order coincides with identifier order and every
//! "lexicographic by node ID" tie-break in the solvers reduces to index order.

mod format;
mod itinerary;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

pub use format::{
    parse_instance, serialize_instance, AttrsDoc, DemandDoc, EconomicsDoc, EdgeDoc, InstanceDoc,
    ItineraryDoc, NodeDoc, ParseError, PlanDoc, TrainSizeDoc,
};
pub use itinerary::ItineraryError;
pub use validate::{validate_instance, Issue, Rule, Severity, ValidationReport};

/// Position of a node in the instance's id-sorted node list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIdx(pub usize);

/// Ordered (origin, destination) pair.
pub type Pair = (NodeIdx, NodeIdx);

/// Pre-investment yard attributes.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct YardAttributes {
    /// Car-hours of accumulation delay per railcar of train size.
    pub accumulation_param: f64,
    /// Classification capacity, railcars/day.
    pub capacity_total: f64,
    /// Capacity reserved for local trains, railcars/day.
    pub capacity_local: f64,
    pub tracks_total: u32,
    pub tracks_local: u32,
    /// Reclassification cost, car-hours per railcar.
    pub reclass_cost: f64,
}

/// A building or improvement plan. Plan 0 (no investment) is implicit and
/// never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct InvestmentPlan {
    pub cost: f64,
    pub lifetime_years: u32,
    pub reclass_cost_after: f64,
    pub capacity_gain: f64,
    pub tracks_gain: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub is_original_yard: bool,
    pub is_potential: bool,
    pub attrs: YardAttributes,
    pub plans: Vec<InvestmentPlan>,
}

impl Node {
    /// Potential node that is not an existing yard.
    pub fn is_new_site(&self) -> bool {
        self.is_potential && !self.is_original_yard
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demand {
    pub origin: NodeIdx,
    pub destination: NodeIdx,
    /// Railcars/day.
    pub volume: f64,
}

/// Intermediate yards a flow passes between its endpoints, in travel order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Itinerary {
    pub via: Vec<NodeIdx>,
}

/// Undirected physical line used to derive itineraries.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: NodeIdx,
    pub b: NodeIdx,
    pub length: f64,
}

/// Track-demand function mapping a daily service flow to classification
/// tracks.
#[derive(Clone, Debug, PartialEq)]
pub enum TrackFn {
    /// `D / 200`, possibly fractional.
    Linear,
    /// Smallest `n` with `D <= a_n`. `None` uses the unbounded default
    /// `a_n = 200 n`.
    Step { thresholds: Option<Vec<f64>> },
}

impl TrackFn {
    pub fn step_default() -> Self {
        TrackFn::Step { thresholds: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EconomicParams {
    pub budget: f64,
    pub discount_rate: f64,
    /// Currency per car-hour.
    pub car_hour_value: f64,
    /// Operating days per year used to annualize the daily cost.
    pub days_per_year: f64,
    pub train_size_default: f64,
    pub train_size_overrides: BTreeMap<Pair, f64>,
    pub track_fn: TrackFn,
}

impl EconomicParams {
    /// Train size `m_ij` for a service from `origin` to `destination`.
    pub fn train_size(&self, origin: NodeIdx, destination: NodeIdx) -> f64 {
        self.train_size_overrides
            .get(&(origin, destination))
            .copied()
            .unwrap_or(self.train_size_default)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    nodes: Vec<Node>,
    index: HashMap<String, NodeIdx>,
    demands: Vec<Demand>,
    itineraries: BTreeMap<Pair, Itinerary>,
    edges: Vec<Edge>,
    economics: EconomicParams,
}

impl Instance {
    /// Assembles an instance from nodes already sorted by id, with every
    /// reference pointing at sorted positions. Callers normally go through
    /// [`Instance::from_doc`].
    pub(crate) fn from_parts(
        nodes: Vec<Node>,
        demands: Vec<Demand>,
        itineraries: BTreeMap<Pair, Itinerary>,
        edges: Vec<Edge>,
        economics: EconomicParams,
    ) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0].id < w[1].id));
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), NodeIdx(i)))
            .collect();
        Instance {
            nodes,
            index,
            demands,
            itineraries,
            edges,
            economics,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx.0]
    }

    pub fn id(&self, idx: NodeIdx) -> &str {
        &self.nodes[idx.0].id
    }

    pub fn node_by_id(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn itineraries(&self) -> &BTreeMap<Pair, Itinerary> {
        &self.itineraries
    }

    pub fn itinerary(&self, origin: NodeIdx, destination: NodeIdx) -> Option<&Itinerary> {
        self.itineraries.get(&(origin, destination))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn economics(&self) -> &EconomicParams {
        &self.economics
    }

    /// Potential nodes in id order. This is the coordinate order of every
    /// decision vector.
    pub fn potential_nodes(&self) -> Vec<NodeIdx> {
        (0..self.nodes.len())
            .map(NodeIdx)
            .filter(|&i| self.nodes[i.0].is_potential)
            .collect()
    }

    /// Demand volume per (origin, destination), duplicates summed.
    pub fn demand_matrix(&self) -> BTreeMap<Pair, f64> {
        let mut out = BTreeMap::new();
        for d in &self.demands {
            *out.entry((d.origin, d.destination)).or_insert(0.0) += d.volume;
        }
        out
    }

    pub fn with_budget(&self, budget: f64) -> Instance {
        let mut out = self.clone();
        out.economics.budget = budget;
        out
    }

    pub fn with_track_fn(&self, track_fn: TrackFn) -> Instance {
        let mut out = self.clone();
        out.economics.track_fn = track_fn;
        out
    }

    /// Every pair that can carry flow: the demand pairs plus, recursively,
    /// `(k, j)` for each `k` on the itinerary of a closure pair `(i, j)`.
    ///
    /// Returns the first pair (in processing order) that has no itinerary if
    /// the closure is incomplete.
    pub fn itinerary_closure(&self) -> Result<BTreeSet<Pair>, Pair> {
        let mut closure = BTreeSet::new();
        let mut queue: BTreeSet<Pair> = self.demand_matrix().into_keys().collect();
        while let Some(pair) = queue.pop_first() {
            if !closure.insert(pair) {
                continue;
            }
            let it = self.itineraries.get(&pair).ok_or(pair)?;
            for &k in it.via.iter().filter(|&&k| k != pair.1) {
                let next = (k, pair.1);
                if !closure.contains(&next) {
                    queue.insert(next);
                }
            }
        }
        Ok(closure)
    }

    /// `true` when every closure pair has an itinerary, i.e. the instance can
    /// be handed to the flow engine without derivation.
    pub fn is_routable(&self) -> bool {
        self.itinerary_closure().is_ok()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("instance violates {count} rule(s):\n{0}", count = .0.errors().count())]
    Invalid(ValidationReport),
}

/// Parses and validates. Any error-severity validation issue rejects the
/// instance.
pub fn load_instance(text: &str) -> Result<Instance, LoadError> {
    let inst = parse_instance(text)?;
    let report = inst.validate();
    if report.is_empty() {
        Ok(inst)
    } else {
        Err(LoadError::Invalid(report))
    }
}

/// Number of investment decisions: the product over potential nodes of the
/// plan count, plus one per node when the no-investment plan is included.
pub fn count_investment_combinations(inst: &Instance, include_no_invest: bool) -> BigUint {
    let extra = usize::from(include_no_invest);
    inst.nodes()
        .iter()
        .filter(|n| n.is_potential)
        .fold(BigUint::from(1u32), |acc, n| {
            acc * BigUint::from(n.plans.len() + extra)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance_with_potential(n: usize, plans: usize) -> Instance {
        let mut text = String::from(
            "[economics]\nbudget = 0\ndiscount_rate = 0.1\ncar_hour_value = 1\ntrain_size = 50\n",
        );
        for i in 0..n.max(2) {
            text.push_str(&format!(
                "[[nodes]]\nid = \"N{i:02}\"\noriginal = true\npotential = {}\n",
                i < n
            ));
            text.push_str("attrs = { c = 10, cap_total = 100, tracks_total = 5, tau = 2 }\n");
            if i < n {
                for _ in 0..plans {
                    text.push_str(
                        "[[nodes.plans]]\ncost = 10\nlifetime = 20\ntau_after = 1\ncap_gain = 10\ntracks_gain = 1\n",
                    );
                }
            }
        }
        text.push_str("[[demands]]\norigin = \"N00\"\ndestination = \"N01\"\nvolume = 10\n");
        text.push_str("[[itineraries]]\norigin = \"N00\"\ndestination = \"N01\"\nvia = []\n");
        parse_instance(&text).unwrap()
    }

    #[test]
    fn ten_nodes_three_plans_gives_59049() {
        let inst = instance_with_potential(10, 3);
        assert_eq!(
            count_investment_combinations(&inst, false),
            BigUint::from(59049u32)
        );
        assert_eq!(
            count_investment_combinations(&inst, true),
            BigUint::from(4u32).pow(10)
        );
    }

    #[test]
    fn no_potential_nodes_is_empty_product() {
        let inst = instance_with_potential(0, 0);
        assert_eq!(
            count_investment_combinations(&inst, false),
            BigUint::from(1u32)
        );
        assert_eq!(
            count_investment_combinations(&inst, true),
            BigUint::from(1u32)
        );
    }

    #[test]
    fn two_by_two_with_no_invest_is_nine() {
        let inst = instance_with_potential(2, 2);
        assert_eq!(
            count_investment_combinations(&inst, true),
            BigUint::from(9u32)
        );
    }

    #[test]
    fn large_counts_do_not_overflow() {
        let inst = instance_with_potential(70, 4);
        let expected = BigUint::from(5u32).pow(70);
        assert_eq!(count_investment_combinations(&inst, true), expected);
        assert!(expected > BigUint::from(u128::MAX));
    }

    #[test]
    fn closure_follows_itineraries() {
        let text = r#"
[economics]
budget = 0
discount_rate = 0.1
car_hour_value = 1
train_size = 50

[[nodes]]
id = "A"
original = true
potential = false
[[nodes]]
id = "B"
original = true
potential = false
[[nodes]]
id = "C"
original = true
potential = false

[[itineraries]]
origin = "A"
destination = "C"
via = ["B"]

[[demands]]
origin = "A"
destination = "C"
volume = 10
"#;
        let inst = parse_instance(text).unwrap();
        let a = inst.node_by_id("A").unwrap();
        let b = inst.node_by_id("B").unwrap();
        let c = inst.node_by_id("C").unwrap();
        assert_eq!(inst.itinerary_closure(), Err((b, c)));
        let derived = inst.derive_itineraries().unwrap();
        let closure = derived.itinerary_closure().unwrap();
        assert_eq!(
            closure.into_iter().collect::<Vec<_>>(),
            vec![(a, c), (b, c)]
        );
        assert!(derived.itinerary(b, c).unwrap().via.is_empty());
    }
}
