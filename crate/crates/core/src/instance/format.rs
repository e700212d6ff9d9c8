//! TOML instance files.
//!
//! ```toml
//! [economics]
//! budget = 5000.0
//! discount_rate = 0.1
//! car_hour_value = 1.0
//! days_per_year = 365.0
//! train_size = 50.0
//! track_fn = "step"              # or "linear"
//! step_thresholds = [200, 400]   # optional, default a_n = 200 n
//!
//! [[nodes]]
//! id = "B"
//! original = true
//! potential = true
//! attrs = { c = 10, cap_total = 300, cap_local = 20, tracks_total = 8, tracks_local = 2, tau = 2.5 }
//! [[nodes.plans]]
//! cost = 1000
//! lifetime = 20
//! tau_after = 1.5
//! cap_gain = 200
//! tracks_gain = 4
//!
//! [[edges]]                      # optional
//! from = "A"
//! to = "B"
//! length = 120
//!
//! [[itineraries]]                # optional
//! origin = "A"
//! destination = "C"
//! via = ["B"]
//!
//! [[demands]]
//! origin = "A"
//! destination = "C"
//! volume = 100
//! ```
//!
//! Serialization goes through the same document structs, so key order is
//! fixed and floats render in shortest round-trip form.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Demand, EconomicParams, Edge, Instance, InvestmentPlan, Itinerary, Node, NodeIdx, TrackFn,
    YardAttributes,
};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("{0}")]
    Syntax(String),
    #[error("empty node id at nodes[{0}]")]
    EmptyNodeId(usize),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{id}` referenced by {location}")]
    UnknownNode { id: String, location: String },
    #[error("non-finite number in {0}")]
    NonFinite(String),
    #[error("duplicate itinerary for {origin} -> {destination}")]
    DuplicateItinerary { origin: String, destination: String },
    #[error("duplicate train size override for {origin} -> {destination}")]
    DuplicateOverride { origin: String, destination: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub economics: EconomicsDoc,
    pub nodes: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub itineraries: Vec<ItineraryDoc>,
    #[serde(default)]
    pub demands: Vec<DemandDoc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackFnName {
    Linear,
    #[default]
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicsDoc {
    pub budget: f64,
    pub discount_rate: f64,
    pub car_hour_value: f64,
    #[serde(default = "default_days")]
    pub days_per_year: f64,
    pub train_size: f64,
    #[serde(default)]
    pub track_fn: TrackFnName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_size_overrides: Vec<TrainSizeDoc>,
}

fn default_days() -> f64 {
    365.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSizeDoc {
    pub origin: String,
    pub destination: String,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub original: bool,
    pub potential: bool,
    #[serde(default)]
    pub attrs: AttrsDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plans: Vec<PlanDoc>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttrsDoc {
    pub c: f64,
    pub cap_total: f64,
    pub cap_local: f64,
    pub tracks_total: u32,
    pub tracks_local: u32,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    pub cost: f64,
    pub lifetime: u32,
    pub tau_after: f64,
    pub cap_gain: f64,
    pub tracks_gain: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItineraryDoc {
    pub origin: String,
    pub destination: String,
    pub via: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandDoc {
    pub origin: String,
    pub destination: String,
    pub volume: f64,
}

/// Parses an instance file. Only syntax and cross-references are checked
/// here; value invariants are reported by
/// [`validate_instance`](super::validate_instance).
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let doc: InstanceDoc = toml::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    Instance::from_doc(doc)
}

pub fn serialize_instance(inst: &Instance) -> String {
    toml::to_string(&inst.to_doc()).expect("instance documents always serialize")
}

fn finite(v: f64, location: impl FnOnce() -> String) -> Result<f64, ParseError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseError::NonFinite(location()))
    }
}

struct Resolver {
    index: HashMap<String, NodeIdx>,
}

impl Resolver {
    fn get(&self, id: &str, location: impl FnOnce() -> String) -> Result<NodeIdx, ParseError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| ParseError::UnknownNode {
                id: id.to_string(),
                location: location(),
            })
    }
}

impl Instance {
    pub fn from_doc(doc: InstanceDoc) -> Result<Instance, ParseError> {
        for (i, n) in doc.nodes.iter().enumerate() {
            if n.id.is_empty() {
                return Err(ParseError::EmptyNodeId(i));
            }
        }
        let mut sorted: Vec<&NodeDoc> = doc.nodes.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(ParseError::DuplicateNode(w[0].id.clone()));
        }
        let resolver = Resolver {
            index: sorted
                .iter()
                .enumerate()
                .map(|(i, n)| (n.id.clone(), NodeIdx(i)))
                .collect(),
        };

        let mut nodes = Vec::with_capacity(sorted.len());
        for n in sorted {
            let at = |field: &str| {
                let id = n.id.clone();
                let field = field.to_string();
                move || format!("nodes[{id}].{field}")
            };
            let a = &n.attrs;
            let attrs = YardAttributes {
                accumulation_param: finite(a.c, at("attrs.c"))?,
                capacity_total: finite(a.cap_total, at("attrs.cap_total"))?,
                capacity_local: finite(a.cap_local, at("attrs.cap_local"))?,
                tracks_total: a.tracks_total,
                tracks_local: a.tracks_local,
                reclass_cost: finite(a.tau, at("attrs.tau"))?,
            };
            let mut plans = Vec::with_capacity(n.plans.len());
            for (p, plan) in n.plans.iter().enumerate() {
                let at = |field: &str| {
                    let id = n.id.clone();
                    let field = field.to_string();
                    move || format!("nodes[{id}].plans[{}].{field}", p + 1)
                };
                plans.push(InvestmentPlan {
                    cost: finite(plan.cost, at("cost"))?,
                    lifetime_years: plan.lifetime,
                    reclass_cost_after: finite(plan.tau_after, at("tau_after"))?,
                    capacity_gain: finite(plan.cap_gain, at("cap_gain"))?,
                    tracks_gain: plan.tracks_gain,
                });
            }
            nodes.push(Node {
                id: n.id.clone(),
                is_original_yard: n.original,
                is_potential: n.potential,
                attrs,
                plans,
            });
        }

        let mut edges = Vec::with_capacity(doc.edges.len());
        for (i, e) in doc.edges.iter().enumerate() {
            edges.push(Edge {
                a: resolver.get(&e.from, || format!("edges[{i}].from"))?,
                b: resolver.get(&e.to, || format!("edges[{i}].to"))?,
                length: finite(e.length, || format!("edges[{i}].length"))?,
            });
        }

        let mut itineraries = BTreeMap::new();
        for (i, it) in doc.itineraries.iter().enumerate() {
            let origin = resolver.get(&it.origin, || format!("itineraries[{i}].origin"))?;
            let destination =
                resolver.get(&it.destination, || format!("itineraries[{i}].destination"))?;
            let via = it
                .via
                .iter()
                .enumerate()
                .map(|(v, id)| resolver.get(id, || format!("itineraries[{i}].via[{v}]")))
                .collect::<Result<Vec<_>, _>>()?;
            if itineraries
                .insert((origin, destination), Itinerary { via })
                .is_some()
            {
                return Err(ParseError::DuplicateItinerary {
                    origin: it.origin.clone(),
                    destination: it.destination.clone(),
                });
            }
        }

        let mut demands = Vec::with_capacity(doc.demands.len());
        for (i, d) in doc.demands.iter().enumerate() {
            demands.push(Demand {
                origin: resolver.get(&d.origin, || format!("demands[{i}].origin"))?,
                destination: resolver
                    .get(&d.destination, || format!("demands[{i}].destination"))?,
                volume: finite(d.volume, || format!("demands[{i}].volume"))?,
            });
        }

        let e = &doc.economics;
        let mut overrides = BTreeMap::new();
        for (i, o) in e.train_size_overrides.iter().enumerate() {
            let origin = resolver.get(&o.origin, || {
                format!("economics.train_size_overrides[{i}].origin")
            })?;
            let destination = resolver.get(&o.destination, || {
                format!("economics.train_size_overrides[{i}].destination")
            })?;
            let size = finite(o.size, || {
                format!("economics.train_size_overrides[{i}].size")
            })?;
            if overrides.insert((origin, destination), size).is_some() {
                return Err(ParseError::DuplicateOverride {
                    origin: o.origin.clone(),
                    destination: o.destination.clone(),
                });
            }
        }
        let track_fn = match e.track_fn {
            TrackFnName::Linear => TrackFn::Linear,
            TrackFnName::Step => {
                if let Some(t) = &e.step_thresholds {
                    for (i, &a) in t.iter().enumerate() {
                        finite(a, || format!("economics.step_thresholds[{i}]"))?;
                    }
                }
                TrackFn::Step {
                    thresholds: e.step_thresholds.clone(),
                }
            }
        };
        let economics = EconomicParams {
            budget: finite(e.budget, || "economics.budget".into())?,
            discount_rate: finite(e.discount_rate, || "economics.discount_rate".into())?,
            car_hour_value: finite(e.car_hour_value, || "economics.car_hour_value".into())?,
            days_per_year: finite(e.days_per_year, || "economics.days_per_year".into())?,
            train_size_default: finite(e.train_size, || "economics.train_size".into())?,
            train_size_overrides: overrides,
            track_fn,
        };

        Ok(Instance::from_parts(
            nodes,
            demands,
            itineraries,
            edges,
            economics,
        ))
    }

    pub fn to_doc(&self) -> InstanceDoc {
        let id = |i: NodeIdx| self.id(i).to_string();
        let e = self.economics();
        let (track_fn, step_thresholds) = match &e.track_fn {
            TrackFn::Linear => (TrackFnName::Linear, None),
            TrackFn::Step { thresholds } => (TrackFnName::Step, thresholds.clone()),
        };
        InstanceDoc {
            economics: EconomicsDoc {
                budget: e.budget,
                discount_rate: e.discount_rate,
                car_hour_value: e.car_hour_value,
                days_per_year: e.days_per_year,
                train_size: e.train_size_default,
                track_fn,
                step_thresholds,
                train_size_overrides: e
                    .train_size_overrides
                    .iter()
                    .map(|(&(o, d), &size)| TrainSizeDoc {
                        origin: id(o),
                        destination: id(d),
                        size,
                    })
                    .collect(),
            },
            nodes: self
                .nodes()
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    original: n.is_original_yard,
                    potential: n.is_potential,
                    attrs: AttrsDoc {
                        c: n.attrs.accumulation_param,
                        cap_total: n.attrs.capacity_total,
                        cap_local: n.attrs.capacity_local,
                        tracks_total: n.attrs.tracks_total,
                        tracks_local: n.attrs.tracks_local,
                        tau: n.attrs.reclass_cost,
                    },
                    plans: n
                        .plans
                        .iter()
                        .map(|p| PlanDoc {
                            cost: p.cost,
                            lifetime: p.lifetime_years,
                            tau_after: p.reclass_cost_after,
                            cap_gain: p.capacity_gain,
                            tracks_gain: p.tracks_gain,
                        })
                        .collect(),
                })
                .collect(),
            edges: self
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    from: id(e.a),
                    to: id(e.b),
                    length: e.length,
                })
                .collect(),
            itineraries: self
                .itineraries()
                .iter()
                .map(|(&(o, d), it)| ItineraryDoc {
                    origin: id(o),
                    destination: id(d),
                    via: it.via.iter().map(|&v| id(v)).collect(),
                })
                .collect(),
            demands: self
                .demands()
                .iter()
                .map(|d| DemandDoc {
                    origin: id(d.origin),
                    destination: id(d.destination),
                    volume: d.volume,
                })
                .collect(),
        }
    }
}
