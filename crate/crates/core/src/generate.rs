//! Seeded synthetic instances.
//!
//! Nodes `0` and `1` are always existing yards; other potential nodes are new
//! sites with probability one half. Demands run only between existing yards.
//! Every origin gets enough classification tracks for the all-direct routing
//! plus room for one more service, and every existing yard gets
//! `capacity_slack` times the largest demand volume of reclassification
//! capacity, so with `capacity_slack >= 1` any single demand can be relayed
//! through an existing yard on its itinerary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flow::track_demand;
use crate::instance::{
    AttrsDoc, DemandDoc, EconomicsDoc, EdgeDoc, Instance, InstanceDoc, NodeDoc, PlanDoc, TrackFn,
};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub node_count: usize,
    /// Share of nodes that receive investment plans, in [0, 1].
    pub potential_fraction: f64,
    pub plans_per_node: usize,
    /// Probability that an ordered pair of existing yards has demand, in (0, 1].
    pub demand_density: f64,
    pub capacity_slack: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            node_count: 6,
            potential_fraction: 0.5,
            plans_per_node: 2,
            demand_density: 0.3,
            capacity_slack: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("node_count must be at least 2 to carry any demand, got {0}")]
    TooFewNodes(usize),
    #[error("potential_fraction must lie in [0, 1], got {0}")]
    PotentialFraction(f64),
    #[error("demand_density must lie in (0, 1], got {0}")]
    DemandDensity(f64),
    #[error("capacity_slack must be positive and finite, got {0}")]
    CapacitySlack(f64),
    #[error("potential nodes need at least one plan")]
    NoPlans,
}

const VOLUME_STEP: f64 = 10.0;
const MAX_VOLUME_STEPS: u32 = 30;

pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance, GenerateError> {
    let n = spec.node_count;
    if n < 2 {
        return Err(GenerateError::TooFewNodes(n));
    }
    if !(0.0..=1.0).contains(&spec.potential_fraction) {
        return Err(GenerateError::PotentialFraction(spec.potential_fraction));
    }
    if !(spec.demand_density > 0.0 && spec.demand_density <= 1.0) {
        return Err(GenerateError::DemandDensity(spec.demand_density));
    }
    if !(spec.capacity_slack > 0.0 && spec.capacity_slack.is_finite()) {
        return Err(GenerateError::CapacitySlack(spec.capacity_slack));
    }
    let potential_count = (spec.potential_fraction * n as f64).round() as usize;
    if potential_count > 0 && spec.plans_per_node == 0 {
        return Err(GenerateError::NoPlans);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = (n - 1).to_string().len();
    let ids: Vec<String> = (0..n).map(|i| format!("Y{i:0width$}")).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut potential = vec![false; n];
    for &i in &order[..potential_count] {
        potential[i] = true;
    }
    let original: Vec<bool> = (0..n)
        .map(|i| i < 2 || !potential[i] || rng.random_bool(0.5))
        .collect();

    let yards: Vec<usize> = (0..n).filter(|&i| original[i]).collect();
    let mut volume = vec![vec![0.0; n]; n];
    for &i in &yards {
        for &j in &yards {
            if i != j && rng.random_bool(spec.demand_density) {
                volume[i][j] = rng.random_range(1..=MAX_VOLUME_STEPS) as f64 * VOLUME_STEP;
            }
        }
    }
    if volume.iter().flatten().all(|&v| v == 0.0) {
        volume[0][1] = rng.random_range(1..=MAX_VOLUME_STEPS) as f64 * VOLUME_STEP;
    }
    let max_volume = volume.iter().flatten().copied().fold(0.0, f64::max);
    let relay_capacity = (spec.capacity_slack * max_volume).ceil();
    let track_fn = TrackFn::step_default();
    let spare_tracks =
        track_demand(max_volume, &track_fn).expect("default steps are unbounded") as u32;

    let nodes = (0..n)
        .map(|i| {
            let c = rng.random_range(5..=15) as f64;
            let tau = rng.random_range(2..=8) as f64 * 0.5;
            let attrs = if original[i] {
                let direct: f64 = volume[i]
                    .iter()
                    .map(|&v| track_demand(v, &track_fn).expect("unbounded"))
                    .sum();
                let cap_local = rng.random_range(0..=5) as f64 * 10.0;
                let tracks_local = rng.random_range(0..=2);
                AttrsDoc {
                    c,
                    cap_total: cap_local + relay_capacity,
                    cap_local,
                    tracks_total: tracks_local
                        + direct as u32
                        + spare_tracks
                        + rng.random_range(0..=1),
                    tracks_local,
                    tau,
                }
            } else {
                AttrsDoc {
                    c,
                    tau,
                    ..AttrsDoc::default()
                }
            };
            let plans = if potential[i] {
                (0..spec.plans_per_node)
                    .map(|_| PlanDoc {
                        cost: rng.random_range(5..=50) as f64 * 100.0,
                        lifetime: rng.random_range(10..=40),
                        tau_after: (tau * rng.random_range(5..=10) as f64 / 10.0 * 2.0).round()
                            / 2.0,
                        cap_gain: (relay_capacity * rng.random_range(5..=15) as f64 / 10.0).ceil(),
                        tracks_gain: rng.random_range(1..=3),
                    })
                    .collect()
            } else {
                Vec::new()
            };
            NodeDoc {
                id: ids[i].clone(),
                original: original[i],
                potential: potential[i],
                attrs,
                plans,
            }
        })
        .collect();

    let mut edges: Vec<EdgeDoc> = (1..n)
        .map(|i| EdgeDoc {
            from: ids[rng.random_range(0..i)].clone(),
            to: ids[i].clone(),
            length: rng.random_range(1..=10) as f64,
        })
        .collect();
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push(EdgeDoc {
                from: ids[a].clone(),
                to: ids[b].clone(),
                length: rng.random_range(1..=10) as f64,
            });
        }
    }

    let mut demands = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if volume[i][j] > 0.0 {
                demands.push(DemandDoc {
                    origin: ids[i].clone(),
                    destination: ids[j].clone(),
                    volume: volume[i][j],
                });
            }
        }
    }

    let doc = InstanceDoc {
        economics: EconomicsDoc {
            budget: potential_count as f64 * 1500.0,
            discount_rate: 0.08,
            car_hour_value: 1.0,
            days_per_year: 365.0,
            train_size: 50.0,
            track_fn: Default::default(),
            step_thresholds: None,
            train_size_overrides: Vec::new(),
        },
        nodes,
        edges,
        itineraries: Vec::new(),
        demands,
    };
    let inst = Instance::from_doc(doc).expect("generated ids are unique and referenced");
    Ok(inst
        .derive_itineraries()
        .expect("generated networks are connected with positive lengths"))
}
