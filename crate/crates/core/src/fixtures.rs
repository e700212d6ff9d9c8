//! Small instances shared by the unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{
    parse_instance, AttrsDoc, DemandDoc, EconomicsDoc, EdgeDoc, Instance, InstanceDoc, NodeDoc,
    PlanDoc,
};

pub const LINE3: &str = include_str!("../tests/data/line3.toml");

pub fn line3() -> Instance {
    parse_instance(LINE3).unwrap()
}

/// `line3` with B potential, only 50 cars/day of capacity before building,
/// and one plan (cost 1000, 20 years) adding 100.
pub fn line3_potential_b(budget: f64) -> Instance {
    line3_potential_b_cost(budget, 1000.0)
}

pub fn line3_potential_b_cost(budget: f64, cost: f64) -> Instance {
    let mut doc: InstanceDoc = toml::from_str(LINE3).unwrap();
    doc.economics.budget = budget;
    let b = doc.nodes.iter_mut().find(|n| n.id == "B").unwrap();
    b.potential = true;
    b.attrs.cap_total = 50.0;
    b.plans.push(PlanDoc {
        cost,
        lifetime: 20,
        tau_after: 2.0,
        cap_gain: 100.0,
        tracks_gain: 2,
    });
    Instance::from_doc(doc).unwrap()
}

pub fn empty_demand() -> Instance {
    let mut doc: InstanceDoc = toml::from_str(LINE3).unwrap();
    doc.demands.clear();
    Instance::from_doc(doc).unwrap()
}

/// A and B each list the other on their itinerary to D.
pub fn cyclic_itineraries() -> Instance {
    parse_instance(
        r#"
[economics]
budget = 0
discount_rate = 0.1
car_hour_value = 1
train_size = 50
[[nodes]]
id = "A"
original = true
potential = false
attrs = { c = 10, cap_total = 1000, tracks_total = 10, tau = 2 }
[[nodes]]
id = "B"
original = true
potential = false
attrs = { c = 10, cap_total = 1000, tracks_total = 10, tau = 2 }
[[nodes]]
id = "D"
original = true
potential = false
attrs = { c = 10, cap_total = 1000, tracks_total = 10, tau = 2 }
[[itineraries]]
origin = "A"
destination = "D"
via = ["B"]
[[itineraries]]
origin = "B"
destination = "D"
via = ["A"]
[[demands]]
origin = "A"
destination = "D"
volume = 10
"#,
    )
    .unwrap()
}

/// Origin O with two usable tracks and three direct services of 50.
pub fn star_origin() -> Instance {
    let mut text = String::from(
        "[economics]\nbudget = 0\ndiscount_rate = 0.1\ncar_hour_value = 1\ntrain_size = 50\n\
         [[nodes]]\nid = \"O\"\noriginal = true\npotential = false\n\
         attrs = { c = 10, cap_total = 100, tracks_total = 3, tracks_local = 1, tau = 2 }\n",
    );
    for d in ["X", "Y", "Z"] {
        text.push_str(&format!(
            "[[nodes]]\nid = \"{d}\"\noriginal = true\npotential = false\n\
             attrs = {{ c = 10, cap_total = 100, tracks_total = 5, tau = 2 }}\n\
             [[itineraries]]\norigin = \"O\"\ndestination = \"{d}\"\nvia = []\n\
             [[demands]]\norigin = \"O\"\ndestination = \"{d}\"\nvolume = 50\n"
        ));
    }
    parse_instance(&text).unwrap()
}

pub fn single_service(c: f64, m: f64) -> Instance {
    parse_instance(&format!(
        "[economics]\nbudget = 0\ndiscount_rate = 0.1\ncar_hour_value = 1\ntrain_size = {m:?}\n\
         [[nodes]]\nid = \"I\"\noriginal = true\npotential = false\n\
         attrs = {{ c = {c:?}, cap_total = 100, tracks_total = 5, tau = 2 }}\n\
         [[nodes]]\nid = \"J\"\noriginal = true\npotential = false\n\
         attrs = {{ c = {c:?}, cap_total = 100, tracks_total = 5, tau = 2 }}\n\
         [[itineraries]]\norigin = \"I\"\ndestination = \"J\"\nvia = []\n\
         [[demands]]\norigin = \"I\"\ndestination = \"J\"\nvolume = 30\n"
    ))
    .unwrap()
}

/// Up to four yards, up to six demands, derived itineraries. Capacities and
/// tracks are drawn tight enough that some routings are infeasible.
pub fn random_small_doc(seed: u64) -> InstanceDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=4usize);
    let ids: Vec<String> = (0..n).map(|i| format!("Y{i}")).collect();
    let nodes = ids
        .iter()
        .map(|id| {
            let potential = rng.random_bool(0.4);
            let tracks_total = rng.random_range(2..6u32);
            let cap_local = rng.random_range(0..=5) as f64 * 10.0;
            NodeDoc {
                id: id.clone(),
                original: true,
                potential,
                attrs: AttrsDoc {
                    c: rng.random_range(4..=12) as f64,
                    cap_total: cap_local + rng.random_range(0..=40) as f64 * 10.0,
                    cap_local,
                    tracks_total,
                    tracks_local: rng.random_range(0..2u32),
                    tau: rng.random_range(1..=8) as f64 * 0.5,
                },
                plans: if potential {
                    (0..rng.random_range(1..=2))
                        .map(|_| PlanDoc {
                            cost: rng.random_range(1..=20) as f64 * 100.0,
                            lifetime: rng.random_range(5..=40),
                            tau_after: rng.random_range(1..=4) as f64 * 0.5,
                            cap_gain: rng.random_range(1..=20) as f64 * 10.0,
                            tracks_gain: rng.random_range(0..=3),
                        })
                        .collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect::<Vec<_>>();
    let mut edges: Vec<EdgeDoc> = (1..n)
        .map(|i| EdgeDoc {
            from: ids[rng.random_range(0..i)].clone(),
            to: ids[i].clone(),
            length: rng.random_range(1..=5) as f64,
        })
        .collect();
    for _ in 0..rng.random_range(0..=2) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push(EdgeDoc {
                from: ids[a].clone(),
                to: ids[b].clone(),
                length: rng.random_range(1..=5) as f64,
            });
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let k = rng.random_range(1..=6usize).min(pairs.len());
    let mut demands = Vec::new();
    for _ in 0..k {
        let (i, j) = pairs.swap_remove(rng.random_range(0..pairs.len()));
        demands.push(DemandDoc {
            origin: ids[i].clone(),
            destination: ids[j].clone(),
            volume: rng.random_range(1..=30) as f64 * 10.0,
        });
    }
    InstanceDoc {
        economics: EconomicsDoc {
            budget: rng.random_range(0..=30) as f64 * 100.0,
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
    }
}

pub fn random_small(seed: u64) -> Instance {
    Instance::from_doc(random_small_doc(seed))
        .unwrap()
        .derive_itineraries()
        .unwrap()
}

/// Same instance as [`random_small`] with nodes, edges and demands listed in
/// reverse.
pub fn random_small_reversed(seed: u64) -> Instance {
    let mut doc = random_small_doc(seed);
    doc.nodes.reverse();
    doc.edges.reverse();
    doc.demands.reverse();
    Instance::from_doc(doc)
        .unwrap()
        .derive_itineraries()
        .unwrap()
}
