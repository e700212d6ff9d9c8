use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use super::{Instance, Itinerary, NodeIdx, Pair};

#[derive(Debug, Error, PartialEq)]
pub enum ItineraryError {
    #[error("no path from {origin} to {destination}")]
    Disconnected { origin: String, destination: String },
    #[error("edge {a} - {b} has negative length {length}")]
    NegativeEdge { a: String, b: String, length: f64 },
}

/// Shortest-path label: total length, then the node sequence itself.
#[derive(Clone, Debug)]
struct Label {
    dist: f64,
    path: Vec<NodeIdx>,
}

impl Label {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_key(other) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Label {
    // reversed for a min-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.cmp_key(self)
    }
}

/// Dijkstra over (length, node sequence) labels. Node sequences compare in
/// id order, so the surviving label at each node is the lexicographically
/// smallest among its shortest paths; prefixes of such a path are themselves
/// lexicographically smallest, which keeps label setting exact.
fn shortest_paths(adj: &[Vec<(NodeIdx, f64)>], src: NodeIdx) -> Vec<Option<Label>> {
    let mut best: Vec<Option<Label>> = vec![None; adj.len()];
    let mut settled = vec![false; adj.len()];
    let mut heap = BinaryHeap::new();
    let start = Label {
        dist: 0.0,
        path: vec![src],
    };
    best[src.0] = Some(start.clone());
    heap.push(start);
    while let Some(label) = heap.pop() {
        let u = *label.path.last().unwrap();
        if settled[u.0] {
            continue;
        }
        settled[u.0] = true;
        for &(v, len) in &adj[u.0] {
            if settled[v.0] {
                continue;
            }
            let mut path = label.path.clone();
            path.push(v);
            let cand = Label {
                dist: label.dist + len,
                path,
            };
            let better = match &best[v.0] {
                None => true,
                Some(cur) => cand.cmp_key(cur) == Ordering::Less,
            };
            if better {
                best[v.0] = Some(cand.clone());
                heap.push(cand);
            }
        }
    }
    best
}

impl Instance {
    /// Fills in an itinerary for every pair that can carry flow.
    ///
    /// With physical edges, a missing itinerary is the shortest path by edge
    /// length, ties broken by the lexicographically smallest node-id sequence.
    /// Without edges, a relay pair `(k, j)` inherits the tail after `k` of the
    /// itinerary that first induced it. Explicit itineraries are kept as is.
    pub fn derive_itineraries(&self) -> Result<Instance, ItineraryError> {
        for e in self.edges() {
            if e.length < 0.0 {
                return Err(ItineraryError::NegativeEdge {
                    a: self.id(e.a).to_string(),
                    b: self.id(e.b).to_string(),
                    length: e.length,
                });
            }
        }
        let mut adj: Vec<Vec<(NodeIdx, f64)>> = vec![Vec::new(); self.nodes().len()];
        for e in self.edges() {
            if e.a != e.b {
                adj[e.a.0].push((e.b, e.length));
                adj[e.b.0].push((e.a, e.length));
            }
        }
        for list in &mut adj {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }

        let mut trees: BTreeMap<NodeIdx, Vec<Option<Label>>> = BTreeMap::new();
        let mut itineraries = self.itineraries().clone();
        let mut seen: BTreeSet<Pair> = BTreeSet::new();
        let mut queue: BTreeSet<Pair> = self.demand_matrix().into_keys().collect();
        while let Some(pair) = queue.pop_first() {
            if !seen.insert(pair) {
                continue;
            }
            let (origin, destination) = pair;
            if !itineraries.contains_key(&pair) {
                if origin == destination {
                    // self-loop demands are a validation error, not a routing one
                    itineraries.insert(pair, Itinerary::default());
                    continue;
                }
                let tree = trees
                    .entry(origin)
                    .or_insert_with(|| shortest_paths(&adj, origin));
                let label =
                    tree[destination.0]
                        .as_ref()
                        .ok_or_else(|| ItineraryError::Disconnected {
                            origin: self.id(origin).to_string(),
                            destination: self.id(destination).to_string(),
                        })?;
                let via = label.path[1..label.path.len() - 1].to_vec();
                itineraries.insert(pair, Itinerary { via });
            }
            let via = itineraries[&pair].via.clone();
            for (pos, &k) in via.iter().enumerate() {
                let relay = (k, destination);
                if k == destination {
                    continue;
                }
                if !itineraries.contains_key(&relay) && self.edges().is_empty() {
                    let tail: Vec<NodeIdx> = via[pos + 1..]
                        .iter()
                        .copied()
                        .take_while(|&v| v != k)
                        .collect();
                    itineraries.insert(relay, Itinerary { via: tail });
                }
                if !seen.contains(&relay) {
                    queue.insert(relay);
                }
            }
        }

        Ok(Instance::from_parts(
            self.nodes().to_vec(),
            self.demands().to_vec(),
            itineraries,
            self.edges().to_vec(),
            self.economics().clone(),
        ))
    }
}
