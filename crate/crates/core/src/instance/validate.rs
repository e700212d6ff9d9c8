use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Instance, ItineraryError, TrackFn};

/// Validation rule identifiers. [`Rule::id`] is the stable string printed by
/// the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    NodeRole,
    PlansOnNonPotential,
    NewSiteHasCapacity,
    CapacityLocalExceedsTotal,
    TracksLocalExceedsTotal,
    NegativeAttribute,
    InvalidPlan,
    DemandSelfLoop,
    NonPositiveVolume,
    DuplicateDemand,
    ViaContainsEndpoint,
    ViaRepeatsNode,
    UnroutableDemand,
    NegativeEdgeLength,
    InvalidEconomics,
    DemandAtNewSite,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::NodeRole => "node-role",
            Rule::PlansOnNonPotential => "plans-on-non-potential",
            Rule::NewSiteHasCapacity => "new-site-has-capacity",
            Rule::CapacityLocalExceedsTotal => "capacity-local-exceeds-total",
            Rule::TracksLocalExceedsTotal => "tracks-local-exceeds-total",
            Rule::NegativeAttribute => "negative-attribute",
            Rule::InvalidPlan => "invalid-plan",
            Rule::DemandSelfLoop => "demand-self-loop",
            Rule::NonPositiveVolume => "non-positive-volume",
            Rule::DuplicateDemand => "duplicate-demand",
            Rule::ViaContainsEndpoint => "via-contains-endpoint",
            Rule::ViaRepeatsNode => "via-repeats-node",
            Rule::UnroutableDemand => "unroutable-demand",
            Rule::NegativeEdgeLength => "negative-edge-length",
            Rule::InvalidEconomics => "invalid-economics",
            Rule::DemandAtNewSite => "demand-at-new-site",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Rule::DemandAtNewSite => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub rule: Rule,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.rule.severity() {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{tag} [{}] {}: {}",
            self.rule.id(),
            self.location,
            self.message
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    /// No error-severity issues. Warnings do not count.
    pub fn is_empty(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.rule.severity() == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.rule.severity() == Severity::Warning)
    }

    pub fn has_rule(&self, rule: Rule) -> bool {
        self.issues.iter().any(|i| i.rule == rule)
    }

    fn push(&mut self, rule: Rule, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            rule,
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl Instance {
    pub fn validate(&self) -> ValidationReport {
        validate_instance(self)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut r = ValidationReport::default();

    for n in inst.nodes() {
        let at = format!("nodes[{}]", n.id);
        if !n.is_original_yard && !n.is_potential {
            r.push(
                Rule::NodeRole,
                &at,
                "node is neither an original yard nor potential",
            );
        }
        if !n.plans.is_empty() && !n.is_potential {
            r.push(
                Rule::PlansOnNonPotential,
                &at,
                "plans listed on a non-potential node",
            );
        }
        let a = &n.attrs;
        if n.is_new_site()
            && (a.capacity_total != 0.0
                || a.capacity_local != 0.0
                || a.tracks_total != 0
                || a.tracks_local != 0)
        {
            r.push(
                Rule::NewSiteHasCapacity,
                &at,
                "new site must have zero capacity and tracks before building",
            );
        }
        for (name, v) in [
            ("c", a.accumulation_param),
            ("cap_total", a.capacity_total),
            ("cap_local", a.capacity_local),
            ("tau", a.reclass_cost),
        ] {
            if v < 0.0 {
                r.push(
                    Rule::NegativeAttribute,
                    format!("{at}.attrs.{name}"),
                    format!("{v} < 0"),
                );
            }
        }
        if a.capacity_local > a.capacity_total {
            r.push(
                Rule::CapacityLocalExceedsTotal,
                &at,
                format!(
                    "cap_local {} > cap_total {}",
                    a.capacity_local, a.capacity_total
                ),
            );
        }
        if a.tracks_local > a.tracks_total {
            r.push(
                Rule::TracksLocalExceedsTotal,
                &at,
                format!(
                    "tracks_local {} > tracks_total {}",
                    a.tracks_local, a.tracks_total
                ),
            );
        }
        for (p, plan) in n.plans.iter().enumerate() {
            let at = format!("{at}.plans[{}]", p + 1);
            let mut bad = Vec::new();
            if plan.cost < 0.0 {
                bad.push("cost < 0");
            }
            if plan.lifetime_years < 1 {
                bad.push("lifetime < 1");
            }
            if plan.reclass_cost_after < 0.0 {
                bad.push("tau_after < 0");
            }
            if plan.capacity_gain < 0.0 {
                bad.push("cap_gain < 0");
            }
            if !bad.is_empty() {
                r.push(Rule::InvalidPlan, at, bad.join(", "));
            }
        }
    }

    let mut seen_pairs = BTreeMap::new();
    for (i, d) in inst.demands().iter().enumerate() {
        let at = format!("demands[{i}]");
        if d.origin == d.destination {
            r.push(Rule::DemandSelfLoop, &at, "origin equals destination");
        }
        if d.volume <= 0.0 {
            r.push(
                Rule::NonPositiveVolume,
                &at,
                format!("volume {} <= 0", d.volume),
            );
        }
        if let Some(first) = seen_pairs.insert((d.origin, d.destination), i) {
            r.push(
                Rule::DuplicateDemand,
                &at,
                format!("same pair as demands[{first}]"),
            );
        }
        for end in [d.origin, d.destination] {
            if inst.node(end).is_new_site() {
                r.push(
                    Rule::DemandAtNewSite,
                    &at,
                    format!("endpoint {} is an unbuilt site", inst.id(end)),
                );
            }
        }
    }

    for (&(o, d), it) in inst.itineraries() {
        let at = format!("itineraries[{}->{}]", inst.id(o), inst.id(d));
        if it.via.iter().any(|&v| v == o || v == d) {
            r.push(Rule::ViaContainsEndpoint, &at, "via contains endpoint");
        }
        let uniq: BTreeSet<_> = it.via.iter().collect();
        if uniq.len() != it.via.len() {
            r.push(Rule::ViaRepeatsNode, &at, "via lists a node more than once");
        }
    }

    for (i, e) in inst.edges().iter().enumerate() {
        if e.length < 0.0 {
            r.push(
                Rule::NegativeEdgeLength,
                format!("edges[{i}]"),
                format!("length {} < 0", e.length),
            );
        }
    }

    let mut parent: Vec<usize> = (0..inst.nodes().len()).collect();
    for e in inst.edges() {
        let (a, b) = (find(&mut parent, e.a.0), find(&mut parent, e.b.0));
        parent[a] = b;
    }
    let mut unroutable = false;
    for (i, d) in inst.demands().iter().enumerate() {
        if d.origin == d.destination || inst.itinerary(d.origin, d.destination).is_some() {
            continue;
        }
        let why = if inst.edges().is_empty() {
            Some("no itinerary and no physical edges")
        } else if find(&mut parent, d.origin.0) != find(&mut parent, d.destination.0) {
            Some("no itinerary and endpoints are not connected")
        } else {
            None
        };
        if let Some(why) = why {
            unroutable = true;
            r.push(
                Rule::UnroutableDemand,
                format!("demands[{i}]"),
                format!("{} -> {}: {why}", inst.id(d.origin), inst.id(d.destination)),
            );
        }
    }
    if !unroutable && !r.has_rule(Rule::NegativeEdgeLength) {
        // relay pairs induced by explicit itineraries
        if let Err(ItineraryError::Disconnected {
            origin,
            destination,
        }) = inst.derive_itineraries()
        {
            r.push(
                Rule::UnroutableDemand,
                format!("relay[{origin}->{destination}]"),
                "relay pair induced by an itinerary has no physical path",
            );
        }
    }

    let e = inst.economics();
    let mut econ = |field: &str, msg: String| {
        r.push(Rule::InvalidEconomics, format!("economics.{field}"), msg);
    };
    if e.budget < 0.0 {
        econ("budget", format!("{} < 0", e.budget));
    }
    if !(e.discount_rate > 0.0 && e.discount_rate < 1.0) {
        econ(
            "discount_rate",
            format!("{} outside (0, 1)", e.discount_rate),
        );
    }
    if e.car_hour_value <= 0.0 {
        econ("car_hour_value", format!("{} <= 0", e.car_hour_value));
    }
    if e.days_per_year <= 0.0 {
        econ("days_per_year", format!("{} <= 0", e.days_per_year));
    }
    if e.train_size_default <= 0.0 {
        econ("train_size", format!("{} <= 0", e.train_size_default));
    }
    for (&(o, d), &m) in &e.train_size_overrides {
        if m <= 0.0 {
            econ(
                "train_size_overrides",
                format!("{} -> {}: {m} <= 0", inst.id(o), inst.id(d)),
            );
        }
    }
    if let TrackFn::Step {
        thresholds: Some(t),
    } = &e.track_fn
    {
        if t.is_empty() || t[0] <= 0.0 || t.windows(2).any(|w| w[0] >= w[1]) {
            econ(
                "step_thresholds",
                "thresholds must be positive and strictly increasing".into(),
            );
        }
    }

    r
}
