//! Run report: a versioned, line-oriented record of one solve, plus the
//! fixed-width console summary.
//!
//! The file starts with the header line `yardloc-report-v1`; every other line
//! is `<record> <json>`. Numbers are written in shortest round-trip form, so a
//! parsed report carries the exact values of the solve. Wall time is not part
//! of the file, which keeps reports of identical runs byte-identical.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{track_demand, DecisionError, InvestmentDecision, Route, Scenario};
use crate::instance::{Instance, NodeIdx};
use crate::invest::{SolveOutcome, UpperMode};
use crate::tcs::{Optimality, TcsMode};

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report rows always serialize")
}

pub const REPORT_HEADER: &str = "yardloc-report-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub nodes: usize,
    pub demands: usize,
    pub potential_nodes: usize,
    pub routed_pairs: usize,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub node: String,
    pub plan: usize,
    pub cost: f64,
    pub lifetime: Option<u32>,
    pub capacity_gain: f64,
    pub tracks_gain: u32,
    pub tau_after: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteRow {
    pub origin: String,
    pub destination: String,
    /// `None` for a direct service, otherwise the reclassification yard.
    pub via: Option<String>,
    pub flow: f64,
    pub service: f64,
    /// `None` when the service exceeds the step function's last threshold.
    pub tracks: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YardRow {
    pub node: String,
    pub workload: f64,
    pub capacity: f64,
    pub utilization: Option<f64>,
    pub tracks_used: Option<f64>,
    pub tracks_available: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub invested: f64,
    pub annualized_capital: f64,
    pub accumulation: f64,
    pub reclassification: f64,
    pub z_total: f64,
    pub annual_operation: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRow {
    pub mode: UpperMode,
    pub tcs_mode: TcsMode,
    pub seed: u64,
    pub decisions_evaluated: usize,
    pub optimality: Optimality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub instance: InstanceSummary,
    pub decisions: Vec<DecisionRow>,
    pub routes: Vec<RouteRow>,
    pub yards: Vec<YardRow>,
    pub costs: CostRow,
    pub solver: SolverRow,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing or unknown header; expected `{REPORT_HEADER}`")]
    Header,
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("missing `{0}` record")]
    Missing(&'static str),
    #[error("report names node `{0}`, which the instance does not have")]
    UnknownNode(String),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

impl RunReport {
    /// Builds the report of a finished solve. `inst` must be the instance the
    /// outcome was computed on (with itineraries).
    pub fn new(
        inst: &Instance,
        outcome: &SolveOutcome,
        mode: UpperMode,
        tcs_mode: TcsMode,
        seed: u64,
    ) -> Self {
        let plan = &outcome.plan;
        let scn = Scenario::new(inst, plan.decision.clone());
        let flows = &plan.tcs.flows;
        let track_fn = &inst.economics().track_fn;
        let name = |k: NodeIdx| inst.id(k).to_string();

        let decisions = plan
            .decision
            .choices()
            .iter()
            .map(|(&k, &p)| {
                let chosen = p.checked_sub(1).map(|i| &inst.node(k).plans[i]);
                DecisionRow {
                    node: name(k),
                    plan: p,
                    cost: chosen.map_or(0.0, |c| c.cost),
                    lifetime: chosen.map(|c| c.lifetime_years),
                    capacity_gain: chosen.map_or(0.0, |c| c.capacity_gain),
                    tracks_gain: chosen.map_or(0, |c| c.tracks_gain),
                    tau_after: chosen.map(|c| c.reclass_cost_after),
                }
            })
            .collect();

        let routes = plan
            .tcs
            .assignment
            .routes()
            .iter()
            .map(|(&(i, j), &r)| {
                let service = flows.service(i, j);
                RouteRow {
                    origin: name(i),
                    destination: name(j),
                    via: match r {
                        Route::Direct => None,
                        Route::Via(k) => Some(name(k)),
                    },
                    flow: flows.flow(i, j),
                    service,
                    tracks: track_demand(service, track_fn).ok(),
                }
            })
            .collect();

        let used = crate::flow::tracks_used(&scn, flows);
        let yards = (0..inst.nodes().len())
            .map(NodeIdx)
            .map(|k| {
                let eff = scn.effective(k);
                let workload = flows.workload(k);
                let t = used.get(&k).copied().unwrap_or(0.0);
                YardRow {
                    node: name(k),
                    workload,
                    capacity: eff.capacity,
                    utilization: (eff.capacity > 0.0).then(|| workload / eff.capacity),
                    tracks_used: t.is_finite().then_some(t),
                    tracks_available: eff.tracks,
                }
            })
            .collect();

        let cost = &plan.tcs.cost;
        RunReport {
            instance: InstanceSummary {
                nodes: inst.nodes().len(),
                demands: inst.demands().len(),
                potential_nodes: inst.potential_nodes().len(),
                routed_pairs: plan.tcs.assignment.routes().len(),
                budget: inst.economics().budget,
            },
            decisions,
            routes,
            yards,
            costs: CostRow {
                invested: plan.invested,
                annualized_capital: plan.annualized_capital,
                accumulation: cost.accumulation,
                reclassification: cost.reclassification,
                z_total: cost.z_total,
                annual_operation: plan.annual_operation.unwrap_or(f64::NAN),
                objective: plan.objective.unwrap_or(f64::NAN),
            },
            solver: SolverRow {
                mode,
                tcs_mode,
                seed,
                decisions_evaluated: outcome.evaluated,
                optimality: plan.tcs.optimality,
            },
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_HEADER);
        out.push('\n');
        let mut line = |kind: &str, json: String| {
            out.push_str(kind);
            out.push(' ');
            out.push_str(&json);
            out.push('\n');
        };
        line("instance", json(&self.instance));
        for d in &self.decisions {
            line("decision", json(d));
        }
        for r in &self.routes {
            line("route", json(r));
        }
        for y in &self.yards {
            line("yard", json(y));
        }
        line("cost", json(&self.costs));
        line("solver", json(&self.solver));
        out
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == REPORT_HEADER => {}
            _ => return Err(ReportError::Header),
        }
        let mut instance = None;
        let mut costs = None;
        let mut solver = None;
        let mut decisions = Vec::new();
        let mut routes = Vec::new();
        let mut yards = Vec::new();
        for (n, raw) in lines {
            if raw.trim().is_empty() {
                continue;
            }
            let line = n + 1;
            let (kind, body) = raw.split_once(' ').ok_or_else(|| ReportError::Record {
                line,
                message: "expected `<record> <json>`".into(),
            })?;
            let err = |e: serde_json::Error| ReportError::Record {
                line,
                message: e.to_string(),
            };
            match kind {
                "instance" => instance = Some(serde_json::from_str(body).map_err(err)?),
                "decision" => decisions.push(serde_json::from_str(body).map_err(err)?),
                "route" => routes.push(serde_json::from_str(body).map_err(err)?),
                "yard" => yards.push(serde_json::from_str(body).map_err(err)?),
                "cost" => costs = Some(serde_json::from_str(body).map_err(err)?),
                "solver" => solver = Some(serde_json::from_str(body).map_err(err)?),
                other => {
                    return Err(ReportError::Record {
                        line,
                        message: format!("unknown record `{other}`"),
                    })
                }
            }
        }
        Ok(RunReport {
            instance: instance.ok_or(ReportError::Missing("instance"))?,
            decisions,
            routes,
            yards,
            costs: costs.ok_or(ReportError::Missing("cost"))?,
            solver: solver.ok_or(ReportError::Missing("solver"))?,
        })
    }

    /// The reported decision, resolved against `inst`.
    pub fn decision(&self, inst: &Instance) -> Result<InvestmentDecision, ReportError> {
        let choice = self
            .decisions
            .iter()
            .map(|d| {
                inst.node_by_id(&d.node)
                    .map(|k| (k, d.plan))
                    .ok_or_else(|| ReportError::UnknownNode(d.node.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(InvestmentDecision::from_choices(inst, choice)?)
    }

    /// Fixed-width console summary. Numbers use `.` as the decimal separator
    /// regardless of locale.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let i = &self.instance;
        let _ = writeln!(
            s,
            "instance: {} nodes, {} demands, {} potential, {} routed pairs, budget {:.2}",
            i.nodes, i.demands, i.potential_nodes, i.routed_pairs, i.budget
        );
        let _ = writeln!(s);
        if !self.decisions.is_empty() {
            let _ = writeln!(
                s,
                "{:<12} {:>4} {:>14} {:>8} {:>10} {:>6}",
                "node", "plan", "cost", "life", "cap+", "trk+"
            );
            for d in &self.decisions {
                let life = d.lifetime.map_or("-".to_string(), |l| l.to_string());
                let _ = writeln!(
                    s,
                    "{:<12} {:>4} {:>14.2} {:>8} {:>10.2} {:>6}",
                    d.node, d.plan, d.cost, life, d.capacity_gain, d.tracks_gain
                );
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(
            s,
            "{:<12} {:<12} {:<12} {:>12} {:>12} {:>8}",
            "origin", "dest", "route", "f", "D", "tracks"
        );
        for r in &self.routes {
            let via = r.via.as_deref().unwrap_or("direct");
            let tracks = r.tracks.map_or("over".to_string(), |t| format!("{t:.0}"));
            let _ = writeln!(
                s,
                "{:<12} {:<12} {:<12} {:>12.3} {:>12.3} {:>8}",
                r.origin, r.destination, via, r.flow, r.service, tracks
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<12} {:>12} {:>12} {:>8} {:>8} {:>8}",
            "yard", "workload", "capacity", "util", "tracks", "avail"
        );
        for y in &self.yards {
            let util = y
                .utilization
                .map_or("-".to_string(), |u| format!("{:.1}%", u * 100.0));
            let used = y
                .tracks_used
                .map_or("over".to_string(), |t| format!("{t:.0}"));
            let _ = writeln!(
                s,
                "{:<12} {:>12.3} {:>12.3} {:>8} {:>8} {:>8.0}",
                y.node, y.workload, y.capacity, util, used, y.tracks_available
            );
        }
        let _ = writeln!(s);
        let c = &self.costs;
        for (label, v) in [
            ("invested", c.invested),
            ("annualized capital", c.annualized_capital),
            ("accumulation (car-h/day)", c.accumulation),
            ("reclassification (car-h/day)", c.reclassification),
            ("Z (car-h/day)", c.z_total),
            ("annual operation", c.annual_operation),
            ("objective", c.objective),
        ] {
            let _ = writeln!(s, "{label:<30} {v:>18.4}");
        }
        let _ = writeln!(s);
        let m = &self.solver;
        let _ = writeln!(
            s,
            "solver: {:?}/{:?}, seed {}, {} decisions evaluated, {:?}",
            m.mode, m.tcs_mode, m.seed, m.decisions_evaluated, m.optimality
        );
        s
    }
}
