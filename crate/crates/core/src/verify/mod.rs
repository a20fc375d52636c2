//! Runtime checkers and brute-force oracles.
//!
//! The checkers read nothing but [`SlotRecord`] columns and
//! [`RunConstants`], so they work the same on a live run and on a trace
//! file read back from disk. The oracles in [`oracle`] and [`lagrangian`]
//! re-derive every objective from the model definitions and never call the
//! solver internals they are checking.

pub mod lagrangian;
pub mod oracle;

use serde::Serialize;

use crate::net::{PowerClass, Utility};
use crate::queues::Violation;
use crate::trace::{RunConstants, SlotRecord};

pub use lagrangian::{finite_difference_gradient, GradientCheck, GradientInstance};
pub use oracle::{grid_oracle_subproblem, log_sinr_concavity, random_instance, Instance, SubproblemKind};

/// Relative slack on every bound comparison.
const BOUND_TOL: f64 = 1e-9;

fn above(value: f64, bound: f64) -> bool {
    value > bound + BOUND_TOL * (1.0 + bound.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub instance: String,
    pub solver: f64,
    pub oracle: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(instance: String, solver: f64, oracle: f64, tolerance: f64) -> Self {
        let gap = (solver - oracle).abs();
        OracleReport {
            instance,
            solver,
            oracle,
            gap,
            tolerance,
            pass: gap <= tolerance,
        }
    }
}

/// A violation tagged with the slot it occurred in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotViolation {
    pub slot: u64,
    pub violation: Violation,
}

impl std::fmt::Display for SlotViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "slot {}: {}", self.slot, self.violation)
    }
}

/// Queue bounds and the backlog threshold for transmitting.
pub fn slot_bound_violations(rec: &SlotRecord, c: &RunConstants) -> Vec<Violation> {
    let nt = c.n_tuples();
    let mut out = Vec::new();
    for (n, node) in c.nodes.iter().enumerate() {
        for (t, tuple) in c.tuples.iter().enumerate() {
            let backlog = rec.q[n * nt + t];
            if tuple.sink != n && above(backlog, c.data_bound) {
                out.push(Violation::DataBound {
                    node: node.id.clone(),
                    tuple: tuple.label.clone(),
                    backlog,
                    bound: c.data_bound,
                });
            }
            if rec.q_out[n * nt + t] > 0.0 && backlog <= c.thin_threshold {
                out.push(Violation::ThinBacklog {
                    node: node.id.clone(),
                    tuple: tuple.label.clone(),
                    backlog,
                    threshold: c.thin_threshold,
                });
            }
        }
        if node.class.has_energy_queue() && above(rec.energy[n], node.energy_bound) {
            out.push(Violation::EnergyBound {
                node: node.id.clone(),
                class: node.class,
                stored: rec.energy[n],
                bound: node.energy_bound,
            });
        }
    }
    out
}

/// Energy and data availability plus grid balance, from record columns.
pub fn slot_availability_violations(rec: &SlotRecord, c: &RunConstants) -> Vec<Violation> {
    let nt = c.n_tuples();
    let mut out = Vec::new();
    for (n, node) in c.nodes.iter().enumerate() {
        let stored = rec.energy[n];
        let required = match node.class {
            PowerClass::Eh => Some(rec.ptot[n]),
            PowerClass::Eg | PowerClass::Me => Some(rec.d[n]),
            PowerClass::Unmanaged => None,
        };
        if let Some(required) = required {
            if above(required, stored) {
                out.push(Violation::EnergyAvailability {
                    node: node.id.clone(),
                    class: node.class,
                    stored,
                    required,
                });
            }
        }
        if node.class.is_grid() {
            let required = rec.g[n] - rec.d[n] + rec.ptot[n];
            if (rec.y[n] - required).abs() > BOUND_TOL * (1.0 + required.abs()) {
                out.push(Violation::GridBalance {
                    node: node.id.clone(),
                    y: rec.y[n],
                    required,
                });
            }
        }
        for (t, tuple) in c.tuples.iter().enumerate() {
            let outgoing = rec.q_out[n * nt + t];
            let backlog = rec.q[n * nt + t];
            if outgoing > 0.0 && above(outgoing, backlog) {
                out.push(Violation::DataAvailability {
                    node: node.id.clone(),
                    tuple: tuple.label.clone(),
                    backlog,
                    outgoing,
                });
            }
        }
    }
    out
}

/// Dual bounds with slack `1e-3 · βV`.
pub fn slot_lemma1_violations(rec: &SlotRecord, c: &RunConstants) -> Vec<Violation> {
    let tol = 1e-3 * c.rho_bound;
    let mut out = Vec::new();
    for (n, node) in c.nodes.iter().enumerate() {
        if node.class.is_grid() && rec.lambda[n] > c.lambda_bound + tol {
            out.push(Violation::LambdaBound {
                node: node.id.clone(),
                lambda: rec.lambda[n],
                bound: c.lambda_bound,
            });
        }
    }
    let sessions = c.source_sessions();
    for (k, label) in c.sources.iter().enumerate() {
        if rec.rho_sum[k] > c.rho_bound + tol {
            out.push(Violation::RhoBound {
                session: c.sessions[sessions[k]].id.clone(),
                source: label.clone(),
                rho_sum: rec.rho_sum[k],
                bound: c.rho_bound,
            });
        }
    }
    out
}

fn scan(records: &[SlotRecord], f: impl Fn(&SlotRecord) -> Vec<Violation>) -> Vec<SlotViolation> {
    records
        .iter()
        .flat_map(|r| {
            f(r).into_iter().map(move |violation| SlotViolation {
                slot: r.t,
                violation,
            })
        })
        .collect()
}

/// Queue bounds, backlog threshold and availability on every slot.
pub fn check_theorem2_bounds(records: &[SlotRecord], c: &RunConstants) -> Vec<SlotViolation> {
    scan(records, |r| {
        let mut v = slot_bound_violations(r, c);
        v.extend(slot_availability_violations(r, c));
        v
    })
}

pub fn check_lemma1(records: &[SlotRecord], c: &RunConstants) -> Vec<SlotViolation> {
    scan(records, |r| slot_lemma1_violations(r, c))
}

/// Recomputes `ϖ1 Σ U(D) - (1 - ϖ1) ϖ2 Σ price·y` from each record.
pub fn recompute_objective(rec: &SlotRecord, c: &RunConstants) -> f64 {
    let sessions = c.source_sessions();
    let utility: f64 = rec
        .dist
        .iter()
        .zip(&sessions)
        .map(|(&d, &f)| match c.sessions[f].utility {
            Utility::LogOneMinus => (1.0 - d).ln(),
            Utility::Linear { slope } => -slope * d,
            Utility::Quadratic { a } => -a * d * d,
        })
        .sum();
    let cost: f64 = rec.price.iter().zip(&rec.y).map(|(p, y)| p * y).sum();
    c.varpi1 * utility - (1.0 - c.varpi1) * c.varpi2 * cost
}

/// Slots whose stored objective differs from the recomputed one.
pub fn check_objective(records: &[SlotRecord], c: &RunConstants) -> Vec<u64> {
    records
        .iter()
        .filter(|r| (recompute_objective(r, c) - r.objective).abs() > 1e-9 * (1.0 + r.objective.abs()))
        .map(|r| r.t)
        .collect()
}
