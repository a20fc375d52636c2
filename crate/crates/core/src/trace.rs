//! Per-slot records and their CSV form.
//!
//! The column layout is derived from [`RunConstants`] alone, so a trace can
//! be read back and checked without the network config. Column order:
//!
//! `t, objective, utility, grid_cost`, then `Q[n|f|s|d]` and `X[n|f|s|d]`
//! (backlog and outgoing information flow) for every node and tuple,
//! `E[n]` for nodes with an energy queue, `e[n] g[n] d[n] y[n] ptot[n]` for
//! every node, `lambda[n]` for grid nodes, `r[f|s] D[f|s] rho_sum[f|s]` per
//! source, `p[a->b]` per link, `x[a->b|f]` per link and session,
//! `h[n] price[n]` per node, and finally the solver diagnostics
//! `dual_iters, lambda_grad, rho_grad, bcd_sweeps, bcd_converged, violations`.
//!
//! Floats are written with Rust's shortest round-trip formatting.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::controller::LyapunovParams;
use crate::error::SimError;
use crate::net::{NetworkConfig, PowerClass, Utility};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub id: String,
    pub class: PowerClass,
    pub theta: f64,
    pub energy_bound: f64,
    pub battery_capacity: f64,
    pub p_total_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub utility: Utility,
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleInfo {
    pub label: String,
    pub sink: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPremise {
    pub link: String,
    /// ≤ 1 means capacity never exceeds `δ·BW·p` on the link.
    pub ratio: f64,
}

/// Derived constants plus everything needed to lay out and check a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConstants {
    pub network: String,
    pub v: f64,
    pub beta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub b_const: f64,
    pub b_q: f64,
    pub b_e_h: f64,
    pub b_e_m: f64,
    pub b_e_g: f64,
    pub data_bound: f64,
    pub lambda_bound: f64,
    pub rho_bound: f64,
    /// `l_max · X_max`; information may only leave a queue above this.
    pub thin_threshold: f64,
    pub theta_overridden: bool,
    pub varpi1: f64,
    pub varpi2: f64,
    pub nodes: Vec<NodeInfo>,
    pub links: Vec<String>,
    pub sessions: Vec<SessionInfo>,
    pub tuples: Vec<TupleInfo>,
    /// `f|s` label per (session, source) key.
    pub sources: Vec<String>,
    pub delta_premise: Vec<LinkPremise>,
    /// Smallest `|S|·log(2πe·D_max) - H(S|rest)` over subsets; ≥ 0 keeps rate
    /// multipliers from growing once distortion sits at its cap.
    pub rate_region_slack: f64,
}

impl RunConstants {
    pub fn new(cfg: &NetworkConfig, params: &LyapunovParams) -> Self {
        let nodes = cfg
            .nodes
            .iter()
            .enumerate()
            .map(|(n, node)| NodeInfo {
                id: node.id.clone(),
                class: node.power_class,
                theta: params.theta[n],
                energy_bound: params.energy_bound[n],
                battery_capacity: params.battery_capacity[n],
                p_total_max: params.p_total_max[n],
            })
            .collect();
        let links = (0..cfg.n_links()).map(|l| cfg.link_label(l)).collect();
        let sessions = cfg
            .sessions
            .iter()
            .map(|s| SessionInfo {
                id: s.id.clone(),
                utility: s.utility,
                sources: s.sources.iter().map(|&n| cfg.nodes[n].id.clone()).collect(),
                sinks: s.sinks.iter().map(|&n| cfg.nodes[n].id.clone()).collect(),
            })
            .collect();
        let tuples = (0..cfg.topo.n_tuples())
            .map(|t| TupleInfo {
                label: crate::queues::tuple_label(cfg, t),
                sink: cfg.topo.tuples[t].sink,
            })
            .collect();
        let sources = cfg
            .topo
            .sources
            .iter()
            .map(|k| format!("{}|{}", cfg.sessions[k.session].id, cfg.nodes[k.node].id))
            .collect();
        let delta_premise = (0..cfg.n_links())
            .map(|l| LinkPremise {
                link: cfg.link_label(l),
                ratio: crate::controller::delta_premise_ratio(cfg, l),
            })
            .collect();
        let unit = cfg.params.rate_log;
        let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        let mut slack = f64::MAX;
        for s in &cfg.sessions {
            for mask in 1..(1u32 << s.sources.len()) {
                let k = mask.count_ones() as f64;
                slack = slack.min(k * unit.log(two_pi_e * s.d_max) - s.entropy.get(mask).unwrap());
            }
        }
        RunConstants {
            network: cfg.name.clone(),
            v: params.v,
            beta: params.beta,
            sigma: params.sigma,
            epsilon: params.epsilon,
            delta: params.delta,
            b_const: params.b_const,
            b_q: params.b_q,
            b_e_h: params.b_e_h,
            b_e_m: params.b_e_m,
            b_e_g: params.b_e_g,
            data_bound: params.data_bound,
            lambda_bound: params.lambda_bound,
            rho_bound: params.rho_bound,
            thin_threshold: cfg.params.l_max as f64 * cfg.params.x_max,
            theta_overridden: params.theta_overridden,
            varpi1: cfg.params.varpi1,
            varpi2: cfg.params.varpi2,
            nodes,
            links,
            sessions,
            tuples,
            sources,
            delta_premise,
            rate_region_slack: if slack == f64::MAX { 0.0 } else { slack },
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tuples(&self) -> usize {
        self.tuples.len()
    }

    /// Session index of every source key, in key order.
    pub fn source_sessions(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for (f, s) in self.sessions.iter().enumerate() {
            v.extend(std::iter::repeat_n(f, s.sources.len()));
        }
        v
    }

    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = ["t", "objective", "utility", "grid_cost"].map(String::from).to_vec();
        for prefix in ["Q", "X"] {
            for n in &self.nodes {
                for t in &self.tuples {
                    c.push(format!("{prefix}[{}|{}]", n.id, t.label));
                }
            }
        }
        for n in self.nodes.iter().filter(|n| n.class.has_energy_queue()) {
            c.push(format!("E[{}]", n.id));
        }
        for prefix in ["e", "g", "d", "y", "ptot"] {
            for n in &self.nodes {
                c.push(format!("{prefix}[{}]", n.id));
            }
        }
        for n in self.nodes.iter().filter(|n| n.class.is_grid()) {
            c.push(format!("lambda[{}]", n.id));
        }
        for prefix in ["r", "D", "rho_sum"] {
            for s in &self.sources {
                c.push(format!("{prefix}[{s}]"));
            }
        }
        for l in &self.links {
            c.push(format!("p[{l}]"));
        }
        for l in &self.links {
            for s in &self.sessions {
                c.push(format!("x[{l}|{}]", s.id));
            }
        }
        for prefix in ["h", "price"] {
            for n in &self.nodes {
                c.push(format!("{prefix}[{}]", n.id));
            }
        }
        for d in ["dual_iters", "lambda_grad", "rho_grad", "bcd_sweeps", "bcd_converged", "violations"] {
            c.push(d.to_string());
        }
        c
    }
}

/// Everything the trace keeps about one slot. Queue values are the state
/// at the start of the slot; decisions are the committed ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub t: u64,
    pub objective: f64,
    /// Σ U(D) over every source.
    pub utility: f64,
    /// Σ price · y over grid nodes.
    pub grid_cost: f64,
    /// `node * n_tuples + tuple`
    pub q: Vec<f64>,
    pub q_out: Vec<f64>,
    /// Per node; 0 where no energy queue is kept.
    pub energy: Vec<f64>,
    pub e: Vec<f64>,
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
    pub ptot: Vec<f64>,
    /// Per node; 0 off the grid.
    pub lambda: Vec<f64>,
    pub r: Vec<f64>,
    pub dist: Vec<f64>,
    pub rho_sum: Vec<f64>,
    pub p: Vec<f64>,
    pub x: Vec<f64>,
    pub harvestable: Vec<f64>,
    pub price: Vec<f64>,
    pub dual_iters: usize,
    /// Largest complementary-slackness residual of λ and of ρ at the
    /// committed decision.
    pub lambda_grad: f64,
    pub rho_grad: f64,
    pub bcd_sweeps: usize,
    pub bcd_converged: bool,
    pub violations: Vec<String>,
}

impl SlotRecord {
    fn fields(&self, c: &RunConstants) -> Vec<String> {
        fn f(x: f64) -> String {
            format!("{x}")
        }
        let mut out = vec![self.t.to_string(), f(self.objective), f(self.utility), f(self.grid_cost)];
        out.extend(self.q.iter().map(|&x| f(x)));
        out.extend(self.q_out.iter().map(|&x| f(x)));
        for (n, info) in c.nodes.iter().enumerate() {
            if info.class.has_energy_queue() {
                out.push(f(self.energy[n]));
            }
        }
        for v in [&self.e, &self.g, &self.d, &self.y, &self.ptot] {
            out.extend(v.iter().map(|&x| f(x)));
        }
        for (n, info) in c.nodes.iter().enumerate() {
            if info.class.is_grid() {
                out.push(f(self.lambda[n]));
            }
        }
        for v in [&self.r, &self.dist, &self.rho_sum, &self.p, &self.x, &self.harvestable, &self.price] {
            out.extend(v.iter().map(|&x| f(x)));
        }
        out.push(self.dual_iters.to_string());
        out.push(f(self.lambda_grad));
        out.push(f(self.rho_grad));
        out.push(self.bcd_sweeps.to_string());
        out.push(u8::from(self.bcd_converged).to_string());
        out.push(self.violations.join("; "));
        out
    }

    fn parse(row: &csv::StringRecord, c: &RunConstants) -> Result<Self, SimError> {
        let mut it = row.iter();
        let mut next = || it.next().ok_or_else(|| SimError::Trace("short row".into()));
        let num = |s: &str| -> Result<f64, SimError> {
            s.parse::<f64>().map_err(|e| SimError::Trace(format!("bad number `{s}`: {e}")))
        };
        let int = |s: &str| -> Result<u64, SimError> {
            s.parse::<u64>().map_err(|e| SimError::Trace(format!("bad integer `{s}`: {e}")))
        };
        let n = c.n_nodes();
        let nt = c.n_tuples();
        let t = int(next()?)?;
        let objective = num(next()?)?;
        let utility = num(next()?)?;
        let grid_cost = num(next()?)?;
        let mut take = |len: usize| -> Result<Vec<f64>, SimError> {
            (0..len).map(|_| num(next()?)).collect()
        };
        let q = take(n * nt)?;
        let q_out = take(n * nt)?;
        let mut energy = vec![0.0; n];
        for (i, info) in c.nodes.iter().enumerate() {
            if info.class.has_energy_queue() {
                energy[i] = take(1)?[0];
            }
        }
        let e = take(n)?;
        let g = take(n)?;
        let d = take(n)?;
        let y = take(n)?;
        let ptot = take(n)?;
        let mut lambda = vec![0.0; n];
        for (i, info) in c.nodes.iter().enumerate() {
            if info.class.is_grid() {
                lambda[i] = take(1)?[0];
            }
        }
        let ns = c.sources.len();
        let r = take(ns)?;
        let dist = take(ns)?;
        let rho_sum = take(ns)?;
        let p = take(c.links.len())?;
        let x = take(c.links.len() * c.sessions.len())?;
        let harvestable = take(n)?;
        let price = take(n)?;
        drop(take);
        let dual_iters = int(next()?)? as usize;
        let lambda_grad = num(next()?)?;
        let rho_grad = num(next()?)?;
        let bcd_sweeps = int(next()?)? as usize;
        let bcd_converged = next()? == "1";
        let v = next()?;
        let violations = if v.is_empty() {
            Vec::new()
        } else {
            v.split("; ").map(String::from).collect()
        };
        Ok(SlotRecord {
            t,
            objective,
            utility,
            grid_cost,
            q,
            q_out,
            energy,
            e,
            g,
            d,
            y,
            ptot,
            lambda,
            r,
            dist,
            rho_sum,
            p,
            x,
            harvestable,
            price,
            dual_iters,
            lambda_grad,
            rho_grad,
            bcd_sweeps,
            bcd_converged,
            violations,
        })
    }
}

/// Streams records to CSV, header first.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    constants: RunConstants,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W, constants: &RunConstants) -> Result<Self, SimError> {
        let mut inner = csv::WriterBuilder::new().from_writer(w);
        inner.write_record(constants.columns())?;
        Ok(TraceWriter {
            inner,
            constants: constants.clone(),
        })
    }

    pub fn write(&mut self, rec: &SlotRecord) -> Result<(), SimError> {
        self.inner.write_record(rec.fields(&self.constants))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), SimError> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_trace<R: Read>(r: R, constants: &RunConstants) -> Result<Vec<SlotRecord>, SimError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header = rdr.headers()?.clone();
    let expected = constants.columns();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(SimError::Trace("trace header does not match the run constants".into()));
    }
    rdr.records()
        .map(|row| SlotRecord::parse(&row?, constants))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fig2;
    use crate::controller::compute_perturbations;

    #[test]
    fn column_count_matches_fields() {
        let cfg = fig2();
        let c = RunConstants::new(&cfg, &compute_perturbations(&cfg, 100.0, false).unwrap());
        let cols = c.columns();
        // 4 scalars, 2·6·4 data, 4 energy, 5·6 node, 2 lambda, 3·2 source, 7 + 7 link, 2·6 env, 6 diag
        assert_eq!(cols.len(), 4 + 48 + 4 + 30 + 2 + 6 + 14 + 12 + 6);
        assert!(cols.contains(&"Q[C|video|A|E]".to_string()));
        assert!(cols.contains(&"lambda[B]".to_string()));
    }
}
