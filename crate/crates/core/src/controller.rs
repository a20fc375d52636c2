//! Constants of the drift-plus-penalty controller: perturbations θ, the
//! scalars β, σ, ε, B, per-node coefficients A_n and link weights.

use serde::Serialize;

use crate::error::{ConfigError, SimError};
use crate::net::{LinkId, NetworkConfig, NodeId, PowerClass, SessionId, SessionSpec};
use crate::queues::DataQueueBank;

/// Grid points used for the interior part of the β supremum.
const BETA_GRID: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovParams {
    pub v: f64,
    pub beta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Drift bound constant, the sum of the four parts below.
    pub b_const: f64,
    /// Per data queue.
    pub b_q: f64,
    pub b_e_h: f64,
    pub b_e_m: f64,
    pub b_e_g: f64,
    /// Largest |sources| * |sinks| over sessions.
    pub ns_nd: usize,
    pub r_max: f64,
    /// Perturbation per node; 0 for nodes without an energy queue.
    pub theta: Vec<f64>,
    pub p_total_max: Vec<f64>,
    /// Largest value each energy queue may reach.
    pub energy_bound: Vec<f64>,
    /// Configured storage size, or the energy bound when not configured.
    pub battery_capacity: Vec<f64>,
    pub data_bound: f64,
    pub lambda_bound: f64,
    pub rho_bound: f64,
    pub theta_overridden: bool,
}

impl LyapunovParams {
    pub fn theta_of(&self, n: NodeId) -> f64 {
        self.theta[n]
    }
}

/// β_f = ϖ1 · sup_D (U(D) - U(D_max)) / (ln D_max - ln D), with the
/// D → D_max limit -D_max·U'(D_max) included.
pub fn compute_beta(session: &SessionSpec, varpi1: f64) -> Result<f64, SimError> {
    let u = &session.utility;
    let (lo, hi) = (session.d_min, session.d_max);
    let u_hi = u.value(hi);
    let mut sup = -hi * u.derivative(hi);
    if hi > lo {
        for i in 0..BETA_GRID {
            let d = lo + (hi - lo) * i as f64 / BETA_GRID as f64;
            let ratio = (u.value(d) - u_hi) / (hi.ln() - d.ln());
            if ratio > sup {
                sup = ratio;
            }
        }
    }
    let beta = varpi1 * sup.max(0.0);
    if beta.is_finite() {
        Ok(beta)
    } else {
        Err(SimError::NonFiniteBeta(session.id.clone()))
    }
}

/// Largest session β.
pub fn network_beta(cfg: &NetworkConfig) -> Result<f64, SimError> {
    cfg.sessions
        .iter()
        .map(|s| compute_beta(s, cfg.params.varpi1))
        .try_fold(0.0f64, |acc, b| b.map(|b| acc.max(b)))
}

pub fn compute_sigma(cfg: &NetworkConfig) -> Result<f64, SimError> {
    let sigma = cfg
        .sessions
        .iter()
        .map(|s| s.sense_cost)
        .chain(cfg.nodes.iter().map(|n| n.p_recv_cost))
        .fold(1.0f64, f64::min);
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(SimError::NonPositiveSigma)
    }
}

pub fn max_r_max(cfg: &NetworkConfig) -> f64 {
    cfg.sessions.iter().map(|s| s.r_max).fold(0.0, f64::max)
}

pub fn compute_epsilon(cfg: &NetworkConfig) -> f64 {
    cfg.params.l_max as f64 * cfg.params.x_max + max_r_max(cfg)
}

/// Worst-case sensing, transmit and receive energy of a node in one slot.
pub fn p_total_max(cfg: &NetworkConfig, n: NodeId) -> f64 {
    let sense: f64 = cfg
        .sessions
        .iter()
        .filter(|s| s.sources.contains(&n))
        .map(|s| s.sense_cost * s.r_max)
        .sum();
    let node = &cfg.nodes[n];
    sense + node.p_max + node.p_recv_cost * cfg.params.l_max as f64 * cfg.params.x_max
}

/// Data queues that can hold backlog (a sink's own tuple is absorbed).
pub fn dynamic_data_queues(cfg: &NetworkConfig) -> usize {
    (0..cfg.n_nodes())
        .map(|n| cfg.topo.tuples.iter().filter(|t| t.sink != n).count())
        .sum()
}

pub fn compute_perturbations(cfg: &NetworkConfig, v: f64, use_override: bool) -> Result<LyapunovParams, SimError> {
    let beta = network_beta(cfg)?;
    let sigma = compute_sigma(cfg)?;
    let epsilon = compute_epsilon(cfg);
    let p = &cfg.params;
    let r_max = max_r_max(cfg);
    let ns_nd = cfg
        .sessions
        .iter()
        .map(|s| s.sources.len() * s.sinks.len())
        .max()
        .unwrap_or(0);
    let over = match (use_override, cfg.theta_override) {
        (false, _) => None,
        (true, Some(o)) => Some(o),
        (true, None) => {
            return Err(ConfigError::invalid("theta_override", "override requested but not configured").into())
        }
    };
    let eh_coef = (1.0 / sigma).max(p.delta * p.bw) * ns_nd as f64 * beta;
    let ptm: Vec<f64> = (0..cfg.n_nodes()).map(|n| p_total_max(cfg, n)).collect();
    let mut theta = vec![0.0; cfg.n_nodes()];
    let mut energy_bound = vec![0.0; cfg.n_nodes()];
    let mut battery_capacity = vec![0.0; cfg.n_nodes()];
    for (n, node) in cfg.nodes.iter().enumerate() {
        theta[n] = match (node.power_class, over) {
            (PowerClass::Eh, None) => eh_coef * v + ptm[n],
            (PowerClass::Eg | PowerClass::Me, None) => beta * v / sigma + node.d_max,
            (PowerClass::Eh, Some(o)) => o.eh[0] * v + o.eh[1],
            (PowerClass::Eg, Some(o)) => o.eg[0] * v + o.eg[1],
            (PowerClass::Me, Some(o)) => o.em[0] * v + o.em[1],
            (PowerClass::Unmanaged, _) => 0.0,
        };
        energy_bound[n] = match node.power_class {
            PowerClass::Eh => theta[n],
            PowerClass::Eg => theta[n] + node.g_max,
            PowerClass::Me => theta[n] + node.g_max + node.h_max(),
            PowerClass::Unmanaged => 0.0,
        };
        battery_capacity[n] = node.battery_capacity.unwrap_or(energy_bound[n]);
    }

    let lx = p.l_max as f64 * p.x_max;
    let b_q = 1.5 * lx * lx + 0.5 * r_max * r_max;
    let (mut b_e_h, mut b_e_m, mut b_e_g) = (0.0, 0.0, 0.0);
    for (n, node) in cfg.nodes.iter().enumerate() {
        let h = node.h_max();
        match node.power_class {
            PowerClass::Eh => b_e_h += 0.5 * h * h + 0.5 * ptm[n] * ptm[n],
            PowerClass::Me => b_e_m += 0.5 * (h + node.g_max).powi(2) + 0.5 * node.d_max * node.d_max,
            PowerClass::Eg => b_e_g += 0.5 * node.g_max * node.g_max + 0.5 * node.d_max * node.d_max,
            PowerClass::Unmanaged => {}
        }
    }
    let b_const = b_q * dynamic_data_queues(cfg) as f64 + b_e_h + b_e_m + b_e_g;

    Ok(LyapunovParams {
        v,
        beta,
        sigma,
        epsilon,
        delta: p.delta,
        b_const,
        b_q,
        b_e_h,
        b_e_m,
        b_e_g,
        ns_nd,
        r_max,
        theta,
        p_total_max: ptm,
        energy_bound,
        battery_capacity,
        data_bound: beta * v + r_max,
        lambda_bound: beta * v / sigma,
        rho_bound: beta * v,
        theta_overridden: over.is_some(),
    })
}

/// A_n = 1{EH}(E - θ) - 1{EG ∪ ME} λ.
pub fn compute_a(class: PowerClass, energy: f64, theta: f64, lambda: f64) -> f64 {
    match class {
        PowerClass::Eh => energy - theta,
        PowerClass::Eg | PowerClass::Me => -lambda,
        PowerClass::Unmanaged => 0.0,
    }
}

/// A_n for every node; `lambda` is indexed by node.
pub fn node_coefficients(cfg: &NetworkConfig, energy: &[f64], params: &LyapunovParams, lambda: &[f64]) -> Vec<f64> {
    cfg.nodes
        .iter()
        .enumerate()
        .map(|(n, node)| compute_a(node.power_class, energy[n], params.theta[n], lambda[n]))
        .collect()
}

/// `(w, W)` of session `f` on `link`: summed differential backlog plus the
/// receiver's energy term, and its ε-shifted positive part.
pub fn link_weights(
    cfg: &NetworkConfig,
    link: LinkId,
    f: SessionId,
    data: &DataQueueBank,
    a: &[f64],
    epsilon: f64,
) -> (f64, f64) {
    let spec = &cfg.links[link];
    let (n, b) = (spec.from, spec.to);
    let tuples = cfg.topo.session_tuples[f].clone();
    let count = tuples.len() as f64;
    let diff: f64 = tuples.map(|t| data.get(cfg, n, t) - data.get(cfg, b, t)).sum();
    let w = diff + a[b] * cfg.nodes[b].p_recv_cost;
    (w, (w - count * epsilon).max(0.0))
}

/// Bound ratio `α · S / (e · N · δ)` in the configured information unit;
/// at most 1 means capacity never exceeds `δ · BW · p` on that link.
pub fn delta_premise_ratio(cfg: &NetworkConfig, link: LinkId) -> f64 {
    let spec = &cfg.links[link];
    let alpha = crate::net::success_probability(cfg, link, &cfg.access);
    let s = cfg.base_gain[spec.from * cfg.n_nodes() + spec.to];
    alpha * cfg.params.rate_log.per_nat() * s / (std::f64::consts::E * spec.noise * cfg.params.delta)
}
