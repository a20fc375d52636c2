//! A Lagrangian written out term by term, and central finite differences of
//! it against the analytic dual gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::fig2;
use crate::net::{EnvironmentState, InfoUnit, NetworkConfig};
use crate::queues::ControlDecision;
use crate::solvers::{lambda_gradient, rho_gradient, DualState};

const FD_STEP: f64 = 1e-5;

/// A fixed primal point with multipliers at which to differentiate.
#[derive(Debug, Clone)]
pub struct GradientInstance {
    pub cfg: NetworkConfig,
    pub decision: ControlDecision,
    pub duals: DualState,
    pub env: EnvironmentState,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub multiplier: String,
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic - numeric| / max(1, |analytic|)`
    pub rel_error: f64,
}

impl GradientInstance {
    /// Random decision inside its boxes on the bundled network, with the
    /// information unit drawn at random.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut cfg = fig2();
        if rng.random_bool(0.5) {
            cfg.params.rate_log = InfoUnit::Nats;
        }
        let mut dec = ControlDecision::zeros(&cfg);
        for (n, node) in cfg.nodes.iter().enumerate() {
            dec.e[n] = rng.random_range(0.0..=node.h_max());
            if node.power_class.is_grid() {
                dec.g[n] = rng.random_range(0.0..=node.g_max);
                dec.d[n] = rng.random_range(0.0..=node.d_max);
                dec.y[n] = rng.random_range(0.0..=node.y_max);
            }
        }
        for (k, src) in cfg.topo.sources.iter().enumerate() {
            let s = &cfg.sessions[src.session];
            dec.r[k] = rng.random_range(0.0..=s.r_max);
            dec.dist[k] = rng.random_range(s.d_min..=s.d_max);
        }
        for (l, link) in cfg.links.iter().enumerate() {
            let deg = cfg.topo.out_links[link.from].len() as f64;
            dec.p[l] = rng.random_range(0.0..=cfg.nodes[link.from].p_max / deg);
        }
        for x in dec.x.iter_mut() {
            *x = rng.random_range(0.0..=cfg.params.x_max);
        }
        let mut duals = DualState::zeros(&cfg);
        for (n, node) in cfg.nodes.iter().enumerate() {
            if node.power_class.is_grid() {
                duals.lambda[n] = rng.random_range(0.0..500.0);
            }
        }
        for r in duals.rho.iter_mut() {
            *r = rng.random_range(0.0..300.0);
        }
        let mut env = EnvironmentState::quiet(&cfg);
        for (n, node) in cfg.nodes.iter().enumerate() {
            if node.power_class.is_grid() {
                env.price[n] = rng.random_range(0.5..1.0);
            }
        }
        GradientInstance {
            cfg,
            decision: dec,
            duals,
            env,
            v: rng.random_range(10.0..500.0),
        }
    }
}

fn consumption(cfg: &NetworkConfig, dec: &ControlDecision, node: usize) -> f64 {
    let fs = cfg.sessions.len();
    let mut total = 0.0;
    for (k, src) in cfg.topo.sources.iter().enumerate() {
        if src.node == node {
            total += cfg.sessions[src.session].sense_cost * dec.r[k];
        }
    }
    for (l, link) in cfg.links.iter().enumerate() {
        if link.from == node {
            total += dec.p[l];
        }
        if link.to == node {
            for f in 0..fs {
                total += cfg.nodes[node].p_recv_cost * dec.x[l * fs + f];
            }
        }
    }
    total
}

/// Penalty plus multiplier terms at a fixed primal point.
pub fn lagrangian(inst: &GradientInstance, lambda: &[f64], rho: &[f64]) -> f64 {
    let cfg = &inst.cfg;
    let dec = &inst.decision;
    let p = &cfg.params;
    let mut value = 0.0;
    for (k, src) in cfg.topo.sources.iter().enumerate() {
        value += inst.v * p.varpi1 * cfg.sessions[src.session].utility.value(dec.dist[k]);
    }
    for (n, node) in cfg.nodes.iter().enumerate() {
        if node.power_class.is_grid() {
            value -= inst.v * (1.0 - p.varpi1) * p.varpi2 * inst.env.price[n] * dec.y[n];
            value += lambda[n] * (dec.g[n] - dec.d[n] + consumption(cfg, dec, n) - dec.y[n]);
        }
    }
    let log = |x: f64| match p.rate_log {
        InfoUnit::Bits => x.log2(),
        InfoUnit::Nats => x.ln(),
    };
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let mut offset = 0;
    let mut first_source = 0;
    for s in &cfg.sessions {
        let m = s.sources.len();
        for mask in 1u32..(1 << m) {
            let mut residual = s.entropy.values[mask as usize - 1];
            for i in 0..m {
                if mask & (1 << i) != 0 {
                    residual -= log(two_pi_e * dec.dist[first_source + i]) + dec.r[first_source + i];
                }
            }
            value += rho[offset + mask as usize - 1] * residual;
        }
        offset += (1 << m) - 1;
        first_source += m;
    }
    value
}

/// Central differences of [`lagrangian`] in every multiplier against the
/// analytic gradients.
pub fn finite_difference_gradient(inst: &GradientInstance) -> Vec<GradientCheck> {
    let cfg = &inst.cfg;
    let lambda = inst.duals.lambda.clone();
    let rho = inst.duals.rho.clone();
    let mut out = Vec::new();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
    for (n, node) in cfg.nodes.iter().enumerate() {
        if !node.power_class.is_grid() {
            continue;
        }
        let (mut up, mut down) = (lambda.clone(), lambda.clone());
        up[n] += FD_STEP;
        down[n] -= FD_STEP;
        let numeric = (lagrangian(inst, &up, &rho) - lagrangian(inst, &down, &rho)) / (2.0 * FD_STEP);
        let analytic = lambda_gradient(cfg, n, &inst.decision);
        out.push(GradientCheck {
            multiplier: format!("lambda[{}]", node.id),
            analytic,
            numeric,
            rel_error: rel(analytic, numeric),
        });
    }
    for (f, s) in cfg.sessions.iter().enumerate() {
        for mask in 1u32..(1 << s.sources.len()) {
            let i = cfg.topo.rho_index(f, mask);
            let (mut up, mut down) = (rho.clone(), rho.clone());
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            let numeric = (lagrangian(inst, &lambda, &up) - lagrangian(inst, &lambda, &down)) / (2.0 * FD_STEP);
            let analytic = rho_gradient(cfg, f, mask, &inst.decision);
            out.push(GradientCheck {
                multiplier: format!("rho[{}:{mask}]", s.id),
                analytic,
                numeric,
                rel_error: rel(analytic, numeric),
            });
        }
    }
    out
}
