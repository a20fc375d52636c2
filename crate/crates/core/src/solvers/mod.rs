//! Per-slot subproblem solvers and the dual gradient-projection step.

pub mod energy;
pub mod power;
pub mod source;

use serde::Serialize;

pub use energy::{price_weight, solve_eg, solve_eh_harvest, solve_me_discharge_purchase, solve_me_harvest_charge, GridCaps};
pub use power::{power_objective, solve_power_allocation, BcdOptions, PowerSolution};
pub use source::{solve_distortion, solve_source_rate};

use crate::net::{NetworkConfig, SessionId};
use crate::queues::{total_energy_consumption, ControlDecision};

/// Multipliers of the energy-balance (λ, per node) and rate-region
/// (ρ, per session and nonempty source subset) constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualState {
    /// Zero and never updated for nodes off the grid.
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub step_lambda: f64,
    pub step_rho: f64,
}

impl DualState {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        DualState {
            lambda: vec![0.0; cfg.n_nodes()],
            rho: vec![0.0; cfg.topo.rho_len],
            step_lambda: cfg.solver.kappa_lambda,
            step_rho: cfg.solver.kappa_rho,
        }
    }

    pub fn rho_at(&self, cfg: &NetworkConfig, f: SessionId, mask: u32) -> f64 {
        self.rho[cfg.topo.rho_index(f, mask)]
    }

    /// Σ of ρ over the subsets containing source key `k`.
    pub fn rho_sum(&self, cfg: &NetworkConfig, k: usize) -> f64 {
        let src = cfg.topo.sources[k];
        let full = (1u32 << cfg.sessions[src.session].sources.len()) - 1;
        (1..=full)
            .filter(|m| m >> src.source_idx & 1 == 1)
            .map(|m| self.rho_at(cfg, src.session, m))
            .sum()
    }
}

/// ∂L/∂λ_n = g - d + p_total - y.
pub fn lambda_gradient(cfg: &NetworkConfig, node: usize, dec: &ControlDecision) -> f64 {
    dec.g[node] - dec.d[node] + total_energy_consumption(cfg, node, dec) - dec.y[node]
}

/// ∂L/∂ρ = H(S | rest) - log((2πe)^|S| Π D) - Σ r over the subset.
pub fn rho_gradient(cfg: &NetworkConfig, f: SessionId, mask: u32, dec: &ControlDecision) -> f64 {
    let session = &cfg.sessions[f];
    let unit = cfg.params.rate_log;
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let base = cfg.topo.session_sources[f].start;
    let mut logs = 0.0;
    let mut rate = 0.0;
    for i in 0..session.sources.len() {
        if mask >> i & 1 == 1 {
            logs += unit.log(two_pi_e * dec.dist[base + i]);
            rate += dec.r[base + i];
        }
    }
    session.entropy.get(mask).expect("mask within table") - logs - rate
}

/// Step size of inner iteration `i`: `κ0 / sqrt(i + 1)`.
pub fn step_size(kappa0: f64, i: usize) -> f64 {
    kappa0 / ((i + 1) as f64).sqrt()
}

/// One projected gradient step on every multiplier.
pub fn dual_update(cfg: &NetworkConfig, dual: &DualState, dec: &ControlDecision, iteration: usize) -> DualState {
    let kl = step_size(dual.step_lambda, iteration);
    let kr = step_size(dual.step_rho, iteration);
    let mut next = dual.clone();
    for (n, node) in cfg.nodes.iter().enumerate() {
        if node.power_class.is_grid() {
            next.lambda[n] = (dual.lambda[n] + kl * lambda_gradient(cfg, n, dec)).max(0.0);
        }
    }
    for (f, s) in cfg.sessions.iter().enumerate() {
        for mask in 1..(1u32 << s.sources.len()) {
            let i = cfg.topo.rho_index(f, mask);
            next.rho[i] = (dual.rho[i] + kr * rho_gradient(cfg, f, mask, dec)).max(0.0);
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fig2;

    #[test]
    fn lambda_projects_at_zero() {
        let cfg = fig2();
        let b = cfg.node_index("B").unwrap();
        let mut dual = DualState::zeros(&cfg);
        dual.lambda[b] = 5.0;
        dual.step_lambda = 0.1;
        let mut dec = ControlDecision::zeros(&cfg);
        dec.y[b] = 60.0;
        assert_eq!(dual_update(&cfg, &dual, &dec, 0).lambda[b], 0.0);
        dec.y[b] = 0.0;
        assert_eq!(dual_update(&cfg, &dual, &dec, 0).lambda[b], 5.0);
    }

    #[test]
    fn zero_decision_lambda_gradient() {
        let cfg = fig2();
        let c = cfg.node_index("C").unwrap();
        let mut dec = ControlDecision::zeros(&cfg);
        dec.g[c] = 4.0;
        dec.d[c] = 1.0;
        dec.y[c] = 2.0;
        assert_eq!(lambda_gradient(&cfg, c, &dec), 1.0);
    }

    #[test]
    fn rho_gradient_at_max_distortion() {
        let cfg = fig2();
        let mut dec = ControlDecision::zeros(&cfg);
        dec.dist = vec![0.8, 0.8];
        let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        let h = cfg.sessions[0].entropy.get(3).unwrap();
        let expected = h - (two_pi_e * two_pi_e * 0.64).log2();
        assert!((rho_gradient(&cfg, 0, 3, &dec) - expected).abs() < 1e-12);
    }

    #[test]
    fn rho_sums_cover_containing_subsets() {
        let cfg = fig2();
        let mut dual = DualState::zeros(&cfg);
        dual.rho = vec![1.0, 2.0, 4.0];
        assert_eq!(dual.rho_sum(&cfg, 0), 5.0);
        assert_eq!(dual.rho_sum(&cfg, 1), 6.0);
    }
}
