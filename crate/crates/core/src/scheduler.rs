//! Max-weight session selection and flow assignment with intra-session
//! network coding: one session per link, and every (source, sink) pair of
//! that session that clears its own backlog gate rides the same coded flow.

use serde::Serialize;

use crate::controller::link_weights;
use crate::net::{LinkId, NetworkConfig, SessionId};
use crate::queues::{tuple_label, DataQueueBank, Violation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleDecision {
    pub chosen_session: Vec<Option<SessionId>>,
    /// `link * n_sessions + session`
    pub x: Vec<f64>,
    /// `link * n_tuples + tuple`
    pub x_info: Vec<f64>,
}

/// Largest W over sessions, smallest id on ties; `None` when every W is 0.
pub fn best_session(
    cfg: &NetworkConfig,
    link: LinkId,
    data: &DataQueueBank,
    a: &[f64],
    epsilon: f64,
) -> (Option<SessionId>, f64) {
    let mut best: (Option<SessionId>, f64) = (None, 0.0);
    for f in 0..cfg.n_sessions() {
        let (_, w) = link_weights(cfg, link, f, data, a, epsilon);
        if w > best.1 {
            best = (Some(f), w);
        }
    }
    best
}

/// W* per link, the weight the power allocation sees.
pub fn max_weights(cfg: &NetworkConfig, data: &DataQueueBank, a: &[f64], epsilon: f64) -> Vec<f64> {
    (0..cfg.n_links())
        .map(|l| best_session(cfg, l, data, a, epsilon).1)
        .collect()
}

/// Whether tuple `t` may send over `link`: `Q_n - Q_b + A_b P̃_R - ε > 0`.
pub fn tuple_gate(cfg: &NetworkConfig, link: LinkId, t: usize, data: &DataQueueBank, a: &[f64], epsilon: f64) -> bool {
    let spec = &cfg.links[link];
    let (n, b) = (spec.from, spec.to);
    data.get(cfg, n, t) - data.get(cfg, b, t) + a[b] * cfg.nodes[b].p_recv_cost - epsilon > 0.0
}

/// Assigns flows on every link from the slot's capacities. With
/// `defensive_clamp`, information flow is also capped by the backlog left
/// after earlier links of the same transmitter.
pub fn schedule(
    cfg: &NetworkConfig,
    capacities: &[f64],
    data: &DataQueueBank,
    a: &[f64],
    epsilon: f64,
    defensive_clamp: bool,
) -> ScheduleDecision {
    let fs = cfg.n_sessions();
    let nt = cfg.topo.n_tuples();
    let mut out = ScheduleDecision {
        chosen_session: vec![None; cfg.n_links()],
        x: vec![0.0; cfg.n_links() * fs],
        x_info: vec![0.0; cfg.n_links() * nt],
    };
    let mut remaining = data.q.clone();
    for l in 0..cfg.n_links() {
        let (chosen, w) = best_session(cfg, l, data, a, epsilon);
        let Some(f) = chosen else { continue };
        if w <= 0.0 {
            continue;
        }
        let c = capacities[l];
        out.chosen_session[l] = Some(f);
        out.x[l * fs + f] = c;
        let n = cfg.links[l].from;
        for t in cfg.topo.session_tuples[f].clone() {
            if tuple_gate(cfg, l, t, data, a, epsilon) {
                let mut info = c;
                if defensive_clamp {
                    let left = &mut remaining[n * nt + t];
                    if info > *left {
                        log::warn!("defensive clamp on {} [{}]: {} -> {}", cfg.link_label(l), tuple_label(cfg, t), info, *left);
                        info = left.max(0.0);
                    }
                    *left -= info;
                }
                out.x_info[l * nt + t] = info;
            }
        }
    }
    out
}

/// Checks `x̃ ≤ x`, one session per link, and the link-rate cap.
pub fn coding_consistency_check(cfg: &NetworkConfig, x: &[f64], x_info: &[f64]) -> Vec<Violation> {
    let fs = cfg.n_sessions();
    let nt = cfg.topo.n_tuples();
    let mut out = Vec::new();
    for l in 0..cfg.n_links() {
        let busy: Vec<usize> = (0..fs).filter(|&f| x[l * fs + f] > 0.0).collect();
        if busy.len() > 1 {
            out.push(Violation::Coding {
                link: cfg.link_label(l),
                session: cfg.sessions[busy[1]].id.clone(),
                detail: format!("{} sessions share the link", busy.len()),
            });
        }
        let total: f64 = x[l * fs..(l + 1) * fs].iter().sum();
        if total > cfg.params.x_max * (1.0 + 1e-12) {
            out.push(Violation::Coding {
                link: cfg.link_label(l),
                session: String::new(),
                detail: format!("physical rate {total} above X_max"),
            });
        }
        for (t, tp) in cfg.topo.tuples.iter().enumerate() {
            let info = x_info[l * nt + t];
            let phys = x[l * fs + tp.session];
            if info > phys {
                out.push(Violation::Coding {
                    link: cfg.link_label(l),
                    session: cfg.sessions[tp.session].id.clone(),
                    detail: format!("information rate {info} of [{}] above physical rate {phys}", tuple_label(cfg, t)),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fig2;

    fn two_sessions() -> NetworkConfig {
        let mut cfg = fig2();
        let mut s2 = cfg.sessions[0].clone();
        s2.id = "second".into();
        cfg.sessions.push(s2);
        cfg.rebuild();
        cfg
    }

    #[test]
    fn picks_positive_weight_session() {
        let cfg = two_sessions();
        let ac = cfg.link_index("A", "C").unwrap();
        let a_node = cfg.node_index("A").unwrap();
        let nt = cfg.topo.n_tuples();
        let mut data = DataQueueBank::zeros(&cfg);
        // Session 2 tuples are 4..8; session 1 stays empty.
        for t in 4..8 {
            data.q[a_node * nt + t] = 60.0;
        }
        let caps = vec![9.0; cfg.n_links()];
        let a = vec![0.0; cfg.n_nodes()];
        let s = schedule(&cfg, &caps, &data, &a, 30.0, false);
        assert_eq!(s.chosen_session[ac], Some(1));
        assert_eq!(s.x[ac * 2 + 1], 9.0);
        assert_eq!(s.x[ac * 2], 0.0);
        assert_eq!(s.x_info[ac * nt + 4], 9.0);
        assert!(coding_consistency_check(&cfg, &s.x, &s.x_info).is_empty());
    }

    #[test]
    fn zero_weights_stay_silent() {
        let cfg = fig2();
        let data = DataQueueBank::zeros(&cfg);
        let s = schedule(&cfg, &vec![9.0; 7], &data, &vec![0.0; 6], 30.0, false);
        assert!(s.x.iter().all(|&x| x == 0.0));
        assert!(s.chosen_session.iter().all(Option::is_none));
    }

    #[test]
    fn per_tuple_gate_can_close_while_link_carries_flow() {
        let cfg = fig2();
        let ac = cfg.link_index("A", "C").unwrap();
        let (a_node, c_node) = (cfg.node_index("A").unwrap(), cfg.node_index("C").unwrap());
        let nt = cfg.topo.n_tuples();
        let mut data = DataQueueBank::zeros(&cfg);
        data.q[a_node * nt] = 200.0;
        data.q[a_node * nt + 1] = 25.0;
        let mut a = vec![0.0; 6];
        a[c_node] = -224.0;
        assert!(!tuple_gate(&cfg, ac, 1, &data, &a, 30.0));
        let s = schedule(&cfg, &vec![9.0; 7], &data, &a, 30.0, false);
        assert_eq!(s.x[ac], 9.0);
        assert_eq!(s.x_info[ac * nt], 9.0);
        assert_eq!(s.x_info[ac * nt + 1], 0.0);
    }

    #[test]
    fn coding_violation_detected() {
        let cfg = fig2();
        let mut x = vec![0.0; 7];
        let mut xi = vec![0.0; 7 * 4];
        x[0] = 9.0;
        xi[0] = 9.0;
        xi[1] = 9.0;
        assert!(coding_consistency_check(&cfg, &x, &xi).is_empty());
        xi[2] = 10.0;
        assert_eq!(coding_consistency_check(&cfg, &x, &xi).len(), 1);
    }
}
