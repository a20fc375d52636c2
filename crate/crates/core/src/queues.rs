//! Data and energy queues, the per-slot decision vector, and the
//! availability predicates that keep every queue nonnegative.

use std::fmt;

use serde::Serialize;

use crate::net::{LinkId, NetworkConfig, NodeId, PowerClass, SessionId};

/// Relative slack used when comparing stored energy or backlog against demand.
pub const AVAIL_TOL: f64 = 1e-9;

fn exceeds(demand: f64, stock: f64) -> bool {
    demand > stock + AVAIL_TOL * (1.0 + stock.abs())
}

/// Every decision variable of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlDecision {
    /// Harvested energy per node.
    pub e: Vec<f64>,
    /// Source rate per (session, source) key.
    pub r: Vec<f64>,
    /// Distortion per (session, source) key.
    pub dist: Vec<f64>,
    /// Grid draw, battery charge and discharge per node.
    pub y: Vec<f64>,
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    /// Transmit power per link (linear units).
    pub p: Vec<f64>,
    /// Physical flow, indexed `link * n_sessions + session`.
    pub x: Vec<f64>,
    /// Information flow, indexed `link * n_tuples + tuple`.
    pub x_info: Vec<f64>,
}

impl ControlDecision {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let n = cfg.n_nodes();
        let k = cfg.topo.sources.len();
        ControlDecision {
            e: vec![0.0; n],
            r: vec![0.0; k],
            dist: cfg.topo.sources.iter().map(|s| cfg.sessions[s.session].d_min).collect(),
            y: vec![0.0; n],
            g: vec![0.0; n],
            d: vec![0.0; n],
            p: vec![0.0; cfg.n_links()],
            x: vec![0.0; cfg.n_links() * cfg.n_sessions()],
            x_info: vec![0.0; cfg.n_links() * cfg.topo.n_tuples()],
        }
    }

    pub fn x_at(&self, cfg: &NetworkConfig, link: LinkId, f: SessionId) -> f64 {
        self.x[link * cfg.n_sessions() + f]
    }

    pub fn x_info_at(&self, cfg: &NetworkConfig, link: LinkId, tuple: usize) -> f64 {
        self.x_info[link * cfg.topo.n_tuples() + tuple]
    }

    pub fn log_powers(&self) -> Vec<f64> {
        self.p.iter().map(|p| p.ln()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataQueueBank {
    /// Backlog indexed `node * n_tuples + tuple`.
    pub q: Vec<f64>,
}

impl DataQueueBank {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        DataQueueBank {
            q: vec![0.0; cfg.n_nodes() * cfg.topo.n_tuples()],
        }
    }

    pub fn get(&self, cfg: &NetworkConfig, node: NodeId, tuple: usize) -> f64 {
        self.q[node * cfg.topo.n_tuples() + tuple]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyQueueBank {
    /// Stored energy per node; always 0 for nodes without an energy queue.
    pub e: Vec<f64>,
}

impl EnergyQueueBank {
    pub fn initial(cfg: &NetworkConfig) -> Self {
        EnergyQueueBank {
            e: cfg.nodes.iter().map(|n| n.initial_energy).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueBank {
    pub data: DataQueueBank,
    pub energy: EnergyQueueBank,
}

impl QueueBank {
    pub fn initial(cfg: &NetworkConfig) -> Self {
        QueueBank {
            data: DataQueueBank::zeros(cfg),
            energy: EnergyQueueBank::initial(cfg),
        }
    }
}

/// A broken availability condition or runtime bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// Stored energy cannot cover what the node spends (EH) or discharges (EG/ME).
    EnergyAvailability {
        node: String,
        class: PowerClass,
        stored: f64,
        required: f64,
    },
    /// Outgoing information flow exceeds the backlog.
    DataAvailability {
        node: String,
        tuple: String,
        backlog: f64,
        outgoing: f64,
    },
    /// Grid draw does not equal charge minus discharge plus consumption.
    GridBalance {
        node: String,
        y: f64,
        required: f64,
    },
    /// A box constraint on one decision variable.
    DecisionBox {
        variable: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    DataBound {
        node: String,
        tuple: String,
        backlog: f64,
        bound: f64,
    },
    EnergyBound {
        node: String,
        class: PowerClass,
        stored: f64,
        bound: f64,
    },
    /// Information flow leaves a queue that is not above `l_max * X_max`.
    ThinBacklog {
        node: String,
        tuple: String,
        backlog: f64,
        threshold: f64,
    },
    LambdaBound {
        node: String,
        lambda: f64,
        bound: f64,
    },
    RhoBound {
        session: String,
        source: String,
        rho_sum: f64,
        bound: f64,
    },
    Coding {
        link: String,
        session: String,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EnergyAvailability { node, class, stored, required } => {
                write!(f, "energy availability at {node} ({}): stored {stored} < required {required}", class.label())
            }
            Violation::DataAvailability { node, tuple, backlog, outgoing } => {
                write!(f, "data availability at {node} [{tuple}]: outgoing {outgoing} > backlog {backlog}")
            }
            Violation::GridBalance { node, y, required } => {
                write!(f, "grid balance at {node}: y = {y}, required {required}")
            }
            Violation::DecisionBox { variable, value, lo, hi } => {
                write!(f, "{variable} = {value} outside [{lo}, {hi}]")
            }
            Violation::DataBound { node, tuple, backlog, bound } => {
                write!(f, "data queue {node} [{tuple}] = {backlog} above {bound}")
            }
            Violation::EnergyBound { node, class, stored, bound } => {
                write!(f, "energy queue {node} ({}) = {stored} above {bound}", class.label())
            }
            Violation::ThinBacklog { node, tuple, backlog, threshold } => {
                write!(f, "transmission from {node} [{tuple}] with backlog {backlog} <= {threshold}")
            }
            Violation::LambdaBound { node, lambda, bound } => {
                write!(f, "lambda at {node} = {lambda} above {bound}")
            }
            Violation::RhoBound { session, source, rho_sum, bound } => {
                write!(f, "rho sum for {session}/{source} = {rho_sum} above {bound}")
            }
            Violation::Coding { link, session, detail } => {
                write!(f, "coding on {link} ({session}): {detail}")
            }
        }
    }
}

/// `f|s|d` label of a data tuple, using node ids.
pub fn tuple_label(cfg: &NetworkConfig, tuple: usize) -> String {
    let t = &cfg.topo.tuples[tuple];
    format!(
        "{}|{}|{}",
        cfg.sessions[t.session].id, cfg.nodes[t.source].id, cfg.nodes[t.sink].id
    )
}

/// Sensing plus transmission plus reception energy of `node`.
pub fn total_energy_consumption(cfg: &NetworkConfig, node: NodeId, dec: &ControlDecision) -> f64 {
    let mut sense = 0.0;
    for (k, src) in cfg.topo.sources.iter().enumerate() {
        if src.node == node {
            sense += cfg.sessions[src.session].sense_cost * dec.r[k];
        }
    }
    let tx: f64 = cfg.topo.out_links[node].iter().map(|&l| dec.p[l]).sum();
    let fs = cfg.n_sessions();
    let rx: f64 = cfg.topo.in_links[node]
        .iter()
        .map(|&l| dec.x[l * fs..(l + 1) * fs].iter().sum::<f64>())
        .sum();
    sense + tx + cfg.nodes[node].p_recv_cost * rx
}

/// `g - d + p_total`; negative when discharge exceeds what the node uses.
pub fn grid_draw_required(cfg: &NetworkConfig, node: NodeId, dec: &ControlDecision) -> f64 {
    dec.g[node] - dec.d[node] + total_energy_consumption(cfg, node, dec)
}

/// Total information flow of `tuple` leaving `node`.
pub fn outgoing_info(cfg: &NetworkConfig, dec: &ControlDecision, node: NodeId, tuple: usize) -> f64 {
    let t = cfg.topo.n_tuples();
    cfg.topo.out_links[node].iter().map(|&l| dec.x_info[l * t + tuple]).sum()
}

pub fn incoming_info(cfg: &NetworkConfig, dec: &ControlDecision, node: NodeId, tuple: usize) -> f64 {
    let t = cfg.topo.n_tuples();
    cfg.topo.in_links[node].iter().map(|&l| dec.x_info[l * t + tuple]).sum()
}

/// Arrivals of `tuple` at `node` this slot: inbound information flow plus
/// the sensed rate when `node` is the tuple's source.
pub fn data_arrivals(cfg: &NetworkConfig, dec: &ControlDecision, node: NodeId, tuple: usize) -> f64 {
    let tp = &cfg.topo.tuples[tuple];
    let mut a = incoming_info(cfg, dec, node, tuple);
    if tp.source == node {
        let k = cfg.topo.session_sources[tp.session].start + tp.source_idx;
        a += dec.r[k];
    }
    a
}

/// Advances every data queue. A tuple's sink absorbs what it receives, so
/// its own queue for that tuple stays at zero.
pub fn step_data_queue(
    cfg: &NetworkConfig,
    bank: &DataQueueBank,
    dec: &ControlDecision,
) -> Result<DataQueueBank, Vec<Violation>> {
    let t = cfg.topo.n_tuples();
    let violations = data_violations(cfg, bank, dec);
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut q = bank.q.clone();
    for n in 0..cfg.n_nodes() {
        for tuple in 0..t {
            let i = n * t + tuple;
            if cfg.topo.tuples[tuple].sink == n {
                q[i] = 0.0;
                continue;
            }
            q[i] = bank.q[i] - outgoing_info(cfg, dec, n, tuple) + data_arrivals(cfg, dec, n, tuple);
        }
    }
    Ok(DataQueueBank { q })
}

/// Next stored energy of one node.
pub fn step_energy_queue(
    cfg: &NetworkConfig,
    bank: &EnergyQueueBank,
    node: NodeId,
    dec: &ControlDecision,
) -> Result<f64, Violation> {
    if let Some(v) = energy_violation(cfg, bank, node, dec) {
        return Err(v);
    }
    let e = bank.e[node];
    Ok(match cfg.nodes[node].power_class {
        PowerClass::Eh => e + dec.e[node] - total_energy_consumption(cfg, node, dec),
        PowerClass::Eg => e + dec.g[node] - dec.d[node],
        PowerClass::Me => e + dec.e[node] + dec.g[node] - dec.d[node],
        PowerClass::Unmanaged => 0.0,
    })
}

pub fn step_energy_bank(
    cfg: &NetworkConfig,
    bank: &EnergyQueueBank,
    dec: &ControlDecision,
) -> Result<EnergyQueueBank, Vec<Violation>> {
    let mut e = Vec::with_capacity(bank.e.len());
    let mut errs = Vec::new();
    for n in 0..cfg.n_nodes() {
        match step_energy_queue(cfg, bank, n, dec) {
            Ok(v) => e.push(v),
            Err(v) => {
                errs.push(v);
                e.push(bank.e[n]);
            }
        }
    }
    if errs.is_empty() {
        Ok(EnergyQueueBank { e })
    } else {
        Err(errs)
    }
}

fn energy_violation(
    cfg: &NetworkConfig,
    bank: &EnergyQueueBank,
    node: NodeId,
    dec: &ControlDecision,
) -> Option<Violation> {
    let spec = &cfg.nodes[node];
    let stored = bank.e[node];
    let required = match spec.power_class {
        PowerClass::Eh => total_energy_consumption(cfg, node, dec),
        PowerClass::Eg | PowerClass::Me => dec.d[node],
        PowerClass::Unmanaged => return None,
    };
    exceeds(required, stored).then(|| Violation::EnergyAvailability {
        node: spec.id.clone(),
        class: spec.power_class,
        stored,
        required,
    })
}

fn data_violations(cfg: &NetworkConfig, bank: &DataQueueBank, dec: &ControlDecision) -> Vec<Violation> {
    let t = cfg.topo.n_tuples();
    let mut out = Vec::new();
    for n in 0..cfg.n_nodes() {
        for tuple in 0..t {
            let outgoing = outgoing_info(cfg, dec, n, tuple);
            let backlog = bank.q[n * t + tuple];
            if outgoing > 0.0 && exceeds(outgoing, backlog) {
                out.push(Violation::DataAvailability {
                    node: cfg.nodes[n].id.clone(),
                    tuple: tuple_label(cfg, tuple),
                    backlog,
                    outgoing,
                });
            }
        }
    }
    out
}

/// Empty iff every energy store covers its demand, every backlog covers its
/// outgoing information flow, and grid nodes balance supply exactly.
pub fn availability_check(cfg: &NetworkConfig, bank: &QueueBank, dec: &ControlDecision) -> Vec<Violation> {
    let mut out = Vec::new();
    for n in 0..cfg.n_nodes() {
        if let Some(v) = energy_violation(cfg, &bank.energy, n, dec) {
            out.push(v);
        }
        if cfg.nodes[n].power_class.is_grid() {
            let required = grid_draw_required(cfg, n, dec);
            let y = dec.y[n];
            if (y - required).abs() > AVAIL_TOL * (1.0 + required.abs()) {
                out.push(Violation::GridBalance {
                    node: cfg.nodes[n].id.clone(),
                    y,
                    required,
                });
            }
        }
    }
    out.extend(data_violations(cfg, &bank.data, dec));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fig2;

    fn node(cfg: &NetworkConfig, id: &str) -> NodeId {
        cfg.node_index(id).unwrap()
    }

    #[test]
    fn consumption_of_full_source() {
        let cfg = fig2();
        let a = node(&cfg, "A");
        let mut dec = ControlDecision::zeros(&cfg);
        assert_eq!(total_energy_consumption(&cfg, a, &dec), 0.0);
        dec.r[0] = 10.0;
        let ac = cfg.link_index("A", "C").unwrap();
        let ae = cfg.link_index("A", "E").unwrap();
        dec.p[ac] = 5.0;
        dec.p[ae] = 3.0;
        assert!((total_energy_consumption(&cfg, a, &dec) - 9.0).abs() < 1e-12);
        let c = node(&cfg, "C");
        let bc = cfg.link_index("B", "C").unwrap();
        dec.x[ac] = 10.0;
        dec.x[bc] = 10.0;
        assert!((total_energy_consumption(&cfg, c, &dec) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relay_without_reception_pays_only_transmit() {
        let cfg = fig2();
        let d = node(&cfg, "D");
        let mut dec = ControlDecision::zeros(&cfg);
        dec.p[cfg.link_index("D", "E").unwrap()] = 2.5;
        assert_eq!(total_energy_consumption(&cfg, d, &dec), 2.5);
    }

    #[test]
    fn grid_draw() {
        let cfg = fig2();
        let b = node(&cfg, "B");
        let mut dec = ControlDecision::zeros(&cfg);
        dec.g[b] = 15.0;
        dec.r[1] = 10.0;
        dec.p[cfg.link_index("B", "C").unwrap()] = 8.0;
        assert!((grid_draw_required(&cfg, b, &dec) - 24.0).abs() < 1e-12);
        dec.g[b] = 0.0;
        dec.d[b] = 15.0;
        assert!(grid_draw_required(&cfg, b, &dec) < 0.0);
    }

    #[test]
    fn data_step_arithmetic_and_errors() {
        let cfg = fig2();
        let c = node(&cfg, "C");
        let t = cfg.topo.n_tuples();
        let a = node(&cfg, "A");
        let mut bank = DataQueueBank::zeros(&cfg);
        bank.q[c * t] = 5.0;
        bank.q[a * t] = 3.0;
        let mut dec = ControlDecision::zeros(&cfg);
        let cd = cfg.link_index("C", "D").unwrap();
        let ac = cfg.link_index("A", "C").unwrap();
        dec.x_info[cd * t] = 2.0;
        dec.x_info[ac * t] = 3.0;
        let next = step_data_queue(&cfg, &bank, &dec).unwrap();
        assert_eq!(next.q[c * t], 6.0);
        assert_eq!(next.q[a * t], 0.0);
        dec.x_info[cd * t] = 6.0;
        let err = step_data_queue(&cfg, &bank, &dec).unwrap_err();
        assert_eq!(err.len(), 1);
    }

    #[test]
    fn source_arrival() {
        let cfg = fig2();
        let a = node(&cfg, "A");
        let t = cfg.topo.n_tuples();
        let mut dec = ControlDecision::zeros(&cfg);
        dec.r[0] = 10.0;
        let next = step_data_queue(&cfg, &DataQueueBank::zeros(&cfg), &dec).unwrap();
        // A is the source of tuples 0 and 1 (sinks E and F).
        assert_eq!(next.q[a * t], 10.0);
        assert_eq!(next.q[a * t + 1], 10.0);
        assert_eq!(next.q[a * t + 2], 0.0);
    }

    #[test]
    fn energy_steps() {
        let cfg = fig2();
        let (a, b, c) = (node(&cfg, "A"), node(&cfg, "B"), node(&cfg, "C"));
        let mut bank = EnergyQueueBank::initial(&cfg);
        let mut dec = ControlDecision::zeros(&cfg);
        bank.e[a] = 50.0;
        dec.e[a] = 30.0;
        dec.r[0] = 10.0;
        dec.p[cfg.link_index("A", "C").unwrap()] = 9.0;
        assert!((step_energy_queue(&cfg, &bank, a, &dec).unwrap() - 70.0).abs() < 1e-12);

        bank.e[b] = 5.0;
        dec.d[b] = 15.0;
        assert!(step_energy_queue(&cfg, &bank, b, &dec).is_err());

        bank.e[c] = 0.0;
        dec.e[c] = 10.0;
        dec.g[c] = 15.0;
        assert_eq!(step_energy_queue(&cfg, &bank, c, &dec).unwrap(), 25.0);
    }

    #[test]
    fn availability_flags() {
        let cfg = fig2();
        let a = node(&cfg, "A");
        let mut bank = QueueBank::initial(&cfg);
        let mut dec = ControlDecision::zeros(&cfg);
        assert!(availability_check(&cfg, &bank, &dec).is_empty());
        bank.energy.e[a] = 5.0;
        dec.r[0] = 10.0;
        dec.p[cfg.link_index("A", "C").unwrap()] = 8.0;
        dec.x_info[cfg.link_index("A", "C").unwrap() * cfg.topo.n_tuples()] = 1.0;
        let v = availability_check(&cfg, &bank, &dec);
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(matches!(v[0], Violation::EnergyAvailability { .. }));
        assert!(matches!(v[1], Violation::DataAvailability { .. }));
    }
}
