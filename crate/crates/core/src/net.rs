//! Static network description and the per-slot physical layer.
//!
//! A [`NetworkConfig`] is built once (usually by [`crate::config::load_config`])
//! and never mutated. Everything that changes per slot lives in
//! [`EnvironmentState`], drawn by [`sample_environment`].

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyTable;

pub type NodeId = usize;
pub type LinkId = usize;
pub type SessionId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PowerClass {
    /// Renewable harvesting only.
    #[serde(rename = "EH")]
    Eh,
    /// Grid plus battery, no harvester.
    #[serde(rename = "EG")]
    Eg,
    /// Grid, battery and harvester.
    #[serde(rename = "ME")]
    Me,
    /// Outside every energy set; no energy queue is kept.
    #[serde(rename = "none")]
    Unmanaged,
}

impl PowerClass {
    pub fn has_energy_queue(self) -> bool {
        !matches!(self, PowerClass::Unmanaged)
    }

    pub fn is_grid(self) -> bool {
        matches!(self, PowerClass::Eg | PowerClass::Me)
    }

    pub fn harvests(self) -> bool {
        matches!(self, PowerClass::Eh | PowerClass::Me)
    }

    pub fn label(self) -> &'static str {
        match self {
            PowerClass::Eh => "EH",
            PowerClass::Eg => "EG",
            PowerClass::Me => "ME",
            PowerClass::Unmanaged => "none",
        }
    }
}

/// Logarithm base shared by capacities, entropies and the rate-distortion
/// coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoUnit {
    #[default]
    Bits,
    Nats,
}

impl InfoUnit {
    pub fn log(self, x: f64) -> f64 {
        match self {
            InfoUnit::Bits => x.log2(),
            InfoUnit::Nats => x.ln(),
        }
    }

    /// Factor turning a natural log into this unit.
    pub fn per_nat(self) -> f64 {
        match self {
            InfoUnit::Bits => std::f64::consts::LOG2_E,
            InfoUnit::Nats => 1.0,
        }
    }
}

/// Distortion utility U(D); every variant is concave and nonincreasing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    /// U(D) = ln(1 - D)
    #[default]
    LogOneMinus,
    /// U(D) = -slope * D
    Linear { slope: f64 },
    /// U(D) = -a * D^2
    Quadratic { a: f64 },
}

impl Utility {
    pub fn value(&self, d: f64) -> f64 {
        match *self {
            Utility::LogOneMinus => (1.0 - d).ln(),
            Utility::Linear { slope } => -slope * d,
            Utility::Quadratic { a } => -a * d * d,
        }
    }

    pub fn derivative(&self, d: f64) -> f64 {
        match *self {
            Utility::LogOneMinus => -1.0 / (1.0 - d),
            Utility::Linear { slope } => -slope,
            Utility::Quadratic { a } => -2.0 * a * d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSpec {
    pub id: String,
    pub power_class: PowerClass,
    pub position: [f64; 2],
    /// Transmit power budget shared by all outgoing links.
    pub p_max: f64,
    /// Energy spent per unit of received data.
    pub p_recv_cost: f64,
    pub g_max: f64,
    pub d_max: f64,
    pub y_max: f64,
    /// Uniform harvest range, for EH and ME nodes.
    pub harvest: Option<(f64, f64)>,
    pub battery_capacity: Option<f64>,
    pub initial_energy: f64,
}

impl NodeSpec {
    pub fn h_max(&self) -> f64 {
        self.harvest.map_or(0.0, |(_, hi)| hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSpec {
    pub from: NodeId,
    pub to: NodeId,
    pub distance: f64,
    /// Receiver noise power N_nb.
    pub noise: f64,
    /// Links whose transmissions interfere at this link's receiver.
    pub interferers: Vec<LinkId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSpec {
    pub id: String,
    pub sources: Vec<NodeId>,
    pub sinks: Vec<NodeId>,
    /// Energy spent per unit of sensed and compressed data.
    pub sense_cost: f64,
    pub entropy: EntropyTable,
    pub utility: Utility,
    pub r_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccessProbabilities {
    /// Transmission probability per link.
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalParams {
    pub bw: f64,
    pub x_max: f64,
    pub l_max: usize,
    pub varpi1: f64,
    pub varpi2: f64,
    pub v: f64,
    pub delta: f64,
    pub price_range: (f64, f64),
    pub path_loss_exponent: f64,
    pub fading: bool,
    pub rate_log: InfoUnit,
}

/// Which inner-loop primal point a slot commits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimalCommit {
    /// Energy, source-rate and distortion decisions averaged over the inner
    /// iterations; power and flows from the last one.
    #[default]
    Average,
    /// Everything from the last inner iteration.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverParams {
    pub dual_iterations: usize,
    pub commit: PrimalCommit,
    pub kappa_lambda: f64,
    pub kappa_rho: f64,
    pub bcd_max_sweeps: usize,
    pub bcd_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            dual_iterations: 50,
            commit: PrimalCommit::Average,
            kappa_lambda: 0.5,
            kappa_rho: 0.5,
            bcd_max_sweeps: 200,
            bcd_tol: 1e-6,
        }
    }
}

/// Affine replacements `a * V + b` for the energy perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaOverride {
    #[serde(rename = "eH")]
    pub eh: [f64; 2],
    #[serde(rename = "eG")]
    pub eg: [f64; 2],
    #[serde(rename = "eM")]
    pub em: [f64; 2],
}

/// One data-queue index: session, source position and sink position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tuple {
    pub session: SessionId,
    pub source_idx: usize,
    pub sink_idx: usize,
    pub source: NodeId,
    pub sink: NodeId,
}

/// A (session, source) pair; owns one rate and one distortion variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceKey {
    pub session: SessionId,
    pub source_idx: usize,
    pub node: NodeId,
}

/// Adjacency and flat index maps derived from the node, link and session lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub out_links: Vec<Vec<LinkId>>,
    pub in_links: Vec<Vec<LinkId>>,
    pub tuples: Vec<Tuple>,
    pub session_tuples: Vec<Range<usize>>,
    pub sources: Vec<SourceKey>,
    pub session_sources: Vec<Range<usize>>,
    /// Start of each session's block of rate-region multipliers.
    pub rho_offset: Vec<usize>,
    pub rho_len: usize,
}

impl Topology {
    pub fn build(n_nodes: usize, links: &[LinkSpec], sessions: &[SessionSpec]) -> Self {
        let mut out_links = vec![Vec::new(); n_nodes];
        let mut in_links = vec![Vec::new(); n_nodes];
        for (l, link) in links.iter().enumerate() {
            out_links[link.from].push(l);
            in_links[link.to].push(l);
        }
        let mut tuples = Vec::new();
        let mut session_tuples = Vec::new();
        let mut sources = Vec::new();
        let mut session_sources = Vec::new();
        let mut rho_offset = Vec::new();
        let mut rho_len = 0;
        for (f, s) in sessions.iter().enumerate() {
            let t0 = tuples.len();
            for (si, &src) in s.sources.iter().enumerate() {
                for (di, &snk) in s.sinks.iter().enumerate() {
                    tuples.push(Tuple {
                        session: f,
                        source_idx: si,
                        sink_idx: di,
                        source: src,
                        sink: snk,
                    });
                }
            }
            session_tuples.push(t0..tuples.len());
            let k0 = sources.len();
            for (si, &src) in s.sources.iter().enumerate() {
                sources.push(SourceKey {
                    session: f,
                    source_idx: si,
                    node: src,
                });
            }
            session_sources.push(k0..sources.len());
            rho_offset.push(rho_len);
            rho_len += (1usize << s.sources.len()) - 1;
        }
        Topology {
            out_links,
            in_links,
            tuples,
            session_tuples,
            sources,
            session_sources,
            rho_offset,
            rho_len,
        }
    }

    pub fn n_tuples(&self) -> usize {
        self.tuples.len()
    }

    /// Index of the multiplier for nonempty subset `mask` of session `f`.
    pub fn rho_index(&self, f: SessionId, mask: u32) -> usize {
        debug_assert!(mask > 0);
        self.rho_offset[f] + mask as usize - 1
    }
}

/// Immutable, validated network description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub sessions: Vec<SessionSpec>,
    pub access: AccessProbabilities,
    pub params: GlobalParams,
    pub solver: SolverParams,
    pub theta_override: Option<ThetaOverride>,
    pub topo: Topology,
    /// Static node-to-node channel gains, row-major `[from * n + to]`.
    pub base_gain: Vec<f64>,
}

impl NetworkConfig {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_sessions(&self) -> usize {
        self.sessions.len()
    }

    pub fn node_index(&self, id: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn link_index(&self, from: &str, to: &str) -> Option<LinkId> {
        let (a, b) = (self.node_index(from)?, self.node_index(to)?);
        self.links.iter().position(|l| l.from == a && l.to == b)
    }

    pub fn link_label(&self, l: LinkId) -> String {
        let link = &self.links[l];
        format!("{}->{}", self.nodes[link.from].id, self.nodes[link.to].id)
    }

    /// Largest in- or out-degree over all nodes.
    pub fn max_degree(&self) -> usize {
        self.topo
            .out_links
            .iter()
            .chain(self.topo.in_links.iter())
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    /// Rebuilds derived data after editing nodes, links or sessions in code.
    pub fn rebuild(&mut self) {
        self.topo = Topology::build(self.nodes.len(), &self.links, &self.sessions);
        self.base_gain = base_gains(&self.nodes, &self.links, self.params.path_loss_exponent);
    }
}

/// Node-pair gains `distance^-exponent`; a link's configured distance wins
/// for its own endpoint pair.
pub fn base_gains(nodes: &[NodeSpec], links: &[LinkSpec], exponent: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let dx = nodes[a].position[0] - nodes[b].position[0];
                let dy = nodes[a].position[1] - nodes[b].position[1];
                let dist = dx.hypot(dy);
                g[a * n + b] = if dist > 0.0 { dist.powf(-exponent) } else { 0.0 };
            }
        }
    }
    for link in links {
        g[link.from * n + link.to] = link.distance.powf(-exponent);
    }
    g
}

/// Exogenous random state of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentState {
    /// S_nb per link.
    pub channel_gain: Vec<f64>,
    /// Gains between every ordered node pair, row-major.
    pub cross_gain: Vec<f64>,
    /// Harvestable energy per node (0 where no harvester).
    pub harvestable: Vec<f64>,
    /// Electricity price per node (0 where not grid-connected).
    pub price: Vec<f64>,
}

impl EnvironmentState {
    /// Static environment with no harvest and zero prices.
    pub fn quiet(cfg: &NetworkConfig) -> Self {
        EnvironmentState {
            channel_gain: cfg
                .links
                .iter()
                .map(|l| cfg.base_gain[l.from * cfg.n_nodes() + l.to])
                .collect(),
            cross_gain: cfg.base_gain.clone(),
            harvestable: vec![0.0; cfg.n_nodes()],
            price: vec![0.0; cfg.n_nodes()],
        }
    }

    pub fn gain(&self, n_nodes: usize, from: NodeId, to: NodeId) -> f64 {
        self.cross_gain[from * n_nodes + to]
    }
}

/// Draws harvest per node, then price per node, then (when enabled) one
/// exponential fading factor per ordered node pair. The order is fixed so a
/// seed always replays the same sequence.
pub fn sample_environment(cfg: &NetworkConfig, rng: &mut ChaCha8Rng) -> EnvironmentState {
    let n = cfg.n_nodes();
    let mut harvestable = vec![0.0; n];
    for (i, node) in cfg.nodes.iter().enumerate() {
        if let (true, Some((lo, hi))) = (node.power_class.harvests(), node.harvest) {
            let u: f64 = rng.random();
            harvestable[i] = lo + (hi - lo) * u;
        }
    }
    let (pmin, pmax) = cfg.params.price_range;
    let mut price = vec![0.0; n];
    for (i, node) in cfg.nodes.iter().enumerate() {
        if node.power_class.is_grid() {
            let u: f64 = rng.random();
            price[i] = pmin + (pmax - pmin) * u;
        }
    }
    let mut cross_gain = cfg.base_gain.clone();
    if cfg.params.fading {
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let h: f64 = rng.sample(Exp1);
                    cross_gain[a * n + b] *= h;
                }
            }
        }
    }
    let channel_gain = cfg
        .links
        .iter()
        .map(|l| cross_gain[l.from * n + l.to])
        .collect();
    EnvironmentState {
        channel_gain,
        cross_gain,
        harvestable,
        price,
    }
}

/// α_nb: the link transmits, nobody transmits to its transmitter, and its
/// receiver stays silent.
pub fn success_probability(cfg: &NetworkConfig, link: LinkId, access: &AccessProbabilities) -> f64 {
    let spec = &cfg.links[link];
    let q = &access.q;
    let mut alpha = q[link];
    for &l in &cfg.topo.in_links[spec.from] {
        alpha *= 1.0 - q[l];
    }
    let rx_busy: f64 = cfg.topo.out_links[spec.to].iter().map(|&l| q[l]).sum();
    (alpha * (1.0 - rx_busy)).clamp(0.0, 1.0)
}

/// SINR of `link` for per-link log powers (`-inf` means silent).
pub fn sinr(
    cfg: &NetworkConfig,
    link: LinkId,
    log_powers: &[f64],
    access: &AccessProbabilities,
    env: &EnvironmentState,
) -> f64 {
    let spec = &cfg.links[link];
    let n = cfg.n_nodes();
    let signal = env.channel_gain[link] * log_powers[link].exp();
    if signal == 0.0 {
        return 0.0;
    }
    let mut denom = spec.noise;
    for &j in &spec.interferers {
        let from = cfg.links[j].from;
        denom += env.gain(n, from, spec.to) * log_powers[j].exp() * access.q[j];
    }
    signal / denom
}

/// Clamped capacity `min(X_max, max(0, BW * alpha * log(sinr)))`.
pub fn capacity_from_sinr(cfg: &NetworkConfig, alpha: f64, gamma: f64) -> f64 {
    if gamma <= 1.0 {
        return 0.0;
    }
    let c = cfg.params.bw * alpha * cfg.params.rate_log.log(gamma);
    c.clamp(0.0, cfg.params.x_max)
}

pub fn link_capacity(
    cfg: &NetworkConfig,
    link: LinkId,
    log_powers: &[f64],
    access: &AccessProbabilities,
    env: &EnvironmentState,
) -> f64 {
    let alpha = success_probability(cfg, link, access);
    capacity_from_sinr(cfg, alpha, sinr(cfg, link, log_powers, access, env))
}

/// Table lookup of H(subset | other sources) for a session.
pub fn conditional_entropy(session: &SessionSpec, mask: u32) -> Option<f64> {
    session.entropy.get(mask)
}
