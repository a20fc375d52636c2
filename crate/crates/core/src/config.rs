//! TOML network description.
//!
//! Top-level scalar keys keep the parameter names used in the literature
//! (`R_max`, `P_n_max`, `N_nb`, ...). Nodes, links and sessions are arrays of
//! tables; per-entry keys override the global defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::entropy::{subset_label, EntropyTable};
use crate::error::ConfigError;
use crate::net::{
    base_gains, AccessProbabilities, GlobalParams, InfoUnit, LinkSpec, NetworkConfig, NodeSpec,
    PowerClass, PrimalCommit, SessionSpec, SolverParams, ThetaOverride, Topology, Utility,
};

/// The bundled six-node reference network.
pub const FIG2_CFG: &str = include_str!("../configs/fig2.cfg");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    R_max: f64,
    D_min: f64,
    D_max: f64,
    P_n_max: f64,
    N_nb: f64,
    BW: f64,
    X_max: f64,
    P_f_S: f64,
    P_n_R: f64,
    g_n_max: f64,
    d_n_max: f64,
    y_n_max: f64,
    l_max: usize,
    varpi1: f64,
    varpi2: f64,
    delta: f64,
    #[serde(default = "default_v")]
    V: f64,
    S_G_min: f64,
    S_G_max: f64,
    #[serde(default)]
    h_EH: Option<[f64; 2]>,
    #[serde(default)]
    h_ME: Option<[f64; 2]>,
    #[serde(default = "default_path_loss")]
    path_loss_exponent: f64,
    #[serde(default)]
    fading: bool,
    #[serde(default)]
    rate_log: InfoUnit,
    nodes: Vec<RawNode>,
    links: Vec<RawLink>,
    sessions: Vec<RawSession>,
    #[serde(default)]
    theta_override: Option<ThetaOverride>,
    #[serde(default)]
    dual: Option<RawDual>,
    #[serde(default)]
    power: Option<RawPower>,
}

fn default_v() -> f64 {
    100.0
}

fn default_path_loss() -> f64 {
    4.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawNode {
    id: String,
    class: PowerClass,
    position: [f64; 2],
    P_n_max: Option<f64>,
    P_n_R: Option<f64>,
    g_n_max: Option<f64>,
    d_n_max: Option<f64>,
    y_n_max: Option<f64>,
    h: Option<[f64; 2]>,
    battery_capacity: Option<f64>,
    E0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawLink {
    from: String,
    to: String,
    q: f64,
    distance: Option<f64>,
    N_nb: Option<f64>,
    /// Interfering links written as `"X->Y"`.
    interferers: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSession {
    id: String,
    sources: Vec<String>,
    sinks: Vec<String>,
    P_f_S: Option<f64>,
    R_max: Option<f64>,
    D_min: Option<f64>,
    D_max: Option<f64>,
    #[serde(default)]
    utility: Utility,
    /// Keys are comma-separated source ids, e.g. `"A,B"`.
    entropy: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDual {
    iterations: Option<usize>,
    commit: Option<PrimalCommit>,
    kappa0: Option<f64>,
    kappa_lambda: Option<f64>,
    kappa_rho: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    max_sweeps: Option<usize>,
    tol: Option<f64>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<NetworkConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<NetworkConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    build(raw)
}

pub fn fig2() -> NetworkConfig {
    parse_config(FIG2_CFG).expect("bundled config is valid")
}

fn check(cond: bool, field: impl FnOnce() -> String, reason: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::invalid(field(), reason))
    }
}

fn finite_nonneg(x: f64, field: &str) -> Result<f64, ConfigError> {
    check(x.is_finite() && x >= 0.0, || field.to_string(), "must be finite and nonnegative")?;
    Ok(x)
}

fn range(r: [f64; 2], field: &str) -> Result<(f64, f64), ConfigError> {
    check(
        r[0].is_finite() && r[1].is_finite() && 0.0 <= r[0] && r[0] <= r[1],
        || field.to_string(),
        "range must satisfy 0 <= lo <= hi",
    )?;
    Ok((r[0], r[1]))
}

fn build(raw: RawConfig) -> Result<NetworkConfig, ConfigError> {
    check(raw.BW > 0.0 && raw.BW.is_finite(), || "BW".into(), "must be positive")?;
    finite_nonneg(raw.X_max, "X_max")?;
    finite_nonneg(raw.R_max, "R_max")?;
    finite_nonneg(raw.V, "V")?;
    finite_nonneg(raw.delta, "delta")?;
    finite_nonneg(raw.P_f_S, "P_f_S")?;
    finite_nonneg(raw.P_n_R, "P_n_R")?;
    for (w, name) in [(raw.varpi1, "varpi1"), (raw.varpi2, "varpi2")] {
        check((0.0..=1.0).contains(&w), || name.into(), "must lie in [0, 1]")?;
    }
    let price_range = range([raw.S_G_min, raw.S_G_max], "S_G_min/S_G_max")?;
    check(raw.N_nb > 0.0, || "N_nb".into(), "noise must be positive")?;
    check(raw.path_loss_exponent > 0.0, || "path_loss_exponent".into(), "must be positive")?;

    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for (i, rn) in raw.nodes.into_iter().enumerate() {
        let field = |k: &str| format!("nodes.{}.{}", rn.id, k);
        if ids.insert(rn.id.clone(), i).is_some() {
            return Err(ConfigError::invalid(field("id"), "duplicate node id"));
        }
        let p_max = rn.P_n_max.unwrap_or(raw.P_n_max);
        check(p_max > 0.0 && p_max.is_finite(), || field("P_n_max"), "must be positive")?;
        let p_recv_cost = finite_nonneg(rn.P_n_R.unwrap_or(raw.P_n_R), &field("P_n_R"))?;
        let grid = rn.class.is_grid();
        let cap = |own: Option<f64>, default: f64, key: &str| -> Result<f64, ConfigError> {
            match (grid, own) {
                (true, v) => finite_nonneg(v.unwrap_or(default), &field(key)),
                (false, Some(v)) if v != 0.0 => Err(ConfigError::invalid(
                    field(key),
                    "only grid-connected nodes have battery or grid caps",
                )),
                (false, _) => Ok(0.0),
            }
        };
        let g_max = cap(rn.g_n_max, raw.g_n_max, "g_n_max")?;
        let d_max = cap(rn.d_n_max, raw.d_n_max, "d_n_max")?;
        let y_max = cap(rn.y_n_max, raw.y_n_max, "y_n_max")?;
        let class_default = match rn.class {
            PowerClass::Eh => raw.h_EH,
            PowerClass::Me => raw.h_ME,
            _ => None,
        };
        let harvest = match (rn.class.harvests(), rn.h.or(class_default)) {
            (true, Some(r)) => Some(range(r, &field("h"))?),
            (true, None) => {
                return Err(ConfigError::invalid(field("h"), "harvesting node needs a harvest range"))
            }
            (false, Some(_)) if rn.h.is_some() => {
                return Err(ConfigError::invalid(field("h"), "node class has no harvester"))
            }
            (false, _) => None,
        };
        let initial_energy = finite_nonneg(rn.E0.unwrap_or(0.0), &field("E0"))?;
        check(
            rn.class.has_energy_queue() || initial_energy == 0.0,
            || field("E0"),
            "node has no energy queue",
        )?;
        if let Some(c) = rn.battery_capacity {
            check(c > 0.0, || field("battery_capacity"), "must be positive")?;
        }
        nodes.push(NodeSpec {
            id: rn.id.clone(),
            power_class: rn.class,
            position: rn.position,
            p_max,
            p_recv_cost,
            g_max,
            d_max,
            y_max,
            harvest,
            battery_capacity: rn.battery_capacity,
            initial_energy,
        });
    }
    let node_id = |id: &str| ids.get(id).copied().ok_or_else(|| ConfigError::UnknownNode(id.to_string()));

    let mut links = Vec::with_capacity(raw.links.len());
    let mut q = Vec::with_capacity(raw.links.len());
    for rl in &raw.links {
        let label = format!("links.{}->{}", rl.from, rl.to);
        let (from, to) = (node_id(&rl.from)?, node_id(&rl.to)?);
        check(from != to, || label.clone(), "from and to must differ")?;
        if links.iter().any(|l: &LinkSpec| l.from == from && l.to == to) {
            return Err(ConfigError::invalid(label, "duplicate link"));
        }
        let distance = match rl.distance {
            Some(d) => d,
            None => {
                let (a, b) = (nodes[from].position, nodes[to].position);
                (a[0] - b[0]).hypot(a[1] - b[1])
            }
        };
        check(distance > 0.0 && distance.is_finite(), || format!("{label}.distance"), "must be positive")?;
        let noise = rl.N_nb.unwrap_or(raw.N_nb);
        check(noise > 0.0 && noise.is_finite(), || format!("{label}.N_nb"), "noise must be positive")?;
        if !(0.0..=1.0).contains(&rl.q) {
            return Err(ConfigError::ProbabilityOutOfRange {
                field: format!("{label}.q"),
                value: rl.q,
            });
        }
        q.push(rl.q);
        links.push(LinkSpec {
            from,
            to,
            distance,
            noise,
            interferers: Vec::new(),
        });
    }
    let link_by_label = |s: &str| -> Result<usize, ConfigError> {
        let (a, b) = s
            .split_once("->")
            .ok_or_else(|| ConfigError::invalid(s, "interferer must be written as X->Y"))?;
        let (a, b) = (node_id(a.trim())?, node_id(b.trim())?);
        links
            .iter()
            .position(|l| l.from == a && l.to == b)
            .ok_or_else(|| ConfigError::invalid(s, "interferer is not a configured link"))
    };
    let mut interferers = Vec::with_capacity(links.len());
    for (l, rl) in raw.links.iter().enumerate() {
        let set = match &rl.interferers {
            Some(list) => {
                let mut v = Vec::new();
                for s in list {
                    let j = link_by_label(s)?;
                    check(j != l, || format!("links.{}->{}.interferers", rl.from, rl.to), "a link cannot interfere with itself")?;
                    if !v.contains(&j) {
                        v.push(j);
                    }
                }
                v.sort_unstable();
                v
            }
            None => (0..links.len())
                .filter(|&j| links[j].from != links[l].from && links[j].from != links[l].to)
                .collect(),
        };
        interferers.push(set);
    }
    for (link, set) in links.iter_mut().zip(interferers) {
        link.interferers = set;
    }

    for (n, node) in nodes.iter().enumerate() {
        let total: f64 = links
            .iter()
            .zip(&q)
            .filter(|(l, _)| l.from == n)
            .map(|(_, &qq)| qq)
            .sum();
        if total > 1.0 + 1e-12 {
            return Err(ConfigError::ProbabilityOutOfRange {
                field: format!("nodes.{}: sum of outgoing q", node.id),
                value: total,
            });
        }
    }

    let mut sessions = Vec::with_capacity(raw.sessions.len());
    for rs in raw.sessions {
        let field = |k: &str| format!("sessions.{}.{}", rs.id, k);
        check(!rs.sources.is_empty(), || field("sources"), "must be nonempty")?;
        check(!rs.sinks.is_empty(), || field("sinks"), "must be nonempty")?;
        check(rs.sources.len() <= 16, || field("sources"), "at most 16 sources per session")?;
        let sources = rs.sources.iter().map(|s| node_id(s)).collect::<Result<Vec<_>, _>>()?;
        let sinks = rs.sinks.iter().map(|s| node_id(s)).collect::<Result<Vec<_>, _>>()?;
        for (i, s) in sources.iter().enumerate() {
            check(!sources[..i].contains(s), || field("sources"), "duplicate source")?;
            check(!sinks.contains(s), || field("sinks"), "sources and sinks must be disjoint")?;
        }
        for (i, s) in sinks.iter().enumerate() {
            check(!sinks[..i].contains(s), || field("sinks"), "duplicate sink")?;
        }
        let r_max = finite_nonneg(rs.R_max.unwrap_or(raw.R_max), &field("R_max"))?;
        let d_min = rs.D_min.unwrap_or(raw.D_min);
        let d_max = rs.D_max.unwrap_or(raw.D_max);
        check(0.0 < d_min && d_min <= d_max, || field("D_min/D_max"), "need 0 < D_min <= D_max")?;
        if rs.utility == Utility::LogOneMinus {
            check(d_max < 1.0, || field("D_max"), "log(1 - D) needs D_max < 1")?;
        }
        let sense_cost = finite_nonneg(rs.P_f_S.unwrap_or(raw.P_f_S), &field("P_f_S"))?;

        let names: Vec<&str> = rs.sources.iter().map(String::as_str).collect();
        let mut by_mask: BTreeMap<u32, f64> = BTreeMap::new();
        for (key, &value) in &rs.entropy {
            let mut mask = 0u32;
            for part in key.split(',') {
                let pos = names.iter().position(|n| *n == part.trim()).ok_or_else(|| {
                    ConfigError::invalid(field("entropy"), format!("`{part}` is not a source"))
                })?;
                mask |= 1 << pos;
            }
            check(value.is_finite() && value >= 0.0, || format!("{}.{key}", field("entropy")), "entropy must be nonnegative")?;
            if by_mask.insert(mask, value).is_some() {
                return Err(ConfigError::invalid(field("entropy"), format!("subset {{{key}}} listed twice")));
            }
        }
        let full = (1u32 << sources.len()) - 1;
        let mut values = Vec::with_capacity(full as usize);
        for mask in 1..=full {
            match by_mask.get(&mask) {
                Some(&v) => values.push(v),
                None => {
                    return Err(ConfigError::MissingEntropy {
                        session: rs.id.clone(),
                        subset: subset_label(&names, mask),
                    })
                }
            }
        }
        sessions.push(SessionSpec {
            id: rs.id.clone(),
            sources,
            sinks,
            sense_cost,
            entropy: EntropyTable::new(names.len(), values),
            utility: rs.utility,
            r_max,
            d_min,
            d_max,
        });
    }

    let mut solver = SolverParams::default();
    if let Some(d) = raw.dual {
        if let Some(k) = d.kappa0 {
            solver.kappa_lambda = k;
            solver.kappa_rho = k;
        }
        solver.dual_iterations = d.iterations.unwrap_or(solver.dual_iterations);
        solver.commit = d.commit.unwrap_or(solver.commit);
        solver.kappa_lambda = d.kappa_lambda.unwrap_or(solver.kappa_lambda);
        solver.kappa_rho = d.kappa_rho.unwrap_or(solver.kappa_rho);
    }
    if let Some(p) = raw.power {
        solver.bcd_max_sweeps = p.max_sweeps.unwrap_or(solver.bcd_max_sweeps);
        solver.bcd_tol = p.tol.unwrap_or(solver.bcd_tol);
    }
    check(solver.dual_iterations >= 1, || "dual.iterations".into(), "must be at least 1")?;
    check(solver.kappa_lambda > 0.0 && solver.kappa_rho > 0.0, || "dual.kappa0".into(), "step must be positive")?;
    check(solver.bcd_max_sweeps >= 1, || "power.max_sweeps".into(), "must be at least 1")?;

    let params = GlobalParams {
        bw: raw.BW,
        x_max: raw.X_max,
        l_max: raw.l_max,
        varpi1: raw.varpi1,
        varpi2: raw.varpi2,
        v: raw.V,
        delta: raw.delta,
        price_range,
        path_loss_exponent: raw.path_loss_exponent,
        fading: raw.fading,
        rate_log: raw.rate_log,
    };
    let topo = Topology::build(nodes.len(), &links, &sessions);
    let base_gain = base_gains(&nodes, &links, params.path_loss_exponent);
    let cfg = NetworkConfig {
        name: raw.name.unwrap_or_else(|| "network".to_string()),
        nodes,
        links,
        sessions,
        access: AccessProbabilities { q },
        params,
        solver,
        theta_override: raw.theta_override,
        topo,
        base_gain,
    };
    check(
        cfg.max_degree() <= cfg.params.l_max,
        || "l_max".into(),
        "smaller than the largest in- or out-degree",
    )?;
    Ok(cfg)
}
