//! Exhaustive grid oracles for every subproblem kind, random instance
//! generators, and a concavity sampler for log-SINR.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::OracleReport;
use crate::config::fig2;
use crate::entropy::EntropyTable;
use crate::net::{EnvironmentState, InfoUnit, LinkSpec, NetworkConfig, NodeSpec, PowerClass, SessionSpec, Utility};
use crate::solvers::{self, BcdOptions, GridCaps};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemKind {
    EhHarvest,
    MeHarvestCharge,
    MeDischargePurchase,
    Eg,
    SourceRate,
    Distortion,
    /// One link.
    Power1,
    /// Two links, on one or on two transmitters.
    Power2,
}

impl SubproblemKind {
    pub const ALL: [SubproblemKind; 8] = [
        SubproblemKind::EhHarvest,
        SubproblemKind::MeHarvestCharge,
        SubproblemKind::MeDischargePurchase,
        SubproblemKind::Eg,
        SubproblemKind::SourceRate,
        SubproblemKind::Distortion,
        SubproblemKind::Power1,
        SubproblemKind::Power2,
    ];

    /// Objective tolerance against the oracle.
    pub fn tolerance(self) -> f64 {
        match self {
            SubproblemKind::Distortion => 1e-6,
            SubproblemKind::Power1 | SubproblemKind::Power2 => 1e-3,
            _ => 1e-9,
        }
    }

    /// Default oracle grid spacing.
    pub fn resolution(self) -> f64 {
        match self {
            SubproblemKind::Distortion => 1e-4,
            SubproblemKind::Power1 => 1e-3,
            SubproblemKind::Power2 => 1e-2,
            _ => 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Instance {
    EhHarvest {
        stored: f64,
        theta: f64,
        h: f64,
    },
    MeHarvestCharge {
        stored: f64,
        theta: f64,
        lambda: f64,
        h: f64,
        g_max: f64,
    },
    MeDischargePurchase {
        stored: f64,
        theta: f64,
        lambda: f64,
        price: f64,
        weight: f64,
        caps: GridCaps,
    },
    Eg {
        stored: f64,
        theta: f64,
        lambda: f64,
        price: f64,
        weight: f64,
        caps: GridCaps,
    },
    SourceRate {
        rho_sum: f64,
        q_sum: f64,
        a: f64,
        sense_cost: f64,
        r_max: f64,
    },
    Distortion {
        session: SessionSpec,
        rho_sum: f64,
        vw: f64,
        unit: InfoUnit,
    },
    Power {
        cfg: Box<NetworkConfig>,
        env: EnvironmentState,
        weights: Vec<f64>,
        a: Vec<f64>,
    },
}

/// Grid from `lo` to `hi` with spacing `step`, both ends included.
fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let n = ((hi - lo) / step).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if *v.last().unwrap() < hi {
        v.push(hi);
    }
    v
}

fn min_over<const N: usize>(axes: [&[f64]; N], f: impl Fn([f64; N]) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut idx = [0usize; N];
    loop {
        let mut pt = [0.0; N];
        for k in 0..N {
            pt[k] = axes[k][idx[k]];
        }
        best = best.min(f(pt));
        let mut k = 0;
        loop {
            if k == N {
                return best;
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Maximizes a 1-D function by a grid at `step`, densified geometrically
/// towards `lo`, and then repeated zooming around the best few cells.
/// Returns the best value and its argument.
fn zoom_max_1d(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let mut pts = axis(lo, hi, step);
    pts.extend((1..=120).map(|k| lo + (hi - lo) * 10f64.powf(-k as f64 / 20.0)));
    let mut vals: Vec<(f64, f64)> = pts.iter().map(|&x| (f(x), x)).collect();
    vals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = vals[0];
    for &(_, x0) in vals.iter().take(4) {
        let (mut c, mut s) = (x0, step);
        while s > 1e-12 {
            let a = (c - 2.0 * s).max(lo);
            let b = (c + 2.0 * s).min(hi);
            let fine = s / 10.0;
            let (v, x) = axis(a, b, fine)
                .into_iter()
                .map(|x| (f(x), x))
                .fold((f64::NEG_INFINITY, c), |m, p| if p.0 > m.0 { p } else { m });
            if v > best.0 {
                best = (v, x);
            }
            c = x;
            s = fine;
        }
    }
    best
}

/// Access success probability of link `l`, from the access probabilities.
fn access_alpha(cfg: &NetworkConfig, l: usize) -> f64 {
    let q = &cfg.access.q;
    let link = &cfg.links[l];
    let mut alpha = q[l];
    let mut rx_q = 0.0;
    for (j, other) in cfg.links.iter().enumerate() {
        if other.to == link.from {
            alpha *= 1.0 - q[j];
        }
        if other.from == link.to {
            rx_q += q[j];
        }
    }
    alpha * (1.0 - rx_q)
}

/// Independent evaluation of the power objective.
fn power_value(cfg: &NetworkConfig, env: &EnvironmentState, weights: &[f64], a: &[f64], p: &[f64]) -> f64 {
    let n = cfg.nodes.len();
    let q = &cfg.access.q;
    let mut value = 0.0;
    for (l, link) in cfg.links.iter().enumerate() {
        value += a[link.from] * p[l];
        if weights[l] == 0.0 || p[l] <= 0.0 {
            continue;
        }
        let alpha = access_alpha(cfg, l);
        let mut interference = link.noise;
        for &j in &link.interferers {
            interference += env.cross_gain[cfg.links[j].from * n + link.to] * q[j] * p[j];
        }
        let gamma = env.channel_gain[l] * p[l] / interference;
        let log = match cfg.params.rate_log {
            InfoUnit::Bits => gamma.log2(),
            InfoUnit::Nats => gamma.ln(),
        };
        let c = (cfg.params.bw * alpha * log).max(0.0).min(cfg.params.x_max);
        value += weights[l] * c;
    }
    value
}

/// Linear grid at `step` merged with a geometric one reaching down to
/// `hi · 1e-6`, plus zero.
fn power_axis(hi: f64, step: f64) -> Vec<f64> {
    let mut v = axis(0.0, hi, step);
    v.extend((1..=120).map(|k| hi * 10f64.powf(-k as f64 / 20.0)));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Returns the best value and its argument.
fn power_oracle(cfg: &NetworkConfig, env: &EnvironmentState, weights: &[f64], a: &[f64], step: f64) -> (f64, Vec<f64>) {
    let f = |p: &[f64]| power_value(cfg, env, weights, a, p);
    match cfg.links.len() {
        1 => {
            let budget = cfg.nodes[cfg.links[0].from].p_max;
            let (best, x) = zoom_max_1d(&|x| f(&[x]), 0.0, budget, step);
            (best, vec![x])
        }
        2 => {
            let shared = cfg.links[0].from == cfg.links[1].from;
            let b0 = cfg.nodes[cfg.links[0].from].p_max;
            let b1 = cfg.nodes[cfg.links[1].from].p_max;
            let clamp = |x: f64, y: f64| {
                let x = x.clamp(0.0, b0);
                let y = y.clamp(0.0, b1);
                (x, if shared { y.min(b0 - x).max(0.0) } else { y })
            };
            let xs = power_axis(b0, step);
            let ys = power_axis(b1, step);
            let grid: Vec<Vec<f64>> = xs
                .iter()
                .map(|&x| {
                    ys.iter()
                        .map(|&y| if shared && x + y > b0 { f64::NEG_INFINITY } else { f(&[x, y]) })
                        .collect()
                })
                .collect();
            // Every grid local maximum seeds a zoom, so separate basins are
            // all refined.
            let mut seeds: Vec<(f64, usize, usize)> = Vec::new();
            for i in 0..xs.len() {
                for j in 0..ys.len() {
                    let v = grid[i][j];
                    if !v.is_finite() {
                        continue;
                    }
                    let mut peak = true;
                    for di in -1i64..=1 {
                        for dj in -1i64..=1 {
                            let (ni, nj) = (i as i64 + di, j as i64 + dj);
                            if (di, dj) != (0, 0)
                                && ni >= 0
                                && nj >= 0
                                && (ni as usize) < xs.len()
                                && (nj as usize) < ys.len()
                                && grid[ni as usize][nj as usize] > v
                            {
                                peak = false;
                            }
                        }
                    }
                    if peak {
                        seeds.push((v, i, j));
                    }
                }
            }
            seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut best = (f64::NEG_INFINITY, vec![0.0, 0.0]);
            for &(v, i, j) in seeds.iter().take(12) {
                if v > best.0 {
                    best = (v, vec![xs[i], ys[j]]);
                }
                let spacing = |ax: &[f64], k: usize| {
                    let lo = if k > 0 { ax[k] - ax[k - 1] } else { 0.0 };
                    let hi = if k + 1 < ax.len() { ax[k + 1] - ax[k] } else { 0.0 };
                    lo.max(hi)
                };
                let (mut cx, mut cy) = (xs[i], ys[j]);
                let (mut sx, mut sy) = (spacing(&xs, i), spacing(&ys, j));
                // Pattern search on a 21 x 21 stencil; the stencil only
                // shrinks once its centre is the best point, so it can walk
                // along the ridge where a capacity hits its cap.
                let mut here = f(&[cx, cy]);
                let mut moves = 0;
                while sx.max(sy) > 1e-11 && moves < 2000 {
                    let (fx, fy) = (sx / 10.0, sy / 10.0);
                    let mut local = (here, cx, cy);
                    for di in -10..=10 {
                        for dj in -10..=10 {
                            let (x, y) = clamp(cx + di as f64 * fx, cy + dj as f64 * fy);
                            let v = f(&[x, y]);
                            if v > local.0 {
                                local = (v, x, y);
                            }
                        }
                    }
                    if local.0 > here {
                        here = local.0;
                        cx = local.1;
                        cy = local.2;
                        moves += 1;
                    } else {
                        sx = fx;
                        sy = fy;
                    }
                }
                if here > best.0 {
                    best = (here, vec![cx, cy]);
                }
            }
            // Maxima may also sit where one capacity just reaches X_max, on
            // the shared budget line or on a box edge; search each curve.
            let cap = |i: usize, other: f64| {
                let link = &cfg.links[i];
                let j = 1 - i;
                let mut interference = link.noise;
                if link.interferers.contains(&j) {
                    interference += env.cross_gain[cfg.links[j].from * cfg.nodes.len() + link.to] * cfg.access.q[j] * other;
                }
                let alpha = access_alpha(cfg, i);
                let exponent = cfg.params.x_max / (cfg.params.bw * alpha);
                let gamma = match cfg.params.rate_log {
                    InfoUnit::Bits => exponent.exp2(),
                    InfoUnit::Nats => exponent.exp(),
                };
                gamma * interference / env.channel_gain[i]
            };
            let feasible = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x <= b0 && y <= b1 && (!shared || x + y <= b0 * (1.0 + 1e-14));
            let on_curve = |x: f64, y: f64| if feasible(x, y) { f(&[x, y]) } else { f64::NEG_INFINITY };
            let curves: Vec<(Box<dyn Fn(f64) -> (f64, f64)>, f64)> = vec![
                (Box::new(|t| (cap(0, t), t)), b1),
                (Box::new(|t| (t, cap(1, t))), b0),
                (Box::new(|t| (t, if shared { b0 - t } else { b1 })), b0),
                (Box::new(|t| (t, 0.0)), b0),
                (Box::new(|t| (if shared { b0 - t } else { b0 }, t)), b1),
                (Box::new(|t| (0.0, t)), b1),
            ];
            for (curve, hi) in &curves {
                let (v, t) = zoom_max_1d(&|t| {
                    let (x, y) = curve(t);
                    on_curve(x, y)
                }, 0.0, *hi, step);
                if v > best.0 {
                    let (x, y) = curve(t);
                    best = (v, vec![x, y]);
                }
            }
            best
        }
        k => panic!("power oracle handles 1 or 2 links, got {k}"),
    }
}

/// Runs the solver for `instance` and compares it with an exhaustive grid
/// at spacing `resolution`. Linear kinds are minimizations of the drift
/// terms; distortion and power are maximizations.
pub fn grid_oracle_subproblem(kind: SubproblemKind, instance: &Instance, resolution: f64) -> OracleReport {
    let tol = kind.tolerance();
    match *instance {
        Instance::EhHarvest { stored, theta, h } => {
            let obj = |e: f64| (stored - theta) * e;
            let hi = h.min((theta - stored).max(0.0));
            let e = solvers::solve_eh_harvest(stored, theta, h);
            let oracle = min_over([&axis(0.0, hi, resolution)], |[e]| obj(e));
            OracleReport::new(format!("{instance:?}"), obj(e), oracle, tol)
        }
        Instance::MeHarvestCharge { stored, theta, lambda, h, g_max } => {
            let obj = |e: f64, g: f64| (stored - theta) * e + (stored - theta + lambda) * g;
            let (e, g) = solvers::solve_me_harvest_charge(stored, theta, lambda, h, g_max);
            let oracle = min_over([&axis(0.0, h, resolution), &axis(0.0, g_max, resolution)], |[e, g]| obj(e, g));
            OracleReport::new(format!("{instance:?}"), obj(e, g), oracle, tol)
        }
        Instance::MeDischargePurchase { stored, theta, lambda, price, weight, caps } => {
            let obj = |d: f64, y: f64| (weight * price - lambda) * y - (stored - theta + lambda) * d;
            let (d, y) = solvers::solve_me_discharge_purchase(stored, theta, lambda, price, weight, caps);
            let oracle = min_over(
                [&axis(0.0, caps.d_max, resolution), &axis(0.0, caps.y_max, resolution)],
                |[d, y]| obj(d, y),
            );
            OracleReport::new(format!("{instance:?}"), obj(d, y), oracle, tol)
        }
        Instance::Eg { stored, theta, lambda, price, weight, caps } => {
            let obj = |g: f64, d: f64, y: f64| (stored - theta + lambda) * (g - d) + (weight * price - lambda) * y;
            let (g, d, y) = solvers::solve_eg(stored, theta, lambda, price, weight, caps);
            let oracle = min_over(
                [
                    &axis(0.0, caps.g_max, resolution),
                    &axis(0.0, caps.d_max, resolution),
                    &axis(0.0, caps.y_max, resolution),
                ],
                |[g, d, y]| obj(g, d, y),
            );
            OracleReport::new(format!("{instance:?}"), obj(g, d, y), oracle, tol)
        }
        Instance::SourceRate { rho_sum, q_sum, a, sense_cost, r_max } => {
            let obj = |r: f64| -(rho_sum - q_sum + a * sense_cost) * r;
            let r = solvers::solve_source_rate(rho_sum, q_sum, a, sense_cost, r_max);
            let oracle = min_over([&axis(0.0, r_max, resolution)], |[r]| obj(r));
            OracleReport::new(format!("{instance:?}"), obj(r), oracle, tol)
        }
        Instance::Distortion { ref session, rho_sum, vw, unit } => {
            let u = session.utility;
            let obj = |d: f64| {
                let util = match u {
                    Utility::LogOneMinus => (1.0 - d).ln(),
                    Utility::Linear { slope } => -slope * d,
                    Utility::Quadratic { a } => -a * d * d,
                };
                let log = match unit {
                    InfoUnit::Bits => d.log2(),
                    InfoUnit::Nats => d.ln(),
                };
                vw * util + rho_sum * log
            };
            let d = solvers::solve_distortion(session, rho_sum, vw, unit);
            let (oracle, _) = zoom_max_1d(&obj, session.d_min, session.d_max, resolution);
            OracleReport::new(
                format!("Distortion {{ utility: {u:?}, rho_sum: {rho_sum}, vw: {vw}, unit: {unit:?}, d: {d} }}"),
                obj(d),
                oracle,
                tol,
            )
        }
        Instance::Power { ref cfg, ref env, ref weights, ref a } => {
            let opts = BcdOptions {
                max_sweeps: cfg.solver.bcd_max_sweeps,
                tol: cfg.solver.bcd_tol,
                multi_start: true,
            };
            let sol = solvers::solve_power_allocation(cfg, env, weights, a, None, &opts);
            let solver = power_value(cfg, env, weights, a, &sol.p);
            let (oracle, arg) = power_oracle(cfg, env, weights, a, resolution);
            let desc = format!(
                "Power {{ links: {}, weights: {weights:?}, a: {a:?}, gains: {:?}, p: {:?}, oracle_p: {arg:?} }}",
                cfg.links.len(),
                env.channel_gain,
                sol.p
            );
            OracleReport::new(desc, solver, oracle, tol)
        }
    }
}

/// A draw from `range`, or `tie` about one time in seven.
fn pick_tie(rng: &mut ChaCha8Rng, range: std::ops::Range<f64>, tie: f64) -> f64 {
    let value = rng.random_range(range);
    if rng.random_bool(0.15) {
        tie
    } else {
        value
    }
}

const TABLE_CAPS: GridCaps = GridCaps {
    g_max: 15.0,
    d_max: 15.0,
    y_max: 25.0,
};

/// Random instance of `kind`; about one in seven lands on a tie.
pub fn random_instance(kind: SubproblemKind, rng: &mut ChaCha8Rng) -> Instance {
    match kind {
        SubproblemKind::EhHarvest => {
            let theta = rng.random_range(10.0..300.0);
            let stored = pick_tie(rng, 0.0..theta, theta);
            Instance::EhHarvest {
                stored,
                theta,
                h: rng.random_range(0.0..50.0),
            }
        }
        SubproblemKind::MeHarvestCharge => {
            let theta = rng.random_range(15.0..100.0);
            let lambda = rng.random_range(0.0..60.0);
            let stored = pick_tie(rng, 0.0..theta + 25.0, (theta - lambda).max(0.0));
            Instance::MeHarvestCharge {
                stored,
                theta,
                lambda,
                h: rng.random_range(0.0..10.0),
                g_max: 15.0,
            }
        }
        SubproblemKind::MeDischargePurchase | SubproblemKind::Eg => {
            let theta = rng.random_range(15.0..100.0);
            let lambda = rng.random_range(0.0..10.0);
            let price = rng.random_range(0.5..1.0);
            let weight = pick_tie(rng, 0.0..15.0, lambda / price);
            let stored = pick_tie(rng, 0.0..theta + 30.0, theta - lambda);
            if kind == SubproblemKind::Eg {
                Instance::Eg {
                    stored,
                    theta,
                    lambda,
                    price,
                    weight,
                    caps: TABLE_CAPS,
                }
            } else {
                Instance::MeDischargePurchase {
                    stored,
                    theta,
                    lambda,
                    price,
                    weight,
                    caps: TABLE_CAPS,
                }
            }
        }
        SubproblemKind::SourceRate => {
            let a = rng.random_range(-300.0..0.0);
            let q_sum = rng.random_range(0.0..300.0);
            let rho_sum = pick_tie(rng, 0.0..300.0, q_sum - a * 0.1);
            Instance::SourceRate {
                rho_sum,
                q_sum,
                a,
                sense_cost: 0.1,
                r_max: 10.0,
            }
        }
        SubproblemKind::Distortion => {
            let mut session = fig2().sessions[0].clone();
            session.utility = match rng.random_range(0..3) {
                0 => Utility::LogOneMinus,
                1 => Utility::Linear {
                    slope: rng.random_range(0.1..5.0),
                },
                _ => Utility::Quadratic {
                    a: rng.random_range(0.1..5.0),
                },
            };
            Instance::Distortion {
                session,
                rho_sum: rng.random_range(0.0..500.0),
                vw: rng.random_range(0.0..400.0),
                unit: if rng.random_bool(0.5) { InfoUnit::Bits } else { InfoUnit::Nats },
            }
        }
        SubproblemKind::Power1 | SubproblemKind::Power2 => random_power_instance(kind == SubproblemKind::Power2, rng),
    }
}

fn tiny_network(links: Vec<(usize, usize)>, n_nodes: usize, q: Vec<f64>) -> NetworkConfig {
    let mut cfg = fig2();
    let proto = cfg.nodes[0].clone();
    cfg.nodes = (0..n_nodes)
        .map(|i| NodeSpec {
            id: format!("N{i}"),
            power_class: PowerClass::Unmanaged,
            position: [i as f64 * 100.0, 0.0],
            harvest: None,
            ..proto.clone()
        })
        .collect();
    cfg.links = links
        .iter()
        .map(|&(from, to)| LinkSpec {
            from,
            to,
            distance: 100.0,
            noise: 5e-13,
            interferers: Vec::new(),
        })
        .collect();
    for l in 0..cfg.links.len() {
        let (from, to) = (cfg.links[l].from, cfg.links[l].to);
        cfg.links[l].interferers = (0..cfg.links.len())
            .filter(|&j| cfg.links[j].from != from && cfg.links[j].from != to)
            .collect();
    }
    cfg.sessions = vec![SessionSpec {
        sources: vec![0],
        sinks: vec![n_nodes - 1],
        entropy: EntropyTable::new(1, vec![1.0]),
        ..cfg.sessions[0].clone()
    }];
    cfg.access.q = q;
    cfg.theta_override = None;
    cfg.rebuild();
    cfg
}

fn random_power_instance(two: bool, rng: &mut ChaCha8Rng) -> Instance {
    let shared = two && rng.random_bool(0.5);
    let cfg = match (two, shared) {
        (false, _) => tiny_network(vec![(0, 1)], 2, vec![rng.random_range(0.2..1.0)]),
        (true, true) => {
            let q0 = rng.random_range(0.1..0.5);
            tiny_network(vec![(0, 1), (0, 2)], 3, vec![q0, rng.random_range(0.1..0.5)])
        }
        (true, false) => tiny_network(
            vec![(0, 1), (2, 3)],
            4,
            vec![rng.random_range(0.2..1.0), rng.random_range(0.2..1.0)],
        ),
    };
    let mut env = EnvironmentState::quiet(&cfg);
    let n = cfg.nodes.len();
    for (l, link) in cfg.links.iter().enumerate() {
        // Full-power SNR log-uniform in [0.5, 1e4].
        let snr = 10f64.powf(rng.random_range((0.5f64).log10()..4.0));
        let g = snr * link.noise / cfg.nodes[link.from].p_max;
        env.channel_gain[l] = g;
        env.cross_gain[link.from * n + link.to] = g;
    }
    if two && !shared {
        for (l, link) in cfg.links.iter().enumerate() {
            let other = &cfg.links[1 - l];
            let ratio = 10f64.powf(rng.random_range(-3.0..0.0));
            env.cross_gain[other.from * n + link.to] = env.channel_gain[l] * ratio;
        }
    }
    let weights = (0..cfg.links.len())
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..100.0) })
        .collect();
    let mut a = vec![0.0; n];
    for link in &cfg.links {
        a[link.from] = -rng.random_range(0.0..50.0);
    }
    Instance::Power {
        cfg: Box::new(cfg),
        env,
        weights,
        a,
    }
}

/// Samples `triples` random (p̂₁, p̂₂, t) on the bundled network and counts
/// midpoint concavity violations of log SINR beyond `tol`; also returns the
/// worst shortfall seen.
pub fn log_sinr_concavity(cfg: &NetworkConfig, triples: usize, tol: f64, rng: &mut ChaCha8Rng) -> (usize, f64) {
    let env = EnvironmentState::quiet(cfg);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..triples {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            cfg.links
                .iter()
                .map(|l| {
                    let pm = cfg.nodes[l.from].p_max.ln();
                    rng.random_range(pm - 12.0..pm)
                })
                .collect()
        };
        let z1 = draw(rng);
        let z2 = draw(rng);
        let t: f64 = rng.random_range(0.0..1.0);
        let mid: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        for l in 0..cfg.links.len() {
            let f = |z: &[f64]| crate::net::sinr(cfg, l, z, &cfg.access, &env).ln();
            let shortfall = t * f(&z1) + (1.0 - t) * f(&z2) - f(&mid);
            worst = worst.max(shortfall);
            if shortfall > tol {
                violations += 1;
            }
        }
    }
    (violations, worst)
}
