//! Transmit power allocation: maximize Σ W*·C̃ + Σ A·p under a per-node
//! power budget.
//!
//! Links with zero weight whose transmitter has A ≤ 0 gain nothing from
//! power and only add interference, so they are pinned at zero. The rest
//! are optimized by block coordinate ascent over transmitting nodes. Each
//! block tries every on/off pattern of its links and runs projected
//! gradient ascent in the log-power domain on the links left on.

use crate::net::{success_probability, EnvironmentState, LinkId, NetworkConfig, NodeId};

/// Floor for log powers relative to the node budget.
const LOG_FLOOR: f64 = -40.0;
const PG_ITERS: usize = 200;
const ARMIJO_C: f64 = 1e-4;
/// Blocks with more links than this only try all-on, all-off and single-on patterns.
const MAX_ENUM_LINKS: usize = 6;
/// Cap corners refined by the ridge search.
const CORNER_SEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    /// Also restart from full power, from silence and from each link alone,
    /// try extra starts inside every block, and search the capacity-cap
    /// ridges. Without it only the warm start is refined.
    pub multi_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    /// Linear transmit power per link.
    pub p: Vec<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl PowerSolution {
    pub fn log_powers(&self) -> Vec<f64> {
        self.p.iter().map(|p| p.ln()).collect()
    }
}

/// The power objective evaluated with the model's own capacity function.
pub fn power_objective(cfg: &NetworkConfig, env: &EnvironmentState, weights: &[f64], a: &[f64], p: &[f64]) -> f64 {
    let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let mut total = 0.0;
    for (l, link) in cfg.links.iter().enumerate() {
        if weights[l] != 0.0 {
            total += weights[l] * crate::net::link_capacity(cfg, l, &lp, &cfg.access, env);
        }
        total += a[link.from] * p[l];
    }
    total
}

struct ActiveLink {
    link: LinkId,
    w: f64,
    a: f64,
    gain: f64,
    noise: f64,
    /// BW·α in the configured unit per nat of SINR.
    slope: f64,
    /// (active index, gain · access probability) of each active interferer.
    interferers: Vec<(usize, f64)>,
}

struct Block {
    budget: f64,
    members: Vec<usize>,
}

/// Active-link view of one power problem.
struct Model {
    links: Vec<ActiveLink>,
    blocks: Vec<Block>,
    x_max: f64,
}

struct Eval {
    value: f64,
    /// Noise plus interference at each active link's receiver.
    denom: Vec<f64>,
    /// Whether the capacity of each link responds to its SINR.
    live: Vec<bool>,
}

impl Model {
    fn new(cfg: &NetworkConfig, env: &EnvironmentState, weights: &[f64], a: &[f64]) -> Self {
        let n = cfg.n_nodes();
        let per_nat = cfg.params.rate_log.per_nat();
        let mut index = vec![usize::MAX; cfg.n_links()];
        let mut ids = Vec::new();
        for (l, link) in cfg.links.iter().enumerate() {
            let fixed_off = weights[l] <= 0.0 && a[link.from] <= 0.0;
            if !fixed_off && cfg.nodes[link.from].p_max > 0.0 {
                index[l] = ids.len();
                ids.push(l);
            }
        }
        let links = ids
            .iter()
            .map(|&l| {
                let spec = &cfg.links[l];
                let alpha = success_probability(cfg, l, &cfg.access);
                let interferers = spec
                    .interferers
                    .iter()
                    .filter(|&&j| index[j] != usize::MAX)
                    .map(|&j| (index[j], env.gain(n, cfg.links[j].from, spec.to) * cfg.access.q[j]))
                    .collect();
                ActiveLink {
                    link: l,
                    w: weights[l].max(0.0),
                    a: a[spec.from],
                    gain: env.channel_gain[l],
                    noise: spec.noise,
                    slope: cfg.params.bw * alpha * per_nat,
                    interferers,
                }
            })
            .collect::<Vec<_>>();
        let mut blocks: Vec<(NodeId, Block)> = Vec::new();
        for (i, al) in links.iter().enumerate() {
            let from = cfg.links[al.link].from;
            match blocks.iter_mut().find(|(nd, _)| *nd == from) {
                Some((_, b)) => b.members.push(i),
                None => blocks.push((
                    from,
                    Block {
                        budget: cfg.nodes[from].p_max,
                        members: vec![i],
                    },
                )),
            }
        }
        Model {
            links,
            blocks: blocks.into_iter().map(|(_, b)| b).collect(),
            x_max: cfg.params.x_max,
        }
    }

    fn eval(&self, p: &[f64]) -> Eval {
        let k = self.links.len();
        let mut ev = Eval {
            value: 0.0,
            denom: vec![0.0; k],
            live: vec![false; k],
        };
        self.eval_into(p, &mut ev);
        ev
    }

    fn eval_into(&self, p: &[f64], ev: &mut Eval) {
        let mut value = 0.0;
        let Eval { denom, live, .. } = ev;
        live.fill(false);
        for (i, l) in self.links.iter().enumerate() {
            let mut den = l.noise;
            for &(j, h) in &l.interferers {
                den += h * p[j];
            }
            denom[i] = den;
            if p[i] > 0.0 {
                let gamma = l.gain * p[i] / den;
                if gamma > 1.0 {
                    let c = l.slope * gamma.ln();
                    if c < self.x_max {
                        live[i] = true;
                        value += l.w * c;
                    } else {
                        value += l.w * self.x_max;
                    }
                }
                value += l.a * p[i];
            }
        }
        ev.value = value;
    }

    fn value(&self, p: &[f64]) -> f64 {
        let mut value = 0.0;
        for (i, l) in self.links.iter().enumerate() {
            if p[i] <= 0.0 {
                continue;
            }
            let mut den = l.noise;
            for &(j, h) in &l.interferers {
                den += h * p[j];
            }
            let gamma = l.gain * p[i] / den;
            if gamma > 1.0 {
                value += l.w * (l.slope * gamma.ln()).min(self.x_max);
            }
            value += l.a * p[i];
        }
        value
    }

    /// Gradient with respect to the log power of each link in `vars`.
    fn grad_log(&self, p: &[f64], ev: &Eval, vars: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &j in vars {
            let lj = &self.links[j];
            let mut g = lj.a * p[j];
            if ev.live[j] {
                g += lj.w * lj.slope;
            }
            for (i, li) in self.links.iter().enumerate() {
                if !ev.live[i] {
                    continue;
                }
                for &(jj, h) in &li.interferers {
                    if jj == j {
                        g -= li.w * li.slope * h * p[j] / ev.denom[i];
                    }
                }
            }
            out.push(g);
        }
    }
}

/// Solves `s + e^s = t` for `s`, i.e. `s = ln W(e^t)`.
fn log_lambert_exp(t: f64) -> f64 {
    let mut s = if t < 1.0 { t } else { t.ln() };
    for _ in 0..100 {
        let es = s.exp();
        let step = (es + s - t) / (es + 1.0);
        s -= step;
        if step.abs() <= 1e-15 * (1.0 + s.abs()) {
            break;
        }
    }
    s
}

/// Euclidean projection of log powers onto `{Σ e^u ≤ budget, u ≥ floor}`.
pub fn project_log_simplex(z: &[f64], budget: f64, floor: f64) -> Vec<f64> {
    if let [x] = z {
        return vec![x.min(budget.ln()).max(floor)];
    }
    let clipped: Vec<f64> = z.iter().map(|&x| x.max(floor)).collect();
    let total: f64 = clipped.iter().map(|x| x.exp()).sum();
    if total <= budget {
        return clipped;
    }
    // u_i(μ) = max(floor, z_i - W(μ e^{z_i})); Σ e^{u_i} falls as ln μ grows.
    let at = |nu: f64| -> Vec<f64> {
        z.iter()
            .map(|&zi| (zi - log_lambert_exp(nu + zi).exp()).max(floor))
            .collect()
    };
    // ln Σ e^{u_i} - ln budget and its derivative in ln μ.
    let gap = |nu: f64| -> (f64, f64) {
        let (mut mass, mut slope) = (0.0, 0.0);
        for &zi in z {
            let w = log_lambert_exp(nu + zi).exp();
            let u = zi - w;
            if u <= floor {
                mass += floor.exp();
            } else {
                let e = u.exp();
                mass += e;
                slope -= e * w / (1.0 + w);
            }
        }
        (mass.ln() - budget.ln(), slope / mass)
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    while gap(lo).0 < 0.0 && lo > -1e4 {
        lo -= 50.0;
    }
    while gap(hi).0 > 0.0 && hi < 1e4 {
        hi += 50.0;
    }
    // Newton on ln μ, falling back to bisection whenever a step leaves the bracket.
    let mut nu = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, dg) = gap(nu);
        if g > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if g.abs() < 1e-15 || hi - lo < 1e-13 {
            break;
        }
        let next = nu - g / dg;
        nu = if dg < 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    at(hi)
}

/// Projected gradient ascent over the log powers of `vars`; every other
/// entry of `p` stays fixed. Returns the final objective.
fn ascend(model: &Model, p: &mut [f64], vars: &[usize], budget: f64) -> f64 {
    let floor = budget.ln() + LOG_FLOOR;
    let mut z: Vec<f64> = vars.iter().map(|&i| p[i].ln()).collect();
    z = project_log_simplex(&z, budget, floor);
    for (k, &i) in vars.iter().enumerate() {
        p[i] = z[k].exp();
    }
    let mut ev = model.eval(p);
    let mut grad = Vec::with_capacity(vars.len());
    let mut step = f64::NAN;
    let mut trial = p.to_vec();
    for _ in 0..PG_ITERS {
        model.grad_log(p, &ev, vars, &mut grad);
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < 1e-12 {
            break;
        }
        if !step.is_finite() {
            step = 1.0 / gmax;
        }
        let mut accepted = false;
        let mut moved = 0.0f64;
        for _ in 0..60 {
            let cand: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi + step * gi).collect();
            let cand = project_log_simplex(&cand, budget, floor);
            let ascent: f64 = cand.iter().zip(&z).zip(&grad).map(|((c, zi), g)| g * (c - zi)).sum();
            trial.copy_from_slice(p);
            for (k, &i) in vars.iter().enumerate() {
                trial[i] = cand[k].exp();
            }
            let tv = model.value(&trial);
            if tv >= ev.value + ARMIJO_C * ascent && tv >= ev.value {
                let before = ev.value;
                model.eval_into(&trial, &mut ev);
                moved = cand.iter().zip(&z).fold(0.0, |m, (c, zi)| m.max((c - zi).abs()));
                let gain = ev.value - before;
                z = cand;
                p.copy_from_slice(&trial);
                accepted = true;
                step *= 2.0;
                if gain <= 1e-13 * (1.0 + ev.value.abs()) && moved < 1e-9 {
                    accepted = false;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || moved < 1e-12 {
            break;
        }
    }
    ev.value
}

/// Moves a link onto the point where its capacity just reaches `X_max`,
/// when that fits the budget and improves the objective.
fn polish_kinks(model: &Model, p: &mut [f64], vars: &[usize], budget: f64, value: &mut f64) {
    for &i in vars {
        let l = &model.links[i];
        if l.slope <= 0.0 || l.gain <= 0.0 {
            continue;
        }
        let target = cap_power(model, p, i);
        let others: f64 = vars.iter().filter(|&&j| j != i).map(|&j| p[j]).sum();
        if !(target.is_finite() && target > 0.0 && others + target <= budget) {
            continue;
        }
        let old = p[i];
        p[i] = target;
        let v = model.value(p);
        if v > *value {
            *value = v;
        } else {
            p[i] = old;
        }
    }
}

/// Power at which link `i` just reaches `X_max` given the others.
fn cap_power(model: &Model, p: &[f64], i: usize) -> f64 {
    let l = &model.links[i];
    let mut den = l.noise;
    for &(j, h) in &l.interferers {
        den += h * p[j];
    }
    (model.x_max / l.slope).exp() * den / l.gain
}

/// Multiplicative pattern search over single powers in which every link
/// sitting on its capacity cap is moved back onto it after each step. This
/// walks along the ridges where a coordinate method stalls.
fn ridge_search(model: &Model, p: &mut [f64], value: &mut f64) {
    let k = model.links.len();
    let budgets: Vec<(f64, &[usize])> = model.blocks.iter().map(|b| (b.budget, b.members.as_slice())).collect();
    let fits = |q: &[f64]| budgets.iter().all(|(b, m)| m.iter().map(|&i| q[i]).sum::<f64>() <= *b);
    let capped_at = |p: &[f64]| -> Vec<bool> {
        (0..k)
            .map(|i| {
                let l = &model.links[i];
                p[i] > 0.0 && l.slope > 0.0 && (cap_power(model, p, i) / p[i] - 1.0).abs() < 1e-6
            })
            .collect()
    };
    let repin = |trial: &mut [f64], capped: &[bool], moved: usize| {
        for _ in 0..3 {
            for i in 0..k {
                if i != moved && capped[i] {
                    trial[i] = cap_power(model, trial, i);
                }
            }
        }
    };
    // Switching a silent link on may need a jump past unit SINR.
    let capped = capped_at(p);
    if capped.iter().any(|&c| c) {
        let mut best: Option<Vec<f64>> = None;
        for j in (0..k).filter(|&j| p[j] <= 0.0) {
            let block = budgets.iter().find(|(_, m)| m.contains(&j)).unwrap().0;
            for m in 0..=40 {
                let mut trial = p.to_vec();
                trial[j] = block * 10f64.powf(-m as f64 / 8.0);
                repin(&mut trial, &capped, j);
                if fits(&trial) {
                    let v = model.value(&trial);
                    if v > *value + 1e-13 * (1.0 + value.abs()) {
                        *value = v;
                        best = Some(trial);
                    }
                }
            }
        }
        if let Some(b) = best {
            p.copy_from_slice(&b);
        }
    }
    let mut delta = 0.5f64;
    let mut iters = 0;
    while delta > 1e-10 && iters < 400 {
        iters += 1;
        let capped = capped_at(p);
        if !capped.iter().any(|&c| c) {
            return;
        }
        let mut improved = false;
        for j in 0..k {
            if p[j] <= 0.0 {
                continue;
            }
            for sign in [1.0f64, -1.0] {
                let mut trial = p.to_vec();
                trial[j] = p[j] * (sign * delta).exp();
                repin(&mut trial, &capped, j);
                if !fits(&trial) {
                    continue;
                }
                let v = model.value(&trial);
                if v > *value + 1e-13 * (1.0 + value.abs()) {
                    *value = v;
                    p.copy_from_slice(&trial);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// For each subset of links, the point where all of them sit exactly on
/// their capacity cap with every other power held. Cap powers are affine in
/// the interfering powers, so each point is one linear solve. The best few
/// feasible points seed [`ridge_search`]; keeps the best result.
fn cap_corners(model: &Model, p: &mut [f64], value: &mut f64) {
    let k = model.links.len();
    let subsets: Vec<u32> = if k <= MAX_ENUM_LINKS {
        (1..(1u32 << k)).collect()
    } else {
        let mut v: Vec<u32> = (0..k).map(|i| 1u32 << i).collect();
        v.push(((1u64 << k) - 1) as u32);
        v
    };
    let mut corners: Vec<(f64, Vec<f64>)> = Vec::new();
    for mask in subsets {
        let members: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
        if members.iter().any(|&i| model.links[i].slope <= 0.0 || model.links[i].gain <= 0.0) {
            continue;
        }
        let pos = |j: usize| members.iter().position(|&m| m == j);
        let mut m = vec![vec![0.0; members.len()]; members.len()];
        let mut rhs = vec![0.0; members.len()];
        for (r, &i) in members.iter().enumerate() {
            let l = &model.links[i];
            let scale = (model.x_max / l.slope).exp() / l.gain;
            m[r][r] = 1.0;
            rhs[r] = scale * l.noise;
            for &(j, h) in &l.interferers {
                match pos(j) {
                    Some(c) => m[r][c] -= scale * h,
                    None => rhs[r] += scale * h * p[j],
                }
            }
        }
        let Some(x) = solve_linear(m, rhs) else { continue };
        if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            continue;
        }
        let mut trial = p.to_vec();
        for (r, &i) in members.iter().enumerate() {
            trial[i] = x[r];
        }
        if model.blocks.iter().any(|b| b.members.iter().map(|&i| trial[i]).sum::<f64>() > b.budget) {
            continue;
        }
        corners.push((model.value(&trial), trial));
    }
    corners.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (mut v, mut trial) in corners.into_iter().take(CORNER_SEEDS) {
        ridge_search(model, &mut trial, &mut v);
        if v > *value + 1e-12 * (1.0 + value.abs()) {
            *value = v;
            p.copy_from_slice(&trial);
        }
    }
}

fn patterns(n: usize) -> Vec<u32> {
    if n <= MAX_ENUM_LINKS {
        (1..(1u32 << n)).collect()
    } else {
        let mut v: Vec<u32> = (0..n).map(|i| 1u32 << i).collect();
        v.push(((1u64 << n) - 1) as u32);
        v
    }
}

/// Best response of one block given every other power.
fn solve_block(model: &Model, p: &mut Vec<f64>, block: &Block, thorough: bool) -> f64 {
    let members = &block.members;
    let mut best_p = p.clone();
    let mut best = model.value(p);
    let mut off = p.clone();
    for &i in members {
        off[i] = 0.0;
    }
    let off_value = model.value(&off);
    if off_value >= best {
        best = off_value;
        best_p = off.clone();
    }
    for mask in patterns(members.len()) {
        let vars: Vec<usize> = members
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &i)| i)
            .collect();
        let on = vars.len() as f64;
        let used: f64 = vars.iter().map(|&i| p[i]).sum();
        // Capacity is flat below unit SINR, so a low start can stall. Besides
        // the current point and an even split, give each link in turn
        // whatever budget the others leave.
        let mut inits = Vec::with_capacity(vars.len() + 2);
        inits.push(
            vars.iter()
                .map(|&i| if p[i] > 0.0 && used <= block.budget { p[i] } else { 0.5 * block.budget / on })
                .collect::<Vec<_>>(),
        );
        if thorough {
            inits.push(vec![block.budget / on; vars.len()]);
        }
        if thorough && vars.len() > 1 {
            let kept: Vec<f64> = vars.iter().map(|&i| if used <= block.budget { p[i] } else { 0.0 }).collect();
            for k in 0..vars.len() {
                let rest: f64 = kept.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x).sum();
                let mut init = kept.clone();
                init[k] = block.budget - rest;
                inits.push(init);
            }
        }
        for init in inits {
            let mut cand = off.clone();
            for (k, &i) in vars.iter().enumerate() {
                cand[i] = init[k];
            }
            let mut v = ascend(model, &mut cand, &vars, block.budget);
            polish_kinks(model, &mut cand, &vars, block.budget, &mut v);
            if v > best + 1e-12 * (1.0 + best.abs()) {
                best = v;
                best_p = cand;
            }
        }
    }
    *p = best_p;
    best
}

fn bcd(model: &Model, start: Vec<f64>, opts: &BcdOptions) -> (Vec<f64>, f64, usize, bool) {
    let mut p = start;
    let mut value = model.value(&p);
    for sweep in 1..=opts.max_sweeps {
        let before = value;
        for block in &model.blocks {
            value = solve_block(model, &mut p, block, opts.multi_start);
        }
        if value - before < opts.tol * (1.0 + before.abs()) {
            return (p, value, sweep, true);
        }
    }
    (p, value, opts.max_sweeps, false)
}

/// Power allocation for one slot. `warm` seeds the first start; with
/// `multi_start` the best of several starts is returned.
pub fn solve_power_allocation(
    cfg: &NetworkConfig,
    env: &EnvironmentState,
    weights: &[f64],
    a: &[f64],
    warm: Option<&[f64]>,
    opts: &BcdOptions,
) -> PowerSolution {
    let model = Model::new(cfg, env, weights, a);
    let k = model.links.len();
    let mut out = vec![0.0; cfg.n_links()];
    if k == 0 {
        return PowerSolution {
            p: out,
            objective: 0.0,
            sweeps: 0,
            converged: true,
        };
    }
    let full: Vec<f64> = (0..k)
        .map(|i| {
            let b = model.blocks.iter().find(|b| b.members.contains(&i)).unwrap();
            b.budget / b.members.len() as f64
        })
        .collect();
    let mut starts = vec![match warm {
        Some(w) => model.links.iter().map(|l| w[l.link]).collect::<Vec<_>>(),
        None => full.clone(),
    }];
    if opts.multi_start {
        for scale in [1.0, 0.5, 0.25, 0.1] {
            starts.push(full.iter().map(|x| x * scale).collect());
        }
        starts.push(vec![0.0; k]);
        for i in 0..k {
            let mut s = vec![0.0; k];
            s[i] = full[i];
            starts.push(s);
        }
        // Each block's best response with everyone else silent.
        for block in &model.blocks {
            let mut s = vec![0.0; k];
            solve_block(&model, &mut s, block, true);
            starts.push(s);
        }
    }
    let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
    let mut total_sweeps = 0;
    for s in starts {
        let r = bcd(&model, s, opts);
        total_sweeps += r.2;
        if best.as_ref().is_none_or(|b| r.1 > b.1 + 1e-12 * (1.0 + b.1.abs())) {
            best = Some(r);
        }
    }
    let (mut p, mut value, _, converged) = best.unwrap();
    if opts.multi_start {
        cap_corners(&model, &mut p, &mut value);
        ridge_search(&model, &mut p, &mut value);
    }
    for block in &model.blocks {
        let sum: f64 = block.members.iter().map(|&i| p[i]).sum();
        let scale = if sum > block.budget { block.budget / sum } else { 1.0 };
        for &i in &block.members {
            out[model.links[i].link] = p[i] * scale;
        }
        let mut s: f64 = block.members.iter().map(|&i| out[model.links[i].link]).sum();
        while s > block.budget {
            for &i in &block.members {
                out[model.links[i].link] *= 1.0 - 1e-12;
            }
            s = block.members.iter().map(|&i| out[model.links[i].link]).sum();
        }
    }
    PowerSolution {
        p: out,
        objective: value,
        sweeps: total_sweeps,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_identity() {
        for t in [-30.0, -1.0, 0.0, 0.5, 3.0, 40.0, 700.0] {
            let s = log_lambert_exp(t);
            assert!((s.exp() + s - t).abs() < 1e-9 * (1.0 + t.abs()), "t = {t}");
        }
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let z = vec![3.0, 2.5, 1.0];
        let u = project_log_simplex(&z, 8.0, 8f64.ln() - 40.0);
        let mass: f64 = u.iter().map(|x| x.exp()).sum();
        assert!((mass - 8.0).abs() < 1e-9);
        let again = project_log_simplex(&u, 8.0, 8f64.ln() - 40.0);
        for (a, b) in u.iter().zip(&again) {
            assert!((a - b).abs() < 1e-6);
        }
        let inside = vec![0.1, 0.2];
        assert_eq!(project_log_simplex(&inside, 8.0, -40.0), inside);
    }

    #[test]
    fn projection_beats_nearby_feasible_points() {
        let z = vec![2.0, 2.2];
        let floor = -40.0;
        let u = project_log_simplex(&z, 8.0, floor);
        let dist = |v: &[f64]| v.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        for k in 1..200 {
            let p0 = 8.0 * k as f64 / 200.0;
            let cand = [p0.ln(), (8.0 - p0).ln()];
            assert!(dist(&u) <= dist(&cand) + 1e-12);
        }
    }
}
