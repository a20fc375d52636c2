//! Slot loop: sample the environment, run the inner dual iterations, commit
//! the primal decision, check it, and advance the queues.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::controller::{compute_perturbations, node_coefficients, LyapunovParams};
use crate::error::SimError;
use crate::net::{link_capacity, sample_environment, EnvironmentState, NetworkConfig, PowerClass, PrimalCommit};
use crate::queues::{
    self, availability_check, outgoing_info, total_energy_consumption, ControlDecision, QueueBank, Violation,
};
use crate::scheduler::{coding_consistency_check, max_weights, schedule};
use crate::solvers::{
    self, dual_update, lambda_gradient, price_weight, rho_gradient, BcdOptions, DualState, GridCaps, PowerSolution,
};
use crate::trace::{RunConstants, SlotRecord};
use crate::verify;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub v: f64,
    pub slots: u64,
    pub seed: u64,
    pub use_theta_override: bool,
    pub defensive_clamp: bool,
    /// Keep going after a violation, truncating queues at zero.
    pub tolerate: bool,
    /// Leading fraction of slots left out of the post-warmup averages.
    pub warmup_fraction: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            v: 100.0,
            slots: 20_000,
            seed: 1,
            use_theta_override: false,
            defensive_clamp: false,
            tolerate: false,
            warmup_fraction: 0.1,
        }
    }
}

/// One committed primal solve with its power-allocation diagnostics.
struct Primal {
    dec: ControlDecision,
    power: PowerSolution,
}

pub struct Simulator {
    cfg: NetworkConfig,
    params: LyapunovParams,
    constants: RunConstants,
    opts: RunOptions,
    rng: ChaCha8Rng,
    queues: QueueBank,
    duals: DualState,
    warm_p: Vec<f64>,
    t: u64,
}

impl Simulator {
    pub fn new(cfg: &NetworkConfig, opts: &RunOptions) -> Result<Self, SimError> {
        let params = compute_perturbations(cfg, opts.v, opts.use_theta_override)?;
        let constants = RunConstants::new(cfg, &params);
        Ok(Simulator {
            cfg: cfg.clone(),
            params,
            constants,
            opts: opts.clone(),
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            queues: QueueBank::initial(cfg),
            duals: DualState::zeros(cfg),
            warm_p: vec![0.0; cfg.n_links()],
            t: 0,
        })
    }

    pub fn params(&self) -> &LyapunovParams {
        &self.params
    }

    pub fn constants(&self) -> &RunConstants {
        &self.constants
    }

    pub fn queues(&self) -> &QueueBank {
        &self.queues
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    fn solve_primal(&self, env: &EnvironmentState, duals: &DualState, warm: &[f64], multi_start: bool) -> Primal {
        let cfg = &self.cfg;
        let p = &cfg.params;
        let energy = &self.queues.energy.e;
        let data = &self.queues.data;
        let a = node_coefficients(cfg, energy, &self.params, &duals.lambda);
        let mut dec = ControlDecision::zeros(cfg);
        let w = price_weight(self.params.v, p.varpi1, p.varpi2);

        for (n, node) in cfg.nodes.iter().enumerate() {
            let (stored, theta, lambda) = (energy[n], self.params.theta[n], duals.lambda[n]);
            let caps = GridCaps {
                g_max: node.g_max,
                d_max: node.d_max,
                y_max: node.y_max,
            };
            let h = env.harvestable[n];
            match node.power_class {
                PowerClass::Eh => dec.e[n] = solvers::solve_eh_harvest(stored, theta, h),
                PowerClass::Me => {
                    (dec.e[n], dec.g[n]) = solvers::solve_me_harvest_charge(stored, theta, lambda, h, node.g_max);
                    (dec.d[n], dec.y[n]) =
                        solvers::solve_me_discharge_purchase(stored, theta, lambda, env.price[n], w, caps);
                }
                PowerClass::Eg => {
                    (dec.g[n], dec.d[n], dec.y[n]) = solvers::solve_eg(stored, theta, lambda, env.price[n], w, caps);
                }
                PowerClass::Unmanaged => {}
            }
        }

        let vw = self.params.v * p.varpi1;
        for (k, src) in cfg.topo.sources.iter().enumerate() {
            let session = &cfg.sessions[src.session];
            let rho_sum = duals.rho_sum(cfg, k);
            let q_sum: f64 = cfg.topo.session_tuples[src.session]
                .clone()
                .filter(|&t| cfg.topo.tuples[t].source_idx == src.source_idx)
                .map(|t| data.get(cfg, src.node, t))
                .sum();
            dec.r[k] = solvers::solve_source_rate(rho_sum, q_sum, a[src.node], session.sense_cost, session.r_max);
            dec.dist[k] = solvers::solve_distortion(session, rho_sum, vw, p.rate_log);
        }

        let weights = max_weights(cfg, data, &a, self.params.epsilon);
        let bcd = BcdOptions {
            max_sweeps: cfg.solver.bcd_max_sweeps,
            tol: cfg.solver.bcd_tol,
            multi_start,
        };
        let power = solvers::solve_power_allocation(cfg, env, &weights, &a, Some(warm), &bcd);
        let lp = power.log_powers();
        let caps: Vec<f64> = (0..cfg.n_links())
            .map(|l| link_capacity(cfg, l, &lp, &cfg.access, env))
            .collect();
        let sched = schedule(cfg, &caps, data, &a, self.params.epsilon, self.opts.defensive_clamp);
        dec.p.clone_from(&power.p);
        dec.x = sched.x;
        dec.x_info = sched.x_info;
        Primal { dec, power }
    }

    /// Trims discharge so it never exceeds what the node can use, lowers the
    /// charge if the grid draw would exceed its cap, then sets the draw to
    /// balance exactly.
    fn settle_grid(&self, dec: &mut ControlDecision) {
        for (n, node) in self.cfg.nodes.iter().enumerate() {
            if !node.power_class.is_grid() {
                continue;
            }
            let ptot = total_energy_consumption(&self.cfg, n, dec);
            dec.d[n] = dec.d[n].min(dec.g[n] + ptot);
            if dec.g[n] - dec.d[n] + ptot > node.y_max {
                dec.g[n] = (node.y_max + dec.d[n] - ptot).max(0.0);
            }
            dec.y[n] = dec.g[n] - dec.d[n] + ptot;
        }
    }

    fn box_violations(&self, env: &EnvironmentState, dec: &ControlDecision) -> Vec<Violation> {
        let cfg = &self.cfg;
        let mut out = Vec::new();
        let mut check = |name: String, value: f64, lo: f64, hi: f64| {
            let slack = 1e-9 * (1.0 + hi.abs());
            if !(value >= lo - slack && value <= hi + slack) {
                out.push(Violation::DecisionBox {
                    variable: name,
                    value,
                    lo,
                    hi,
                });
            }
        };
        for (n, node) in cfg.nodes.iter().enumerate() {
            let id = &node.id;
            check(format!("e[{id}]"), dec.e[n], 0.0, env.harvestable[n]);
            if node.power_class.is_grid() {
                check(format!("g[{id}]"), dec.g[n], 0.0, node.g_max);
                check(format!("d[{id}]"), dec.d[n], 0.0, node.d_max);
                check(format!("y[{id}]"), dec.y[n], 0.0, node.y_max);
            }
            let sent: f64 = cfg.topo.out_links[n].iter().map(|&l| dec.p[l]).sum();
            check(format!("sum p[{id}]"), sent, 0.0, node.p_max);
        }
        for (k, src) in cfg.topo.sources.iter().enumerate() {
            let s = &cfg.sessions[src.session];
            let label = &self.constants.sources[k];
            check(format!("r[{label}]"), dec.r[k], 0.0, s.r_max);
            check(format!("D[{label}]"), dec.dist[k], s.d_min, s.d_max);
        }
        out
    }

    /// Runs one slot and returns its record. Without `tolerate`, any
    /// violation aborts with [`SimError::Violations`] before the queues move.
    pub fn step(&mut self) -> Result<SlotRecord, SimError> {
        let cfg = self.cfg.clone();
        let env = sample_environment(&cfg, &mut self.rng);
        let k = cfg.solver.dual_iterations.max(1);

        let mut duals = self.duals.clone();
        duals.step_lambda = cfg.solver.kappa_lambda;
        duals.step_rho = cfg.solver.kappa_rho;
        let mut warm = self.warm_p.clone();
        let mut primal = None;
        let mut mean = ControlDecision::zeros(&cfg);
        mean.dist.fill(0.0);
        for i in 0..k {
            let last = i + 1 == k;
            let sol = self.solve_primal(&env, &duals, &warm, last);
            warm.clone_from(&sol.power.p);
            for (acc, x) in [
                (&mut mean.e, &sol.dec.e),
                (&mut mean.g, &sol.dec.g),
                (&mut mean.d, &sol.dec.d),
                (&mut mean.y, &sol.dec.y),
                (&mut mean.r, &sol.dec.r),
                (&mut mean.dist, &sol.dec.dist),
            ] {
                for (a, b) in acc.iter_mut().zip(x) {
                    *a += b / k as f64;
                }
            }
            if !last {
                duals = dual_update(&cfg, &duals, &sol.dec, i);
            }
            primal = Some(sol);
        }
        let Primal { mut dec, power } = primal.expect("at least one iteration");
        if cfg.solver.commit == PrimalCommit::Average {
            dec.e = mean.e;
            dec.g = mean.g;
            dec.d = mean.d;
            dec.y = mean.y;
            dec.r = mean.r;
            dec.dist = mean.dist;
        }
        self.settle_grid(&mut dec);

        let nt = cfg.topo.n_tuples();
        let nn = cfg.n_nodes();
        let mut q_out = vec![0.0; nn * nt];
        for n in 0..nn {
            for t in 0..nt {
                q_out[n * nt + t] = outgoing_info(&cfg, &dec, n, t);
            }
        }
        let ptot: Vec<f64> = (0..nn).map(|n| total_energy_consumption(&cfg, n, &dec)).collect();
        let rho_sum: Vec<f64> = (0..cfg.topo.sources.len()).map(|s| duals.rho_sum(&cfg, s)).collect();
        let utility: f64 = dec
            .dist
            .iter()
            .zip(&cfg.topo.sources)
            .map(|(&d, s)| cfg.sessions[s.session].utility.value(d))
            .sum();
        let grid_cost: f64 = env.price.iter().zip(&dec.y).map(|(p, y)| p * y).sum();
        let (v1, v2) = (cfg.params.varpi1, cfg.params.varpi2);
        let lambda_grad = (0..nn)
            .filter(|&n| cfg.nodes[n].power_class.is_grid())
            .map(|n| projected_residual(duals.lambda[n], lambda_gradient(&cfg, n, &dec)))
            .fold(0.0, f64::max);
        let mut rho_grad: f64 = 0.0;
        for (f, s) in cfg.sessions.iter().enumerate() {
            for mask in 1..(1u32 << s.sources.len()) {
                let g = rho_gradient(&cfg, f, mask, &dec);
                rho_grad = rho_grad.max(projected_residual(duals.rho_at(&cfg, f, mask), g));
            }
        }

        let mut rec = SlotRecord {
            t: self.t,
            objective: v1 * utility - (1.0 - v1) * v2 * grid_cost,
            utility,
            grid_cost,
            q: self.queues.data.q.clone(),
            q_out,
            energy: self.queues.energy.e.clone(),
            e: dec.e.clone(),
            g: dec.g.clone(),
            d: dec.d.clone(),
            y: dec.y.clone(),
            ptot,
            lambda: duals.lambda.clone(),
            r: dec.r.clone(),
            dist: dec.dist.clone(),
            rho_sum,
            p: dec.p.clone(),
            x: dec.x.clone(),
            harvestable: env.harvestable.clone(),
            price: env.price.clone(),
            dual_iters: k,
            lambda_grad,
            rho_grad,
            bcd_sweeps: power.sweeps,
            bcd_converged: power.converged,
            violations: Vec::new(),
        };

        let mut violations = availability_check(&cfg, &self.queues, &dec);
        violations.extend(coding_consistency_check(&cfg, &dec.x, &dec.x_info));
        violations.extend(self.box_violations(&env, &dec));
        violations.extend(verify::slot_bound_violations(&rec, &self.constants));
        violations.extend(verify::slot_lemma1_violations(&rec, &self.constants));
        if !violations.is_empty() {
            if !self.opts.tolerate {
                return Err(SimError::Violations {
                    slot: self.t,
                    violations,
                });
            }
            log::warn!("slot {}: {} violation(s), first: {}", self.t, violations.len(), violations[0]);
            rec.violations = violations.iter().map(ToString::to_string).collect();
        }

        self.advance(&dec);
        self.duals = duals;
        self.warm_p = dec.p;
        self.t += 1;
        Ok(rec)
    }

    fn advance(&mut self, dec: &ControlDecision) {
        let cfg = &self.cfg;
        match queues::step_data_queue(cfg, &self.queues.data, dec) {
            Ok(d) => self.queues.data = d,
            Err(_) => {
                let nt = cfg.topo.n_tuples();
                for n in 0..cfg.n_nodes() {
                    for t in 0..nt {
                        let i = n * nt + t;
                        self.queues.data.q[i] = if cfg.topo.tuples[t].sink == n {
                            0.0
                        } else {
                            let q = self.queues.data.q[i];
                            (q - outgoing_info(cfg, dec, n, t)).max(0.0) + queues::data_arrivals(cfg, dec, n, t)
                        };
                    }
                }
            }
        }
        match queues::step_energy_bank(cfg, &self.queues.energy, dec) {
            Ok(e) => self.queues.energy = e,
            Err(_) => {
                for (n, node) in cfg.nodes.iter().enumerate() {
                    let e = self.queues.energy.e[n];
                    let (inflow, outflow) = match node.power_class {
                        PowerClass::Eh => (dec.e[n], total_energy_consumption(cfg, n, dec)),
                        PowerClass::Eg => (dec.g[n], dec.d[n]),
                        PowerClass::Me => (dec.e[n] + dec.g[n], dec.d[n]),
                        PowerClass::Unmanaged => (0.0, 0.0),
                    };
                    self.queues.energy.e[n] = (e - outflow).max(0.0) + inflow;
                }
            }
        }
    }
}

/// How far a multiplier is from complementary slackness: a slack
/// constraint with a zero multiplier reports 0.
fn projected_residual(multiplier: f64, gradient: f64) -> f64 {
    if multiplier > 0.0 {
        gradient.abs()
    } else {
        gradient.max(0.0)
    }
}

/// Per-queue statistics over the post-warmup slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueStat {
    pub label: String,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub v: f64,
    pub seed: u64,
    pub slots: u64,
    pub warmup_slots: u64,
    /// Time-average objective after warmup.
    pub avg_objective: f64,
    /// Time-average objective over every slot.
    pub avg_objective_all: f64,
    pub avg_utility: f64,
    pub avg_grid_cost: f64,
    pub avg_distortion: f64,
    /// Time-average of the summed data backlog after warmup.
    pub avg_backlog: f64,
    pub max_backlog: f64,
    pub data_queues: Vec<QueueStat>,
    pub energy_queues: Vec<QueueStat>,
    pub violation_slots: u64,
    pub violation_count: u64,
    pub bcd_nonconverged: u64,
}

/// Accumulates a [`RunSummary`] one record at a time.
pub struct SummaryBuilder {
    constants: RunConstants,
    opts: RunOptions,
    warmup: u64,
    n: u64,
    n_all: u64,
    obj: f64,
    obj_all: f64,
    utility: f64,
    grid_cost: f64,
    dist: f64,
    backlog: f64,
    max_backlog: f64,
    q_sum: Vec<f64>,
    q_max: Vec<f64>,
    e_sum: Vec<f64>,
    e_max: Vec<f64>,
    violation_slots: u64,
    violation_count: u64,
    bcd_nonconverged: u64,
}

impl SummaryBuilder {
    pub fn new(constants: &RunConstants, opts: &RunOptions) -> Self {
        let nq = constants.n_nodes() * constants.n_tuples();
        let ne = constants.n_nodes();
        SummaryBuilder {
            constants: constants.clone(),
            opts: opts.clone(),
            warmup: (opts.slots as f64 * opts.warmup_fraction).floor() as u64,
            n: 0,
            n_all: 0,
            obj: 0.0,
            obj_all: 0.0,
            utility: 0.0,
            grid_cost: 0.0,
            dist: 0.0,
            backlog: 0.0,
            max_backlog: 0.0,
            q_sum: vec![0.0; nq],
            q_max: vec![0.0; nq],
            e_sum: vec![0.0; ne],
            e_max: vec![0.0; ne],
            violation_slots: 0,
            violation_count: 0,
            bcd_nonconverged: 0,
        }
    }

    pub fn push(&mut self, rec: &SlotRecord) {
        self.n_all += 1;
        self.obj_all += rec.objective;
        if !rec.violations.is_empty() {
            self.violation_slots += 1;
            self.violation_count += rec.violations.len() as u64;
        }
        if !rec.bcd_converged {
            self.bcd_nonconverged += 1;
        }
        if rec.t < self.warmup {
            return;
        }
        self.n += 1;
        self.obj += rec.objective;
        self.utility += rec.utility;
        self.grid_cost += rec.grid_cost;
        self.dist += rec.dist.iter().sum::<f64>() / rec.dist.len().max(1) as f64;
        let total: f64 = rec.q.iter().sum();
        self.backlog += total;
        self.max_backlog = self.max_backlog.max(total);
        for (i, &q) in rec.q.iter().enumerate() {
            self.q_sum[i] += q;
            self.q_max[i] = self.q_max[i].max(q);
        }
        for (i, &e) in rec.energy.iter().enumerate() {
            self.e_sum[i] += e;
            self.e_max[i] = self.e_max[i].max(e);
        }
    }

    pub fn finish(self) -> RunSummary {
        let n = self.n.max(1) as f64;
        let c = &self.constants;
        let nt = c.n_tuples();
        let mut data_queues = Vec::new();
        for (ni, node) in c.nodes.iter().enumerate() {
            for (t, tuple) in c.tuples.iter().enumerate() {
                if tuple.sink == ni {
                    continue;
                }
                let i = ni * nt + t;
                data_queues.push(QueueStat {
                    label: format!("{}|{}", node.id, tuple.label),
                    mean: self.q_sum[i] / n,
                    max: self.q_max[i],
                });
            }
        }
        let energy_queues = c
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, node)| node.class.has_energy_queue())
            .map(|(i, node)| QueueStat {
                label: node.id.clone(),
                mean: self.e_sum[i] / n,
                max: self.e_max[i],
            })
            .collect();
        RunSummary {
            v: self.opts.v,
            seed: self.opts.seed,
            slots: self.n_all,
            warmup_slots: self.warmup.min(self.n_all),
            avg_objective: self.obj / n,
            avg_objective_all: self.obj_all / self.n_all.max(1) as f64,
            avg_utility: self.utility / n,
            avg_grid_cost: self.grid_cost / n,
            avg_distortion: self.dist / n,
            avg_backlog: self.backlog / n,
            max_backlog: self.max_backlog,
            data_queues,
            energy_queues,
            violation_slots: self.violation_slots,
            violation_count: self.violation_count,
            bcd_nonconverged: self.bcd_nonconverged,
        }
    }
}

/// Runs `opts.slots` slots, handing every record to `sink`.
pub fn run_with<F>(cfg: &NetworkConfig, opts: &RunOptions, mut sink: F) -> Result<(RunSummary, RunConstants), SimError>
where
    F: FnMut(&SlotRecord) -> Result<(), SimError>,
{
    let mut sim = Simulator::new(cfg, opts)?;
    let mut summary = SummaryBuilder::new(sim.constants(), opts);
    for _ in 0..opts.slots {
        let rec = sim.step()?;
        summary.push(&rec);
        sink(&rec)?;
    }
    Ok((summary.finish(), sim.constants().clone()))
}

/// Runs and keeps every record.
pub fn run(cfg: &NetworkConfig, opts: &RunOptions) -> Result<(RunSummary, RunConstants, Vec<SlotRecord>), SimError> {
    let mut records = Vec::with_capacity(opts.slots as usize);
    let (summary, constants) = run_with(cfg, opts, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok((summary, constants, records))
}

/// Runs every (V, seed) pair, in parallel, and returns summaries in input order.
pub fn sweep(cfg: &NetworkConfig, vs: &[f64], seeds: &[u64], base: &RunOptions) -> Result<Vec<RunSummary>, SimError> {
    let jobs: Vec<(f64, u64)> = vs.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    jobs.par_iter()
        .map(|&(v, seed)| {
            let opts = RunOptions { v, seed, ..base.clone() };
            run_with(cfg, &opts, |_| Ok(())).map(|(s, _)| s)
        })
        .collect()
}

/// Mean of `avg_objective` and `avg_backlog` over seeds, per V.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub v: f64,
    pub objective: f64,
    pub backlog: f64,
    pub runs: usize,
}

pub fn tradeoff(summaries: &[RunSummary]) -> Vec<TradeoffPoint> {
    let mut vs: Vec<f64> = summaries.iter().map(|s| s.v).collect();
    vs.sort_by(f64::total_cmp);
    vs.dedup();
    vs.into_iter()
        .map(|v| {
            let runs: Vec<&RunSummary> = summaries.iter().filter(|s| s.v == v).collect();
            let k = runs.len() as f64;
            TradeoffPoint {
                v,
                objective: runs.iter().map(|s| s.avg_objective).sum::<f64>() / k,
                backlog: runs.iter().map(|s| s.avg_backlog).sum::<f64>() / k,
                runs: runs.len(),
            }
        })
        .collect()
}
