//! End-to-end acceptance checks on the bundled network. Prints one PASS or
//! FAIL line per criterion and exits nonzero if any fails.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wmsn_core::controller::compute_perturbations;
use wmsn_core::fig2;
use wmsn_core::net::{NetworkConfig, PowerClass};
use wmsn_core::queues::Violation;
use wmsn_core::sim::{run, run_with, sweep, tradeoff, RunOptions};
use wmsn_core::trace::{RunConstants, SlotRecord, TraceWriter};
use wmsn_core::verify::{
    finite_difference_gradient, grid_oracle_subproblem, log_sinr_concavity, random_instance, slot_availability_violations,
    slot_bound_violations, slot_lemma1_violations, GradientInstance, SubproblemKind,
};

const SLOTS: u64 = 20_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    let timing = if in_time { String::new() } else { format!(", over the {:.0?} limit", limit) };
    println!(
        "{} criterion {id}: {name}: {} [{:.2?}{timing}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took
    );
    pass
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6
}

fn constants(cfg: &NetworkConfig) -> Outcome {
    let mut bad = Vec::new();
    let p1 = compute_perturbations(cfg, 1.0, false).unwrap();
    if !close(p1.beta, 2.8) {
        bad.push(format!("beta {}", p1.beta));
    }
    if !close(p1.sigma, 0.05) {
        bad.push(format!("sigma {}", p1.sigma));
    }
    if !close(p1.epsilon, 30.0) {
        bad.push(format!("epsilon {}", p1.epsilon));
    }
    for v in [0.0, 1.0, 50.0, 100.0, 200.0, 500.0] {
        let p = compute_perturbations(cfg, v, false).unwrap();
        let q = compute_perturbations(cfg, v + 1.0, false).unwrap();
        for (n, node) in cfg.nodes.iter().enumerate() {
            match node.power_class {
                PowerClass::Eg | PowerClass::Me if !close(p.theta[n], 56.0 * v + 15.0) => {
                    bad.push(format!("theta[{}] at V={v}: {}", node.id, p.theta[n]))
                }
                PowerClass::Eh if !close(q.theta[n] - p.theta[n], 224.0) => {
                    bad.push(format!("theta[{}] slope at V={v}: {}", node.id, q.theta[n] - p.theta[n]))
                }
                _ => {}
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("beta={:.9} sigma={} epsilon={} theta_G=theta_M=56V+15 theta_H slope 224", p1.beta, p1.sigma, p1.epsilon)
        } else {
            bad.join("; ")
        },
    }
}

struct FixedRun {
    v: f64,
    constants: RunConstants,
    records: Vec<SlotRecord>,
    error: Option<String>,
    took: Duration,
}

fn fixed_run(cfg: &NetworkConfig, v: f64) -> FixedRun {
    let opts = RunOptions {
        v,
        slots: SLOTS,
        seed: 1,
        ..RunOptions::default()
    };
    let start = Instant::now();
    let (constants, records, error) = match run(cfg, &opts) {
        Ok((_, c, r)) => (c, r, None),
        Err(e) => {
            let params = compute_perturbations(cfg, v, false).unwrap();
            (RunConstants::new(cfg, &params), Vec::new(), Some(e.to_string()))
        }
    };
    FixedRun {
        v,
        constants,
        records,
        error,
        took: start.elapsed(),
    }
}

fn scan_runs(runs: &[FixedRun], check: impl Fn(&SlotRecord, &RunConstants) -> Vec<Violation>) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for r in runs {
        if let Some(e) = &r.error {
            pass = false;
            parts.push(format!("V={} aborted: {e}", r.v));
            continue;
        }
        let mut count = 0;
        let mut first = None;
        for rec in &r.records {
            let v = check(rec, &r.constants);
            if first.is_none() && !v.is_empty() {
                first = Some(format!("slot {}: {}", rec.t, v[0]));
            }
            count += v.len();
        }
        pass &= count == 0 && r.records.len() as u64 == SLOTS;
        parts.push(match first {
            None => format!("V={}: {} slots, 0 violations", r.v, r.records.len()),
            Some(f) => format!("V={}: {count} violations, first {f}", r.v),
        });
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn bounds(runs: &[FixedRun]) -> Outcome {
    let slow: Vec<String> = runs
        .iter()
        .filter(|r| r.took > Duration::from_secs(60))
        .map(|r| format!("V={} took {:.1?}", r.v, r.took))
        .collect();
    let mut out = scan_runs(runs, |rec, c| {
        slot_bound_violations(rec, c)
            .into_iter()
            .filter(|v| matches!(v, Violation::DataBound { .. } | Violation::EnergyBound { .. }))
            .collect()
    });
    out.pass &= slow.is_empty();
    let max_q = |r: &FixedRun| r.records.iter().flat_map(|x| x.q.iter().copied()).fold(0.0, f64::max);
    let maxes: Vec<String> = runs
        .iter()
        .map(|r| format!("V={} max Q {:.1} of {:.1} in {:.1?}", r.v, max_q(r), r.constants.data_bound, r.took))
        .collect();
    out.detail = format!("{}; {}", out.detail, maxes.join(", "));
    if !slow.is_empty() {
        out.detail = format!("{}; {}", out.detail, slow.join(", "));
    }
    out
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

fn tradeoff_sweep(cfg: &NetworkConfig) -> Outcome {
    let base = RunOptions {
        slots: SLOTS,
        ..RunOptions::default()
    };
    let summaries = match sweep(cfg, &[50.0, 100.0, 200.0, 500.0], &[1, 2, 3], &base) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("sweep aborted: {e}"),
            }
        }
    };
    let points = tradeoff(&summaries);
    let mut pass = true;
    for w in points.windows(2) {
        if w[1].objective < w[0].objective - 0.02 * w[0].objective.abs() {
            pass = false;
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.v).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.backlog).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    pass &= slope > 0.0 && r2 >= 0.9;
    let table: Vec<String> = points
        .iter()
        .map(|p| format!("V={} O={:.6} Q={:.1}", p.v, p.objective, p.backlog))
        .collect();
    Outcome {
        pass,
        detail: format!("{}; backlog slope {slope:.4} R2 {r2:.4}", table.join(", ")),
    }
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in SubproblemKind::ALL {
        let mut worst = 0.0f64;
        let mut failed = 0;
        for _ in 0..100 {
            let inst = random_instance(kind, &mut rng);
            let rep = grid_oracle_subproblem(kind, &inst, kind.resolution());
            worst = worst.max(rep.gap);
            failed += usize::from(!rep.pass);
        }
        pass &= failed == 0;
        parts.push(format!("{kind:?} {failed}/100 worst {worst:.1e}"));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn gradients(cfg: &NetworkConfig) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for _ in 0..50 {
        let inst = GradientInstance::random(&mut rng);
        for g in finite_difference_gradient(&inst) {
            worst = worst.max(g.rel_error);
            bad += usize::from(g.rel_error > 1e-6);
        }
    }
    let (violations, worst_gap) = log_sinr_concavity(cfg, 1000, 1e-9, &mut rng);
    Outcome {
        pass: bad == 0 && violations == 0,
        detail: format!(
            "gradients: {bad} above 1e-6, worst {worst:.1e}; concavity: {violations}/1000 violations, worst gap {worst_gap:.1e}"
        ),
    }
}

fn multipliers(runs: &[FixedRun]) -> Outcome {
    let mut out = scan_runs(runs, slot_lemma1_violations);
    let peaks: Vec<String> = runs
        .iter()
        .map(|r| {
            let rho = r.records.iter().flat_map(|x| x.rho_sum.iter().copied()).fold(0.0, f64::max);
            let lam = r.records.iter().flat_map(|x| x.lambda.iter().copied()).fold(0.0, f64::max);
            format!(
                "V={} max rho {:.2} of {:.1}, max lambda {:.2} of {:.1}",
                r.v, rho, r.constants.rho_bound, lam, r.constants.lambda_bound
            )
        })
        .collect();
    out.detail = format!("{}; {}", out.detail, peaks.join(", "));
    out
}

fn write_trace(cfg: &NetworkConfig, opts: &RunOptions, path: &Path) -> Result<(), String> {
    let params = compute_perturbations(cfg, opts.v, false).map_err(|e| e.to_string())?;
    let c = RunConstants::new(cfg, &params);
    let file = BufWriter::new(File::create(path).map_err(|e| e.to_string())?);
    let mut w = TraceWriter::new(file, &c).map_err(|e| e.to_string())?;
    run_with(cfg, opts, |r| w.write(r)).map_err(|e| e.to_string())?;
    w.finish().map_err(|e| e.to_string())
}

fn determinism(cfg: &NetworkConfig) -> Outcome {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    let opts = RunOptions {
        v: 100.0,
        slots: SLOTS,
        seed: 7,
        ..RunOptions::default()
    };
    let (a, b) = (dir.join("first_trace.csv"), dir.join("second_trace.csv"));
    if let Err(e) = write_trace(cfg, &opts, &a).and_then(|_| write_trace(cfg, &opts, &b)) {
        return Outcome {
            pass: false,
            detail: e,
        };
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    Outcome {
        pass: x == y && !x.is_empty(),
        detail: format!("{} and {} bytes, identical: {}", x.len(), y.len(), x == y),
    }
}

fn main() {
    let cfg = fig2();
    let mut all = true;
    all &= report(1, "derived constants", Duration::from_secs(1), || constants(&cfg));

    let runs: Vec<FixedRun> = [50.0, 100.0].iter().map(|&v| fixed_run(&cfg, v)).collect();
    all &= report(2, "queue and energy bounds", Duration::from_secs(60), || bounds(&runs));
    all &= report(3, "availability on every slot", Duration::from_secs(60), || {
        scan_runs(&runs, slot_availability_violations)
    });
    all &= report(4, "objective and backlog versus V", Duration::from_secs(600), || tradeoff_sweep(&cfg));
    all &= report(5, "subproblem solvers against oracles", Duration::from_secs(120), oracles);
    all &= report(6, "multiplier gradients and log-SINR concavity", Duration::from_secs(60), || gradients(&cfg));
    all &= report(7, "multiplier bounds", Duration::from_secs(60), || multipliers(&runs));
    all &= report(8, "byte-identical traces", Duration::from_secs(120), || determinism(&cfg));
    if !all {
        std::process::exit(1);
    }
}
