use approx::assert_abs_diff_eq;

use wmsn_core::entropy::EntropyTable;
use wmsn_core::fig2;
use wmsn_core::net::{NetworkConfig, PowerClass};
use wmsn_core::sim::{run, sweep, tradeoff, RunOptions, Simulator};
use wmsn_core::trace::TraceWriter;

fn opts(v: f64, slots: u64, seed: u64) -> RunOptions {
    RunOptions {
        v,
        slots,
        seed,
        ..RunOptions::default()
    }
}

fn trace_bytes(cfg: &NetworkConfig, o: &RunOptions) -> Vec<u8> {
    let (_, c, records) = run(cfg, o).unwrap();
    let mut buf = Vec::new();
    let mut w = TraceWriter::new(&mut buf, &c).unwrap();
    for r in &records {
        w.write(r).unwrap();
    }
    w.finish().unwrap();
    buf
}

#[test]
fn identical_inputs_give_identical_traces() {
    let cfg = fig2();
    let a = trace_bytes(&cfg, &opts(200.0, 150, 4));
    let b = trace_bytes(&cfg, &opts(200.0, 150, 4));
    assert_eq!(a, b);
    let c = trace_bytes(&cfg, &opts(200.0, 150, 5));
    assert_ne!(a, c);
}

#[test]
fn stepping_matches_run() {
    let cfg = fig2();
    let o = opts(100.0, 30, 2);
    let (_, _, records) = run(&cfg, &o).unwrap();
    let mut sim = Simulator::new(&cfg, &o).unwrap();
    for r in &records {
        assert_eq!(&sim.step().unwrap(), r);
    }
    assert_eq!(sim.slot(), 30);
}

fn degenerate() -> NetworkConfig {
    let mut cfg = fig2();
    for n in cfg.nodes.iter_mut() {
        if n.harvest.is_some() {
            n.harvest = Some((0.0, 0.0));
        }
    }
    cfg.params.price_range = (0.0, 0.0);
    let s = &mut cfg.sessions[0];
    s.r_max = 0.0;
    // log(2πe · 0.06) > 0, so zero rate satisfies every rate-region constraint.
    s.d_min = 0.06;
    s.entropy = EntropyTable::new(2, vec![0.0; 3]);
    cfg.rebuild();
    cfg
}

#[test]
fn degenerate_network_sits_still() {
    let cfg = degenerate();
    let (summary, _, records) = run(&cfg, &opts(100.0, 200, 1)).unwrap();
    let expect = 0.7 * 2.0 * (1.0f64 - 0.06).ln();
    for r in &records {
        assert_abs_diff_eq!(r.objective, expect, epsilon = 1e-12);
        assert!(r.q.iter().all(|&q| q == 0.0));
        assert!(r.rho_sum.iter().all(|&x| x == 0.0));
        for (n, node) in cfg.nodes.iter().enumerate() {
            if node.power_class == PowerClass::Eh {
                assert_eq!(r.energy[n], 0.0);
            }
        }
    }
    assert_abs_diff_eq!(summary.avg_objective, expect, epsilon = 1e-12);
    assert_eq!(summary.avg_backlog, 0.0);
}

#[test]
fn summary_agrees_with_records() {
    let cfg = fig2();
    let (s, c, records) = run(&cfg, &opts(200.0, 400, 3)).unwrap();
    assert_eq!(records.len(), 400);
    assert_eq!(s.warmup_slots, 40);
    let tail = &records[40..];
    let mean = |f: &dyn Fn(&wmsn_core::trace::SlotRecord) -> f64| tail.iter().map(f).sum::<f64>() / tail.len() as f64;
    assert_abs_diff_eq!(s.avg_objective, mean(&|r| r.objective), epsilon = 1e-9);
    assert_abs_diff_eq!(s.avg_backlog, mean(&|r| r.q.iter().sum()), epsilon = 1e-9);
    let all = records.iter().map(|r| r.objective).sum::<f64>() / 400.0;
    assert_abs_diff_eq!(s.avg_objective_all, all, epsilon = 1e-9);
    assert_eq!(s.violation_count, 0);
    assert_eq!(c.v, 200.0);
}

#[test]
fn sweep_keeps_job_order() {
    let cfg = fig2();
    let base = opts(0.0, 25, 0);
    let out = sweep(&cfg, &[500.0, 50.0], &[2, 1], &base).unwrap();
    let keys: Vec<(f64, u64)> = out.iter().map(|s| (s.v, s.seed)).collect();
    assert_eq!(keys, [(500.0, 2), (500.0, 1), (50.0, 2), (50.0, 1)]);
    let single = run(&cfg, &opts(50.0, 25, 1)).unwrap().0;
    assert_eq!(out[3], single);
    let points = tradeoff(&out);
    assert_eq!(points.len(), 2);
    assert_eq!(points[0].v, 50.0);
    assert_eq!(points[0].runs, 2);
    assert_abs_diff_eq!(points[1].objective, (out[0].avg_objective + out[1].avg_objective) / 2.0, epsilon = 1e-12);
}
