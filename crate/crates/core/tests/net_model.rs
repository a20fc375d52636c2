use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wmsn_core::net::{
    base_gains, capacity_from_sinr, sample_environment, sinr, success_probability, AccessProbabilities,
    EnvironmentState, InfoUnit, LinkSpec, NodeSpec, PowerClass,
};
use wmsn_core::verify::log_sinr_concavity;
use wmsn_core::{fig2, parse_config, ConfigError};

fn node_at(id: &str, x: f64, y: f64) -> NodeSpec {
    let mut n = fig2().nodes[0].clone();
    n.id = id.into();
    n.position = [x, y];
    n
}

#[test]
fn bundled_network_shape() {
    let cfg = fig2();
    assert_eq!(cfg.n_nodes(), 6);
    assert_eq!(cfg.n_links(), 7);
    assert_eq!(cfg.n_sessions(), 1);
    let names: Vec<&str> = cfg.sessions[0].sources.iter().map(|&n| cfg.nodes[n].id.as_str()).collect();
    assert_eq!(names, ["A", "B"]);
    let classes: Vec<PowerClass> = cfg.nodes.iter().map(|n| n.power_class).collect();
    use PowerClass::*;
    assert_eq!(classes, [Eh, Eg, Me, Eh, Unmanaged, Unmanaged]);
    assert_eq!(cfg.topo.n_tuples(), 4);
}

#[test]
fn gain_is_inverse_fourth_power() {
    let nodes = vec![node_at("a", 0.0, 0.0), node_at("b", 2.0, 0.0), node_at("c", 0.0, 10.0)];
    let link = LinkSpec {
        from: 0,
        to: 2,
        distance: 4.0,
        noise: 1.0,
        interferers: vec![],
    };
    let g = base_gains(&nodes, &[link], 4.0);
    assert_eq!(g[1], 0.0625);
    assert_eq!(g[3], 0.0625);
    // The link's own distance overrides geometry for its pair only.
    assert_eq!(g[2], 4f64.powi(-4));
    assert_eq!(g[6], 1e-4);
    assert_eq!(g[0], 0.0);
}

#[test]
fn harvest_and_price_draws() {
    let cfg = fig2();
    let a = cfg.node_index("A").unwrap();
    let b = cfg.node_index("B").unwrap();
    let c = cfg.node_index("C").unwrap();
    let e = cfg.node_index("E").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let env = sample_environment(&cfg, &mut rng);
        assert!((0.0..=50.0).contains(&env.harvestable[a]));
        assert!((0.0..=10.0).contains(&env.harvestable[c]));
        assert_eq!(env.harvestable[b], 0.0);
        for node in [b, c] {
            assert!((0.5..=1.0).contains(&env.price[node]));
        }
        assert_eq!(env.price[a], 0.0);
        assert_eq!(env.price[e], 0.0);
        sum += env.harvestable[a];
    }
    assert!((sum / n as f64 - 25.0).abs() < 0.5);
}

#[test]
fn environment_replays_from_seed() {
    let cfg = fig2();
    let mut r1 = ChaCha8Rng::seed_from_u64(3);
    let mut r2 = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        assert_eq!(sample_environment(&cfg, &mut r1), sample_environment(&cfg, &mut r2));
    }
}

#[test]
fn success_probability_cases() {
    let cfg = fig2();
    let ac = cfg.link_index("A", "C").unwrap();
    let mut q = AccessProbabilities { q: vec![0.0; cfg.n_links()] };
    q.q[ac] = 0.3;
    assert_abs_diff_eq!(success_probability(&cfg, ac, &q), 0.3, epsilon = 1e-15);
    // Receiver C transmitting on C->D with certainty blocks reception.
    q.q[cfg.link_index("C", "D").unwrap()] = 1.0;
    assert_eq!(success_probability(&cfg, ac, &q), 0.0);
    let all = AccessProbabilities { q: vec![1.0; cfg.n_links()] };
    assert_eq!(success_probability(&cfg, cfg.link_index("A", "E").unwrap(), &all), 1.0);
    // Bundled probabilities by hand: 0.3 · (1 - 0.5).
    assert_abs_diff_eq!(success_probability(&cfg, ac, &cfg.access), 0.15, epsilon = 1e-15);
    // C->D: C hears A and B, D sends on two links.
    let cd = cfg.link_index("C", "D").unwrap();
    assert_abs_diff_eq!(success_probability(&cfg, cd, &cfg.access), 0.5 * 0.7 * 0.7 * 0.6, epsilon = 1e-15);
}

#[test]
fn sinr_cases() {
    let cfg = fig2();
    let ac = cfg.link_index("A", "C").unwrap();
    let mut env = EnvironmentState::quiet(&cfg);
    for g in env.channel_gain.iter_mut() {
        *g = 1.0;
    }
    let mut logp = vec![f64::NEG_INFINITY; cfg.n_links()];
    logp[ac] = (8.0 * cfg.links[ac].noise).ln();
    let q = AccessProbabilities { q: vec![0.0; cfg.n_links()] };
    assert_abs_diff_eq!(sinr(&cfg, ac, &logp, &q, &env), 8.0, epsilon = 1e-9);
    logp[ac] = f64::NEG_INFINITY;
    assert_eq!(sinr(&cfg, ac, &logp, &q, &env), 0.0);
}

#[test]
fn capacity_cases() {
    let mut cfg = fig2();
    cfg.params.rate_log = InfoUnit::Bits;
    assert_abs_diff_eq!(capacity_from_sinr(&cfg, 0.3, 8.0), 9.0, epsilon = 1e-12);
    assert_eq!(capacity_from_sinr(&cfg, 0.3, 0.5), 0.0);
    assert_eq!(capacity_from_sinr(&cfg, 0.0, 8.0), 0.0);
    assert_eq!(capacity_from_sinr(&cfg, 1.0, 1e9), 10.0);
    cfg.params.rate_log = InfoUnit::Nats;
    assert_abs_diff_eq!(capacity_from_sinr(&cfg, 0.3, 8.0), 3.0 * 8f64.ln(), epsilon = 1e-12);
}

#[test]
fn config_rejects_bad_probability() {
    let text = wmsn_core::config::FIG2_CFG.replace("q = 0.3", "q = 1.2");
    let err = parse_config(&text).unwrap_err();
    assert!(matches!(err, ConfigError::ProbabilityOutOfRange { .. }));
    assert!(err.to_string().contains("probability out of range"));
}

#[test]
fn config_names_missing_entropy() {
    let text = wmsn_core::config::FIG2_CFG.replace("\"A,B\" = 7.2181549270830745\n", "");
    let err = parse_config(&text).unwrap_err();
    assert!(matches!(err, ConfigError::MissingEntropy { .. }));
    assert!(err.to_string().contains("A,B"), "{err}");
}

#[test]
fn log_sinr_is_concave_on_bundled_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (violations, _) = log_sinr_concavity(&fig2(), 1000, 1e-9, &mut rng);
    assert_eq!(violations, 0);
}

fn arb_access(links: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, links)
}

proptest! {
    #[test]
    fn alpha_is_a_probability(q in arb_access(7)) {
        let cfg = fig2();
        let access = AccessProbabilities { q };
        for l in 0..cfg.n_links() {
            let a = success_probability(&cfg, l, &access);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn sinr_monotone_in_powers(
        powers in prop::collection::vec(1e-4f64..8.0, 7),
        link in 0usize..7,
        bump in 1.0f64..4.0,
    ) {
        let cfg = fig2();
        let env = EnvironmentState::quiet(&cfg);
        let logp: Vec<f64> = powers.iter().map(|p| p.ln()).collect();
        let base = sinr(&cfg, link, &logp, &cfg.access, &env);
        let mut own = logp.clone();
        own[link] += bump.ln();
        prop_assert!(sinr(&cfg, link, &own, &cfg.access, &env) >= base);
        for &j in &cfg.links[link].interferers {
            let mut other = logp.clone();
            other[j] += bump.ln();
            prop_assert!(sinr(&cfg, link, &other, &cfg.access, &env) <= base);
        }
    }

    #[test]
    fn capacity_within_cap(alpha in 0.0f64..=1.0, log_gamma in -20.0f64..40.0) {
        let cfg = fig2();
        let c = capacity_from_sinr(&cfg, alpha, log_gamma.exp());
        prop_assert!((0.0..=cfg.params.x_max).contains(&c));
    }

    #[test]
    fn log_sinr_midpoint_concavity(
        x in prop::collection::vec(-12.0f64..2.1, 7),
        y in prop::collection::vec(-12.0f64..2.1, 7),
        link in 0usize..7,
    ) {
        let cfg = fig2();
        let env = EnvironmentState::quiet(&cfg);
        let f = |p: &[f64]| sinr(&cfg, link, p, &cfg.access, &env).ln();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        prop_assert!(f(&mid) >= 0.5 * (f(&x) + f(&y)) - 1e-9);
    }
}
