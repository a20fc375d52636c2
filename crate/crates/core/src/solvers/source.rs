//! Distortion and source-rate subproblems.

use crate::net::{InfoUnit, SessionSpec, Utility};

/// Interval width at which golden-section search stops.
pub const GOLDEN_TOL: f64 = 1e-8;

/// Objective of the distortion subproblem: `V ϖ1 U(D) + ρ log(D)`.
pub fn distortion_objective(utility: &Utility, vw: f64, rho_sum: f64, unit: InfoUnit, d: f64) -> f64 {
    vw * utility.value(d) + rho_sum * unit.log(d)
}

/// Maximizes the distortion objective over `[D_min, D_max]`; `vw` is `V ϖ1`.
pub fn solve_distortion(session: &SessionSpec, rho_sum: f64, vw: f64, unit: InfoUnit) -> f64 {
    let (lo, hi) = (session.d_min, session.d_max);
    match session.utility {
        Utility::LogOneMinus => {
            let r = rho_sum * unit.per_nat();
            if r <= 0.0 {
                lo
            } else {
                (r / (vw + r)).clamp(lo, hi)
            }
        }
        u => golden_section_max(|d| distortion_objective(&u, vw, rho_sum, unit, d), lo, hi, GOLDEN_TOL),
    }
}

/// Maximizer of a unimodal function on `[lo, hi]`; prefers the left end on ties.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, mid, hi]
        .into_iter()
        .fold((f64::NEG_INFINITY, lo), |best, x| {
            let v = f(x);
            if v > best.0 {
                (v, x)
            } else {
                best
            }
        })
        .1
}

/// Full rate when `ρ - ΣQ + A·P̃_S > 0`, zero otherwise.
pub fn solve_source_rate(rho_sum: f64, q_sum: f64, a: f64, sense_cost: f64, r_max: f64) -> f64 {
    if rho_sum - q_sum + a * sense_cost > 0.0 {
        r_max
    } else {
        0.0
    }
}
