//! Conditional entropies of correlated sources, one entry per nonempty
//! subset of a session's sources.

use serde::Serialize;

use crate::net::InfoUnit;

/// `values[mask - 1]` is H(subset | remaining sources) for the subset whose
/// members are the set bits of `mask`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTable {
    pub n_sources: usize,
    pub values: Vec<f64>,
}

impl EntropyTable {
    pub fn new(n_sources: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), (1usize << n_sources) - 1);
        EntropyTable { n_sources, values }
    }

    pub fn get(&self, mask: u32) -> Option<f64> {
        if mask == 0 {
            return None;
        }
        self.values.get(mask as usize - 1).copied()
    }

    pub fn full_mask(&self) -> u32 {
        ((1u64 << self.n_sources) - 1) as u32
    }
}

/// Differential-entropy table for jointly Gaussian sources with covariance
/// `cov`: H(S | rest) = h(all) - h(rest).
pub fn gaussian_entropy_table(cov: &[Vec<f64>], unit: InfoUnit) -> EntropyTable {
    let k = cov.len();
    let full = (1u32 << k) - 1;
    let h_all = gaussian_joint_entropy(cov, full, unit);
    let values = (1..=full)
        .map(|mask| h_all - gaussian_joint_entropy(cov, full & !mask, unit))
        .collect();
    EntropyTable::new(k, values)
}

/// h(X_S) = ½ log((2πe)^|S| det Σ_S); zero for the empty set.
pub fn gaussian_joint_entropy(cov: &[Vec<f64>], mask: u32, unit: InfoUnit) -> f64 {
    let idx: Vec<usize> = (0..cov.len()).filter(|&i| mask >> i & 1 == 1).collect();
    if idx.is_empty() {
        return 0.0;
    }
    let sub: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| cov[i][j]).collect())
        .collect();
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let nats = 0.5 * (idx.len() as f64 * two_pi_e.ln() + determinant(sub).ln());
    nats * unit.per_nat()
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[pivot][c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            m.swap(pivot, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let factor = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= factor * m[c][k];
            }
        }
    }
    det
}

/// Human-readable subset label, e.g. `A,B`.
pub fn subset_label(names: &[&str], mask: u32) -> String {
    names
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, n)| *n)
        .collect::<Vec<_>>()
        .join(",")
}
