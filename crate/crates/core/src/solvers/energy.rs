//! Bang-bang energy subproblems. Every objective is linear in the decision,
//! so the optimum sits at a box vertex; a zero coefficient picks zero.

/// Battery and grid caps of a grid-connected node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCaps {
    pub g_max: f64,
    pub d_max: f64,
    pub y_max: f64,
}

/// `V (1 - ϖ1) ϖ2`, the weight of one unit of grid cost in the penalty.
pub fn price_weight(v: f64, varpi1: f64, varpi2: f64) -> f64 {
    v * (1.0 - varpi1) * varpi2
}

/// Harvest as much as fits below θ.
pub fn solve_eh_harvest(stored: f64, theta: f64, h: f64) -> f64 {
    if stored - theta < 0.0 {
        h.min(theta - stored).max(0.0)
    } else {
        0.0
    }
}

/// `(e, g)` for a node that both harvests and charges from the grid.
pub fn solve_me_harvest_charge(stored: f64, theta: f64, lambda: f64, h: f64, g_max: f64) -> (f64, f64) {
    let e = if stored - theta < 0.0 { h } else { 0.0 };
    let g = if stored - theta + lambda < 0.0 { g_max } else { 0.0 };
    (e, g)
}

/// `(d, y)`: buy at the cap when λ outweighs the price, discharge when the
/// store sits above θ - λ.
pub fn solve_me_discharge_purchase(
    stored: f64,
    theta: f64,
    lambda: f64,
    price: f64,
    weight: f64,
    caps: GridCaps,
) -> (f64, f64) {
    let d = if stored - theta + lambda > 0.0 { caps.d_max } else { 0.0 };
    let y = if weight * price - lambda < 0.0 { caps.y_max } else { 0.0 };
    (d, y)
}

/// `(g, d, y)` for a grid-only node.
pub fn solve_eg(stored: f64, theta: f64, lambda: f64, price: f64, weight: f64, caps: GridCaps) -> (f64, f64, f64) {
    let c = stored - theta + lambda;
    let g = if c < 0.0 { caps.g_max } else { 0.0 };
    let d = if c > 0.0 { caps.d_max } else { 0.0 };
    let y = if weight * price - lambda < 0.0 { caps.y_max } else { 0.0 };
    (g, d, y)
}
