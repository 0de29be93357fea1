use serde::{Deserialize, Serialize};

use super::check_eta;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarMetrics {
    pub n: usize,
    pub eta: f64,
    pub trained: bool,
    /// `n_T(i)` for `i = 1..=n`; `v_1` is the smart center.
    pub n_true: Vec<f64>,
    /// `n_F(i)` for `i = 2..=n`, always 1: the center never relays a false
    /// message.
    pub n_false: Vec<f64>,
    pub f_true: f64,
    pub f_false: f64,
    pub ifa: f64,
}

/// Exact spread counts and abilities of an `n`-node star with a smart
/// center. Training saturates the center-to-leaf links, which doubles both
/// `eta` coefficients.
pub fn star_metrics(n: usize, eta: f64, trained: bool) -> Result<StarMetrics> {
    if n < 2 {
        return Err(Error::InvalidTopology(format!("star needs n >= 2, got {n}")));
    }
    check_eta(eta)?;
    let m = n as f64;
    // weight on center -> leaf
    let w = if trained { 1.0 } else { 0.5 };
    let center = 1.0 + w * eta * (m - 1.0);
    let leaf = 1.0 + eta + w * eta * eta * (m - 2.0);
    let mut n_true = vec![leaf; n];
    n_true[0] = center;

    let linear = if trained { 2.0 * eta } else { 1.5 * eta };
    let quadratic = w * eta * eta;
    let pairs = m * m - 3.0 * m + 2.0;
    let f_true = (m + linear * (m - 1.0) + quadratic * pairs) / (m * m);
    let ifa = (linear * (m - 1.0) + quadratic * pairs) / m;

    Ok(StarMetrics {
        n,
        eta,
        trained,
        n_true,
        n_false: vec![1.0; n - 1],
        f_true,
        f_false: 1.0 / m,
        ifa,
    })
}
