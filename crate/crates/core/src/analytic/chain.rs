use serde::{Deserialize, Serialize};

use super::{check_eta, geometric_sum as g, AnalyticMode};
use crate::error::{Error, Result};

/// Expected spread per source and the aggregate abilities of a chain whose
/// terminal `v_1` is smart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMetrics {
    pub n: usize,
    pub eta: f64,
    pub trained: bool,
    pub mode: AnalyticMode,
    /// `n_T(i)` for `i = 1..=n` (index 0 is `v_1`).
    pub n_true: Vec<f64>,
    /// `n_F(i)` for `i = 2..=n` (index 0 is `v_2`).
    pub n_false: Vec<f64>,
    pub f_true: f64,
    pub f_false: f64,
    pub ifa: f64,
}

impl ChainMetrics {
    pub fn n_true_at(&self, i: usize) -> f64 {
        self.n_true[i - 1]
    }

    pub fn n_false_at(&self, i: usize) -> f64 {
        self.n_false[i - 2]
    }
}

/// Per-hop factor away from the smart node.
fn outward(eta: f64, trained: bool) -> f64 {
    if trained {
        eta
    } else {
        eta / 2.0
    }
}

pub(crate) fn chain_true_spread(n: usize, eta: f64, trained: bool, i: usize) -> f64 {
    let (n, i) = (n as i64, i as i64);
    let q = outward(eta, trained);
    let r = eta / 2.0;
    if i == 1 {
        g(q, 0, n - 1)
    } else {
        g(q, 0, n - i) + g(r, 1, i - 2) + eta * r.powi((i - 2) as i32)
    }
}

pub(crate) fn chain_false_spread(n: usize, eta: f64, trained: bool, i: usize) -> f64 {
    let (n, i) = (n as i64, i as i64);
    g(eta / 2.0, 1, i - 2) + g(outward(eta, trained), 0, n - i)
}

/// `sum_{i=2}^{n} sum_{k=0}^{n-i} q^k`
fn right_block(q: f64, n: usize) -> f64 {
    let m = n as f64;
    if (1.0 - q).abs() < 1e-9 {
        return (2..=n as i64).map(|i| g(q, 0, n as i64 - i)).sum();
    }
    (m - 1.0) / (1.0 - q) - q * (1.0 - q.powi(n as i32 - 1)) / (1.0 - q).powi(2)
}

/// `sum_{i=2}^{n} sum_{k=1}^{i-2} r^k`, with `r <= 1/2`.
fn left_block(r: f64, n: usize) -> f64 {
    let m = n as f64;
    r * (m - 1.0) / (1.0 - r) - r * (1.0 - r.powi(n as i32 - 1)) / (1.0 - r).powi(2)
}

fn exact_aggregates(n: usize, eta: f64, trained: bool) -> (f64, f64) {
    let m = n as f64;
    let q = outward(eta, trained);
    let r = eta / 2.0;
    let f_true = (g(q, 0, n as i64 - 1)
        + right_block(q, n)
        + left_block(r, n)
        + eta * g(r, 0, n as i64 - 2))
        / (m * m);
    let f_false = (left_block(r, n) + right_block(q, n)) / (m * (m - 1.0));
    (f_true, f_false)
}

fn asymptotic_aggregates(n: usize, eta: f64, trained: bool) -> Result<(f64, f64, f64)> {
    let m = n as f64;
    if !trained {
        let r = eta / 2.0;
        let lead = (1.0 + eta) / (1.0 - r);
        let tail = eta / (1.0 - r).powi(2);
        let f_true = (lead * m - tail) / (m * m);
        let f_false = (lead * (m - 1.0) - tail) / (m * (m - 1.0));
        let ifa = eta / (m * ((1.0 + eta) * (1.0 - r) * (m - 1.0) - eta));
        return Ok((f_true, f_false, ifa));
    }
    if eta >= 1.0 {
        return Err(Error::Singular(
            "the trained large-N chain forms divide by 1 - eta; use exact mode at eta = 1".into(),
        ));
    }
    let lead = (2.0 + eta - 2.0 * eta * eta) / ((2.0 - eta) * (1.0 - eta));
    let tail = 2.0 * eta / (2.0 - eta).powi(2) + eta / (1.0 - eta).powi(2);
    let f_true = lead / m - tail / (m * m);
    let f_false = lead / m - tail / (m * (m - 1.0));
    let numerator = 2.0 * eta * (1.0 - eta).powi(2) + eta * (2.0 - eta).powi(2);
    let ifa = numerator
        / (m * ((2.0 + eta - 2.0 * eta * eta) * (2.0 - eta) * (1.0 - eta) * (m - 1.0) - numerator));
    Ok((f_true, f_false, ifa))
}

/// Spread counts and TTA/FTA/IFA of an `n`-node chain, untrained (all
/// weights 0.5) or at the limit weights.
pub fn chain_metrics(n: usize, eta: f64, trained: bool, mode: AnalyticMode) -> Result<ChainMetrics> {
    if n < 2 {
        return Err(Error::InvalidTopology(format!("chain needs n >= 2, got {n}")));
    }
    check_eta(eta)?;
    let n_true = (1..=n).map(|i| chain_true_spread(n, eta, trained, i)).collect();
    let n_false = (2..=n).map(|i| chain_false_spread(n, eta, trained, i)).collect();
    let (f_true, f_false, ifa) = match mode {
        AnalyticMode::ExactSum => {
            let (t, f) = exact_aggregates(n, eta, trained);
            (t, f, (t - f) / f)
        }
        AnalyticMode::Asymptotic => asymptotic_aggregates(n, eta, trained)?,
    };
    Ok(ChainMetrics { n, eta, trained, mode, n_true, n_false, f_true, f_false, ifa })
}
