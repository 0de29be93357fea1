use serde::{Deserialize, Serialize};

use super::{check_eta, geometric_sum as g};
use crate::error::{Error, Result};

/// Spread counts on two `n`-node chains `A` and `B`, each with a smart
/// `v_1`, joined by a bridge between `A_l` and `B_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverMetrics {
    pub n: usize,
    pub l: usize,
    pub h: usize,
    pub eta: f64,
    pub trained: bool,
    /// `i = 1..=n`
    pub n_true_a: Vec<f64>,
    /// `i = 2..=n`
    pub n_false_a: Vec<f64>,
    pub n_true_b: Vec<f64>,
    pub n_false_b: Vec<f64>,
    /// `i = 2..=n-1`
    pub d_true_a: Vec<f64>,
    pub d_false_a: Vec<f64>,
    /// Expected posters on `B` once `B_h` has posted, untrained weights.
    pub theta_true: f64,
    pub theta_false: f64,
    /// The same at the limit weights.
    pub beta_true: f64,
    pub beta_false: f64,
}

impl CrossoverMetrics {
    pub fn n_true_a_at(&self, i: usize) -> f64 {
        self.n_true_a[i - 1]
    }
    pub fn n_false_a_at(&self, i: usize) -> f64 {
        self.n_false_a[i - 2]
    }
    pub fn d_true_a_at(&self, i: usize) -> f64 {
        self.d_true_a[i - 2]
    }
    pub fn d_false_a_at(&self, i: usize) -> f64 {
        self.d_false_a[i - 2]
    }
}

fn theta(n: i64, far: i64, eta: f64, truthful: bool) -> f64 {
    let r = eta / 2.0;
    let smart = if truthful { eta * r.powi((far - 2) as i32) } else { 0.0 };
    g(r, 0, n - far) + g(r, 1, far - 2) + smart
}

fn beta(n: i64, far: i64, eta: f64, truthful: bool) -> f64 {
    let back = if truthful { far - 1 } else { far - 2 };
    g(eta, 0, n - far) + g(eta, 1, back)
}

/// Expected posters when source `i` of the chain bridged at `near` starts,
/// the far chain being bridged at `far`.
fn spread(n: i64, near: i64, far: i64, eta: f64, trained: bool, truthful: bool, i: i64) -> f64 {
    let r = eta / 2.0;
    if !trained {
        let far_side = theta(n, far, eta, truthful);
        if i == 1 {
            return g(r, 0, n - 1) + r.powi(near as i32) * far_side;
        }
        let smart = if truthful { eta * r.powi((i - 2) as i32) } else { 0.0 };
        let hops = (i - near).abs() + 1;
        return g(r, 0, n - i) + g(r, 1, i - 2) + smart + r.powi(hops as i32) * far_side;
    }
    let far_side = beta(n, far, eta, truthful);
    if i == 1 {
        return g(eta, 0, n - 1) + eta.powi(near as i32) * far_side;
    }
    let back = if truthful { 1 } else { 2 };
    if i <= near {
        g(eta, 0, n - i) + g(eta, 1, i - back) + eta.powi((near - i + 1) as i32) * far_side
    } else {
        let climb = r.powi((i - near) as i32);
        g(eta, 0, n - i) + climb * g(eta, 1, near - back) + g(r, 1, i - near) + eta * climb * far_side
    }
}

fn difference(n: i64, l: i64, eta: f64, trained: bool, truthful: bool, far_side: f64, i: i64) -> f64 {
    let r = eta / 2.0;
    if !trained {
        let base = if truthful {
            r.powi((n - i) as i32) + (1.0 - eta) * r.powi((i - 1) as i32)
        } else {
            r.powi((n - i) as i32) - r.powi((i - 1) as i32)
        };
        let here = r.powi(((i - l).abs() + 1) as i32);
        let next = r.powi(((i + 1 - l).abs() + 1) as i32);
        return base + (here - next) * far_side;
    }
    let back = if truthful { 0 } else { 1 };
    if i < l {
        eta.powi((n - i) as i32) - eta.powi((i - back) as i32) - eta.powi((l - i) as i32) * (1.0 - eta) * far_side
    } else {
        let climb = r.powi((i - l) as i32);
        eta.powi((n - i) as i32) + climb * (1.0 - r) * g(eta, 1, l - 1 - back) - r * climb
            + eta * (1.0 - r) * climb * far_side
    }
}

pub fn crossover_metrics(n: usize, l: usize, h: usize, eta: f64, trained: bool) -> Result<CrossoverMetrics> {
    if n < 3 {
        return Err(Error::InvalidTopology(format!("bridged chains need n >= 3, got {n}")));
    }
    for (name, idx) in [("l", l), ("h", h)] {
        if !(2..=n).contains(&idx) {
            return Err(Error::Contract(format!("bridge index {name}={idx} outside 2..={n}")));
        }
    }
    check_eta(eta)?;
    let (ni, li, hi) = (n as i64, l as i64, h as i64);
    let side = |near, far, truthful, from: i64| -> Vec<f64> {
        (from..=ni).map(|i| spread(ni, near, far, eta, trained, truthful, i)).collect()
    };
    let (theta_true, theta_false) = (theta(ni, hi, eta, true), theta(ni, hi, eta, false));
    let (beta_true, beta_false) = (beta(ni, hi, eta, true), beta(ni, hi, eta, false));
    let (far_true, far_false) = if trained { (beta_true, beta_false) } else { (theta_true, theta_false) };
    let d_true_a = (2..ni).map(|i| difference(ni, li, eta, trained, true, far_true, i)).collect();
    let d_false_a = (2..ni).map(|i| difference(ni, li, eta, trained, false, far_false, i)).collect();
    Ok(CrossoverMetrics {
        n,
        l,
        h,
        eta,
        trained,
        n_true_a: side(li, hi, true, 1),
        n_false_a: side(li, hi, false, 2),
        n_true_b: side(hi, li, true, 1),
        n_false_b: side(hi, li, false, 2),
        d_true_a,
        d_false_a,
        theta_true,
        theta_false,
        beta_true,
        beta_false,
    })
}
