use serde::{Deserialize, Serialize};

use super::check_eta;
use crate::error::{Error, Result};

/// Successive spread differences `D(i) = n(i) - n(i+1)` along a chain for
/// the interior sources `i = 2..=n-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationProfile {
    pub n: usize,
    pub eta: f64,
    pub trained: bool,
    pub d_true: Vec<f64>,
    pub d_false: Vec<f64>,
    /// Where `D_F` changes sign. `None` when `eta = 0`.
    pub switching_point: Option<f64>,
    /// Set when `eta = 0`: nothing spreads and every difference is zero.
    pub degenerate: bool,
}

impl StratificationProfile {
    pub const FIRST_INDEX: usize = 2;

    /// Source indices covered by the arrays.
    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        Self::FIRST_INDEX..=self.n - 1
    }

    pub fn d_true_at(&self, i: usize) -> f64 {
        self.d_true[i - Self::FIRST_INDEX]
    }

    pub fn d_false_at(&self, i: usize) -> f64 {
        self.d_false[i - Self::FIRST_INDEX]
    }
}

pub fn stratification_profile(n: usize, eta: f64, trained: bool) -> Result<StratificationProfile> {
    if n < 3 {
        return Err(Error::InvalidTopology(format!(
            "stratification needs a chain with n >= 3, got {n}"
        )));
    }
    check_eta(eta)?;
    let r = eta / 2.0;
    let outward = if trained { eta } else { r };
    let (mut d_true, mut d_false) = (Vec::new(), Vec::new());
    for i in 2..n {
        let right = outward.powi((n - i) as i32);
        let left = r.powi((i - 1) as i32);
        d_true.push(right + (1.0 - eta) * left);
        d_false.push(right - left);
    }
    let degenerate = eta == 0.0;
    let m = n as f64;
    let switching_point = if degenerate {
        None
    } else if !trained {
        Some((m + 1.0) / 2.0)
    } else if eta >= 1.0 {
        Some(1.0)
    } else {
        let (ln_eta, ln2) = (eta.ln(), std::f64::consts::LN_2);
        Some(((m + 1.0) * ln_eta - ln2) / (2.0 * ln_eta - ln2))
    };
    Ok(StratificationProfile { n, eta, trained, d_true, d_false, switching_point, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{chain_metrics, AnalyticMode};
    use approx::assert_abs_diff_eq;

    #[test]
    fn examples() {
        let p = stratification_profile(4, 0.5, false).unwrap();
        assert_abs_diff_eq!(p.d_true_at(2), 0.1875, epsilon = 1e-15);
        assert_eq!(p.switching_point, Some(2.5));

        let p = stratification_profile(10, 0.5, true).unwrap();
        assert_eq!(p.switching_point, Some(4.0));
        assert_abs_diff_eq!(p.d_false_at(4), 0.0, epsilon = 1e-15);
        assert!(p.d_false_at(3) < 0.0 && p.d_false_at(5) > 0.0);
    }

    #[test]
    fn untrained_odd_chain_balances_at_centre() {
        for n in [3, 5, 9, 11] {
            for eta in [0.2, 0.7, 1.0] {
                let p = stratification_profile(n, eta, false).unwrap();
                assert_eq!(p.d_false_at(n.div_ceil(2)), 0.0);
                for i in p.indices() {
                    let expected = (i as f64) < (n as f64 + 1.0) / 2.0;
                    if 2 * i != n + 1 {
                        assert_eq!(p.d_false_at(i) < 0.0, expected, "n={n} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn saturated_chain_has_positive_false_differences() {
        let p = stratification_profile(10, 1.0, true).unwrap();
        assert!(p.d_false.iter().all(|&d| d > 0.0));
        assert_eq!(p.switching_point, Some(1.0));
    }

    #[test]
    fn true_differences_positive() {
        for trained in [false, true] {
            for n in 3..=12 {
                for eta in [0.05, 0.5, 0.95, 1.0] {
                    let p = stratification_profile(n, eta, trained).unwrap();
                    assert!(p.d_true.iter().all(|&d| d > 0.0));
                }
            }
        }
    }

    #[test]
    fn differences_match_spread_counts() {
        for trained in [false, true] {
            for n in 3..=10 {
                for eta in [0.1, 0.6, 1.0] {
                    let p = stratification_profile(n, eta, trained).unwrap();
                    let c = chain_metrics(n, eta, trained, AnalyticMode::ExactSum).unwrap();
                    for i in p.indices() {
                        let dt = c.n_true_at(i) - c.n_true_at(i + 1);
                        let df = c.n_false_at(i) - c.n_false_at(i + 1);
                        assert_abs_diff_eq!(p.d_true_at(i), dt, epsilon = 1e-13);
                        assert_abs_diff_eq!(p.d_false_at(i), df, epsilon = 1e-13);
                    }
                    let total: f64 = p.d_true.iter().sum();
                    assert_abs_diff_eq!(total, c.n_true_at(2) - c.n_true_at(n), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn switching_point_moves_towards_smart_node() {
        for eta in [0.3, 0.5, 0.8] {
            let before = stratification_profile(10, eta, false).unwrap().switching_point.unwrap();
            let after = stratification_profile(10, eta, true).unwrap().switching_point.unwrap();
            assert!(after < before);
        }
    }

    #[test]
    fn zero_rate_is_degenerate() {
        let p = stratification_profile(6, 0.0, true).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.switching_point, None);
        assert!(p.d_true.iter().chain(&p.d_false).all(|&d| d == 0.0));
        assert!(stratification_profile(2, 0.5, false).is_err());
    }
}
