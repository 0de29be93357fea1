//! Closed-form spread counts and abilities for the chain, star and
//! bridged-chain topologies, untrained and at the limit weights.
//!
//! Throughout, `r = eta / 2` is the per-hop posting probability over an
//! untrained link and `eta` the one over a saturated link.

mod chain;
mod crossover;
mod star;
mod stratification;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chain::{chain_metrics, ChainMetrics};
pub use crossover::{crossover_metrics, CrossoverMetrics};
pub use star::{star_metrics, StarMetrics};
pub use stratification::{stratification_profile, StratificationProfile};

/// How chain aggregates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticMode {
    /// The finite sums, no large-N simplification.
    #[default]
    ExactSum,
    /// The large-N closed forms.
    Asymptotic,
}

/// `sum_{k=from}^{to} q^k`, zero when `to < from`.
pub(crate) fn geometric_sum(q: f64, from: i64, to: i64) -> f64 {
    if to < from {
        return 0.0;
    }
    let terms = (to - from + 1) as i32;
    if (1.0 - q).abs() < 1e-9 {
        return (0..terms).map(|k| q.powi(from as i32 + k)).sum();
    }
    q.powi(from as i32) * (1.0 - q.powi(terms)) / (1.0 - q)
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "natural forwarding rate must lie in [0, 1], got {eta}"
        )))
    }
}

/// Relative change `(after - before) / before` of an ability.
pub fn relative_improvement(after: f64, before: f64) -> Result<f64> {
    if before > 0.0 {
        Ok((after - before) / before)
    } else {
        Err(Error::UndefinedImprovement(before))
    }
}
