//! Smart/normal-node message diffusion with trust self-learning.
//!
//! Networks are directed trust graphs ([`graph`]) on which true and false
//! messages cascade round by round ([`cascade`]). Repeated cascades adapt the
//! link weights ([`learning`]). Expected spread can be obtained three ways:
//! Monte Carlo, the closed forms in [`analytic`] and the exact [`oracle`].

pub mod analytic;
pub mod cascade;
pub mod error;
pub mod exec;
pub mod graph;
pub mod harness;
pub mod learning;
pub mod oracle;
pub mod seed;

pub use cascade::{
    estimate_stats, run_cascade, stratification_mc, CascadeOutcome, Delivery, EmpiricalProfile,
    Estimate, MessageKind, ModelConfig, SourceSpread, SpreadStats,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{
    build_bridged_chains, build_chain, build_star, set_limit_weights, ChainSide, Edge, NodeId,
    NodeKind, Topology, TrustGraph,
};
pub use learning::{train, train_with_policy, LearningConfig, TrainingReport, TriggerPolicy};
