//! Betting against a bounded data stream with mixture wealth processes.
//!
//! A bettor facing observations `x_1, x_2, ... in [0,1]` may stake any
//! `lambda in [-1/m0, 1/(1-m0)]` against the hypothesis that the conditional
//! mean is `m0`; the payoff per unit wealth is `1 - lambda (x - m0)`, which is
//! nonnegative exactly on that interval. This crate implements
//!
//! * the single-bet wealth processes `W_n(lambda)` and their mixtures under a
//!   uniform prior, a modified Robbins heavy-near-zero prior, and the
//!   Orabona–Jun prior restricted to `[-1, 1]`,
//! * exact best-in-hindsight optimization `W*_n` (equivalently the
//!   Honda–Takemura dual of the KL information projection),
//! * evaluators for the closed-form path-wise regret bounds of each mixture,
//!   their Ville-event conditional forms, and the envelope inequalities
//!   relating the optimal bet to the running sums `S_n`, `V_n`,
//! * data-stream generators, including a supermartingale-but-not-martingale
//!   adversary, and
//! * experiment drivers that assert every bound path-wise over simulated and
//!   adversarial streams, emitting plot-ready CSV traces.
//!
//! The `villebet` binary exposes the experiment drivers on the command line.

pub mod error;
pub mod experiments;
pub mod game;
pub mod hindsight;
pub mod mixture;
pub mod numeric;
pub mod priors;
pub mod regret;
pub mod streams;

pub use error::Error;
pub use game::{log_payoff, MarketConfig, PathState};
pub use hindsight::{best_lambda, klinf, objective, wstar_lower_bound, HindsightResult, Location};
pub use mixture::{aggregate_log_wealth, refinement_gap, MixtureEngine, VilleState};
pub use priors::{build_nodes, NodeSet, PriorKind, PriorSpec};
pub use regret::{
    aggregate_bound, classify, classify_oj, curvature_window_bound, density_at_optimum_bound,
    oj_branch_bound, regret, robbins_branch_bound, robbins_conditional_bound, uniform_bound,
    Branch,
};
pub use streams::{StreamGen, StreamKind, StreamSpec};
