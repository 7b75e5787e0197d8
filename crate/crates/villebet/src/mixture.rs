//! The mixture wealth engine: per-node incremental log-wealth, log-domain
//! mixture evaluation, the best-of-both-worlds aggregate, and Ville-event
//! tracking.
//!
//! One engine holds fixed quadrature nodes `(lambda_k, weight_k)` for one
//! prior and folds observations in O(K) per step, so the discrete mixture
//! `sum_k weight_k W_n(lambda_k)` is itself a bona fide wealth process (a
//! nonnegative supermartingale under any null with conditional mean `m0`,
//! whatever the node count). Quadrature error against the continuous mixture
//! is certified per run by [`refinement_gap`].

use crate::error::{Error, Result};
use crate::game::{log_payoff_unchecked, MarketConfig};
use crate::numeric::{log_sum_exp2, log_sum_exp_with_max};
use crate::priors::{build_nodes, NodeSet, PriorKind, PriorSpec};

/// Whether the path so far lies in the Ville event
/// `{ sup_n ln W_n <= ln(1/alpha) }`.
#[derive(Debug, Clone, Copy)]
pub struct VilleState {
    pub inside: bool,
    pub sup_log_wealth: f64,
}

/// Distinct observed values whose per-node increments are worth caching;
/// covers Bernoulli/discrete/constant streams, while continuous streams fall
/// through to direct evaluation.
const STEP_CACHE_CAP: usize = 16;

#[derive(Debug, Clone)]
pub struct MixtureEngine {
    market: MarketConfig,
    prior: PriorSpec,
    nodes: NodeSet,
    node_log_wealth: Vec<f64>,
    n: u64,
    log_mass: f64,
    current_log_mixture: f64,
    running_max_log_mixture: f64,
    cache: Vec<(u64, Box<[f64]>)>,
}

impl MixtureEngine {
    pub fn new(kind: PriorKind, cfg: &MarketConfig, nodes_per_side: usize) -> Result<Self> {
        let prior = PriorSpec::new(kind, cfg);
        let nodes = build_nodes(&prior, cfg, nodes_per_side)?;
        Ok(Self::from_nodes(prior, *cfg, nodes))
    }

    /// Engine over an explicit node set; used by tests and diagnostics.
    pub fn from_nodes(prior: PriorSpec, market: MarketConfig, nodes: NodeSet) -> Self {
        let log_mass = nodes.log_total_mass();
        let node_log_wealth = vec![0.0; nodes.nodes.len()];
        MixtureEngine {
            market,
            prior,
            nodes,
            node_log_wealth,
            n: 0,
            log_mass,
            current_log_mixture: log_mass,
            running_max_log_mixture: log_mass,
            cache: Vec::new(),
        }
    }

    pub fn market(&self) -> &MarketConfig {
        &self.market
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn node_log_wealth(&self) -> &[f64] {
        &self.node_log_wealth
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `ln` of the node mass, i.e. the log mixture wealth at `n = 0`.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// Fold one observation into every node; a node whose payoff hits zero
    /// goes to `-inf` and stays there.
    pub fn step(&mut self, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("observation {x} outside [0,1]")));
        }
        let bits = x.to_bits();
        let cached = match self.cache.iter().position(|(b, _)| *b == bits) {
            Some(i) => Some(i),
            None if self.cache.len() < STEP_CACHE_CAP => {
                let m0 = self.market.m0;
                let table: Box<[f64]> = self
                    .nodes
                    .nodes
                    .iter()
                    .map(|nd| log_payoff_unchecked(nd.lambda, x, m0))
                    .collect();
                self.cache.push((bits, table));
                Some(self.cache.len() - 1)
            }
            None => None,
        };

        let mut term_max = f64::NEG_INFINITY;
        match cached {
            Some(i) => {
                let table = &self.cache[i].1;
                for (k, nd) in self.nodes.nodes.iter().enumerate() {
                    let lw = self.node_log_wealth[k] + table[k];
                    self.node_log_wealth[k] = lw;
                    let t = lw + nd.log_weight;
                    if t > term_max {
                        term_max = t;
                    }
                }
            }
            None => {
                let m0 = self.market.m0;
                for (k, nd) in self.nodes.nodes.iter().enumerate() {
                    let lw = self.node_log_wealth[k] + log_payoff_unchecked(nd.lambda, x, m0);
                    self.node_log_wealth[k] = lw;
                    let t = lw + nd.log_weight;
                    if t > term_max {
                        term_max = t;
                    }
                }
            }
        }

        self.current_log_mixture = log_sum_exp_with_max(
            self.nodes
                .nodes
                .iter()
                .zip(&self.node_log_wealth)
                .map(|(nd, &lw)| lw + nd.log_weight),
            term_max,
        );
        if self.current_log_mixture > self.running_max_log_mixture {
            self.running_max_log_mixture = self.current_log_mixture;
        }
        self.n += 1;
        Ok(())
    }

    /// Stable log-sum-exp of node log-wealths plus log-weights; `-inf` only
    /// if every node is bust.
    pub fn log_mixture_wealth(&self) -> f64 {
        self.current_log_mixture
    }

    /// `max_{0 <= t <= n}` of the log mixture wealth.
    pub fn running_max_log_mixture(&self) -> f64 {
        self.running_max_log_mixture
    }

    pub fn ville_state(&self, alpha: f64) -> Result<VilleState> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha {alpha} outside (0,1)")));
        }
        Ok(VilleState {
            inside: self.running_max_log_mixture <= -alpha.ln(),
            sup_log_wealth: self.running_max_log_mixture,
        })
    }
}

/// Log-wealth of the convex aggregate `s0 W^(1) + (1-s0) W^(2)`.
pub fn aggregate_log_wealth(log_w1: f64, log_w2: f64, s0: f64) -> Result<f64> {
    if !(s0 > 0.0 && s0 < 1.0) {
        return Err(Error::domain(format!("s0 {s0} outside (0,1)")));
    }
    Ok(log_sum_exp2(s0.ln() + log_w1, (1.0 - s0).ln() + log_w2))
}

/// `|ln W(K nodes) - ln W(2K nodes)|` after folding `path` into two engines;
/// the per-run quadrature-error certificate `eps_quad`.
pub fn refinement_gap(
    kind: PriorKind,
    cfg: &MarketConfig,
    path: &[f64],
    nodes_per_side: usize,
) -> Result<f64> {
    let mut coarse = MixtureEngine::new(kind, cfg, nodes_per_side)?;
    let mut fine = MixtureEngine::new(kind, cfg, 2 * nodes_per_side)?;
    for &x in path {
        coarse.step(x)?;
        fine.step(x)?;
    }
    Ok((coarse.log_mixture_wealth() - fine.log_mixture_wealth()).abs())
}
