//! The three mixing distributions over bets and their quadrature nodes.
//!
//! * `Uniform`: constant density `m0 (1-m0)` on the full admissible interval
//!   `[-1/m0, 1/(1-m0)]`; total mass 1.
//! * `Robbins`: the modified Robbins heavy-near-zero prior on the same
//!   interval, per sign side
//!   `lnln(6.6e) / (4 |l| ln(6.6e/(scale |l|)) ln^2 ln(6.6e/(scale |l|)))`
//!   with `scale = 1-m0` on the positive side and `m0` on the negative side.
//!   As printed it integrates to 1/2 (1/4 per side); it is implemented
//!   unnormalized on purpose, since the closed-form regret bounds are derived
//!   for exactly this density.
//! * `OrabonaJun`: the same radial shape with constant `lnln(6.6e)/2` and
//!   scale 1, restricted to `[-1, 1]`; total mass 1.
//!
//! Node construction. For the heavy priors the substitution
//! `s = 1 / lnln(6.6e / (scale |l|))` maps each sign side onto `(0, s_max]`
//! with `s_max = 1/lnln(6.6e)`, where the prior is *exactly* uniform with the
//! radial constant as density: cell masses are exact and the `l = 0`
//! singularity disappears. Gauss–Legendre panels are laid out in `s` (for the
//! uniform prior, directly in `l`), uniformly over the bulk and dyadically
//! refined toward the outer support endpoint, where hindsight-favoured data
//! concentrate the wealth integrand at scales as fine as `1/n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::MarketConfig;
use crate::numeric::{lnln_66e, log_sum_exp_with_max, panel_edges, panel_rule, NODES_PER_PANEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorKind {
    Uniform,
    Robbins,
    OrabonaJun,
}

impl PriorKind {
    pub fn label(&self) -> &'static str {
        match self {
            PriorKind::Uniform => "uniform",
            PriorKind::Robbins => "robbins",
            PriorKind::OrabonaJun => "oj",
        }
    }
}

impl std::str::FromStr for PriorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(PriorKind::Uniform),
            "robbins" => Ok(PriorKind::Robbins),
            "oj" | "orabona-jun" | "orabonajun" => Ok(PriorKind::OrabonaJun),
            other => Err(Error::Config(format!("unknown prior {other:?}"))),
        }
    }
}

/// A prior pinned to a market: kind plus support.
#[derive(Debug, Clone, Copy)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub support_lo: f64,
    pub support_hi: f64,
    m0: f64,
}

impl PriorSpec {
    pub fn new(kind: PriorKind, cfg: &MarketConfig) -> Self {
        let (lo, hi) = match kind {
            PriorKind::Uniform | PriorKind::Robbins => (cfg.lambda_min, cfg.lambda_max),
            PriorKind::OrabonaJun => (-1.0, 1.0),
        };
        PriorSpec {
            kind,
            support_lo: lo,
            support_hi: hi,
            m0: cfg.m0,
        }
    }

    /// Radial scale of the heavy density on the given sign side; the support
    /// endpoint on that side is `1/scale`.
    fn scale(&self, positive_side: bool) -> f64 {
        match self.kind {
            PriorKind::Robbins => {
                if positive_side {
                    1.0 - self.m0
                } else {
                    self.m0
                }
            }
            PriorKind::OrabonaJun => 1.0,
            PriorKind::Uniform => unreachable!("uniform prior has no radial scale"),
        }
    }

    /// Per-side density constant of the heavy priors.
    fn radial_constant(&self) -> f64 {
        match self.kind {
            PriorKind::Robbins => lnln_66e() / 4.0,
            PriorKind::OrabonaJun => lnln_66e() / 2.0,
            PriorKind::Uniform => unreachable!(),
        }
    }

    /// Density at `lambda`; zero outside the support. `lambda = 0` is a
    /// singular point of the heavy priors and is rejected.
    pub fn density(&self, lambda: f64) -> Result<f64> {
        if lambda < self.support_lo || lambda > self.support_hi {
            return Ok(0.0);
        }
        match self.kind {
            PriorKind::Uniform => Ok(self.m0 * (1.0 - self.m0)),
            PriorKind::Robbins | PriorKind::OrabonaJun => {
                if lambda == 0.0 {
                    return Err(Error::domain(
                        "heavy-near-zero density is singular at lambda = 0",
                    ));
                }
                let scale = self.scale(lambda > 0.0);
                let r = lambda.abs();
                let v = (6.6 * std::f64::consts::E / (scale * r)).ln();
                let lv = v.ln();
                Ok(self.radial_constant() / (r * v * lv * lv))
            }
        }
    }

    /// Exact total mass: 1 for the uniform and Orabona–Jun priors, 1/2 for the
    /// modified Robbins prior as printed.
    pub fn total_mass(&self) -> f64 {
        match self.kind {
            PriorKind::Uniform | PriorKind::OrabonaJun => 1.0,
            PriorKind::Robbins => 0.5,
        }
    }

    /// Closed-form mass of the interval between 0 and `lambda` (one sign
    /// side): the antiderivative of the radial profile in `v = ln(6.6e/
    /// (scale |l|))` is `-1/ln v`, so the side mass below `|l|` is
    /// `constant / lnln(6.6e/(scale |l|))`.
    pub fn side_mass_to(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let r = lambda.abs().min(if lambda > 0.0 {
            self.support_hi
        } else {
            -self.support_lo
        });
        match self.kind {
            PriorKind::Uniform => Ok(self.m0 * (1.0 - self.m0) * r),
            PriorKind::Robbins | PriorKind::OrabonaJun => {
                let scale = self.scale(lambda > 0.0);
                Ok(self.radial_constant() * s_of_radius(r, scale))
            }
        }
    }
}

/// The prior-uniformizing coordinate `s = 1/lnln(6.6e/(scale r))`.
fn s_of_radius(r: f64, scale: f64) -> f64 {
    1.0 / (6.6 * std::f64::consts::E / (scale * r)).ln().ln()
}

/// Inverse map `r(s) = (6.6e/scale) exp(-exp(1/s))`, clamped into
/// `[MIN_POSITIVE, 1/scale]`: deep near-zero cells underflow f64 (their true
/// radii are below 1e-308), and the clamp keeps every node strictly inside
/// the support with an unchanged wealth contribution.
fn radius_of_s(s: f64, scale: f64) -> f64 {
    let b = 6.6 * std::f64::consts::E / scale;
    let r = b * (-(1.0 / s).exp()).exp();
    let hi = 1.0 / scale;
    if r < f64::MIN_POSITIVE {
        f64::MIN_POSITIVE
    } else if r >= hi {
        hi - hi * 1e-15
    } else {
        r
    }
}

/// One quadrature node: a bet and the log of its mixture weight.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub lambda: f64,
    pub log_weight: f64,
}

/// Fixed quadrature nodes for one prior, sorted by bet.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub nodes: Vec<Node>,
    /// Nodes per sign side actually built (`16 * panels`).
    pub side_count: usize,
}

impl NodeSet {
    pub fn from_raw(mut nodes: Vec<Node>) -> Self {
        nodes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let side_count = nodes.len() / 2;
        NodeSet { nodes, side_count }
    }

    /// `ln` of the summed node weights; equals `ln(total_mass)` up to
    /// floating-point rounding because every cell mass is exact.
    pub fn log_total_mass(&self) -> f64 {
        let max = self
            .nodes
            .iter()
            .map(|n| n.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        log_sum_exp_with_max(self.nodes.iter().map(|n| n.log_weight), max)
    }

    /// Summed node weights in the linear domain (test oracle).
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.log_weight.exp()).sum()
    }
}

/// Maximum dyadic refinement depth toward the outer support endpoint.
const MAX_DYADIC: usize = 32;

/// Build `k_per_side` nodes per sign side (rounded down to a multiple of 16,
/// minimum 16) for the given prior.
pub fn build_nodes(prior: &PriorSpec, cfg: &MarketConfig, k_per_side: usize) -> Result<NodeSet> {
    if k_per_side < NODES_PER_PANEL {
        return Err(Error::Config(format!(
            "need at least {NODES_PER_PANEL} nodes per side, got {k_per_side}"
        )));
    }
    let panels = k_per_side / NODES_PER_PANEL;
    let dyadic = MAX_DYADIC.min(panels - 1);
    let (gx, gw) = panel_rule();
    let mut nodes = Vec::with_capacity(2 * panels * NODES_PER_PANEL);

    for positive in [false, true] {
        let sign = if positive { 1.0 } else { -1.0 };
        match prior.kind {
            PriorKind::Uniform => {
                let total = if positive {
                    prior.support_hi
                } else {
                    -prior.support_lo
                };
                let density = cfg.m0 * (1.0 - cfg.m0);
                let edges = panel_edges(total, panels, dyadic);
                for p in 0..panels {
                    let (a, b) = (edges[p], edges[p + 1]);
                    let mid = 0.5 * (a + b);
                    let half = 0.5 * (b - a);
                    for (&x, &w) in gx.iter().zip(gw) {
                        nodes.push(Node {
                            lambda: sign * (mid + half * x),
                            log_weight: (density * half * w).ln(),
                        });
                    }
                }
            }
            PriorKind::Robbins | PriorKind::OrabonaJun => {
                let scale = prior.scale(positive);
                let c = prior.radial_constant();
                let s_max = 1.0 / lnln_66e();
                let edges = panel_edges(s_max, panels, dyadic);
                for p in 0..panels {
                    let (a, b) = (edges[p], edges[p + 1]);
                    let mid = 0.5 * (a + b);
                    let half = 0.5 * (b - a);
                    for (&x, &w) in gx.iter().zip(gw) {
                        let s = mid + half * x;
                        nodes.push(Node {
                            lambda: sign * radius_of_s(s, scale),
                            log_weight: (c * half * w).ln(),
                        });
                    }
                }
            }
        }
    }
    Ok(NodeSet::from_raw(nodes))
}
