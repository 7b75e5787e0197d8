//! Exact best-in-hindsight optimization and the dual of the KL information
//! projection.
//!
//! The hindsight objective `f_n(l) = sum_i ln(1 - l (x_i - m0))` is strictly
//! concave wherever some `x_i != m0`, so its derivative is strictly
//! decreasing and a sign test at the (clipped) comparator endpoints decides
//! between boundary and interior optima; interior optima are found by
//! bisection on the derivative. Endpoint derivatives are evaluated at
//! `endpoint * (1 - 1e-12)` to dodge the infinite one-sided derivatives that
//! appear when some observation sits at 0 or 1.
//!
//! `klinf` evaluates `KL_inf(Q, m0)` through the Honda–Takemura dual
//! `max_l E_Q[ln(1 - l (X - m0))]` over the full admissible interval; it is
//! the same maximizer run on a weighted value multiset, and `ln W*_n =
//! n KL_inf(Q_hat_n, m0)` ties it to the hindsight wealth of the empirical
//! distribution.

use crate::error::{Error, Result};
use crate::game::{MarketConfig, PathState, PathView};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Interior,
    LowerBoundary,
    UpperBoundary,
    /// `V_n = 0`: the objective is identically zero and `l* = 0` by
    /// convention.
    Degenerate,
}

impl Location {
    pub fn label(&self) -> &'static str {
        match self {
            Location::Interior => "Interior",
            Location::LowerBoundary => "LowerBoundary",
            Location::UpperBoundary => "UpperBoundary",
            Location::Degenerate => "Degenerate",
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Location::LowerBoundary | Location::UpperBoundary)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HindsightResult {
    pub lambda_star: f64,
    pub location: Location,
    pub log_wstar: f64,
}

/// `f_n(l)` for a stored path; `-inf` exactly when some payoff is zero.
pub fn objective(path: &PathState, lambda: f64) -> f64 {
    objective_view(&path.view(), path.m0(), lambda)
}

pub(crate) fn objective_view(view: &PathView, m0: f64, lambda: f64) -> f64 {
    let mut acc = 0.0;
    view.for_each(|x, w| {
        let t = lambda * (x - m0);
        acc += if t >= 1.0 {
            f64::NEG_INFINITY
        } else {
            w * (-t).ln_1p()
        };
    });
    acc
}

/// `f'_n(l) = -sum_i w_i (x_i - m0) / (1 - l (x_i - m0))`.
pub(crate) fn derivative_view(view: &PathView, m0: f64, lambda: f64) -> f64 {
    let mut acc = 0.0;
    view.for_each(|x, w| {
        let d = x - m0;
        acc -= w * d / (1.0 - lambda * d);
    });
    acc
}

/// Scale for the stationarity tolerance: `sum_i w_i |x_i - m0|`.
pub fn stationarity_scale(path: &PathState) -> f64 {
    let m0 = path.m0();
    let mut acc = 0.0;
    path.view().for_each(|x, w| acc += w * (x - m0).abs());
    acc
}

/// Maximize the hindsight objective over `comparator`, which must be a
/// nonempty subinterval of the admissible interval containing 0.
pub fn best_lambda(
    path: &PathState,
    comparator: (f64, f64),
    cfg: &MarketConfig,
) -> Result<HindsightResult> {
    best_lambda_hinted(path, comparator, cfg, None)
}

/// Like [`best_lambda`] with a warm-start hint (the previous step's optimum);
/// the bracket is re-verified by derivative signs before trusting it.
pub fn best_lambda_hinted(
    path: &PathState,
    comparator: (f64, f64),
    cfg: &MarketConfig,
    hint: Option<f64>,
) -> Result<HindsightResult> {
    if path.v() == 0.0 {
        return Ok(HindsightResult {
            lambda_star: 0.0,
            location: Location::Degenerate,
            log_wstar: 0.0,
        });
    }
    maximize(&path.view(), path.m0(), comparator, cfg, hint)
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // !(lo < hi) also rejects NaN endpoints
pub(crate) fn maximize(
    view: &PathView,
    m0: f64,
    (lo, hi): (f64, f64),
    cfg: &MarketConfig,
    hint: Option<f64>,
) -> Result<HindsightResult> {
    if !(lo < hi) || lo < cfg.lambda_min - 1e-12 || hi > cfg.lambda_max + 1e-12 {
        return Err(Error::domain(format!(
            "comparator [{lo}, {hi}] is not a nonempty subinterval of [{}, {}]",
            cfg.lambda_min, cfg.lambda_max
        )));
    }
    let clip = |e: f64| e * (1.0 - 1e-12);
    let lo_eval = clip(lo);
    let hi_eval = clip(hi);

    if derivative_view(view, m0, hi_eval) > 0.0 {
        return Ok(finish(view, m0, hi, Location::UpperBoundary, lo, hi));
    }
    if derivative_view(view, m0, lo_eval) < 0.0 {
        return Ok(finish(view, m0, lo, Location::LowerBoundary, lo, hi));
    }

    // interior: f' decreases through zero inside [lo_eval, hi_eval]
    let (mut a, mut b) = (lo_eval, hi_eval);
    if let Some(h) = hint {
        if h > lo_eval && h < hi_eval {
            let mut w = 0.005 * (hi - lo);
            for _ in 0..4 {
                let (ca, cb) = ((h - w).max(lo_eval), (h + w).min(hi_eval));
                if ca <= lo_eval && cb >= hi_eval {
                    break;
                }
                if derivative_view(view, m0, ca) >= 0.0 && derivative_view(view, m0, cb) <= 0.0 {
                    a = ca;
                    b = cb;
                    break;
                }
                w *= 8.0;
            }
        }
    }
    let tol = 1e-12 * (cfg.lambda_max - cfg.lambda_min);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if derivative_view(view, m0, mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(finish(view, m0, 0.5 * (a + b), Location::Interior, lo, hi))
}

fn finish(
    view: &PathView,
    m0: f64,
    lambda: f64,
    location: Location,
    lo: f64,
    hi: f64,
) -> HindsightResult {
    let mut log_wstar = objective_view(view, m0, lambda);
    let mut lambda_star = lambda;
    // l = 0 is feasible and yields wealth 1, so the max is never negative;
    // rounding can leave a -1e-30-ish residue at near-null optima
    if lo <= 0.0 && hi >= 0.0 && log_wstar < 0.0 && log_wstar > -1e-9 {
        log_wstar = 0.0;
        if lambda_star.abs() < 1e-9 {
            lambda_star = 0.0;
        }
    }
    HindsightResult {
        lambda_star,
        location,
        log_wstar,
    }
}

/// `KL_inf(Q, m0)` through its dual, for a weighted support-point
/// distribution `Q` (weights nonnegative, summing to 1).
pub fn klinf(dist: &[(f64, f64)], m0: f64) -> Result<f64> {
    let cfg = MarketConfig::new(m0)?;
    let mut total = 0.0;
    for &(x, w) in dist {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("support point {x} outside [0,1]")));
        }
        if w < 0.0 {
            return Err(Error::domain(format!("negative weight {w}")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("weights sum to {total}, not 1")));
    }
    let view = PathView::Weighted(dist);
    // a weighted path is degenerate iff every massive point sits at m0
    let mut degenerate = true;
    view.for_each(|x, w| {
        if w > 0.0 && x != m0 {
            degenerate = false;
        }
    });
    if degenerate {
        return Ok(0.0);
    }
    let res = maximize(&view, m0, cfg.lambda_interval(), &cfg, None)?;
    Ok(res.log_wstar)
}

/// Closed-form floor on the hindsight log-wealth:
/// `ln W*_n >= S_n^2 / ((4/3) |S_n| + 2 V_n)`, 0 at `S = V = 0`.
pub fn wstar_lower_bound(s: f64, v: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    s * s / (4.0 / 3.0 * s.abs() + 2.0 * v)
}
