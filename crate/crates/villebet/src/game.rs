//! Market configuration, running path statistics, and the single-bet
//! log-payoff increment that every mixture composes.
//!
//! A bet `lambda in [-1/m0, 1/(1-m0)]` on an observation `x in [0,1]` pays
//! `1 - lambda (x - m0)` per unit wealth, which is nonnegative on exactly that
//! interval. Everything downstream works with log payoffs; a payoff of zero
//! (a bust) is the extended real `-inf` and is absorbing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// The null mean `m0` and the derived admissible bet interval and envelope
/// constants `beta_l = min(m0, 1-m0)`, `beta_u = max(m0, 1-m0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    pub m0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub beta_l: f64,
    pub beta_u: f64,
}

impl MarketConfig {
    pub fn new(m0: f64) -> Result<Self> {
        if !(m0 > 0.0 && m0 < 1.0) || !m0.is_finite() {
            return Err(Error::domain(format!(
                "null mean must lie strictly inside (0,1), got {m0}"
            )));
        }
        Ok(MarketConfig {
            m0,
            lambda_min: -1.0 / m0,
            lambda_max: 1.0 / (1.0 - m0),
            beta_l: m0.min(1.0 - m0),
            beta_u: m0.max(1.0 - m0),
        })
    }

    /// Admissible bet interval as a pair.
    pub fn lambda_interval(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }
}

/// `ln(1 - lambda (x - m0))`, `-inf` when the payoff is exactly zero.
///
/// Rejects bets outside the admissible interval and observations outside
/// `[0,1]`; use the market's own `lambda_min`/`lambda_max` when betting at the
/// boundary so the check sees the identical floating-point value.
pub fn log_payoff(lambda: f64, x: f64, cfg: &MarketConfig) -> Result<f64> {
    if !(lambda >= cfg.lambda_min && lambda <= cfg.lambda_max) {
        return Err(Error::domain(format!(
            "bet {lambda} outside [{}, {}]",
            cfg.lambda_min, cfg.lambda_max
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("observation {x} outside [0,1]")));
    }
    Ok(log_payoff_unchecked(lambda, x, cfg.m0))
}

#[inline]
pub(crate) fn log_payoff_unchecked(lambda: f64, x: f64, m0: f64) -> f64 {
    let t = lambda * (x - m0);
    // payoff 1 - t; rounding can push a boundary product to t == 1 exactly,
    // which is the bust case anyway
    if t >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-t).ln_1p()
    }
}

/// Value storage backing a [`PathState`].
///
/// The hindsight objective is not a function of `(S_n, V_n)` alone, so the
/// path keeps its values: verbatim for continuous streams, as an exact
/// value-count histogram for discrete ones (the right choice for long runs).
#[derive(Debug, Clone)]
enum ValueStore {
    Dense(Vec<f64>),
    Histogram(BTreeMap<u64, u64>),
}

/// Observed stream with running centered sums `S_n`, `V_n` (compensated
/// summation) and the exact value multiset for hindsight optimization.
#[derive(Debug, Clone)]
pub struct PathState {
    m0: f64,
    n: u64,
    s: KahanSum,
    v: KahanSum,
    store: ValueStore,
}

impl PathState {
    /// Empty path storing values verbatim.
    pub fn new(cfg: &MarketConfig) -> Self {
        PathState {
            m0: cfg.m0,
            n: 0,
            s: KahanSum::default(),
            v: KahanSum::default(),
            store: ValueStore::Dense(Vec::new()),
        }
    }

    /// Empty path storing an exact value-count histogram; preferred for
    /// discrete streams and mandatory comfort for horizons past 10^6.
    pub fn with_histogram(cfg: &MarketConfig) -> Self {
        PathState {
            m0: cfg.m0,
            n: 0,
            s: KahanSum::default(),
            v: KahanSum::default(),
            store: ValueStore::Histogram(BTreeMap::new()),
        }
    }

    pub fn observe(&mut self, x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("observation {x} outside [0,1]")));
        }
        let d = x - self.m0;
        self.s.add(d);
        self.v.add(d * d);
        match &mut self.store {
            ValueStore::Dense(values) => values.push(x),
            ValueStore::Histogram(counts) => *counts.entry(x.to_bits()).or_insert(0) += 1,
        }
        self.n += 1;
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Running centered sum `S_n`.
    pub fn s(&self) -> f64 {
        self.s.value()
    }

    /// Running centered sum of squares `V_n`.
    pub fn v(&self) -> f64 {
        self.v.value()
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// Weighted view of the value multiset for the hindsight solver.
    pub fn view(&self) -> PathView<'_> {
        match &self.store {
            ValueStore::Dense(values) => PathView::Dense(values),
            ValueStore::Histogram(counts) => PathView::Histogram(counts),
        }
    }

    /// Recompute `(S_n, V_n)` from the stored values; test oracle for the
    /// running statistics.
    pub fn recomputed_stats(&self) -> (f64, f64) {
        let mut s = KahanSum::default();
        let mut v = KahanSum::default();
        self.view().for_each(|x, w| {
            let d = x - self.m0;
            s.add(w * d);
            v.add(w * d * d);
        });
        (s.value(), v.value())
    }
}

/// Borrowed weighted value multiset: pairs `(x, weight)`.
#[derive(Debug, Clone, Copy)]
pub enum PathView<'a> {
    Dense(&'a [f64]),
    Histogram(&'a BTreeMap<u64, u64>),
    Weighted(&'a [(f64, f64)]),
}

impl PathView<'_> {
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(f64, f64)) {
        match self {
            PathView::Dense(values) => {
                for &x in *values {
                    f(x, 1.0);
                }
            }
            PathView::Histogram(counts) => {
                for (&bits, &c) in *counts {
                    f(f64::from_bits(bits), c as f64);
                }
            }
            PathView::Weighted(points) => {
                for &(x, w) in *points {
                    f(x, w);
                }
            }
        }
    }

    pub fn total_weight(&self) -> f64 {
        let mut t = 0.0;
        self.for_each(|_, w| t += w);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn market(m0: f64) -> MarketConfig {
        MarketConfig::new(m0).unwrap()
    }

    #[test]
    fn market_derived_fields() {
        let cfg = market(0.5);
        assert_eq!(cfg.lambda_min, -2.0);
        assert_eq!(cfg.lambda_max, 2.0);
        assert_eq!(cfg.beta_l, 0.5);
        assert_eq!(cfg.beta_u, 0.5);

        let cfg = market(0.25);
        assert_eq!(cfg.lambda_min, -4.0);
        assert!((cfg.lambda_max - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(cfg.beta_l, 0.25);
        assert_eq!(cfg.beta_u, 0.75);
        assert!(cfg.lambda_min < 0.0 && cfg.lambda_max > 0.0);
        assert!((cfg.beta_l + cfg.beta_u - 1.0).abs() < 1e-15);

        // payoff nonnegative on the whole interval x corner observations
        for m0 in [0.1, 0.25, 0.5, 0.7, 0.9] {
            let cfg = market(m0);
            for lambda in [cfg.lambda_min, 0.0, cfg.lambda_max] {
                for y in [0.0, 0.5, 1.0] {
                    assert!(1.0 - lambda * (y - m0) >= -1e-15, "m0={m0} l={lambda} y={y}");
                }
            }
        }
    }

    #[test]
    fn market_rejects_boundary_means() {
        assert!(MarketConfig::new(0.0).is_err());
        assert!(MarketConfig::new(1.0).is_err());
        assert!(MarketConfig::new(-0.1).is_err());
        assert!(MarketConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn observe_updates_stats() {
        let cfg = market(0.5);
        let mut p = PathState::new(&cfg);
        p.observe(1.0).unwrap();
        assert_eq!(p.n(), 1);
        assert!((p.s() - 0.5).abs() < 1e-15);
        assert!((p.v() - 0.25).abs() < 1e-15);

        let mut p = PathState::new(&cfg);
        for x in [1.0, 1.0, 0.0] {
            p.observe(x).unwrap();
        }
        assert!((p.s() - 0.5).abs() < 1e-15);
        assert!((p.v() - 0.75).abs() < 1e-15);

        assert!(p.observe(1.5).is_err());
        assert!(p.observe(-0.1).is_err());
    }

    #[test]
    fn null_path_is_exactly_degenerate() {
        let cfg = market(0.3);
        let mut p = PathState::new(&cfg);
        for _ in 0..1000 {
            p.observe(0.3).unwrap();
        }
        assert_eq!(p.s(), 0.0);
        assert_eq!(p.v(), 0.0);
    }

    #[test]
    fn payoff_examples() {
        let cfg = market(0.5);
        assert_eq!(log_payoff(0.0, 0.73, &cfg).unwrap(), 0.0);
        assert!((log_payoff(-2.0, 1.0, &cfg).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_payoff(2.0, 1.0, &cfg).unwrap(), f64::NEG_INFINITY);
        assert!(log_payoff(2.5, 0.5, &cfg).is_err());
        assert!(log_payoff(0.5, 1.5, &cfg).is_err());
    }

    #[test]
    fn histogram_matches_dense() {
        let cfg = market(0.25);
        let mut dense = PathState::new(&cfg);
        let mut hist = PathState::with_histogram(&cfg);
        for x in [0.0, 1.0, 1.0, 0.25, 0.6, 1.0, 0.0] {
            dense.observe(x).unwrap();
            hist.observe(x).unwrap();
        }
        assert_eq!(dense.s(), hist.s());
        assert_eq!(dense.v(), hist.v());
        let (s, v) = hist.recomputed_stats();
        assert!((s - dense.s()).abs() < 1e-12);
        assert!((v - dense.v()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fold_matches_batch_recompute(values in prop::collection::vec(0f64..=1.0, 0..300), m0 in 0.05f64..0.95) {
            let cfg = market(m0);
            let mut p = PathState::new(&cfg);
            for &x in &values {
                p.observe(x).unwrap();
            }
            let (s, v) = p.recomputed_stats();
            prop_assert!((p.s() - s).abs() <= 1e-12);
            prop_assert!((p.v() - v).abs() <= 1e-12);
            prop_assert!(p.s().abs() <= p.n() as f64 * cfg.beta_u + 1e-12);
            prop_assert!(p.v() <= p.n() as f64 * cfg.beta_u * cfg.beta_u + 1e-12);
            if p.v() == 0.0 {
                prop_assert_eq!(p.s(), 0.0);
            }
        }

        #[test]
        fn payoff_envelope(lambda in -2f64..=2.0, x in 0f64..=1.0) {
            let cfg = market(0.5);
            let lp = log_payoff(lambda, x, &cfg).unwrap();
            let bu = cfg.beta_u;
            prop_assert!(lp <= (1.0 + bu * lambda.abs()).ln() + 1e-12);
            if lambda.abs() < 1.0 / bu {
                prop_assert!(lp >= (1.0 - bu * lambda.abs()).ln() - 1e-12);
            }
        }
    }
}
