//! Regret, the four-branch drift classifier, and evaluators for every
//! closed-form regret bound: the `ln(1+n) + 1` bound of the uniform mixture,
//! the four-branch path-wise bound of the modified Robbins mixture and its
//! Ville-conditional `ln ln` form, the analogous bound of the Orabona–Jun
//! mixture against the `[-1,1]` comparator, the density-at-optimum and
//! curvature-window bounds they are assembled from, and the aggregate bound
//! of the 50-50 hedge.
//!
//! All constants (`6.6e`, `14e`, `20/3`, ...) are evaluated verbatim; they
//! are proof artifacts and deliberately not tightened.

use crate::error::{Error, Result};
use crate::game::MarketConfig;
use crate::hindsight::Location;
use crate::numeric::{ln_66e, lnln_66e, lnlnln_66e};
use crate::priors::PriorSpec;

/// Drift regime of a path at time `n`, from `(S_n, V_n)` and the location of
/// the hindsight-optimal bet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    SmallDriftInterior,
    SmallDriftBoundary,
    MediumDrift,
    LargeDrift,
    /// `V_n = 0`; the drift conditions are vacuous and the branch bounds do
    /// not apply.
    Degenerate,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::SmallDriftInterior => "SmallDriftInterior",
            Branch::SmallDriftBoundary => "SmallDriftBoundary",
            Branch::MediumDrift => "MediumDrift",
            Branch::LargeDrift => "LargeDrift",
            Branch::Degenerate => "Degenerate",
        }
    }

    pub const ALL: [Branch; 5] = [
        Branch::SmallDriftInterior,
        Branch::SmallDriftBoundary,
        Branch::MediumDrift,
        Branch::LargeDrift,
        Branch::Degenerate,
    ];
}

/// Per-step record of a bound check against one engine.
#[derive(Debug, Clone, Copy)]
pub struct RegretReport {
    pub n: u64,
    pub s: f64,
    pub v: f64,
    pub branch: Branch,
    pub regret: f64,
    pub bound: f64,
    /// `bound - regret`; the bound assertion is `slack >= -(quad_slack + 1e-8)`.
    pub slack: f64,
    pub conditional_bound: Option<f64>,
    pub quad_slack: f64,
}

impl RegretReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: u64,
        s: f64,
        v: f64,
        branch: Branch,
        regret: f64,
        bound: f64,
        conditional_bound: Option<f64>,
        quad_slack: f64,
    ) -> Self {
        RegretReport {
            n,
            s,
            v,
            branch,
            regret,
            bound,
            slack: bound - regret,
            conditional_bound,
            quad_slack,
        }
    }

    /// The path-wise bound assertion with quadrature slack.
    pub fn holds(&self) -> bool {
        self.slack >= -(self.quad_slack + 1e-8)
    }
}

/// `R_n = ln W*_n - ln W_n`; `+inf` if the mixture is fully bust (cannot
/// happen for priors with interior support mass).
pub fn regret(log_wstar: f64, log_mixture: f64) -> f64 {
    log_wstar - log_mixture
}

/// Classify against the full-interval thresholds: small drift
/// `|S| < sqrt(2V)` (split on the optimum's location), medium drift
/// `sqrt(2V) <= |S| <= (beta_l/5) V`, large drift otherwise.
pub fn classify(s: f64, v: f64, location: Location, cfg: &MarketConfig) -> Branch {
    classify_with_medium_coeff(s, v, location, cfg.beta_l / 5.0)
}

/// Classifier for the `[-1,1]` comparator: the medium-drift ceiling is `V/5`
/// and "boundary" means `|l*| = 1`.
pub fn classify_oj(s: f64, v: f64, location_restricted: Location) -> Branch {
    classify_with_medium_coeff(s, v, location_restricted, 1.0 / 5.0)
}

fn classify_with_medium_coeff(s: f64, v: f64, location: Location, coeff: f64) -> Branch {
    if v == 0.0 {
        return Branch::Degenerate;
    }
    if s.abs() < (2.0 * v).sqrt() {
        if location.is_boundary() {
            Branch::SmallDriftBoundary
        } else {
            Branch::SmallDriftInterior
        }
    } else if s.abs() <= coeff * v {
        Branch::MediumDrift
    } else {
        Branch::LargeDrift
    }
}

/// Path-wise bound of the uniform mixture: `ln(1+n) + 1`.
pub fn uniform_bound(n: u64) -> f64 {
    (1.0 + n as f64).ln() + 1.0
}

fn ll(x: f64) -> f64 {
    x.ln().ln()
}

fn lll(x: f64) -> f64 {
    x.ln().ln().ln()
}

/// Right-hand side of the four-branch path-wise bound for the modified
/// Robbins mixture, with the printed constants.
pub fn robbins_branch_bound(
    branch: Branch,
    s: f64,
    v: f64,
    log_wstar: f64,
    cfg: &MarketConfig,
) -> Result<f64> {
    let (bl, bu) = (cfg.beta_l, cfg.beta_u);
    let e = std::f64::consts::E;
    match branch {
        Branch::SmallDriftInterior => {
            let arg = 14.0 * e * bu / bl * (1.0 + v).sqrt();
            Ok(2.0 / (bl * bl) + 1.0 + (8.0 / lnln_66e()).ln() + ll(arg) + 2.0 * lll(arg))
        }
        Branch::SmallDriftBoundary => {
            let l1 = ln_66e();
            let l2 = lnln_66e();
            Ok(1.0 / (bl * bl) - (l2 / (4.0 * l1 * l2 * l2)).ln())
        }
        Branch::MediumDrift => {
            let arg = 14.0 * e / bl * (1.0 + v.sqrt());
            Ok(1.0
                + (4.0 / lnln_66e()).ln()
                + (20.0 * s.abs() / (3.0 * (4.0 / 3.0 * s.abs() + 2.0 * v).sqrt())).ln()
                + ll(arg)
                + 2.0 * lll(arg))
        }
        Branch::LargeDrift => Ok(0.5 * log_wstar
            + 4f64.ln()
            + lnln_66e()
            + lnlnln_66e()
            + (2.0 * bu + 5.0 / bl).ln()),
        Branch::Degenerate => Err(Error::NotApplicable(
            "drift branches are vacuous at V_n = 0",
        )),
    }
}

/// Explicit Ville-conditional `ln ln` bound for the medium- and large-drift
/// branches; the small-drift branches already carry an unconditional `ln ln`
/// bound. The sign-dependent scale is replaced by its worst case `beta_l`,
/// keeping the evaluator a valid upper bound without threading the optimum's
/// sign.
pub fn robbins_conditional_bound(
    branch: Branch,
    _s: f64,
    v: f64,
    alpha: f64,
    cfg: &MarketConfig,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha {alpha} outside (0,1)")));
    }
    let bl = cfg.beta_l;
    let e = std::f64::consts::E;
    match branch {
        Branch::MediumDrift => {
            let arg = 14.0 * e / bl * (1.0 + v.sqrt());
            Ok((1.0 / alpha).ln() / 3.0
                + 4.0 / 3.0
                + 4.0 / 3.0 * (20f64 / 3.0).ln()
                + 4.0 / 3.0 * (4.0 / lnln_66e()).ln()
                + 4.0 / 3.0 * ll(arg)
                + 8.0 / 3.0 * lll(arg))
        }
        Branch::LargeDrift => Ok((1.0 / alpha).ln()
            + 2.0
                * (4f64.ln()
                    + lnln_66e()
                    + lnlnln_66e()
                    + (2.0 * cfg.beta_u + 5.0 / bl).ln())),
        _ => Err(Error::NotApplicable(
            "conditional form covers the medium- and large-drift branches",
        )),
    }
}

/// Regret bound from radial monotonicity of the prior at the optimum:
/// `(1/2) ln W*_n - ln(density(l*) |l*|)`. Applies to any heavy-near-zero
/// prior and any nonzero optimum, boundary included.
pub fn density_at_optimum_bound(
    log_wstar: f64,
    lambda_star: f64,
    prior: &PriorSpec,
) -> Result<f64> {
    if lambda_star == 0.0 {
        return Err(Error::NotApplicable("undefined at lambda* = 0"));
    }
    let pi = prior.density(lambda_star)?;
    Ok(0.5 * log_wstar - (pi * lambda_star.abs()).ln())
}

/// Second-order regret bound from a Taylor window of half-width
/// `rho = min(|l*|, (1 - a_n |l*|) / sqrt(1+V))` around an interior optimum,
/// where `a_n` is `1-m0` for positive and `m0` for negative optima:
/// `rho^2 V / (2 (1 - a_n |l*|)^2) - ln(rho density(l*))`.
pub fn curvature_window_bound(
    v: f64,
    lambda_star: f64,
    prior: &PriorSpec,
    cfg: &MarketConfig,
) -> Result<f64> {
    if lambda_star == 0.0 {
        return Err(Error::NotApplicable("undefined at lambda* = 0"));
    }
    let a_n = if lambda_star > 0.0 {
        1.0 - cfg.m0
    } else {
        cfg.m0
    };
    let shrink = 1.0 - a_n * lambda_star.abs();
    if shrink <= 0.0 {
        return Err(Error::NotApplicable("optimum is not interior"));
    }
    let rho = lambda_star.abs().min(shrink / (1.0 + v).sqrt());
    let pi = prior.density(lambda_star)?;
    Ok(rho * rho * v / (2.0 * shrink * shrink) - (rho * pi).ln())
}

/// Orabona–Jun prior's density at its support edge `|l| = 1`.
fn oj_density_at_one() -> f64 {
    1.0 / (2.0 * ln_66e() * lnln_66e())
}

/// Right-hand side of the four-branch bound for the Orabona–Jun mixture
/// against the `[-1,1]` comparator; `log_wstar_restricted` is the hindsight
/// log-wealth over that comparator.
pub fn oj_branch_bound(
    branch: Branch,
    s: f64,
    v: f64,
    log_wstar_restricted: f64,
    _cfg: &MarketConfig,
) -> Result<f64> {
    let e = std::f64::consts::E;
    match branch {
        Branch::SmallDriftInterior => {
            let arg = 14.0 * e * (1.0 + v).sqrt();
            Ok(6.0 + (2.0 / lnln_66e()).ln() + ll(arg) + 2.0 * lll(arg))
        }
        Branch::SmallDriftBoundary => Ok(2.0 + (1.0 / oj_density_at_one()).ln()),
        Branch::MediumDrift => {
            let arg = 14.0 * e * (1.0 + v.sqrt());
            Ok((20.0 * e.sqrt() / 3.0).ln()
                + (2.0 / lnln_66e()).ln()
                + ll(arg)
                + (s.abs() / (4.0 / 3.0 * s.abs() + 2.0 * v).sqrt()).ln()
                + 2.0 * lll(arg))
        }
        Branch::LargeDrift => Ok(0.5 * log_wstar_restricted - (oj_density_at_one() / 7.0).ln()),
        Branch::Degenerate => Err(Error::NotApplicable(
            "drift branches are vacuous at V_n = 0",
        )),
    }
}

/// Aggregate regret bound: `min(r1, r2) + ln(1 / min(s0, 1-s0))`.
pub fn aggregate_bound(r1: f64, r2: f64, s0: f64) -> Result<f64> {
    if !(s0 > 0.0 && s0 < 1.0) {
        return Err(Error::domain(format!("s0 {s0} outside (0,1)")));
    }
    Ok(r1.min(r2) + (1.0 / s0.min(1.0 - s0)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::PathState;
    use crate::hindsight::best_lambda;
    use crate::mixture::MixtureEngine;
    use crate::priors::PriorKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn market(m0: f64) -> MarketConfig {
        MarketConfig::new(m0).unwrap()
    }

    #[test]
    fn classify_examples() {
        let cfg = market(0.5);
        assert_eq!(
            classify(0.5, 0.75, Location::Interior, &cfg),
            Branch::SmallDriftInterior
        );
        assert_eq!(
            classify(1.5, 0.75, Location::LowerBoundary, &cfg),
            Branch::LargeDrift
        );
        assert_eq!(classify(0.0, 0.0, Location::Degenerate, &cfg), Branch::Degenerate);
        // drift strong enough to clear sqrt(2V) but below (beta_l/5) V
        assert_eq!(
            classify(30.0, 400.0, Location::Interior, &cfg),
            Branch::MediumDrift
        );
        // zero drift with positive variance can only be small drift
        assert_eq!(
            classify(0.0, 3.0, Location::Interior, &cfg),
            Branch::SmallDriftInterior
        );
        assert_eq!(classify_oj(30.0, 400.0, Location::Interior), Branch::MediumDrift);
        assert_eq!(classify_oj(30.0, 100.0, Location::Interior), Branch::LargeDrift);
    }

    #[test]
    fn classifier_partition() {
        let cfg = market(0.25);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let v = rng.gen::<f64>() * 1e4 + 1e-9;
            let s = (rng.gen::<f64>() - 0.5) * 2.0 * 3.0 * v.sqrt().max(v);
            let small = s.abs() < (2.0 * v).sqrt();
            let med = (2.0 * v).sqrt() <= s.abs() && s.abs() <= cfg.beta_l / 5.0 * v;
            let large = (2.0 * v).sqrt() <= s.abs() && cfg.beta_l / 5.0 * v < s.abs();
            assert_eq!(
                small as u8 + med as u8 + large as u8,
                1,
                "s={s} v={v}"
            );
        }
    }

    #[test]
    fn uniform_bound_examples() {
        assert_eq!(uniform_bound(0), 1.0);
        assert!((uniform_bound(10) - (11f64.ln() + 1.0)).abs() < 1e-15);
        assert!((uniform_bound(10) - 3.397895).abs() < 1e-6);
    }

    #[test]
    fn robbins_bound_constants() {
        let cfg = market(0.5);
        let b = robbins_branch_bound(Branch::SmallDriftBoundary, 0.1, 1.0, 0.0, &cfg).unwrap();
        let expect = 4.0 + (4.0 * ln_66e() * lnln_66e()).ln();
        assert!((b - expect).abs() < 1e-12);
        assert!((b - 6.505).abs() < 1e-3);

        let b = robbins_branch_bound(
            Branch::LargeDrift,
            1.5,
            0.75,
            3.0 * 2f64.ln(),
            &cfg,
        )
        .unwrap();
        let expect =
            1.5 * 2f64.ln() + 4f64.ln() + lnln_66e() + lnlnln_66e() + 11f64.ln();
        assert!((b - expect).abs() < 1e-12);

        assert!(robbins_branch_bound(Branch::Degenerate, 0.0, 0.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn conditional_bound_constants() {
        let cfg = market(0.5);
        let b = robbins_conditional_bound(Branch::LargeDrift, 1.0, 1.0, 0.05, &cfg).unwrap();
        let expect =
            20f64.ln() + 2.0 * (4f64.ln() + lnln_66e() + lnlnln_66e() + 11f64.ln());
        assert!((b - expect).abs() < 1e-12);
        // constant in n: only V enters, and only through the ln ln terms
        let e = std::f64::consts::E;
        let k = |v: f64| {
            robbins_conditional_bound(Branch::MediumDrift, 9.9, v, 0.05, &cfg).unwrap()
                - 4.0 / 3.0 * ll(14.0 * e / cfg.beta_l * (1.0 + v.sqrt()))
                - 8.0 / 3.0 * lll(14.0 * e / cfg.beta_l * (1.0 + v.sqrt()))
        };
        // the remainder is a V-free constant, so the ln ln coefficient is 4/3
        assert!((k(10.0) - k(1e10)).abs() < 1e-9);
        assert!(robbins_conditional_bound(Branch::LargeDrift, 1.0, 1.0, 1.0, &cfg).is_err());
        assert!(
            robbins_conditional_bound(Branch::SmallDriftInterior, 0.1, 1.0, 0.05, &cfg).is_err()
        );
    }

    #[test]
    fn density_at_optimum_examples() {
        let cfg = market(0.5);
        let rob = PriorSpec::new(PriorKind::Robbins, &cfg);
        let b = density_at_optimum_bound(3.0 * 2f64.ln(), 2.0, &rob).unwrap();
        let pi = rob.density(2.0).unwrap();
        assert!((b - (1.5 * 2f64.ln() - (2.0 * pi).ln())).abs() < 1e-12);
        assert!(density_at_optimum_bound(0.0, 0.0, &rob).is_err());

        // |l*| density(l*) is sign-symmetric for the Orabona-Jun prior only
        let oj = PriorSpec::new(PriorKind::OrabonaJun, &cfg);
        let a = density_at_optimum_bound(1.0, 0.7, &oj).unwrap();
        let b = density_at_optimum_bound(1.0, -0.7, &oj).unwrap();
        assert!((a - b).abs() < 1e-12);
        let asym = market(0.3);
        let rob = PriorSpec::new(PriorKind::Robbins, &asym);
        let a = density_at_optimum_bound(1.0, 0.7, &rob).unwrap();
        let b = density_at_optimum_bound(1.0, -0.7, &rob).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn oj_bound_constants() {
        let cfg = market(0.5);
        let b = oj_branch_bound(Branch::SmallDriftBoundary, 0.1, 1.0, 0.0, &cfg).unwrap();
        let expect = 2.0 + (2.0 * ln_66e() * lnln_66e()).ln();
        assert!((b - expect).abs() < 1e-12);
        assert!((b - 3.812).abs() < 1e-3);
        let b = oj_branch_bound(Branch::LargeDrift, 3.0, 1.0, 7.0, &cfg).unwrap();
        assert!((b - (3.5 - (oj_density_at_one() / 7.0).ln())).abs() < 1e-12);
        assert!(oj_branch_bound(Branch::Degenerate, 0.0, 0.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn report_slack_convention() {
        let r = RegretReport::new(3, 0.5, 0.75, Branch::SmallDriftInterior, 1.0, 1.5, None, 1e-9);
        assert_eq!(r.slack, 0.5);
        assert!(r.holds());
        let r = RegretReport::new(3, 0.5, 0.75, Branch::LargeDrift, 2.0, 1.0, None, 1e-9);
        assert!(!r.holds());
        // quadrature slack rescues a hairline miss
        let r = RegretReport::new(3, 0.5, 0.75, Branch::LargeDrift, 1.0 + 5e-10, 1.0, None, 1e-9);
        assert!(r.holds());
    }

    #[test]
    fn aggregate_bound_examples() {
        assert!((aggregate_bound(5.0, 2.0, 0.5).unwrap() - (2.0 + 2f64.ln())).abs() < 1e-15);
        assert!((aggregate_bound(0.0, 0.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((aggregate_bound(0.0, 0.0, 0.9).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert!(aggregate_bound(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn regret_examples_end_to_end() {
        let cfg = market(0.5);

        // single winning observation against the uniform mixture
        let mut e = MixtureEngine::new(PriorKind::Uniform, &cfg, 256).unwrap();
        e.step(1.0).unwrap();
        let r = regret(2f64.ln(), e.log_mixture_wealth());
        assert!((r - 2f64.ln()).abs() < 1e-9);
        assert!(r <= uniform_bound(1));

        // degenerate path: hindsight wealth 1, mixture stuck at its mass 1/2
        let mut e = MixtureEngine::new(PriorKind::Robbins, &cfg, 256).unwrap();
        e.step(0.5).unwrap();
        e.step(0.5).unwrap();
        let r = regret(0.0, e.log_mixture_wealth());
        assert!((r - 2f64.ln()).abs() < 1e-9);

        // small-drift interior path: measured regret under both evaluators
        let mut e = MixtureEngine::new(PriorKind::Robbins, &cfg, 2048).unwrap();
        let mut p = PathState::new(&cfg);
        for x in [1.0, 1.0, 0.0] {
            e.step(x).unwrap();
            p.observe(x).unwrap();
        }
        let h = best_lambda(&p, cfg.lambda_interval(), &cfg).unwrap();
        let r = regret(h.log_wstar, e.log_mixture_wealth());
        let branch = classify(p.s(), p.v(), h.location, &cfg);
        assert_eq!(branch, Branch::SmallDriftInterior);
        let b = robbins_branch_bound(branch, p.s(), p.v(), h.log_wstar, &cfg).unwrap();
        assert!(r <= b + 1e-8);
        let rob = PriorSpec::new(PriorKind::Robbins, &cfg);
        let b1 = density_at_optimum_bound(h.log_wstar, h.lambda_star, &rob).unwrap();
        assert!(r <= b1 + 1e-8);
        let b2 = curvature_window_bound(p.v(), h.lambda_star, &rob, &cfg).unwrap();
        assert!(r <= b2 + 1e-8);
    }
}
