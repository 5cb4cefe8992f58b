//! Implied riskless rates, transaction yields, and wealth allocations.
//!
//! Every formula here is a zero-beta construction: two traders with different
//! views (or different cost schedules) imply a rate at which a long/short
//! combination of their assets is deterministic. Degenerate denominators are
//! reported as errors because a vanishing gap is exactly the regime where the
//! implied rate explodes.

use crate::error::PricingError;
use crate::trees::{CostedView, LatticeMarket};
use crate::Result;
use serde::Serialize;

/// Tolerance on volatility gaps before a rate is declared degenerate.
pub const TOL_VOL: f64 = 1e-10;

/// A rate together with the optional cost diagnostics that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    /// The implied riskless rate per year.
    pub rate: f64,
    /// Transaction yields (C_y for agent 1 and 2), when cost-implied.
    pub yields: Option<(f64, f64)>,
    /// Delta-position cost multipliers (lambda for agent 1 and 2).
    pub lambdas: Option<(f64, f64)>,
    /// Cost multiplier on the bond leg; fixed at 1 when present.
    pub bond_lambda: Option<f64>,
}

/// Zero-beta rate implied by two lognormal views on the same asset class:
/// `r = (mu1*sigma2 - mu2*sigma1) / (sigma2 - sigma1)`.
pub fn black72_rate(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    if (sigma2 - sigma1).abs() <= TOL_VOL {
        return Err(PricingError::DegenerateVolatility { v1: sigma1, v2: sigma2, tol: TOL_VOL });
    }
    Ok((mu1 * sigma2 - mu2 * sigma1) / (sigma2 - sigma1))
}

/// Which effective moments the costed-rate formulas consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentConvention {
    /// Exact discrete moment matching of the four-branch step (normative).
    Exact,
    /// The closed-form shortcut, kept for comparison.
    Approximate,
}

/// Rate and transaction yields implied by two costed views sharing one base
/// volatility:
/// `r = (mu1*v2 - mu2*v1) / (v2 - v1)`,
/// `Cy_j = v_j (mu1 - mu2)/(v1 - v2) - sigma (m1 - m2)/(v1 - v2)`,
/// with `(m_j, v_j)` the effective drift/vol of view j.
pub fn costed_rate_and_yields(
    view1: &CostedView,
    view2: &CostedView,
    convention: MomentConvention,
) -> Result<RateResult> {
    if (view1.base.vol - view2.base.vol).abs() > TOL_VOL {
        return Err(PricingError::InvalidParameter(format!(
            "views must share the base volatility, got {} and {}",
            view1.base.vol, view2.base.vol
        )));
    }
    if view1.trans_rate == view2.trans_rate && view1.mix == view2.mix {
        return Err(PricingError::HeterogeneityRequired {
            trans_rate: view1.trans_rate,
            mix: view1.mix,
        });
    }
    let pick = |v: &CostedView| match convention {
        MomentConvention::Exact => (v.eff_drift, v.eff_vol),
        MomentConvention::Approximate => (v.approx.eff_drift, v.approx.eff_vol),
    };
    let (m1, v1) = pick(view1);
    let (m2, v2) = pick(view2);
    if (v2 - v1).abs() <= TOL_VOL {
        return Err(PricingError::DegenerateVolatility { v1, v2, tol: TOL_VOL });
    }
    let (mu1, mu2) = (view1.base.drift, view2.base.drift);
    let sigma = view1.base.vol;
    let rate = (mu1 * v2 - mu2 * v1) / (v2 - v1);
    let gap = v1 - v2;
    let cy = |vj: f64| vj * (mu1 - mu2) / gap - sigma * (m1 - m2) / gap;
    Ok(RateResult { rate, yields: Some((cy(v1), cy(v2))), lambdas: None, bond_lambda: None })
}

/// Roots of a wealth-allocation equation, with substitution residuals. A
/// negative discriminant is reported, not fatal: `roots` is empty and
/// `discriminant` says by how much.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationSolution {
    pub roots: Vec<f64>,
    pub residuals: Vec<f64>,
    pub discriminant: f64,
    /// Every allocation solves the equation (equal-volatility collapse).
    pub degenerate: bool,
}

/// Solve `alpha (1-alpha) sigma^2 - Cy1 alpha - Cy2 (1-alpha) = 0` for the
/// first agent's allocation, i.e. the quadratic
/// `-sigma^2 a^2 + (sigma^2 - Cy1 + Cy2) a - Cy2 = 0`.
pub fn solve_allocation_costed(cy1: f64, cy2: f64, sigma: f64) -> Result<AllocationSolution> {
    if !(sigma > 0.0) {
        return Err(PricingError::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let residual = |a: f64| a * (1.0 - a) * s2 - cy1 * a - cy2 * (1.0 - a);
    // a x^2 + b x + c with a = -s2.
    let (qa, qb, qc) = (-s2, s2 - cy1 + cy2, -cy2);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < -1e-12 {
        return Ok(AllocationSolution {
            roots: vec![],
            residuals: vec![],
            discriminant: disc,
            degenerate: false,
        });
    }
    let sq = disc.max(0.0).sqrt();
    // Citardauq on one root avoids cancellation when qb ~ +/- sq.
    let r1 = (-qb - qb.signum() * sq) / (2.0 * qa);
    let r2 = if r1 != 0.0 { qc / (qa * r1) } else { (-qb + sq) / (2.0 * qa) };
    let mut roots = vec![r1.min(r2), r1.max(r2)];
    if disc.abs() <= 1e-12 {
        roots.truncate(1);
    }
    let residuals = roots.iter().map(|&a| residual(a)).collect();
    Ok(AllocationSolution { roots, residuals, discriminant: disc, degenerate: false })
}

/// Allocation closure without costs: the non-rate part of the wealth dynamics
/// reduces to `-1/2 alpha (1-alpha) (sigma1 - sigma2)^2`, so only the trivial
/// allocations {0, 1} close it unless the volatilities coincide, in which
/// case every allocation does.
pub fn solve_allocation_nocost(sigma1: f64, sigma2: f64) -> Result<AllocationSolution> {
    if !(sigma1 > 0.0 && sigma2 > 0.0) {
        return Err(PricingError::InvalidParameter(format!(
            "vols must be > 0, got {sigma1}, {sigma2}"
        )));
    }
    let gap2 = (sigma1 - sigma2) * (sigma1 - sigma2);
    if gap2 == 0.0 {
        return Ok(AllocationSolution {
            roots: vec![],
            residuals: vec![],
            discriminant: 0.0,
            degenerate: true,
        });
    }
    let residual = |a: f64| -0.5 * a * (1.0 - a) * gap2;
    let roots = vec![0.0, 1.0];
    let residuals = roots.iter().map(|&a| residual(a)).collect();
    Ok(AllocationSolution { roots, residuals, discriminant: gap2 * gap2 / 4.0, degenerate: false })
}

/// Rate and cost multipliers implied by arbitrage costs on delta positions:
/// `r* = (sqrt(mu1) + sqrt(mu2))^2`, `lambda_j = sqrt(r*/mu_j)`. The bond
/// multiplier is 1 by construction. `r*` may exceed both drifts; it is
/// returned as stated, without economic sanity bounds.
pub fn arb_cost_lambdas(mu1: f64, mu2: f64) -> Result<RateResult> {
    if !(mu1 > 0.0) {
        return Err(PricingError::NonPositiveDrift { mu: mu1 });
    }
    if !(mu2 > 0.0) {
        return Err(PricingError::NonPositiveDrift { mu: mu2 });
    }
    let root_sum = mu1.sqrt() + mu2.sqrt();
    let rate = root_sum * root_sum;
    Ok(RateResult {
        rate,
        yields: None,
        lambdas: Some((root_sum / mu1.sqrt(), root_sum / mu2.sqrt())),
        bond_lambda: Some(1.0),
    })
}

/// Arb-cost-adjusted market parameters and the implied market price of risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustedParams {
    pub mu_star: f64,
    pub m_star: f64,
    pub sigma_star: f64,
    pub v_star: f64,
    pub r_star: f64,
    pub theta_star: f64,
}

/// Adjusted drift/volatility for both assets of a bivariate market:
/// `mu* = mu (1 + c mu/sigma)(1 + c sigma/2)`, `sigma* = sigma + c mu`,
/// analogously for `(m, v)`; then the zero-beta rate of the adjusted pair
/// and the market price of risk `theta* = (mu* - r*)/sigma*`.
pub fn adjusted_params(mkt: &LatticeMarket) -> Result<AdjustedParams> {
    let c = mkt.cost_const;
    let (mu, sigma, m, v) = (mkt.mu, mkt.sigma, mkt.m, mkt.v);
    let mu_star = mu * (1.0 + c * mu / sigma) * (1.0 + c * sigma / 2.0);
    let m_star = m * (1.0 + c * m / v) * (1.0 + c * v / 2.0);
    let sigma_star = sigma + c * mu;
    let v_star = v + c * m;
    if (v_star - sigma_star).abs() <= TOL_VOL {
        return Err(PricingError::DegenerateVolatility { v1: sigma_star, v2: v_star, tol: TOL_VOL });
    }
    let r_star = (mu_star * v_star - m_star * sigma_star) / (v_star - sigma_star);
    let theta_star = (mu_star - r_star) / sigma_star;
    Ok(AdjustedParams { mu_star, m_star, sigma_star, v_star, r_star, theta_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::CostedView;

    #[test]
    fn black72_equal_drifts_returns_the_drift() {
        assert!((black72_rate(0.05, 0.2, 0.05, 0.4).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn black72_example_value() {
        // (0.03*0.2 - 0.07*0.1) / (0.2 - 0.1) = (0.006 - 0.007) / 0.1
        assert!((black72_rate(0.03, 0.1, 0.07, 0.2).unwrap() + 0.01).abs() < 1e-15);
    }

    #[test]
    fn black72_degenerate_vols() {
        let err = black72_rate(0.03, 0.2, 0.07, 0.2).unwrap_err();
        assert_eq!(err.name(), "DegenerateVolatility");
    }

    #[test]
    fn black72_symmetric_under_agent_swap() {
        let a = black72_rate(0.03, 0.1, 0.07, 0.2).unwrap();
        let b = black72_rate(0.07, 0.2, 0.03, 0.1).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn costed_rate_finite_with_mix_heterogeneity() {
        let v1 = CostedView::new(0.05, 0.2, 2.0, 0.2).unwrap();
        let v2 = CostedView::new(0.05, 0.2, 2.0, 0.6).unwrap();
        let r = costed_rate_and_yields(&v1, &v2, MomentConvention::Exact).unwrap();
        assert!(r.rate.is_finite());
        let (cy1, cy2) = r.yields.unwrap();
        assert!(cy1.is_finite() && cy2.is_finite());
    }

    #[test]
    fn costed_rate_symmetric_under_agent_swap() {
        let v1 = CostedView::new(0.04, 0.2, 1.5, 0.3).unwrap();
        let v2 = CostedView::new(0.07, 0.2, 2.5, 0.5).unwrap();
        let a = costed_rate_and_yields(&v1, &v2, MomentConvention::Exact).unwrap();
        let b = costed_rate_and_yields(&v2, &v1, MomentConvention::Exact).unwrap();
        assert!((a.rate - b.rate).abs() < 1e-12);
        let (a1, a2) = a.yields.unwrap();
        let (b1, b2) = b.yields.unwrap();
        assert!((a1 - b2).abs() < 1e-12 && (a2 - b1).abs() < 1e-12);
    }

    #[test]
    fn costed_rate_degenerate_at_unit_trans_rates() {
        let v1 = CostedView::new(0.05, 0.2, 1.0, 0.2).unwrap();
        let v2 = CostedView::new(0.05, 0.2, 1.0, 0.6).unwrap();
        // eff_vols both collapse to sigma even though the mixes differ.
        let err = costed_rate_and_yields(&v1, &v2, MomentConvention::Exact).unwrap_err();
        assert_eq!(err.name(), "DegenerateVolatility");
    }

    #[test]
    fn costed_rate_requires_cost_heterogeneity() {
        let v1 = CostedView::new(0.05, 0.2, 2.0, 0.3).unwrap();
        let v2 = CostedView::new(0.07, 0.2, 2.0, 0.3).unwrap();
        let err = costed_rate_and_yields(&v1, &v2, MomentConvention::Exact).unwrap_err();
        assert_eq!(err.name(), "HeterogeneityRequired");
    }

    #[test]
    fn allocation_costed_trivial_roots() {
        let s = solve_allocation_costed(0.0, 0.0, 0.3).unwrap();
        assert_eq!(s.roots, vec![0.0, 1.0]);
        assert!(s.residuals.iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn allocation_costed_two_real_roots() {
        let s = solve_allocation_costed(0.02, -0.01, 0.3).unwrap();
        assert_eq!(s.roots.len(), 2);
        assert!(s.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn allocation_costed_no_real_root() {
        let s = solve_allocation_costed(0.01, 0.02, 0.2).unwrap();
        assert!(s.roots.is_empty());
        assert!((s.discriminant - (0.0025 - 0.0032)).abs() < 1e-15);
    }

    #[test]
    fn allocation_nocost_trivial_and_degenerate() {
        let s = solve_allocation_nocost(0.2, 0.3).unwrap();
        assert_eq!(s.roots, vec![0.0, 1.0]);
        assert!(!s.degenerate);
        // Half-and-half leaves the documented residual.
        let res = -0.5 * 0.25 * (0.2f64 - 0.3).powi(2);
        assert!((-0.125 * (0.2f64 - 0.3).powi(2) - res).abs() < 1e-18);

        let d = solve_allocation_nocost(0.2, 0.2).unwrap();
        assert!(d.degenerate && d.roots.is_empty());
    }

    #[test]
    fn arb_cost_lambdas_example() {
        let r = arb_cost_lambdas(0.04, 0.09).unwrap();
        assert!((r.rate - 0.25).abs() < 1e-15);
        let (l1, l2) = r.lambdas.unwrap();
        assert!((l1 - 2.5).abs() < 1e-15);
        assert!((l2 - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.bond_lambda, Some(1.0));
    }

    #[test]
    fn arb_cost_lambdas_symmetric_case() {
        let r = arb_cost_lambdas(0.05, 0.05).unwrap();
        assert!((r.rate - 0.2).abs() < 1e-15);
        let (l1, l2) = r.lambdas.unwrap();
        assert!((l1 - 2.0).abs() < 1e-15 && (l2 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn arb_cost_lambdas_alternative_form_agrees() {
        // (mu2 - mu1) l1 l2 / (l1 - l2) reproduces the rate when mu1 != mu2.
        let r = arb_cost_lambdas(0.04, 0.09).unwrap();
        let (l1, l2) = r.lambdas.unwrap();
        let alt = (0.09 - 0.04) * l1 * l2 / (l1 - l2);
        assert!((alt - r.rate).abs() < 1e-12);
    }

    #[test]
    fn arb_cost_lambdas_rejects_nonpositive_drift() {
        assert_eq!(arb_cost_lambdas(0.0, 0.09).unwrap_err().name(), "NonPositiveDrift");
        assert_eq!(arb_cost_lambdas(0.04, -0.01).unwrap_err().name(), "NonPositiveDrift");
    }

    #[test]
    fn lambda_self_consistency() {
        let r = arb_cost_lambdas(0.04, 0.09).unwrap();
        let (l1, l2) = r.lambdas.unwrap();
        assert!((l1 - (r.rate / 0.04).sqrt()).abs() < 1e-12);
        assert!((l2 - (r.rate / 0.09).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adjusted_params_zero_cost_reduction() {
        let mkt = LatticeMarket::new(0.05, 0.2, 0.03, 0.1, 0.0, 100.0, 50.0).unwrap();
        let p = adjusted_params(&mkt).unwrap();
        assert!((p.mu_star - 0.05).abs() < 1e-15);
        assert!((p.sigma_star - 0.2).abs() < 1e-15);
        // (0.005 - 0.006) / (0.1 - 0.2)
        assert!((p.r_star - 0.01).abs() < 1e-15);
    }

    #[test]
    fn adjusted_params_example_values() {
        let mkt = LatticeMarket::new(0.05, 0.2, 0.03, 0.1, 0.1, 100.0, 50.0).unwrap();
        let p = adjusted_params(&mkt).unwrap();
        // 0.05 * (1 + 0.1*0.05/0.2) * (1 + 0.1*0.2/2) = 0.05 * 1.025 * 1.01
        assert!((p.mu_star - 0.0517625).abs() < 1e-15);
        assert!((p.sigma_star - 0.205).abs() < 1e-15);
    }

    #[test]
    fn adjusted_params_price_of_risk_identity() {
        let mkt = LatticeMarket::new(0.05, 0.2, 0.03, 0.1, 0.1, 100.0, 50.0).unwrap();
        let p = adjusted_params(&mkt).unwrap();
        let lhs = (p.mu_star - p.r_star) / p.sigma_star;
        let rhs = (p.m_star - p.r_star) / p.v_star;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn adjusted_params_degenerate_when_adjusted_vols_meet() {
        // sigma + c*mu = v + c*m: pick c = (v - sigma)/(mu - m).
        let mkt = LatticeMarket::new(0.05, 0.1, 0.03, 0.2, 5.0, 100.0, 50.0).unwrap();
        let err = adjusted_params(&mkt).unwrap_err();
        assert_eq!(err.name(), "DegenerateVolatility");
    }
}
