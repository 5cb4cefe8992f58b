//! Path-level hedging and arbitrage simulations.
//!
//! Three experiments:
//! - [`simulate_pair_arbitrage`]: two equal-volatility assets on one
//!   Brownian path; a dollar-neutral long/short rebalanced each step earns
//!   `(mu2 - mu1) T` with variance vanishing as O(dt) — a model-induced
//!   arbitrage.
//! - [`simulate_costed_hedge`]: short an option priced at the arb-cost rate
//!   `r*`, hedge under delta-position cost multipliers `lambda_j`; the
//!   exposure-matching holding closes replication, the sign-flipped rule
//!   `(2 + lambda)/lambda` does not (kept behind [`HedgeRule`]).
//! - [`verify_allocation`]: replicate the power claim
//!   `G = w1^a1 * w2^a2` with holdings `A_j = a_j G / w_j` on simulated
//!   costed consumption streams and report the drift of the replication
//!   error as a function of the allocation.

use crate::closed_form::{bs_delta, bs_price, VanillaSpec};
use crate::error::PricingError;
use crate::math::pairwise_sum;
use crate::rates::arb_cost_lambdas;
use crate::rng::{path_rng, standard_normal};
use crate::trees::CostedView;
use crate::Result;
use rayon::prelude::*;
use serde::Serialize;

/// Terminal P&L statistics over simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PnlStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub paths: usize,
    pub steps: usize,
    pub initial_capital: f64,
}

fn summarize(values: &[f64], steps: usize, initial_capital: f64) -> PnlStats {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = if values.len() > 1 { pairwise_sum(&sq) / (n - 1.0) } else { 0.0 };
    PnlStats {
        mean,
        variance,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        paths: values.len(),
        steps,
        initial_capital,
    }
}

/// Dollar-neutral pair trade on two assets sharing one Brownian path: +$1 of
/// asset 2, -$1 of asset 1, rebalanced each step, zero initial capital.
/// Terminal P&L converges to the deterministic `(mu2 - mu1) T`.
pub fn simulate_pair_arbitrage(
    mu1: f64,
    mu2: f64,
    sigma: f64,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PnlStats> {
    if !(sigma > 0.0 && horizon > 0.0) || steps < 1 || n_paths < 1 {
        return Err(PricingError::InvalidParameter(format!(
            "need sigma > 0, horizon > 0, steps >= 1, n_paths >= 1; got sigma={sigma}, horizon={horizon}, steps={steps}, n_paths={n_paths}"
        )));
    }
    let dt = horizon / steps as f64;
    let sdt = dt.sqrt();
    // Exact lognormal one-step gross returns; one Gaussian drives both legs.
    let g1 = ((mu1 - 0.5 * sigma * sigma) * dt, sigma * sdt);
    let g2 = ((mu2 - 0.5 * sigma * sigma) * dt, sigma * sdt);
    let pnls: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut pnl = 0.0;
            for _ in 0..steps {
                let z = standard_normal(&mut rng);
                let r1 = (g1.0 + g1.1 * z).exp() - 1.0;
                let r2 = (g2.0 + g2.1 * z).exp() - 1.0;
                pnl += r2 - r1;
            }
            pnl
        })
        .collect();
    Ok(summarize(&pnls, steps, 0.0))
}

/// Which holding the costed hedger uses for a pricing delta `W_x` under the
/// delta-cost multiplier `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HedgeRule {
    /// `a = (2 - lambda) W_x / lambda`: the unique holding whose effective
    /// exposure `lambda a - (1 - lambda) W_x` equals `W_x`, closing the
    /// replication.
    ExposureMatching,
    /// `a = (2 + lambda) W_x / lambda`: the same form with the sign of
    /// `lambda` flipped; its effective exposure is `(1 + 2 lambda) W_x` and
    /// the replication error does not vanish. Kept for comparison.
    SignFlipped,
    /// `lambda` forced to 1: the classic uncosted delta hedge.
    ClassicDelta,
}

/// Replication-error statistics of the costed hedge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeStats {
    /// Mean of terminal `portfolio - payoff`.
    pub mean_error: f64,
    /// Sample standard deviation of the terminal error.
    pub error_std: f64,
    pub mean_abs_error: f64,
    /// The option premium collected at inception.
    pub option_value: f64,
    pub paths: usize,
    pub steps: usize,
}

/// Short one option priced at `r* = (sqrt(mu1)+sqrt(mu2))^2`, hedge agent 1's
/// asset (drift `mu1`, vol `sigma`) under the rule's holdings, bond at `r*`.
/// Per step the portfolio earns `e dS + (P - W_x S) r* dt` with `e` the
/// rule's effective exposure.
pub fn simulate_costed_hedge(
    mu1: f64,
    mu2: f64,
    sigma: f64,
    spec: &VanillaSpec,
    steps: usize,
    n_paths: usize,
    seed: u64,
    rule: HedgeRule,
) -> Result<HedgeStats> {
    if steps < 1 || n_paths < 2 {
        return Err(PricingError::InvalidParameter(format!(
            "need steps >= 1 and n_paths >= 2, got {steps}, {n_paths}"
        )));
    }
    let rates = arb_cost_lambdas(mu1, mu2)?;
    let r_star = rates.rate;
    let lambda = match rule {
        HedgeRule::ClassicDelta => 1.0,
        _ => rates.lambdas.unwrap().0,
    };
    let priced = VanillaSpec { rate: r_star, vol: sigma, ..*spec };
    let w0 = bs_price(&priced);
    let t = priced.maturity;
    let dt = t / steps as f64;
    let sdt = dt.sqrt();
    let log_drift = (mu1 - 0.5 * sigma * sigma) * dt;

    let errors: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut s = priced.spot;
            let mut p = w0;
            for k in 0..steps {
                let tau = t - k as f64 * dt;
                let here = VanillaSpec { spot: s, maturity: tau, ..priced };
                let delta = bs_delta(&here);
                let holding = match rule {
                    HedgeRule::ExposureMatching => (2.0 - lambda) * delta / lambda,
                    HedgeRule::SignFlipped => (2.0 + lambda) * delta / lambda,
                    HedgeRule::ClassicDelta => delta,
                };
                let exposure = lambda * holding - (1.0 - lambda) * delta;
                let s_next = s * (log_drift + sigma * sdt * standard_normal(&mut rng)).exp();
                p += exposure * (s_next - s) + (p - delta * s) * r_star * dt;
                s = s_next;
            }
            let spec_t = VanillaSpec { spot: s, maturity: 0.0, ..priced };
            p - spec_t.intrinsic()
        })
        .collect();

    let stats = summarize(&errors, steps, w0);
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    Ok(HedgeStats {
        mean_error: stats.mean,
        error_std: stats.variance.sqrt(),
        mean_abs_error: pairwise_sum(&abs) / abs.len() as f64,
        option_value: w0,
        paths: n_paths,
        steps,
    })
}

/// Replicate the power claim `G = w1^a1 w2^a2` on two consumption streams
/// sharing one Brownian driver. The streams the claim is written on evolve
/// with each view's base `(drift, vol)`; trading them costs, so each leg's
/// trading gain follows the view's effective `(m_j, v_j)` dynamics instead.
/// The dollar positions
/// `A1 w1 = G (sigma - v2)/(v1 - v2)`, `A2 w2 = G (v1 - sigma)/(v1 - v2)`
/// exhaust the claim value and match its diffusion through the costed legs,
/// so the reported error `portfolio - G` is driven by the drift gap between
/// the costed portfolio and the claim, which is linear in the allocation.
pub fn verify_allocation(
    view1: &CostedView,
    view2: &CostedView,
    alpha: (f64, f64),
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PnlStats> {
    if (alpha.0 + alpha.1 - 1.0).abs() > 1e-12 {
        return Err(PricingError::InvalidParameter(format!(
            "allocations must sum to 1, got {} + {}",
            alpha.0, alpha.1
        )));
    }
    if (view1.base.vol - view2.base.vol).abs() > 1e-10 {
        return Err(PricingError::InvalidParameter(format!(
            "views must share the base volatility, got {} and {}",
            view1.base.vol, view2.base.vol
        )));
    }
    if (view1.eff_vol - view2.eff_vol).abs() <= 1e-10 {
        return Err(PricingError::DegenerateVolatility {
            v1: view1.eff_vol,
            v2: view2.eff_vol,
            tol: 1e-10,
        });
    }
    if !(horizon > 0.0) || steps < 1 || n_paths < 1 {
        return Err(PricingError::InvalidParameter(format!(
            "need horizon > 0, steps >= 1, n_paths >= 1; got {horizon}, {steps}, {n_paths}"
        )));
    }
    let dt = horizon / steps as f64;
    let sdt = dt.sqrt();
    let (mu1, mu2, sigma) = (view1.base.drift, view2.base.drift, view1.base.vol);
    let (m1, v1) = (view1.eff_drift, view1.eff_vol);
    let (m2, v2) = (view2.eff_drift, view2.eff_vol);
    let gap = v1 - v2;
    let claim = |w1: f64, w2: f64| w1.powf(alpha.0) * w2.powf(alpha.1);

    let errors: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let (mut w1, mut w2) = (1.0f64, 1.0f64);
            let mut p = claim(w1, w2);
            for _ in 0..steps {
                let g = claim(w1, w2);
                let (d1, d2) = (g * (sigma - v2) / gap, g * (v1 - sigma) / gap);
                let z = standard_normal(&mut rng);
                // Viewed streams and costed trading returns share the shock.
                let w1n = w1 * ((mu1 - 0.5 * sigma * sigma) * dt + sigma * sdt * z).exp();
                let w2n = w2 * ((mu2 - 0.5 * sigma * sigma) * dt + sigma * sdt * z).exp();
                let r1 = ((m1 - 0.5 * v1 * v1) * dt + v1 * sdt * z).exp() - 1.0;
                let r2 = ((m2 - 0.5 * v2 * v2) * dt + v2 * sdt * z).exp() - 1.0;
                p += d1 * r1 + d2 * r2;
                (w1, w2) = (w1n, w2n);
            }
            p - claim(w1, w2)
        })
        .collect();
    Ok(summarize(&errors, steps, 1.0))
}

/// The allocation at which [`verify_allocation`]'s mean error vanishes:
/// the costed portfolio's drift equals the claim's drift
/// `a mu1 + (1-a) mu2` there.
pub fn drift_matched_allocation(view1: &CostedView, view2: &CostedView) -> Result<f64> {
    if (view1.base.vol - view2.base.vol).abs() > 1e-10 {
        return Err(PricingError::InvalidParameter(format!(
            "views must share the base volatility, got {} and {}",
            view1.base.vol, view2.base.vol
        )));
    }
    let (mu1, mu2, sigma) = (view1.base.drift, view2.base.drift, view1.base.vol);
    let (m1, v1) = (view1.eff_drift, view1.eff_vol);
    let (m2, v2) = (view2.eff_drift, view2.eff_vol);
    if (v1 - v2).abs() <= 1e-10 {
        return Err(PricingError::DegenerateVolatility { v1, v2, tol: 1e-10 });
    }
    if (mu1 - mu2).abs() <= 1e-12 {
        return Err(PricingError::InvalidParameter(
            "equal base drifts leave the allocation unidentified".into(),
        ));
    }
    let portfolio_drift = ((sigma - v2) * m1 + (v1 - sigma) * m2) / (v1 - v2);
    Ok((portfolio_drift - mu2) / (mu1 - mu2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::OptionKind;

    #[test]
    fn equal_drifts_cancel_pathwise() {
        let s = simulate_pair_arbitrage(0.05, 0.05, 0.2, 1.0, 100, 64, 3).unwrap();
        assert!(s.mean.abs() < 1e-12);
        assert!(s.variance < 1e-24);
        assert!(s.min.abs() < 1e-12 && s.max.abs() < 1e-12);
    }

    #[test]
    fn pair_arbitrage_earns_the_drift_gap() {
        let s = simulate_pair_arbitrage(0.03, 0.07, 0.2, 1.0, 10_000, 200, 9).unwrap();
        assert!((s.mean - 0.04).abs() < 1e-3, "mean {}", s.mean);
        assert!(s.variance < 1e-5, "variance {}", s.variance);
        assert!(s.min > 0.0, "min {}", s.min);
    }

    #[test]
    fn pair_arbitrage_variance_decays_linearly() {
        let a = simulate_pair_arbitrage(0.03, 0.07, 0.2, 1.0, 500, 400, 21).unwrap();
        let b = simulate_pair_arbitrage(0.03, 0.07, 0.2, 1.0, 1000, 400, 21).unwrap();
        assert!(a.variance / b.variance >= 1.8, "ratio {}", a.variance / b.variance);
    }

    #[test]
    fn pair_arbitrage_is_seed_deterministic() {
        let a = simulate_pair_arbitrage(0.03, 0.07, 0.2, 1.0, 200, 100, 5).unwrap();
        let b = simulate_pair_arbitrage(0.03, 0.07, 0.2, 1.0, 200, 100, 5).unwrap();
        assert_eq!(a, b);
    }

    fn atm_call() -> VanillaSpec {
        VanillaSpec::new(100.0, 100.0, 1.0, 0.0, 0.2, OptionKind::Call).unwrap()
    }

    #[test]
    fn classic_delta_hedge_error_shrinks_with_steps() {
        let spec = atm_call();
        let coarse =
            simulate_costed_hedge(0.04, 0.09, 0.2, &spec, 50, 400, 17, HedgeRule::ClassicDelta)
                .unwrap();
        let fine =
            simulate_costed_hedge(0.04, 0.09, 0.2, &spec, 400, 400, 17, HedgeRule::ClassicDelta)
                .unwrap();
        assert!(fine.error_std < coarse.error_std / 2.0, "{} vs {}", coarse.error_std, fine.error_std);
    }

    #[test]
    fn exposure_matching_beats_the_sign_flipped_rule() {
        let spec = atm_call();
        let good =
            simulate_costed_hedge(0.04, 0.09, 0.2, &spec, 500, 300, 23, HedgeRule::ExposureMatching)
                .unwrap();
        let bad =
            simulate_costed_hedge(0.04, 0.09, 0.2, &spec, 500, 300, 23, HedgeRule::SignFlipped)
            .unwrap();
        assert!(good.mean_abs_error < bad.mean_abs_error / 3.0);
    }

    #[test]
    fn zero_vol_hedge_is_deterministic() {
        // Paths are deterministic; the residual is the O(dt) weak error of
        // the bond-leg accrual, so the step count has to be large.
        let spec = VanillaSpec::new(100.0, 80.0, 1.0, 0.0, 1e-6, OptionKind::Call).unwrap();
        let s =
            simulate_costed_hedge(0.04, 0.09, 1e-6, &spec, 100_000, 2, 2, HedgeRule::ExposureMatching)
                .unwrap();
        assert!(s.mean_abs_error < 1e-4, "error {}", s.mean_abs_error);
    }

    #[test]
    fn drift_matched_allocation_replicates() {
        let v1 = CostedView::new(0.05, 0.2, 1.5, 0.3).unwrap();
        let v2 = CostedView::new(0.03, 0.2, 2.5, 0.5).unwrap();
        let a = drift_matched_allocation(&v1, &v2).unwrap();
        let matched = verify_allocation(&v1, &v2, (a, 1.0 - a), 1.0, 2000, 64, 4).unwrap();
        let off = verify_allocation(&v1, &v2, (a + 0.1, 0.9 - a), 1.0, 2000, 64, 4).unwrap();
        assert!(matched.mean.abs() < 2e-4, "matched mean {}", matched.mean);
        assert!(off.mean.abs() > 10.0 * matched.mean.abs(), "{} vs {}", off.mean, matched.mean);
    }

    #[test]
    fn allocation_error_grows_linearly_off_the_match() {
        let v1 = CostedView::new(0.05, 0.2, 1.5, 0.3).unwrap();
        let v2 = CostedView::new(0.03, 0.2, 2.5, 0.5).unwrap();
        let a = drift_matched_allocation(&v1, &v2).unwrap();
        let e = |d: f64| {
            verify_allocation(&v1, &v2, (a + d, 1.0 - a - d), 1.0, 1000, 64, 4)
                .unwrap()
                .mean
                .abs()
        };
        let (e1, e2) = (e(0.1), e(0.2));
        assert!((e2 / e1 - 2.0).abs() < 0.2, "ratio {}", e2 / e1);
    }

    #[test]
    fn allocation_error_variance_decays_with_steps() {
        // At the drift-matched allocation the positions match the claim's
        // diffusion and drift, so the terminal error variance is a
        // discretization effect of order dt. Away from the match the
        // accumulated drift gap keeps an O(1) variance of its own.
        let v1 = CostedView::new(0.05, 0.2, 1.5, 0.3).unwrap();
        let v2 = CostedView::new(0.03, 0.2, 2.5, 0.5).unwrap();
        let a = drift_matched_allocation(&v1, &v2).unwrap();
        let coarse = verify_allocation(&v1, &v2, (a, 1.0 - a), 1.0, 250, 200, 8).unwrap();
        let fine = verify_allocation(&v1, &v2, (a, 1.0 - a), 1.0, 1000, 200, 8).unwrap();
        assert!(
            coarse.variance / fine.variance > 2.5,
            "ratio {}",
            coarse.variance / fine.variance
        );
    }

    #[test]
    fn allocation_sum_must_be_one() {
        let v1 = CostedView::new(0.05, 0.2, 1.5, 0.3).unwrap();
        let v2 = CostedView::new(0.03, 0.2, 2.5, 0.5).unwrap();
        assert!(verify_allocation(&v1, &v2, (0.7, 0.5), 1.0, 10, 4, 0).is_err());
    }

    #[test]
    fn degenerate_effective_vols_rejected() {
        let v1 = CostedView::new(0.05, 0.2, 1.5, 0.3).unwrap();
        let err = verify_allocation(&v1, &v1.clone(), (0.5, 0.5), 1.0, 10, 4, 0).unwrap_err();
        assert_eq!(err.name(), "DegenerateVolatility");
    }
}
