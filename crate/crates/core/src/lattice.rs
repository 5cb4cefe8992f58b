//! Backward-induction pricer on the bivariate lattice.
//!
//! Both assets move off one shared factor, so each step has two states and a
//! claim is replicated by a 2x2 linear solve in the dollar holdings of S and
//! V. Velocity transaction costs multiply each leg's gross return by
//! `(S'/S)^rho`, linearized by default to `1 + rho ln(S'/S)`; the exact power
//! form is available behind [`CostForm::Exact`].
//!
//! Because the step factors are constant, the replication solve collapses to
//! two state weights `(w_up, w_dn)` computed once per pricing run: the node
//! value is `w_up * value_up + w_dn * value_dn`, and `w_up + w_dn` is the
//! one-step discount factor.

use crate::error::PricingError;
use crate::rates::adjusted_params;
use crate::trees::{bivariate_step, LatticeMarket};
use crate::Result;
use serde::Serialize;
use std::sync::Arc;

/// How the velocity-cost multiplier enters the replication legs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CostForm {
    /// `1 + rho * ln(factor)` — the default; this is what the closed-form
    /// state-price probability encodes.
    Linearized,
    /// `factor^rho` exactly.
    Exact,
}

/// A European claim on the terminal pair (S_T, V_T).
#[derive(Clone)]
pub struct LatticeClaim {
    pub payoff: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub maturity: f64,
    pub steps: usize,
}

impl LatticeClaim {
    pub fn new(
        payoff: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        maturity: f64,
        steps: usize,
    ) -> Result<Self> {
        if !(maturity > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "maturity must be > 0, got {maturity}"
            )));
        }
        if steps < 1 {
            return Err(PricingError::InvalidParameter("steps must be >= 1".into()));
        }
        Ok(LatticeClaim { payoff, maturity, steps })
    }
}

/// Cost-adjusted gross returns of both assets in both states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveFactors {
    pub s_up: f64,
    pub s_dn: f64,
    pub v_up: f64,
    pub v_dn: f64,
    pub dt: f64,
}

fn cost_multiplier(factor: f64, rho: f64, form: CostForm) -> f64 {
    match form {
        CostForm::Linearized => 1.0 + rho * factor.ln(),
        CostForm::Exact => factor.powf(rho),
    }
}

/// Raw step factors times their velocity-cost multipliers.
pub fn effective_factors(mkt: &LatticeMarket, dt: f64, form: CostForm) -> Result<EffectiveFactors> {
    let step = bivariate_step(mkt, dt)?;
    let (rs, rv) = (mkt.rho_s(), mkt.rho_v());
    Ok(EffectiveFactors {
        s_up: step.s_up * cost_multiplier(step.s_up, rs, form),
        s_dn: step.s_dn * cost_multiplier(step.s_dn, rs, form),
        v_up: step.v_up * cost_multiplier(step.v_up, rv, form),
        v_dn: step.v_dn * cost_multiplier(step.v_dn, rv, form),
        dt,
    })
}

/// State weights of the one-step replication solve. `w_up + w_dn` is the
/// one-step discount factor; `w_up / (w_up + w_dn)` the implied probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationWeights {
    pub w_up: f64,
    pub w_dn: f64,
    /// Scaled determinant of the 2x2 system, kept for diagnostics.
    pub det: f64,
}

/// Solve the one-step system for the state weights:
/// dollar holdings (alpha, beta) satisfy `alpha*su + beta*vu = W_up`,
/// `alpha*sd + beta*vd = W_dn`, and the node value `alpha + beta` is linear
/// in (W_up, W_dn).
pub fn replication_weights(
    mkt: &LatticeMarket,
    dt: f64,
    form: CostForm,
) -> Result<ReplicationWeights> {
    let f = effective_factors(mkt, dt, form)?;
    let det = f.s_up * f.v_dn - f.v_up * f.s_dn;
    let scale = (f.s_up * f.v_dn).abs() + (f.v_up * f.s_dn).abs();
    if det.abs() <= 1e-12 * scale {
        return Err(PricingError::SingularReplication { det: det / scale, tol: 1e-12 });
    }
    let w_up = (f.v_dn - f.s_dn) / det;
    let w_dn = (f.s_up - f.v_up) / det;
    // When the adjusted vols collide the determinant does not vanish exactly
    // at finite dt (O(dt) terms survive), but the weights explode and the
    // implied discount/probability leave their ranges; treat that as the
    // same degeneracy.
    let disc = w_up + w_dn;
    if !(disc > 0.0) || !(w_up / disc > 0.0 && w_up / disc < 1.0) {
        return Err(PricingError::SingularReplication { det: det / scale, tol: 1e-12 });
    }
    Ok(ReplicationWeights { w_up, w_dn, det: det / scale })
}

/// Dollar holdings replicating one step's payoffs.
pub fn node_holdings(
    factors: &EffectiveFactors,
    value_up: f64,
    value_dn: f64,
) -> Result<(f64, f64)> {
    let det = factors.s_up * factors.v_dn - factors.v_up * factors.s_dn;
    let scale = (factors.s_up * factors.v_dn).abs() + (factors.v_up * factors.s_dn).abs();
    if det.abs() <= 1e-12 * scale {
        return Err(PricingError::SingularReplication { det: det / scale, tol: 1e-12 });
    }
    let alpha = (value_up * factors.v_dn - value_dn * factors.v_up) / det;
    let beta = (factors.s_up * value_dn - factors.s_dn * value_up) / det;
    Ok((alpha, beta))
}

/// Lattice price and its root-node replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticePrice {
    pub value: f64,
    /// Units of S and units of V held at the root.
    pub root_holdings: (f64, f64),
    pub steps: usize,
    pub dt: f64,
}

/// Price a claim by backward induction with the given cost form.
pub fn price_lattice_with(
    mkt: &LatticeMarket,
    claim: &LatticeClaim,
    form: CostForm,
) -> Result<LatticePrice> {
    let dt = claim.maturity / claim.steps as f64;
    let step = bivariate_step(mkt, dt)?;
    let factors = effective_factors(mkt, dt, form)?;
    let w = replication_weights(mkt, dt, form)?;

    // Recombining: node j at level n has j up-moves. One slice is kept;
    // the pair of continuation values at level 1 yields the root holdings.
    let n = claim.steps;
    let mut values: Vec<f64> = (0..=n)
        .map(|j| {
            let s = mkt.s0 * step.s_up.powi(j as i32) * step.s_dn.powi((n - j) as i32);
            let v = mkt.v0 * step.v_up.powi(j as i32) * step.v_dn.powi((n - j) as i32);
            (claim.payoff)(s, v)
        })
        .collect();
    for level in (1..n).rev() {
        for j in 0..=level {
            values[j] = w.w_up * values[j + 1] + w.w_dn * values[j];
        }
        values.truncate(level + 1);
    }
    let (value_up, value_dn) = (values[1], values[0]);
    let value = w.w_up * value_up + w.w_dn * value_dn;
    let (alpha, beta) = node_holdings(&factors, value_up, value_dn)?;
    Ok(LatticePrice { value, root_holdings: (alpha / mkt.s0, beta / mkt.v0), steps: n, dt })
}

/// [`price_lattice_with`] using the linearized cost form.
pub fn price_lattice(mkt: &LatticeMarket, claim: &LatticeClaim) -> Result<LatticePrice> {
    price_lattice_with(mkt, claim, CostForm::Linearized)
}

/// Closed-form vs replication-implied one-step probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QProbe {
    /// Implied by the node-level replication solve.
    pub q: f64,
    /// The closed-form state-price probability
    /// `1/2 - (mu* - m*) / (2 (sigma* - v*)) sqrt(dt)`.
    pub q_closed_form: f64,
    pub residual: f64,
}

/// Closed-form state-price probability of one step.
pub fn q_closed_form(mkt: &LatticeMarket, dt: f64) -> Result<f64> {
    let c = mkt.cost_const;
    let denom = mkt.sigma - mkt.v + c * (mkt.mu - mkt.m);
    if denom.abs() <= 1e-12 {
        return Err(PricingError::DegenerateVolatility {
            v1: mkt.sigma + c * mkt.mu,
            v2: mkt.v + c * mkt.m,
            tol: 1e-12,
        });
    }
    let mu_star = mkt.mu * (1.0 + c * mkt.mu / mkt.sigma) * (1.0 + c * mkt.sigma / 2.0);
    let m_star = mkt.m * (1.0 + c * mkt.m / mkt.v) * (1.0 + c * mkt.v / 2.0);
    let q = 0.5 - (mu_star - m_star) / (2.0 * denom) * dt.sqrt();
    if !(q > 0.0 && q < 1.0) {
        return Err(PricingError::QOutOfRange { q, dt });
    }
    Ok(q)
}

/// Compare the closed-form probability with the one the replication solve
/// actually implies at this dt. The gap is O(dt). The probe uses the exact
/// power multipliers: their dt-order drift coefficient is the adjusted drift
/// exactly, whereas the linearized form drops its second-order cost term and
/// would leave an O(sqrt(dt)) mismatch against the closed form.
pub fn risk_neutral_prob(mkt: &LatticeMarket, dt: f64) -> Result<QProbe> {
    let cf = q_closed_form(mkt, dt)?;
    let w = replication_weights(mkt, dt, CostForm::Exact)?;
    let q = w.w_up / (w.w_up + w.w_dn);
    Ok(QProbe { q, q_closed_form: cf, residual: (q - cf).abs() })
}

/// Residual between the closed-form probability and the market-price-of-risk
/// representation `1/2 - 1/2 theta* sqrt(dt)`. The two expressions coincide
/// algebraically (theta* = (mu* - m*)/(sigma* - v*) by construction of r*),
/// so this residual measures only evaluation noise; the genuinely O(dt) gap
/// against the lattice lives in [`risk_neutral_prob`].
pub fn validate_q_representation(mkt: &LatticeMarket, dt: f64) -> Result<f64> {
    let cf = q_closed_form(mkt, dt)?;
    let adj = adjusted_params(mkt)?;
    let repr = 0.5 - 0.5 * adj.theta_star * dt.sqrt();
    Ok((cf - repr).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{bs_price, OptionKind, VanillaSpec};

    fn mkt(c: f64) -> LatticeMarket {
        LatticeMarket::new(0.05, 0.2, 0.03, 0.1, c, 100.0, 50.0).unwrap()
    }

    fn call_claim(strike: f64, steps: usize) -> LatticeClaim {
        LatticeClaim::new(Arc::new(move |s, _| (s - strike).max(0.0)), 1.0, steps).unwrap()
    }

    #[test]
    fn constant_payoff_discounts_at_the_implied_rate() {
        let m = mkt(0.0);
        let steps = 500;
        let claim = LatticeClaim::new(Arc::new(|_, _| 100.0), 1.0, steps).unwrap();
        let p = price_lattice(&m, &claim).unwrap();
        // r = (mu*v - m*sigma)/(v - sigma) = 0.01; per-step discount is
        // exactly 1/(1 + r dt).
        let r = (m.mu * m.v - m.m * m.sigma) / (m.v - m.sigma);
        let dt = 1.0 / steps as f64;
        let oracle = 100.0 / (1.0 + r * dt).powi(steps as i32);
        assert!((p.value - oracle).abs() / oracle < 1e-10, "got {}, want {oracle}", p.value);
    }

    #[test]
    fn asset_replicates_itself() {
        let m = mkt(0.0);
        let claim = LatticeClaim::new(Arc::new(|s, _| s), 1.0, 200).unwrap();
        let p = price_lattice(&m, &claim).unwrap();
        assert!((p.value - m.s0).abs() < 1e-8, "got {}", p.value);
        assert!((p.root_holdings.0 - 1.0).abs() < 1e-8);
        assert!(p.root_holdings.1.abs() < 1e-8);
    }

    #[test]
    fn one_step_hand_solve() {
        let m = mkt(0.0);
        let claim = call_claim(100.0, 1);
        let p = price_lattice(&m, &claim).unwrap();
        // By hand: dt=1, factors su=1.25, sd=0.85, vu=1.13, vd=0.93 on the
        // grid; solve alpha*su + beta*vu = payoff_up, alpha*sd + beta*vd = 0.
        let (su, sd) = (1.0 + 0.05 + 0.2, 1.0 + 0.05 - 0.2);
        let (vu, vd) = (1.0 + 0.03 + 0.1, 1.0 + 0.03 - 0.1);
        let pay_up = (100.0 * su - 100.0f64).max(0.0);
        let pay_dn = (100.0 * sd - 100.0f64).max(0.0);
        let det = su * vd - vu * sd;
        let alpha = (pay_up * vd - pay_dn * vu) / det;
        let beta = (su * pay_dn - sd * pay_up) / det;
        assert!((p.value - (alpha + beta)).abs() < 1e-10, "got {}, want {}", p.value, alpha + beta);
    }

    #[test]
    fn converges_to_black_scholes_without_costs() {
        let m = mkt(0.0);
        let p = price_lattice(&m, &call_claim(100.0, 2000)).unwrap();
        let spec = VanillaSpec::new(100.0, 100.0, 1.0, 0.01, 0.2, OptionKind::Call).unwrap();
        let oracle = bs_price(&spec);
        assert!((p.value - oracle).abs() < 5e-3, "lattice {}, bs {oracle}", p.value);
    }

    #[test]
    fn put_call_parity_is_node_exact() {
        let m = mkt(0.1);
        let steps = 300;
        let call = price_lattice(&m, &call_claim(100.0, steps)).unwrap();
        let put = price_lattice(
            &m,
            &LatticeClaim::new(Arc::new(|s, _| (100.0f64 - s).max(0.0)), 1.0, steps).unwrap(),
        )
        .unwrap();
        let fwd = price_lattice(
            &m,
            &LatticeClaim::new(Arc::new(|s, _| s - 100.0), 1.0, steps).unwrap(),
        )
        .unwrap();
        assert!((call.value - put.value - fwd.value).abs() < 1e-10);
    }

    #[test]
    fn degree_one_payoffs_scale_with_spot_and_strike() {
        let m1 = mkt(0.1);
        let p1 = price_lattice(&m1, &call_claim(100.0, 200)).unwrap();
        let m2 = LatticeMarket::new(0.05, 0.2, 0.03, 0.1, 0.1, 300.0, 150.0).unwrap();
        let p2 = price_lattice(&m2, &call_claim(300.0, 200)).unwrap();
        assert!((p2.value - 3.0 * p1.value).abs() < 1e-10 * p2.value.max(1.0));
    }

    #[test]
    fn q_closed_form_example() {
        let q = q_closed_form(&mkt(0.0), 0.01).unwrap();
        assert!((q - 0.49).abs() < 1e-15);
    }

    #[test]
    fn q_is_half_when_drifts_match() {
        let m = LatticeMarket::new(0.05, 0.2, 0.05, 0.1, 0.0, 100.0, 50.0).unwrap();
        let q = q_closed_form(&m, 0.01).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn q_out_of_range_at_huge_dt() {
        let err = q_closed_form(&mkt(0.0), 1e4).unwrap_err();
        assert_eq!(err.name(), "QOutOfRange");
    }

    #[test]
    fn replication_q_approaches_closed_form_linearly_in_dt() {
        let m = mkt(0.1);
        let r1 = risk_neutral_prob(&m, 0.01).unwrap().residual;
        let r2 = risk_neutral_prob(&m, 0.005).unwrap().residual;
        assert!(r2 <= r1 / 1.5, "residuals {r1}, {r2}");
    }

    #[test]
    fn q_representation_residual_is_noise_level() {
        // The closed form and the market-price-of-risk representation are
        // the same expression algebraically.
        for &c in &[0.0, 0.1] {
            let m = mkt(c);
            for &dt in &[1e-2, 5e-3, 2.5e-3, 1e-4] {
                let r = validate_q_representation(&m, dt).unwrap();
                assert!(r < 1e-12, "residual {r} at c={c}, dt={dt}");
                assert!(r < 10.0 * dt);
            }
        }
    }

    #[test]
    fn singular_when_adjusted_vols_collide() {
        // sigma - v + c(mu - m) = 0 at c = 5 with these parameters.
        let m = LatticeMarket::new(0.05, 0.1, 0.03, 0.2, 5.0, 100.0, 50.0).unwrap();
        let err = replication_weights(&m, 1e-4, CostForm::Linearized).unwrap_err();
        assert_eq!(err.name(), "SingularReplication");
    }
}
