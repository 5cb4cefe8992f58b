//! Closed-form vanilla pricers.
//!
//! Three entry points share one generalized Black–Scholes kernel with
//! cost-of-carry `b`:
//! - [`bs_price`]: the standard formula (`b = r`);
//! - [`hetero_bs_price`]: Black–Scholes at the arb-cost rate
//!   `r* = (sqrt(mu1) + sqrt(mu2))^2`;
//! - [`drift_shifted_price`]: the solution of the drift-shifted pricing
//!   equation, `b = mu1 - mu2 + r`.
//!
//! Zero maturity returns intrinsic value rather than erroring.

use crate::error::PricingError;
use crate::math::norm_cdf;
use crate::rates::{arb_cost_lambdas, RateResult};
use crate::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptionKind {
    Call,
    Put,
}

/// A European vanilla contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VanillaSpec {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub vol: f64,
    pub kind: OptionKind,
}

impl VanillaSpec {
    pub fn new(
        spot: f64,
        strike: f64,
        maturity: f64,
        rate: f64,
        vol: f64,
        kind: OptionKind,
    ) -> Result<Self> {
        if !(spot > 0.0 && strike > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "spot and strike must be > 0, got {spot}, {strike}"
            )));
        }
        if !(vol > 0.0) {
            return Err(PricingError::InvalidParameter(format!("vol must be > 0, got {vol}")));
        }
        if !(maturity >= 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "maturity must be >= 0, got {maturity}"
            )));
        }
        Ok(VanillaSpec { spot, strike, maturity, rate, vol, kind })
    }

    pub fn intrinsic(&self) -> f64 {
        match self.kind {
            OptionKind::Call => (self.spot - self.strike).max(0.0),
            OptionKind::Put => (self.strike - self.spot).max(0.0),
        }
    }
}

/// Generalized Black–Scholes with carry `b`:
/// `call = e^{-rT} [S e^{bT} N(d1) - K N(d2)]`, put by parity.
pub fn generalized_bs_price(spec: &VanillaSpec, carry: f64) -> f64 {
    let (s, k, t, r, v) = (spec.spot, spec.strike, spec.maturity, spec.rate, spec.vol);
    if t == 0.0 {
        return spec.intrinsic();
    }
    let vt = v * t.sqrt();
    let d1 = ((s / k).ln() + (carry + 0.5 * v * v) * t) / vt;
    let d2 = d1 - vt;
    let df = (-r * t).exp();
    let fwd = s * (carry * t).exp();
    let call = df * (fwd * norm_cdf(d1) - k * norm_cdf(d2));
    match spec.kind {
        OptionKind::Call => call,
        OptionKind::Put => call - df * (fwd - k),
    }
}

/// Analytic delta of [`generalized_bs_price`]: `e^{(b-r)T} N(d1)` for a call.
pub fn generalized_bs_delta(spec: &VanillaSpec, carry: f64) -> f64 {
    let (s, k, t, r, v) = (spec.spot, spec.strike, spec.maturity, spec.rate, spec.vol);
    if t == 0.0 {
        return match spec.kind {
            OptionKind::Call => {
                if s > k {
                    1.0
                } else {
                    0.0
                }
            }
            OptionKind::Put => {
                if s < k {
                    -1.0
                } else {
                    0.0
                }
            }
        };
    }
    let vt = v * t.sqrt();
    let d1 = ((s / k).ln() + (carry + 0.5 * v * v) * t) / vt;
    let growth = ((carry - r) * t).exp();
    match spec.kind {
        OptionKind::Call => growth * norm_cdf(d1),
        OptionKind::Put => growth * (norm_cdf(d1) - 1.0),
    }
}

/// Standard Black–Scholes price.
pub fn bs_price(spec: &VanillaSpec) -> f64 {
    generalized_bs_price(spec, spec.rate)
}

/// Standard Black–Scholes delta.
pub fn bs_delta(spec: &VanillaSpec) -> f64 {
    generalized_bs_delta(spec, spec.rate)
}

/// Vanilla price plus the rate diagnostics that produced its discount rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeteroPrice {
    pub value: f64,
    pub rates: RateResult,
}

/// Black–Scholes under the rate implied by two heterogeneous drifts with
/// arbitrage costs on delta positions. The `rate` field of `spec` is ignored
/// and replaced by `r*`.
pub fn hetero_bs_price(mu1: f64, mu2: f64, spec: &VanillaSpec) -> Result<HeteroPrice> {
    let rates = arb_cost_lambdas(mu1, mu2)?;
    let priced = VanillaSpec { rate: rates.rate, ..*spec };
    Ok(HeteroPrice { value: bs_price(&priced), rates })
}

/// Solution of the drift-shifted pricing equation
/// `f_t + (mu1 - mu2 + r) x f_x - r f + 1/2 sigma^2 x^2 f_xx = 0`:
/// generalized Black–Scholes with carry `b = mu1 - mu2 + r`.
pub fn drift_shifted_price(mu1: f64, mu2: f64, r: f64, spec: &VanillaSpec) -> f64 {
    let priced = VanillaSpec { rate: r, ..*spec };
    generalized_bs_price(&priced, mu1 - mu2 + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(kind: OptionKind) -> VanillaSpec {
        VanillaSpec::new(100.0, 100.0, 1.0, 0.05, 0.2, kind).unwrap()
    }

    #[test]
    fn bs_canonical_value() {
        let v = bs_price(&canon(OptionKind::Call));
        assert!((v - 10.4506).abs() < 5e-4, "got {v}");
    }

    #[test]
    fn bs_intrinsic_at_expiry() {
        let spec = VanillaSpec::new(120.0, 100.0, 0.0, 0.05, 0.2, OptionKind::Call).unwrap();
        assert_eq!(bs_price(&spec), 20.0);
    }

    #[test]
    fn bs_deep_strike_limit_is_spot() {
        let spec = VanillaSpec::new(100.0, 1e-12, 1.0, 0.05, 0.2, OptionKind::Call).unwrap();
        assert!((bs_price(&spec) - 100.0).abs() < 1e-6);
    }

    #[test]
    fn put_call_parity() {
        let c = bs_price(&canon(OptionKind::Call));
        let p = bs_price(&canon(OptionKind::Put));
        let parity = 100.0 - 100.0 * (-0.05f64).exp();
        assert!((c - p - parity).abs() < 1e-12);
    }

    #[test]
    fn analytic_delta_matches_bump() {
        for kind in [OptionKind::Call, OptionKind::Put] {
            let spec = canon(kind);
            let h = 1e-5 * spec.spot;
            let up = VanillaSpec { spot: spec.spot + h, ..spec };
            let dn = VanillaSpec { spot: spec.spot - h, ..spec };
            let bump = (bs_price(&up) - bs_price(&dn)) / (2.0 * h);
            assert!((bs_delta(&spec) - bump).abs() < 1e-6);
        }
    }

    #[test]
    fn vega_nonnegative() {
        let spec = canon(OptionKind::Call);
        let up = VanillaSpec { vol: 0.21, ..spec };
        assert!(bs_price(&up) >= bs_price(&spec));
    }

    #[test]
    fn hetero_price_uses_arb_cost_rate() {
        let spec = canon(OptionKind::Call);
        let h = hetero_bs_price(0.04, 0.09, &spec).unwrap();
        let direct = bs_price(&VanillaSpec { rate: 0.25, ..spec });
        assert_eq!(h.value, direct);
        assert!((h.rates.rate - 0.25).abs() < 1e-15);
        assert!((h.value - 23.0).abs() < 0.5, "got {}", h.value);
    }

    #[test]
    fn hetero_price_symmetric_in_drifts() {
        let spec = canon(OptionKind::Call);
        let a = hetero_bs_price(0.04, 0.09, &spec).unwrap();
        let b = hetero_bs_price(0.09, 0.04, &spec).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn hetero_price_symmetric_case_rate() {
        let spec = canon(OptionKind::Call);
        let h = hetero_bs_price(0.05, 0.05, &spec).unwrap();
        let direct = bs_price(&VanillaSpec { rate: 0.2, ..spec });
        // (sqrt(mu) + sqrt(mu))^2 reproduces 4*mu only up to roundoff.
        assert!((h.value - direct).abs() < 1e-12);
    }

    #[test]
    fn drift_shift_vanishes_for_equal_drifts() {
        let spec = canon(OptionKind::Call);
        let v = drift_shifted_price(0.07, 0.07, 0.05, &spec);
        assert!((v - bs_price(&spec)).abs() < 1e-12);
    }

    #[test]
    fn drift_shift_raises_call_value() {
        let spec = canon(OptionKind::Call);
        let v = drift_shifted_price(0.08, 0.03, 0.05, &spec);
        assert!(v > bs_price(&spec));
    }

    #[test]
    fn drift_shift_intrinsic_at_expiry() {
        let spec = VanillaSpec::new(90.0, 100.0, 0.0, 0.05, 0.2, OptionKind::Put).unwrap();
        assert_eq!(drift_shifted_price(0.08, 0.03, 0.05, &spec), 10.0);
    }

    #[test]
    fn drift_shift_satisfies_its_pde() {
        // Finite-difference residual of
        // f_t + b x f_x - r f + 1/2 s^2 x^2 f_xx = 0 over a small grid of
        // (x, tau); central differences with h tuned for ~1e-6 truncation.
        let (mu1, mu2, r, sigma) = (0.08, 0.03, 0.05, 0.2);
        let b = mu1 - mu2 + r;
        let price = |s: f64, tau: f64| {
            let spec = VanillaSpec::new(s, 100.0, tau, r, sigma, OptionKind::Call).unwrap();
            drift_shifted_price(mu1, mu2, r, &spec)
        };
        for &s in &[80.0, 100.0, 125.0] {
            for &tau in &[0.25, 0.5, 1.0] {
                let (hs, ht) = (s * 2e-4, 1e-4);
                let f = price(s, tau);
                let f_t = -(price(s, tau + ht) - price(s, tau - ht)) / (2.0 * ht);
                let f_x = (price(s + hs, tau) - price(s - hs, tau)) / (2.0 * hs);
                let f_xx = (price(s + hs, tau) - 2.0 * f + price(s - hs, tau)) / (hs * hs);
                let resid = f_t + b * s * f_x - r * f + 0.5 * sigma * sigma * s * s * f_xx;
                assert!(resid.abs() < 1e-5, "residual {resid} at s={s}, tau={tau}");
            }
        }
    }
}
