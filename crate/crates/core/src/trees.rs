//! Discrete pricing trees and their geometric-Brownian-motion limits.
//!
//! Three step constructions live here:
//! - the general heterogeneous-belief binomial step, parameterized by a
//!   trader's `(g, v, gamma, delta, sigma)` view;
//! - the symmetric step with probability tilt `(mu - sigma^2/2) / (2 sigma)`
//!   (or the plain `mu / (2 sigma)` tilt), which is the two-branch skeleton
//!   of the cost tree;
//! - the four-branch quadrinomial step in which a trader pays transaction
//!   rate `c > 1` on a fraction `eps` of moves.
//!
//! Effective drift and volatility of the costed limit come from exact
//! discrete moment matching of the four-branch step; a simpler closed-form
//! shortcut is kept alongside as a diagnostic because the two disagree.

use crate::error::PricingError;
use crate::rng::{path_rng, standard_normal};
use crate::Result;
use rayon::prelude::*;
use serde::Serialize;

/// One trader's view of a single asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentView {
    /// Annualized drift, derived as `prob_base*up_drift + (1-prob_base)*down_drift`.
    pub drift: f64,
    /// Annualized volatility, > 0.
    pub vol: f64,
    /// Base up-probability `g` in (0,1).
    pub prob_base: f64,
    /// Probability tilt per sqrt(year); distinct from any volatility.
    pub prob_tilt: f64,
    /// Drift attached to up moves.
    pub up_drift: f64,
    /// Drift attached to down moves.
    pub down_drift: f64,
}

impl AgentView {
    pub fn new(
        vol: f64,
        prob_base: f64,
        prob_tilt: f64,
        up_drift: f64,
        down_drift: f64,
    ) -> Result<Self> {
        if !(vol > 0.0) {
            return Err(PricingError::InvalidParameter(format!("vol must be > 0, got {vol}")));
        }
        if !(prob_base > 0.0 && prob_base < 1.0) {
            return Err(PricingError::InvalidParameter(format!(
                "prob_base must lie in (0,1), got {prob_base}"
            )));
        }
        Ok(AgentView {
            drift: prob_base * up_drift + (1.0 - prob_base) * down_drift,
            vol,
            prob_base,
            prob_tilt,
            up_drift,
            down_drift,
        })
    }

    /// Symmetric view: `g = 1/2`, equal up/down drifts, tilt chosen so the
    /// step's mean matches `1 + drift*dt`.
    pub fn from_drift_vol(drift: f64, vol: f64) -> Result<Self> {
        let tilt = (drift - 0.5 * vol * vol) / (2.0 * vol);
        AgentView::new(vol, 0.5, tilt, drift, drift)
    }
}

/// One binomial step: up/down factors and the up probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeStepParams {
    pub p_up: f64,
    pub up_factor: f64,
    pub down_factor: f64,
    pub dt: f64,
}

impl TreeStepParams {
    fn checked(p_up: f64, up_factor: f64, down_factor: f64, dt: f64) -> Result<Self> {
        if !(p_up > 0.0 && p_up < 1.0) || !(down_factor > 0.0) || !(down_factor < 1.0 && up_factor > 1.0) {
            return Err(PricingError::StepTooCoarse { dt, p_up, down_factor });
        }
        Ok(TreeStepParams { p_up, up_factor, down_factor, dt })
    }
}

/// Which probability tilt the symmetric step uses. The two conventions agree
/// only when `mu = sigma^2 / 2`; both are exposed rather than reconciled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TiltConvention {
    /// Tilt `(mu - sigma^2/2) / (2 sigma)` with factors `1 +/- sigma*sqrt(dt) + sigma^2 dt / 2`.
    ItoCorrected,
    /// Tilt `mu / (2 sigma)` with factors `1 +/- sigma*sqrt(dt)`.
    Plain,
}

/// Binomial step from a full heterogeneous view:
/// `p = g + v sqrt(dt)`,
/// `u = 1 + gamma dt + sqrt((1-p)/p) sigma sqrt(dt)`,
/// `d = 1 + delta dt - sqrt(p/(1-p)) sigma sqrt(dt)`.
pub fn step_params(view: &AgentView, dt: f64) -> Result<TreeStepParams> {
    if !(dt > 0.0) {
        return Err(PricingError::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let sdt = dt.sqrt();
    let p = view.prob_base + view.prob_tilt * sdt;
    if !(p > 0.0 && p < 1.0) {
        return Err(PricingError::StepTooCoarse { dt, p_up: p, down_factor: f64::NAN });
    }
    let u = 1.0 + view.up_drift * dt + ((1.0 - p) / p).sqrt() * view.vol * sdt;
    let d = 1.0 + view.down_drift * dt - (p / (1.0 - p)).sqrt() * view.vol * sdt;
    TreeStepParams::checked(p, u, d, dt)
}

/// Symmetric binomial step driven by `(mu, sigma)` only.
pub fn step_params_symmetric(
    mu: f64,
    sigma: f64,
    dt: f64,
    tilt: TiltConvention,
) -> Result<TreeStepParams> {
    if !(sigma > 0.0) {
        return Err(PricingError::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if !(dt > 0.0) {
        return Err(PricingError::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let sdt = dt.sqrt();
    match tilt {
        TiltConvention::ItoCorrected => {
            let p = 0.5 + (mu - 0.5 * sigma * sigma) / (2.0 * sigma) * sdt;
            let convexity = 0.5 * sigma * sigma * dt;
            let u = 1.0 + sigma * sdt + convexity;
            let d = 1.0 - sigma * sdt + convexity;
            TreeStepParams::checked(p, u, d, dt)
        }
        TiltConvention::Plain => {
            let p = 0.5 + mu / (2.0 * sigma) * sdt;
            let u = 1.0 + sigma * sdt;
            let d = 1.0 - sigma * sdt;
            TreeStepParams::checked(p, u, d, dt)
        }
    }
}

/// Step whose first two gross-return moments match `1 + mu dt` and
/// `1 + (2 mu + sigma^2) dt`: the mean is matched exactly and the second
/// moment to O(dt^2).
pub fn moment_match_step(mu: f64, sigma: f64, dt: f64) -> Result<TreeStepParams> {
    step_params_symmetric(mu, sigma, dt, TiltConvention::ItoCorrected)
}

/// Residuals of the two moment conditions for a given step.
pub fn moment_residuals(step: &TreeStepParams, mu: f64, sigma: f64) -> (f64, f64) {
    let (p, u, d, dt) = (step.p_up, step.up_factor, step.down_factor, step.dt);
    let first = u * p + d * (1.0 - p) - (1.0 + mu * dt);
    let second = u * u * p + d * d * (1.0 - p) - (1.0 + (2.0 * mu + sigma * sigma) * dt);
    (first, second)
}

/// Shortcut effective parameters, kept as a diagnostic next to the exact
/// moment-matched ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxMoments {
    pub eff_drift: f64,
    pub eff_vol: f64,
}

/// A trader's view plus transaction rate and mixing weight, with the derived
/// effective drift/volatility of the costed limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostedView {
    pub base: AgentView,
    /// Transaction rate `c`, > 1 (c = 1 disables the cost branches).
    pub trans_rate: f64,
    /// Probability mass `eps` routed through the cost branches, in (0,1).
    pub mix: f64,
    /// Effective drift from exact moment matching of the four-branch step.
    pub eff_drift: f64,
    /// Effective volatility from exact moment matching.
    pub eff_vol: f64,
    /// Closed-form shortcut values, for comparison.
    pub approx: ApproxMoments,
}

impl CostedView {
    pub fn new(drift: f64, vol: f64, trans_rate: f64, mix: f64) -> Result<Self> {
        if !(trans_rate >= 1.0) {
            return Err(PricingError::InvalidParameter(format!(
                "trans_rate must be >= 1, got {trans_rate}"
            )));
        }
        if !(mix >= 0.0 && mix < 1.0) {
            return Err(PricingError::InvalidParameter(format!(
                "mix must lie in [0,1), got {mix}"
            )));
        }
        let base = AgentView::from_drift_vol(drift, vol)?;
        let (c, eps, s2) = (trans_rate, mix, vol * vol);
        // Exact one-step moments of the four-branch step: the sqrt(dt) parts
        // cancel against the probability tilt, leaving
        //   E[R]   = 1 + [ (mu - s2/2)(1 + (c-1)eps) + s2/2 (1 + (c^2-1)eps) ] dt  (exact)
        //   Var[R] =       s2 (1 + (c^2-1)eps) dt + O(dt^2).
        let eff_drift = (drift - 0.5 * s2) * (1.0 + (c - 1.0) * eps)
            + 0.5 * s2 * (1.0 + (c * c - 1.0) * eps);
        let eff_vol = (s2 * (1.0 + (c * c - 1.0) * eps)).sqrt();
        let approx = ApproxMoments {
            eff_drift: drift + 0.5 * s2 * c * (c - 1.0) * eps,
            eff_vol: (s2 * (1.0 + (c - 1.0) * eps)).sqrt(),
        };
        Ok(CostedView { base, trans_rate, mix, eff_drift, eff_vol, approx })
    }
}

/// One four-branch step of the cost tree: gross-return factors and their
/// probabilities. Probabilities sum to 1 exactly for any `(p, eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadrinomialStep {
    pub factors: [f64; 4],
    pub probs: [f64; 4],
    pub dt: f64,
}

impl QuadrinomialStep {
    /// Branches: costed up, plain up, plain down, costed down.
    pub fn new(view: &CostedView, dt: f64) -> Result<Self> {
        let (mu, sigma) = (view.base.drift, view.base.vol);
        let (c, eps) = (view.trans_rate, view.mix);
        let base = step_params_symmetric(mu, sigma, dt, TiltConvention::ItoCorrected)?;
        let p = base.p_up;
        let sdt = dt.sqrt();
        let cs = c * sigma;
        let factors = [
            1.0 + cs * sdt + 0.5 * cs * cs * dt,
            1.0 + sigma * sdt + 0.5 * sigma * sigma * dt,
            1.0 - sigma * sdt + 0.5 * sigma * sigma * dt,
            1.0 - cs * sdt + 0.5 * cs * cs * dt,
        ];
        // 1 - (a + b + c) for the last slot keeps the sum exactly 1.0.
        let p_cu = eps * p;
        let p_u = (1.0 - eps) * p;
        let p_d = (1.0 - eps) * (1.0 - p);
        let p_cd = 1.0 - p_cu - p_u - p_d;
        if factors[3] <= 0.0 {
            return Err(PricingError::StepTooCoarse { dt, p_up: p, down_factor: factors[3] });
        }
        Ok(QuadrinomialStep { factors, probs: [p_cu, p_u, p_d, p_cd], dt })
    }

    /// Exact mean and variance of the one-step gross return.
    pub fn exact_moments(&self) -> (f64, f64) {
        let mean: f64 = self.factors.iter().zip(&self.probs).map(|(f, p)| f * p).sum();
        let second: f64 = self.factors.iter().zip(&self.probs).map(|(f, p)| f * f * p).sum();
        (mean, second - mean * mean)
    }
}

/// Parameters of a geometric Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbmParams {
    pub drift: f64,
    pub vol: f64,
    pub spot: f64,
}

impl GbmParams {
    pub fn new(drift: f64, vol: f64, spot: f64) -> Result<Self> {
        if !(vol > 0.0 && spot > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "need vol > 0 and spot > 0, got vol={vol}, spot={spot}"
            )));
        }
        Ok(GbmParams { drift, vol, spot })
    }
}

/// Continuous-time limit of the costed tree, from exact moment matching.
pub fn costed_gbm_limit(view: &CostedView, spot: f64) -> Result<GbmParams> {
    GbmParams::new(view.eff_drift, view.eff_vol, spot)
}

/// Lognormal terminal moments: `E[S_T] = spot e^{drift T}` and
/// `Var[S_T] = spot^2 e^{2 drift T} (e^{vol^2 T} - 1)`.
pub fn gbm_terminal_moments(params: &GbmParams, horizon: f64) -> (f64, f64) {
    let mean = params.spot * (params.drift * horizon).exp();
    let variance = params.spot * params.spot
        * (2.0 * params.drift * horizon).exp()
        * ((params.vol * params.vol * horizon).exp() - 1.0);
    (mean, variance)
}

/// Two assets S and V driven by one shared risk factor, plus the velocity
/// transaction-cost constant. Cost exponents are `rho_s = cost_const*mu/sigma`
/// and `rho_v = cost_const*m/v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeMarket {
    pub mu: f64,
    pub sigma: f64,
    pub m: f64,
    pub v: f64,
    pub cost_const: f64,
    pub s0: f64,
    pub v0: f64,
}

impl LatticeMarket {
    pub fn new(mu: f64, sigma: f64, m: f64, v: f64, cost_const: f64, s0: f64, v0: f64) -> Result<Self> {
        if !(sigma > 0.0 && v > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "vols must be > 0, got sigma={sigma}, v={v}"
            )));
        }
        if !(s0 > 0.0 && v0 > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "spots must be > 0, got s0={s0}, v0={v0}"
            )));
        }
        if !(cost_const >= 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "cost_const must be >= 0, got {cost_const}"
            )));
        }
        Ok(LatticeMarket { mu, sigma, m, v, cost_const, s0, v0 })
    }

    /// Cost exponent on S trades.
    pub fn rho_s(&self) -> f64 {
        self.cost_const * self.mu / self.sigma
    }

    /// Cost exponent on V trades.
    pub fn rho_v(&self) -> f64 {
        self.cost_const * self.m / self.v
    }
}

/// One step of the bivariate lattice: both assets move up or down together
/// off the single shared factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BivariateStep {
    pub s_up: f64,
    pub s_dn: f64,
    pub v_up: f64,
    pub v_dn: f64,
    pub dt: f64,
}

/// Gross-return factors `1 + drift*dt +/- vol*sqrt(dt)` for both assets.
pub fn bivariate_step(mkt: &LatticeMarket, dt: f64) -> Result<BivariateStep> {
    if !(dt > 0.0) {
        return Err(PricingError::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let sdt = dt.sqrt();
    let step = BivariateStep {
        s_up: 1.0 + mkt.mu * dt + mkt.sigma * sdt,
        s_dn: 1.0 + mkt.mu * dt - mkt.sigma * sdt,
        v_up: 1.0 + mkt.m * dt + mkt.v * sdt,
        v_dn: 1.0 + mkt.m * dt - mkt.v * sdt,
        dt,
    };
    if step.s_dn <= 0.0 || step.v_dn <= 0.0 {
        return Err(PricingError::StepTooCoarse {
            dt,
            p_up: f64::NAN,
            down_factor: step.s_dn.min(step.v_dn),
        });
    }
    Ok(step)
}

/// Per-step factor distribution fed to the terminal simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDistribution {
    Binomial(TreeStepParams),
    Quadrinomial(QuadrinomialStep),
}

impl StepDistribution {
    fn sample_factor(&self, u: f64) -> f64 {
        match self {
            StepDistribution::Binomial(s) => {
                if u < s.p_up {
                    s.up_factor
                } else {
                    s.down_factor
                }
            }
            StepDistribution::Quadrinomial(s) => {
                let mut acc = 0.0;
                for i in 0..3 {
                    acc += s.probs[i];
                    if u < acc {
                        return s.factors[i];
                    }
                }
                s.factors[3]
            }
        }
    }
}

/// Simulate terminal prices: each path multiplies `steps` i.i.d. step
/// factors onto `spot`. Path `i` consumes substream `(seed, i)`, so the
/// output is independent of worker count and execution order.
pub fn simulate_terminal(
    dist: &StepDistribution,
    spot: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Vec<f64> {
    use rand::Rng;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut price = spot;
            for _ in 0..steps {
                price *= dist.sample_factor(rng.gen::<f64>());
            }
            price
        })
        .collect()
}

/// Simulate exact GBM terminal prices (lognormal sampling), same substream
/// contract as [`simulate_terminal`].
pub fn simulate_gbm_terminal(
    params: &GbmParams,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Vec<f64> {
    let drift_term = (params.drift - 0.5 * params.vol * params.vol) * horizon;
    let vol_term = params.vol * horizon.sqrt();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            params.spot * (drift_term + vol_term * standard_normal(&mut rng)).exp()
        })
        .collect()
}
