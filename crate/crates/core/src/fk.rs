//! Monte Carlo estimator of the stochastic representation
//!
//! ```text
//! U(t, x) = E[ integral_t^T phi(t,s) h(s, Z_s) ds + phi(t,T) g(Z_T) ],
//! dZ = lambda(s, Z) Z ds + rho(s, Z) Z dW,   Z_t = x,
//! phi(t, s) = exp(-integral_t^s lambda(u, Z_u) du),
//! ```
//!
//! which is the probabilistic counterpart of the backward solver in
//! [`crate::pde`]. Paths evolve in log-space with the Ito-corrected drift
//! `lambda - rho^2/2`; both integrals use the trapezoid rule on the path.
//! Accumulation uses pairwise summation so the estimate is bit-identical
//! regardless of how path blocks are scheduled.

use crate::error::PricingError;
use crate::math::pairwise_sum;
use crate::pde::{
    augmented_vol, cost_discount_rate, pde_residual_region, solve_pde, CoefFn, GridSpec,
    PayoffFn, PdeProblem,
};
use crate::rng::{path_rng, standard_normal};
use crate::Result;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// The stochastic-representation problem: coefficients of the auxiliary
/// diffusion, the source, the payoff, and the time window.
#[derive(Clone)]
pub struct FkProblem {
    pub lambda_fn: CoefFn,
    pub rho_fn: CoefFn,
    pub source_fn: CoefFn,
    pub payoff: PayoffFn,
    pub start_time: f64,
    pub start_x: f64,
    pub horizon: f64,
}

impl FkProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > self.start_time) {
            return Err(PricingError::InvalidParameter(format!(
                "horizon {} must exceed start time {}",
                self.horizon, self.start_time
            )));
        }
        if !(self.start_x > 0.0) {
            return Err(PricingError::InvalidParameter(format!(
                "start_x must be > 0, got {}",
                self.start_x
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate with its sampling error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

/// One path's discounted payoff-plus-source value. `sign` flips every
/// Gaussian increment (antithetic partner).
fn path_value(problem: &FkProblem, n_steps: usize, rng_seed: (u64, u64), sign: f64) -> Result<f64> {
    let mut rng = path_rng(rng_seed.0, rng_seed.1);
    let dt = (problem.horizon - problem.start_time) / n_steps as f64;
    let mut y = problem.start_x.ln();
    let mut t = problem.start_time;

    let eval = |t: f64, x: f64| -> Result<(f64, f64, f64)> {
        let lam = (problem.lambda_fn)(t, x);
        let rho = (problem.rho_fn)(t, x);
        let h = (problem.source_fn)(t, x);
        if !(lam.is_finite() && rho.is_finite() && h.is_finite()) {
            return Err(PricingError::NonFinitePath { context: "fk coefficients", t, x });
        }
        Ok((lam, rho, h))
    };

    let (mut lam, mut rho, mut h) = eval(t, problem.start_x)?;
    let mut discount_int = 0.0; // integral of lambda, trapezoid
    let mut source_int = 0.0; // integral of phi * h, trapezoid
    let mut phi = 1.0;

    for _ in 0..n_steps {
        let z = sign * standard_normal(&mut rng);
        y += (lam - 0.5 * rho * rho) * dt + rho * dt.sqrt() * z;
        t += dt;
        if !y.is_finite() {
            return Err(PricingError::NonFinitePath { context: "fk log-state", t, x: y });
        }
        let x = y.exp();
        let (lam2, rho2, h2) = eval(t, x)?;
        discount_int += 0.5 * (lam + lam2) * dt;
        let phi2 = (-discount_int).exp();
        source_int += 0.5 * (phi * h + phi2 * h2) * dt;
        (lam, rho, h) = (lam2, rho2, h2);
        phi = phi2;
    }

    Ok(source_int + phi * (problem.payoff)(y.exp()))
}

/// Estimate the representation by simulation. Path `i` owns substream
/// `(seed, i)`; with `antithetic` each path averages its own increments with
/// their sign-flipped partner, leaving the estimator's expectation unchanged.
pub fn fk_price_with(
    problem: &FkProblem,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    antithetic: bool,
) -> Result<McResult> {
    problem.validate()?;
    if n_paths < 2 || n_steps < 1 {
        return Err(PricingError::InvalidParameter(format!(
            "need n_paths >= 2 and n_steps >= 1, got {n_paths}, {n_steps}"
        )));
    }
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let v = path_value(problem, n_steps, (seed, i as u64), 1.0)?;
            if antithetic {
                let w = path_value(problem, n_steps, (seed, i as u64), -1.0)?;
                Ok(0.5 * (v + w))
            } else {
                Ok(v)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = n_paths as f64;
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(McResult {
        estimate: mean,
        std_error: (var / n).sqrt(),
        n_paths,
        n_steps,
        seed,
    })
}

/// [`fk_price_with`] without antithetics.
pub fn fk_price(problem: &FkProblem, n_paths: usize, n_steps: usize, seed: u64) -> Result<McResult> {
    fk_price_with(problem, n_paths, n_steps, seed, false)
}

/// Build the stochastic representation of a backward problem: the diffusion
/// coefficients are the same cost-adjusted `(lambda, rho)` the grid solver
/// uses. Saturated or negative-variance cost loadings surface as NaN and are
/// caught per path as `NonFinitePath`.
pub fn fk_from_pde(problem: &PdeProblem, start_time: f64, start_x: f64) -> FkProblem {
    let rate = problem.rate.clone();
    let vol = problem.vol.clone();
    let (dc, gc, bc) = (
        problem.costs.delta_cost.clone(),
        problem.costs.gamma_cost.clone(),
        problem.costs.bond_cost.clone(),
    );
    let lambda_fn: CoefFn = {
        let (rate, dc, bc) = (rate.clone(), dc.clone(), bc.clone());
        Arc::new(move |t, x| {
            cost_discount_rate(rate(t, x), dc(t, x), bc(t, x)).unwrap_or(f64::NAN)
        })
    };
    let rho_fn: CoefFn = {
        let (rate, dc, bc) = (rate, dc, bc);
        Arc::new(move |t, x| {
            match cost_discount_rate(rate(t, x), dc(t, x), bc(t, x)) {
                Ok(lam) => augmented_vol(vol(t, x), lam, gc(t, x)).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            }
        })
    };
    FkProblem {
        lambda_fn,
        rho_fn,
        source_fn: problem.costs.consumption.clone(),
        payoff: problem.payoff.clone(),
        start_time,
        start_x,
        horizon: problem.maturity,
    }
}

/// Agreement report between the two solution representations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkPdeComparison {
    pub mc: McResult,
    pub pde_value: f64,
    pub abs_diff: f64,
    /// Three standard errors; agreement means `abs_diff <= band`.
    pub band: f64,
    /// Interior residual of the grid solution, away from maturity.
    pub pde_residual: f64,
}

/// Solve the same problem both ways and report the discrepancy at
/// `(0, start_x)`.
pub fn fk_vs_pde(
    problem: &PdeProblem,
    grid: &GridSpec,
    start_x: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<FkPdeComparison> {
    let sol = solve_pde(problem, grid)?;
    let pde_value = sol.value_at(start_x);
    let fk = fk_from_pde(problem, 0.0, start_x);
    let mc = fk_price(&fk, n_paths, n_steps, seed)?;
    // Residual diagnostics stay away from the terminal kink and the edges.
    let (lo, hi) = (sol.space[0], sol.space[sol.space.len() - 1]);
    let (x_lo, x_hi) = (lo * (hi / lo).powf(0.25), lo * (hi / lo).powf(0.75));
    let resid = pde_residual_region(&sol, problem, 0.75 * problem.maturity, x_lo, x_hi)?;
    Ok(FkPdeComparison {
        mc,
        pde_value,
        abs_diff: (mc.estimate - pde_value).abs(),
        band: 3.0 * mc.std_error,
        pde_residual: resid,
    })
}
