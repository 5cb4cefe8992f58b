//! Backward parabolic solver for the cost-adjusted pricing equation
//!
//! ```text
//! U_t + lambda(t,x) x U_x + 1/2 rho(t,x)^2 x^2 U_xx - lambda(t,x) U + h(t,x) = 0,
//! U(T, x) = g(x),
//! ```
//!
//! where `lambda = r (1 - Psi)/(1 - Delta)` is the cost-adjusted discount
//! rate and `rho = sqrt(1 + lambda*Gamma) * sigma` the augmented volatility.
//!
//! Scheme: theta-method on a log-uniform space grid, theta = 1/2 with two
//! fully implicit startup steps to damp payoff-kink oscillation, coefficients
//! at the time-slice midpoint, tridiagonal solves by direct elimination.
//! Lower boundary evolves the payoff's small-x limit by the exact
//! zero-diffusion step; upper boundary imposes zero second derivative in x.

use crate::error::PricingError;
use crate::Result;
use serde::Serialize;
use std::sync::Arc;

/// A coefficient of the equation as a function of (t, x).
pub type CoefFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Terminal payoff as a function of x.
pub type PayoffFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Constant coefficient helper.
pub fn coef_const(v: f64) -> CoefFn {
    Arc::new(move |_, _| v)
}

/// Delta-, gamma- and bond-cost loadings plus the consumption source.
#[derive(Clone)]
pub struct CostQuadruplet {
    /// Delta-cost, in [0, 1).
    pub delta_cost: CoefFn,
    /// Gamma-cost, >= 0.
    pub gamma_cost: CoefFn,
    /// Bond-cost, in [0, 1).
    pub bond_cost: CoefFn,
    /// Consumption source rate.
    pub consumption: CoefFn,
}

impl CostQuadruplet {
    /// No costs, no consumption.
    pub fn none() -> Self {
        CostQuadruplet {
            delta_cost: coef_const(0.0),
            gamma_cost: coef_const(0.0),
            bond_cost: coef_const(0.0),
            consumption: coef_const(0.0),
        }
    }

    pub fn constant(delta: f64, gamma: f64, bond: f64, consumption: f64) -> Self {
        CostQuadruplet {
            delta_cost: coef_const(delta),
            gamma_cost: coef_const(gamma),
            bond_cost: coef_const(bond),
            consumption: coef_const(consumption),
        }
    }
}

/// The full backward problem.
#[derive(Clone)]
pub struct PdeProblem {
    pub rate: CoefFn,
    pub vol: CoefFn,
    pub costs: CostQuadruplet,
    pub payoff: PayoffFn,
    pub maturity: f64,
}

/// Cost-adjusted discount rate `lambda = r (1 - psi) / (1 - delta)`.
pub fn cost_discount_rate(r: f64, delta: f64, psi: f64) -> Result<f64> {
    if delta >= 1.0 - 1e-12 {
        return Err(PricingError::DeltaCostSaturated { delta });
    }
    Ok(r * (1.0 - psi) / (1.0 - delta))
}

/// Augmented volatility `rho = sqrt(1 + lambda*gamma) * sigma`.
pub fn augmented_vol(sigma: f64, lambda: f64, gamma: f64) -> Result<f64> {
    let aug = 1.0 + lambda * gamma;
    if aug < 0.0 {
        return Err(PricingError::NegativeVarianceAugmentation { value: aug });
    }
    Ok(aug.sqrt() * sigma)
}

/// Opportunity cost of the hedged position:
/// `kappa = delta/(1-delta) * (1-psi) * r * portfolio_value`.
pub fn opportunity_cost(delta: f64, psi: f64, r: f64, portfolio_value: f64) -> Result<f64> {
    if delta >= 1.0 - 1e-12 {
        return Err(PricingError::DeltaCostSaturated { delta });
    }
    Ok(delta / (1.0 - delta) * (1.0 - psi) * r * portfolio_value)
}

/// Grid geometry: node counts and the price-domain bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_time: usize,
    pub n_space: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl GridSpec {
    pub fn new(n_time: usize, n_space: usize, x_min: f64, x_max: f64) -> Result<Self> {
        let min = n_time.min(n_space);
        if min < 3 {
            return Err(PricingError::GridTooCoarse { min: 3, got: min });
        }
        if !(x_min > 0.0 && x_max > x_min) {
            return Err(PricingError::InvalidParameter(format!(
                "need 0 < x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(GridSpec { n_time, n_space, x_min, x_max })
    }

    /// Domain centered on `spot`, `half_width_sd` standard deviations wide in
    /// log-price.
    pub fn around(
        spot: f64,
        sigma: f64,
        maturity: f64,
        half_width_sd: f64,
        n_time: usize,
        n_space: usize,
    ) -> Result<Self> {
        let w = half_width_sd * sigma * maturity.sqrt();
        GridSpec::new(n_time, n_space, spot * (-w).exp(), spot * w.exp())
    }
}

/// Scheme metadata carried with a solution surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeMeta {
    pub scheme: &'static str,
    pub boundary: &'static str,
    pub n_time: usize,
    pub n_space: usize,
}

/// Solution surface: `values[i][j]` at time `times[i]`, price `space[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSolution {
    pub times: Vec<f64>,
    pub space: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub metadata: SchemeMeta,
}

impl GridSolution {
    /// Value at `(times[0], x)` by linear interpolation in log-price.
    pub fn value_at(&self, x: f64) -> f64 {
        self.value_at_slice(0, x)
    }

    /// Value at `(times[i], x)` by linear interpolation in log-price.
    pub fn value_at_slice(&self, i: usize, x: f64) -> f64 {
        let y = x.ln();
        let (y0, y1) = (self.space[0].ln(), self.space[self.space.len() - 1].ln());
        let dy = (y1 - y0) / (self.space.len() - 1) as f64;
        let pos = ((y - y0) / dy).clamp(0.0, (self.space.len() - 1) as f64);
        let j = (pos.floor() as usize).min(self.space.len() - 2);
        let w = pos - j as f64;
        (1.0 - w) * self.values[i][j] + w * self.values[i][j + 1]
    }

    /// One row per time slice, columns = space nodes; a header row carries
    /// the space grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("t");
        for x in &self.space {
            out.push_str(&format!(",{x:.17e}"));
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t:.17e}"));
            for v in row {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Thomas elimination for a tridiagonal system; `sub[0]` and
/// `sup[n-1]` are ignored. Panics on zero pivots (the scheme's matrices are
/// strictly diagonally dominant).
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut scratch = vec![0.0; n];
    let mut pivot = diag[0];
    rhs[0] /= pivot;
    for i in 1..n {
        scratch[i] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i] * scratch[i];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

struct SliceCoefs {
    lambda: Vec<f64>,
    rho: Vec<f64>,
    source: Vec<f64>,
}

fn eval_coefs(problem: &PdeProblem, t: f64, space: &[f64]) -> Result<SliceCoefs> {
    let n = space.len();
    let mut c = SliceCoefs { lambda: vec![0.0; n], rho: vec![0.0; n], source: vec![0.0; n] };
    for (j, &x) in space.iter().enumerate() {
        let r = (problem.rate)(t, x);
        let sigma = (problem.vol)(t, x);
        let delta = (problem.costs.delta_cost)(t, x);
        let gamma = (problem.costs.gamma_cost)(t, x);
        let psi = (problem.costs.bond_cost)(t, x);
        let h = (problem.costs.consumption)(t, x);
        let lambda = cost_discount_rate(r, delta, psi)?;
        let rho = augmented_vol(sigma, lambda, gamma)?;
        if !(lambda.is_finite() && rho.is_finite() && h.is_finite()) {
            return Err(PricingError::NonFinitePath { context: "pde coefficients", t, x });
        }
        c.lambda[j] = lambda;
        c.rho[j] = rho;
        c.source[j] = h;
    }
    Ok(c)
}

/// Spatial operator applied to one slice, log-space differences. The last
/// row uses the zero-gamma substitution `U_yy = U_y` (exact for solutions
/// linear in x), keeping the stencil two-point and one-sided.
fn apply_operator(c: &SliceCoefs, v: &[f64], dy: f64, out: &mut [f64]) {
    let n = v.len();
    for j in 1..n - 1 {
        let d = 0.5 * c.rho[j] * c.rho[j];
        let a = c.lambda[j] - d;
        out[j] = a * (v[j + 1] - v[j - 1]) / (2.0 * dy)
            + d * (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dy * dy)
            - c.lambda[j] * v[j];
    }
    let l = c.lambda[n - 1];
    out[n - 1] = l * (v[n - 1] - v[n - 2]) / dy - l * v[n - 1];
    out[0] = 0.0; // boundary row handled by the exact zero-diffusion step
}

/// Number of fully implicit startup steps before Crank–Nicolson takes over.
const RANNACHER_STEPS: usize = 2;

/// Solve the backward problem on the given grid.
pub fn solve_pde(problem: &PdeProblem, grid: &GridSpec) -> Result<GridSolution> {
    if !(problem.maturity > 0.0) {
        return Err(PricingError::InvalidParameter(format!(
            "maturity must be > 0, got {}",
            problem.maturity
        )));
    }
    let (nt, ns) = (grid.n_time, grid.n_space);
    let min = nt.min(ns);
    if min < 3 {
        return Err(PricingError::GridTooCoarse { min: 3, got: min });
    }
    let (y0, y1) = (grid.x_min.ln(), grid.x_max.ln());
    let dy = (y1 - y0) / (ns - 1) as f64;
    let space: Vec<f64> = (0..ns).map(|j| (y0 + j as f64 * dy).exp()).collect();
    let times: Vec<f64> =
        (0..nt).map(|i| problem.maturity * i as f64 / (nt - 1) as f64).collect();

    let mut values = vec![Vec::new(); nt];
    values[nt - 1] = space.iter().map(|&x| (problem.payoff)(x)).collect();

    let mut sub = vec![0.0; ns];
    let mut diag = vec![0.0; ns];
    let mut sup = vec![0.0; ns];
    let mut rhs = vec![0.0; ns];
    let mut lv = vec![0.0; ns];

    // March backward: step k computes slice n from slice n+1.
    for (k, n) in (0..nt - 1).rev().enumerate() {
        let (t_lo, t_hi) = (times[n], times[n + 1]);
        let dt = t_hi - t_lo;
        let theta = if k < RANNACHER_STEPS { 1.0 } else { 0.5 };
        let t_eval = if theta == 1.0 { t_lo } else { 0.5 * (t_lo + t_hi) };
        let c = eval_coefs(problem, t_eval, &space)?;
        let v_next = values[n + 1].clone();
        apply_operator(&c, &v_next, dy, &mut lv);

        for j in 1..ns - 1 {
            let d = 0.5 * c.rho[j] * c.rho[j];
            let a = c.lambda[j] - d;
            let l_sub = -a / (2.0 * dy) + d / (dy * dy);
            let l_diag = -2.0 * d / (dy * dy) - c.lambda[j];
            let l_sup = a / (2.0 * dy) + d / (dy * dy);
            sub[j] = -dt * theta * l_sub;
            diag[j] = 1.0 - dt * theta * l_diag;
            sup[j] = -dt * theta * l_sup;
            rhs[j] = v_next[j] + dt * (1.0 - theta) * lv[j] + dt * c.source[j];
        }

        // Lower edge: exact step of U_t - lambda U + h = 0.
        let (l0, h0) = (c.lambda[0], c.source[0]);
        diag[0] = 1.0;
        sup[0] = 0.0;
        rhs[0] = if l0.abs() > 1e-300 {
            let decay = (-l0 * dt).exp();
            decay * v_next[0] + h0 * (1.0 - decay) / l0
        } else {
            v_next[0] + h0 * dt
        };

        // Upper edge: zero-gamma row, L = lambda (U_y - U).
        let l_top = c.lambda[ns - 1];
        sub[ns - 1] = dt * theta * l_top / dy;
        diag[ns - 1] = 1.0 - dt * theta * (l_top / dy - l_top);
        rhs[ns - 1] = v_next[ns - 1] + dt * (1.0 - theta) * lv[ns - 1] + dt * c.source[ns - 1];

        solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        for v in &rhs {
            if !v.is_finite() {
                return Err(PricingError::NonFinitePath {
                    context: "pde solution slice",
                    t: t_lo,
                    x: f64::NAN,
                });
            }
        }
        values[n] = rhs.clone();
    }

    Ok(GridSolution {
        times,
        space,
        values,
        metadata: SchemeMeta {
            scheme: "theta(1/2) log-space, 2 implicit startup steps",
            boundary: "lower: exact zero-diffusion step; upper: zero gamma",
            n_time: nt,
            n_space: ns,
        },
    })
}

/// Max |residual| of the equation on interior grid points of the surface,
/// restricted to `t <= t_max` and `x in [x_lo, x_hi]`. Central differences
/// in both directions.
pub fn pde_residual_region(
    solution: &GridSolution,
    problem: &PdeProblem,
    t_max: f64,
    x_lo: f64,
    x_hi: f64,
) -> Result<f64> {
    let (nt, ns) = (solution.times.len(), solution.space.len());
    let dy = (solution.space[ns - 1].ln() - solution.space[0].ln()) / (ns - 1) as f64;
    let mut worst: f64 = 0.0;
    for i in 1..nt - 1 {
        let t = solution.times[i];
        if t > t_max {
            continue;
        }
        let c = eval_coefs(problem, t, &solution.space)?;
        let dt2 = solution.times[i + 1] - solution.times[i - 1];
        for j in 1..ns - 1 {
            let x = solution.space[j];
            if x < x_lo || x > x_hi {
                continue;
            }
            let u = solution.values[i][j];
            let u_t = (solution.values[i + 1][j] - solution.values[i - 1][j]) / dt2;
            let u_y = (solution.values[i][j + 1] - solution.values[i][j - 1]) / (2.0 * dy);
            let u_yy = (solution.values[i][j + 1] - 2.0 * u + solution.values[i][j - 1])
                / (dy * dy);
            let u_x = u_y / x;
            let u_xx = (u_yy - u_y) / (x * x);
            let resid = u_t + c.lambda[j] * x * u_x + 0.5 * c.rho[j] * c.rho[j] * x * x * u_xx
                - c.lambda[j] * u
                + c.source[j];
            worst = worst.max(resid.abs());
        }
    }
    Ok(worst)
}

/// [`pde_residual_region`] over the whole interior.
pub fn pde_residual(solution: &GridSolution, problem: &PdeProblem) -> Result<f64> {
    pde_residual_region(solution, problem, f64::INFINITY, 0.0, f64::INFINITY)
}
