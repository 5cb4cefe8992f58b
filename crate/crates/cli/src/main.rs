//! Batch front end for the pricing and simulation library.
//!
//! Each subcommand maps onto one library entry point, takes its parameters
//! as flags (or a JSON scenario file via `--scenario`), and emits a JSON
//! envelope `{schema_version, command, result}` on stdout. Tabular results
//! (grids, convergence tables) can be emitted as CSV with `--format csv`.
//! All floats are printed with 17 significant digits so reruns can be
//! compared byte for byte.
//!
//! Exit codes: 0 success, 2 usage error, 3 parameter validation error,
//! 4 computation error (the error name goes to stderr).

use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;

use arbcost::closed_form::{bs_delta, bs_price, hetero_bs_price, OptionKind, VanillaSpec};
use arbcost::fk::fk_price_with;
use arbcost::hedge::{simulate_costed_hedge, simulate_pair_arbitrage, HedgeRule};
use arbcost::lattice::{price_lattice_with, risk_neutral_prob, CostForm, LatticeClaim};
use arbcost::pde::{coef_const, solve_pde, CostQuadruplet, GridSpec, PdeProblem};
use arbcost::rates::{arb_cost_lambdas, black72_rate, solve_allocation_costed};
use arbcost::trees::LatticeMarket;
use arbcost::fk::FkProblem;
use arbcost::PricingError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const SCHEMA_VERSION: &str = "1.0";

#[derive(Parser)]
#[command(name = "arbcost", version, about = "Derivatives pricing and hedging simulation toolkit")]
struct Cli {
    /// Cap the worker thread count (default: ARBCOST_THREADS or all cores).
    /// Results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format. CSV is available only for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Read the subcommand's parameters from a JSON file instead of flags.
    #[arg(long, global = true, value_name = "FILE")]
    scenario: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Call,
    Put,
}

impl From<Kind> for OptionKind {
    fn from(k: Kind) -> OptionKind {
        match k {
            Kind::Call => OptionKind::Call,
            Kind::Put => OptionKind::Put,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostFormArg {
    Linearized,
    Exact,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    ExposureMatching,
    SignFlipped,
    Classic,
}

#[derive(Subcommand)]
enum Command {
    /// Riskless rate and cost multipliers implied by two drifts.
    Rates(RatesArgs),
    /// Roots of the wealth-allocation quadratic.
    Alloc(AllocArgs),
    /// Price a claim on the two-asset lattice with velocity costs.
    TreePrice(TreePriceArgs),
    /// Price a claim on the cost-adjusted finite-difference grid.
    PdePrice(PdePriceArgs),
    /// Price a claim by simulating the discounted-payoff representation.
    McPrice(McPriceArgs),
    /// Closed-form vanilla price and delta.
    ClosedPrice(ClosedPriceArgs),
    /// Demonstrate the deterministic pair-trade profit of a drift gap.
    ArbDemo(ArbDemoArgs),
    /// Simulate the costed delta hedge and report replication errors.
    HedgeDemo(HedgeDemoArgs),
    /// Lattice convergence table against the closed form.
    Converge(ConvergeArgs),
    /// Cross-check closed form, grid, and simulation on one problem.
    Xcheck(XcheckArgs),
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    mu2: f64,
}

#[derive(Args)]
struct AllocArgs {
    #[arg(long)]
    cy1: f64,
    #[arg(long)]
    cy2: f64,
    #[arg(long)]
    sigma: f64,
}

#[derive(Args)]
struct TreePriceArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    m: f64,
    #[arg(long)]
    v: f64,
    #[arg(long, default_value_t = 0.0)]
    cost_const: f64,
    #[arg(long)]
    s0: f64,
    #[arg(long)]
    v0: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    #[arg(long, value_enum, default_value_t = CostFormArg::Linearized)]
    cost_form: CostFormArg,
}

#[derive(Args)]
struct PdePriceArgs {
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    vol: f64,
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    #[arg(long, default_value_t = 0.0)]
    delta_cost: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_cost: f64,
    #[arg(long, default_value_t = 0.0)]
    bond_cost: f64,
    #[arg(long, default_value_t = 0.0)]
    consumption: f64,
    #[arg(long, default_value_t = 400)]
    nt: usize,
    #[arg(long, default_value_t = 400)]
    ns: usize,
    #[arg(long, default_value_t = 6.0)]
    half_width_sd: f64,
}

#[derive(Args)]
struct McPriceArgs {
    /// Discount/drift rate of the auxiliary diffusion.
    #[arg(long)]
    lambda: f64,
    /// Volatility of the auxiliary diffusion.
    #[arg(long)]
    rho: f64,
    /// Constant running source term.
    #[arg(long, default_value_t = 0.0)]
    source: f64,
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    #[arg(long)]
    paths: usize,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    antithetic: bool,
}

#[derive(Args)]
struct ClosedPriceArgs {
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long)]
    vol: f64,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    /// Discount rate. Mutually exclusive with --mu1/--mu2.
    #[arg(long, conflicts_with_all = ["mu1", "mu2"])]
    rate: Option<f64>,
    /// First drift; with --mu2, the rate is the one the drift pair implies.
    #[arg(long, requires = "mu2")]
    mu1: Option<f64>,
    #[arg(long, requires = "mu1")]
    mu2: Option<f64>,
}

#[derive(Args)]
struct ArbDemoArgs {
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    mu2: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    paths: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct HedgeDemoArgs {
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    mu2: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    paths: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = RuleArg::ExposureMatching)]
    rule: RuleArg,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    m: f64,
    #[arg(long)]
    v: f64,
    #[arg(long, default_value_t = 0.0)]
    cost_const: f64,
    #[arg(long)]
    s0: f64,
    #[arg(long)]
    v0: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    /// Comma-separated step counts, one lattice solve each.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    steps: Vec<usize>,
}

#[derive(Args)]
struct XcheckArgs {
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    vol: f64,
    #[arg(long, value_enum, default_value_t = Kind::Call)]
    kind: Kind,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    nt: usize,
    #[arg(long, default_value_t = 400)]
    ns: usize,
    /// Relative tolerance for grid vs closed form.
    #[arg(long, default_value_t = 1e-3)]
    grid_rel_tol: f64,
    /// Simulation must sit within this many standard errors of the closed form.
    #[arg(long, default_value_t = 3.0)]
    mc_k_sigma: f64,
}

enum CliError {
    Usage(String),
    Validation(String),
    Module(PricingError),
    CrossCheck(String),
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        CliError::Module(e)
    }
}

fn validate(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(msg.to_string()))
    }
}

/// JSON writer printing every float with 17 significant digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: Write + ?Sized>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

enum Output {
    Json(&'static str, serde_json::Value),
    Csv(String),
}

fn emit(out: &Output) {
    match out {
        Output::Json(command, result) => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "result": result,
            });
            let mut buf = Vec::new();
            let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
            serde::Serialize::serialize(&doc, &mut ser).expect("json serialization");
            buf.push(b'\n');
            std::io::stdout().write_all(&buf).expect("stdout");
        }
        Output::Csv(table) => {
            print!("{table}");
        }
    }
}

fn payoff_fn(kind: Kind, strike: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    match kind {
        Kind::Call => Arc::new(move |x: f64| (x - strike).max(0.0)),
        Kind::Put => Arc::new(move |x: f64| (strike - x).max(0.0)),
    }
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Rates(a) => {
            validate(a.mu1 > 0.0 && a.mu2 > 0.0, "drifts must be > 0")?;
            let r = arb_cost_lambdas(a.mu1, a.mu2)?;
            let (l1, l2) = r.lambdas.unwrap();
            Ok(Output::Json(
                "rates",
                json!({
                    "r_star": r.rate,
                    "lambda1": l1,
                    "lambda2": l2,
                    "bond_lambda": r.bond_lambda.unwrap(),
                }),
            ))
        }
        Command::Alloc(a) => {
            validate(a.sigma > 0.0, "sigma must be > 0")?;
            let sol = solve_allocation_costed(a.cy1, a.cy2, a.sigma)?;
            Ok(Output::Json("alloc", serde_json::to_value(&sol).unwrap()))
        }
        Command::TreePrice(a) => {
            validate(a.sigma > 0.0 && a.v > 0.0, "volatilities must be > 0")?;
            validate(a.s0 > 0.0 && a.v0 > 0.0 && a.strike > 0.0, "prices must be > 0")?;
            validate(a.maturity > 0.0 && a.steps >= 1, "need maturity > 0 and steps >= 1")?;
            let mkt = LatticeMarket::new(a.mu, a.sigma, a.m, a.v, a.cost_const, a.s0, a.v0)?;
            let strike = a.strike;
            let payoff: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = match a.kind {
                Kind::Call => Arc::new(move |s: f64, _| (s - strike).max(0.0)),
                Kind::Put => Arc::new(move |s: f64, _| (strike - s).max(0.0)),
            };
            let claim = LatticeClaim::new(payoff, a.maturity, a.steps)?;
            let form = match a.cost_form {
                CostFormArg::Linearized => CostForm::Linearized,
                CostFormArg::Exact => CostForm::Exact,
            };
            let price = price_lattice_with(&mkt, &claim, form)?;
            let probe = risk_neutral_prob(&mkt, price.dt).ok();
            Ok(Output::Json(
                "tree-price",
                json!({
                    "value": price.value,
                    "root_holdings": price.root_holdings,
                    "steps": price.steps,
                    "dt": price.dt,
                    "q": probe.as_ref().map(|p| p.q),
                    "q_closed_form": probe.as_ref().map(|p| p.q_closed_form),
                }),
            ))
        }
        Command::PdePrice(a) => {
            validate(a.vol > 0.0 && a.spot > 0.0 && a.strike > 0.0, "need vol, spot, strike > 0")?;
            validate(a.maturity > 0.0, "maturity must be > 0")?;
            validate(a.nt >= 3 && a.ns >= 3, "need nt >= 3 and ns >= 3")?;
            validate(a.half_width_sd > 0.0, "half_width_sd must be > 0")?;
            let problem = PdeProblem {
                rate: coef_const(a.rate),
                vol: coef_const(a.vol),
                costs: CostQuadruplet::constant(
                    a.delta_cost,
                    a.gamma_cost,
                    a.bond_cost,
                    a.consumption,
                ),
                payoff: payoff_fn(a.kind, a.strike),
                maturity: a.maturity,
            };
            let grid = GridSpec::around(a.spot, a.vol, a.maturity, a.half_width_sd, a.nt, a.ns)?;
            let sol = solve_pde(&problem, &grid)?;
            if cli.format == Format::Csv {
                return Ok(Output::Csv(sol.to_csv()));
            }
            Ok(Output::Json(
                "pde-price",
                json!({
                    "value": sol.value_at(a.spot),
                    "metadata": sol.metadata,
                    "x_min": grid.x_min,
                    "x_max": grid.x_max,
                }),
            ))
        }
        Command::McPrice(a) => {
            validate(a.rho > 0.0 && a.spot > 0.0 && a.strike > 0.0, "need rho, spot, strike > 0")?;
            validate(a.maturity > 0.0, "maturity must be > 0")?;
            validate(a.paths >= 2 && a.steps >= 1, "need paths >= 2 and steps >= 1")?;
            let problem = FkProblem {
                lambda_fn: coef_const(a.lambda),
                rho_fn: coef_const(a.rho),
                source_fn: coef_const(a.source),
                payoff: payoff_fn(a.kind, a.strike),
                start_time: 0.0,
                start_x: a.spot,
                horizon: a.maturity,
            };
            let mc = fk_price_with(&problem, a.paths, a.steps, a.seed, a.antithetic)?;
            Ok(Output::Json("mc-price", serde_json::to_value(&mc).unwrap()))
        }
        Command::ClosedPrice(a) => {
            validate(a.vol > 0.0 && a.spot > 0.0 && a.strike > 0.0, "need vol, spot, strike > 0")?;
            validate(a.maturity >= 0.0, "maturity must be >= 0")?;
            match (a.rate, a.mu1, a.mu2) {
                (Some(rate), None, None) => {
                    let spec =
                        VanillaSpec::new(a.spot, a.strike, a.maturity, rate, a.vol, a.kind.into())?;
                    Ok(Output::Json(
                        "closed-price",
                        json!({ "value": bs_price(&spec), "delta": bs_delta(&spec), "rate": rate }),
                    ))
                }
                (None, Some(mu1), Some(mu2)) => {
                    validate(mu1 > 0.0 && mu2 > 0.0, "drifts must be > 0")?;
                    let spec =
                        VanillaSpec::new(a.spot, a.strike, a.maturity, 0.0, a.vol, a.kind.into())?;
                    let hp = hetero_bs_price(mu1, mu2, &spec)?;
                    let priced = VanillaSpec { rate: hp.rates.rate, ..spec };
                    Ok(Output::Json(
                        "closed-price",
                        json!({
                            "value": hp.value,
                            "delta": bs_delta(&priced),
                            "rate": hp.rates.rate,
                            "lambdas": hp.rates.lambdas,
                        }),
                    ))
                }
                _ => Err(CliError::Usage(
                    "provide either --rate or the --mu1/--mu2 drift pair".into(),
                )),
            }
        }
        Command::ArbDemo(a) => {
            validate(a.sigma > 0.0 && a.horizon > 0.0, "need sigma > 0 and horizon > 0")?;
            validate(a.steps >= 1 && a.paths >= 1, "need steps >= 1 and paths >= 1")?;
            let s = simulate_pair_arbitrage(
                a.mu1, a.mu2, a.sigma, a.horizon, a.steps, a.paths, a.seed,
            )?;
            Ok(Output::Json(
                "arb-demo",
                json!({
                    "mean_pnl": s.mean,
                    "variance": s.variance,
                    "min": s.min,
                    "max": s.max,
                    "paths": s.paths,
                    "steps": s.steps,
                }),
            ))
        }
        Command::HedgeDemo(a) => {
            validate(a.sigma > 0.0 && a.spot > 0.0 && a.strike > 0.0, "need sigma, spot, strike > 0")?;
            validate(a.maturity > 0.0, "maturity must be > 0")?;
            validate(a.steps >= 1 && a.paths >= 2, "need steps >= 1 and paths >= 2")?;
            validate(a.mu1 > 0.0 && a.mu2 > 0.0, "drifts must be > 0")?;
            let spec = VanillaSpec::new(a.spot, a.strike, a.maturity, 0.0, a.sigma, a.kind.into())?;
            let rule = match a.rule {
                RuleArg::ExposureMatching => HedgeRule::ExposureMatching,
                RuleArg::SignFlipped => HedgeRule::SignFlipped,
                RuleArg::Classic => HedgeRule::ClassicDelta,
            };
            let s = simulate_costed_hedge(
                a.mu1, a.mu2, a.sigma, &spec, a.steps, a.paths, a.seed, rule,
            )?;
            Ok(Output::Json("hedge-demo", serde_json::to_value(&s).unwrap()))
        }
        Command::Converge(a) => {
            validate(a.sigma > 0.0 && a.v > 0.0, "volatilities must be > 0")?;
            validate(a.s0 > 0.0 && a.v0 > 0.0 && a.strike > 0.0, "prices must be > 0")?;
            validate(a.maturity > 0.0 && !a.steps.is_empty(), "need maturity > 0 and steps")?;
            validate(a.steps.iter().all(|&s| s >= 1), "step counts must be >= 1")?;
            let mkt = LatticeMarket::new(a.mu, a.sigma, a.m, a.v, a.cost_const, a.s0, a.v0)?;
            // The closed-form target exists only without velocity costs.
            let target = if a.cost_const == 0.0 {
                let r = black72_rate(a.mu, a.sigma, a.m, a.v)?;
                let spec =
                    VanillaSpec::new(a.s0, a.strike, a.maturity, r, a.sigma, a.kind.into())?;
                Some(bs_price(&spec))
            } else {
                None
            };
            let strike = a.strike;
            let mut rows = Vec::new();
            for &steps in &a.steps {
                let payoff: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = match a.kind {
                    Kind::Call => Arc::new(move |s: f64, _| (s - strike).max(0.0)),
                    Kind::Put => Arc::new(move |s: f64, _| (strike - s).max(0.0)),
                };
                let claim = LatticeClaim::new(payoff, a.maturity, steps)?;
                let price = price_lattice_with(&mkt, &claim, CostForm::Linearized)?;
                rows.push((steps, price.value, target.map(|t| (price.value - t).abs())));
            }
            if cli.format == Format::Csv {
                let mut table = String::from("steps,value,abs_error\n");
                for (steps, value, err) in &rows {
                    let err = err.map(sci).unwrap_or_default();
                    table.push_str(&format!("{steps},{},{err}\n", sci(*value)));
                }
                return Ok(Output::Csv(table));
            }
            Ok(Output::Json(
                "converge",
                json!({
                    "target": target,
                    "rows": rows
                        .iter()
                        .map(|(steps, value, err)| json!({
                            "steps": steps,
                            "value": value,
                            "abs_error": err,
                        }))
                        .collect::<Vec<_>>(),
                }),
            ))
        }
        Command::Xcheck(a) => {
            validate(a.vol > 0.0 && a.spot > 0.0 && a.strike > 0.0, "need vol, spot, strike > 0")?;
            validate(a.maturity > 0.0, "maturity must be > 0")?;
            validate(a.paths >= 2 && a.steps >= 1, "need paths >= 2 and steps >= 1")?;
            validate(a.nt >= 3 && a.ns >= 3, "need nt >= 3 and ns >= 3")?;
            validate(a.grid_rel_tol > 0.0 && a.mc_k_sigma > 0.0, "tolerances must be > 0")?;
            let spec = VanillaSpec::new(a.spot, a.strike, a.maturity, a.rate, a.vol, a.kind.into())?;
            let closed = bs_price(&spec);

            let problem = PdeProblem {
                rate: coef_const(a.rate),
                vol: coef_const(a.vol),
                costs: CostQuadruplet::none(),
                payoff: payoff_fn(a.kind, a.strike),
                maturity: a.maturity,
            };
            let grid = GridSpec::around(a.spot, a.vol, a.maturity, 6.0, a.nt, a.ns)?;
            let pde_value = solve_pde(&problem, &grid)?.value_at(a.spot);

            let fk = FkProblem {
                lambda_fn: coef_const(a.rate),
                rho_fn: coef_const(a.vol),
                source_fn: coef_const(0.0),
                payoff: payoff_fn(a.kind, a.strike),
                start_time: 0.0,
                start_x: a.spot,
                horizon: a.maturity,
            };
            let mc = fk_price_with(&fk, a.paths, a.steps, a.seed, false)?;

            let grid_rel = (pde_value - closed).abs() / closed.abs().max(1e-12);
            let mc_gap = (mc.estimate - closed).abs();
            let mc_band = a.mc_k_sigma * mc.std_error;
            let agree = grid_rel <= a.grid_rel_tol && mc_gap <= mc_band;
            let out = Output::Json(
                "xcheck",
                json!({
                    "closed_form": closed,
                    "grid": pde_value,
                    "mc": mc,
                    "grid_rel_error": grid_rel,
                    "grid_rel_tol": a.grid_rel_tol,
                    "mc_abs_gap": mc_gap,
                    "mc_band": mc_band,
                    "mc_k_sigma": a.mc_k_sigma,
                    "agree": agree,
                }),
            );
            if !agree {
                emit(&out);
                return Err(CliError::CrossCheck(format!(
                    "grid rel error {grid_rel:.3e} (tol {:.3e}), mc gap {mc_gap:.3e} (band {mc_band:.3e})",
                    a.grid_rel_tol
                )));
            }
            Ok(out)
        }
    }
}

/// Replace `--scenario FILE` with the flags spelled out in the file, so the
/// parameter block goes through exactly the same parsing and validation.
/// Unknown fields become unknown flags and are rejected.
fn expand_scenario(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--scenario") else {
        return Ok(argv);
    };
    let path = argv
        .get(pos + 1)
        .ok_or_else(|| "--scenario requires a file path".to_string())?
        .clone();
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("invalid JSON in {path}: {e}"))?;
    let obj = doc.as_object().ok_or_else(|| format!("{path}: scenario must be a JSON object"))?;

    let mut out: Vec<String> = argv[..pos].to_vec();
    out.extend(argv[pos + 2..].iter().cloned());
    for (key, value) in obj {
        if key == "schema_version" {
            match value.as_str() {
                Some(SCHEMA_VERSION) => continue,
                Some(v) => return Err(format!("unsupported schema_version {v:?}")),
                None => return Err("schema_version must be a string".into()),
            }
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            serde_json::Value::Bool(true) => out.push(flag),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::Number(n) => {
                out.push(flag);
                out.push(n.to_string());
            }
            serde_json::Value::String(s) => {
                out.push(flag);
                out.push(s.clone());
            }
            serde_json::Value::Array(items) => {
                out.push(flag);
                let parts: Result<Vec<String>, String> = items
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::Number(n) => Ok(n.to_string()),
                        serde_json::Value::String(s) => Ok(s.clone()),
                        _ => Err(format!("{key}: array entries must be numbers or strings")),
                    })
                    .collect();
                out.push(parts?.join(","));
            }
            _ => return Err(format!("{key}: unsupported scenario value {value}")),
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match expand_scenario(argv) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("UsageError: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; help/version requests exit 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let threads = cli
        .threads
        .or_else(|| std::env::var("ARBCOST_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("UsageError: invalid thread count");
            return ExitCode::from(2);
        }
    }

    match run(&cli) {
        Ok(out) => {
            emit(&out);
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("UsageError: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("ValidationError: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Module(e)) => {
            eprintln!("{e}");
            ExitCode::from(4)
        }
        Err(CliError::CrossCheck(msg)) => {
            eprintln!("CrossCheckFailed: {msg}");
            ExitCode::from(4)
        }
    }
}
