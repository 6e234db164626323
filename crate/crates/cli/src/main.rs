//! `phasereserve` command-line tool.

// `!(x > 0.0)` is the idiom for rejecting NaN along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod files;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use phasereserve::distributions::IphLaw;
use phasereserve::reserve::{
    fair_premium, liability_curve, reserve_at_issue, reserve_fractional_conditional, reserve_markov_with,
    reserve_time0_dual, Contract, CurrentState, Horizon, MarkovPath, PremiumProfile, ReserveMethod, ReserveReport,
};
use phasereserve::simulation::{mc_reserve, MIN_PATHS};

use error::CliError;
use files::{ContractFile, Model, ModelFile};
use output::{num, parse_grid, parse_list};

#[derive(Parser)]
#[command(name = "phasereserve", version, about = "Reserves and lifetime laws for fractional inhomogeneous phase-type models")]
struct Cli {
    /// Worker threads for parallel engines.
    #[arg(long, global = true, env = "PHRESERVE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reserve at a valuation time.
    Reserve(ReserveArgs),
    /// Lifetime law on a grid.
    Dist(DistArgs),
    /// Monte Carlo reserve.
    Mc(McArgs),
    /// Liabilities at issue over fractional orders and horizons.
    LiabilityCurve(CurveArgs),
    /// Premium rates that make the reserve at issue vanish.
    FairPremium(PremiumArgs),
}

#[derive(Args)]
struct Files {
    /// Model file (TOML).
    model: PathBuf,
    /// Contract file (TOML).
    contract: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Spectral,
    Quadrature,
    Dual,
}

#[derive(Args)]
struct ReserveArgs {
    #[command(flatten)]
    files: Files,
    /// Calendar valuation time.
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    /// Clock overshoot: Markov time reached at the first clock jump after --time.
    #[arg(long, requires = "v")]
    u: Option<f64>,
    /// Inverse-clock value at --time.
    #[arg(long, requires = "u")]
    v: Option<f64>,
    /// Current state (0-based). Defaults to the initial law at issue and to
    /// the survival-conditioned law otherwise.
    #[arg(long)]
    state: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Cdf,
    Pdf,
    Survival,
    Hazard,
}

#[derive(Args)]
struct DistArgs {
    /// Model file (TOML).
    model: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    /// Inclusive grid start:stop:step.
    #[arg(long)]
    grid: String,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    files: Files,
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    files: Files,
    /// Comma-separated fractional orders in (0, 1].
    #[arg(long, allow_hyphen_values = true)]
    alphas: String,
    /// Horizons start:stop:step.
    #[arg(long = "n-grid")]
    n_grid: String,
    /// Drop the contract's premiums instead of refusing them.
    #[arg(long)]
    zero_premiums: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Uniform,
    Custom,
    Pointwise,
}

#[derive(Args)]
struct PremiumArgs {
    #[command(flatten)]
    files: Files,
    /// Comma-separated 0-based states that pay premiums. Defaults to all.
    #[arg(long)]
    collectible: Option<String>,
    #[arg(long, value_enum, default_value_t = Profile::Uniform)]
    profile: Profile,
    /// Premium shape for --profile custom, one entry per state.
    #[arg(long)]
    shape: Option<String>,
}

fn load(files: &Files) -> Result<(Model, Contract), CliError> {
    let path = files.model.display().to_string();
    let model = ModelFile::parse(&files::read(&files.model)?, &path)?;
    let cpath = files.contract.display().to_string();
    let contract = ContractFile::parse(&files::read(&files.contract)?, &cpath, model.phases.dim())?;
    Ok((model, contract))
}

fn method_name(m: ReserveMethod) -> &'static str {
    match m {
        ReserveMethod::SpectralClosedForm => "spectral",
        ReserveMethod::Quadrature => "quadrature",
        ReserveMethod::DualLaplace => "dual",
        ReserveMethod::FractionalQuadrature => "fractional-quadrature",
    }
}

/// Law of the state at calendar time `t` given survival, on the Markov clock.
fn surviving_state(model: &Model, t: f64) -> Result<CurrentState, CliError> {
    let y = model.transform.g_inv(t);
    let e = model.phases.sub_intensity().exp(y).map_err(phasereserve::reserve::ReserveError::from)?;
    let row: DVector<f64> = e.transpose() * model.phases.pi();
    let mass = row.sum();
    if !(mass > 0.0) {
        return Err(CliError::Numerical(format!("survival to t = {t} underflows; pass --state")));
    }
    Ok(CurrentState::Distribution(row / mass))
}

fn cmd_reserve(a: &ReserveArgs) -> Result<String, CliError> {
    let (m, k) = load(&a.files)?;
    let state: Option<CurrentState> = a.state.map(Into::into);
    let markov_only = |what: &str| CliError::Input(format!("--method {what} applies to the Markov clock without --u/--v"));
    let rep: ReserveReport = if let (Some(u), Some(v)) = (a.u, a.v) {
        match a.method {
            Method::Spectral => return Err(markov_only("spectral")),
            Method::Dual => return Err(markov_only("dual")),
            _ => {}
        }
        let x = state.unwrap_or_else(|| m.phases.pi().clone().into());
        reserve_fractional_conditional(&m.phases, &m.transform, m.clock, &k, a.time, u, v, x)?
    } else if m.clock.is_markov() {
        if let Method::Dual = a.method {
            if a.time != 0.0 || a.state.is_some() {
                return Err(CliError::Input("--method dual values at issue only; drop --time and --state".into()));
            }
            reserve_time0_dual(&m.phases, &m.transform, &k)?
        } else {
            let path = match a.method {
                Method::Spectral => MarkovPath::Spectral,
                Method::Quadrature => MarkovPath::Quadrature,
                _ => MarkovPath::Auto,
            };
            let x = match state {
                Some(s) => s,
                None if a.time == 0.0 => m.phases.pi().clone().into(),
                None => surviving_state(&m, a.time)?,
            };
            reserve_markov_with(&m.phases, &m.transform, &k, a.time, x, path)?
        }
    } else {
        match a.method {
            Method::Spectral => return Err(markov_only("spectral")),
            Method::Dual => return Err(markov_only("dual")),
            _ => {}
        }
        if a.time != 0.0 || a.state.is_some() {
            return Err(CliError::Input(
                "after issue a fractional reserve needs the clock state; pass --u and --v".into(),
            ));
        }
        reserve_at_issue(&m.phases, &m.transform, m.clock, &k)?
    };
    Ok(format!(
        "value,annuity,lump,method,error_estimate\n{},{},{},{},{}\n",
        num(rep.value),
        num(rep.annuity_component),
        num(rep.lump_component),
        method_name(rep.method),
        num(rep.quadrature_error_estimate)
    ))
}

fn cmd_dist(a: &DistArgs) -> Result<String, CliError> {
    let grid = parse_grid(&a.grid).map_err(CliError::Input)?;
    let path = a.model.display().to_string();
    let m = ModelFile::parse(&files::read(&a.model)?, &path)?;
    let law = IphLaw::new(m.phases, m.transform, m.clock)?;
    let mut out = String::new();
    match a.what {
        What::Pdf => {
            out.push_str("x,value,singular\n");
            for x in grid {
                let p = law.pdf(x)?;
                writeln!(out, "{},{},{}", num(x), num(p.value), p.singular as u8).unwrap();
            }
        }
        what => {
            out.push_str("x,value\n");
            for x in grid {
                let v = match what {
                    What::Cdf => law.cdf(x)?,
                    What::Survival => law.survival(x)?,
                    _ => law.hazard(x)?,
                };
                writeln!(out, "{},{}", num(x), num(v)).unwrap();
            }
        }
    }
    Ok(out)
}

fn cmd_mc(a: &McArgs) -> Result<String, CliError> {
    if a.paths < MIN_PATHS {
        return Err(CliError::Input(format!("--paths must be at least {MIN_PATHS}")));
    }
    let (m, k) = load(&a.files)?;
    let est = mc_reserve(&m.phases, &m.transform, m.clock, &k, a.time, a.paths, a.seed)?;
    Ok(format!(
        "mean,std_error,paths,seed,annuity_mean,lump_mean\n{},{},{},{},{},{}\n",
        num(est.mean),
        num(est.std_error),
        est.paths,
        est.seed,
        num(est.annuity_mean),
        num(est.lump_mean)
    ))
}

fn cmd_curve(a: &CurveArgs) -> Result<String, CliError> {
    let alphas = parse_list(&a.alphas).map_err(CliError::Input)?;
    if alphas.is_empty() {
        return Err(CliError::Input("--alphas is empty".into()));
    }
    let ns = parse_grid(&a.n_grid).map_err(CliError::Input)?;
    let (m, k) = load(&a.files)?;
    if !a.zero_premiums && k.premiums().iter().any(|c| *c != 0.0) {
        return Err(CliError::Input("contract has premiums; pass --zero-premiums to drop them".into()));
    }
    let horizons: Vec<Horizon> = ns.into_iter().map(Horizon::Finite).collect();
    let points = liability_curve(&m.phases, &m.transform, &k, &alphas, &horizons)?;
    let mut out = String::from("alpha,n,liability\n");
    for p in points {
        writeln!(out, "{},{},{}", num(p.alpha), num(p.horizon.value()), num(p.value)).unwrap();
    }
    Ok(out)
}

fn cmd_premium(a: &PremiumArgs) -> Result<String, CliError> {
    let (m, k) = load(&a.files)?;
    let p = m.phases.dim();
    let collectible: Vec<usize> = match &a.collectible {
        None => (0..p).collect(),
        Some(s) => s
            .split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse().map_err(|_| CliError::Input(format!("'{x}' is not a state index"))))
            .collect::<Result<_, _>>()?,
    };
    let profile = match (a.profile, &a.shape) {
        (Profile::Custom, Some(s)) => PremiumProfile::Custom(DVector::from_vec(parse_list(s).map_err(CliError::Input)?)),
        (Profile::Custom, None) => return Err(CliError::Input("--profile custom needs --shape".into())),
        (_, Some(_)) => return Err(CliError::Input("--shape applies to --profile custom only".into())),
        (Profile::Uniform, None) => PremiumProfile::Uniform,
        (Profile::Pointwise, None) => PremiumProfile::Pointwise,
    };
    let c = fair_premium(&m.phases, &m.transform, m.clock, &k, &collectible, &profile)?;
    let mut out = String::from("state,premium\n");
    for (i, v) in c.iter().enumerate() {
        writeln!(out, "{i},{}", num(*v)).unwrap();
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    match &cli.command {
        Command::Reserve(a) => cmd_reserve(a),
        Command::Dist(a) => cmd_dist(a),
        Command::Mc(a) => cmd_mc(a),
        Command::LiabilityCurve(a) => cmd_curve(a),
        Command::FairPremium(a) => cmd_premium(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
