//! Experiment harness: single games, horizon sweeps with exponent fits,
//! Stackelberg values, adversarial densities and the query protocol.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cakecut::adversary::{
    bitvector_density, figure_one_bob, spiked_density, unknown_alpha_pair, unspiked_density, BitVectorAdversary,
    SpikeParams, SPIKE_W_MAX,
};
use cakecut::alice::{
    alice_2cut_myopic, alice_2cut_robust, alice_kcut_myopic, alice_kcut_robust, ClassBounds, RateFunction,
};
use cakecut::bob::BobState;
use cakecut::engine::{fit_exponent, regret_report, run_game, AliceStrategy, FixedCuts, History, RegretReport};
use cakecut::partitions::CutVector;
use cakecut::rw::{rw_eps_stackelberg, rw_lower_bound_fixture, rw_spiked_fixture, QueryOracle};
use cakecut::stackelberg::{stackelberg_bruteforce, stackelberg_exact};
use cakecut::valuations::Density;
use cakecut::CakeError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Cake(#[from] CakeError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Cake(e) => match e {
                CakeError::Domain(_) | CakeError::Contract(_) | CakeError::Exhausted(_) => 3,
                CakeError::Resource(_) => 4,
                CakeError::InvalidDensity(_)
                | CakeError::Parse { .. }
                | CakeError::Io { .. }
                | CakeError::Json(_)
                | CakeError::Csv(_) => 2,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "cakecut", version, about = "Repeated cake-cutting experiments", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play one game and report both regrets.
    Simulate(SimulateArgs),
    /// Play a grid of horizons and seeds and fit the regret exponent.
    Sweep(SweepArgs),
    /// Alice's Stackelberg value for a pair of densities.
    Stackelberg(StackelbergArgs),
    /// Emit a member of an adversarial density family.
    Adversary(AdversaryArgs),
    /// Run the Robertson-Webb ε-Stackelberg protocol.
    Rw(RwArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AliceKind {
    #[value(name = "2cut-myopic")]
    TwoCutMyopic,
    #[value(name = "2cut-robust")]
    TwoCutRobust,
    #[value(name = "kcut-myopic")]
    KCutMyopic,
    #[value(name = "kcut-robust")]
    KCutRobust,
    /// Commit to `--cuts` from the first round.
    Fixed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BobKind {
    Myopic,
    /// Lies whenever the loss still fits in `--budget`.
    Liar,
    /// Plays as `--pretend` while its regret stays within `--budget`.
    BudgetSwitch,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RateKind {
    Power,
    PolyOverPolylog,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value = "2cut-myopic")]
    alice: AliceKind,
    #[arg(long, value_enum, default_value = "myopic")]
    bob: BobKind,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Regret exponent of a power rate `T^alpha`.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "power")]
    rate: RateKind,
    /// Log power for the `poly-over-polylog` rate.
    #[arg(long, default_value_t = 5.0)]
    log_power: f64,
    /// Search precision override for 2cut-myopic.
    #[arg(long)]
    eps: Option<f64>,
    /// Bob's regret budget for liar and budget-switch Bobs.
    #[arg(long, default_value_t = 0.0)]
    budget: f64,
    /// Density a budget-switch Bob pretends to have.
    #[arg(long)]
    pretend: Option<String>,
    /// Comma-separated cuts for the fixed strategy.
    #[arg(long, value_delimiter = ',')]
    cuts: Vec<f64>,
    /// Class bounds δ and Δ known to Alice; default covers both densities.
    #[arg(long)]
    class_lower: Option<f64>,
    #[arg(long)]
    class_upper: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Alice's density: a file, `uniform` or `fig1`.
    #[arg(long, default_value = "uniform")]
    va: String,
    /// Bob's density: a file, `uniform` or `fig1`.
    #[arg(long, default_value = "uniform")]
    vb: String,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value file of defaults; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Comma-separated horizons in ascending order.
    #[arg(long = "T", value_delimiter = ',', required = true)]
    horizons: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Alice's density; random per seed when absent.
    #[arg(long)]
    va: Option<String>,
    /// Bob's density; random per seed when absent.
    #[arg(long)]
    vb: Option<String>,
    #[arg(long, default_value_t = 6)]
    segments: usize,
    #[arg(long, default_value_t = 0.5)]
    density_lower: f64,
    #[arg(long, default_value_t = 2.0)]
    density_upper: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StackelbergArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "uniform")]
    va: String,
    #[arg(long, default_value = "uniform")]
    vb: String,
    /// Grid step for a brute-force check instead of the exact solver.
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Unspiked,
    Spiked,
    Bitvector,
    /// The density Bob pretends to have in the unknown-rate lower bound.
    PretendPair,
    /// The true density in the unknown-rate lower bound.
    TruePair,
    Fig1,
}

#[derive(Args, Debug)]
struct AdversaryArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    /// Bit string for the bit-vector family, e.g. `0110`.
    #[arg(long)]
    bits: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RwArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    eps: f64,
    /// Use a spiked lower-bound fixture drawn from this seed.
    #[arg(long)]
    fixture_seed: Option<u64>,
    /// Spike half-width for the fixture; default `14·eps`, capped at 1/48.
    #[arg(long)]
    w: Option<f64>,
    #[arg(long, default_value = "uniform")]
    va: String,
    #[arg(long, default_value = "uniform")]
    vb: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv = match with_config_defaults(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Splices `key = value` lines from `--config FILE` in front of the
/// subcommand's own flags, so later (command-line) flags override them.
fn with_config_defaults(args: Vec<String>) -> CliResult<Vec<String>> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| CliError::Config("--config needs a file".into()))?,
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{path}:{}: expected `key = value`", n + 1)))?;
        injected.push(format!("--{}", key.trim()));
        injected.push(value.trim().to_string());
    }
    let Some(sub) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 1) else {
        return Ok(args);
    };
    let mut out: Vec<String> = args[..=sub].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Stackelberg(a) => cmd_stackelberg(a),
        Command::Adversary(a) => cmd_adversary(a),
        Command::Rw(a) => cmd_rw(a),
    }
}

fn load_density(spec: &str) -> CliResult<Density> {
    match spec {
        "uniform" => Ok(Density::uniform()),
        "fig1" => Ok(figure_one_bob()),
        path => Ok(Density::load(Path::new(path))?),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CakeError::io(p, e).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CakeError::io(Path::new("<stdout>"), e).into())
        }
    }
}

fn to_json(v: serde_json::Value) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&v).map_err(CakeError::from)?;
    s.push('\n');
    Ok(s)
}

fn class_bounds(s: &StrategyArgs, va: &Density, vb: &Density, extra: Option<&Density>) -> CliResult<ClassBounds> {
    let mut all = vec![va, vb];
    all.extend(extra);
    let cover = ClassBounds::covering(&all);
    Ok(ClassBounds::new(
        s.class_lower.unwrap_or(cover.lower),
        s.class_upper.unwrap_or(cover.upper),
    )?)
}

fn rate(s: &StrategyArgs) -> RateFunction {
    match s.rate {
        RateKind::Power => RateFunction::Power(s.alpha),
        RateKind::PolyOverPolylog => RateFunction::PolyOverPolylog(s.log_power),
    }
}

fn make_alice(s: &StrategyArgs, va: &Density, bounds: ClassBounds) -> CliResult<Box<dyn AliceStrategy + Send>> {
    Ok(match s.alice {
        AliceKind::TwoCutMyopic => Box::new(alice_2cut_myopic(va.clone(), bounds, s.eps)),
        AliceKind::TwoCutRobust => Box::new(alice_2cut_robust(va.clone(), bounds, rate(s))),
        AliceKind::KCutMyopic => Box::new(alice_kcut_myopic(va.clone(), bounds)),
        AliceKind::KCutRobust => Box::new(alice_kcut_robust(va.clone(), bounds, rate(s))),
        AliceKind::Fixed => Box::new(FixedCuts {
            cuts: CutVector::new(s.cuts.clone())?,
        }),
    })
}

fn make_bob(s: &StrategyArgs, vb: &Density, pretend: Option<&Density>) -> CliResult<BobState> {
    Ok(match s.bob {
        BobKind::Myopic => BobState::myopic(vb.clone()),
        BobKind::Liar => BobState::liar(vb.clone(), s.budget)?,
        BobKind::BudgetSwitch => {
            let pretend = pretend.ok_or_else(|| CliError::Config("budget-switch Bob needs --pretend".into()))?;
            BobState::budget_switch(vb.clone(), pretend.clone(), s.budget)?
        }
    })
}

fn play(s: &StrategyArgs, va: &Density, vb: &Density, horizon: u64) -> CliResult<(History, RegretReport, f64)> {
    let pretend = s.pretend.as_deref().map(load_density).transpose()?;
    let bounds = class_bounds(s, va, vb, pretend.as_ref())?;
    let mut alice = make_alice(s, va, bounds)?;
    let mut bob = make_bob(s, vb, pretend.as_ref())?;
    let history = run_game(alice.as_mut(), &mut bob, va, horizon, s.k)?;
    let report = regret_report(&history, vb);
    Ok((history, report, bob.regret_ledger()))
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let va = load_density(&a.va)?;
    let vb = load_density(&a.vb)?;
    let (history, report, _) = play(&a.strategy, &va, &vb, a.horizon)?;
    match a.format {
        Format::Json => emit(&a.out, &to_json(json!({ "history": history, "regret": report }))?),
        Format::Csv => {
            let mut buf = Vec::new();
            history.write_csv(&mut buf)?;
            emit(&a.out, &String::from_utf8_lossy(&buf))?;
            if a.out.is_some() {
                print!("{}", to_json(json!(report))?);
            }
            Ok(())
        }
    }
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    if a.horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("--T values must be strictly ascending".into()));
    }
    let fixed_va = a.va.as_deref().map(load_density).transpose()?;
    let fixed_vb = a.vb.as_deref().map(load_density).transpose()?;
    let jobs: Vec<(u64, u64)> = a
        .horizons
        .iter()
        .flat_map(|&t| (0..a.seeds).map(move |s| (t, s)))
        .collect();
    let rows: Vec<CliResult<(u64, u64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let va = match &fixed_va {
                Some(d) => d.clone(),
                None => Density::random(&mut rng, a.segments, a.density_lower, a.density_upper),
            };
            let vb = match &fixed_vb {
                Some(d) => d.clone(),
                None => Density::random(&mut rng, a.segments, a.density_lower, a.density_upper),
            };
            let (_, report, _) = play(&a.strategy, &va, &vb, t)?;
            Ok((t, seed, report.alice_stackelberg_regret, report.bob_choice_regret))
        })
        .collect();
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mut text = String::from("T,seed,regret_alice,regret_bob\n");
    for (t, seed, ra, rb) in &rows {
        text.push_str(&format!("{t},{seed},{ra},{rb}\n"));
    }
    if a.horizons.len() >= 3 {
        let means: Vec<(f64, f64)> = a
            .horizons
            .iter()
            .map(|&t| {
                let mine: Vec<f64> = rows.iter().filter(|r| r.0 == t).map(|r| r.2).collect();
                (t as f64, mine.iter().sum::<f64>() / mine.len() as f64)
            })
            .collect();
        match fit_exponent(&means) {
            Ok(e) => text.push_str(&format!("fit,exponent,{e},\n")),
            Err(err) => eprintln!("warning: no exponent fit: {err}"),
        }
    }
    emit(&a.out, &text)
}

fn cmd_stackelberg(a: StackelbergArgs) -> CliResult<()> {
    let va = load_density(&a.va)?;
    let vb = load_density(&a.vb)?;
    let sol = match a.grid_step {
        Some(h) => stackelberg_bruteforce(&va, &vb, a.k, h)?,
        None => stackelberg_exact(&va, &vb, a.k)?,
    };
    emit(&a.out, &to_json(json!(sol))?)
}

fn cmd_adversary(a: AdversaryArgs) -> CliResult<()> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Config(format!("family needs --{name}")));
    let d = match a.family {
        Family::Unspiked => unspiked_density(a.k)?,
        Family::Spiked => spiked_density(&SpikeParams::new(a.k, need(a.w, "w")?, need(a.z, "z")?)?)?,
        Family::Bitvector => {
            let bits = a.bits.ok_or_else(|| CliError::Config("family needs --bits".into()))?;
            let bits = bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(CliError::Config(format!("bit {other:?} is not 0 or 1"))),
                })
                .collect::<CliResult<Vec<bool>>>()?;
            if bits.is_empty() {
                return Err(CliError::Config("--bits must not be empty".into()));
            }
            bitvector_density(&BitVectorAdversary { bits })?.density
        }
        Family::PretendPair => unknown_alpha_pair().0,
        Family::TruePair => unknown_alpha_pair().1,
        Family::Fig1 => figure_one_bob(),
    };
    emit(&a.out, &d.to_text())
}

fn cmd_rw(a: RwArgs) -> CliResult<()> {
    let (va, vb, hidden) = match a.fixture_seed {
        Some(seed) => {
            let f = match a.w {
                Some(w) => rw_spiked_fixture(w, seed)?,
                None if 14.0 * a.eps <= SPIKE_W_MAX => rw_lower_bound_fixture(a.eps, seed)?,
                None => {
                    eprintln!("warning: 14·eps exceeds the widest spike; using half-width 1/48");
                    rw_spiked_fixture(SPIKE_W_MAX, seed)?
                }
            };
            (f.alice, f.bob, Some(f.hidden_z))
        }
        None => (load_density(&a.va)?, load_density(&a.vb)?, None),
    };
    let mut alice = QueryOracle::new(va);
    let mut bob = QueryOracle::new(vb);
    let out = rw_eps_stackelberg(&mut alice, &mut bob, a.k, a.eps)?;
    if out.infeasible {
        eprintln!("warning: no grid cut leaves Bob half the cake; the whole cake goes to Bob");
    }
    emit(&a.out, &to_json(json!({ "outcome": out, "hidden_z": hidden }))?)
}
