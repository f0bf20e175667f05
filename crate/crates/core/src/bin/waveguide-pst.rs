use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use waveguide_pst::config::{parse_jt, RunConfig};
use waveguide_pst::evolution::DEFAULT_PST_TOL;
use waveguide_pst::fabrication::separations;
use waveguide_pst::fock::DEFAULT_LEAK_BUDGET;
use waveguide_pst::gaussian::{fidelity_formula_audit, SingleModeParams};
use waveguide_pst::lattice::{Dims, ProfileDocument};
use waveguide_pst::scan::{
    lattice_matrix, run_scan, verify_pst, verify_swap, Engine, InputState, ProfileKind, ScanSetup,
    TimeGrid,
};

const WORKERS_ENV: &str = "WAVEGUIDE_PST_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "waveguide-pst",
    version,
    about = "Perfect state transfer on coupled-waveguide lattices"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for scans.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design the coupling profile (and optionally the waveguide separations).
    Design(DesignArgs),
    /// Sample fidelity, entanglement and |A| over a time grid.
    Scan(ScanArgs),
    /// Check mirror transfer or SWAP at the optimal time.
    Verify(VerifyArgs),
    /// Compare the closed-form transfer fidelity with the Uhlmann fidelity.
    Audit(AuditArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct LatticeArgs {
    /// Lattice shape `LxBxH`.
    #[arg(long)]
    dims: Option<String>,
    /// Chain length; shorthand for `--dims 1xNx1`.
    #[arg(long = "N", id = "chain_length")]
    n: Option<usize>,
    /// Coupling scale J.
    #[arg(long = "J", id = "coupling")]
    coupling: Option<f64>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Profile JSON path (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Separation CSV path (stdout if omitted).
    #[arg(long)]
    plan_output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    Gaussian,
    Fock,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Designed,
    Uniform,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Grid start in Jt units (`0`, `pi/2`, `1.5pi`, ...).
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long)]
    stop: Option<String>,
    #[arg(long)]
    step: Option<String>,
    /// Input state: `figure`, `gaussian:ax,ay,a,b,c`, `fock:n`, `coherent:x+yi`,
    /// `squeezed:r`, `cat:beta`, `thermal:nbar`.
    #[arg(long)]
    input: Option<String>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    leak_budget: Option<f64>,
    /// Skip the output phase gate.
    #[arg(long)]
    no_phase_correction: bool,
    /// CSV path (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VerifyMode {
    Pst,
    Swap,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    mode: VerifyMode,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Period index n of t_opt = (2n+1) sqrt(B-1) pi / 2J.
    #[arg(long)]
    period: Option<u32>,
    /// One Gaussian state per site for `swap`, in row-major site order.
    #[arg(long = "input", num_args = 1..)]
    inputs: Vec<String>,
    /// Verdict JSON path (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long = "N", id = "chain_length", default_value_t = 5)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    input: Option<String>,
    #[arg(long, default_value = "0")]
    start: String,
    #[arg(long, default_value = "3.5pi")]
    stop: String,
    #[arg(long, default_value = "pi/200")]
    step: String,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Per-point CSV path (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Summary JSON path (stderr if omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Done,
    Failed,
}

fn main() -> ExitCode {
    let result = run(Cli::parse());
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(exit_code(&result))
}

fn exit_code(result: &anyhow::Result<Outcome>) -> u8 {
    match result {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::Failed) => 1,
        Err(_) => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.check_tolerances()?;
    let workers = cli.workers.or(cfg.workers);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            bail!("worker count must be at least 1");
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    pool.install(|| match cli.command {
        Command::Design(a) => design(a, &cfg),
        Command::Scan(a) => scan(a, &cfg),
        Command::Verify(a) => verify(a, &cfg),
        Command::Audit(a) => audit(a),
    })
}

fn resolve_lattice(args: &LatticeArgs, cfg: &RunConfig) -> anyhow::Result<(Dims, f64)> {
    let dims = match (&args.dims, args.n) {
        (Some(_), Some(_)) => bail!("give either --dims or --N, not both"),
        (Some(d), None) => d.parse::<Dims>()?,
        (None, Some(n)) => Dims::linear(n)?,
        (None, None) => cfg.resolve_dims()?,
    };
    let coupling = args.coupling.or(cfg.coupling).unwrap_or(1.0);
    if !(coupling.is_finite() && coupling > 0.0) {
        bail!("coupling scale J must be > 0, got {coupling}");
    }
    Ok((dims, coupling))
}

fn resolve_profile(flag: Option<ProfileArg>, cfg: &RunConfig) -> anyhow::Result<ProfileKind> {
    Ok(match flag {
        Some(ProfileArg::Designed) => ProfileKind::Designed,
        Some(ProfileArg::Uniform) => ProfileKind::Uniform,
        None => match &cfg.profile {
            Some(p) => p.parse()?,
            None => ProfileKind::Designed,
        },
    })
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn design(a: DesignArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (dims, coupling) = resolve_lattice(&a.lattice, cfg)?;
    let (spec, profile, _) = lattice_matrix(dims, coupling, ProfileKind::Designed)?;
    let doc = ProfileDocument::new(&spec, &profile);
    let gamma = a.gamma.or(cfg.gamma);
    let eta = a.eta.or(cfg.eta);
    let plan = match (gamma, eta) {
        (Some(g), Some(e)) => Some(separations(&profile, g, e)?),
        (None, None) => None,
        _ => bail!("--gamma and --eta must be given together"),
    };
    let json = serde_json::to_string_pretty(&doc)? + "\n";
    emit(a.output.as_deref().or(cfg.output.profile.as_deref()), &json)?;
    if let Some(plan) = plan {
        emit(
            a.plan_output.as_deref().or(cfg.output.plan.as_deref()),
            &plan.to_csv().to_csv_string(),
        )?;
    }
    Ok(Outcome::Done)
}

fn grid_value(
    flag: &Option<String>,
    cfg: Option<&waveguide_pst::config::JtValue>,
    name: &str,
) -> anyhow::Result<f64> {
    match (flag, cfg) {
        (Some(s), _) => Ok(parse_jt(s)?),
        (None, Some(v)) => Ok(v.value()?),
        (None, None) => Err(anyhow!("grid {name} missing (--{name} or [grid] {name})")),
    }
}

fn scan(a: ScanArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (dims, coupling) = resolve_lattice(&a.lattice, cfg)?;
    let start = grid_value(&a.start, cfg.grid.start.as_ref(), "start")?;
    let stop = grid_value(&a.stop, cfg.grid.stop.as_ref(), "stop")?;
    let step = grid_value(&a.step, cfg.grid.step.as_ref(), "step")?;
    let grid = TimeGrid::new(start, stop, step)?;
    let input: InputState = a
        .input
        .as_deref()
        .or(cfg.input.as_deref())
        .ok_or_else(|| anyhow!("input state missing (--input or input = ...)"))?
        .parse()?;
    let engine = match a.engine {
        Some(EngineArg::Gaussian) => Engine::Gaussian,
        Some(EngineArg::Fock) => Engine::Fock,
        Some(EngineArg::Both) => Engine::Both,
        None => match &cfg.engine {
            Some(e) => e.parse()?,
            None => Engine::Gaussian,
        },
    };
    let leak_budget = a
        .leak_budget
        .or(cfg.leak_budget)
        .unwrap_or(DEFAULT_LEAK_BUDGET);
    if !(leak_budget > 0.0) {
        bail!("leak budget must be > 0");
    }
    let mut setup = ScanSetup::new(dims, input, grid);
    setup.coupling = coupling;
    setup.profile = resolve_profile(a.profile, cfg)?;
    setup.engine = engine;
    setup.cutoff = a.cutoff.or(cfg.cutoff);
    setup.leak_budget = leak_budget;
    setup.phase_correction = !a.no_phase_correction && cfg.phase_correction.unwrap_or(true);
    let result = run_scan(&setup)?;
    if let Some(leak) = result.leak {
        eprintln!("truncation leak: {leak:e}");
    }
    emit(
        a.output.as_deref().or(cfg.output.scan.as_deref()),
        &result.to_csv().to_csv_string(),
    )?;
    Ok(Outcome::Done)
}

fn verify(a: VerifyArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (dims, coupling) = resolve_lattice(&a.lattice, cfg)?;
    let tol = a.tolerance.or(cfg.tolerance).unwrap_or(DEFAULT_PST_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        bail!("tolerance must be > 0, got {tol}");
    }
    let verdict = match a.mode {
        VerifyMode::Pst => {
            let profile = resolve_profile(a.profile, cfg)?;
            verify_pst(
                dims,
                coupling,
                profile,
                a.period.or(cfg.period).unwrap_or(0),
                tol,
            )?
        }
        VerifyMode::Swap => {
            let specs: Vec<String> = if a.inputs.is_empty() {
                cfg.inputs.clone().unwrap_or_default()
            } else {
                a.inputs.clone()
            };
            if specs.is_empty() {
                bail!("swap needs one --input per site");
            }
            let inputs: Vec<InputState> =
                specs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            verify_swap(dims, coupling, &inputs, tol)?
        }
    };
    emit(
        a.output.as_deref().or(cfg.output.verdict.as_deref()),
        &(verdict.to_json() + "\n"),
    )?;
    Ok(if verdict.pass {
        Outcome::Done
    } else {
        Outcome::Failed
    })
}

fn audit(a: AuditArgs) -> anyhow::Result<Outcome> {
    let params = match a.input.as_deref() {
        None => SingleModeParams::figure_input(),
        Some(s) => match s.parse::<InputState>()? {
            InputState::Gaussian(p) => p,
            InputState::Kind(_) => bail!("audit input must be `figure` or `gaussian:ax,ay,a,b,c`"),
        },
    };
    let grid = TimeGrid::new(parse_jt(&a.start)?, parse_jt(&a.stop)?, parse_jt(&a.step)?)?;
    let report = fidelity_formula_audit(&params, a.n, &grid.points(), a.tolerance)?;
    emit(a.output.as_deref(), &report.to_csv().to_csv_string())?;
    let summary = serde_json::json!({
        "agrees": report.agrees,
        "evaluable_points": report.evaluable_points,
        "max_abs_difference": report.max_abs_difference,
        "tolerance": report.tolerance,
        "total_points": report.total_points,
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    match a.summary.as_deref() {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?
        }
        None => eprint!("{text}"),
    }
    Ok(Outcome::Done)
}
