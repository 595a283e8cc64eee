use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpesplit::harness::{
    convergence_study, halving_ladder, load_state, preset, preset_names, run, run_study, save_state, AdaptiveConfig,
    ConvergenceReport, Reference, RunConfig, StepPlan,
};
use mpesplit::models::ModelId;
use mpesplit::order::{
    default_ladder, empirical_order, verify_conditions, MatrixOraclePair, Precision, DEFAULT_ORACLE_DIMENSION,
    DEFAULT_ORACLE_SEED,
};
use mpesplit::scheme::{catalog_all, format_rational, scheme_stats, CATALOG_NAMES};
use mpesplit::{harness, Error, Result};
use serde_json::json;

// Writes a line to stdout, propagating errors instead of panicking on a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(
    name = "mpesplit",
    version,
    about = "Multi-product splitting integrators for periodic evolution equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one model with one scheme.
    Run(RunArgs),
    /// Tabulate errors and rates over a step-size ladder.
    Converge(ConvergeArgs),
    /// Check order conditions and fit the empirical order on the matrix oracle.
    OrderCheck(OrderArgs),
    /// List catalog schemes.
    ListSchemes {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// List models.
    ListModels,
    /// Print, run, or study a named experiment.
    Preset(PresetArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON file mirroring the run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelId>,
    /// Catalog name or scheme JSON file.
    #[arg(long)]
    scheme: Option<String>,
    /// Grid points per axis.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    /// Energy-driven step sizes.
    #[arg(long)]
    adaptive: bool,
    #[arg(long)]
    tau_min: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Record diagnostics every k steps.
    #[arg(long)]
    every: Option<usize>,
    /// Directory for run.csv and the final state.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Permit negative linear sub-steps (needed by negative-step schemes).
    #[arg(long)]
    allow_backward: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated step sizes; default is `levels` halvings of --tau.
    #[arg(long, value_delimiter = ',')]
    ladder: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// `exact`, `<scheme>:<tau>` for a fine run, or a directory holding a saved state.
    #[arg(long, default_value = "exact")]
    reference: String,
    /// Random subintervals (seeded by --seed) instead of uniform steps.
    #[arg(long)]
    random: bool,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value_t = DEFAULT_ORACLE_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_DIMENSION)]
    dimension: usize,
    /// Evaluate errors in plain f64 instead of extended precision.
    #[arg(long)]
    double: bool,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name; lists presets when omitted.
    name: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    /// Run the headline configuration.
    #[arg(long)]
    run: bool,
    /// Run the preset's convergence table.
    #[arg(long)]
    study: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = s.clone();
    }
    if a.nx.is_some() {
        cfg.n = a.nx;
    }
    if let Some(t) = a.tau {
        cfg.tau = t;
    }
    if let Some(t) = a.tfinal {
        cfg.t_final = t;
    }
    if a.adaptive || a.tau_min.is_some() || a.tau_max.is_some() || a.alpha.is_some() {
        let base = cfg.adaptive.unwrap_or(AdaptiveConfig {
            tau_min: 0.01,
            tau_max: 0.1,
            alpha: 1e6,
        });
        cfg.adaptive = Some(AdaptiveConfig {
            tau_min: a.tau_min.unwrap_or(base.tau_min),
            tau_max: a.tau_max.unwrap_or(base.tau_max),
            alpha: a.alpha.unwrap_or(base.alpha),
        });
    }
    if let Some(k) = a.every {
        cfg.diagnostics_every = k;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.allow_backward |= a.allow_backward;
    Ok(cfg)
}

fn emit_run(cfg: &RunConfig, format: Format) -> Result<()> {
    let rec = run(cfg)?;
    let stdout = std::io::stdout();
    match format {
        Format::Csv => rec.write_csv(stdout.lock())?,
        Format::Json => writeln!(stdout.lock(), "{}", rec.to_json()?)?,
    }
    if let harness::RunStatus::Diverged { step, t } = rec.status {
        eprintln!("diverged at step {step} (t = {t})");
    }
    Ok(())
}

fn emit_reports(reports: &[ConvergenceReport], format: Format, out: Option<&Path>) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(reports)?)?,
        Format::Csv => {
            for r in reports {
                if reports.len() > 1 {
                    writeln!(stdout, "# {}", r.scheme)?;
                }
                r.write_csv(&mut stdout)?;
            }
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for r in reports {
            let name = if reports.len() > 1 {
                format!("convergence_{}.csv", r.scheme)
            } else {
                "convergence.csv".into()
            };
            r.write_csv(std::fs::File::create(dir.join(name))?)?;
        }
    }
    Ok(())
}

fn converge(a: &ConvergeArgs) -> Result<()> {
    let cfg = build_config(&a.run)?;
    let spec = cfg.model_spec()?;
    let scheme = harness::resolve_scheme(&cfg.scheme)?;
    let ladder = if a.ladder.is_empty() {
        halving_ladder(1.0 / cfg.tau, a.levels)
    } else {
        a.ladder.clone()
    };
    let reference = match a.reference.as_str() {
        "exact" => Reference::Exact,
        r => match r.split_once(':') {
            Some((name, tau)) => {
                let tau: f64 = tau
                    .parse()
                    .map_err(|_| Error::Config(format!("bad reference step in `{r}`")))?;
                let fine = RunConfig {
                    scheme: name.into(),
                    tau,
                    adaptive: None,
                    out_dir: None,
                    diagnostics_every: usize::MAX,
                    ..cfg.clone()
                };
                let state = run(&fine)?.final_state;
                if let Some(dir) = &cfg.out_dir {
                    save_state(&state, dir, "reference")?;
                }
                Reference::State(state)
            }
            None => Reference::State(load_state(Path::new(r), "reference")?),
        },
    };
    let plan = if a.random {
        StepPlan::Random { seed: cfg.seed }
    } else {
        StepPlan::Uniform
    };
    let report = convergence_study(
        &spec,
        &scheme,
        cfg.t_final,
        &ladder,
        plan,
        &reference,
        cfg.allow_backward,
    )?;
    emit_reports(&[report], a.run.format, cfg.out_dir.as_deref())
}

fn order_check(a: &OrderArgs) -> Result<()> {
    let scheme = harness::resolve_scheme(&a.scheme)?;
    let mut oracle = MatrixOraclePair::random(a.dimension, a.seed)?;
    if a.double {
        oracle = oracle.with_precision(Precision::Double);
    }
    let fit = empirical_order(&scheme, &oracle, &default_ladder())?;
    let report = json!({
        "scheme": scheme.name,
        "algebraic": verify_conditions(&scheme, 3),
        "empirical": {
            "slope": fit.slope,
            "residual": fit.residual,
            "ladder": fit.ladder,
        },
    });
    out!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn list_schemes(format: Format) -> Result<()> {
    let all = catalog_all();
    match format {
        Format::Json => {
            let docs: Vec<serde_json::Value> = all
                .iter()
                .map(|s| s.to_json().and_then(|t| Ok(serde_json::from_str(&t)?)))
                .collect::<Result<_>>()?;
            out!("{}", serde_json::to_string_pretty(&docs)?);
        }
        Format::Csv => {
            out!("name,claimed_order,class,terms,stages,sum_abs_weights,b_max");
            for s in &all {
                let st = scheme_stats(s);
                out!(
                    "{},{},{},{},{},{},{}",
                    s.name,
                    s.claimed_order,
                    s.class,
                    s.terms.len(),
                    st.stage_count,
                    format_rational(&st.sum_c_abs),
                    format_rational(&st.b_max)
                );
            }
        }
    }
    debug_assert_eq!(all.len(), CATALOG_NAMES.len());
    Ok(())
}

fn preset_cmd(a: &PresetArgs) -> Result<()> {
    let Some(name) = &a.name else {
        for n in preset_names() {
            out!("{n}\t{}", preset(n)?.description);
        }
        return Ok(());
    };
    let p = preset(name)?;
    let mut cfg = p.config.clone();
    if a.nx.is_some() {
        cfg.n = a.nx;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    if a.run {
        return emit_run(&cfg, a.format);
    }
    if a.study {
        let study = p
            .study
            .as_ref()
            .ok_or_else(|| Error::Config(format!("preset {name} has no convergence table")))?;
        let reports = run_study(study, &cfg.model_spec()?, cfg.allow_backward)?;
        return emit_reports(&reports, a.format, cfg.out_dir.as_deref());
    }
    out!("{}", cfg.to_json()?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => emit_run(&build_config(&a)?, a.format),
        Command::Converge(a) => converge(&a),
        Command::OrderCheck(a) => order_check(&a),
        Command::ListSchemes { format } => list_schemes(format),
        Command::ListModels => {
            for m in ModelId::ALL {
                out!("{m}\t{}", m.description());
            }
            Ok(())
        }
        Command::Preset(a) => preset_cmd(&a),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
