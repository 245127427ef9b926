//! `rsma-lls`: runs a preset or a TOML campaign file and writes
//! `<out>/<scenario>.csv`, `<out>/<scenario>.svg` and the resolved
//! `<out>/<scenario>.toml`.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when the run
//! fails or some operating point is invalid. `RSMA_LLS_THREADS` sets the
//! worker count.

mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsma::amc::Backoff;
use rsma::presets::{preset, PRESET_NAMES};
use rsma::sim::{run_campaign, write_csv, CampaignConfig, PowerAxis};
use rsma::sysmodel::Strategy;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_VAR: &str = "RSMA_LLS_THREADS";

#[derive(Parser)]
#[command(version, about = "Link-level simulator for rate-splitting multigroup multicast")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write CSV, SVG and the resolved config.
    Run(RunArgs),
    /// Print a preset as TOML, a starting point for `--config`.
    Show {
        scenario: String,
    },
    /// List the preset names.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Rsma,
    Sdma,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (same as --scenario).
    #[arg(conflicts_with = "scenario")]
    preset: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    /// TOML campaign file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Operating points: `a,b,c` or `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    snr_grid: Option<String>,
    /// Monte-Carlo realizations per point.
    #[arg(long)]
    mc: Option<usize>,
    /// Channel uses per frame.
    #[arg(long)]
    frame_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed back-off in dB for every stream; turns calibration off.
    #[arg(long, conflicts_with = "calibrate_backoff")]
    backoff: Option<f64>,
    /// Search the back-off grid for the BLER target.
    #[arg(long)]
    calibrate_backoff: bool,
    /// JSON precoder file used instead of the optimizer.
    #[arg(long)]
    precoders: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("configuration error: {m}");
                ExitCode::from(2)
            }
            Failure::Runtime(m) => {
                eprintln!("run failed: {m}");
                ExitCode::from(3)
            }
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("bad grid '{text}': expected a,b,c or start:stop:step");
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

fn load_config(args: &RunArgs) -> Result<CampaignConfig, Failure> {
    let name = args.preset.as_ref().or(args.scenario.as_ref());
    let mut config = match (&args.config, name) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let mut c: CampaignConfig =
                toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            if let Some(n) = name {
                c.scenario.name = n.clone();
            }
            c
        }
        (None, Some(n)) => preset(n).map_err(|e| Failure::Config(e.to_string()))?,
        (None, None) => {
            return Err(Failure::Config(format!(
                "give a scenario or --config; presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };

    match args.strategy {
        Some(StrategyArg::Rsma) => config.strategies = vec![Strategy::Rsma],
        Some(StrategyArg::Sdma) => config.strategies = vec![Strategy::Sdma],
        Some(StrategyArg::Both) => config.strategies = vec![Strategy::Rsma, Strategy::Sdma],
        None => {}
    }
    if let Some(g) = &args.snr_grid {
        config.operating_points = parse_grid(g).map_err(Failure::Config)?;
    }
    if let Some(mc) = args.mc {
        config.num_realizations = mc;
    }
    if let Some(s) = args.frame_len {
        config.scenario.amc.stream_length = s;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(db) = args.backoff {
        config.backoff.calibrate = false;
        config.backoff.fixed = Backoff::uniform(db);
    }
    if args.calibrate_backoff {
        config.backoff.calibrate = true;
    }
    if let Some(p) = &args.precoders {
        config.precoder_file = Some(p.clone());
    }
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(config)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = load_config(&args)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", args.out.display())))?;
    let stem = args.out.join(&config.scenario.name);
    let resolved = toml::to_string(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_file(&stem.with_extension("toml"), resolved.as_bytes())?;

    let result = run_campaign(&config).map_err(|e| match e {
        rsma::Error::InvalidConfig(m) => Failure::Config(m),
        other => Failure::Runtime(other.to_string()),
    })?;
    let rows = result.summaries();
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_file(&stem.with_extension("csv"), &csv)?;
    let axis_label = match config.axis {
        PowerAxis::SnrDb => "SNR [dB]",
        PowerAxis::PerAntennaDbw => "per-antenna power [dBW]",
    };
    let svg = plot::render(&config.scenario.name, axis_label, &rows);
    write_file(&stem.with_extension("svg"), svg.as_bytes())?;

    for r in &rows {
        println!(
            "{} {} {:>6} throughput {:.4} bound {:.4} {}",
            r.scenario_id,
            r.strategy.name(),
            r.point,
            r.mmf_throughput,
            r.shannon_bound,
            r.status
        );
    }
    let invalid = rows.iter().filter(|r| r.status != "ok").count();
    if invalid > 0 {
        return Err(Failure::Runtime(format!("{invalid} invalid operating point(s)")));
    }
    Ok(())
}

fn set_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = set_threads().and_then(|()| match cli.command {
        Command::Run(args) => run(args),
        Command::Show { scenario } => {
            let c = preset(&scenario).map_err(|e| Failure::Config(e.to_string()))?;
            print!("{}", toml::to_string(&c).map_err(|e| Failure::Runtime(e.to_string()))?);
            Ok(())
        }
        Command::List => {
            PRESET_NAMES.iter().for_each(|n| println!("{n}"));
            Ok(())
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
