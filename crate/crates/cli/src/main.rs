use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use torus_wave::harness::config::parse_rational;
use torus_wave::harness::data::{generate_hs_data, save_state};
use torus_wave::harness::verify::{verify_selected, Hooks, CRITERIA};
use torus_wave::harness::{run_experiment_in, sweep_n, RunConfig};
use torus_wave::ledger::{derivation_trace, stage_threshold, stage_window, Stage};
use torus_wave::spectral::TorusGrid;
use torus_wave::Error;

#[derive(Parser)]
#[command(name = "torus-wave", version, about = "I-method diagnostics for the cubic wave equation on the 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured evolution into a run directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; defaults to `runs/<config name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a seed family at several cutoffs and fit log-log slopes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        cutoffs: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        seeds: usize,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Exact exponent bookkeeping.
    Ledger {
        #[command(subcommand)]
        command: LedgerCommand,
    },
    /// Run the acceptance battery.
    Verify {
        /// Comma-separated criterion numbers; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Write a TOML summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write a random H^s data pair (`u.twl`, `v.twl`) into a directory.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value = "1/2")]
        s: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum LedgerCommand {
    /// Print the full derivation of a stage.
    Trace { stage: String },
    /// Print the closure threshold s₀ of a stage.
    Threshold { stage: String },
    /// Invert every window term at a given s.
    Window {
        stage: String,
        #[arg(long)]
        s: String,
    },
}

enum Failure {
    Check(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidGrid(_) | Error::GridMismatch(..) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let dir = out.unwrap_or_else(|| {
        let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned());
        Path::new("runs").join(stem.unwrap_or_else(|| "run".into()))
    });
    let record = run_experiment_in(&cfg, &dir)?;
    let s = &record.summary;
    println!("run directory: {}", dir.display());
    println!("samples: {}, dt: {:.6e}", s.samples, s.dt);
    println!("relative energy drift: {:.3e}", s.energy_drift);
    for w in &record.windows {
        println!(
            "window {} [{:.6}, {:.6}]: Z(1/4) {:.4e}, Z(3/8) {:.4e}, increment {:.4e}, X_l {:.4e}, X_nl {:.4e}",
            w.index, w.start, w.end, w.z_quarter, w.z_three_eighths, w.increment_physical, w.x_linear, w.x_nonlinear
        );
    }
    if s.blowup_flagged {
        return Err(Failure::Check("H^s norm growth exceeded the blow-up threshold".into()));
    }
    Ok(())
}

fn sweep(config: &Path, cutoffs: &[f64], seeds: usize, out: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let report = sweep_n(&cfg, cutoffs, seeds)?;
    report.write(out)?;
    print!("{}", report.slope_table());
    println!("written: {}", out.display());
    Ok(())
}

fn stage(name: &str) -> Result<Stage, Failure> {
    Ok(name.parse::<Stage>()?)
}

fn ledger(command: LedgerCommand) -> Result<(), Failure> {
    match command {
        LedgerCommand::Trace { stage: name } => println!("{}", derivation_trace(stage(&name)?)?),
        LedgerCommand::Threshold { stage: name } => {
            let t = stage_threshold(stage(&name)?)?;
            println!("s0 = {}", t.s0);
            println!("inclusive: {}", t.inclusive);
            println!("binding: {}", t.binding.join(", "));
            if t.degenerate {
                println!("degenerate: some term equals the target identically");
            }
        }
        LedgerCommand::Window { stage: name, s } => {
            let st = stage(&name)?;
            let s = parse_rational(&s)?;
            let (_, report) = stage_window(st, s)?;
            println!("downstream window: j = {}", st.window_exponent());
            println!("{report}");
        }
    }
    Ok(())
}

fn verify(only: Vec<u8>, summary: Option<PathBuf>) -> Result<(), Failure> {
    let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(Failure::Config(format!("no criterion numbered {bad}")));
    }
    let report = verify_selected(&ids, &Hooks::default(), |c| println!("{c}"));
    println!("{} passed, {} failed", report.passed, report.failed);
    if let Some(path) = summary {
        std::fs::write(&path, report.to_toml()).map_err(|e| Failure::Check(e.to_string()))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} criteria failed", report.failed)))
    }
}

fn gen_data(out: &Path, grid: usize, s: &str, delta: f64, seed: u64) -> Result<(), Failure> {
    let grid = TorusGrid::new(grid)?;
    let s = parse_rational(s)?;
    let s = *s.numer() as f64 / *s.denom() as f64;
    if !(s > 0.0 && s < 1.0) {
        return Err(Failure::Config(format!("s = {s} must lie in (0, 1)")));
    }
    if !(delta > 0.0) {
        return Err(Failure::Config(format!("delta = {delta} must be positive")));
    }
    let state = generate_hs_data(grid, s, delta, seed)?;
    save_state(out, &state)?;
    println!("wrote {}/u.twl and {}/v.twl", out.display(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Sweep { config, cutoffs, seeds, out } => sweep(&config, &cutoffs, seeds, &out),
        Command::Ledger { command } => ledger(command),
        Command::Verify { only, summary } => verify(only, summary),
        Command::GenData { out, grid, s, delta, seed } => gen_data(&out, grid, &s, delta, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
