use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;

use clap::{Parser, Subcommand};
use gauduchon::checks::{run_suite, SuiteOptions};
use gauduchon::config::{load_config, ScenarioConfig};
use gauduchon::diagnostics::DiagnosticsRecord;
use gauduchon::forms::set_star_sign_corruption;
use gauduchon::io::write_scalar_field;
use gauduchon::run::{checkpoint_file, resume_run, run_scenario, Manifest, RunControl, RunStatus};
use gauduchon::Error;

/// Thread count for the parallel kernels; defaults to all cores.
const THREADS_VAR: &str = "GAUDUCHON_THREADS";

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_POSITIVITY: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_SOFTWARE: u8 = 70;
const EXIT_IO: u8 = 74;
const EXIT_INTERRUPTED: u8 = 130;

#[derive(Parser)]
#[command(
    name = "gauduchon",
    version,
    about = "Monge-Ampere type flow of Gauduchon metrics on flat tori"
)]
struct Cli {
    /// Only print the final result.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print the final result as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow described by a scenario file.
    Run {
        config: PathBuf,
        /// Output directory [default: <config stem>-run].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        stop_after_steps: Option<u64>,
    },
    /// Run the identity suites on the scenario's grid.
    Check {
        config: PathBuf,
        #[arg(long, hide = true)]
        corrupt_star_sign: bool,
    },
    /// Continue a run from its checkpoint (file or run directory).
    Resume {
        checkpoint: PathBuf,
        /// Refuse unless this config matches the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        stop_after_steps: Option<u64>,
    },
    /// Write the source term of a scenario as a field dump.
    Manufacture {
        config: PathBuf,
        /// Output file [default: <config stem>-psi.bin].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got {v:?}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Checkpoint(_) | Error::Dump(_) => EXIT_DATA,
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        Error::PositivityLoss { .. } | Error::DtUnderflow { .. } => EXIT_POSITIVITY,
        _ => EXIT_SOFTWARE,
    }
}

fn dispatch(cli: &Cli) -> gauduchon::Result<u8> {
    match &cli.command {
        Command::Run {
            config,
            out,
            stop_after_steps,
        } => {
            let scenario = load_config(config)?;
            let out = out.clone().unwrap_or_else(|| default_sibling(config, "-run"));
            let control = control(*stop_after_steps);
            let base = config.parent().unwrap_or(Path::new("."));
            let outcome = run_scenario(&scenario, base, &out, &control, &mut progress(cli))?;
            Ok(report_run(cli, &outcome.manifest, &out))
        }
        Command::Resume {
            checkpoint,
            config,
            stop_after_steps,
        } => {
            let path = checkpoint_file(checkpoint);
            let expected = match config {
                Some(p) => Some((
                    ScenarioConfig::from_toml(&std::fs::read_to_string(p)?)?,
                    p.parent().unwrap_or(Path::new(".")),
                )),
                None => None,
            };
            let control = control(*stop_after_steps);
            let outcome = resume_run(&path, expected.as_ref().map(|(c, b)| (c, *b)), &control, &mut progress(cli))?;
            let out = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            Ok(report_run(cli, &outcome.manifest, &out))
        }
        Command::Check {
            config,
            corrupt_star_sign,
        } => {
            let cfg = ScenarioConfig::from_toml(&std::fs::read_to_string(config)?)?;
            set_star_sign_corruption(*corrupt_star_sign);
            let mut opts = SuiteOptions::new(cfg.n, cfg.points);
            opts.period = cfg.period;
            opts.order = cfg.stencil_order;
            opts.seed = cfg.seed;
            let report = run_suite(&opts)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else if !cli.quiet {
                for c in &report.checks {
                    println!("{c}");
                }
            }
            if report.passed() {
                Ok(0)
            } else {
                eprintln!("failed checks: {}", report.failures().join(", "));
                Ok(EXIT_CHECK_FAILED)
            }
        }
        Command::Manufacture { config, out } => {
            let scenario = load_config(config)?;
            let out = out.clone().unwrap_or_else(|| default_sibling(config, "-psi.bin"));
            write_scalar_field(&out, "psi", &scenario.background.psi)?;
            if !cli.quiet {
                println!("wrote {}", out.display());
            }
            Ok(0)
        }
    }
}

fn default_sibling(config: &Path, suffix: &str) -> PathBuf {
    let stem = config
        .file_stem()
        .map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from(format!("{stem}{suffix}"))
}

fn control(stop_after_steps: Option<u64>) -> RunControl {
    let control = RunControl {
        stop_after_steps,
        ..Default::default()
    };
    let flag = control.interrupt.clone();
    // a second Ctrl-C exits without waiting for the checkpoint
    let _ = ctrlc::set_handler(move || {
        if flag.swap(true, Ordering::SeqCst) {
            std::process::exit(EXIT_INTERRUPTED as i32);
        }
    });
    control
}

fn progress(cli: &Cli) -> impl FnMut(u64, &DiagnosticsRecord) {
    let verbose = !cli.quiet && !cli.json;
    move |step, row| {
        if verbose {
            eprintln!("step {step:>8}  t = {:<12.6e} theta = {:.3e}", row.t, row.theta);
        }
    }
}

fn report_run(cli: &Cli, m: &Manifest, out: &Path) -> u8 {
    if cli.json {
        match serde_json::to_string_pretty(m) {
            Ok(s) => println!("{s}"),
            Err(e) => eprintln!("error: {e}"),
        }
    } else if !cli.quiet || m.status != RunStatus::Converged {
        println!(
            "{:?} at t = {} after {} steps (theta = {:.3e})",
            m.status, m.t, m.steps, m.theta
        );
        if let Some(b) = m.b_tilde {
            println!("b_tilde = {b:.6e}");
        }
        if let Some(e) = m.u_star_error {
            println!("sup |u_tilde - u_star_tilde| = {e:.3e}");
        }
        if let Some(msg) = &m.message {
            println!("{msg}");
        }
        println!("output in {}", out.display());
    }
    match m.status {
        RunStatus::Converged => 0,
        RunStatus::TimeLimit => EXIT_TIMEOUT,
        RunStatus::PositivityAbort => EXIT_POSITIVITY,
        RunStatus::Interrupted | RunStatus::Running => EXIT_INTERRUPTED,
    }
}
