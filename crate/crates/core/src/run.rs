//! A flow run with its output directory: trace, manifest, solution dump and
//! checkpoints, and bit-exact resumption from a checkpoint.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{PsiSpec, Scenario, ScenarioConfig};
use crate::diagnostics::{decay_fit, sample, DecayFit, DiagnosticsRecord, HarnackFit, HarnackWindows, SampleOptions};
use crate::error::{Error, Result};
use crate::flow::{elliptic_solution, normalize, Control, FlowRunner, FlowState, MaxPrincipleMonitor, StopReason};
use crate::io::{read_json, read_scalar_field, sha256_hex, write_json, write_scalar_field, TraceWriter};

pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOLUTION_FILE: &str = "solution.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CHECKPOINT_FIELD: &str = "checkpoint_u.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Converged,
    TimeLimit,
    PositivityAbort,
    Interrupted,
}

/// Provenance and results of a run, rewritten at the start and the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ScenarioConfig,
    pub options_hash: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub t: f64,
    pub steps: u64,
    /// Oscillation of `udot` at the last step.
    pub theta: f64,
    pub b_tilde: Option<f64>,
    pub decay: Option<DecayFit>,
    pub harnack: Option<HarnackFit>,
    pub monitor: MaxPrincipleMonitor,
    /// `sup |u_tilde - u_star_tilde|` for manufactured scenarios.
    pub u_star_error: Option<f64>,
    pub solution: Option<String>,
    pub trace: String,
}

/// State needed to continue a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub config: ScenarioConfig,
    pub options_hash: String,
    pub t_bits: u64,
    pub step: u64,
    pub monitor: MaxPrincipleMonitor,
    pub harnack: Option<HarnackWindows>,
    /// `(t, theta)` at every trace row.
    pub decay_samples: Vec<(f64, f64)>,
    pub trace_rows: usize,
    pub last_sample_step: Option<u64>,
    pub field: String,
    /// Directory relative paths in the config are resolved against.
    pub config_dir: PathBuf,
}

/// External controls of a run.
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    /// Set asynchronously to stop at the next step with a checkpoint.
    pub interrupt: Arc<AtomicBool>,
    /// Behaves as an interrupt once this many steps have been taken in total.
    pub stop_after_steps: Option<u64>,
}

/// Outcome handed back to the caller.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub state: Option<FlowState>,
}

/// Hash of everything that determines the trajectory: the resolved config
/// and, for file-based `psi`, the file contents.
pub fn options_hash(config: &ScenarioConfig, base: &Path) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    let extra = match &config.psi {
        PsiSpec::File { path } => std::fs::read(base.join(path))?,
        _ => Vec::new(),
    };
    Ok(sha256_hex([json.as_slice(), extra.as_slice()]))
}

struct Progress {
    harnack: Option<HarnackWindows>,
    decay_samples: Vec<(f64, f64)>,
    trace_rows: usize,
    last_sample_step: Option<u64>,
}

/// Runs `scenario` writing into `out`. `base` resolves relative paths in
/// the config. `on_row` sees every trace row as it is written.
pub fn run_scenario(
    scenario: &Scenario,
    base: &Path,
    out: &Path,
    control: &RunControl,
    on_row: &mut dyn FnMut(u64, &DiagnosticsRecord),
) -> Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    let hash = options_hash(&scenario.config, base)?;
    let trace = TraceWriter::create(&out.join(TRACE_FILE))?;
    let progress = Progress {
        harnack: scenario
            .config
            .diagnostics
            .harnack
            .then(|| HarnackWindows::new(scenario.config.diagnostics.alpha_c)),
        decay_samples: Vec::new(),
        trace_rows: 0,
        last_sample_step: None,
    };
    let state = match FlowState::new(scenario.u0.clone(), 0.0, &scenario.background) {
        Ok(s) => s,
        Err(e @ Error::PositivityLoss { .. }) => {
            let m = abort_manifest(scenario, &hash, 0.0, 0, &e);
            write_json(&out.join(MANIFEST_FILE), &m)?;
            return Ok(RunOutcome {
                manifest: m,
                state: None,
            });
        }
        Err(e) => return Err(e),
    };
    let base = std::path::absolute(if base.as_os_str().is_empty() { Path::new(".") } else { base })?;
    drive(
        scenario,
        &base,
        hash,
        out,
        control,
        on_row,
        trace,
        progress,
        state,
        0,
        MaxPrincipleMonitor::default(),
    )
}

/// Continues from `checkpoint_path` (a `checkpoint.json` inside a run
/// directory). A config passed in `expected`, with its base directory, must
/// hash to the checkpoint's options hash.
pub fn resume_run(
    checkpoint_path: &Path,
    expected: Option<(&ScenarioConfig, &Path)>,
    control: &RunControl,
    on_row: &mut dyn FnMut(u64, &DiagnosticsRecord),
) -> Result<RunOutcome> {
    let out = checkpoint_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cp: Checkpoint = read_json(checkpoint_path)?;
    let base = expected.map_or(cp.config_dir.as_path(), |e| e.1).to_path_buf();
    let base = base.as_path();
    let hash = options_hash(&cp.config, base)?;
    if hash != cp.options_hash {
        return Err(Error::Checkpoint(format!(
            "options hash mismatch: checkpoint records {}, its config hashes to {hash}",
            cp.options_hash
        )));
    }
    if let Some((cfg, _)) = expected {
        let h = options_hash(cfg, base)?;
        if h != cp.options_hash {
            return Err(Error::Checkpoint(format!(
                "options hash mismatch: config {h}, checkpoint {}",
                cp.options_hash
            )));
        }
    }
    if let Ok(m) = read_json::<Manifest>(&out.join(MANIFEST_FILE)) {
        if m.options_hash != cp.options_hash {
            return Err(Error::Checkpoint(format!(
                "options hash mismatch: manifest {}, checkpoint {}",
                m.options_hash, cp.options_hash
            )));
        }
    }
    let scenario = cp.config.build(base)?;
    let (_, u) = read_scalar_field(&out.join(&cp.field))?;
    if !u.grid.same_shape(&scenario.grid) {
        return Err(Error::Checkpoint(
            "checkpoint field does not match the configured grid".into(),
        ));
    }
    let state = FlowState::new(u, f64::from_bits(cp.t_bits), &scenario.background)?;
    let trace = TraceWriter::reopen(&out.join(TRACE_FILE), cp.trace_rows)?;
    let progress = Progress {
        harnack: cp.harnack,
        decay_samples: cp.decay_samples,
        trace_rows: cp.trace_rows,
        last_sample_step: cp.last_sample_step,
    };
    drive(
        &scenario,
        base,
        cp.options_hash,
        &out,
        control,
        on_row,
        trace,
        progress,
        state,
        cp.step,
        cp.monitor,
    )
}

fn abort_manifest(scenario: &Scenario, hash: &str, t: f64, steps: u64, e: &Error) -> Manifest {
    Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: scenario.config.clone(),
        options_hash: hash.into(),
        status: RunStatus::PositivityAbort,
        message: Some(e.to_string()),
        t,
        steps,
        theta: f64::NAN,
        b_tilde: None,
        decay: None,
        harnack: None,
        monitor: MaxPrincipleMonitor::default(),
        u_star_error: None,
        solution: None,
        trace: TRACE_FILE.into(),
    }
}

#[allow(clippy::too_many_arguments)]
fn drive(
    scenario: &Scenario,
    base: &Path,
    hash: String,
    out: &Path,
    control: &RunControl,
    on_row: &mut dyn FnMut(u64, &DiagnosticsRecord),
    mut trace: TraceWriter,
    mut progress: Progress,
    state: FlowState,
    step: u64,
    monitor: MaxPrincipleMonitor,
) -> Result<RunOutcome> {
    let bg = &scenario.background;
    let cfg = &scenario.config;
    let sample_opts = SampleOptions {
        gauduchon_residual: cfg.diagnostics.gauduchon_residual,
    };
    let mut manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        options_hash: hash.clone(),
        status: RunStatus::Running,
        message: None,
        t: state.t,
        steps: step,
        theta: state.oscillation(),
        b_tilde: None,
        decay: None,
        harnack: None,
        monitor,
        u_star_error: None,
        solution: None,
        trace: TRACE_FILE.into(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;

    let mut runner = FlowRunner::resume(bg, state, step, monitor, cfg.flow.clone());
    let every = cfg.flow.sample_every;
    let checkpoint_every = cfg.output.checkpoint_every;
    let mut failure: Option<Error> = None;
    let mut interrupted = false;

    let mut write_row = |runner: &FlowRunner, progress: &mut Progress| -> Result<()> {
        let mut row = sample(&runner.state, bg, sample_opts)?;
        if let Some(h) = progress.harnack.as_mut() {
            row.harnack_q = h.observe(&runner.state, bg)?;
        }
        trace.write(&row)?;
        progress.decay_samples.push((row.t, row.theta));
        progress.trace_rows += 1;
        progress.last_sample_step = Some(runner.step);
        on_row(runner.step, &row);
        Ok(())
    };
    let write_checkpoint = |runner: &FlowRunner, progress: &Progress| -> Result<()> {
        write_scalar_field(&out.join(CHECKPOINT_FIELD), "u", &runner.state.u)?;
        let cp = Checkpoint {
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            options_hash: hash.clone(),
            t_bits: runner.state.t.to_bits(),
            step: runner.step,
            monitor: runner.monitor,
            harnack: progress.harnack.clone(),
            decay_samples: progress.decay_samples.clone(),
            trace_rows: progress.trace_rows,
            last_sample_step: progress.last_sample_step,
            field: CHECKPOINT_FIELD.into(),
            config_dir: base.to_path_buf(),
        };
        write_json(&out.join(CHECKPOINT_FILE), &cp)
    };

    let result = runner.run(|r, _info| {
        let step = r.step;
        let due = step % every == 0 && progress.last_sample_step != Some(step);
        if due {
            if let Err(e) = write_row(r, &mut progress) {
                failure = Some(e);
                return Control::Stop;
            }
        }
        if checkpoint_every > 0 && step > 0 && step % checkpoint_every == 0 {
            if let Err(e) = write_checkpoint(r, &progress) {
                failure = Some(e);
                return Control::Stop;
            }
        }
        let limit = control.stop_after_steps.is_some_and(|s| step >= s);
        if control.interrupt.load(Ordering::SeqCst) || limit {
            interrupted = true;
            return Control::Stop;
        }
        Control::Continue
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let reason = match result {
        Ok(r) => r,
        Err(e @ (Error::PositivityLoss { .. } | Error::DtUnderflow { .. })) => {
            manifest.status = RunStatus::PositivityAbort;
            manifest.message = Some(e.to_string());
            manifest.t = runner.state.t;
            manifest.steps = runner.step;
            manifest.monitor = runner.monitor;
            write_json(&out.join(MANIFEST_FILE), &manifest)?;
            return Ok(RunOutcome {
                manifest,
                state: Some(runner.state),
            });
        }
        Err(e) => return Err(e),
    };
    let status = match reason {
        _ if interrupted && !runner.converged() => RunStatus::Interrupted,
        StopReason::Interrupted => RunStatus::Interrupted,
        StopReason::Converged => RunStatus::Converged,
        StopReason::TimeLimit => RunStatus::TimeLimit,
    };
    manifest.status = status;
    manifest.t = runner.state.t;
    manifest.steps = runner.step;
    manifest.theta = runner.state.oscillation();
    manifest.monitor = runner.monitor;
    if status == RunStatus::Interrupted {
        write_checkpoint(&runner, &progress)?;
        manifest.message = Some(format!("checkpoint written to {CHECKPOINT_FILE}"));
        write_json(&out.join(MANIFEST_FILE), &manifest)?;
        return Ok(RunOutcome {
            manifest,
            state: Some(runner.state),
        });
    }
    if progress.last_sample_step != Some(runner.step) {
        write_row(&runner, &mut progress)?;
    }
    // a final checkpoint lets `resume` on a finished run return at once
    write_checkpoint(&runner, &progress)?;
    let sol = elliptic_solution(&runner.state, bg)?;
    write_scalar_field(&out.join(SOLUTION_FILE), "u_tilde_inf", &sol.u_tilde_inf)?;
    manifest.solution = Some(SOLUTION_FILE.into());
    manifest.b_tilde = Some(sol.b_tilde);
    manifest.decay = decay_fit(&progress.decay_samples).ok();
    manifest.harnack = progress.harnack.as_ref().and_then(|h| h.series.fit().ok());
    manifest.u_star_error = scenario
        .u_star
        .as_ref()
        .map(|us| normalize(us, bg).zip_map(&sol.u_tilde_inf, |a, b| a - b).max_abs());
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome {
        manifest,
        state: Some(runner.state),
    })
}

/// Directory of a checkpoint path, or the path itself when it is a directory.
pub fn checkpoint_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CHECKPOINT_FILE)
    } else {
        path.to_path_buf()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_trace;

    fn small(text: &str) -> Scenario {
        ScenarioConfig::from_toml(text).unwrap().build(Path::new(".")).unwrap()
    }

    const MANUFACTURED: &str = "n = 2\nN = 8\n[psi]\nkind = \"manufactured\"\n\
        u_star = [{ amp = 0.05, freq = [1, 0, -1, 0] }, { amp = -0.05, freq = [1, 0, 1, 0] }]\n\
        [flow]\nsample_every = 5\ntol_osc = 1e-6\n[diagnostics]\nharnack = true\n";

    #[test]
    fn flat_stationary_stops_at_first_sample() {
        let dir = tempfile::tempdir().unwrap();
        let s = small("n = 2\nN = 8");
        let out = run_scenario(&s, Path::new("."), dir.path(), &RunControl::default(), &mut |_, _| {}).unwrap();
        assert_eq!(out.manifest.status, RunStatus::Converged);
        assert_eq!(out.manifest.steps, 0);
        assert_eq!(read_trace(&dir.path().join(TRACE_FILE)).unwrap().len(), 1);
        assert_eq!(out.manifest.b_tilde, Some(0.0));
    }

    #[test]
    fn time_limit_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let s = small(&format!("{MANUFACTURED}\n").replace("tol_osc = 1e-6", "tol_osc = 1e-6\nt_max = 0.001"));
        let out = run_scenario(&s, Path::new("."), dir.path(), &RunControl::default(), &mut |_, _| {}).unwrap();
        assert_eq!(out.manifest.status, RunStatus::TimeLimit);
    }

    #[test]
    fn interrupt_and_resume_is_bit_exact() {
        let s = small(MANUFACTURED);
        let full = tempfile::tempdir().unwrap();
        let a = run_scenario(&s, Path::new("."), full.path(), &RunControl::default(), &mut |_, _| {}).unwrap();
        assert_eq!(a.manifest.status, RunStatus::Converged);
        let part = tempfile::tempdir().unwrap();
        let ctl = RunControl {
            stop_after_steps: Some(7),
            ..Default::default()
        };
        let b = run_scenario(&s, Path::new("."), part.path(), &ctl, &mut |_, _| {}).unwrap();
        assert_eq!(b.manifest.status, RunStatus::Interrupted);
        let c = resume_run(
            &part.path().join(CHECKPOINT_FILE),
            None,
            &RunControl::default(),
            &mut |_, _| {},
        )
        .unwrap();
        assert_eq!(c.manifest.status, RunStatus::Converged);
        let ua = a.state.unwrap().u;
        let uc = c.state.unwrap().u;
        assert!(ua.values.iter().zip(&uc.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        let ta = std::fs::read(full.path().join(TRACE_FILE)).unwrap();
        let tc = std::fs::read(part.path().join(TRACE_FILE)).unwrap();
        assert_eq!(ta, tc);
        let (ma, mc) = (a.manifest, c.manifest);
        assert_eq!((ma.t.to_bits(), ma.steps, ma.b_tilde), (mc.t.to_bits(), mc.steps, mc.b_tilde));
        assert_eq!((ma.harnack, ma.decay), (mc.harnack, mc.decay));
        let again = resume_run(
            &full.path().join(CHECKPOINT_FILE),
            None,
            &RunControl::default(),
            &mut |_, _| {},
        )
        .unwrap();
        assert_eq!(
            (again.manifest.status, again.manifest.steps),
            (RunStatus::Converged, ma.steps)
        );
        assert_eq!(std::fs::read(full.path().join(TRACE_FILE)).unwrap(), ta);
        let mut other = s.config.clone();
        other.flow.cfl = 0.1;
        let e = resume_run(
            &part.path().join(CHECKPOINT_FILE),
            Some((&other, Path::new("."))),
            &RunControl::default(),
            &mut |_, _| {},
        )
        .unwrap_err();
        assert!(e.to_string().contains("options hash"), "{e}");
    }
}
