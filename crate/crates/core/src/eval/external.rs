//! Compile-and-run measurement through shell commands.
//!
//! For each candidate a fresh directory under the work root receives the
//! emitted source (`candidate.<ext>`) and `pattern.txt`. The build command and
//! then the run command are executed there with `sh -c`, each in its own
//! process group so that everything they spawn can be killed. The run command
//! reports its time as a single `TIME_SECONDS=<float>` line on stdout and, when
//! a reference output is configured, writes `output.txt`.
//!
//! Environment passed to both commands: `OFFLOAD_GENOME` (bit string, empty
//! when no loop is offloaded), `OFFLOAD_BLOCKS` (comma-separated replaced
//! record ids), `OFFLOAD_BACKEND` and `OFFLOAD_CANDIDATE` (source file name).

use std::fs::{self, File};
use std::io;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::validate::{parse_numbers, validate_output, DEFAULT_REL_TOL};
use super::{EvaluationRequest, Evaluator, MeasurementResult, Validity};

pub const TIME_LINE_PREFIX: &str = "TIME_SECONDS=";

const OUTPUT_FILE: &str = "output.txt";
const DIAGNOSTIC_TAIL: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCommands {
    #[serde(default)]
    pub build_cmd: Option<String>,
    pub run_cmd: String,
    #[serde(default)]
    pub reference_output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalParams {
    /// Wall-clock budget for build and run together.
    pub timeout_seconds: f64,
    pub rel_tol: f64,
    /// Allow concurrent measurements.
    pub parallel: bool,
    pub keep_work_dirs: bool,
}

impl Default for ExternalParams {
    fn default() -> Self {
        ExternalParams { timeout_seconds: 300.0, rel_tol: DEFAULT_REL_TOL, parallel: false, keep_work_dirs: false }
    }
}

#[derive(Debug)]
pub struct ExternalRunner {
    commands: ExternalCommands,
    params: ExternalParams,
    reference: Option<Vec<f64>>,
    work_root: PathBuf,
    counter: AtomicU64,
}

enum Outcome {
    Exited(Option<i32>),
    TimedOut,
}

impl ExternalRunner {
    /// Checks the configuration and reads the reference output up front.
    pub fn new(commands: ExternalCommands, params: ExternalParams, work_root: &Path) -> Result<Self, String> {
        if !(params.timeout_seconds.is_finite() && params.timeout_seconds > 0.0) {
            return Err(format!("timeout_seconds must be positive, got {}", params.timeout_seconds));
        }
        if !(params.rel_tol.is_finite() && params.rel_tol >= 0.0) {
            return Err(format!("rel_tol must be nonnegative, got {}", params.rel_tol));
        }
        if commands.run_cmd.trim().is_empty() {
            return Err("run_cmd is empty".into());
        }
        let reference = match &commands.reference_output {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("cannot read reference output {}: {e}", p.display()))?;
                Some(parse_numbers(&text).map_err(|e| format!("reference output {}: {e}", p.display()))?)
            }
            None => None,
        };
        fs::create_dir_all(work_root).map_err(|e| format!("cannot create work directory {}: {e}", work_root.display()))?;
        Ok(ExternalRunner { commands, params, reference, work_root: work_root.to_path_buf(), counter: AtomicU64::new(0) })
    }

    fn prepare(&self, dir: &Path, request: &EvaluationRequest<'_>) -> io::Result<()> {
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::create_dir_all(dir)?;
        fs::write(dir.join(request.code.backend.file_name()), &request.code.text)?;
        fs::write(
            dir.join("pattern.txt"),
            format!("genome={}\nblocks={}\n", request.pattern.genome, request.replaced_blocks.join(",")),
        )
    }

    fn run_in(&self, dir: &Path, request: &EvaluationRequest<'_>) -> MeasurementResult {
        if let Err(e) = self.prepare(dir, request) {
            return MeasurementResult::infeasible(Validity::RuntimeError, format!("work directory {}: {e}", dir.display()));
        }
        let deadline = Instant::now() + Duration::from_secs_f64(self.params.timeout_seconds);
        let env = [
            ("OFFLOAD_GENOME", request.pattern.genome.to_string()),
            ("OFFLOAD_BLOCKS", request.replaced_blocks.join(",")),
            ("OFFLOAD_BACKEND", request.code.backend.tag().to_string()),
            ("OFFLOAD_CANDIDATE", request.code.backend.file_name()),
        ];

        if let Some(build) = &self.commands.build_cmd {
            match run_shell(build, dir, "build", &env, deadline) {
                Err(e) => return MeasurementResult::infeasible(Validity::CompileError, format!("cannot start build: {e}")),
                Ok(Outcome::TimedOut) => return MeasurementResult::infeasible(Validity::Timeout, "build timed out"),
                Ok(Outcome::Exited(Some(0))) => {}
                Ok(Outcome::Exited(code)) => {
                    return MeasurementResult::infeasible(
                        Validity::CompileError,
                        format!("build exited with {}\n{}", describe(code), tail(&dir.join("build.stderr"))),
                    )
                }
            }
        }
        match run_shell(&self.commands.run_cmd, dir, "run", &env, deadline) {
            Err(e) => return MeasurementResult::infeasible(Validity::RuntimeError, format!("cannot start run: {e}")),
            Ok(Outcome::TimedOut) => return MeasurementResult::infeasible(Validity::Timeout, "run timed out"),
            Ok(Outcome::Exited(Some(0))) => {}
            Ok(Outcome::Exited(code)) => {
                return MeasurementResult::infeasible(
                    Validity::RuntimeError,
                    format!("run exited with {}\n{}", describe(code), tail(&dir.join("run.stderr"))),
                )
            }
        }

        let stdout = fs::read_to_string(dir.join("run.stdout")).unwrap_or_default();
        let time = match parse_time(&stdout) {
            Ok(t) => t,
            Err(e) => return MeasurementResult::infeasible(Validity::RuntimeError, e),
        };
        if let Some(reference) = &self.reference {
            let text = match fs::read_to_string(dir.join(OUTPUT_FILE)) {
                Ok(t) => t,
                Err(e) => {
                    return MeasurementResult::infeasible(Validity::RuntimeError, format!("cannot read {OUTPUT_FILE}: {e}"))
                }
            };
            match parse_numbers(&text) {
                Ok(out) if validate_output(reference, &out, self.params.rel_tol) => {}
                Ok(out) => {
                    return MeasurementResult::infeasible(
                        Validity::NumericMismatch,
                        format!("{OUTPUT_FILE} differs from the reference ({} values, expected {})", out.len(), reference.len()),
                    )
                }
                Err(e) => return MeasurementResult::infeasible(Validity::NumericMismatch, format!("{OUTPUT_FILE}: {e}")),
            }
        }
        MeasurementResult::valid(time)
    }
}

impl Evaluator for ExternalRunner {
    fn id(&self) -> &str {
        "external"
    }

    fn concurrency_safe(&self) -> bool {
        self.params.parallel
    }

    fn measure(&self, request: &EvaluationRequest<'_>) -> MeasurementResult {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let dir = self.work_root.join(format!("eval-{n:06}"));
        let result = self.run_in(&dir, request);
        if !self.params.keep_work_dirs {
            let _ = fs::remove_dir_all(&dir);
        }
        result
    }
}

fn parse_time(stdout: &str) -> Result<f64, String> {
    let lines: Vec<&str> = stdout
        .lines()
        .filter_map(|l| l.trim().strip_prefix(TIME_LINE_PREFIX))
        .collect();
    match lines.as_slice() {
        [v] => match v.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
            _ => Err(format!("unparseable time line `{TIME_LINE_PREFIX}{v}`")),
        },
        [] => Err(format!("run printed no {TIME_LINE_PREFIX} line")),
        _ => Err(format!("run printed {} {TIME_LINE_PREFIX} lines, expected one", lines.len())),
    }
}

fn describe(code: Option<i32>) -> String {
    match code {
        Some(c) => format!("status {c}"),
        None => "a signal".to_string(),
    }
}

fn tail(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap_or_default();
    let start = text.len().saturating_sub(DIAGNOSTIC_TAIL);
    let start = (start..=text.len()).find(|i| text.is_char_boundary(*i)).unwrap_or(text.len());
    text[start..].to_string()
}

fn run_shell(cmd: &str, dir: &Path, stage: &str, env: &[(&str, String)], deadline: Instant) -> io::Result<Outcome> {
    let stdout = File::create(dir.join(format!("{stage}.stdout")))?;
    let stderr = File::create(dir.join(format!("{stage}.stderr")))?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(dir)
        .envs(env.iter().map(|(k, v)| (*k, v.as_str())))
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .process_group(0)
        .spawn()?;
    let pgid = child.id() as libc::pid_t;
    loop {
        if exited(&child) {
            // Leftover background processes of the command go with it.
            kill_group(pgid);
            let status = child.wait()?;
            return Ok(Outcome::Exited(status.code()));
        }
        let now = Instant::now();
        if now >= deadline {
            kill_group(pgid);
            child.wait()?;
            return Ok(Outcome::TimedOut);
        }
        std::thread::sleep((deadline - now).min(Duration::from_millis(5)));
    }
}

/// Whether the child has terminated, without reaping it, so its pid (and
/// thus the process group id) cannot be reused yet.
fn exited(child: &Child) -> bool {
    // SAFETY: waitid writes only into `info`; WNOWAIT leaves the child waitable.
    unsafe {
        let mut info: libc::siginfo_t = std::mem::zeroed();
        let rc = libc::waitid(
            libc::P_PID,
            child.id() as libc::id_t,
            &mut info,
            libc::WEXITED | libc::WNOHANG | libc::WNOWAIT,
        );
        rc == 0 && info.si_pid() != 0
    }
}

fn kill_group(pgid: libc::pid_t) {
    // SAFETY: plain syscall; ESRCH when the group is already gone is fine.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_line() {
        assert_eq!(parse_time("hello\nTIME_SECONDS=0.5\n"), Ok(0.5));
        assert_eq!(parse_time("  TIME_SECONDS= 2 \n"), Ok(2.0));
        assert!(parse_time("").is_err());
        assert!(parse_time("TIME_SECONDS=abc").is_err());
        assert!(parse_time("TIME_SECONDS=-1").is_err());
        assert!(parse_time("TIME_SECONDS=1\nTIME_SECONDS=2").is_err());
    }

    #[test]
    fn config_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let cmds = ExternalCommands { build_cmd: None, run_cmd: "true".into(), reference_output: None };
        let bad = ExternalParams { timeout_seconds: 0.0, ..Default::default() };
        assert!(ExternalRunner::new(cmds.clone(), bad, dir.path()).is_err());
        let missing = ExternalCommands { reference_output: Some(dir.path().join("nope.txt")), ..cmds.clone() };
        assert!(ExternalRunner::new(missing, ExternalParams::default(), dir.path()).is_err());
        assert!(ExternalRunner::new(cmds, ExternalParams::default(), dir.path()).is_ok());
    }
}
