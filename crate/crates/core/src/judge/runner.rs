//! Subprocess sandbox: each run gets a scratch directory, its own process
//! group, rlimits on address space / CPU time / file size, a wall-clock
//! timeout and a stdout cap.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::JudgeError;

/// How to build and run one language. Command templates are split on
/// whitespace; `{src}`, `{exe}` and `{dir}` expand to the source file, the
/// executable path and the scratch directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerSpec {
    pub file_name: String,
    #[serde(default)]
    pub compile: Option<String>,
    pub run: String,
}

/// Runner specs keyed by lowercase language tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerTable {
    pub runners: BTreeMap<String, RunnerSpec>,
}

impl Default for RunnerTable {
    fn default() -> Self {
        let mut runners = BTreeMap::new();
        runners.insert(
            "python".to_string(),
            RunnerSpec {
                file_name: "main.py".into(),
                compile: None,
                run: "python3 {src}".into(),
            },
        );
        runners.insert(
            "cpp".to_string(),
            RunnerSpec {
                file_name: "main.cpp".into(),
                compile: Some("g++ -O2 -std=c++17 -o {exe} {src}".into()),
                run: "{exe}".into(),
            },
        );
        runners.insert(
            "c".to_string(),
            RunnerSpec {
                file_name: "main.c".into(),
                compile: Some("gcc -O2 -o {exe} {src} -lm".into()),
                run: "{exe}".into(),
            },
        );
        RunnerTable { runners }
    }
}

impl RunnerTable {
    pub fn from_toml(text: &str) -> Result<Self, JudgeError> {
        toml::from_str(text).map_err(|e| JudgeError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, JudgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| JudgeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Looks up a language tag: exact lowercase match first, then the
    /// family (`python3`, `PyPy3` → `python`; `C++ (GCC 9)` → `cpp`).
    pub fn lookup(&self, language_tag: &str) -> Result<&RunnerSpec, JudgeError> {
        let lowered = language_tag.trim().to_ascii_lowercase();
        if let Some(spec) = self.runners.get(&lowered) {
            return Ok(spec);
        }
        let base = lowered.split(['(', ' ']).next().unwrap_or("");
        let family = if base.starts_with("python") || base.starts_with("pypy") || base == "py" {
            "python"
        } else if base.starts_with("c++") || base.starts_with("cpp") || base == "cc" {
            "cpp"
        } else {
            base
        };
        self.runners
            .get(family)
            .ok_or_else(|| JudgeError::MissingRunner(language_tag.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub wall_time_ms: u64,
    pub memory_mb: u64,
    pub output_bytes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            wall_time_ms: 5_000,
            memory_mb: 256,
            output_bytes: 8 * 1024 * 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    WrongAnswer,
    RuntimeError,
    Timeout,
    MemoryExceeded,
    CompileError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub case_index: usize,
    pub outcome: Outcome,
    pub wall_time_ms: u64,
    /// Peak resident set size in KiB, when the platform reports it.
    pub peak_memory_kb: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Trailing whitespace stripped from each line, trailing blank lines dropped.
pub fn normalize_output(bytes: &[u8]) -> Vec<u8> {
    let mut lines: Vec<&[u8]> = bytes
        .split(|b| *b == b'\n')
        .map(|l| {
            let end = l.iter().rposition(|b| !b" \t\r".contains(b)).map_or(0, |p| p + 1);
            &l[..end]
        })
        .collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join(&b'\n')
}

pub fn outputs_match(actual: &[u8], expected: &[u8], strict: bool) -> bool {
    if strict {
        actual == expected
    } else {
        normalize_output(actual) == normalize_output(expected)
    }
}

/// A program written (and, if needed, compiled) into its scratch directory.
pub struct PreparedProgram {
    dir: tempfile::TempDir,
    run_argv: Vec<String>,
    compile_error: Option<String>,
}

fn expand(template: &str, src: &Path, exe: &Path, dir: &Path) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{src}", &src.to_string_lossy())
                .replace("{exe}", &exe.to_string_lossy())
                .replace("{dir}", &dir.to_string_lossy())
        })
        .collect()
}

impl PreparedProgram {
    pub fn prepare(code: &str, spec: &RunnerSpec) -> Result<Self, JudgeError> {
        let dir = tempfile::Builder::new()
            .prefix("refrepair-run-")
            .tempdir()
            .map_err(|e| JudgeError::Infrastructure(format!("scratch dir: {e}")))?;
        let src = dir.path().join(&spec.file_name);
        let exe: PathBuf = dir.path().join("prog");
        std::fs::write(&src, code).map_err(|e| JudgeError::Infrastructure(format!("write source: {e}")))?;
        let run_argv = expand(&spec.run, &src, &exe, dir.path());
        if run_argv.is_empty() {
            return Err(JudgeError::Config("empty run command".into()));
        }
        let mut prepared = PreparedProgram {
            dir,
            run_argv,
            compile_error: None,
        };
        if code.trim().is_empty() {
            prepared.compile_error = Some("empty program".into());
            return Ok(prepared);
        }
        if let Some(compile) = &spec.compile {
            let argv = expand(compile, &src, &exe, prepared.dir.path());
            let compile_limits = Limits {
                wall_time_ms: 60_000,
                memory_mb: 0,
                output_bytes: 1 << 20,
            };
            let run = execute(&argv, prepared.dir.path(), b"", &compile_limits)?;
            if !run.success() {
                let msg = String::from_utf8_lossy(&run.stderr).into_owned();
                prepared.compile_error = Some(if msg.is_empty() { "compilation failed".into() } else { msg });
            }
        }
        Ok(prepared)
    }

    pub fn compile_error(&self) -> Option<&str> {
        self.compile_error.as_deref()
    }

    pub fn run_case(
        &self,
        case_index: usize,
        input: &[u8],
        expected: &[u8],
        limits: &Limits,
        strict: bool,
    ) -> Result<TestVerdict, JudgeError> {
        if let Some(err) = &self.compile_error {
            return Ok(TestVerdict {
                case_index,
                outcome: Outcome::CompileError,
                wall_time_ms: 0,
                peak_memory_kb: None,
                detail: Some(err.lines().next().unwrap_or("").to_string()),
            });
        }
        let run = execute(&self.run_argv, self.dir.path(), input, limits)?;
        let stderr = String::from_utf8_lossy(&run.stderr);
        let mem_hit = limits.memory_mb > 0
            && (run.peak_memory_kb.is_some_and(|kb| kb >= limits.memory_mb * 1024 * 9 / 10)
                || stderr.contains("MemoryError")
                || stderr.contains("bad_alloc")
                || stderr.contains("Cannot allocate memory"));
        let (outcome, detail) = if run.timed_out {
            (Outcome::Timeout, None)
        } else if run.output_truncated {
            (Outcome::RuntimeError, Some("output limit exceeded".to_string()))
        } else if !run.success() {
            let why = match (run.exit_code, run.signal) {
                (_, Some(sig)) => format!("killed by signal {sig}"),
                (Some(code), _) => format!("exit status {code}"),
                _ => "abnormal exit".to_string(),
            };
            if mem_hit {
                (Outcome::MemoryExceeded, Some(why))
            } else {
                (Outcome::RuntimeError, Some(why))
            }
        } else if outputs_match(&run.stdout, expected, strict) {
            (Outcome::Pass, None)
        } else {
            (Outcome::WrongAnswer, None)
        };
        Ok(TestVerdict {
            case_index,
            outcome,
            wall_time_ms: run.wall_time.as_millis() as u64,
            peak_memory_kb: run.peak_memory_kb,
            detail,
        })
    }
}

struct RawRun {
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    exit_code: Option<i32>,
    signal: Option<i32>,
    timed_out: bool,
    output_truncated: bool,
    wall_time: Duration,
    peak_memory_kb: Option<u64>,
}

impl RawRun {
    fn success(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }
}

/// Reads up to `cap` bytes. Past the cap it raises `overflow` and stops
/// reading, which closes the pipe on the writer; without a flag the rest is
/// drained and dropped.
fn read_capped(mut r: impl Read, cap: usize, overflow: Option<&AtomicBool>) -> (Vec<u8>, bool) {
    let mut out = Vec::new();
    let mut buf = [0u8; 8192];
    let mut truncated = false;
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => return (out, truncated),
            Ok(_) if truncated => {}
            Ok(n) if out.len() + n > cap => {
                out.extend_from_slice(&buf[..cap - out.len()]);
                truncated = true;
                if let Some(flag) = overflow {
                    flag.store(true, Ordering::SeqCst);
                    return (out, true);
                }
            }
            Ok(n) => out.extend_from_slice(&buf[..n]),
        }
    }
}

fn execute(argv: &[String], dir: &Path, input: &[u8], limits: &Limits) -> Result<RawRun, JudgeError> {
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(dir)
        .env("HOME", dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let memory_bytes = limits.memory_mb.saturating_mul(1024 * 1024);
    let cpu_secs = limits.wall_time_ms.div_ceil(1000) + 1;
    let fsize = limits.output_bytes as u64;
    // SAFETY: only async-signal-safe calls (setrlimit) run between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            let set = |res, value: u64| {
                let lim = libc::rlimit {
                    rlim_cur: value as libc::rlim_t,
                    rlim_max: value as libc::rlim_t,
                };
                libc::setrlimit(res, &lim)
            };
            if memory_bytes > 0 {
                set(libc::RLIMIT_AS, memory_bytes);
            }
            set(libc::RLIMIT_CPU, cpu_secs);
            set(libc::RLIMIT_FSIZE, fsize);
            set(libc::RLIMIT_CORE, 0);
            Ok(())
        });
    }
    let start = Instant::now();
    let mut child = cmd
        .spawn()
        .map_err(|e| JudgeError::Infrastructure(format!("cannot spawn `{}`: {e}", argv[0])))?;
    let pid = child.id() as libc::pid_t;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = input.to_vec();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let stdout = child.stdout.take().expect("piped stdout");
    let cap = limits.output_bytes;
    let overflow = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&overflow);
    let out_reader = std::thread::spawn(move || read_capped(stdout, cap, Some(&flag)));
    let stderr = child.stderr.take().expect("piped stderr");
    let err_reader = std::thread::spawn(move || read_capped(stderr, 64 * 1024, None));

    let deadline = Duration::from_millis(limits.wall_time_ms);
    let mut status: libc::c_int = 0;
    // SAFETY: rusage is plain data; wait4 fills it in.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let mut timed_out = false;
    loop {
        // SAFETY: pid is our direct child, not yet reaped.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break;
        }
        if r < 0 {
            return Err(JudgeError::Infrastructure(format!(
                "wait4 failed: {}",
                std::io::Error::last_os_error()
            )));
        }
        let over_cap = overflow.load(Ordering::SeqCst);
        if over_cap || start.elapsed() >= deadline {
            timed_out = !over_cap;
            // SAFETY: signalling our own process group.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
                libc::wait4(pid, &mut status, 0, &mut usage);
            }
            break;
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let wall_time = start.elapsed();
    // Reap stragglers in the group so the pipes close.
    // SAFETY: as above.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let _ = writer.join();
    let (stdout, output_truncated) = out_reader.join().unwrap_or_default();
    let (stderr, _) = err_reader.join().unwrap_or_default();

    let (exit_code, signal) = if libc::WIFEXITED(status) {
        (Some(libc::WEXITSTATUS(status)), None)
    } else if libc::WIFSIGNALED(status) {
        (None, Some(libc::WTERMSIG(status)))
    } else {
        (None, None)
    };
    let peak = usage.ru_maxrss;
    Ok(RawRun {
        stdout,
        stderr,
        exit_code,
        signal,
        timed_out,
        output_truncated,
        wall_time,
        peak_memory_kb: (peak > 0).then_some(peak as u64),
    })
}
