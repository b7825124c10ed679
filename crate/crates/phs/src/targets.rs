//! Black-box objective adapters: built-in analytic test functions and a
//! language-neutral subprocess protocol.
//!
//! Subprocess targets receive every parameter twice, as a pair of argv
//! entries `--param` `name=value` and as an environment variable
//! `PHS_PARAM_<NAME>` (name uppercased), plus the repetition index in
//! `PHS_REP`. The last non-blank line of standard output is parsed as a
//! decimal or scientific-notation real; a nonzero exit or unparsable output
//! fails the trial with the captured standard error as diagnostic.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ParamValue, ParameterKind, ParameterSet, SearchSpace};

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("unknown builtin target `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}` needs at least {needed} continuous parameter(s), space has {got}")]
    WrongArity {
        name: String,
        needed: usize,
        got: usize,
    },
    #[error("subprocess command is empty")]
    EmptyCommand,
    #[error("spawn failure for `{command}`: {message}")]
    Spawn { command: String, message: String },
    #[error("timeout after {0} ms")]
    Timeout(u64),
    #[error("nonzero exit ({code}); stderr: {stderr}")]
    NonZeroExit { code: String, stderr: String },
    #[error("output parse failure on last line `{last_line}`; stderr: {stderr}")]
    UnparsableOutput { last_line: String, stderr: String },
    #[error("non-finite result `{0}`")]
    NonFiniteResult(String),
    #[error("i/o error while running target: {0}")]
    Io(String),
}

/// Declarative description of a target, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Builtin {
        name: String,
        /// Only read by `sleep_then_quadratic`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sleep_ms: Option<u64>,
    },
    Subprocess {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_ms: Option<u64>,
    },
}

/// A runnable objective. Implementations must be safe to call from several
/// workers at once.
pub trait Target: Send + Sync {
    fn eval(
        &self,
        space: &SearchSpace,
        set: &ParameterSet,
        repetition: u32,
    ) -> Result<f64, TargetError>;
}

pub const BUILTIN_NAMES: [&str; 4] = ["griewank", "sphere", "rosenbrock", "sleep_then_quadratic"];

/// Instantiate a target from its spec, validating builtin names and arity
/// against the space up front.
pub fn build_target(
    spec: &TargetSpec,
    space: &SearchSpace,
) -> Result<Box<dyn Target>, TargetError> {
    match spec {
        TargetSpec::Builtin { name, sleep_ms } => {
            let kind = BuiltinKind::parse(name)?;
            let arity = continuous_values(space, &sample_zeros(space)).len();
            if arity < kind.min_arity() {
                return Err(TargetError::WrongArity {
                    name: name.clone(),
                    needed: kind.min_arity(),
                    got: arity,
                });
            }
            Ok(Box::new(BuiltinTarget {
                kind,
                sleep: Duration::from_millis(sleep_ms.unwrap_or(1000)),
            }))
        }
        TargetSpec::Subprocess {
            command,
            args,
            timeout_ms,
        } => {
            if command.trim().is_empty() {
                return Err(TargetError::EmptyCommand);
            }
            Ok(Box::new(SubprocessTarget {
                command: command.clone(),
                args: args.clone(),
                timeout: timeout_ms.map(Duration::from_millis),
            }))
        }
    }
}

fn sample_zeros(space: &SearchSpace) -> ParameterSet {
    // Arity checking only needs the count of continuous params; build a
    // dummy set with one value per spec.
    let values = space
        .specs()
        .iter()
        .map(|s| match &s.kind {
            ParameterKind::Continuous { low, .. } => ParamValue::Num(*low),
            ParameterKind::Discrete { values } => ParamValue::Num(values[0]),
            ParameterKind::Categorical { values } | ParameterKind::Opaque { values } => {
                ParamValue::Text(values[0].clone())
            }
        })
        .collect();
    ParameterSet::new(values)
}

/// Continuous parameter values of `set`, in space order.
fn continuous_values(space: &SearchSpace, set: &ParameterSet) -> Vec<f64> {
    space
        .specs()
        .iter()
        .zip(set.values())
        .filter(|(spec, _)| spec.kind.is_continuous())
        .map(|(_, v)| v.as_num().expect("continuous value is numeric"))
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum BuiltinKind {
    Griewank,
    Sphere,
    Rosenbrock,
    SleepThenQuadratic,
}

impl BuiltinKind {
    fn parse(name: &str) -> Result<Self, TargetError> {
        match name {
            "griewank" => Ok(Self::Griewank),
            "sphere" => Ok(Self::Sphere),
            "rosenbrock" => Ok(Self::Rosenbrock),
            "sleep_then_quadratic" => Ok(Self::SleepThenQuadratic),
            other => Err(TargetError::UnknownBuiltin(other.to_string())),
        }
    }

    fn min_arity(self) -> usize {
        match self {
            Self::Rosenbrock => 2,
            _ => 1,
        }
    }
}

struct BuiltinTarget {
    kind: BuiltinKind,
    sleep: Duration,
}

impl Target for BuiltinTarget {
    fn eval(
        &self,
        space: &SearchSpace,
        set: &ParameterSet,
        _repetition: u32,
    ) -> Result<f64, TargetError> {
        let x = continuous_values(space, set);
        Ok(match self.kind {
            BuiltinKind::Griewank => griewank(&x),
            BuiltinKind::Sphere => sphere(&x),
            BuiltinKind::Rosenbrock => rosenbrock(&x),
            BuiltinKind::SleepThenQuadratic => {
                if !self.sleep.is_zero() {
                    std::thread::sleep(self.sleep);
                }
                x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
            }
        })
    }
}

/// Griewank function: 1 + sum(x_i^2 / 4000) - prod(cos(x_i / sqrt(i))),
/// i starting at 1. Global minimum 0 at the origin.
pub fn griewank(x: &[f64]) -> f64 {
    assert!(!x.is_empty(), "griewank needs at least one dimension");
    let sum: f64 = x.iter().map(|v| v * v / 4000.0).sum();
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    1.0 + sum - prod
}

/// Sum of squares; minimum 0 at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Rosenbrock valley; minimum 0 at (1, ..., 1).
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

struct SubprocessTarget {
    command: String,
    args: Vec<String>,
    timeout: Option<Duration>,
}

impl Target for SubprocessTarget {
    fn eval(
        &self,
        space: &SearchSpace,
        set: &ParameterSet,
        repetition: u32,
    ) -> Result<f64, TargetError> {
        let mut cmd = Command::new(&self.command);
        cmd.args(&self.args);
        for (spec, value) in space.specs().iter().zip(set.values()) {
            let wire = value.to_wire();
            cmd.arg("--param");
            cmd.arg(format!("{}={}", spec.name, wire));
            cmd.env(format!("PHS_PARAM_{}", spec.name.to_uppercase()), wire);
        }
        cmd.env("PHS_REP", repetition.to_string());
        cmd.stdin(Stdio::null());
        cmd.stdout(Stdio::piped());
        cmd.stderr(Stdio::piped());

        let mut child = cmd.spawn().map_err(|e| TargetError::Spawn {
            command: self.command.clone(),
            message: e.to_string(),
        })?;

        // Drain both pipes on their own threads so a chatty child never
        // blocks on a full pipe while we wait for it.
        let stdout = child.stdout.take().expect("stdout piped");
        let stderr = child.stderr.take().expect("stderr piped");
        let out_handle = std::thread::spawn(move || read_all(stdout));
        let err_handle = std::thread::spawn(move || read_all(stderr));

        let status = match self.timeout {
            None => child
                .wait()
                .map_err(|e| TargetError::Io(e.to_string()))?,
            Some(limit) => {
                let deadline = Instant::now() + limit;
                loop {
                    match child.try_wait().map_err(|e| TargetError::Io(e.to_string()))? {
                        Some(status) => break status,
                        None if Instant::now() >= deadline => {
                            let _ = child.kill();
                            let _ = child.wait();
                            // Reader threads are left to drain on their own:
                            // orphaned grandchildren may still hold the pipes.
                            return Err(TargetError::Timeout(limit.as_millis() as u64));
                        }
                        None => std::thread::sleep(Duration::from_millis(10)),
                    }
                }
            }
        };

        let stdout_text = out_handle.join().unwrap_or_default();
        let stderr_text = err_handle.join().unwrap_or_default();

        if !status.success() {
            return Err(TargetError::NonZeroExit {
                code: status
                    .code()
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "signal".to_string()),
                stderr: clip(&stderr_text),
            });
        }

        let last_line = stdout_text
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .unwrap_or("")
            .to_string();
        let value: f64 = last_line.parse().map_err(|_| TargetError::UnparsableOutput {
            last_line: clip(&last_line),
            stderr: clip(&stderr_text),
        })?;
        if !value.is_finite() {
            return Err(TargetError::NonFiniteResult(last_line));
        }
        Ok(value)
    }
}

fn read_all(mut source: impl Read) -> String {
    let mut buf = Vec::new();
    let _ = source.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).into_owned()
}

const DIAGNOSTIC_CLIP: usize = 4096;

fn clip(s: &str) -> String {
    if s.len() <= DIAGNOSTIC_CLIP {
        s.to_string()
    } else {
        let mut end = DIAGNOSTIC_CLIP;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}… [truncated]", &s[..end])
    }
}
