//! Line-oriented protocol for external model executables.
//!
//! Each batch spawns the command once, writes one line per row of
//! comma-separated shortest round-trip decimals to its stdin, closes stdin and
//! expects exactly one decimal per line on stdout followed by exit status 0.

use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

pub const DEFAULT_BATCH_SIZE: usize = 10_000;
pub const DEFAULT_TIMEOUT_SECS: f64 = 600.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalModel {
    pub command: Vec<String>,
    pub batch_size: usize,
    pub timeout: Duration,
}

/// Writes `v` so that parsing the text gives back the same `f64`.
pub fn format_value(v: f64, buf: &mut ryu::Buffer) -> String {
    if v.is_finite() {
        buf.format_finite(v).to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// The stdin payload for a row-major block of `d`-vectors.
pub fn encode_rows(rows: &[f64], d: usize) -> String {
    let mut buf = ryu::Buffer::new();
    let mut text = String::with_capacity(rows.len() * 20);
    for row in rows.chunks_exact(d) {
        for (k, &v) in row.iter().enumerate() {
            if k > 0 {
                text.push(',');
            }
            text.push_str(&format_value(v, &mut buf));
        }
        text.push('\n');
    }
    text
}

/// Parses exactly `n` output lines, reporting 1-based line numbers.
pub fn decode_outputs(text: &str, n: usize) -> Result<Vec<f64>> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != n {
        return Err(Error::Model(format!(
            "external model returned {} line(s) for {n} input row(s)",
            lines.len()
        )));
    }
    lines
        .iter()
        .enumerate()
        .map(|(k, line)| {
            line.trim()
                .parse::<f64>()
                .map_err(|_| Error::Model(format!("external model output line {}: malformed value '{line}'", k + 1)))
        })
        .collect()
}

impl ExternalModel {
    pub fn new(command: Vec<String>, batch_size: usize, timeout: Duration) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Model("external model command is empty".into()));
        }
        if batch_size == 0 {
            return Err(Error::Model("external model batch size must be positive".into()));
        }
        Ok(Self { command, batch_size, timeout })
    }

    /// Runs one process over `rows` (row-major, `d` columns).
    pub fn run_batch(&self, rows: &[f64], d: usize) -> Result<Vec<f64>> {
        let n = rows.len() / d;
        if n == 0 {
            return Ok(Vec::new());
        }
        let program = &self.command[0];
        let mut child = Command::new(program)
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Model(format!("cannot start external model '{program}': {e}")))?;

        let payload = encode_rows(rows, d);
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // A child that exits early closes its end of the pipe; the resulting
        // write error is superseded by the exit status check below.
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(payload.as_bytes());
        });
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if started.elapsed() > self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::Model(format!(
                        "external model '{program}' timed out after {:.1} s",
                        self.timeout.as_secs_f64()
                    )));
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(Error::Model(format!("waiting for external model '{program}': {e}"))),
            }
        };
        let _ = writer.join();
        let out = reader
            .join()
            .map_err(|_| Error::Model("external model reader thread panicked".into()))?
            .map_err(|e| Error::Model(format!("reading external model output: {e}")))?;
        let err_text = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(Error::Model(format!(
                "external model '{program}' exited with {status}: {}",
                err_text.trim()
            )));
        }
        decode_outputs(&out, n)
    }
}
