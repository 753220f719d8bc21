use std::io::Read;
use std::process::{ChildStdin, Command, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Exited { status: i32, stdout: Vec<u8>, stderr: Vec<u8> },
    Signaled { stderr: Vec<u8> },
    TimedOut,
    OutputCapped,
}

const STDERR_CAP: usize = 64 << 10;

fn read_capped(mut r: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 8192];
    loop {
        match r.read(&mut chunk) {
            Ok(0) | Err(_) => return (buf, false),
            Ok(n) => {
                if buf.len() + n > cap {
                    return (buf, true);
                }
                buf.extend_from_slice(&chunk[..n]);
            }
        }
    }
}

/// Runs `cmd` with a wall-clock limit and a cap on captured stdout.
/// `feed` receives the child's stdin when `cmd` was configured with a
/// piped stdin.
pub fn run_with_limits(
    mut cmd: Command,
    timeout: Duration,
    stdout_cap: usize,
    feed: impl FnOnce(ChildStdin) + Send + 'static,
) -> std::io::Result<RunOutcome> {
    cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn()?;
    let stdin = child.stdin.take();
    let out = child.stdout.take().unwrap();
    let err = child.stderr.take().unwrap();
    let feeder = stdin.map(|s| thread::spawn(move || feed(s)));
    let out_reader = thread::spawn(move || read_capped(out, stdout_cap));
    let err_reader = thread::spawn(move || read_capped(err, STDERR_CAP));
    let status = match child.wait_timeout(timeout)? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            let _ = out_reader.join();
            let _ = err_reader.join();
            return Ok(RunOutcome::TimedOut);
        }
    };
    if let Some(f) = feeder {
        let _ = f.join();
    }
    let (stdout, capped) = out_reader.join().unwrap_or_default();
    let (stderr, _) = err_reader.join().unwrap_or_default();
    if capped {
        return Ok(RunOutcome::OutputCapped);
    }
    Ok(match status.code() {
        Some(code) => RunOutcome::Exited { status: code, stdout, stderr },
        None => RunOutcome::Signaled { stderr },
    })
}
