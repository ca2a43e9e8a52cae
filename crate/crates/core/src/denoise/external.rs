//! Client side of the external denoiser protocol.

use std::io::{BufReader, Read};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{read_frame, write_frame, Frame};
use super::Denoiser;
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// A denoiser living in a child process, spoken to over stdin/stdout.
///
/// One handle owns one process; requests are strictly serial.
pub struct ExternalDenoiser {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    responses: Receiver<Result<Option<Frame>>>,
    stderr: Arc<Mutex<String>>,
    timeout: Duration,
    closed: bool,
}

impl ExternalDenoiser {
    /// Launches `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        if command.trim().is_empty() {
            return Err(Error::param("external denoiser command is empty"));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Denoiser {
                message: format!("failed to launch `{command}`: {e}"),
                stderr: String::new(),
            })?;

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, responses) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let frame = read_frame(&mut reader);
                let stop = !matches!(frame, Ok(Some(_)));
                if tx.send(frame).is_err() || stop {
                    break;
                }
            }
        });

        let stderr = Arc::new(Mutex::new(String::new()));
        let mut err_pipe = child.stderr.take().expect("stderr is piped");
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                sink.lock().unwrap().push_str(&String::from_utf8_lossy(&buf[..n]));
            }
        });

        Ok(Self {
            command: command.to_string(),
            stdin: child.stdin.take(),
            child,
            responses,
            stderr,
            timeout,
            closed: false,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn captured_stderr(&self) -> String {
        // Give the stderr pump a moment to drain after the child exits.
        thread::sleep(Duration::from_millis(20));
        self.stderr.lock().unwrap().clone()
    }

    fn failure(&mut self, message: String) -> Error {
        self.closed = true;
        Error::Denoiser { message, stderr: self.captured_stderr() }
    }

    fn wait_exit(&mut self, limit: Duration) -> Option<std::process::ExitStatus> {
        let start = Instant::now();
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return Some(status),
                Ok(None) if start.elapsed() < limit => thread::sleep(Duration::from_millis(5)),
                _ => return None,
            }
        }
    }

    fn exchange(&mut self, x: &ImageGrid, sigma_d: f64) -> Result<ImageGrid> {
        if self.closed {
            return Err(Error::Denoiser {
                message: format!("external denoiser `{}` is no longer usable", self.command),
                stderr: String::new(),
            });
        }
        let request = Frame::from_image(x, sigma_d);
        let stdin = self.stdin.as_mut().expect("stdin open while not closed");
        if let Err(e) = write_frame(stdin, &request) {
            let status = self.wait_exit(Duration::from_millis(500));
            return Err(self.failure(format!("write to `{}` failed: {e} (exit {status:?})", self.command)));
        }
        match self.responses.recv_timeout(self.timeout) {
            Ok(Ok(Some(frame))) => {
                if frame.height != request.height || frame.width != request.width || frame.channels != 1 {
                    self.closed = true;
                    return Err(Error::Protocol(format!(
                        "reply is {}x{}x{}, request was {}x{}x1",
                        frame.height, frame.width, frame.channels, request.height, request.width
                    )));
                }
                frame.to_image()
            }
            Ok(Ok(None)) | Err(RecvTimeoutError::Disconnected) => {
                match self.wait_exit(Duration::from_secs(1)) {
                    Some(status) if !status.success() => {
                        Err(self.failure(format!("`{}` exited with {status}", self.command)))
                    }
                    _ => {
                        self.closed = true;
                        Err(Error::Protocol(format!("`{}` closed its output without replying", self.command)))
                    }
                }
            }
            Ok(Err(e)) => {
                self.closed = true;
                Err(e)
            }
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(self.failure(format!("`{}` timed out after {:?}", self.command, self.timeout)))
            }
        }
    }
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&mut self, x: &ImageGrid, sigma_d: f64) -> Result<ImageGrid> {
        if !(sigma_d > 0.0) {
            return Err(Error::param(format!("denoiser strength must be positive, got {sigma_d}")));
        }
        self.exchange(x, sigma_d)
    }

    fn name(&self) -> String {
        format!("external:{}", self.command)
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Some(mut stdin) = self.stdin.take() {
            if !self.closed {
                let _ = write_frame(&mut stdin, &Frame::shutdown());
            }
        }
        if self.wait_exit(Duration::from_millis(500)).is_none() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
