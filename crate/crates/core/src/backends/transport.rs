//! Line transport to external model servers: a child process speaking on
//! stdin/stdout, or a TCP connection. One request in flight per connection.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{wire, AsrBackend, AsrRequest, AsrResponse, MtBackend, MtRequest, MtResponse};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// A serial request/response line channel.
pub struct LineClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    child: Option<Child>,
    peer: String,
}

fn spawn_reader<R: BufRead + Send + 'static>(mut reader: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                if tx.send(Ok(line)).is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = tx.send(Err(e));
                break;
            }
        }
    });
    rx
}

impl LineClient {
    pub fn from_streams<R, W>(reader: R, writer: W, peer: impl Into<String>) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        LineClient {
            writer: Box::new(writer),
            lines: spawn_reader(reader),
            timeout: DEFAULT_TIMEOUT,
            child: None,
            peer: peer.into(),
        }
    }

    /// Starts `program args...` and talks to it over its standard streams.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::backend(format!("failed to start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut client = Self::from_streams(BufReader::new(stdout), stdin, program);
        client.child = Some(child);
        Ok(client)
    }

    pub fn connect(addr: impl ToSocketAddrs + std::fmt::Display) -> Result<Self> {
        let peer = addr.to_string();
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::backend(format!("failed to connect to {peer}: {e}")))?;
        let _ = stream.set_nodelay(true);
        let reader = stream.try_clone()?;
        Ok(Self::from_streams(BufReader::new(reader), stream, peer))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Sends one line and waits for one line back.
    pub fn roundtrip(&mut self, line: &str) -> Result<String> {
        debug_assert!(!line.contains('\n'));
        let send = |w: &mut Box<dyn Write + Send>| -> std::io::Result<()> {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()
        };
        send(&mut self.writer)
            .map_err(|e| Error::backend(format!("write to {} failed: {e}", self.peer)))?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => Ok(reply),
            Ok(Err(e)) => Err(Error::backend(format!("read from {} failed: {e}", self.peer))),
            Err(RecvTimeoutError::Timeout) => Err(Error::backend(format!(
                "{} did not answer within {:?}",
                self.peer, self.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::backend(format!("{} closed the connection", self.peer)))
            }
        }
    }
}

impl Drop for LineClient {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            // Closing stdin lets a well-behaved server exit on its own.
            self.writer = Box::new(std::io::sink());
            let deadline = std::time::Instant::now() + Duration::from_millis(500);
            while std::time::Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

pub struct WireAsrBackend {
    client: LineClient,
}

impl WireAsrBackend {
    pub fn new(client: LineClient) -> Self {
        WireAsrBackend { client }
    }
}

impl AsrBackend for WireAsrBackend {
    fn decode(&mut self, req: &AsrRequest) -> Result<AsrResponse> {
        let reply = self.client.roundtrip(&wire::encode_asr_request(req))?;
        let resp = wire::decode_asr_response(&reply)?;
        super::check_asr_response(req, &resp)?;
        Ok(resp)
    }
}

pub struct WireMtBackend {
    client: LineClient,
}

impl WireMtBackend {
    pub fn new(client: LineClient) -> Self {
        WireMtBackend { client }
    }
}

impl MtBackend for WireMtBackend {
    fn translate(&mut self, req: &MtRequest) -> Result<MtResponse> {
        let reply = self.client.roundtrip(&wire::encode_mt_request(req))?;
        let resp = wire::decode_mt_response(&reply)?;
        super::check_mt_response(req, &resp)?;
        Ok(resp)
    }
}

/// Counters reported by [`serve`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub requests: usize,
    pub errors: usize,
}

/// Server loop: answers each request line with one response line until EOF.
/// Undecodable requests and backend failures are answered with an `error`
/// message and the loop continues.
pub fn serve<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    mut asr: Option<&mut dyn AsrBackend>,
    mut mt: Option<&mut dyn MtBackend>,
) -> Result<ServeStats> {
    let mut stats = ServeStats::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.requests += 1;
        let reply = match wire::decode_request(&line) {
            Ok(wire::WireRequest::Asr(req)) => match asr.as_deref_mut() {
                Some(b) => b.decode(&req).map(|r| wire::encode_asr_response(&r)),
                None => Err(Error::backend("this server has no ASR backend")),
            },
            Ok(wire::WireRequest::Mt(req)) => match mt.as_deref_mut() {
                Some(b) => b.translate(&req).map(|r| wire::encode_mt_response(&r)),
                None => Err(Error::backend("this server has no MT backend")),
            },
            Err(e) => Err(e),
        };
        let reply = reply.unwrap_or_else(|e| {
            stats.errors += 1;
            wire::encode_error(&e.to_string())
        });
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(stats)
}
