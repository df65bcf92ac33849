//! Client for classifiers running in another process.
//!
//! Wire protocol: newline-delimited JSON, one object per line, over the
//! child's stdin/stdout or a TCP stream.
//!
//! ```text
//! -> {"id": 7, "width": 32, "height": 32, "pixels": "<base64 row-major RGB>"}
//! <- {"id": 7, "label_id": 2, "label_name": "Stop", "probs": [0.1, 0.2, 0.7]}
//! ```
//!
//! Responses are matched by id and every verdict is re-validated locally.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::builtin::prepare_input;
use super::{Classifier, ClassifierVerdict, Result, VictimError};
use crate::imaging::PixelImage;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub pixels: String,
}

impl PredictRequest {
    pub fn new(id: u64, img: &PixelImage) -> Self {
        Self {
            id,
            width: img.width(),
            height: img.height(),
            pixels: base64::engine::general_purpose::STANDARD.encode(img.data()),
        }
    }

    /// Decodes the pixel payload back into an image.
    pub fn image(&self) -> std::result::Result<PixelImage, String> {
        let data = base64::engine::general_purpose::STANDARD
            .decode(&self.pixels)
            .map_err(|e| format!("bad base64: {e}"))?;
        PixelImage::new(self.width, self.height, data).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub id: u64,
    pub label_id: usize,
    pub label_name: String,
    pub probs: Vec<f64>,
}

/// One connection to an external classifier. Holds at most one request in
/// flight.
pub struct ExternalClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
    next_id: u64,
    timeout: Duration,
}

impl ExternalClient {
    pub fn from_streams<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            next_id: 0,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Starts `command` (program and arguments separated by whitespace) and
    /// talks to it over its standard streams.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| VictimError::InvalidInput("empty external classifier command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| VictimError::BackendUnavailable(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let mut client = Self::from_streams(stdout, stdin);
        client.child = Some(child);
        Ok(client)
    }

    pub fn connect_tcp(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| VictimError::BackendUnavailable(format!("cannot connect to {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| VictimError::BackendUnavailable(e.to_string()))?;
        Ok(Self::from_streams(reader, stream))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Sends one request and waits for its response.
    pub fn predict(&mut self, img: &PixelImage) -> Result<ClassifierVerdict> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&PredictRequest::new(id, img)).expect("request serializes");
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| VictimError::BackendUnavailable(format!("cannot send request: {e}")))?;

        let reply = loop {
            match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(l)) if l.trim().is_empty() => continue,
                Ok(Ok(l)) => break l,
                Ok(Err(e)) => return Err(VictimError::BackendUnavailable(format!("read failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(VictimError::BackendUnavailable(format!(
                        "no response within {:.1}s",
                        self.timeout.as_secs_f64()
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(VictimError::BackendUnavailable("backend closed its output".into()))
                }
            }
        };
        parse_response(&reply, id)
    }
}

fn parse_response(line: &str, expected_id: u64) -> Result<ClassifierVerdict> {
    let resp: PredictResponse =
        serde_json::from_str(line).map_err(|e| VictimError::Protocol(format!("malformed response: {e}")))?;
    if resp.id != expected_id {
        return Err(VictimError::Protocol(format!(
            "response id {} does not match request id {expected_id}",
            resp.id
        )));
    }
    if resp.label_id >= resp.probs.len() {
        return Err(VictimError::Protocol(format!(
            "label_id {} outside a {}-entry probability vector",
            resp.label_id,
            resp.probs.len()
        )));
    }
    let verdict = ClassifierVerdict {
        label_id: resp.label_id,
        label_name: resp.label_name,
        confidence_pct: 100.0 * resp.probs[resp.label_id],
        probs: resp.probs,
    };
    verdict.validate()?;
    Ok(verdict)
}

/// Sends `img` to the backend behind `client`.
pub fn external_predict(client: &mut ExternalClient, img: &PixelImage) -> Result<ClassifierVerdict> {
    client.predict(img)
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved child exit on its own
        self.writer = Box::new(io::sink());
        if let Some(mut child) = self.child.take() {
            for _ in 0..20 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A pool of external connections, one per worker thread, usable as a
/// shared [`Classifier`].
pub struct ExternalClassifier {
    clients: Vec<Mutex<ExternalClient>>,
    input_size: Option<u32>,
    description: String,
}

impl ExternalClassifier {
    pub fn new(clients: Vec<ExternalClient>, description: impl Into<String>) -> Result<Self> {
        if clients.is_empty() {
            return Err(VictimError::InvalidInput("external classifier pool is empty".into()));
        }
        Ok(Self {
            clients: clients.into_iter().map(Mutex::new).collect(),
            input_size: None,
            description: description.into(),
        })
    }

    /// Launches `instances` copies of `command`.
    pub fn spawn(command: &str, instances: usize) -> Result<Self> {
        let clients = (0..instances.max(1))
            .map(|_| ExternalClient::spawn(command))
            .collect::<Result<Vec<_>>>()?;
        Self::new(clients, format!("external:{command}"))
    }

    pub fn connect_tcp(addr: &str, instances: usize) -> Result<Self> {
        let clients = (0..instances.max(1))
            .map(|_| ExternalClient::connect_tcp(addr))
            .collect::<Result<Vec<_>>>()?;
        Self::new(clients, format!("external:tcp://{addr}"))
    }

    /// Resample images to `size`x`size` before sending them.
    pub fn with_input_size(mut self, size: Option<u32>) -> Self {
        self.input_size = size;
        self
    }

    pub fn with_timeout(self, timeout: Duration) -> Self {
        let clients = self
            .clients
            .into_iter()
            .map(|m| Mutex::new(m.into_inner().unwrap_or_else(|p| p.into_inner()).with_timeout(timeout)))
            .collect();
        Self { clients, ..self }
    }
}

impl Classifier for ExternalClassifier {
    fn predict(&self, img: &PixelImage) -> Result<ClassifierVerdict> {
        let resized;
        let img = match self.input_size {
            Some(size) if img.width() != size || img.height() != size => {
                resized = prepare_input(img, size);
                &resized
            }
            _ => img,
        };
        let slot = rayon::current_thread_index().unwrap_or(0) % self.clients.len();
        let mut client = self.clients[slot].lock().unwrap_or_else(|p| p.into_inner());
        client.predict(img)
    }

    fn describe(&self) -> String {
        self.description.clone()
    }
}
