//! Test double for the external classifier protocol.
//!
//! Reads one JSON request per line on stdin (or per TCP connection with
//! `--listen`) and answers with a fixed distribution, with the verdict of a
//! built-in weight file, or with a deliberately broken reply.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use sticker_forge_core::victim::external::{PredictRequest, PredictResponse};
use sticker_forge_core::victim::{BuiltinClassifier, Classifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ok,
    /// Echo a different id.
    BadId,
    /// Reply with text that is not JSON.
    Malformed,
    /// Probabilities that do not sum to one.
    Unnormalized,
    /// Read requests but never answer.
    Silent,
}

#[derive(Debug, Parser)]
#[command(name = "stub-classifier")]
struct Args {
    #[arg(long, value_enum, default_value = "ok")]
    mode: Mode,
    /// Serve this built-in model instead of a fixed distribution.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "Stop,Ped. Crossing")]
    labels: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7")]
    probs: Vec<f64>,
    /// Accept TCP connections on this address instead of using stdio.
    #[arg(long)]
    listen: Option<String>,
}

struct Stub {
    mode: Mode,
    model: Option<BuiltinClassifier>,
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl Stub {
    fn reply(&self, line: &str) -> Option<String> {
        let req: PredictRequest = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return Some(format!("{{\"error\":\"{e}\"}}")),
        };
        let (label_id, label_name, mut probs) = match &self.model {
            Some(m) => {
                let img = req.image().ok()?;
                let v = m.predict(&img).ok()?;
                (v.label_id, v.label_name, v.probs)
            }
            None => {
                let id = (0..self.probs.len())
                    .fold(0, |b, i| if self.probs[i] > self.probs[b] { i } else { b });
                (id, self.labels[id].clone(), self.probs.clone())
            }
        };
        let mut id = req.id;
        match self.mode {
            Mode::Ok => {}
            Mode::BadId => id = id.wrapping_add(1),
            Mode::Malformed => return Some("{\"id\": this is not json".to_string()),
            Mode::Unnormalized => probs.iter_mut().for_each(|p| *p *= 1.5),
            Mode::Silent => return None,
        }
        let resp = PredictResponse {
            id,
            label_id,
            label_name,
            probs,
        };
        Some(serde_json::to_string(&resp).expect("response serializes"))
    }

    fn serve(&self, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(reply) = self.reply(&line) {
                writeln!(output, "{reply}")?;
                output.flush()?;
            }
        }
        Ok(())
    }
}

fn main() {
    let args = Args::parse();
    let model = args.weights.as_ref().map(|p| {
        BuiltinClassifier::load(p).unwrap_or_else(|e| {
            eprintln!("stub-classifier: {e}");
            std::process::exit(1);
        })
    });
    if model.is_none() && (args.labels.len() != args.probs.len() || args.labels.is_empty()) {
        eprintln!("stub-classifier: --labels and --probs must have the same nonzero length");
        std::process::exit(2);
    }
    let stub = Arc::new(Stub {
        mode: args.mode,
        model,
        labels: args.labels,
        probs: args.probs,
    });
    match &args.listen {
        None => {
            let stdin = io::stdin();
            if let Err(e) = stub.serve(stdin.lock(), io::stdout().lock()) {
                if e.kind() != io::ErrorKind::BrokenPipe {
                    eprintln!("stub-classifier: {e}");
                }
            }
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).unwrap_or_else(|e| {
                eprintln!("stub-classifier: cannot listen on {addr}: {e}");
                std::process::exit(1);
            });
            println!("{}", listener.local_addr().expect("bound socket"));
            let _ = io::stdout().flush();
            for stream in listener.incoming().flatten() {
                let stub = Arc::clone(&stub);
                std::thread::spawn(move || {
                    let reader = BufReader::new(stream.try_clone().expect("socket clone"));
                    let _ = stub.serve(reader, stream);
                });
            }
        }
    }
}
