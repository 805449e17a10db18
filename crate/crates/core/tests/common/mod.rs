//! Shared fixtures for integration tests: a stub NLI HTTP endpoint and
//! dataset builders.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

type LogitsFn = dyn Fn(&str, &str) -> [f64; 3] + Send + Sync;

/// Minimal HTTP/1.1 server answering POST /classify with
/// `{"logits": [e, n, c]}` computed by a caller-supplied function.
pub struct StubNliServer {
    port: u16,
    requests: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubNliServer {
    pub fn start(logits: impl Fn(&str, &str) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self::start_failing_first(0, logits)
    }

    /// Respond 500 to the first `fail_first` requests, then behave normally.
    pub fn start_failing_first(
        fail_first: usize,
        logits: impl Fn(&str, &str) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let port = listener.local_addr().unwrap().port();
        let requests = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let logits: Arc<LogitsFn> = Arc::new(logits);

        let requests_bg = requests.clone();
        let shutdown_bg = shutdown.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if shutdown_bg.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let n = requests_bg.fetch_add(1, Ordering::SeqCst);
                let fail = n < fail_first;
                let _ = handle_connection(stream, fail, &*logits);
            }
        });

        Self {
            port,
            requests,
            shutdown,
            handle: Some(handle),
        }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubNliServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(("127.0.0.1", self.port));
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(
    stream: TcpStream,
    fail: bool,
    logits: &LogitsFn,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let mut stream = stream;
    if fail {
        let response = "HTTP/1.1 500 Internal Server Error\r\ncontent-length: 0\r\nconnection: close\r\n\r\n";
        stream.write_all(response.as_bytes())?;
        return Ok(());
    }

    let parsed: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let premise = parsed["premise"].as_str().unwrap_or_default();
    let hypothesis = parsed["hypothesis"].as_str().unwrap_or_default();
    let [e, n, c] = logits(premise, hypothesis);
    let payload = format!(r#"{{"logits":[{e},{n},{c}]}}"#);
    let response = format!(
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        payload.len(),
        payload
    );
    stream.write_all(response.as_bytes())?;
    Ok(())
}

/// Deterministic pseudo-logits derived from the pair content: not symmetric,
/// always finite, stable across runs.
pub fn hash_logits(premise: &str, hypothesis: &str) -> [f64; 3] {
    let mut state = 0xcbf29ce484222325u64;
    for b in premise.bytes().chain([0xff]).chain(hypothesis.bytes()) {
        state ^= b as u64;
        state = state.wrapping_mul(0x100000001b3);
    }
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
    };
    [next(), next(), next()]
}

/// Write a JSONL dataset of synthetic questions. `labeled` attaches a
/// deterministic accuracy row to each question.
pub fn write_dataset(path: &Path, questions: usize, m: usize, labeled: bool) {
    let mut out = String::new();
    for i in 0..questions {
        let responses: Vec<String> = (0..m)
            .map(|j| format!("\"answer {} variant {}\"", i, j % 3))
            .collect();
        let accuracy = if labeled {
            let row: Vec<String> = (0..m)
                .map(|j| if (i + j) % 3 == 0 { "1.0" } else { "0.0" }.to_string())
                .collect();
            format!(r#","accuracy":[{}]"#, row.join(","))
        } else {
            String::new()
        };
        out.push_str(&format!(
            r#"{{"question_id":"q{i}","question":"synthetic question {i}?","responses":[{}]{}}}"#,
            responses.join(","),
            accuracy
        ));
        out.push('\n');
    }
    std::fs::write(path, out).expect("write dataset");
}
