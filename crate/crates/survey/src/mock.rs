//! A local chat-completions server with scripted models, for exercising the
//! survey end to end without a real gateway.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use num_bigint::BigInt;
use serde_json::{json, Value};

use crate::suite::{answer_value, question_of};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockModel {
    /// Correct on questions with at most this many digits, off by one
    /// beyond.
    CorrectUpTo(usize),
    /// Always correct, phrased as a sentence with thousands separators.
    Verbose,
    /// Replies without any digits.
    Words,
    /// Every request fails with this HTTP status.
    Status(u16),
    /// The first `n` requests fail with 503, later ones are answered
    /// correctly.
    Flaky(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub model: String,
    pub prompt: String,
    pub authorization: Option<String>,
}

struct State {
    models: BTreeMap<String, MockModel>,
    token: Option<String>,
    served: Mutex<BTreeMap<String, usize>>,
    log: Mutex<Vec<RecordedRequest>>,
}

pub struct MockGateway {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    state: Arc<State>,
    handle: Option<JoinHandle<()>>,
}

impl MockGateway {
    /// Serves `models` on an ephemeral localhost port. With `token` set,
    /// requests must carry `Authorization: Bearer <token>`.
    pub fn start(
        models: BTreeMap<String, MockModel>,
        token: Option<String>,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let state = Arc::new(State {
            models,
            token,
            served: Mutex::new(BTreeMap::new()),
            log: Mutex::new(Vec::new()),
        });
        let handle = {
            let stop = stop.clone();
            let state = state.clone();
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let state = state.clone();
                    std::thread::spawn(move || {
                        let _ = serve(stream, &state);
                    });
                }
            })
        };
        Ok(MockGateway {
            addr,
            stop,
            state,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Requests received so far, in arrival order.
    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.log.lock().expect("log lock").clone()
    }
}

impl Drop for MockGateway {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(stream: &mut TcpStream, status: u16, body: &Value) -> std::io::Result<()> {
    let text = body.to_string();
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        503 => "Service Unavailable",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    )?;
    stream.flush()
}

fn serve(mut stream: TcpStream, state: &State) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim().to_string();
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.parse().unwrap_or(0),
                "authorization" => authorization = Some(value),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let mut parts = request_line.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    if method != "POST" || path != "/v1/chat/completions" {
        return respond(&mut stream, 404, &json!({"error": "no such route"}));
    }
    let Ok(request) = serde_json::from_slice::<Value>(&body) else {
        return respond(&mut stream, 400, &json!({"error": "body is not JSON"}));
    };
    let model = request["model"].as_str().unwrap_or_default().to_string();
    let prompt = request["messages"][0]["content"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    state.log.lock().expect("log lock").push(RecordedRequest {
        model: model.clone(),
        prompt: prompt.clone(),
        authorization: authorization.clone(),
    });
    if let Some(t) = &state.token {
        if authorization.as_deref() != Some(format!("Bearer {t}").as_str()) {
            return respond(&mut stream, 401, &json!({"error": "bad credentials"}));
        }
    }
    let Some(behaviour) = state.models.get(&model) else {
        return respond(
            &mut stream,
            404,
            &json!({"error": format!("unknown model {model}")}),
        );
    };
    let served = {
        let mut s = state.served.lock().expect("counter lock");
        let c = s.entry(model.clone()).or_insert(0);
        *c += 1;
        *c
    };
    let Ok(question) = question_of(&prompt) else {
        return respond(
            &mut stream,
            400,
            &json!({"error": "prompt has no question"}),
        );
    };
    let truth = answer_value(&question);
    let content = match *behaviour {
        MockModel::CorrectUpTo(d) if question.n_digits() <= d => truth.to_string(),
        MockModel::CorrectUpTo(_) => (truth + BigInt::from(1)).to_string(),
        MockModel::Verbose => format!("The answer is {}.", with_separators(&truth.to_string())),
        MockModel::Words => "I cannot say exactly.".to_string(),
        MockModel::Status(code) => {
            return respond(&mut stream, code, &json!({"error": "scripted failure"}))
        }
        MockModel::Flaky(n) if served <= n => {
            return respond(&mut stream, 503, &json!({"error": "try again"}))
        }
        MockModel::Flaky(_) => truth.to_string(),
    };
    let reply = json!({
        "id": format!("mock-{served}"),
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": prompt.split_whitespace().count(), "completion_tokens": 1},
    });
    respond(&mut stream, 200, &reply)
}

fn with_separators(value: &str) -> String {
    let (sign, digits) = match value.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", value),
    };
    let n = digits.len();
    let mut out = sign.to_string();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (n - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}
