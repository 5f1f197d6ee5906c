//! A tiny HTTP server that answers chat-completion requests from a queue of
//! canned responses and records the request bodies. Used by tests and demos
//! so nothing ever touches the network.

use std::collections::VecDeque;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

#[derive(Clone, Debug, PartialEq)]
pub struct MockResponse {
    pub status: u16,
    pub body: String,
}

impl MockResponse {
    pub fn ok(body: impl Into<String>) -> MockResponse {
        MockResponse { status: 200, body: body.into() }
    }

    pub fn error(status: u16) -> MockResponse {
        MockResponse { status, body: format!("{{\"error\": {{\"message\": \"status {status}\"}}}}") }
    }
}

#[derive(Default)]
struct State {
    queue: VecDeque<MockResponse>,
    requests: Vec<String>,
}

pub struct MockServer {
    addr: SocketAddr,
    state: Arc<Mutex<State>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Serve `responses` in order; once they run out every request gets a 500.
    pub fn start(responses: Vec<MockResponse>) -> io::Result<MockServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(State { queue: responses.into(), requests: Vec::new() }));
        let stop = Arc::new(AtomicBool::new(false));
        let (st, sp) = (state.clone(), stop.clone());
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if sp.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = conn {
                    if let Err(e) = serve(stream, &st) {
                        log::debug!("mock server connection error: {e}");
                    }
                }
            }
        });
        Ok(MockServer { addr, state, stop, handle: Some(handle) })
    }

    /// Base URL to configure a client with.
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Bodies of the requests received so far.
    pub fn requests(&self) -> Vec<String> {
        self.state.lock().expect("mock state").requests.clone()
    }

    pub fn push(&self, response: MockResponse) {
        self.state.lock().expect("mock state").queue.push_back(response);
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, state: &Mutex<State>) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.is_empty() {
        return Ok(());
    }
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let response = {
        let mut s = state.lock().expect("mock state");
        s.requests.push(String::from_utf8_lossy(&body).into_owned());
        s.queue.pop_front().unwrap_or_else(|| MockResponse::error(500))
    };
    let reason = if response.status < 400 { "OK" } else { "Error" };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        response.body.len(),
        response.body
    )?;
    out.flush()
}
