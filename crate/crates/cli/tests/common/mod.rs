#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use serde_json::{json, Value};

pub fn sgs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgs"))
}

pub fn run_sgs(args: &[&str]) -> Output {
    sgs().args(args).env_remove("SGS_CONFIG").output().expect("spawn sgs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A running `sgs serve`, killed on drop.
pub struct Server {
    child: Child,
    pub addr: SocketAddr,
}

impl Server {
    pub fn start(extra: &[&str]) -> Self {
        let mut child = sgs()
            .args(["serve", "--port", "0"])
            .args(extra)
            .env_remove("SGS_CONFIG")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn sgs serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("address line").parse().unwrap();
        Self { child, addr }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Newline-delimited JSON client.
pub struct TcpClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpClient {
    pub fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        stream.set_nodelay(true).unwrap();
        Self { reader: BufReader::new(stream.try_clone().unwrap()), writer: stream }
    }

    pub fn send(&mut self, msg: &Value) {
        self.send_raw(&msg.to_string());
    }

    pub fn send_raw(&mut self, text: &str) {
        self.writer.write_all(format!("{text}\n").as_bytes()).unwrap();
    }

    /// Next message, or `None` once the server closed the connection.
    pub fn recv(&mut self) -> Option<Value> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => None,
            Ok(_) => Some(serde_json::from_str(&line).expect("server sends JSON lines")),
            Err(e) => panic!("read failed: {e}"),
        }
    }

    /// Reads messages up to and including the `state` answering `seq`.
    pub fn until_state(&mut self, seq: u64) -> Vec<Value> {
        let mut out = Vec::new();
        loop {
            let msg = self.recv().expect("connection open");
            let done = msg["kind"] == "state" && msg["seq"] == seq;
            let failed = msg["kind"] == "error";
            out.push(msg);
            if done || failed {
                return out;
            }
        }
    }
}

pub const ROBOT_FACE: [f64; 3] = [0.0, 0.0, 0.0];
pub const PARTNER_FACE: [f64; 3] = [0.0, 0.0, 1.2];
pub const CUP: [f64; 3] = [0.25, -0.3, 0.6];

pub fn toward(from: [f64; 3], to: [f64; 3]) -> [f64; 3] {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    [d[0] / n, d[1] / n, d[2] / n]
}

/// Sensor frame with the partner looking at `look_at`.
pub fn frame(t: f64, look_at: [f64; 3]) -> Value {
    json!({
        "t": t,
        "self": {"face": ROBOT_FACE, "gaze": [0.0, 0.0, 1.0]},
        "other": {"face": PARTNER_FACE, "gaze": toward(PARTNER_FACE, look_at)},
        "objects": [{"id": "cup", "label": "cup", "pos": CUP}],
    })
}

pub fn envelope(kind: &str, seq: u64, payload: Value) -> Value {
    json!({"kind": kind, "seq": seq, "payload": payload})
}
