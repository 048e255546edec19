#![allow(dead_code)]

use std::path::PathBuf;

use reqwest::header::HeaderMap;
use reqwest::StatusCode;
use serde_json::{json, Value};
use skillstack::builtin;
use skillstack::server::{RunningServer, ServerConfig, SkillServer};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn skills_dir() -> PathBuf {
    fixtures().join("skills")
}

pub fn extra_dir() -> PathBuf {
    fixtures().join("extra")
}

pub fn agentskills_dir() -> PathBuf {
    fixtures().join("agentskills")
}

pub const FIXTURE_NAMES: [&str; 6] = ["classify", "echo", "greet", "summarize", "translate", "vectornorm"];
pub const STREAMING_FIXTURES: [&str; 3] = ["summarize", "translate", "vectornorm"];

pub fn config(dirs: &[PathBuf]) -> ServerConfig {
    ServerConfig {
        port: 0,
        skills_dirs: dirs.to_vec(),
        ..ServerConfig::default()
    }
}

pub async fn start_with(config: ServerConfig) -> Client {
    let server = SkillServer::build(config, builtin::registry()).expect("server builds");
    Client::new(server.spawn().await.expect("server starts"))
}

/// The six fixtures plus the timeout/subprocess extras.
pub async fn start_all() -> Client {
    start_with(config(&[skills_dir(), extra_dir()])).await
}

pub async fn start_six() -> Client {
    start_with(config(&[skills_dir()])).await
}

pub struct Response {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: String,
}

impl Response {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.body))
    }

    pub fn content_type(&self) -> &str {
        self.headers
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
    }
}

pub struct Client {
    pub server: Option<RunningServer>,
    pub base: String,
    pub http: reqwest::Client,
}

impl Client {
    pub fn new(server: RunningServer) -> Self {
        Self {
            base: server.url(),
            server: Some(server),
            http: reqwest::Client::new(),
        }
    }

    pub async fn post_raw(&self, path: &str, body: impl Into<reqwest::Body>, accept: Option<&str>) -> Response {
        let mut req = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body);
        if let Some(a) = accept {
            req = req.header("accept", a);
        }
        let resp = req.send().await.expect("request sent");
        Response {
            status: resp.status(),
            headers: resp.headers().clone(),
            body: resp.text().await.expect("body read"),
        }
    }

    pub async fn post(&self, path: &str, body: &Value, accept: Option<&str>) -> Response {
        self.post_raw(path, serde_json::to_vec(body).unwrap(), accept).await
    }

    pub async fn skill_json(&self, name: &str, body: &Value) -> Response {
        self.post(&format!("/skills/{name}"), body, Some("application/json")).await
    }

    pub async fn skill_sse(&self, name: &str, body: &Value) -> Response {
        self.post(&format!("/skills/{name}"), body, Some("text/event-stream")).await
    }

    pub async fn get(&self, path: &str) -> Response {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .expect("request sent");
        Response {
            status: resp.status(),
            headers: resp.headers().clone(),
            body: resp.text().await.expect("body read"),
        }
    }

    pub async fn rpc(&self, method: &str, params: Value) -> Value {
        let resp = self
            .post("/mcp", &json!({"jsonrpc": "2.0", "id": 1, "method": method, "params": params}), None)
            .await;
        assert_eq!(resp.status, StatusCode::OK, "{}", resp.body);
        resp.json()
    }

    pub async fn tools_call(&self, name: &str, arguments: Value) -> Value {
        let reply = self.rpc("tools/call", json!({"name": name, "arguments": arguments})).await;
        reply.get("result").cloned().unwrap_or_else(|| panic!("no result: {reply}"))
    }

    pub async fn stop(mut self) {
        if let Some(s) = self.server.take() {
            s.shutdown().await.expect("clean shutdown");
        }
    }
}

/// Chunk string forms from an SSE body.
pub fn sse_chunks(body: &str) -> Vec<String> {
    skillstack::server::sse::parse_sse(body)
        .expect("well-formed SSE")
        .into_iter()
        .filter(|e| e.event == "chunk")
        .map(|e| skillstack::runtime::chunk_text(&e.data))
        .collect()
}

/// Inverse of the MCP newline join. An empty text is zero chunks.
pub fn split_mcp_text(text: &str) -> Vec<String> {
    if text.is_empty() {
        Vec::new()
    } else {
        text.split('\n').map(String::from).collect()
    }
}
