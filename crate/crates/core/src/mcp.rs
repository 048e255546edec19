//! MCP over JSON-RPC 2.0: `initialize`, `tools/list`, `tools/call`, `ping`.
//!
//! One POST body carries one request (or a batch); the reply is a single JSON
//! body. Notifications get no reply. Protocol errors are JSON-RPC error
//! objects; failures downstream of dispatch are tool results with
//! `isError: true`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::runtime::{chunk_text, Runtime};
use crate::schema::{canonical_string, tool_descriptor, ServerMeta, ToolDescriptor};
use crate::server::lifecycle::{BoxError, Lifecycle};
use crate::skill::Skill;

pub const DEFAULT_PROTOCOL_VERSION: &str = "2025-03-26";

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextContent {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolCallResult {
    pub content: Vec<TextContent>,
    #[serde(rename = "structuredContent", skip_serializing_if = "Option::is_none")]
    pub structured_content: Option<Value>,
    #[serde(rename = "isError")]
    pub is_error: bool,
}

impl ToolCallResult {
    fn text(text: String, structured: Option<Value>) -> Self {
        Self {
            content: vec![TextContent { kind: "text", text }],
            structured_content: structured,
            is_error: false,
        }
    }

    fn error(message: String) -> Self {
        Self {
            content: vec![TextContent {
                kind: "text",
                text: message,
            }],
            structured_content: None,
            is_error: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

impl RpcError {
    fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn response(id: Value, outcome: Result<Value, RpcError>) -> Value {
    match outcome {
        Ok(result) => json!({"jsonrpc": "2.0", "id": id, "result": result}),
        Err(e) => json!({"jsonrpc": "2.0", "id": id, "error": {"code": e.code, "message": e.message}}),
    }
}

/// The MCP endpoint, sharing the skill set and runtime with the HTTP routes.
pub struct McpTransport {
    skills: BTreeMap<String, Arc<Skill>>,
    runtime: Runtime,
    meta: ServerMeta,
    running: AtomicBool,
}

impl McpTransport {
    pub fn new(skills: &[Arc<Skill>], runtime: Runtime, meta: ServerMeta) -> Self {
        Self {
            skills: skills.iter().map(|s| (s.name.clone(), Arc::clone(s))).collect(),
            runtime,
            meta,
            running: AtomicBool::new(false),
        }
    }

    pub fn is_running(&self) -> bool {
        self.running.load(Ordering::SeqCst)
    }

    /// Exactly the MCP-visible skills, sorted by name.
    pub fn tools_list(&self) -> Vec<ToolDescriptor> {
        self.skills
            .values()
            .filter_map(|s| tool_descriptor(s).ok())
            .collect()
    }

    pub fn initialize(&self, params: Option<&Value>) -> Value {
        let version = params
            .and_then(|p| p.get("protocolVersion"))
            .and_then(Value::as_str)
            .unwrap_or(DEFAULT_PROTOCOL_VERSION);
        json!({
            "protocolVersion": version,
            "capabilities": {"tools": {}},
            "serverInfo": {"name": self.meta.title, "version": self.meta.version}
        })
    }

    /// Calls a tool. Unknown or hidden tools are a protocol error; everything
    /// after dispatch is reported in the result.
    pub async fn tools_call(&self, name: &str, arguments: Value) -> Result<ToolCallResult, RpcError> {
        let skill = self
            .skills
            .get(name)
            .filter(|s| s.meta.is_mcp)
            .ok_or_else(|| RpcError::new(INVALID_PARAMS, format!("Unknown tool: {name}")))?;

        let input = match skill.input_schema.validate(&arguments) {
            Ok(v) => v,
            Err(e) => {
                return Ok(ToolCallResult::error(format!(
                    "Input validation error:\n{}",
                    e.render()
                )))
            }
        };
        if skill.is_streaming() {
            match self.runtime.call_streaming(skill, input).collect_all().await {
                Ok(chunks) => {
                    let text: Vec<String> = chunks.iter().map(chunk_text).collect();
                    Ok(ToolCallResult::text(text.join("\n"), None))
                }
                Err((_, e)) => Ok(ToolCallResult::error(e.message)),
            }
        } else {
            match self.runtime.call_unary(skill, input).await {
                Ok(out) => Ok(ToolCallResult::text(canonical_string(&out), Some(out))),
                Err(e) => Ok(ToolCallResult::error(e.message)),
            }
        }
    }

    async fn dispatch(&self, method: &str, params: Option<&Value>) -> Result<Value, RpcError> {
        match method {
            "initialize" => Ok(self.initialize(params)),
            "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({"tools": self.tools_list()})),
            "tools/call" => {
                let params = params
                    .and_then(Value::as_object)
                    .ok_or_else(|| RpcError::new(INVALID_PARAMS, "tools/call needs params"))?;
                let name = params
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| RpcError::new(INVALID_PARAMS, "tools/call needs a tool name"))?;
                let arguments = params
                    .get("arguments")
                    .cloned()
                    .unwrap_or_else(|| Value::Object(Map::new()));
                let result = self.tools_call(name, arguments).await?;
                Ok(serde_json::to_value(result).expect("tool results serialize"))
            }
            other => Err(RpcError::new(
                METHOD_NOT_FOUND,
                format!("Method not found: {other}"),
            )),
        }
    }

    /// Handles one parsed message; `None` for notifications.
    async fn handle_message(&self, msg: &Value) -> Option<Value> {
        let Some(obj) = msg.as_object() else {
            return Some(response(
                Value::Null,
                Err(RpcError::new(INVALID_REQUEST, "Invalid Request")),
            ));
        };
        let id = obj.get("id").cloned();
        let valid_id = matches!(
            id,
            None | Some(Value::Null) | Some(Value::String(_)) | Some(Value::Number(_))
        );
        let method = obj.get("method").and_then(Value::as_str);
        let params = obj.get("params");
        let params_ok = params.is_none_or(|p| p.is_object() || p.is_array());
        if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0")
            || !valid_id
            || method.is_none()
            || !params_ok
        {
            let id = if valid_id { id.unwrap_or(Value::Null) } else { Value::Null };
            return Some(response(id, Err(RpcError::new(INVALID_REQUEST, "Invalid Request"))));
        }
        let method = method.expect("checked above");
        match id {
            None => {
                tracing::debug!(method, "notification");
                None
            }
            Some(id) => Some(response(id, self.dispatch(method, params).await)),
        }
    }

    /// Handles a raw POST body; `None` means no response body is due.
    pub async fn handle_jsonrpc(&self, body: &[u8]) -> Option<Vec<u8>> {
        let parsed: Value = match serde_json::from_slice(body) {
            Ok(v) => v,
            Err(e) => {
                let r = response(
                    Value::Null,
                    Err(RpcError::new(PARSE_ERROR, format!("Parse error: {e}"))),
                );
                return Some(serde_json::to_vec(&r).expect("serialize"));
            }
        };
        let reply = match &parsed {
            Value::Array(batch) if batch.is_empty() => Some(response(
                Value::Null,
                Err(RpcError::new(INVALID_REQUEST, "Invalid Request")),
            )),
            Value::Array(batch) => {
                let mut replies = Vec::new();
                for msg in batch {
                    if let Some(r) = self.handle_message(msg).await {
                        replies.push(r);
                    }
                }
                (!replies.is_empty()).then_some(Value::Array(replies))
            }
            single => self.handle_message(single).await,
        };
        reply.map(|r| serde_json::to_vec(&r).expect("serialize"))
    }
}

#[async_trait]
impl Lifecycle for McpTransport {
    async fn startup(&self) -> Result<(), BoxError> {
        self.running.store(true, Ordering::SeqCst);
        tracing::info!(tools = self.tools_list().len(), "MCP transport started");
        Ok(())
    }

    async fn shutdown(&self) -> Result<(), BoxError> {
        self.running.store(false, Ordering::SeqCst);
        tracing::info!("MCP transport stopped");
        Ok(())
    }
}
