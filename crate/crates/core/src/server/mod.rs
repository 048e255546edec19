//! The HTTP side: per-skill endpoints, OpenAPI, docs, and the MCP mount.

pub mod lifecycle;
pub mod sse;

use std::convert::Infallible;
use std::future::Future;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::Router;
use futures::StreamExt;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::discovery::{discover_all, DiscoveryError, FolderReport};
use crate::mcp::McpTransport;
use crate::runtime::{chunk_text, EditRequest, HandlerError, HandlerErrorKind, HandlerRegistry, Runtime};
use crate::schema::{build_openapi, ServerMeta};
use crate::skill::Skill;
use lifecycle::{compose_lifecycle, ComposedLifecycle, Lifecycle, LifecycleError, NoHooks};

pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8000;
pub const DEFAULT_MCP_PATH: &str = "/mcp";
pub const CONFIG_FILE: &str = "skillstack.toml";

/// Server settings. Also the shape of `skillstack.toml`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub skills_dirs: Vec<PathBuf>,
    pub mcp_path: String,
    pub enable_edit_endpoints: bool,
    pub title: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: DEFAULT_HOST.into(),
            port: DEFAULT_PORT,
            skills_dirs: vec![PathBuf::from("skills")],
            mcp_path: DEFAULT_MCP_PATH.into(),
            enable_edit_endpoints: false,
            title: ServerMeta::default().title,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("refusing to expose edit endpoints on non-loopback host `{0}`; bind to 127.0.0.1, ::1 or localhost, or disable them")]
    NonLoopback(String),
    #[error("mcp_path `{0}` must start with `/` and must not shadow /skills, /openapi.json or /docs")]
    BadMcpPath(String),
    #[error("no skills directory configured")]
    NoSkillsDirs,
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl ServerConfig {
    pub fn with_skills_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.skills_dirs = vec![dir.into()];
        self
    }

    pub fn with_port(mut self, port: u16) -> Self {
        self.port = port;
        self
    }

    pub fn with_host(mut self, host: impl Into<String>) -> Self {
        self.host = host.into();
        self
    }

    pub fn with_edit_endpoints(mut self, enabled: bool) -> Self {
        self.enable_edit_endpoints = enabled;
        self
    }

    /// Reads a config file. Relative `skills_dirs` resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for dir in &mut config.skills_dirs {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.mcp_path;
        let shadows = ["/skills", "/openapi.json", "/docs"]
            .iter()
            .any(|r| p == r || p.starts_with(&format!("{r}/")));
        if !p.starts_with('/') || p.len() < 2 || p.ends_with('/') || shadows {
            return Err(ConfigError::BadMcpPath(p.clone()));
        }
        if self.skills_dirs.is_empty() {
            return Err(ConfigError::NoSkillsDirs);
        }
        self.enforce_loopback()
    }

    /// Edit endpoints only ever listen on loopback.
    pub fn enforce_loopback(&self) -> Result<(), ConfigError> {
        if self.enable_edit_endpoints && !is_loopback_host(&self.host) {
            return Err(ConfigError::NonLoopback(self.host.clone()));
        }
        Ok(())
    }

    pub fn server_meta(&self) -> ServerMeta {
        ServerMeta {
            title: self.title.clone(),
            ..ServerMeta::default()
        }
    }
}

/// `127.0.0.0/8`, `::1` (bracketed or not) and `localhost`.
pub fn is_loopback_host(host: &str) -> bool {
    if host.eq_ignore_ascii_case("localhost") {
        return true;
    }
    let bare = host
        .strip_prefix('[')
        .and_then(|h| h.strip_suffix(']'))
        .unwrap_or(host);
    bare.parse::<IpAddr>()
        .map(|ip| ip.to_canonical().is_loopback())
        .unwrap_or(false)
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

struct AppState {
    skills: Vec<Arc<Skill>>,
    runtime: Runtime,
    mcp: Arc<McpTransport>,
    openapi: Value,
}

impl AppState {
    fn skill(&self, name: &str) -> Option<&Arc<Skill>> {
        self.skills.iter().find(|s| s.name == name)
    }
}

/// A configured server: skills discovered, routes ready, not yet listening.
pub struct SkillServer {
    config: ServerConfig,
    state: Arc<AppState>,
    hooks: Arc<dyn Lifecycle>,
    skipped: Vec<FolderReport>,
}

impl SkillServer {
    /// Validates the config, then discovers every configured skills directory.
    pub fn build(config: ServerConfig, registry: HandlerRegistry) -> Result<Self, ServerError> {
        config.validate()?;
        let discovery = discover_all(&config.skills_dirs, &registry)?;
        let mut server = Self::from_skills(config, discovery.skills, Runtime::new(registry))?;
        server.skipped = discovery.skipped;
        Ok(server)
    }

    /// Builds a server over an already assembled skill set.
    pub fn from_skills(
        config: ServerConfig,
        mut skills: Vec<Arc<Skill>>,
        runtime: Runtime,
    ) -> Result<Self, ServerError> {
        config.validate()?;
        skills.sort_by(|a, b| a.name.cmp(&b.name));
        let meta = config.server_meta();
        let openapi = build_openapi(skills.iter().map(|s| &**s), &meta);
        let mcp = Arc::new(McpTransport::new(&skills, runtime.clone(), meta));
        Ok(Self {
            config,
            state: Arc::new(AppState {
                skills,
                runtime,
                mcp,
                openapi,
            }),
            hooks: Arc::new(NoHooks),
            skipped: Vec::new(),
        })
    }

    /// User startup/shutdown hooks, nested inside the MCP lifecycle.
    pub fn with_hooks(mut self, hooks: impl Lifecycle + 'static) -> Self {
        self.hooks = Arc::new(hooks);
        self
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn skills(&self) -> &[Arc<Skill>] {
        &self.state.skills
    }

    pub fn skill(&self, name: &str) -> Option<&Arc<Skill>> {
        self.state.skill(name)
    }

    /// Folders discovery skipped, with the reason.
    pub fn skipped(&self) -> &[FolderReport] {
        &self.skipped
    }

    pub fn runtime(&self) -> &Runtime {
        &self.state.runtime
    }

    pub fn mcp(&self) -> &Arc<McpTransport> {
        &self.state.mcp
    }

    pub fn openapi(&self) -> &Value {
        &self.state.openapi
    }

    pub fn lifecycle(&self) -> ComposedLifecycle {
        let mcp: Arc<dyn Lifecycle> = self.state.mcp.clone();
        compose_lifecycle(mcp, self.hooks.clone())
    }

    pub fn router(&self) -> Router {
        let mut router = Router::new()
            .route("/skills", get(list_skills))
            .route("/skills/{name}", post(skill_endpoint))
            .route("/openapi.json", get(openapi_json))
            .route("/docs", get(docs_page))
            .route(&self.config.mcp_path, post(mcp_endpoint));
        if self.config.enable_edit_endpoints {
            router = router.route("/skills/{name}/edit", post(edit_endpoint).delete(clear_endpoint));
        }
        router.with_state(self.state.clone())
    }

    /// Binds the configured address and serves until Ctrl-C.
    pub async fn serve(self) -> Result<(), ServerError> {
        let listener = self.bind().await?;
        tracing::info!(
            addr = %listener.local_addr()?,
            skills = self.state.skills.len(),
            mcp = %self.config.mcp_path,
            "listening"
        );
        self.serve_with_shutdown(listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    }

    /// Binds the configured address. Refuses before binding when edit
    /// endpoints would be reachable off-host.
    pub async fn bind(&self) -> Result<TcpListener, ServerError> {
        self.config.enforce_loopback()?;
        let host = self.config.host.trim_start_matches('[').trim_end_matches(']');
        TcpListener::bind((host, self.config.port))
            .await
            .map_err(|source| ServerError::Bind {
                addr: format!("{}:{}", self.config.host, self.config.port),
                source,
            })
    }

    /// Runs startup hooks, serves until `signal` resolves, then runs
    /// shutdown hooks after in-flight requests drain.
    pub async fn serve_with_shutdown<F>(self, listener: TcpListener, signal: F) -> Result<(), ServerError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        let lifecycle = self.lifecycle();
        lifecycle.startup().await?;
        let served = axum::serve(listener.tap_io(set_nodelay), self.router())
            .with_graceful_shutdown(signal)
            .await;
        let stopped = lifecycle.shutdown().await;
        served?;
        stopped?;
        Ok(())
    }

    /// Binds and serves on a background task.
    pub async fn spawn(self) -> Result<RunningServer, ServerError> {
        let listener = self.bind().await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        // Startup runs here so that hook failures surface to the caller.
        let lifecycle = self.lifecycle();
        lifecycle.startup().await?;
        let router = self.router();
        let task = tokio::spawn(async move {
            let served = axum::serve(listener.tap_io(set_nodelay), router)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
            let stopped = lifecycle.shutdown().await;
            served?;
            stopped?;
            Ok(())
        });
        Ok(RunningServer {
            addr,
            shutdown: Some(tx),
            task,
        })
    }
}

// SSE frames are small and must not wait on Nagle's algorithm.
fn set_nodelay(tcp: &mut tokio::net::TcpStream) {
    if let Err(e) = tcp.set_nodelay(true) {
        tracing::trace!("TCP_NODELAY: {e}");
    }
}

/// Handle to a server running on a background task.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<Result<(), ServerError>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://<addr>` with no trailing slash.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting, drains, runs shutdown hooks.
    pub async fn shutdown(mut self) -> Result<(), ServerError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match (&mut self.task).await {
            Ok(res) => res,
            Err(e) => Err(ServerError::Io(std::io::Error::other(e))),
        }
    }
}

fn json_response(status: StatusCode, body: Value) -> Response {
    (status, axum::Json(body)).into_response()
}

fn detail(status: StatusCode, message: impl Into<String>) -> Response {
    json_response(status, json!({"detail": message.into()}))
}

fn error_status(e: &HandlerError) -> StatusCode {
    match e.kind {
        HandlerErrorKind::Timeout => StatusCode::GATEWAY_TIMEOUT,
        HandlerErrorKind::Failed | HandlerErrorKind::BadOutput => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// Any `Accept` value mentioning `application/json` selects the buffered
/// JSON response.
pub fn wants_json(headers: &HeaderMap) -> bool {
    headers
        .get_all(header::ACCEPT)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .any(|v| v.contains("application/json"))
}

fn sse_response(events: futures::stream::BoxStream<'static, Bytes>) -> Response {
    Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, "text/event-stream")
        .header(header::CACHE_CONTROL, "no-cache")
        .header(header::CONNECTION, "keep-alive")
        .header("x-accel-buffering", "no")
        .body(Body::from_stream(events.map(Ok::<_, Infallible>)))
        .expect("static headers are valid")
}

async fn skill_endpoint(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let Some(skill) = state.skill(&name).cloned() else {
        return detail(StatusCode::NOT_FOUND, "skill not found");
    };
    let Ok(payload) = serde_json::from_slice::<Value>(&body) else {
        return detail(StatusCode::BAD_REQUEST, "invalid JSON body");
    };
    let input = match skill.input_schema.validate(&payload) {
        Ok(v) => v,
        Err(e) => return json_response(StatusCode::UNPROCESSABLE_ENTITY, e.to_json()),
    };
    let runtime = state.runtime.clone();
    match (skill.is_streaming(), wants_json(&headers)) {
        (true, true) => match runtime.call_streaming(&skill, input).collect_all().await {
            Ok(chunks) => {
                let chunks: Vec<String> = chunks.iter().map(chunk_text).collect();
                json_response(StatusCode::OK, json!({"chunks": chunks}))
            }
            Err((partial, e)) => {
                let partial: Vec<String> = partial.iter().map(chunk_text).collect();
                json_response(
                    error_status(&e),
                    json!({"detail": e.message, "partial_chunks": partial}),
                )
            }
        },
        (true, false) => sse_response(sse::streaming_events(runtime.call_streaming(&skill, input))),
        (false, true) => match runtime.call_unary(&skill, input).await {
            Ok(out) => json_response(StatusCode::OK, out),
            Err(e) => detail(error_status(&e), e.message),
        },
        (false, false) => sse_response(sse::unary_events(async move {
            runtime.call_unary(&skill, input).await
        })),
    }
}

async fn list_skills(State(state): State<Arc<AppState>>) -> Response {
    let list: Vec<Value> = state
        .skills
        .iter()
        .map(|s| {
            json!({
                "name": s.name,
                "description": s.meta.description,
                "tags": s.meta.tags,
                "streaming": s.is_streaming(),
                "is_mcp": s.meta.is_mcp,
                "timeout_secs": s.meta.timeout_secs,
            })
        })
        .collect();
    json_response(StatusCode::OK, Value::Array(list))
}

async fn openapi_json(State(state): State<Arc<AppState>>) -> Response {
    json_response(StatusCode::OK, state.openapi.clone())
}

const DOCS_HTML: &str = r##"<!doctype html>
<html>
<head>
<meta charset="utf-8">
<title>Skills API</title>
<link rel="stylesheet" href="https://unpkg.com/swagger-ui-dist@5/swagger-ui.css">
</head>
<body>
<div id="swagger-ui"></div>
<script src="https://unpkg.com/swagger-ui-dist@5/swagger-ui-bundle.js"></script>
<script>SwaggerUIBundle({url: "/openapi.json", dom_id: "#swagger-ui"});</script>
</body>
</html>
"##;

async fn docs_page() -> Response {
    (
        [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
        DOCS_HTML,
    )
        .into_response()
}

async fn mcp_endpoint(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    if !state.mcp.is_running() {
        return detail(StatusCode::SERVICE_UNAVAILABLE, "MCP transport not running");
    }
    match state.mcp.handle_jsonrpc(&body).await {
        Some(reply) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            reply,
        )
            .into_response(),
        None => StatusCode::ACCEPTED.into_response(),
    }
}

async fn edit_endpoint(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> Response {
    let Some(skill) = state.skill(&name).cloned() else {
        return detail(StatusCode::NOT_FOUND, "skill not found");
    };
    let Ok(payload) = serde_json::from_slice::<Value>(&body) else {
        return detail(StatusCode::BAD_REQUEST, "invalid JSON body");
    };
    let req: EditRequest = match serde_json::from_value(payload) {
        Ok(r) => r,
        Err(e) => return detail(StatusCode::UNPROCESSABLE_ENTITY, format!("malformed override: {e}")),
    };
    match state.runtime.apply_edit_override(&skill, req) {
        Ok(()) => json_response(StatusCode::OK, json!({"status": "ok"})),
        Err(e) => detail(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn clear_endpoint(State(state): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Response {
    let Some(skill) = state.skill(&name).cloned() else {
        return detail(StatusCode::NOT_FOUND, "skill not found");
    };
    state.runtime.clear_edit_override(&skill);
    json_response(StatusCode::OK, json!({"status": "cleared"}))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_hosts() {
        for h in ["127.0.0.1", "127.8.9.10", "::1", "[::1]", "localhost", "LOCALHOST", "::ffff:127.0.0.1"] {
            assert!(is_loopback_host(h), "{h}");
        }
        for h in ["0.0.0.0", "10.0.0.1", "::", "example.com", "128.0.0.1", ""] {
            assert!(!is_loopback_host(h), "{h}");
        }
    }

    #[test]
    fn edit_endpoints_need_loopback() {
        let c = ServerConfig::default().with_host("0.0.0.0");
        assert!(c.validate().is_ok());
        let c = c.with_edit_endpoints(true);
        assert!(matches!(c.validate(), Err(ConfigError::NonLoopback(_))));
    }

    #[test]
    fn mcp_path_rules() {
        for bad in ["mcp", "/", "/skills", "/skills/x", "/docs", "/mcp/"] {
            let c = ServerConfig { mcp_path: bad.into(), ..ServerConfig::default() };
            assert!(c.validate().is_err(), "{bad}");
        }
        let c = ServerConfig { mcp_path: "/rpc/mcp".into(), ..ServerConfig::default() };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn accept_negotiation() {
        let mut h = HeaderMap::new();
        assert!(!wants_json(&h));
        h.insert(header::ACCEPT, "text/event-stream".parse().unwrap());
        assert!(!wants_json(&h));
        h.append(header::ACCEPT, "application/json;q=0.5".parse().unwrap());
        assert!(wants_json(&h));
    }

    #[test]
    fn config_file_resolves_relative_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CONFIG_FILE);
        std::fs::write(&path, "port = 9001\nskills_dirs = [\"skills\"]\n").unwrap();
        let c = ServerConfig::from_file(&path).unwrap();
        assert_eq!(c.port, 9001);
        assert_eq!(c.skills_dirs, vec![dir.path().join("skills")]);
        std::fs::write(&path, "prot = 1\n").unwrap();
        assert!(matches!(ServerConfig::from_file(&path), Err(ConfigError::Parse { .. })));
    }
}
