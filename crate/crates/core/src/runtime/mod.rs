//! Handler execution: in-process registered handlers and subprocess commands,
//! each under a per-skill deadline.

mod examples;
mod subprocess;

use std::collections::BTreeMap;
use std::fmt;
use std::future::Future;
use std::pin::Pin;
use std::sync::Arc;
use std::task::{Context, Poll};
use std::time::Duration;

use futures::future::BoxFuture;
use futures::stream::{BoxStream, Stream, StreamExt};
use serde::Deserialize;
use serde_json::Value;
use tokio::sync::mpsc;
use tokio::time::Instant;

use crate::schema::{canonical_string, SchemaDoc};
use crate::skill::{HandlerBinding, HandlerKind, KindMismatch, Skill};

pub use examples::{ExampleOutcome, ExampleReport};
pub use subprocess::STDERR_TAIL_BYTES;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

pub type UnaryFn = Arc<dyn Fn(Value) -> BoxFuture<'static, Result<Value, BoxError>> + Send + Sync>;
pub type StreamingFn =
    Arc<dyn Fn(Value) -> BoxStream<'static, Result<Value, BoxError>> + Send + Sync>;

#[derive(Clone)]
pub enum Handler {
    Unary(UnaryFn),
    Streaming(StreamingFn),
}

impl Handler {
    pub fn kind(&self) -> HandlerKind {
        match self {
            Handler::Unary(_) => HandlerKind::Unary,
            Handler::Streaming(_) => HandlerKind::Streaming,
        }
    }
}

#[derive(Clone)]
pub struct RegistryEntry {
    description: Option<String>,
    handler: Handler,
}

impl RegistryEntry {
    /// Description used when neither skill.toml nor SKILL.md provide one.
    pub fn describe(&mut self, description: impl Into<String>) -> &mut Self {
        self.description = Some(description.into());
        self
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn kind(&self) -> HandlerKind {
        self.handler.kind()
    }

    pub fn handler(&self) -> &Handler {
        &self.handler
    }
}

impl fmt::Debug for RegistryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegistryEntry")
            .field("kind", &self.kind())
            .field("description", &self.description)
            .finish()
    }
}

/// In-process handlers by key. A skill folder binds to the entry whose key is
/// the folder name.
#[derive(Clone, Default, Debug)]
pub struct HandlerRegistry {
    entries: BTreeMap<String, RegistryEntry>,
}

impl HandlerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, key: String, handler: Handler) -> &mut RegistryEntry {
        assert!(
            !self.entries.contains_key(&key),
            "handler `{key}` registered twice"
        );
        self.entries.entry(key).or_insert(RegistryEntry {
            description: None,
            handler,
        })
    }

    /// Registers a handler returning one output object.
    ///
    /// # Panics
    ///
    /// If `key` is already registered.
    pub fn register_unary<F, Fut>(&mut self, key: impl Into<String>, f: F) -> &mut RegistryEntry
    where
        F: Fn(Value) -> Fut + Send + Sync + 'static,
        Fut: Future<Output = Result<Value, BoxError>> + Send + 'static,
    {
        let f: UnaryFn = Arc::new(move |v| Box::pin(f(v)));
        self.insert(key.into(), Handler::Unary(f))
    }

    /// Registers a handler producing a stream of chunks.
    ///
    /// # Panics
    ///
    /// If `key` is already registered.
    pub fn register_streaming<F, S>(&mut self, key: impl Into<String>, f: F) -> &mut RegistryEntry
    where
        F: Fn(Value) -> S + Send + Sync + 'static,
        S: Stream<Item = Result<Value, BoxError>> + Send + 'static,
    {
        let f: StreamingFn = Arc::new(move |v| f(v).boxed());
        self.insert(key.into(), Handler::Streaming(f))
    }

    pub fn get(&self, key: &str) -> Option<&RegistryEntry> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandlerErrorKind {
    Timeout,
    Failed,
    BadOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct HandlerError {
    pub kind: HandlerErrorKind,
    pub message: String,
}

impl HandlerError {
    pub fn timeout(limit: Duration) -> Self {
        Self {
            kind: HandlerErrorKind::Timeout,
            message: format!("handler timeout after {}s", limit.as_secs_f64()),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self::new(HandlerErrorKind::Failed, message)
    }

    pub fn bad_output(message: impl Into<String>) -> Self {
        Self::new(HandlerErrorKind::BadOutput, message)
    }

    fn new(kind: HandlerErrorKind, message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message = "handler failed".into();
        }
        Self { kind, message }
    }
}

/// Incrementally delivered handler chunks. Ends after normal completion or
/// after yielding one error.
pub struct ChunkStream {
    rx: mpsc::Receiver<Result<Value, HandlerError>>,
    finished: bool,
}

impl ChunkStream {
    fn channel() -> (mpsc::Sender<Result<Value, HandlerError>>, Self) {
        let (tx, rx) = mpsc::channel(16);
        (
            tx,
            Self {
                rx,
                finished: false,
            },
        )
    }

    fn failed(err: HandlerError) -> Self {
        let (tx, stream) = Self::channel();
        tx.try_send(Err(err)).expect("fresh channel has capacity");
        stream
    }

    /// Drains the stream; on error returns the chunks delivered before it.
    pub async fn collect_all(mut self) -> Result<Vec<Value>, (Vec<Value>, HandlerError)> {
        let mut chunks = Vec::new();
        while let Some(item) = self.next().await {
            match item {
                Ok(v) => chunks.push(v),
                Err(e) => return Err((chunks, e)),
            }
        }
        Ok(chunks)
    }
}

impl Stream for ChunkStream {
    type Item = Result<Value, HandlerError>;

    fn poll_next(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<Option<Self::Item>> {
        if self.finished {
            return Poll::Ready(None);
        }
        match self.rx.poll_recv(cx) {
            Poll::Ready(Some(Err(e))) => {
                self.finished = true;
                self.rx.close();
                Poll::Ready(Some(Err(e)))
            }
            Poll::Ready(None) => {
                self.finished = true;
                Poll::Ready(None)
            }
            other => other,
        }
    }
}

/// String form of a chunk: JSON strings as their raw value, anything else as
/// canonical JSON text.
pub fn chunk_text(chunk: &Value) -> String {
    match chunk {
        Value::String(s) => s.clone(),
        other => canonical_string(other),
    }
}

/// A replacement binding posted to an edit endpoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    pub registry_key: Option<String>,
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OverrideError {
    #[error("no handler registered under `{0}`")]
    NotFound(String),
    #[error("type check failed: {0}")]
    KindMismatch(#[from] KindMismatch),
    #[error("malformed override: {0}")]
    Malformed(String),
}

pub fn timeout_duration(secs: f64) -> Duration {
    Duration::from_secs_f64(secs)
}

/// Executes handler bindings against a registry.
#[derive(Clone, Debug)]
pub struct Runtime {
    registry: Arc<HandlerRegistry>,
}

impl Runtime {
    pub fn new(registry: HandlerRegistry) -> Self {
        Self {
            registry: Arc::new(registry),
        }
    }

    pub fn registry(&self) -> &HandlerRegistry {
        &self.registry
    }

    /// Runs a unary binding and checks its output against `output_schema`.
    pub async fn invoke_unary(
        &self,
        binding: &HandlerBinding,
        input: Value,
        output_schema: &SchemaDoc,
        timeout: Duration,
    ) -> Result<Value, HandlerError> {
        let output = match binding {
            HandlerBinding::Registered { key, .. } => {
                let f = match self.registry.get(key).map(RegistryEntry::handler) {
                    Some(Handler::Unary(f)) => Arc::clone(f),
                    Some(Handler::Streaming(_)) => {
                        return Err(HandlerError::failed(format!(
                            "handler `{key}` is streaming but was invoked as unary"
                        )))
                    }
                    None => {
                        return Err(HandlerError::failed(format!(
                            "no handler registered under `{key}`"
                        )))
                    }
                };
                let fut = tokio::spawn(f(input));
                let abort = fut.abort_handle();
                match tokio::time::timeout(timeout, fut).await {
                    Ok(Ok(Ok(v))) => v,
                    Ok(Ok(Err(e))) => return Err(HandlerError::failed(e.to_string())),
                    Ok(Err(join)) => {
                        return Err(HandlerError::failed(format!("handler panicked: {join}")))
                    }
                    Err(_) => {
                        abort.abort();
                        return Err(HandlerError::timeout(timeout));
                    }
                }
            }
            HandlerBinding::Subprocess { command, cwd, .. } => {
                subprocess::run_unary(command, cwd.as_deref(), &input, timeout).await?
            }
        };
        output_schema.check(&output).map_err(|e| {
            HandlerError::bad_output(format!(
                "handler output does not match the output schema: {}",
                e.render().replace('\n', "; ")
            ))
        })?;
        Ok(output)
    }

    /// Starts a streaming binding; the whole stream shares one deadline.
    pub fn invoke_streaming(
        &self,
        binding: &HandlerBinding,
        input: Value,
        timeout: Duration,
    ) -> ChunkStream {
        let deadline = Instant::now() + timeout;
        match binding {
            HandlerBinding::Registered { key, .. } => {
                let f = match self.registry.get(key).map(RegistryEntry::handler) {
                    Some(Handler::Streaming(f)) => Arc::clone(f),
                    Some(Handler::Unary(_)) => {
                        return ChunkStream::failed(HandlerError::failed(format!(
                            "handler `{key}` is unary but was invoked as streaming"
                        )))
                    }
                    None => {
                        return ChunkStream::failed(HandlerError::failed(format!(
                            "no handler registered under `{key}`"
                        )))
                    }
                };
                let (tx, stream) = ChunkStream::channel();
                tokio::spawn(drive_in_process(f, input, deadline, timeout, tx));
                stream
            }
            HandlerBinding::Subprocess { command, cwd, .. } => {
                let (tx, stream) = ChunkStream::channel();
                let (command, cwd) = (command.clone(), cwd.clone());
                tokio::spawn(async move {
                    subprocess::run_streaming(&command, cwd.as_deref(), &input, deadline, timeout, tx)
                        .await
                });
                stream
            }
        }
    }

    /// Unary invocation of the skill's effective binding, resolved once.
    pub async fn call_unary(&self, skill: &Skill, input: Value) -> Result<Value, HandlerError> {
        let binding = skill.effective_binding();
        self.invoke_unary(
            &binding,
            input,
            &skill.output_schema,
            timeout_duration(skill.meta.timeout_secs),
        )
        .await
    }

    pub fn call_streaming(&self, skill: &Skill, input: Value) -> ChunkStream {
        let binding = skill.effective_binding();
        self.invoke_streaming(&binding, input, timeout_duration(skill.meta.timeout_secs))
    }

    /// Installs an edit override after checking it resolves and has the
    /// skill's streaming kind.
    pub fn apply_edit_override(&self, skill: &Skill, req: EditRequest) -> Result<(), OverrideError> {
        let binding = match (req.registry_key, req.command) {
            (Some(key), None) => {
                let entry = self
                    .registry
                    .get(&key)
                    .ok_or_else(|| OverrideError::NotFound(key.clone()))?;
                HandlerBinding::Registered {
                    key,
                    handler: entry.kind(),
                }
            }
            (None, Some(command)) => {
                if command.is_empty() || command[0].is_empty() {
                    return Err(OverrideError::Malformed("command must not be empty".into()));
                }
                HandlerBinding::Subprocess {
                    command,
                    streaming: skill.is_streaming(),
                    cwd: skill.dir.clone(),
                }
            }
            (Some(_), Some(_)) => {
                return Err(OverrideError::Malformed(
                    "give either registry_key or command, not both".into(),
                ))
            }
            (None, None) => {
                return Err(OverrideError::Malformed(
                    "one of registry_key or command is required".into(),
                ))
            }
        };
        skill.set_edit_binding(binding)?;
        tracing::info!(skill = %skill.name, "edit override installed");
        Ok(())
    }

    pub fn clear_edit_override(&self, skill: &Skill) {
        skill.clear_edit_binding();
    }
}

async fn drive_in_process(
    f: StreamingFn,
    input: Value,
    deadline: Instant,
    limit: Duration,
    tx: mpsc::Sender<Result<Value, HandlerError>>,
) {
    let mut inner = f(input);
    loop {
        match tokio::time::timeout_at(deadline, inner.next()).await {
            Ok(Some(Ok(chunk))) => {
                if tx.send(Ok(chunk)).await.is_err() {
                    return;
                }
            }
            Ok(Some(Err(e))) => {
                let _ = tx.send(Err(HandlerError::failed(e.to_string()))).await;
                return;
            }
            Ok(None) => return,
            Err(_) => {
                drop(inner);
                let _ = tx.send(Err(HandlerError::timeout(limit))).await;
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaRole;
    use crate::skill::SkillMetadata;
    use futures::stream;
    use serde_json::json;

    fn echo_schema(role: SchemaRole) -> SchemaDoc {
        SchemaDoc::new(
            json!({"type": "object", "properties": {"text": {"type": "string"}}, "required": ["text"]}),
            "echo",
            role,
        )
        .unwrap()
    }

    fn registry() -> HandlerRegistry {
        let mut r = HandlerRegistry::new();
        r.register_unary("echo", |v| async move { Ok(v) });
        r.register_unary("echo_v2", |v: Value| async move {
            let t = v["text"].as_str().unwrap_or_default().to_uppercase();
            Ok(json!({"text": t}))
        });
        r.register_unary("wrong", |_| async move { Ok(json!({"wrong": true})) });
        r.register_unary("sleepy", |v| async move {
            tokio::time::sleep(Duration::from_secs(2)).await;
            Ok(v)
        });
        r.register_unary("boom", |_| async move { Err::<Value, BoxError>("boom".into()) });
        r.register_streaming("three", |_| {
            stream::iter(["a", "b", "c"].map(|s| Ok(json!(s))))
        });
        r.register_streaming("nothing", |_| stream::empty());
        r.register_streaming("fail_after_two", |_| {
            stream::iter(vec![
                Ok(json!("one")),
                Ok(json!("two")),
                Err::<Value, BoxError>("exploded".into()),
                Ok(json!("never")),
            ])
        });
        r.register_streaming("slow_stream", |_| {
            stream::unfold(0, |i| async move {
                tokio::time::sleep(Duration::from_millis(400)).await;
                Some((Ok(json!(i)), i + 1))
            })
        });
        r
    }

    fn registered(key: &str, handler: HandlerKind) -> HandlerBinding {
        HandlerBinding::Registered {
            key: key.into(),
            handler,
        }
    }

    fn echo_skill() -> Skill {
        Skill::new(
            "echo",
            SkillMetadata::default(),
            echo_schema(SchemaRole::Input),
            echo_schema(SchemaRole::Output),
            registered("echo", HandlerKind::Unary),
        )
    }

    #[tokio::test]
    async fn unary_echo() {
        let rt = Runtime::new(registry());
        let out = rt
            .invoke_unary(
                &registered("echo", HandlerKind::Unary),
                json!({"text": "x"}),
                &echo_schema(SchemaRole::Output),
                Duration::from_secs(5),
            )
            .await
            .unwrap();
        assert_eq!(out, json!({"text": "x"}));
    }

    #[tokio::test]
    async fn unary_bad_output() {
        let rt = Runtime::new(registry());
        let err = rt
            .invoke_unary(
                &registered("wrong", HandlerKind::Unary),
                json!({"text": "x"}),
                &echo_schema(SchemaRole::Output),
                Duration::from_secs(5),
            )
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::BadOutput);
    }

    #[tokio::test]
    async fn unary_failure_and_missing_key() {
        let rt = Runtime::new(registry());
        let schema = echo_schema(SchemaRole::Output);
        let err = rt
            .invoke_unary(&registered("boom", HandlerKind::Unary), json!({}), &schema, Duration::from_secs(1))
            .await
            .unwrap_err();
        assert_eq!((err.kind, err.message.as_str()), (HandlerErrorKind::Failed, "boom"));
        let err = rt
            .invoke_unary(&registered("ghost", HandlerKind::Unary), json!({}), &schema, Duration::from_secs(1))
            .await
            .unwrap_err();
        assert!(err.message.contains("ghost"));
    }

    #[tokio::test]
    async fn unary_timeout_is_prompt() {
        let rt = Runtime::new(registry());
        let start = std::time::Instant::now();
        let err = rt
            .invoke_unary(
                &registered("sleepy", HandlerKind::Unary),
                json!({"text": "x"}),
                &echo_schema(SchemaRole::Output),
                Duration::from_secs(1),
            )
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::Timeout);
        assert_eq!(err.message, "handler timeout after 1s");
        assert!(start.elapsed() < Duration::from_millis(1500));
    }

    #[tokio::test]
    async fn streaming_chunks_in_order() {
        let rt = Runtime::new(registry());
        let chunks = rt
            .invoke_streaming(&registered("three", HandlerKind::Streaming), json!({}), Duration::from_secs(5))
            .collect_all()
            .await
            .unwrap();
        assert_eq!(chunks, [json!("a"), json!("b"), json!("c")]);

        let none = rt
            .invoke_streaming(&registered("nothing", HandlerKind::Streaming), json!({}), Duration::from_secs(5))
            .collect_all()
            .await
            .unwrap();
        assert!(none.is_empty());
    }

    #[tokio::test]
    async fn streaming_error_after_two_chunks() {
        let rt = Runtime::new(registry());
        let mut s = rt.invoke_streaming(
            &registered("fail_after_two", HandlerKind::Streaming),
            json!({}),
            Duration::from_secs(5),
        );
        let mut items = Vec::new();
        while let Some(i) = s.next().await {
            items.push(i);
        }
        assert_eq!(items.len(), 3);
        assert_eq!(items[0], Ok(json!("one")));
        assert_eq!(items[1], Ok(json!("two")));
        let err = items[2].clone().unwrap_err();
        assert_eq!((err.kind, err.message.as_str()), (HandlerErrorKind::Failed, "exploded"));
    }

    #[tokio::test]
    async fn streaming_timeout_covers_whole_stream() {
        let rt = Runtime::new(registry());
        let start = std::time::Instant::now();
        let (chunks, err) = rt
            .invoke_streaming(&registered("slow_stream", HandlerKind::Streaming), json!({}), Duration::from_secs(1))
            .collect_all()
            .await
            .unwrap_err();
        assert_eq!(chunks, [json!(0), json!(1)]);
        assert_eq!(err.kind, HandlerErrorKind::Timeout);
        assert!(start.elapsed() < Duration::from_millis(1500));
    }

    #[tokio::test]
    async fn override_round_trip() {
        let rt = Runtime::new(registry());
        let skill = echo_skill();
        let input = json!({"text": "hi"});
        rt.apply_edit_override(
            &skill,
            EditRequest {
                registry_key: Some("echo_v2".into()),
                command: None,
            },
        )
        .unwrap();
        assert_eq!(rt.call_unary(&skill, input.clone()).await.unwrap(), json!({"text": "HI"}));
        rt.clear_edit_override(&skill);
        assert_eq!(rt.call_unary(&skill, input.clone()).await.unwrap(), input);
        // clearing twice is a no-op
        rt.clear_edit_override(&skill);
        assert_eq!(*skill.effective_binding(), *skill.binding());
    }

    #[tokio::test]
    async fn override_errors() {
        let rt = Runtime::new(registry());
        let skill = echo_skill();
        let req = |k: Option<&str>, c: Option<Vec<&str>>| EditRequest {
            registry_key: k.map(String::from),
            command: c.map(|c| c.into_iter().map(String::from).collect()),
        };
        assert!(matches!(
            rt.apply_edit_override(&skill, req(Some("ghost"), None)),
            Err(OverrideError::NotFound(_))
        ));
        assert!(matches!(
            rt.apply_edit_override(&skill, req(Some("three"), None)),
            Err(OverrideError::KindMismatch(_))
        ));
        assert!(matches!(
            rt.apply_edit_override(&skill, req(Some("echo"), Some(vec!["cat"]))),
            Err(OverrideError::Malformed(_))
        ));
        assert!(matches!(
            rt.apply_edit_override(&skill, req(None, None)),
            Err(OverrideError::Malformed(_))
        ));
        assert!(skill.edit_binding().is_none());

        rt.apply_edit_override(&skill, req(None, Some(vec!["cat"]))).unwrap();
        assert_eq!(
            rt.call_unary(&skill, json!({"text": "piped"})).await.unwrap(),
            json!({"text": "piped"})
        );
    }

    #[tokio::test]
    async fn clear_does_not_disturb_in_flight_request() {
        let mut reg = registry();
        reg.register_unary("slow_v2", |_| async move {
            tokio::time::sleep(Duration::from_millis(300)).await;
            Ok(json!({"text": "v2"}))
        });
        let rt = Runtime::new(reg);
        let skill = Arc::new(echo_skill());
        rt.apply_edit_override(
            &skill,
            EditRequest {
                registry_key: Some("slow_v2".into()),
                command: None,
            },
        )
        .unwrap();
        let in_flight = {
            let (rt, skill) = (rt.clone(), Arc::clone(&skill));
            tokio::spawn(async move { rt.call_unary(&skill, json!({"text": "a"})).await })
        };
        tokio::time::sleep(Duration::from_millis(50)).await;
        rt.clear_edit_override(&skill);
        assert_eq!(in_flight.await.unwrap().unwrap(), json!({"text": "v2"}));
        assert_eq!(rt.call_unary(&skill, json!({"text": "a"})).await.unwrap(), json!({"text": "a"}));
    }

    #[test]
    fn chunk_text_forms() {
        assert_eq!(chunk_text(&json!("a b")), "a b");
        assert_eq!(chunk_text(&json!({"b": 1, "a": [2]})), r#"{"a":[2],"b":1}"#);
        assert_eq!(chunk_text(&json!(5)), "5");
    }
}
