//! Server-Sent Events framing.
//!
//! Every event is `event: <name>\ndata: <canonical JSON>\n\n`. Because the
//! payload is single-line JSON, one `data:` line always suffices.

use bytes::Bytes;
use futures::stream::{self, BoxStream, StreamExt};
use serde_json::{json, Value};

use crate::runtime::{ChunkStream, HandlerError};
use crate::schema::canonicalize;

pub const EVENT_CHUNK: &str = "chunk";
pub const EVENT_RESULT: &str = "result";
pub const EVENT_DONE: &str = "done";
pub const EVENT_ERROR: &str = "error";

pub fn encode_sse_event(event: &str, data: &Value) -> Bytes {
    let mut out = Vec::with_capacity(event.len() + 16);
    out.extend_from_slice(b"event: ");
    out.extend_from_slice(event.as_bytes());
    out.extend_from_slice(b"\ndata: ");
    out.extend_from_slice(&canonicalize(data));
    out.extend_from_slice(b"\n\n");
    Bytes::from(out)
}

fn error_event(e: &HandlerError) -> Bytes {
    encode_sse_event(EVENT_ERROR, &json!({"detail": e.message}))
}

/// `chunk* (done | error)`: each chunk is written as soon as it arrives.
pub fn streaming_events(chunks: ChunkStream) -> BoxStream<'static, Bytes> {
    stream::unfold(Some(chunks), |state| async move {
        let mut chunks = state?;
        match chunks.next().await {
            Some(Ok(v)) => Some((encode_sse_event(EVENT_CHUNK, &v), Some(chunks))),
            Some(Err(e)) => Some((error_event(&e), None)),
            None => Some((encode_sse_event(EVENT_DONE, &Value::Null), None)),
        }
    })
    .boxed()
}

/// `(result done) | error` for a unary outcome.
pub fn unary_events<F>(outcome: F) -> BoxStream<'static, Bytes>
where
    F: std::future::Future<Output = Result<Value, HandlerError>> + Send + 'static,
{
    stream::once(outcome)
        .flat_map(|res| {
            let events = match res {
                Ok(v) => vec![
                    encode_sse_event(EVENT_RESULT, &v),
                    encode_sse_event(EVENT_DONE, &Value::Null),
                ],
                Err(e) => vec![error_event(&e)],
            };
            stream::iter(events)
        })
        .boxed()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub event: String,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed SSE frame: {0}")]
pub struct SseParseError(pub String);

/// Parses a complete SSE body as produced by this server. Client side
/// helper for tests and examples.
pub fn parse_sse(body: &str) -> Result<Vec<SseEvent>, SseParseError> {
    let mut events = Vec::new();
    for frame in body.split("\n\n").filter(|f| !f.trim().is_empty()) {
        let mut event = None;
        let mut data = Vec::new();
        for line in frame.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                event = Some(v.trim_start().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        let event = event.ok_or_else(|| SseParseError(frame.to_string()))?;
        let data = serde_json::from_str(&data.join("\n"))
            .map_err(|e| SseParseError(format!("{frame}: {e}")))?;
        events.push(SseEvent { event, data });
    }
    Ok(events)
}

/// Checks the event grammar: `chunk* (done|error)` for streaming skills,
/// `(result done) | error` for unary ones.
pub fn grammar_ok(events: &[SseEvent], streaming: bool) -> bool {
    let names: Vec<&str> = events.iter().map(|e| e.event.as_str()).collect();
    if streaming {
        match names.split_last() {
            Some((last, rest)) => {
                matches!(*last, EVENT_DONE | EVENT_ERROR) && rest.iter().all(|n| *n == EVENT_CHUNK)
            }
            None => false,
        }
    } else {
        names == [EVENT_RESULT, EVENT_DONE] || names == [EVENT_ERROR]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_frame_bytes() {
        assert_eq!(
            &encode_sse_event("chunk", &json!("partial: 9"))[..],
            b"event: chunk\ndata: \"partial: 9\"\n\n"
        );
        assert_eq!(&encode_sse_event("done", &Value::Null)[..], b"event: done\ndata: null\n\n");
        assert_eq!(
            &encode_sse_event("result", &json!({"b": 1, "a": [true]}))[..],
            b"event: result\ndata: {\"a\":[true],\"b\":1}\n\n"
        );
    }

    #[test]
    fn newlines_stay_escaped() {
        let frame = encode_sse_event("chunk", &json!("line1\nline2"));
        assert_eq!(&frame[..], b"event: chunk\ndata: \"line1\\nline2\"\n\n");
        let parsed = parse_sse(std::str::from_utf8(&frame).unwrap()).unwrap();
        assert_eq!(parsed[0].data, json!("line1\nline2"));
    }

    #[test]
    fn grammar() {
        let ev = |n: &str| SseEvent { event: n.into(), data: Value::Null };
        assert!(grammar_ok(&[ev("chunk"), ev("chunk"), ev("done")], true));
        assert!(grammar_ok(&[ev("error")], true));
        assert!(!grammar_ok(&[ev("chunk")], true));
        assert!(!grammar_ok(&[ev("done"), ev("chunk")], true));
        assert!(grammar_ok(&[ev("result"), ev("done")], false));
        assert!(!grammar_ok(&[ev("chunk"), ev("done")], false));
    }

    #[tokio::test]
    async fn unary_error_is_single_event() {
        let events: Vec<Bytes> =
            unary_events(async { Err(HandlerError::failed("boom")) }).collect().await;
        assert_eq!(events.len(), 1);
        assert_eq!(&events[0][..], b"event: error\ndata: {\"detail\":\"boom\"}\n\n");
    }
}
