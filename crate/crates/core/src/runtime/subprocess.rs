//! Subprocess handler protocol.
//!
//! The input is written to stdin as one UTF-8 JSON document, then stdin is
//! closed. A unary command prints exactly one JSON document; a streaming
//! command prints one JSON value per line. Exit status 0 means success.
//!
//! Each child runs in its own process group so a timeout can kill anything it
//! spawned, and every child is waited on before the call returns.

use std::path::Path;
use std::process::{ExitStatus, Stdio};
use std::time::Duration;

use serde_json::Value;
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::process::{Child, ChildStderr, Command};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::Instant;

use super::HandlerError;

pub const STDERR_TAIL_BYTES: usize = 4096;

fn spawn(
    command: &[String],
    cwd: Option<&Path>,
    input: &Value,
) -> Result<(Child, JoinHandle<String>), HandlerError> {
    let (program, args) = command
        .split_first()
        .ok_or_else(|| HandlerError::failed("empty subprocess command"))?;
    let mut cmd = Command::new(program);
    if let Some(dir) = cwd {
        cmd.current_dir(dir);
    }
    let mut child = cmd
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .kill_on_drop(true)
        .spawn()
        .map_err(|e| HandlerError::failed(format!("failed to spawn `{program}`: {e}")))?;

    let mut stdin = child.stdin.take().expect("stdin is piped");
    let payload = serde_json::to_vec(input).expect("JSON values serialize");
    tokio::spawn(async move {
        // A child that exits without reading its input is not an error here;
        // its exit status decides the outcome.
        let _ = stdin.write_all(&payload).await;
        let _ = stdin.shutdown().await;
    });
    let stderr = child.stderr.take().expect("stderr is piped");
    Ok((child, tokio::spawn(read_tail(stderr))))
}

async fn read_tail(mut stderr: ChildStderr) -> String {
    let mut tail: Vec<u8> = Vec::new();
    let mut truncated = false;
    let mut buf = [0u8; 4096];
    loop {
        match stderr.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                tail.extend_from_slice(&buf[..n]);
                if tail.len() > STDERR_TAIL_BYTES {
                    let cut = tail.len() - STDERR_TAIL_BYTES;
                    tail.drain(..cut);
                    truncated = true;
                }
            }
        }
    }
    let text = String::from_utf8_lossy(&tail).trim().to_string();
    if truncated {
        format!("[stderr truncated to last {STDERR_TAIL_BYTES} bytes] {text}")
    } else {
        text
    }
}

/// Kills the child's whole process group and reaps the child.
async fn kill_and_reap(child: &mut Child) {
    if let Some(pid) = child.id() {
        // SAFETY: killpg has no memory-safety preconditions; the group id is
        // the pid of our own unreaped child, so it cannot have been reused.
        unsafe {
            libc::killpg(pid as libc::pid_t, libc::SIGKILL);
        }
    }
    let _ = child.kill().await;
    let _ = child.wait().await;
}

async fn exit_error(status: ExitStatus, stderr: JoinHandle<String>) -> HandlerError {
    // a grandchild may still hold stderr open
    let tail = tokio::time::timeout(Duration::from_millis(500), stderr)
        .await
        .ok()
        .and_then(Result::ok)
        .unwrap_or_default();
    let code = match status.code() {
        Some(c) => format!("exit code {c}"),
        None => "a signal".to_string(),
    };
    if tail.is_empty() {
        HandlerError::failed(format!("subprocess failed with {code}"))
    } else {
        HandlerError::failed(format!("subprocess failed with {code}: {tail}"))
    }
}

async fn read_all<R: AsyncRead + Unpin>(mut r: R) -> std::io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).await?;
    Ok(buf)
}

/// Parses exactly one JSON document, tolerating surrounding whitespace.
fn single_document(bytes: &[u8]) -> Result<Value, HandlerError> {
    let mut docs = serde_json::Deserializer::from_slice(bytes).into_iter::<Value>();
    let first = match docs.next() {
        Some(Ok(v)) => v,
        Some(Err(e)) => {
            return Err(HandlerError::bad_output(format!(
                "subprocess stdout is not valid JSON: {e}"
            )))
        }
        None => return Err(HandlerError::bad_output("subprocess produced no output")),
    };
    match docs.next() {
        None => Ok(first),
        Some(_) => Err(HandlerError::bad_output(
            "subprocess printed more than one JSON document",
        )),
    }
}

pub(super) async fn run_unary(
    command: &[String],
    cwd: Option<&Path>,
    input: &Value,
    limit: Duration,
) -> Result<Value, HandlerError> {
    let (mut child, stderr) = spawn(command, cwd, input)?;
    let stdout = child.stdout.take().expect("stdout is piped");

    let outcome = tokio::time::timeout(limit, async {
        let out = read_all(stdout).await?;
        let status = child.wait().await?;
        Ok::<_, std::io::Error>((out, status))
    })
    .await;

    match outcome {
        Ok(Ok((out, status))) => {
            if !status.success() {
                return Err(exit_error(status, stderr).await);
            }
            single_document(&out)
        }
        Ok(Err(io)) => {
            kill_and_reap(&mut child).await;
            Err(HandlerError::failed(format!("subprocess i/o error: {io}")))
        }
        Err(_) => {
            kill_and_reap(&mut child).await;
            Err(HandlerError::timeout(limit))
        }
    }
}

pub(super) async fn run_streaming(
    command: &[String],
    cwd: Option<&Path>,
    input: &Value,
    deadline: Instant,
    limit: Duration,
    tx: mpsc::Sender<Result<Value, HandlerError>>,
) {
    let (mut child, stderr) = match spawn(command, cwd, input) {
        Ok(c) => c,
        Err(e) => {
            let _ = tx.send(Err(e)).await;
            return;
        }
    };
    let stdout = child.stdout.take().expect("stdout is piped");
    let mut lines = BufReader::new(stdout).lines();

    loop {
        let line = match tokio::time::timeout_at(deadline, lines.next_line()).await {
            Err(_) => {
                kill_and_reap(&mut child).await;
                let _ = tx.send(Err(HandlerError::timeout(limit))).await;
                return;
            }
            Ok(Err(io)) => {
                kill_and_reap(&mut child).await;
                let _ = tx
                    .send(Err(HandlerError::bad_output(format!(
                        "subprocess stdout is not UTF-8 text: {io}"
                    ))))
                    .await;
                return;
            }
            Ok(Ok(None)) => break,
            Ok(Ok(Some(line))) => line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let chunk = match serde_json::from_str::<Value>(&line) {
            Ok(v) => v,
            Err(e) => {
                kill_and_reap(&mut child).await;
                let _ = tx
                    .send(Err(HandlerError::bad_output(format!(
                        "subprocess emitted a line that is not one JSON value: {e}"
                    ))))
                    .await;
                return;
            }
        };
        if tx.send(Ok(chunk)).await.is_err() {
            // consumer went away
            kill_and_reap(&mut child).await;
            return;
        }
    }

    match tokio::time::timeout_at(deadline, child.wait()).await {
        Err(_) => {
            kill_and_reap(&mut child).await;
            let _ = tx.send(Err(HandlerError::timeout(limit))).await;
        }
        Ok(Err(io)) => {
            kill_and_reap(&mut child).await;
            let _ = tx
                .send(Err(HandlerError::failed(format!("subprocess i/o error: {io}"))))
                .await;
        }
        Ok(Ok(status)) if !status.success() => {
            let _ = tx.send(Err(exit_error(status, stderr).await)).await;
        }
        Ok(Ok(_)) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ChunkStream, HandlerErrorKind};
    use super::*;
    use serde_json::json;

    fn cmd(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    fn sh(script: &str) -> Vec<String> {
        cmd(&["sh", "-c", script])
    }

    async fn stream(command: Vec<String>, limit: Duration) -> Result<Vec<Value>, (Vec<Value>, HandlerError)> {
        let (tx, s) = ChunkStream::channel();
        let deadline = Instant::now() + limit;
        tokio::spawn(async move { run_streaming(&command, None, &json!({}), deadline, limit, tx).await });
        s.collect_all().await
    }

    #[tokio::test]
    async fn cat_is_identity() {
        let out = run_unary(&cmd(&["cat"]), None, &json!({"text": "x"}), Duration::from_secs(5))
            .await
            .unwrap();
        assert_eq!(out, json!({"text": "x"}));
    }

    #[tokio::test]
    async fn trailing_whitespace_ok_extra_document_rejected() {
        let ok = run_unary(&sh("cat >/dev/null; printf '{\"a\":1}\\n\\n  '"), None, &json!({}), Duration::from_secs(5))
            .await
            .unwrap();
        assert_eq!(ok, json!({"a": 1}));
        let err = run_unary(&sh("cat >/dev/null; echo '{}'; echo '{}'"), None, &json!({}), Duration::from_secs(5))
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::BadOutput);
        let err = run_unary(&sh("cat >/dev/null; echo nope"), None, &json!({}), Duration::from_secs(5))
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::BadOutput);
    }

    #[tokio::test]
    async fn nonzero_exit_reports_stderr() {
        let err = run_unary(&sh("echo boom >&2; exit 1"), None, &json!({}), Duration::from_secs(5))
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::Failed);
        assert!(err.message.contains("boom"), "{}", err.message);
        assert!(err.message.contains("exit code 1"));
    }

    #[tokio::test]
    async fn stderr_tail_is_capped() {
        let err = run_unary(
            &sh("head -c 10000 /dev/zero | tr '\\0' x >&2; echo END >&2; exit 3"),
            None,
            &json!({}),
            Duration::from_secs(5),
        )
        .await
        .unwrap_err();
        assert!(err.message.ends_with("END"));
        assert!(err.message.contains("truncated"));
        assert!(err.message.len() < STDERR_TAIL_BYTES + 200);
    }

    #[tokio::test]
    async fn missing_program_fails() {
        let err = run_unary(&cmd(&["/nonexistent/handler"]), None, &json!({}), Duration::from_secs(1))
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::Failed);
    }

    #[tokio::test]
    async fn unary_timeout_kills() {
        let start = std::time::Instant::now();
        let err = run_unary(&sh("sleep 5; cat"), None, &json!({}), Duration::from_millis(300))
            .await
            .unwrap_err();
        assert_eq!(err.kind, HandlerErrorKind::Timeout);
        assert!(start.elapsed() < Duration::from_secs(2));
    }

    #[tokio::test]
    async fn ndjson_lines_become_chunks() {
        let chunks = stream(sh("cat >/dev/null; echo '\"a\"'; echo; echo '\"b\"'; echo '\"c\"'"), Duration::from_secs(5))
            .await
            .unwrap();
        assert_eq!(chunks, [json!("a"), json!("b"), json!("c")]);
    }

    #[tokio::test]
    async fn streaming_failure_keeps_delivered_chunks() {
        let (chunks, err) = stream(sh("echo 1; echo 2; echo bad >&2; exit 4"), Duration::from_secs(5))
            .await
            .unwrap_err();
        assert_eq!(chunks, [json!(1), json!(2)]);
        assert!(err.message.contains("bad"));

        let (chunks, err) = stream(sh("echo 1; echo '{oops'"), Duration::from_secs(5))
            .await
            .unwrap_err();
        assert_eq!(chunks, [json!(1)]);
        assert_eq!(err.kind, HandlerErrorKind::BadOutput);
    }

    #[tokio::test]
    async fn streaming_timeout() {
        let start = std::time::Instant::now();
        let (chunks, err) = stream(sh("echo '\"x\"'; sleep 5; echo '\"y\"'"), Duration::from_millis(500))
            .await
            .unwrap_err();
        assert_eq!(chunks, [json!("x")]);
        assert_eq!(err.kind, HandlerErrorKind::Timeout);
        assert!(start.elapsed() < Duration::from_secs(2));
    }
}
