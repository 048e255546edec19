//! Skills backed by external commands: one JSON document on stdin, one JSON
//! document (or NDJSON lines when streaming) on stdout. A command that
//! outlives its timeout is killed together with its process group.

use serde_json::json;
use skillstack::{builtin, discover, Runtime};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/extra");
    let registry = builtin::registry();
    let found = discover(dir.as_ref(), &registry)?;
    let runtime = Runtime::new(registry);
    let skill = |n: &str| found.get(n).cloned().expect("fixture present");

    let shout = skill("shout");
    println!("shout.command = {:?}", shout.binding().command().unwrap());
    println!("shout -> {}", runtime.call_unary(&shout, json!({"text": "quiet please"})).await?);

    let countdown = skill("countdown");
    let chunks = runtime
        .call_streaming(&countdown, json!({"from": 5}))
        .collect_all()
        .await
        .map_err(|(_, e)| e)?;
    println!("countdown -> {chunks:?}");

    let slow = skill("sleep_subprocess");
    let started = std::time::Instant::now();
    let err = runtime.call_unary(&slow, json!({})).await.unwrap_err();
    println!("sleep_subprocess -> {:?} {:?} after {:.2?}", err.kind, err.message, started.elapsed());
    Ok(())
}
