//! Bring your own handlers: register them by folder name, write a folder
//! with a `models.json`, and both transports pick the skill up.

use futures::stream;
use serde_json::{json, Value};
use skillstack::runtime::{BoxError, HandlerRegistry};
use skillstack::server::{ServerConfig, SkillServer};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut registry = HandlerRegistry::new();
    registry
        .register_unary("wordcount", |input: Value| async move {
            let n = input["text"].as_str().unwrap_or_default().split_whitespace().count();
            Ok::<_, BoxError>(json!({"words": n}))
        })
        .describe("Count the words in a text");
    registry
        .register_streaming("fizzbuzz", |input: Value| {
            let upto = input["upto"].as_u64().unwrap_or(15);
            stream::iter((1..=upto).map(|i| {
                Ok::<_, BoxError>(json!(match (i % 3, i % 5) {
                    (0, 0) => "FizzBuzz".to_string(),
                    (0, _) => "Fizz".to_string(),
                    (_, 0) => "Buzz".to_string(),
                    _ => i.to_string(),
                }))
            }))
        })
        .describe("Stream FizzBuzz");

    let dir = tempfile::tempdir()?;
    std::fs::create_dir(dir.path().join("wordcount"))?;
    std::fs::write(
        dir.path().join("wordcount/models.json"),
        r#"{"input": {"type": "object", "properties": {"text": {"type": "string"}}, "required": ["text"]},
            "output": {"type": "object", "properties": {"words": {"type": "integer"}}, "required": ["words"]}}"#,
    )?;
    std::fs::create_dir(dir.path().join("fizzbuzz"))?;
    std::fs::write(
        dir.path().join("fizzbuzz/models.json"),
        r#"{"input": {"type": "object", "properties": {"upto": {"type": "integer", "minimum": 1, "maximum": 100, "default": 15}}},
            "output": {"type": "object"}}"#,
    )?;

    let config = ServerConfig::default().with_skills_dir(dir.path()).with_port(0);
    let running = SkillServer::build(config, registry)?.spawn().await?;
    let http = reqwest::Client::new();
    for (skill, body) in [("wordcount", r#"{"text": "one two three"}"#), ("fizzbuzz", r#"{"upto": 5}"#)] {
        let text = http
            .post(format!("{}/skills/{skill}", running.url()))
            .header("accept", "application/json")
            .body(body)
            .send()
            .await?
            .text()
            .await?;
        println!("{skill}: {text}");
    }
    let tools: Value = http
        .post(format!("{}/mcp", running.url()))
        .json(&json!({"jsonrpc": "2.0", "id": 1, "method": "tools/list"}))
        .send()
        .await?
        .json()
        .await?;
    println!("tools/list: {}", tools["result"]["tools"]);
    running.shutdown().await?;
    Ok(())
}
