//! Talk to the MCP endpoint as an agent runtime would.

use serde_json::{json, Value};
use skillstack::builtin;
use skillstack::server::{ServerConfig, SkillServer};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");
    let config = ServerConfig::default().with_skills_dir(dir).with_port(0);
    let running = SkillServer::build(config, builtin::registry())?.spawn().await?;
    let url = format!("{}/mcp", running.url());
    let http = reqwest::Client::new();
    let mut next_id = 0;
    let mut call = |method: &str, params: Value| {
        next_id += 1;
        let req = http
            .post(&url)
            .json(&json!({"jsonrpc": "2.0", "id": next_id, "method": method, "params": params}));
        async move { req.send().await?.json::<Value>().await }
    };

    let init = call("initialize", json!({"protocolVersion": "2025-03-26"})).await?;
    println!("initialize -> {}", init["result"]);

    // notifications get 202 and no body
    let ack = http
        .post(&url)
        .json(&json!({"jsonrpc": "2.0", "method": "notifications/initialized"}))
        .send()
        .await?;
    println!("notifications/initialized -> {}", ack.status());

    let tools = call("tools/list", json!({})).await?;
    for t in tools["result"]["tools"].as_array().unwrap() {
        println!("tool {:<11} {}", t["name"].as_str().unwrap(), t["description"]);
    }

    for (name, args) in [
        ("echo", json!({"text": "hi"})),
        ("vectornorm", json!({"values": [3, 4]})),
        ("echo", json!({"text": 7})),
        ("greet", json!({"name": "hidden"})),
    ] {
        let r = call("tools/call", json!({"name": name, "arguments": args})).await?;
        println!("tools/call {name} {args} ->\n  {}", r.get("result").or(r.get("error")).unwrap());
    }
    running.shutdown().await?;
    Ok(())
}
