//! One route, two representations: `Accept: application/json` buffers the
//! stream into `{"chunks": [...]}`; unary skills return their output object.

use skillstack::builtin;
use skillstack::server::{ServerConfig, SkillServer};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");
    let config = ServerConfig::default().with_skills_dir(dir).with_port(0);
    let running = SkillServer::build(config, builtin::registry())?.spawn().await?;
    let http = reqwest::Client::new();

    for (skill, body) in [
        ("summarize", r#"{"text": "Skills are folders. Both transports derive from them. Nothing else."}"#),
        ("translate", r#"{"text": "good morning cat", "target": "es"}"#),
        ("classify", r#"{"text": "the dog chased the cat", "labels": ["cat", "dog", "bird"]}"#),
    ] {
        for accept in ["text/event-stream", "application/json"] {
            let resp = http
                .post(format!("{}/skills/{skill}", running.url()))
                .header("accept", accept)
                .body(body)
                .send()
                .await?;
            println!("== {skill} [{accept}] -> {}", resp.status());
            println!("{}", resp.text().await?.trim_end());
        }
    }

    // invalid input is 422 JSON even when SSE was asked for
    let resp = http
        .post(format!("{}/skills/echo", running.url()))
        .header("accept", "text/event-stream")
        .body(r#"{"text": 7}"#)
        .send()
        .await?;
    println!("== echo with a bad body -> {}\n{}", resp.status(), resp.text().await?);
    running.shutdown().await?;
    Ok(())
}
