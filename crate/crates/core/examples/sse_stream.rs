//! Read an SSE response incrementally and print each event as it lands.

use futures::StreamExt;
use skillstack::builtin;
use skillstack::server::sse::parse_sse;
use skillstack::server::{ServerConfig, SkillServer};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");
    let config = ServerConfig::default().with_skills_dir(dir).with_port(0);
    let running = SkillServer::build(config, builtin::registry())?.spawn().await?;

    let resp = reqwest::Client::new()
        .post(format!("{}/skills/vectornorm", running.url()))
        .header("accept", "text/event-stream")
        .body(r#"{"values": [1, 2, 2]}"#)
        .send()
        .await?;
    println!("content-type: {:?}", resp.headers()["content-type"]);

    let mut buf = String::new();
    let mut body = resp.bytes_stream();
    while let Some(bytes) = body.next().await {
        buf.push_str(std::str::from_utf8(&bytes?)?);
        // complete frames end in a blank line
        while let Some(end) = buf.find("\n\n") {
            let frame: String = buf.drain(..end + 2).collect();
            for ev in parse_sse(&frame)? {
                println!("{:<6} {}", ev.event, ev.data);
            }
        }
    }
    running.shutdown().await?;
    Ok(())
}
