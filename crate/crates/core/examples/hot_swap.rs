//! Swap a skill's handler at runtime through the loopback-only edit
//! endpoint, then clear the override.

use skillstack::builtin;
use skillstack::server::{ServerConfig, SkillServer};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");

    // refused before anything is bound
    let public = ServerConfig::default().with_skills_dir(dir).with_host("0.0.0.0").with_edit_endpoints(true);
    if let Err(e) = SkillServer::build(public, builtin::registry()) {
        println!("0.0.0.0 with edit endpoints: {e}");
    }

    let config = ServerConfig::default().with_skills_dir(dir).with_port(0).with_edit_endpoints(true);
    let running = SkillServer::build(config, builtin::registry())?.spawn().await?;
    let http = reqwest::Client::new();
    let base = running.url();
    let echo = || async {
        http.post(format!("{base}/skills/echo"))
            .header("accept", "application/json")
            .body(r#"{"text": "hot swap"}"#)
            .send()
            .await?
            .text()
            .await
    };

    println!("before        {}", echo().await?);
    for edit in [r#"{"registry_key": "echo_v2"}"#, r#"{"registry_key": "summarize"}"#, r#"{"command": ["cat"]}"#] {
        let r = http.post(format!("{base}/skills/echo/edit")).body(edit).send().await?;
        println!("edit {edit:<32} -> {} {}", r.status(), r.text().await?);
        println!("  now         {}", echo().await?);
    }
    http.delete(format!("{base}/skills/echo/edit")).send().await?;
    println!("after clear   {}", echo().await?);
    running.shutdown().await?;
    Ok(())
}
