//! Application startup/shutdown hooks run inside the MCP subsystem's
//! lifetime: MCP comes up first and goes down last.

use std::sync::Arc;

use async_trait::async_trait;
use skillstack::builtin;
use skillstack::mcp::McpTransport;
use skillstack::server::lifecycle::{BoxError, Lifecycle};
use skillstack::server::{ServerConfig, SkillServer};

struct Warmup {
    mcp: Arc<McpTransport>,
    fail: bool,
}

#[async_trait]
impl Lifecycle for Warmup {
    async fn startup(&self) -> Result<(), BoxError> {
        println!("  user startup (MCP running: {})", self.mcp.is_running());
        if self.fail {
            return Err("cache warmup failed".into());
        }
        Ok(())
    }

    async fn shutdown(&self) -> Result<(), BoxError> {
        println!("  user shutdown (MCP running: {})", self.mcp.is_running());
        Ok(())
    }
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");
    for fail in [false, true] {
        println!("run with failing hook = {fail}");
        let config = ServerConfig::default().with_skills_dir(dir).with_port(0);
        let server = SkillServer::build(config, builtin::registry())?;
        let mcp = server.mcp().clone();
        match server.with_hooks(Warmup { mcp: mcp.clone(), fail }).spawn().await {
            Ok(running) => {
                println!("  serving at {}", running.url());
                running.shutdown().await?;
            }
            Err(e) => println!("  startup error: {e}"),
        }
        println!("  MCP running afterwards: {}", mcp.is_running());
    }
    Ok(())
}
