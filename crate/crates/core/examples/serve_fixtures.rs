//! Serve the bundled demo skills on 127.0.0.1:8000 until Ctrl-C.
//!
//!     cargo run --example serve_fixtures
//!     curl -N localhost:8000/skills/vectornorm -d '{"values":[3,4]}'

use skillstack::builtin;
use skillstack::server::{ServerConfig, SkillServer};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_env_filter("info").init();
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");
    let server = SkillServer::build(ServerConfig::default().with_skills_dir(dir), builtin::registry())?;
    for s in server.skills() {
        println!("POST /skills/{:<12} {}", s.name, s.meta.description);
    }
    println!("MCP at POST {}", server.config().mcp_path);
    server.serve().await?;
    Ok(())
}
