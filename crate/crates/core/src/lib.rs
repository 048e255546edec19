//! Skill-first dual-transport server.
//!
//! Each skill is a folder: a `models.json` schema pair, optional metadata
//! (`skill.toml`, `SKILL.md`), defaults and examples, bound to a handler that
//! is either registered in-process or run as a subprocess. From that one
//! record the crate derives
//!
//! - a `POST /skills/{name}` endpoint that streams Server-Sent Events or, for
//!   `Accept: application/json`, returns one buffered JSON body,
//! - an OpenAPI 3.1 document (`/openapi.json`, `/docs`),
//! - an MCP tool served as JSON-RPC 2.0 on the same listener (`/mcp`).
//!
//! Both transports read the same [`schema::SchemaDoc`], so the HTTP request
//! schema and the MCP `inputSchema` cannot drift apart.
//!
//! ```no_run
//! use skillstack::{builtin, server::{ServerConfig, SkillServer}};
//!
//! # async fn run() -> Result<(), Box<dyn std::error::Error>> {
//! let config = ServerConfig::default().with_skills_dir("skills");
//! let server = SkillServer::build(config, builtin::registry())?;
//! server.serve().await?;
//! # Ok(()) }
//! ```
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod builtin;
pub mod cli;
pub mod discovery;
pub mod mcp;
pub mod runtime;
pub mod schema;
pub mod server;
pub mod skill;

pub use discovery::{discover, discover_all, validate_folder, Discovery, FolderReport};
pub use runtime::{HandlerRegistry, Runtime};
pub use skill::{HandlerBinding, Skill, SkillMetadata};
