//! Command-line entry point: `init`, `validate`, `list`, `test`, `serve`.
//!
//! Exit codes: 0 success, 1 validation or example failures, 2 usage or
//! environment errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::BoolishValueParser;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::discovery::{discover, skill_folders, validate_folder, MODELS_FILE};
use crate::runtime::{HandlerRegistry, Runtime};
use crate::server::{ServerConfig, SkillServer, CONFIG_FILE};
use crate::skill::is_valid_skill_name;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURES: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

pub const MODELS_STUB: &str = "{\n  \"input\": {\"type\": \"object\"},\n  \"output\": {\"type\": \"object\"}\n}\n";

#[derive(Debug, Parser)]
#[command(name = "skillstack", version, about = "Serve skill folders over HTTP/SSE, OpenAPI and MCP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project, or import external skill folders.
    ///
    /// Bare `init PATH` writes a project skeleton with a sample `echo` skill.
    /// With `--skill` or `--skills-dir`, PATH is the skills directory that
    /// receives normalized copies.
    Init {
        path: PathBuf,
        /// Import one skill folder.
        #[arg(long, conflicts_with = "skills_dir")]
        skill: Option<PathBuf>,
        /// Import every subfolder of a directory.
        #[arg(long = "skills-dir")]
        skills_dir: Option<PathBuf>,
        /// Write into a non-empty target, replacing what is there.
        #[arg(long)]
        force: bool,
    },
    /// Check every skill folder and report what is missing.
    Validate {
        #[arg(env = "SKILLS_DIR", default_value = "skills")]
        skills_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List discovered skills.
    List {
        #[arg(env = "SKILLS_DIR", default_value = "skills")]
        skills_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Replay each skill's recorded examples.
    Test {
        #[arg(env = "SKILLS_DIR", default_value = "skills")]
        skills_dir: PathBuf,
        /// Only test this skill.
        #[arg(long)]
        skill: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the server.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ServeArgs {
    /// Config file; defaults to ./skillstack.toml when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "HOST")]
    pub host: Option<String>,
    #[arg(long, env = "PORT")]
    pub port: Option<u16>,
    /// May be repeated.
    #[arg(long = "skills-dir", env = "SKILLS_DIR")]
    pub skills_dirs: Vec<PathBuf>,
    #[arg(long, env = "MCP_PATH")]
    pub mcp_path: Option<String>,
    #[arg(
        long,
        env = "ENABLE_EDIT_ENDPOINTS",
        num_args = 0..=1,
        default_missing_value = "true",
        value_parser = BoolishValueParser::new()
    )]
    pub enable_edit_endpoints: Option<bool>,
}

impl ServeArgs {
    /// Config file first, then flags and environment on top.
    pub fn resolve(&self) -> Result<ServerConfig, String> {
        let mut config = match &self.config {
            Some(path) => ServerConfig::from_file(path).map_err(|e| e.to_string())?,
            None if Path::new(CONFIG_FILE).is_file() => {
                ServerConfig::from_file(Path::new(CONFIG_FILE)).map_err(|e| e.to_string())?
            }
            None => ServerConfig::default(),
        };
        if let Some(h) = &self.host {
            config.host = h.clone();
        }
        if let Some(p) = self.port {
            config.port = p;
        }
        if !self.skills_dirs.is_empty() {
            config.skills_dirs = self.skills_dirs.clone();
        }
        if let Some(m) = &self.mcp_path {
            config.mcp_path = m.clone();
        }
        if let Some(e) = self.enable_edit_endpoints {
            config.enable_edit_endpoints = e;
        }
        Ok(config)
    }
}

/// Parses process arguments and runs. For use from a `main` function.
pub fn main(registry: HandlerRegistry) -> ExitCode {
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start async runtime: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let code = rt.block_on(run(cli, registry, &mut std::io::stdout(), &mut std::io::stderr()));
    ExitCode::from(code)
}

/// Runs one command, writing human or JSON output to `out` and diagnostics
/// to `err`. Returns the exit code.
pub async fn run(cli: Cli, registry: HandlerRegistry, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> u8 {
    let result = match cli.command {
        Command::Init {
            path,
            skill,
            skills_dir,
            force,
        } => match (skill, skills_dir) {
            (Some(src), _) => import_skills(&[src], &path, force, out),
            (None, Some(dir)) => match skill_folders(&dir) {
                Ok(folders) => import_skills(&folders, &path, force, out),
                Err(e) => Err(e.to_string()),
            },
            (None, None) => init_project(&path, force, out),
        },
        Command::Validate { skills_dir, json } => cmd_validate(&skills_dir, &registry, json, out),
        Command::List { skills_dir, json } => cmd_list(&skills_dir, &registry, json, out),
        Command::Test {
            skills_dir,
            skill,
            json,
        } => cmd_test(&skills_dir, registry, skill.as_deref(), json, out).await,
        Command::Serve(args) => cmd_serve(&args, registry).await,
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
    }
}

type CmdResult = Result<u8, String>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn is_empty_dir(path: &Path) -> Result<bool, String> {
    if !path.exists() {
        return Ok(true);
    }
    if !path.is_dir() {
        return Ok(false);
    }
    Ok(fs::read_dir(path).map_err(io_err(path))?.next().is_none())
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

const ECHO_MODELS: &str = r#"{
  "input": {
    "title": "EchoInput",
    "type": "object",
    "properties": {
      "text": {"type": "string", "description": "Text to echo back"}
    },
    "required": ["text"]
  },
  "output": {
    "title": "EchoOutput",
    "type": "object",
    "properties": {
      "text": {"type": "string"}
    },
    "required": ["text"]
  }
}
"#;

const ECHO_TOML: &str = r#"[skill]
description = "Return the input text unchanged"
tags = ["demo"]
is_mcp = true
timeout_secs = 10
"#;

const ECHO_MD: &str = "---\nname: echo\ndescription: Return the input text unchanged\ntags: [demo]\n---\n\n# echo\n\nSends back whatever `text` it receives.\n";

fn project_files() -> Vec<(&'static str, String)> {
    let config = String::from(
        "host = \"127.0.0.1\"\nport = 8000\nskills_dirs = [\"skills\"]\nmcp_path = \"/mcp\"\nenable_edit_endpoints = false\n"
    );
    vec![
        (CONFIG_FILE, config),
        ("skills/echo/models.json", ECHO_MODELS.into()),
        ("skills/echo/skill.toml", ECHO_TOML.into()),
        ("skills/echo/SKILL.md", ECHO_MD.into()),
        ("skills/echo/defaults/input.json", "{\"text\": \"hello\"}\n".into()),
        (
            "skills/echo/examples/01.json",
            "{\"input\": {\"text\": \"hello\"}, \"output\": {\"text\": \"hello\"}}\n".into(),
        ),
    ]
}

fn init_project(path: &Path, force: bool, out: &mut (dyn Write + Send)) -> CmdResult {
    if !force && !is_empty_dir(path)? {
        return Err(format!(
            "{} is not empty; pass --force to write into it",
            path.display()
        ));
    }
    for (rel, contents) in project_files() {
        write_file(&path.join(rel), &contents)?;
    }
    let _ = writeln!(out, "created project at {}", path.display());
    let _ = writeln!(out, "  {CONFIG_FILE}");
    let _ = writeln!(out, "  skills/echo/");
    Ok(EXIT_OK)
}

/// Lowercases and replaces characters outside `[a-z0-9_-]` with `-`.
pub fn normalize_skill_name(raw: &str) -> String {
    raw.to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-' { c } else { '-' })
        .collect()
}

fn copy_tree(src: &Path, dst: &Path) -> Result<(), String> {
    fs::create_dir_all(dst).map_err(io_err(dst))?;
    for entry in fs::read_dir(src).map_err(io_err(src))? {
        let entry = entry.map_err(io_err(src))?;
        let from = entry.path();
        let to = dst.join(entry.file_name());
        if from.is_dir() {
            copy_tree(&from, &to)?;
        } else {
            fs::copy(&from, &to).map_err(io_err(&from))?;
        }
    }
    Ok(())
}

/// Copies each source folder into `target/<normalized name>`, adding a
/// permissive `models.json` where none exists.
fn import_skills(sources: &[PathBuf], target: &Path, force: bool, out: &mut (dyn Write + Send)) -> CmdResult {
    let mut plan = Vec::with_capacity(sources.len());
    for src in sources {
        if !src.is_dir() {
            return Err(format!("cannot read skill folder {}", src.display()));
        }
        fs::read_dir(src).map_err(io_err(src))?;
        let raw = src
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let name = normalize_skill_name(&raw);
        if !is_valid_skill_name(&name) {
            return Err(format!("cannot derive a skill name from {}", src.display()));
        }
        let dst = target.join(&name);
        if !force && !is_empty_dir(&dst)? {
            return Err(format!(
                "{} already exists; pass --force to replace it",
                dst.display()
            ));
        }
        plan.push((src, raw, name, dst));
    }
    for (src, raw, name, dst) in &plan {
        if force && dst.exists() {
            fs::remove_dir_all(dst).map_err(io_err(dst))?;
        }
        copy_tree(src, dst)?;
        let _ = writeln!(out, "imported {} -> {}", src.display(), dst.display());
        if raw != name {
            let _ = writeln!(out, "  note: folder renamed `{raw}` -> `{name}`");
        }
        let models = dst.join(MODELS_FILE);
        if !models.exists() {
            write_file(&models, MODELS_STUB)?;
            let _ = writeln!(
                out,
                "  WARNING: {name} had no {MODELS_FILE}; wrote a permissive stub. Replace it with real schemas."
            );
        }
    }
    let _ = writeln!(out, "{} skill(s) imported into {}", plan.len(), target.display());
    Ok(EXIT_OK)
}

fn cmd_validate(dir: &Path, registry: &HandlerRegistry, as_json: bool, out: &mut (dyn Write + Send)) -> CmdResult {
    let folders = skill_folders(dir).map_err(|e| e.to_string())?;
    let reports: Vec<_> = folders.iter().map(|f| validate_folder(f, registry)).collect();
    if as_json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    } else {
        for r in &reports {
            if r.valid {
                let _ = writeln!(out, "ok      {}", r.path.display());
            } else {
                let _ = writeln!(out, "invalid {}: missing {}", r.path.display(), r.missing.join(", "));
            }
            for w in &r.warnings {
                let _ = writeln!(out, "        warning: {w}");
            }
        }
        let bad = reports.iter().filter(|r| !r.valid).count();
        let _ = writeln!(out, "{} folder(s), {} invalid", reports.len(), bad);
    }
    Ok(if reports.iter().all(|r| r.valid) {
        EXIT_OK
    } else {
        EXIT_FAILURES
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_list(dir: &Path, registry: &HandlerRegistry, as_json: bool, out: &mut (dyn Write + Send)) -> CmdResult {
    let found = discover(dir, registry).map_err(|e| e.to_string())?;
    if as_json {
        let rows: Vec<_> = found
            .skills
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "streaming": s.is_streaming(),
                    "is_mcp": s.meta.is_mcp,
                    "description": s.meta.description,
                })
            })
            .collect();
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
        return Ok(EXIT_OK);
    }
    let _ = writeln!(out, "{} skills", found.skills.len());
    let width = found.skills.iter().map(|s| s.name.len()).max().unwrap_or(0);
    for s in &found.skills {
        let _ = writeln!(
            out,
            "{:width$}  streaming: {:3}  mcp: {:3}  {}",
            s.name,
            yes_no(s.is_streaming()),
            yes_no(s.meta.is_mcp),
            s.meta.description,
        );
    }
    Ok(EXIT_OK)
}

async fn cmd_test(
    dir: &Path,
    registry: HandlerRegistry,
    only: Option<&str>,
    as_json: bool,
    out: &mut (dyn Write + Send),
) -> CmdResult {
    let found = discover(dir, &registry).map_err(|e| e.to_string())?;
    let skills: Vec<_> = match only {
        Some(name) => vec![found
            .get(name)
            .cloned()
            .ok_or_else(|| format!("no skill named `{name}` in {}", dir.display()))?],
        None => found.skills.clone(),
    };
    let runtime = Runtime::new(registry);
    let mut reports = Vec::with_capacity(skills.len());
    for skill in &skills {
        reports.push(runtime.run_examples(skill).await);
    }
    let ok = reports.iter().all(|r| r.all_passed());
    if as_json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
        return Ok(if ok { EXIT_OK } else { EXIT_FAILURES });
    }
    let (mut passed, mut failed) = (0, 0);
    for report in &reports {
        if report.outcomes.is_empty() {
            let _ = writeln!(out, "skip {}: no examples", report.skill);
            continue;
        }
        for o in &report.outcomes {
            let file = o.file.file_name().map(|f| f.to_string_lossy()).unwrap_or_default();
            if o.passed {
                passed += 1;
                let _ = writeln!(out, "PASS {}/{}", report.skill, file);
            } else {
                failed += 1;
                let _ = writeln!(out, "FAIL {}/{}", report.skill, file);
                if let Some(diff) = &o.diff {
                    let _ = writeln!(out, "  {diff}");
                }
            }
        }
    }
    let _ = writeln!(out, "{passed} passed, {failed} failed");
    Ok(if ok { EXIT_OK } else { EXIT_FAILURES })
}

async fn cmd_serve(args: &ServeArgs, registry: HandlerRegistry) -> CmdResult {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let config = args.resolve()?;
    // Checked here as well as in the server so that nothing is discovered or
    // bound when the gate fails.
    config.enforce_loopback().map_err(|e| e.to_string())?;
    let server = SkillServer::build(config, registry).map_err(|e| e.to_string())?;
    server.serve().await.map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}
