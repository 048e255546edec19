//! Skill discovery: scan, validate, load, merge metadata, emit.
//!
//! A skill folder looks like:
//!
//! ```text
//! skills/summarize/
//!     models.json        required: {"input": <schema>, "output": <schema>}
//!     skill.toml         optional: metadata, flags, subprocess command
//!     SKILL.md           optional: front-matter metadata
//!     defaults/input.json
//!     examples/*.json    optional: {"input": ..., "output": ...}
//! ```
//!
//! Besides `models.json` a folder needs a handler binding: either a registry
//! entry keyed by the folder name or `[handler] command` in `skill.toml`.

mod front_matter;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use crate::runtime::HandlerRegistry;
use crate::schema::{SchemaDoc, SchemaRole};
use crate::skill::{
    is_valid_skill_name, merge_metadata, Example, HandlerBinding, MetadataSource, Origin, Skill,
};

pub use front_matter::{parse_front_matter, FrontMatterMeta, UnclosedFence};
pub use manifest::{parse_skill_toml, ManifestError, SkillToml};

pub const MODELS_FILE: &str = "models.json";
pub const MANIFEST_FILE: &str = "skill.toml";
pub const SKILL_MD_FILE: &str = "SKILL.md";
pub const HANDLER_BINDING: &str = "handler binding";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FolderReport {
    pub path: PathBuf,
    pub valid: bool,
    pub missing: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DiscoveryError {
    #[error("skills directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("skill `{name}` defined twice: {} and {}", first.display(), second.display())]
    DuplicateSkill {
        name: String,
        first: PathBuf,
        second: PathBuf,
    },
}

/// Discovery output: valid skills sorted by name, plus a report for every
/// folder that was skipped.
#[derive(Debug, Default)]
pub struct Discovery {
    pub skills: Vec<Arc<Skill>>,
    pub skipped: Vec<FolderReport>,
}

impl Discovery {
    /// Every schema document keyed by its namespaced key (`<skill>/Input`).
    pub fn schemas(&self) -> BTreeMap<String, &SchemaDoc> {
        self.skills
            .iter()
            .flat_map(|s| [&s.input_schema, &s.output_schema])
            .map(|doc| (doc.key(), doc))
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Skill>> {
        self.skills.iter().find(|s| s.name == name)
    }
}

/// Immediate subfolders, sorted by name; hidden entries are skipped.
pub fn skill_folders(skills_dir: &Path) -> Result<Vec<PathBuf>, DiscoveryError> {
    if !skills_dir.exists() {
        return Err(DiscoveryError::MissingDir(skills_dir.to_path_buf()));
    }
    if !skills_dir.is_dir() {
        return Err(DiscoveryError::NotADirectory(skills_dir.to_path_buf()));
    }
    let io = |source| DiscoveryError::Io {
        path: skills_dir.to_path_buf(),
        source,
    };
    let mut folders = Vec::new();
    for entry in fs::read_dir(skills_dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.path().is_dir() {
            folders.push(entry.path());
        }
    }
    folders.sort();
    Ok(folders)
}

pub fn discover(skills_dir: &Path, registry: &HandlerRegistry) -> Result<Discovery, DiscoveryError> {
    discover_all(&[skills_dir.to_path_buf()], registry)
}

/// Discovers several directories into one skill set; a name appearing in two
/// of them is an error.
pub fn discover_all(
    dirs: &[PathBuf],
    registry: &HandlerRegistry,
) -> Result<Discovery, DiscoveryError> {
    let mut by_name: BTreeMap<String, (PathBuf, Skill)> = BTreeMap::new();
    let mut skipped = Vec::new();
    for dir in dirs {
        for folder in skill_folders(dir)? {
            let (report, skill) = load_folder(&folder, registry);
            for w in &report.warnings {
                tracing::warn!(folder = %folder.display(), "{w}");
            }
            let Some(skill) = skill else {
                tracing::warn!(folder = %folder.display(), missing = ?report.missing, "skipping skill folder");
                skipped.push(report);
                continue;
            };
            if let Some((first, _)) = by_name.get(&skill.name) {
                return Err(DiscoveryError::DuplicateSkill {
                    name: skill.name.clone(),
                    first: first.clone(),
                    second: folder,
                });
            }
            by_name.insert(skill.name.clone(), (folder, skill));
        }
    }
    Ok(Discovery {
        skills: by_name.into_values().map(|(_, s)| Arc::new(s)).collect(),
        skipped,
    })
}

/// Checks one folder without building the skill. Never fails; problems are
/// reported.
pub fn validate_folder(path: &Path, registry: &HandlerRegistry) -> FolderReport {
    load_folder(path, registry).0
}

struct Loader {
    report: FolderReport,
}

impl Loader {
    fn missing(&mut self, what: &str) {
        if !self.report.missing.iter().any(|m| m == what) {
            self.report.missing.push(what.to_string());
        }
    }

    fn warn(&mut self, w: impl Into<String>) {
        self.report.warnings.push(w.into());
    }

    fn read_optional(&mut self, path: &Path) -> Option<String> {
        if !path.is_file() {
            return None;
        }
        match fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                self.warn(format!("cannot read {}: {e}", path.display()));
                None
            }
        }
    }

    fn read_json(&mut self, path: &Path) -> Option<Value> {
        let text = self.read_optional(path)?;
        match serde_json::from_str(&text) {
            Ok(v) => Some(v),
            Err(e) => {
                self.warn(format!("{}: invalid JSON: {e}", path.display()));
                None
            }
        }
    }
}

fn load_models(loader: &mut Loader, folder: &Path, name: &str) -> Option<(SchemaDoc, SchemaDoc)> {
    let path = folder.join(MODELS_FILE);
    if !path.is_file() {
        loader.missing(MODELS_FILE);
        return None;
    }
    let Some(models) = loader.read_json(&path) else {
        loader.missing(MODELS_FILE);
        return None;
    };
    let Some(obj) = models.as_object() else {
        loader.warn("models.json must be an object with `input` and `output` schemas");
        loader.missing(MODELS_FILE);
        return None;
    };
    for key in obj.keys().filter(|k| *k != "input" && *k != "output") {
        loader.warn(format!("models.json: unknown key `{key}` ignored"));
    }
    let mut docs = Vec::with_capacity(2);
    for (key, role) in [("input", SchemaRole::Input), ("output", SchemaRole::Output)] {
        let Some(raw) = obj.get(key) else {
            loader.warn(format!("models.json: `{key}` schema is missing"));
            loader.missing(MODELS_FILE);
            return None;
        };
        match SchemaDoc::new(raw.clone(), name, role) {
            Ok(doc) => docs.push(doc),
            Err(e) => {
                loader.warn(format!("models.json: {e}"));
                loader.missing(MODELS_FILE);
                return None;
            }
        }
    }
    let output = docs.pop()?;
    let input = docs.pop()?;
    Some((input, output))
}

fn load_examples(loader: &mut Loader, folder: &Path, input_schema: &SchemaDoc) -> Vec<Example> {
    let dir = folder.join("examples");
    let Ok(entries) = fs::read_dir(&dir) else {
        return Vec::new();
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut examples = Vec::new();
    for file in files {
        let Some(v) = loader.read_json(&file) else {
            continue;
        };
        let (Some(input), Some(output)) = (v.get("input"), v.get("output")) else {
            loader.warn(format!("{}: expected {{\"input\", \"output\"}}", file.display()));
            continue;
        };
        if let Err(e) = input_schema.check(input) {
            loader.warn(format!(
                "{}: example input fails the input schema, dropped: {}",
                file.display(),
                e.render().replace('\n', "; ")
            ));
            continue;
        }
        examples.push(Example {
            input: input.clone(),
            output: output.clone(),
            source_file: file,
        });
    }
    examples
}

fn load_folder(folder: &Path, registry: &HandlerRegistry) -> (FolderReport, Option<Skill>) {
    let mut loader = Loader {
        report: FolderReport {
            path: folder.to_path_buf(),
            valid: false,
            missing: Vec::new(),
            warnings: Vec::new(),
        },
    };
    let name = folder
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    if !is_valid_skill_name(&name) {
        loader.warn(format!(
            "folder name `{name}` is not a valid skill name (lowercase letters, digits, `_`, `-`)"
        ));
        loader.missing("valid folder name");
    }

    let manifest = loader
        .read_optional(&folder.join(MANIFEST_FILE))
        .and_then(|text| match parse_skill_toml(&text) {
            Ok(m) => Some(m),
            Err(e) => {
                loader.warn(format!("{MANIFEST_FILE}: {e}"));
                loader.missing(MANIFEST_FILE);
                None
            }
        });
    if let Some(m) = &manifest {
        for w in &m.warnings {
            loader.warn(format!("{MANIFEST_FILE}: {w}"));
        }
    }

    let front_matter = loader
        .read_optional(&folder.join(SKILL_MD_FILE))
        .and_then(|text| match parse_front_matter(&text) {
            Ok(fm) => fm,
            Err(e) => {
                loader.warn(format!("{SKILL_MD_FILE}: {e}"));
                None
            }
        });
    if let Some(fm_name) = front_matter.as_ref().and_then(|f| f.name.as_deref()) {
        if fm_name != name {
            loader.warn(format!(
                "{SKILL_MD_FILE} names the skill `{fm_name}`; using folder name `{name}`"
            ));
        }
    }

    let models = load_models(&mut loader, folder, &name);

    let registry_entry = registry.get(&name);
    let binding = match (manifest.as_ref().and_then(|m| m.command.clone()), registry_entry) {
        (Some(command), _) => Some(HandlerBinding::Subprocess {
            command,
            streaming: manifest.as_ref().and_then(|m| m.streaming).unwrap_or(false),
            cwd: Some(folder.to_path_buf()),
        }),
        (None, Some(entry)) => {
            let declared = manifest.as_ref().and_then(|m| m.streaming);
            if declared.is_some_and(|s| s != (entry.kind() == crate::skill::HandlerKind::Streaming)) {
                loader.warn(format!(
                    "{MANIFEST_FILE}: `streaming` applies to subprocess handlers; registered handler `{name}` is {:?}",
                    entry.kind()
                ));
            }
            Some(HandlerBinding::Registered {
                key: name.clone(),
                handler: entry.kind(),
            })
        }
        (None, None) => {
            loader.missing(HANDLER_BINDING);
            None
        }
    };

    let mut sources = vec![MetadataSource::with_description(Origin::FolderName, name.clone())];
    if let Some(m) = &manifest {
        sources.push(m.source.clone());
    }
    if let Some(fm) = &front_matter {
        sources.push(MetadataSource {
            description: fm.description.clone(),
            tags: fm.tags.clone(),
            ..MetadataSource::empty(Origin::FrontMatter)
        });
    }
    if let (Some(HandlerBinding::Registered { .. }), Some(entry)) = (&binding, registry_entry) {
        if let Some(d) = entry.description() {
            sources.push(MetadataSource::with_description(Origin::Docstring, d));
        }
    }
    let meta = match merge_metadata(&sources) {
        Ok(m) => Some(m),
        Err(e) => {
            loader.warn(format!("metadata: {e}"));
            loader.missing(MANIFEST_FILE);
            None
        }
    };

    let mut report = loader.report;
    report.valid = report.missing.is_empty();
    let (Some((input, output)), Some(binding), Some(meta), true) = (models, binding, meta, report.valid)
    else {
        return (report, None);
    };

    let mut loader = Loader { report };
    let defaults = loader
        .read_json(&folder.join("defaults").join("input.json"))
        .and_then(|d| match input.check(&d) {
            Ok(()) => Some(d),
            Err(e) => {
                loader.warn(format!(
                    "defaults/input.json fails the input schema, dropped: {}",
                    e.render().replace('\n', "; ")
                ));
                None
            }
        });
    let examples = load_examples(&mut loader, folder, &input);

    let mut skill = Skill::new(name, meta, input, output, binding);
    skill.defaults = defaults;
    skill.examples = examples;
    skill.dir = Some(folder.to_path_buf());
    (loader.report, Some(skill))
}
