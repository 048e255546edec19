//! The skill record and metadata merging.
//!
//! A [`Skill`] is built once by discovery and then shared read-only by every
//! transport. The only mutable part is the edit override slot, which is
//! swapped atomically as a whole.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::schema::SchemaDoc;

pub const DEFAULT_TIMEOUT_SECS: f64 = 30.0;

/// Merged skill metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillMetadata {
    pub description: String,
    pub tags: Vec<String>,
    pub is_mcp: bool,
    pub timeout_secs: f64,
}

impl Default for SkillMetadata {
    fn default() -> Self {
        Self {
            description: String::new(),
            tags: Vec::new(),
            is_mcp: true,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

/// Where a piece of metadata came from. Lower rank wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Toml,
    FrontMatter,
    Docstring,
    FolderName,
}

impl Origin {
    pub const ALL: [Origin; 4] = [
        Origin::Toml,
        Origin::FrontMatter,
        Origin::Docstring,
        Origin::FolderName,
    ];

    pub fn rank(self) -> u8 {
        match self {
            Origin::Toml => 1,
            Origin::FrontMatter => 2,
            Origin::Docstring => 3,
            Origin::FolderName => 4,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Toml => "skill.toml",
            Origin::FrontMatter => "SKILL.md front-matter",
            Origin::Docstring => "handler description",
            Origin::FolderName => "folder name",
        })
    }
}

/// One partial metadata record; unset fields defer to lower-precedence sources.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataSource {
    pub origin: Origin,
    pub description: Option<String>,
    pub tags: Option<Vec<String>>,
    pub is_mcp: Option<bool>,
    pub timeout_secs: Option<f64>,
}

impl MetadataSource {
    pub fn empty(origin: Origin) -> Self {
        Self {
            origin,
            description: None,
            tags: None,
            is_mcp: None,
            timeout_secs: None,
        }
    }

    pub fn with_description(origin: Origin, description: impl Into<String>) -> Self {
        Self {
            description: Some(description.into()),
            ..Self::empty(origin)
        }
    }

    /// Turns merged metadata back into a fully-set source.
    pub fn from_metadata(origin: Origin, meta: &SkillMetadata) -> Self {
        Self {
            origin,
            description: Some(meta.description.clone()),
            tags: Some(meta.tags.clone()),
            is_mcp: Some(meta.is_mcp),
            timeout_secs: Some(meta.timeout_secs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetadataError {
    #[error("metadata source `{0}` given more than once")]
    DuplicateOrigin(Origin),
    #[error("no metadata sources given")]
    NoSources,
    #[error("timeout_secs must be a positive number, got {0}")]
    BadTimeout(f64),
    #[error("tags must be non-empty strings")]
    EmptyTag,
}

/// Merges metadata sources; each field comes from the highest-precedence
/// source that sets it, or the field default.
pub fn merge_metadata(sources: &[MetadataSource]) -> Result<SkillMetadata, MetadataError> {
    if sources.is_empty() {
        return Err(MetadataError::NoSources);
    }
    let mut seen = HashSet::new();
    for s in sources {
        if !seen.insert(s.origin) {
            return Err(MetadataError::DuplicateOrigin(s.origin));
        }
    }
    let mut ordered: Vec<&MetadataSource> = sources.iter().collect();
    ordered.sort_by_key(|s| s.origin.rank());

    let defaults = SkillMetadata::default();
    let meta = SkillMetadata {
        description: ordered
            .iter()
            .find_map(|s| s.description.clone())
            .unwrap_or(defaults.description),
        tags: ordered
            .iter()
            .find_map(|s| s.tags.clone())
            .unwrap_or(defaults.tags),
        is_mcp: ordered
            .iter()
            .find_map(|s| s.is_mcp)
            .unwrap_or(defaults.is_mcp),
        timeout_secs: ordered
            .iter()
            .find_map(|s| s.timeout_secs)
            .unwrap_or(defaults.timeout_secs),
    };
    if !(meta.timeout_secs > 0.0 && meta.timeout_secs.is_finite()) {
        return Err(MetadataError::BadTimeout(meta.timeout_secs));
    }
    if meta.tags.iter().any(|t| t.is_empty()) {
        return Err(MetadataError::EmptyTag);
    }
    Ok(meta)
}

/// Unary handlers return one output object; streaming handlers emit chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HandlerKind {
    Unary,
    Streaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingKind {
    InProcessUnary,
    InProcessStreaming,
    Subprocess,
}

/// How a skill executes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HandlerBinding {
    /// A handler registered in-process under `key`.
    Registered { key: String, handler: HandlerKind },
    /// An external command speaking JSON on stdin and stdout, run from `cwd`
    /// when set.
    Subprocess {
        command: Vec<String>,
        streaming: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        cwd: Option<PathBuf>,
    },
}

impl HandlerBinding {
    pub fn kind(&self) -> BindingKind {
        match self {
            HandlerBinding::Registered {
                handler: HandlerKind::Unary,
                ..
            } => BindingKind::InProcessUnary,
            HandlerBinding::Registered {
                handler: HandlerKind::Streaming,
                ..
            } => BindingKind::InProcessStreaming,
            HandlerBinding::Subprocess { .. } => BindingKind::Subprocess,
        }
    }

    pub fn is_streaming(&self) -> bool {
        match self {
            HandlerBinding::Registered { handler, .. } => *handler == HandlerKind::Streaming,
            HandlerBinding::Subprocess { streaming, .. } => *streaming,
        }
    }

    pub fn handler_kind(&self) -> HandlerKind {
        if self.is_streaming() {
            HandlerKind::Streaming
        } else {
            HandlerKind::Unary
        }
    }

    pub fn registry_key(&self) -> Option<&str> {
        match self {
            HandlerBinding::Registered { key, .. } => Some(key),
            HandlerBinding::Subprocess { .. } => None,
        }
    }

    pub fn command(&self) -> Option<&[String]> {
        match self {
            HandlerBinding::Subprocess { command, .. } => Some(command),
            HandlerBinding::Registered { .. } => None,
        }
    }
}

/// A recorded `{input, output}` pair from a skill's `examples/` folder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example {
    pub input: Value,
    pub output: Value,
    pub source_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("override is {found:?} but skill `{skill}` is {expected:?}")]
pub struct KindMismatch {
    pub skill: String,
    pub expected: HandlerKind,
    pub found: HandlerKind,
}

/// Slot holding the optional edit binding. Readers get a consistent snapshot.
#[derive(Default)]
pub struct OverrideSlot(RwLock<Option<Arc<HandlerBinding>>>);

impl OverrideSlot {
    pub fn get(&self) -> Option<Arc<HandlerBinding>> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn set(&self, binding: Option<Arc<HandlerBinding>>) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = binding;
    }
}

impl fmt::Debug for OverrideSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("OverrideSlot").field(&self.get()).finish()
    }
}

impl Serialize for OverrideSlot {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.get().as_deref().serialize(s)
    }
}

/// A discovered skill: the single record both transports are derived from.
#[derive(Debug, Serialize)]
pub struct Skill {
    pub name: String,
    pub meta: SkillMetadata,
    pub input_schema: SchemaDoc,
    pub output_schema: SchemaDoc,
    binding: Arc<HandlerBinding>,
    edit_binding: OverrideSlot,
    pub defaults: Option<Value>,
    pub examples: Vec<Example>,
    /// Folder the skill was loaded from.
    pub dir: Option<PathBuf>,
}

impl Skill {
    pub fn new(
        name: impl Into<String>,
        meta: SkillMetadata,
        input_schema: SchemaDoc,
        output_schema: SchemaDoc,
        binding: HandlerBinding,
    ) -> Self {
        Self {
            name: name.into(),
            meta,
            input_schema,
            output_schema,
            binding: Arc::new(binding),
            edit_binding: OverrideSlot::default(),
            defaults: None,
            examples: Vec::new(),
            dir: None,
        }
    }

    pub fn binding(&self) -> &HandlerBinding {
        &self.binding
    }

    pub fn edit_binding(&self) -> Option<Arc<HandlerBinding>> {
        self.edit_binding.get()
    }

    /// The binding requests should run: the edit override when set, else the
    /// original binding.
    pub fn effective_binding(&self) -> Arc<HandlerBinding> {
        self.edit_binding
            .get()
            .unwrap_or_else(|| Arc::clone(&self.binding))
    }

    pub fn is_streaming(&self) -> bool {
        self.binding.is_streaming()
    }

    /// Installs an edit override; its streaming kind must match the skill's.
    pub fn set_edit_binding(&self, binding: HandlerBinding) -> Result<(), KindMismatch> {
        if binding.is_streaming() != self.is_streaming() {
            return Err(KindMismatch {
                skill: self.name.clone(),
                expected: self.binding.handler_kind(),
                found: binding.handler_kind(),
            });
        }
        self.edit_binding.set(Some(Arc::new(binding)));
        Ok(())
    }

    pub fn clear_edit_binding(&self) {
        self.edit_binding.set(None);
    }
}

/// Skill names are folder names: lowercase ASCII letters, digits, `_` and `-`.
pub fn is_valid_skill_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaRole;
    use serde_json::json;

    fn schema(name: &str, role: SchemaRole) -> SchemaDoc {
        SchemaDoc::new(json!({"type": "object"}), name, role).unwrap()
    }

    fn unary_skill() -> Skill {
        Skill::new(
            "echo",
            SkillMetadata::default(),
            schema("echo", SchemaRole::Input),
            schema("echo", SchemaRole::Output),
            HandlerBinding::Registered {
                key: "echo".into(),
                handler: HandlerKind::Unary,
            },
        )
    }

    #[test]
    fn toml_beats_front_matter() {
        let toml = MetadataSource {
            origin: Origin::Toml,
            description: Some("Summarise text to a target length".into()),
            tags: Some(vec!["text".into(), "nlp".into()]),
            is_mcp: Some(true),
            timeout_secs: Some(30.0),
        };
        let fm = MetadataSource::with_description(Origin::FrontMatter, "other");
        let meta = merge_metadata(&[fm, toml]).unwrap();
        assert_eq!(meta.description, "Summarise text to a target length");
        assert_eq!(meta.timeout_secs, 30.0);
        assert_eq!(meta.tags, ["text", "nlp"]);
    }

    #[test]
    fn all_empty_sources_give_defaults() {
        let sources: Vec<_> = Origin::ALL.iter().map(|o| MetadataSource::empty(*o)).collect();
        let meta = merge_metadata(&sources).unwrap();
        assert_eq!(meta, SkillMetadata::default());
        assert_eq!(meta.description, "");
        assert!(meta.is_mcp);
        assert_eq!(meta.timeout_secs, 30.0);
    }

    #[test]
    fn front_matter_beats_docstring() {
        let meta = merge_metadata(&[
            MetadataSource::with_description(Origin::Docstring, "B"),
            MetadataSource::with_description(Origin::FrontMatter, "A"),
        ])
        .unwrap();
        assert_eq!(meta.description, "A");
    }

    #[test]
    fn duplicate_origin_is_rejected() {
        let err = merge_metadata(&[
            MetadataSource::empty(Origin::Toml),
            MetadataSource::empty(Origin::Toml),
        ])
        .unwrap_err();
        assert_eq!(err, MetadataError::DuplicateOrigin(Origin::Toml));
        assert_eq!(merge_metadata(&[]).unwrap_err(), MetadataError::NoSources);
    }

    #[test]
    fn non_positive_timeout_is_rejected() {
        let src = MetadataSource {
            timeout_secs: Some(0.0),
            ..MetadataSource::empty(Origin::Toml)
        };
        assert!(matches!(
            merge_metadata(&[src]),
            Err(MetadataError::BadTimeout(_))
        ));
    }

    /// Exhaustive over all 2^4 origin subsets, with every source setting every
    /// field to a value unique to its origin.
    #[test]
    fn precedence_is_total_over_all_subsets() {
        for mask in 1u8..16 {
            let sources: Vec<MetadataSource> = Origin::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(i, o)| MetadataSource {
                    origin: *o,
                    description: Some(format!("d{i}")),
                    tags: Some(vec![format!("t{i}")]),
                    is_mcp: Some(i % 2 == 1),
                    timeout_secs: Some(i as f64 + 1.0),
                })
                .collect();
            let winner = mask.trailing_zeros() as usize;
            let meta = merge_metadata(&sources).unwrap();
            assert_eq!(meta.description, format!("d{winner}"), "mask {mask:04b}");
            assert_eq!(meta.tags, vec![format!("t{winner}")]);
            assert_eq!(meta.is_mcp, winner % 2 == 1);
            assert_eq!(meta.timeout_secs, winner as f64 + 1.0);
        }
    }

    #[test]
    fn merge_is_idempotent() {
        let sources = vec![
            MetadataSource {
                tags: Some(vec!["a".into()]),
                ..MetadataSource::empty(Origin::FrontMatter)
            },
            MetadataSource::with_description(Origin::FolderName, "echo"),
        ];
        let meta = merge_metadata(&sources).unwrap();
        let mut again = vec![MetadataSource::from_metadata(Origin::Toml, &meta)];
        again.extend(sources);
        assert_eq!(merge_metadata(&again).unwrap(), meta);
    }

    #[test]
    fn effective_binding_follows_override() {
        let skill = unary_skill();
        assert_eq!(*skill.effective_binding(), *skill.binding());

        let v2 = HandlerBinding::Registered {
            key: "echo_v2".into(),
            handler: HandlerKind::Unary,
        };
        skill.set_edit_binding(v2.clone()).unwrap();
        assert_eq!(*skill.effective_binding(), v2);

        skill.clear_edit_binding();
        assert_eq!(*skill.effective_binding(), *skill.binding());
    }

    #[test]
    fn override_kind_must_match() {
        let skill = unary_skill();
        let err = skill
            .set_edit_binding(HandlerBinding::Registered {
                key: "stream".into(),
                handler: HandlerKind::Streaming,
            })
            .unwrap_err();
        assert_eq!(err.expected, HandlerKind::Unary);
        assert!(skill.edit_binding().is_none());
    }

    #[test]
    fn streaming_detection() {
        let unary = HandlerBinding::Registered {
            key: "a".into(),
            handler: HandlerKind::Unary,
        };
        let streaming = HandlerBinding::Registered {
            key: "a".into(),
            handler: HandlerKind::Streaming,
        };
        let sub = HandlerBinding::Subprocess {
            command: vec!["cat".into()],
            streaming: true,
            cwd: None,
        };
        assert!(!unary.is_streaming());
        assert!(streaming.is_streaming());
        assert!(sub.is_streaming());
        assert_eq!(sub.kind(), BindingKind::Subprocess);
        assert_eq!(streaming.kind(), BindingKind::InProcessStreaming);
    }

    #[test]
    fn skill_names() {
        assert!(is_valid_skill_name("vector_norm-2"));
        assert!(!is_valid_skill_name("Echo"));
        assert!(!is_valid_skill_name("a b"));
        assert!(!is_valid_skill_name(""));
    }
}
