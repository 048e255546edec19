//! Schema documents, canonical JSON, request validation and the derived
//! OpenAPI / MCP projections.

mod canonical;
mod openapi;
mod validate;

use std::fmt;

use serde::Serialize;
use serde_json::Value;

pub use canonical::{canonical_string, canonicalize};
pub use openapi::{build_openapi, tool_descriptor, ServerMeta, ToolDescriptor};
pub use validate::{LocSegment, ValidationErrors, ValidationIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SchemaRole {
    Input,
    Output,
}

impl fmt::Display for SchemaRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaRole::Input => "Input",
            SchemaRole::Output => "Output",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("{role} schema root must be an object with \"type\": \"object\"")]
    RootNotObject { role: SchemaRole },
    #[error("unsupported keyword `{keyword}` at {pointer}")]
    Unsupported { keyword: String, pointer: String },
    #[error("union at {pointer} mixes in complex types; only unions of scalar schemas are supported")]
    ComplexUnion { pointer: String },
    #[error("unresolvable $ref `{reference}` at {pointer}")]
    BadRef { reference: String, pointer: String },
    #[error("malformed keyword `{keyword}` at {pointer}: {reason}")]
    Malformed {
        keyword: String,
        pointer: String,
        reason: String,
    },
}

/// A JSON Schema document owned by one skill, in one role.
///
/// Construction checks the document against the supported keyword subset, so
/// a `SchemaDoc` never fails at request time because of its own shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaDoc {
    raw: Value,
    skill_name: String,
    role: SchemaRole,
}

impl SchemaDoc {
    pub fn new(
        raw: Value,
        skill_name: impl Into<String>,
        role: SchemaRole,
    ) -> Result<Self, SchemaError> {
        if raw.get("type").and_then(Value::as_str) != Some("object") {
            return Err(SchemaError::RootNotObject { role });
        }
        validate::check_supported(&raw)?;
        Ok(Self {
            raw,
            skill_name: skill_name.into(),
            role,
        })
    }

    pub fn raw(&self) -> &Value {
        &self.raw
    }

    pub fn skill_name(&self) -> &str {
        &self.skill_name
    }

    pub fn role(&self) -> SchemaRole {
        self.role
    }

    /// Registry key, namespaced by skill: `summarize/Input`.
    pub fn key(&self) -> String {
        format!("{}/{}", self.skill_name, self.role)
    }

    pub fn title(&self) -> Option<&str> {
        self.raw.get("title").and_then(Value::as_str)
    }

    /// Validates `instance`, returning it with schema defaults filled in.
    pub fn validate(&self, instance: &Value) -> Result<Value, ValidationErrors> {
        validate::validate(&self.raw, instance)
    }

    /// Validation without default filling.
    pub fn check(&self, instance: &Value) -> Result<(), ValidationErrors> {
        validate::check(&self.raw, instance)
    }

    pub fn canonical(&self) -> String {
        canonical_string(&self.raw)
    }
}
