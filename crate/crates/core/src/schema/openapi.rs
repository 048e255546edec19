use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::skill::Skill;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerMeta {
    pub title: String,
    pub version: String,
}

impl Default for ServerMeta {
    fn default() -> Self {
        Self {
            title: "skillstack".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// The MCP-facing projection of a skill.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    #[serde(rename = "inputSchema")]
    pub input_schema: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("skill `{0}` is hidden from MCP (is_mcp = false)")]
pub struct NotExposed(pub String);

pub fn tool_descriptor(skill: &Skill) -> Result<ToolDescriptor, NotExposed> {
    if !skill.meta.is_mcp {
        return Err(NotExposed(skill.name.clone()));
    }
    Ok(ToolDescriptor {
        name: skill.name.clone(),
        description: skill.meta.description.clone(),
        input_schema: skill.input_schema.raw().clone(),
    })
}

fn validation_error_schema() -> Value {
    json!({
        "type": "object",
        "properties": {
            "detail": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "loc": {"type": "array", "items": {"type": ["string", "integer"]}},
                        "msg": {"type": "string"},
                        "type": {"type": "string"}
                    },
                    "required": ["loc", "msg", "type"]
                }
            }
        },
        "required": ["detail"]
    })
}

fn error_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"detail": {"type": "string"}},
        "required": ["detail"]
    })
}

fn chunks_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"chunks": {"type": "array", "items": {"type": "string"}}},
        "required": ["chunks"]
    })
}

fn skill_operation(skill: &Skill) -> Value {
    let mut media = Map::new();
    media.insert("schema".into(), skill.input_schema.raw().clone());
    if let Some(defaults) = &skill.defaults {
        media.insert("example".into(), defaults.clone());
    }
    let json_out = if skill.is_streaming() {
        chunks_schema()
    } else {
        skill.output_schema.raw().clone()
    };
    json!({
        "operationId": format!("skill_{}", skill.name.replace('-', "_")),
        "summary": skill.name,
        "description": skill.meta.description,
        "tags": skill.meta.tags,
        "requestBody": {
            "required": true,
            "content": {"application/json": Value::Object(media)}
        },
        "responses": {
            "200": {
                "description": "Server-Sent Events stream by default; a buffered JSON body when the request sends `Accept: application/json`.",
                "content": {
                    "text/event-stream": {"schema": {"type": "string"}},
                    "application/json": {"schema": json_out}
                }
            },
            "422": {
                "description": "Request body failed input validation",
                "content": {"application/json": {"schema": validation_error_schema()}}
            },
            "500": {
                "description": "Handler failed",
                "content": {"application/json": {"schema": error_schema()}}
            },
            "504": {
                "description": "Handler exceeded its timeout",
                "content": {"application/json": {"schema": error_schema()}}
            }
        }
    })
}

fn list_operation() -> Value {
    json!({
        "get": {
            "operationId": "list_skills",
            "summary": "List skills",
            "responses": {
                "200": {
                    "description": "Every discovered skill, sorted by name",
                    "content": {"application/json": {"schema": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "name": {"type": "string"},
                                "description": {"type": "string"},
                                "tags": {"type": "array", "items": {"type": "string"}},
                                "streaming": {"type": "boolean"},
                                "is_mcp": {"type": "boolean"},
                                "timeout_secs": {"type": "number"}
                            }
                        }
                    }}}
                }
            }
        }
    })
}

/// Builds the OpenAPI 3.1 document: one POST path per skill plus the list path.
pub fn build_openapi<'a, I>(skills: I, meta: &ServerMeta) -> Value
where
    I: IntoIterator<Item = &'a Skill>,
{
    let mut paths = Map::new();
    paths.insert("/skills".into(), list_operation());
    let mut tags = BTreeSet::new();
    for skill in skills {
        tags.extend(skill.meta.tags.iter().cloned());
        paths.insert(
            format!("/skills/{}", skill.name),
            json!({"post": skill_operation(skill)}),
        );
    }
    json!({
        "openapi": "3.1.0",
        "info": {"title": meta.title, "version": meta.version},
        "paths": paths,
        "tags": tags.into_iter().map(|t| json!({"name": t})).collect::<Vec<_>>(),
    })
}
