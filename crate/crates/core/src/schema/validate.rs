//! Validator for the supported JSON Schema (2020-12) subset.
//!
//! Supported: `type`, `properties`, `required`, `items`, `enum`, `const`,
//! `default`, `minimum`/`maximum`, `exclusiveMinimum`/`exclusiveMaximum`,
//! `minLength`/`maxLength`, `minItems`/`maxItems`, `additionalProperties`,
//! local `$ref`, and `anyOf`/`oneOf` over scalar branches. Anything else that
//! constrains instances is rejected when the schema is loaded.

use serde::Serialize;
use serde_json::{Map, Value};

use super::SchemaError;

const MAX_REF_DEPTH: usize = 64;

const ANNOTATIONS: &[&str] = &[
    "$schema",
    "$id",
    "$comment",
    "$defs",
    "definitions",
    "title",
    "description",
    "default",
    "examples",
    "format",
    "readOnly",
    "writeOnly",
    "deprecated",
    "contentMediaType",
    "contentEncoding",
];

const SUPPORTED: &[&str] = &[
    "type",
    "properties",
    "required",
    "items",
    "enum",
    "const",
    "minimum",
    "maximum",
    "exclusiveMinimum",
    "exclusiveMaximum",
    "minLength",
    "maxLength",
    "minItems",
    "maxItems",
    "additionalProperties",
    "$ref",
    "anyOf",
    "oneOf",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum LocSegment {
    Key(String),
    Index(usize),
}

impl From<&str> for LocSegment {
    fn from(s: &str) -> Self {
        LocSegment::Key(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub loc: Vec<LocSegment>,
    pub msg: String,
    #[serde(rename = "type")]
    pub kind: String,
}

impl ValidationIssue {
    pub fn loc_path(&self) -> String {
        if self.loc.is_empty() {
            return "<root>".to_string();
        }
        self.loc
            .iter()
            .map(|s| match s {
                LocSegment::Key(k) => k.clone(),
                LocSegment::Index(i) => i.to_string(),
            })
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// All violations found in one instance; never empty.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{}", self.render())]
pub struct ValidationErrors {
    pub detail: Vec<ValidationIssue>,
}

impl ValidationErrors {
    /// Human-readable one-line-per-issue rendering.
    pub fn render(&self) -> String {
        self.detail
            .iter()
            .map(|i| format!("{}: {} [{}]", i.loc_path(), i.msg, i.kind))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("validation errors serialize")
    }
}

pub(super) fn check(root: &Value, instance: &Value) -> Result<(), ValidationErrors> {
    let mut ctx = Ctx {
        root,
        loc: Vec::new(),
        errors: Vec::new(),
    };
    ctx.visit(root, instance, 0);
    if ctx.errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors { detail: ctx.errors })
    }
}

pub(super) fn validate(root: &Value, instance: &Value) -> Result<Value, ValidationErrors> {
    check(root, instance)?;
    let mut out = instance.clone();
    apply_defaults(root, root, &mut out, 0);
    Ok(out)
}

struct Ctx<'a> {
    root: &'a Value,
    loc: Vec<LocSegment>,
    errors: Vec<ValidationIssue>,
}

impl<'a> Ctx<'a> {
    fn push(&mut self, kind: &str, msg: String) {
        self.errors.push(ValidationIssue {
            loc: self.loc.clone(),
            msg,
            kind: kind.to_string(),
        });
    }

    fn visit(&mut self, schema: &'a Value, instance: &Value, depth: usize) {
        let obj = match schema {
            Value::Bool(true) => return,
            Value::Bool(false) => {
                self.push("false_schema", "No value is allowed here".into());
                return;
            }
            Value::Object(o) => o,
            _ => return,
        };

        if let Some(Value::String(r)) = obj.get("$ref") {
            if depth < MAX_REF_DEPTH {
                if let Some(target) = resolve_ref(self.root, r) {
                    self.visit(target, instance, depth + 1);
                }
            }
        }

        if let Some(t) = obj.get("type") {
            if !type_matches(t, instance) {
                self.push(
                    "type",
                    format!("Input should be of type {}", type_names(t)),
                );
            }
        }

        if let Some(Value::Array(options)) = obj.get("enum") {
            if !options.iter().any(|o| json_eq(o, instance)) {
                let shown: Vec<String> = options.iter().map(|o| o.to_string()).collect();
                self.push("enum", format!("Input should be one of {}", shown.join(", ")));
            }
        }
        if let Some(c) = obj.get("const") {
            if !json_eq(c, instance) {
                self.push("const", format!("Input should be {c}"));
            }
        }

        if let Some(x) = instance_number(instance) {
            if let Some(min) = obj.get("minimum").and_then(Value::as_f64) {
                if x < min {
                    self.push("minimum", format!("Input should be greater than or equal to {min}"));
                }
            }
            if let Some(max) = obj.get("maximum").and_then(Value::as_f64) {
                if x > max {
                    self.push("maximum", format!("Input should be less than or equal to {max}"));
                }
            }
            if let Some(min) = obj.get("exclusiveMinimum").and_then(Value::as_f64) {
                if x <= min {
                    self.push("exclusive_minimum", format!("Input should be greater than {min}"));
                }
            }
            if let Some(max) = obj.get("exclusiveMaximum").and_then(Value::as_f64) {
                if x >= max {
                    self.push("exclusive_maximum", format!("Input should be less than {max}"));
                }
            }
        }

        if let Value::String(s) = instance {
            let len = s.chars().count() as u64;
            if let Some(min) = obj.get("minLength").and_then(Value::as_u64) {
                if len < min {
                    self.push("min_length", format!("String should have at least {min} characters"));
                }
            }
            if let Some(max) = obj.get("maxLength").and_then(Value::as_u64) {
                if len > max {
                    self.push("max_length", format!("String should have at most {max} characters"));
                }
            }
        }

        if let Value::Array(items) = instance {
            let len = items.len() as u64;
            if let Some(min) = obj.get("minItems").and_then(Value::as_u64) {
                if len < min {
                    self.push("min_items", format!("List should have at least {min} items"));
                }
            }
            if let Some(max) = obj.get("maxItems").and_then(Value::as_u64) {
                if len > max {
                    self.push("max_items", format!("List should have at most {max} items"));
                }
            }
            if let Some(item_schema) = obj.get("items") {
                for (i, item) in items.iter().enumerate() {
                    self.loc.push(LocSegment::Index(i));
                    self.visit(item_schema, item, depth);
                    self.loc.pop();
                }
            }
        }

        if let Value::Object(map) = instance {
            self.visit_object(obj, map, depth);
        }

        if let Some(Value::Array(branches)) = obj.get("anyOf") {
            if !branches.iter().any(|b| self.branch_ok(b, instance, depth)) {
                self.push("any_of", "Input does not match any allowed alternative".into());
            }
        }
        if let Some(Value::Array(branches)) = obj.get("oneOf") {
            let n = branches
                .iter()
                .filter(|b| self.branch_ok(b, instance, depth))
                .count();
            if n != 1 {
                self.push(
                    "one_of",
                    format!("Input should match exactly one alternative, matched {n}"),
                );
            }
        }
    }

    fn visit_object(&mut self, obj: &'a Map<String, Value>, map: &Map<String, Value>, depth: usize) {
        if let Some(Value::Array(required)) = obj.get("required") {
            for name in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(name) {
                    self.loc.push(name.into());
                    self.push("missing", "Field required".into());
                    self.loc.pop();
                }
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        let mut keys: Vec<&String> = map.keys().collect();
        keys.sort();
        for key in keys {
            let value = &map[key];
            self.loc.push(LocSegment::Key(key.clone()));
            match props.and_then(|p| p.get(key)) {
                Some(prop_schema) => self.visit(prop_schema, value, depth),
                None => match obj.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        self.push("additional_properties", "Extra inputs are not permitted".into())
                    }
                    Some(extra) => self.visit(extra, value, depth),
                    None => {}
                },
            }
            self.loc.pop();
        }
    }

    fn branch_ok(&self, branch: &'a Value, instance: &Value, depth: usize) -> bool {
        let mut sub = Ctx {
            root: self.root,
            loc: Vec::new(),
            errors: Vec::new(),
        };
        sub.visit(branch, instance, depth);
        sub.errors.is_empty()
    }
}

fn apply_defaults(root: &Value, schema: &Value, instance: &mut Value, depth: usize) {
    if depth > MAX_REF_DEPTH {
        return;
    }
    let Some(obj) = schema.as_object() else {
        return;
    };
    if let Some(Value::String(r)) = obj.get("$ref") {
        if let Some(target) = resolve_ref(root, r) {
            apply_defaults(root, target, instance, depth + 1);
        }
    }
    match instance {
        Value::Object(map) => {
            if let Some(props) = obj.get("properties").and_then(Value::as_object) {
                for (name, prop_schema) in props {
                    match map.get_mut(name) {
                        Some(v) => apply_defaults(root, prop_schema, v, depth + 1),
                        None => {
                            if let Some(d) = default_of(root, prop_schema) {
                                map.insert(name.clone(), d);
                            }
                        }
                    }
                }
            }
        }
        Value::Array(items) => {
            if let Some(item_schema) = obj.get("items") {
                for item in items {
                    apply_defaults(root, item_schema, item, depth + 1);
                }
            }
        }
        _ => {}
    }
}

fn default_of(root: &Value, schema: &Value) -> Option<Value> {
    let obj = schema.as_object()?;
    if let Some(d) = obj.get("default") {
        return Some(d.clone());
    }
    let r = obj.get("$ref")?.as_str()?;
    resolve_ref(root, r)?.get("default").cloned()
}

fn resolve_ref<'a>(root: &'a Value, reference: &str) -> Option<&'a Value> {
    let pointer = reference.strip_prefix('#')?;
    if pointer.is_empty() {
        return Some(root);
    }
    root.pointer(pointer)
}

fn type_matches(t: &Value, instance: &Value) -> bool {
    match t {
        Value::String(name) => single_type_matches(name, instance),
        Value::Array(names) => names
            .iter()
            .filter_map(Value::as_str)
            .any(|n| single_type_matches(n, instance)),
        _ => true,
    }
}

fn single_type_matches(name: &str, instance: &Value) -> bool {
    match name {
        "null" => instance.is_null(),
        "boolean" => instance.is_boolean(),
        "object" => instance.is_object(),
        "array" => instance.is_array(),
        "string" => instance.is_string(),
        "number" => instance.is_number(),
        "integer" => match instance {
            Value::Number(n) => {
                n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0)
            }
            _ => false,
        },
        _ => false,
    }
}

fn type_names(t: &Value) -> String {
    match t {
        Value::String(s) => s.clone(),
        Value::Array(a) => a
            .iter()
            .filter_map(Value::as_str)
            .collect::<Vec<_>>()
            .join(" or "),
        other => other.to_string(),
    }
}

fn instance_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

/// JSON Schema equality: numbers compare by value, so `1` equals `1.0`.
pub(crate) fn json_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            if let (Some(x), Some(y)) = (x.as_i64(), y.as_i64()) {
                return x == y;
            }
            if let (Some(x), Some(y)) = (x.as_u64(), y.as_u64()) {
                return x == y;
            }
            x.as_f64() == y.as_f64()
        }
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(a, b)| json_eq(a, b))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, v)| y.get(k).is_some_and(|w| json_eq(v, w)))
        }
        _ => a == b,
    }
}

/// Rejects schemas that use keywords outside the supported subset.
pub(super) fn check_supported(root: &Value) -> Result<(), SchemaError> {
    walk(root, root, "#")
}

fn walk(root: &Value, schema: &Value, pointer: &str) -> Result<(), SchemaError> {
    let obj = match schema {
        Value::Bool(_) => return Ok(()),
        Value::Object(o) => o,
        _ => {
            return Err(SchemaError::Malformed {
                keyword: "<schema>".into(),
                pointer: pointer.into(),
                reason: "a schema must be an object or a boolean".into(),
            })
        }
    };
    for key in obj.keys() {
        if !SUPPORTED.contains(&key.as_str()) && !ANNOTATIONS.contains(&key.as_str()) {
            return Err(SchemaError::Unsupported {
                keyword: key.clone(),
                pointer: pointer.into(),
            });
        }
    }
    let malformed = |keyword: &str, reason: &str| SchemaError::Malformed {
        keyword: keyword.into(),
        pointer: pointer.into(),
        reason: reason.into(),
    };

    if let Some(r) = obj.get("$ref") {
        let r = r.as_str().ok_or_else(|| malformed("$ref", "must be a string"))?;
        if resolve_ref(root, r).is_none() {
            return Err(SchemaError::BadRef {
                reference: r.into(),
                pointer: pointer.into(),
            });
        }
    }
    if let Some(t) = obj.get("type") {
        let ok = match t {
            Value::String(s) => is_type_name(s),
            Value::Array(a) => a.iter().all(|v| v.as_str().is_some_and(is_type_name)),
            _ => false,
        };
        if !ok {
            return Err(malformed("type", "must name JSON types"));
        }
    }
    if let Some(req) = obj.get("required") {
        if !req.as_array().is_some_and(|a| a.iter().all(Value::is_string)) {
            return Err(malformed("required", "must be an array of strings"));
        }
    }
    if let Some(e) = obj.get("enum") {
        if !e.is_array() {
            return Err(malformed("enum", "must be an array"));
        }
    }
    for kw in ["minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum"] {
        if obj.get(kw).is_some_and(|v| !v.is_number()) {
            return Err(malformed(kw, "must be a number"));
        }
    }
    for kw in ["minLength", "maxLength", "minItems", "maxItems"] {
        if obj.get(kw).is_some_and(|v| v.as_u64().is_none()) {
            return Err(malformed(kw, "must be a non-negative integer"));
        }
    }
    if let Some(props) = obj.get("properties") {
        let props = props
            .as_object()
            .ok_or_else(|| malformed("properties", "must be an object"))?;
        for (name, sub) in props {
            walk(root, sub, &format!("{pointer}/properties/{name}"))?;
        }
    }
    if let Some(items) = obj.get("items") {
        if items.is_array() {
            return Err(malformed("items", "tuple form is not supported"));
        }
        walk(root, items, &format!("{pointer}/items"))?;
    }
    if let Some(extra) = obj.get("additionalProperties") {
        walk(root, extra, &format!("{pointer}/additionalProperties"))?;
    }
    for defs in ["$defs", "definitions"] {
        if let Some(d) = obj.get(defs) {
            let d = d
                .as_object()
                .ok_or_else(|| malformed(defs, "must be an object"))?;
            for (name, sub) in d {
                walk(root, sub, &format!("{pointer}/{defs}/{name}"))?;
            }
        }
    }
    for kw in ["anyOf", "oneOf"] {
        if let Some(branches) = obj.get(kw) {
            let branches = branches
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| malformed(kw, "must be a non-empty array"))?;
            for (i, b) in branches.iter().enumerate() {
                let here = format!("{pointer}/{kw}/{i}");
                if is_complex(b) {
                    return Err(SchemaError::ComplexUnion { pointer: here });
                }
                walk(root, b, &here)?;
            }
        }
    }
    Ok(())
}

fn is_type_name(s: &str) -> bool {
    matches!(
        s,
        "null" | "boolean" | "object" | "array" | "string" | "number" | "integer"
    )
}

fn is_complex(branch: &Value) -> bool {
    let Some(obj) = branch.as_object() else {
        return false;
    };
    let complex_type = |v: &Value| matches!(v.as_str(), Some("object") | Some("array"));
    let type_complex = match obj.get("type") {
        Some(Value::Array(a)) => a.iter().any(complex_type),
        Some(t) => complex_type(t),
        None => false,
    };
    type_complex
        || [
            "$ref",
            "properties",
            "items",
            "additionalProperties",
            "anyOf",
            "oneOf",
        ]
        .iter()
        .any(|k| obj.contains_key(*k))
}
