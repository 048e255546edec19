//! Request validation with defaults, and the `{"detail": [...]}` error shape.

use serde_json::json;
use skillstack::schema::{SchemaDoc, SchemaRole};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = SchemaDoc::new(
        json!({
            "title": "Input",
            "type": "object",
            "properties": {
                "text": {"type": "string"},
                "max_length": {"type": "integer", "minimum": 1, "default": 100},
                "style": {"enum": ["plain", "bullets"], "default": "plain"}
            },
            "required": ["text"]
        }),
        "summarize",
        SchemaRole::Input,
    )?;
    println!("schema key: {}", schema.key());

    for body in [
        json!({"text": "hi"}),
        json!({"text": "hi", "max_length": 5, "style": "bullets"}),
        json!({}),
        json!({"text": 7, "max_length": 0, "style": "loud"}),
        json!("not an object"),
    ] {
        match schema.validate(&body) {
            Ok(filled) => println!("ok   {body} -> {filled}"),
            Err(e) => println!("422  {body} -> {}", e.to_json()),
        }
    }

    // keywords outside the supported subset are rejected up front
    let err = SchemaDoc::new(json!({"type": "object", "patternProperties": {}}), "x", SchemaRole::Input).unwrap_err();
    println!("unsupported: {err}");
    Ok(())
}
