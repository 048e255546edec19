//! Print the generated OpenAPI 3.1 document and the MCP tool descriptors
//! built from the same schemas.

use skillstack::schema::{build_openapi, canonical_string, tool_descriptor, ServerMeta};
use skillstack::{builtin, discover};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills");
    let found = discover(dir.as_ref(), &builtin::registry())?;
    let doc = build_openapi(found.skills.iter().map(|s| &**s), &ServerMeta::default());
    println!("{}", serde_json::to_string_pretty(&doc)?);

    eprintln!("\ncross-transport check:");
    for s in &found.skills {
        match tool_descriptor(s) {
            Ok(tool) => {
                let body = &doc["paths"][format!("/skills/{}", s.name)]["post"]["requestBody"]["content"]
                    ["application/json"]["schema"];
                let same = canonical_string(&tool.input_schema) == canonical_string(body);
                eprintln!("  {:<11} inputSchema == requestBody schema: {same}", s.name);
            }
            Err(e) => eprintln!("  {:<11} {e}", s.name),
        }
    }
    Ok(())
}
