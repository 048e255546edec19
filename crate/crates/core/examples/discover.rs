//! Run discovery over a directory and show where each piece of metadata came
//! from. Defaults to the bundled fixtures; pass a path to inspect another.
//!
//!     cargo run --example discover -- path/to/skills

use std::path::PathBuf;

use skillstack::{builtin, discover, validate_folder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/skills")));
    let registry = builtin::registry();
    let found = discover(&dir, &registry)?;

    for s in &found.skills {
        println!("{} ({:?}, {})", s.name, s.binding().kind(), if s.is_streaming() { "streaming" } else { "unary" });
        println!("  description  {:?}", s.meta.description);
        println!("  tags         {:?}", s.meta.tags);
        println!("  is_mcp       {}", s.meta.is_mcp);
        println!("  timeout_secs {}", s.meta.timeout_secs);
        println!("  schemas      {} / {}", s.input_schema.key(), s.output_schema.key());
        println!("  examples     {}", s.examples.len());
        let report = validate_folder(s.dir.as_deref().unwrap(), &registry);
        for w in report.warnings {
            println!("  warning      {w}");
        }
    }
    for r in &found.skipped {
        println!("skipped {}: missing {}", r.path.display(), r.missing.join(", "));
    }
    Ok(())
}
