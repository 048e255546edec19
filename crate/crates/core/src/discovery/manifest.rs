//! `skill.toml` parsing.
//!
//! ```toml
//! [skill]
//! description  = "Summarise text to a target length"
//! is_mcp       = true
//! tags         = ["text", "nlp"]
//! timeout_secs = 30
//! streaming    = false              # subprocess handlers only
//!
//! [handler]
//! command = ["python3", "handler.py"]
//! ```

use toml::{Table, Value};

use crate::skill::{MetadataSource, Origin};

#[derive(Debug, Clone, PartialEq)]
pub struct SkillToml {
    pub source: MetadataSource,
    pub streaming: Option<bool>,
    pub command: Option<Vec<String>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifestError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("`{key}` {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: &str) -> ManifestError {
    ManifestError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// 1-based line and column of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let column = before[line_start..].chars().count() + 1;
    (line, column)
}

fn string_list(key: &str, v: &Value) -> Result<Vec<String>, ManifestError> {
    let arr = v
        .as_array()
        .ok_or_else(|| invalid(key, "must be an array of strings"))?;
    arr.iter()
        .map(|item| {
            item.as_str()
                .map(str::to_string)
                .ok_or_else(|| invalid(key, "must be an array of strings"))
        })
        .collect()
}

pub fn parse_skill_toml(text: &str) -> Result<SkillToml, ManifestError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e
            .span()
            .map(|s| position(text, s.start))
            .unwrap_or((1, 1));
        ManifestError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;

    let mut out = SkillToml {
        source: MetadataSource::empty(Origin::Toml),
        streaming: None,
        command: None,
        warnings: Vec::new(),
    };

    for (key, value) in &table {
        match key.as_str() {
            "skill" => {
                let skill = value
                    .as_table()
                    .ok_or_else(|| invalid("skill", "must be a table"))?;
                parse_skill_table(skill, &mut out)?;
            }
            "handler" => {
                let handler = value
                    .as_table()
                    .ok_or_else(|| invalid("handler", "must be a table"))?;
                for (k, v) in handler {
                    match k.as_str() {
                        "command" => {
                            let cmd = string_list("handler.command", v)?;
                            if cmd.first().is_none_or(|p| p.is_empty()) {
                                return Err(invalid("handler.command", "must not be empty"));
                            }
                            out.command = Some(cmd);
                        }
                        other => out.warnings.push(format!("unknown key `handler.{other}` ignored")),
                    }
                }
            }
            other => out.warnings.push(format!("unknown key `{other}` ignored")),
        }
    }
    Ok(out)
}

fn parse_skill_table(skill: &Table, out: &mut SkillToml) -> Result<(), ManifestError> {
    for (k, v) in skill {
        match k.as_str() {
            "description" => {
                let d = v
                    .as_str()
                    .ok_or_else(|| invalid("skill.description", "must be a string"))?;
                out.source.description = Some(d.to_string());
            }
            "is_mcp" => {
                out.source.is_mcp = Some(
                    v.as_bool()
                        .ok_or_else(|| invalid("skill.is_mcp", "must be a boolean"))?,
                );
            }
            "tags" => {
                let tags = string_list("skill.tags", v)?;
                if tags.iter().any(|t| t.is_empty()) {
                    return Err(invalid("skill.tags", "must not contain empty strings"));
                }
                out.source.tags = Some(tags);
            }
            "timeout_secs" => {
                let secs = match v {
                    Value::Integer(i) => *i as f64,
                    Value::Float(f) => *f,
                    _ => return Err(invalid("skill.timeout_secs", "must be a number")),
                };
                if !(secs > 0.0 && secs.is_finite()) {
                    return Err(invalid("skill.timeout_secs", "must be positive"));
                }
                out.source.timeout_secs = Some(secs);
            }
            "streaming" => {
                out.streaming = Some(
                    v.as_bool()
                        .ok_or_else(|| invalid("skill.streaming", "must be a boolean"))?,
                );
            }
            other => out.warnings.push(format!("unknown key `skill.{other}` ignored")),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"[skill]
description  = "Summarise text to a target length"
is_mcp       = true    # set false to hide from MCP
tags         = ["text", "nlp"]
timeout_secs = 30
"#;

    #[test]
    fn sample_manifest() {
        let m = parse_skill_toml(SAMPLE).unwrap();
        assert_eq!(
            m.source.description.as_deref(),
            Some("Summarise text to a target length")
        );
        assert_eq!(m.source.is_mcp, Some(true));
        assert_eq!(m.source.tags, Some(vec!["text".into(), "nlp".into()]));
        assert_eq!(m.source.timeout_secs, Some(30.0));
        assert_eq!(m.source.origin, Origin::Toml);
        assert!(m.warnings.is_empty());
        assert_eq!(m.command, None);
    }

    #[test]
    fn empty_file_sets_nothing() {
        let m = parse_skill_toml("").unwrap();
        assert_eq!(m.source, MetadataSource::empty(Origin::Toml));
    }

    #[test]
    fn hide_from_mcp_only() {
        let m = parse_skill_toml("[skill]\nis_mcp = false\n").unwrap();
        assert_eq!(m.source.is_mcp, Some(false));
        assert_eq!(m.source.description, None);
        assert_eq!(m.source.tags, None);
        assert_eq!(m.source.timeout_secs, None);
    }

    #[test]
    fn extensions_and_unknown_keys() {
        let m = parse_skill_toml(
            "[skill]\nstreaming = true\ncolour = \"red\"\n[handler]\ncommand = [\"python3\", \"h.py\"]\n[extra]\n",
        )
        .unwrap();
        assert_eq!(m.streaming, Some(true));
        assert_eq!(m.command, Some(vec!["python3".into(), "h.py".into()]));
        assert_eq!(m.warnings.len(), 2);
        assert!(m.warnings.iter().any(|w| w.contains("skill.colour")));
    }

    #[test]
    fn type_errors() {
        assert!(matches!(
            parse_skill_toml("[skill]\nis_mcp = \"yes\"\n"),
            Err(ManifestError::Invalid { key, .. }) if key == "skill.is_mcp"
        ));
        assert!(parse_skill_toml("[skill]\ntimeout_secs = 0\n").is_err());
        assert!(parse_skill_toml("[skill]\ntags = [\"\"]\n").is_err());
        assert!(parse_skill_toml("[handler]\ncommand = []\n").is_err());
    }

    /// Truncating the sample inside a string on line 4 must report line 4.
    #[test]
    fn syntax_error_position_tracks_truncation() {
        let cut = SAMPLE.find("\"nlp\"").unwrap() + 2;
        let truncated = &SAMPLE[..cut];
        let expected_line = truncated.matches('\n').count() + 1;
        assert_eq!(expected_line, 4);
        match parse_skill_toml(truncated).unwrap_err() {
            ManifestError::Syntax { line, .. } => assert_eq!(line, expected_line),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn positions() {
        assert_eq!(position("ab\ncd", 0), (1, 1));
        assert_eq!(position("ab\ncd", 4), (2, 2));
    }
}
