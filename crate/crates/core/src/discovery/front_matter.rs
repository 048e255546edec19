//! Restricted front-matter reader for `SKILL.md`.
//!
//! Only `name`, `description` and `tags` are extracted. Values may be plain,
//! single- or double-quoted, or a `>`/`|` block scalar; `tags` may be an inline
//! `[a, b]` list or a dash list. Other keys, including nested mappings, are
//! skipped.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrontMatterMeta {
    pub name: Option<String>,
    pub description: Option<String>,
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("front-matter opening `---` has no closing `---`; ignoring it")]
pub struct UnclosedFence;

fn is_fence(line: &str) -> bool {
    line.trim_end() == "---"
}

/// Returns `Ok(None)` when the document has no front-matter.
pub fn parse_front_matter(text: &str) -> Result<Option<FrontMatterMeta>, UnclosedFence> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if is_fence(first) => {}
        _ => return Ok(None),
    }
    let mut body = Vec::new();
    let mut closed = false;
    for line in lines {
        if is_fence(line) {
            closed = true;
            break;
        }
        body.push(line);
    }
    if !closed {
        return Err(UnclosedFence);
    }
    Ok(Some(parse_block(&body)))
}

fn indent(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn parse_block(lines: &[&str]) -> FrontMatterMeta {
    let mut meta = FrontMatterMeta::default();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        i += 1;
        if is_blank_or_comment(line) || indent(line) > 0 {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim();
        let rest = strip_comment(rest.trim());

        // Continuation lines are everything more indented than the key.
        let start = i;
        while i < lines.len() && (lines[i].trim().is_empty() || indent(lines[i]) > 0) {
            i += 1;
        }
        let nested = &lines[start..i];

        let value = if rest.is_empty() {
            Scalar::Nested(nested)
        } else if let Some(style) = block_style(rest) {
            Scalar::Text(block_scalar(style, nested))
        } else {
            Scalar::Inline(rest)
        };

        match key {
            "name" => meta.name = value.text(),
            "description" => meta.description = value.text(),
            "tags" => meta.tags = value.list(),
            _ => {}
        }
    }
    meta
}

enum Scalar<'a> {
    Inline(&'a str),
    Text(String),
    Nested(&'a [&'a str]),
}

impl Scalar<'_> {
    fn text(&self) -> Option<String> {
        match self {
            Scalar::Inline(s) => Some(unquote(s)),
            Scalar::Text(t) => Some(t.trim().to_string()),
            Scalar::Nested(_) => None,
        }
    }

    fn list(&self) -> Option<Vec<String>> {
        let items: Vec<String> = match self {
            Scalar::Inline(s) => {
                let inner = s.strip_prefix('[')?.strip_suffix(']')?;
                split_flow(inner).into_iter().map(|t| unquote(&t)).collect()
            }
            Scalar::Nested(lines) => lines
                .iter()
                .filter(|l| !is_blank_or_comment(l))
                .filter_map(|l| l.trim().strip_prefix('-'))
                .map(|item| unquote(strip_comment(item.trim())))
                .collect(),
            Scalar::Text(_) => return None,
        };
        Some(items.into_iter().filter(|t| !t.is_empty()).collect())
    }
}

#[derive(Clone, Copy)]
enum BlockStyle {
    Folded,
    Literal,
}

fn block_style(s: &str) -> Option<BlockStyle> {
    let style = match s.chars().next()? {
        '>' => BlockStyle::Folded,
        '|' => BlockStyle::Literal,
        _ => return None,
    };
    s[1..]
        .chars()
        .all(|c| matches!(c, '-' | '+' | '1'..='9'))
        .then_some(style)
}

fn block_scalar(style: BlockStyle, lines: &[&str]) -> String {
    let base = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| indent(l))
        .min()
        .unwrap_or(0);
    let body: Vec<&str> = lines
        .iter()
        .map(|l| if l.len() >= base { &l[base..] } else { "" })
        .collect();
    match style {
        BlockStyle::Literal => body.join("\n"),
        BlockStyle::Folded => {
            let mut out = String::new();
            for line in body {
                if line.is_empty() {
                    out.push('\n');
                } else {
                    if !out.is_empty() && !out.ends_with('\n') {
                        out.push(' ');
                    }
                    out.push_str(line);
                }
            }
            out
        }
    }
}

fn strip_comment(s: &str) -> &str {
    // ` #` starts a comment outside quotes
    let mut quote = None;
    let bytes = s.as_bytes();
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') if i == 0 => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '#') if i > 0 && bytes[i - 1] == b' ' => return s[..i].trim_end(),
            _ => {}
        }
    }
    s
}

fn split_flow(inner: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut current = String::new();
    let mut quote = None;
    for c in inner.chars() {
        match (quote, c) {
            (None, '"' | '\'') => {
                quote = Some(c);
                current.push(c);
            }
            (Some(q), c) if c == q => {
                quote = None;
                current.push(c);
            }
            (None, ',') => items.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    items.push(current);
    items.into_iter().map(|s| s.trim().to_string()).collect()
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        let inner = &s[1..s.len() - 1];
        let mut out = String::with_capacity(inner.len());
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        }
        out
    } else if s.len() >= 2 && s.starts_with('\'') && s.ends_with('\'') {
        s[1..s.len() - 1].replace("''", "'")
    } else {
        s.to_string()
    }
}
