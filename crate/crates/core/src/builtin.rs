//! In-process handlers for the bundled demo skills.
//!
//! These back the skill folders under `fixtures/skills` (echo, greet,
//! summarize, vectornorm, classify, translate) plus a few helpers used for
//! hot-swap and timeout demonstrations.

use std::time::Duration;

use futures::stream;
use serde_json::{json, Map, Value};

use crate::runtime::{BoxError, HandlerRegistry};

/// Formats a number without a trailing `.0` when it is integral.
pub fn format_number(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn str_field<'a>(input: &'a Value, key: &str) -> &'a str {
    input.get(key).and_then(Value::as_str).unwrap_or_default()
}

/// Splits text into sentences ending in `.`, `!` or `?`, with whitespace
/// collapsed so no sentence contains a newline.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
        if word.ends_with(['.', '!', '?']) {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Running sums of squares followed by the Euclidean norm.
pub fn vector_norm_chunks(values: &[f64]) -> Vec<String> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len() + 1);
    for v in values {
        acc += v * v;
        out.push(format!("partial: {}", format_number(acc)));
    }
    out.push(format!("norm: {}", format_number(acc.sqrt())));
    out
}

const LEXICON: &[(&str, [&str; 3])] = &[
    // (english, [fr, es, de])
    ("hello", ["bonjour", "hola", "hallo"]),
    ("world", ["monde", "mundo", "welt"]),
    ("good", ["bon", "bueno", "gut"]),
    ("morning", ["matin", "mañana", "morgen"]),
    ("cat", ["chat", "gato", "katze"]),
    ("dog", ["chien", "perro", "hund"]),
    ("the", ["le", "el", "der"]),
    ("and", ["et", "y", "und"]),
    ("thank", ["merci", "gracias", "danke"]),
    ("you", ["vous", "tú", "du"]),
    ("water", ["eau", "agua", "wasser"]),
    ("house", ["maison", "casa", "haus"]),
];

pub fn translate_word(word: &str, target: &str) -> String {
    let idx = match target {
        "fr" => 0,
        "es" => 1,
        "de" => 2,
        _ => return word.to_string(),
    };
    let lower = word.to_lowercase();
    LEXICON
        .iter()
        .find(|(en, _)| *en == lower)
        .map(|(_, t)| t[idx].to_string())
        .unwrap_or_else(|| word.to_string())
}

pub fn classify(text: &str, labels: &[String]) -> Value {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let total = words.len().max(1) as f64;
    let mut matched = Vec::new();
    let mut scores = Map::new();
    for label in labels {
        let hits = words.iter().filter(|w| **w == label.to_lowercase()).count();
        if hits > 0 && !matched.contains(label) {
            matched.push(label.clone());
        }
        scores.insert(label.clone(), json!(hits as f64 / total));
    }
    json!({"labels": matched, "scores": scores})
}

/// Registry with the handlers the bundled skill folders bind to.
pub fn registry() -> HandlerRegistry {
    let mut r = HandlerRegistry::new();
    r.register_unary("echo", |input: Value| async move {
        Ok(json!({"text": str_field(&input, "text")}))
    })
    .describe("Return the input text unchanged");
    r.register_unary("echo_v2", |input: Value| async move {
        Ok(json!({"text": str_field(&input, "text").to_uppercase()}))
    })
    .describe("Return the input text upper-cased");
    r.register_unary("greet", |input: Value| async move {
        let greeting = input
            .get("greeting")
            .and_then(Value::as_str)
            .unwrap_or("Hello");
        Ok(json!({"message": format!("{greeting}, {}!", str_field(&input, "name"))}))
    })
    .describe("Greet someone by name");
    r.register_streaming("summarize", |input: Value| {
        let max = input.get("max_length").and_then(Value::as_u64).unwrap_or(100) as usize;
        let text: String = str_field(&input, "text").chars().take(max).collect();
        stream::iter(
            split_sentences(&text)
                .into_iter()
                .map(|s| Ok::<_, BoxError>(Value::String(s))),
        )
    })
    .describe("Summarise text by streaming its leading sentences");
    r.register_streaming("vectornorm", |input: Value| {
        let values: Vec<f64> = input
            .get("values")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        stream::iter(
            vector_norm_chunks(&values)
                .into_iter()
                .map(|s| Ok::<_, BoxError>(Value::String(s))),
        )
    })
    .describe("Stream running sums of squares, then the Euclidean norm");
    r.register_unary("classify", |input: Value| async move {
        let labels: Vec<String> = input
            .get("labels")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).map(String::from).collect())
            .unwrap_or_default();
        Ok(classify(str_field(&input, "text"), &labels))
    })
    .describe("Tag text with every candidate label it mentions");
    r.register_streaming("translate", |input: Value| {
        let target = str_field(&input, "target").to_string();
        let words: Vec<Result<Value, BoxError>> = str_field(&input, "text")
            .split_whitespace()
            .map(|w| Ok(Value::String(translate_word(w, &target))))
            .collect();
        stream::iter(words)
    })
    .describe("Translate text word by word");
    r.register_unary("sleep", |input: Value| async move {
        let secs = input.get("seconds").and_then(Value::as_f64).unwrap_or(2.0);
        tokio::time::sleep(Duration::from_secs_f64(secs.max(0.0))).await;
        Ok(json!({"slept": secs}))
    })
    .describe("Sleep, then report how long");
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_chunks_for_three_four() {
        assert_eq!(
            vector_norm_chunks(&[3.0, 4.0]),
            ["partial: 9", "partial: 25", "norm: 5"]
        );
        assert_eq!(vector_norm_chunks(&[]), ["norm: 0"]);
        assert_eq!(vector_norm_chunks(&[1.0, 1.0]).last().unwrap(), "norm: 1.4142135623730951");
    }

    #[test]
    fn sentences() {
        assert_eq!(split_sentences("A. B."), ["A.", "B."]);
        assert_eq!(split_sentences("One two!\n Three"), ["One two!", "Three"]);
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn translation() {
        assert_eq!(translate_word("Hello", "fr"), "bonjour");
        assert_eq!(translate_word("zebra", "de"), "zebra");
    }

    #[test]
    fn classification() {
        let out = classify("Cats and dogs: a dog story", &["dog".into(), "cat".into()]);
        assert_eq!(out["labels"], json!(["dog"]));
        assert_eq!(out["scores"]["cat"], json!(0.0));
    }
}
