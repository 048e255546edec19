use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use super::{chunk_text, Runtime};
use crate::schema::canonical_string;
use crate::skill::{Example, Skill};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleOutcome {
    pub file: PathBuf,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
}

impl ExampleOutcome {
    fn pass(file: PathBuf) -> Self {
        Self {
            file,
            passed: true,
            diff: None,
        }
    }

    fn fail(file: PathBuf, diff: impl Into<String>) -> Self {
        Self {
            file,
            passed: false,
            diff: Some(diff.into()),
        }
    }

    fn compare(file: PathBuf, passed: bool, expected: &Value, actual: &Value) -> Self {
        if passed {
            Self::pass(file)
        } else {
            Self::fail(
                file,
                format!(
                    "expected: {}\n  actual: {}",
                    canonical_string(expected),
                    canonical_string(actual)
                ),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub skill: String,
    pub outcomes: Vec<ExampleOutcome>,
}

impl ExampleReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl Runtime {
    /// Replays every recorded example of `skill` and compares outputs.
    ///
    /// Streaming examples record `{"chunks": [...]}`; a produced chunk matches
    /// when it equals the recorded value or the recorded value is its string
    /// form.
    pub async fn run_examples(&self, skill: &Skill) -> ExampleReport {
        let mut outcomes = Vec::with_capacity(skill.examples.len());
        for example in &skill.examples {
            outcomes.push(self.run_example(skill, example).await);
        }
        ExampleReport {
            skill: skill.name.clone(),
            outcomes,
        }
    }

    async fn run_example(&self, skill: &Skill, example: &Example) -> ExampleOutcome {
        let file = example.source_file.clone();
        let input = match skill.input_schema.validate(&example.input) {
            Ok(v) => v,
            Err(e) => return ExampleOutcome::fail(file, format!("input fails validation: {e}")),
        };
        if !skill.is_streaming() {
            return match self.call_unary(skill, input).await {
                Ok(out) => ExampleOutcome::compare(file, out == example.output, &example.output, &out),
                Err(e) => ExampleOutcome::fail(file, format!("handler error: {e}")),
            };
        }
        let Some(expected) = example.output.get("chunks").and_then(Value::as_array) else {
            return ExampleOutcome::fail(file, "streaming example output must be {\"chunks\": [...]}");
        };
        match self.call_streaming(skill, input).collect_all().await {
            Ok(chunks) => {
                let passed = chunks.len() == expected.len()
                    && chunks
                        .iter()
                        .zip(expected)
                        .all(|(got, want)| got == want || Value::String(chunk_text(got)) == *want);
                ExampleOutcome::compare(
                    file,
                    passed,
                    &Value::Array(expected.clone()),
                    &Value::Array(chunks),
                )
            }
            Err((_, e)) => ExampleOutcome::fail(file, format!("handler error: {e}")),
        }
    }
}
