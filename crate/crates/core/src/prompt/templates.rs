//! Per-technique template texts, loaded from plain files through a JSON
//! manifest so wording can be adjusted per dataset without code changes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// All template texts for one composition space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    /// Static task framing, always present.
    pub task_description: String,
    /// Answer-shape instruction, always present.
    pub output_instruction: String,
    /// Input block; must contain `{input}`.
    pub input_format: String,
    pub persona: Option<String>,
    pub definition: Option<String>,
    /// Hint line; must contain `{categories}`.
    pub stimulus_hint: Option<String>,
    /// Ordered sub-questions for the chain-of-prompts reasoning technique.
    pub reasoning_steps: Vec<String>,
    /// Demonstration block; must contain `{input}` and `{output}`.
    pub demonstration_format: Option<String>,
    pub demonstrations_header: Option<String>,
}

impl TemplateSet {
    pub fn validate(&self) -> Result<()> {
        if !self.input_format.contains("{input}") {
            return Err(CoreError::Template(
                "input_format must contain the {input} placeholder".into(),
            ));
        }
        if let Some(fmt) = &self.demonstration_format {
            if !fmt.contains("{input}") || !fmt.contains("{output}") {
                return Err(CoreError::Template(
                    "demonstration_format must contain {input} and {output}".into(),
                ));
            }
        }
        if let Some(hint) = &self.stimulus_hint {
            if !hint.contains("{categories}") {
                return Err(CoreError::Template(
                    "stimulus_hint must contain the {categories} placeholder".into(),
                ));
            }
        }
        Ok(())
    }

    /// Load from a manifest JSON mapping segment names to UTF-8 text files.
    /// `task_description`, `output_instruction`, and `input_format` are
    /// required; `reasoning_steps` holds one sub-question per line.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: BTreeMap<String, String> =
            serde_json::from_str(&fs::read_to_string(manifest_path).map_err(|e| {
                CoreError::Template(format!(
                    "cannot read template manifest {}: {e}",
                    manifest_path.display()
                ))
            })?)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let read = |key: &str| -> Result<Option<String>> {
            match manifest.get(key) {
                Some(rel) => {
                    let path = base.join(rel);
                    let text = fs::read_to_string(&path).map_err(|e| {
                        CoreError::Template(format!(
                            "template '{key}' file {} unreadable: {e}",
                            path.display()
                        ))
                    })?;
                    Ok(Some(text.trim_end_matches('\n').to_string()))
                }
                None => Ok(None),
            }
        };
        let required = |key: &str| -> Result<String> {
            read(key)?.ok_or_else(|| {
                CoreError::Template(format!("template manifest is missing '{key}'"))
            })
        };
        let known = [
            "task_description",
            "output_instruction",
            "input_format",
            "persona",
            "definition",
            "stimulus_hint",
            "reasoning_steps",
            "demonstration_format",
            "demonstrations_header",
        ];
        for key in manifest.keys() {
            if !known.contains(&key.as_str()) {
                return Err(CoreError::Template(format!(
                    "unknown template manifest key '{key}'"
                )));
            }
        }
        let set = TemplateSet {
            task_description: required("task_description")?,
            output_instruction: required("output_instruction")?,
            input_format: required("input_format")?,
            persona: read("persona")?,
            definition: read("definition")?,
            stimulus_hint: read("stimulus_hint")?,
            reasoning_steps: read("reasoning_steps")?
                .map(|text| {
                    text.lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(|l| l.to_string())
                        .collect()
                })
                .unwrap_or_default(),
            demonstration_format: read("demonstration_format")?,
            demonstrations_header: read("demonstrations_header")?,
        };
        set.validate()?;
        Ok(set)
    }

    /// A minimal usable template set for tests and bundled runs.
    pub fn minimal() -> Self {
        TemplateSet {
            task_description:
                "### TASK\nGiven the input text, decide whether it contains social bias. \
                 Answer with \"Yes\" or \"No\"."
                    .into(),
            output_instruction: "Answer only with \"Yes\" or \"No\".".into(),
            input_format: "### INPUT\n<{input}>".into(),
            persona: Some(
                "You assume the role of an annotator reviewing texts for social bias.".into(),
            ),
            definition: Some(
                "### DEFINITION\nA biased text expresses an over-generalized belief about a \
                 group of people."
                    .into(),
            ),
            stimulus_hint: Some("HINT: Possible types of biases: {categories}".into()),
            reasoning_steps: vec![
                "Does the text mention a social group?".into(),
                "Does the text generalize over that group?".into(),
            ],
            demonstration_format: Some("### INPUT\n<{input}>\n### OUTPUT\n{output}".into()),
            demonstrations_header: Some(
                "### EXAMPLES\nHere are some examples to help you understand the task:".into(),
            ),
        }
    }
}
