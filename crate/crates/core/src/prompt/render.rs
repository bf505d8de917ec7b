//! Deterministic rendering of a (composition, instance) pair into a prompt.
//!
//! Segments follow the fixed global order: persona, task description, output
//! instruction, definition, demonstrations, input. The stimulus technique
//! attaches its hint line to every demonstration and to the input; the
//! reasoning technique contributes a chain of follow-up prompts instead of a
//! segment.

use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{CoreError, Result};
use crate::prompt::templates::TemplateSet;
use crate::space::{Choice, Composition, CompositionSpace};

/// Technique roles recognized by the renderer, keyed by technique name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TechniqueRole {
    Persona,
    Definition,
    Demonstrations,
    Stimulus,
    Reasoning,
}

impl TechniqueRole {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "persona" => Some(TechniqueRole::Persona),
            "definition" => Some(TechniqueRole::Definition),
            "demonstrations" => Some(TechniqueRole::Demonstrations),
            "stimulus" | "directional_stimulus" => Some(TechniqueRole::Stimulus),
            "reasoning" | "reasoning_steps" => Some(TechniqueRole::Reasoning),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Persona,
    TaskDescription,
    OutputInstruction,
    Definition,
    Demonstrations,
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub segments: Vec<(SegmentKind, String)>,
    pub full_text: String,
    /// Follow-up prompts for chain-of-prompts reasoning; empty when the
    /// reasoning technique is absent.
    pub reasoning_chain: Vec<String>,
}

fn format_categories(categories: &[String]) -> String {
    categories
        .iter()
        .map(|c| format!("'{c}'"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn label_word(label: u8) -> &'static str {
    if label == 1 {
        "Yes"
    } else {
        "No"
    }
}

/// Render one composition for one instance. `demos` must be non-empty exactly
/// when a demonstration technique is selected.
pub fn render(
    composition: &Composition,
    space: &CompositionSpace,
    instance: &Instance,
    templates: &TemplateSet,
    demos: &[&Instance],
    categories: &[String],
) -> Result<RenderedPrompt> {
    templates.validate()?;

    let mut persona = false;
    let mut definition = false;
    let mut demonstrations = false;
    let mut stimulus = false;
    let mut reasoning = false;
    for technique in &space.techniques {
        if composition.choice(technique.id) == Choice::Absent {
            continue;
        }
        match TechniqueRole::from_name(&technique.name) {
            Some(TechniqueRole::Persona) => persona = true,
            Some(TechniqueRole::Definition) => definition = true,
            Some(TechniqueRole::Demonstrations) => demonstrations = true,
            Some(TechniqueRole::Stimulus) => stimulus = true,
            Some(TechniqueRole::Reasoning) => reasoning = true,
            None => {
                return Err(CoreError::Template(format!(
                    "no renderer role for technique '{}'",
                    technique.name
                )))
            }
        }
    }

    if demonstrations == demos.is_empty() {
        return Err(CoreError::Template(if demonstrations {
            "demonstration technique selected but no demonstrations provided".into()
        } else {
            "demonstrations provided without a demonstration technique".into()
        }));
    }

    let hint = if stimulus {
        let template = templates.stimulus_hint.as_ref().ok_or_else(|| {
            CoreError::Template("stimulus technique selected but no stimulus_hint template".into())
        })?;
        Some(template.replace("{categories}", &format_categories(categories)))
    } else {
        None
    };
    let with_hint = |text: &str| match &hint {
        Some(h) => format!("{text}\n{h}"),
        None => text.to_string(),
    };

    let mut segments = Vec::new();
    if persona {
        let text = templates.persona.as_ref().ok_or_else(|| {
            CoreError::Template("persona technique selected but no persona template".into())
        })?;
        segments.push((SegmentKind::Persona, text.clone()));
    }
    segments.push((SegmentKind::TaskDescription, templates.task_description.clone()));
    segments.push((SegmentKind::OutputInstruction, templates.output_instruction.clone()));
    if definition {
        let text = templates.definition.as_ref().ok_or_else(|| {
            CoreError::Template("definition technique selected but no definition template".into())
        })?;
        segments.push((SegmentKind::Definition, text.clone()));
    }
    if demonstrations {
        let format = templates.demonstration_format.as_ref().ok_or_else(|| {
            CoreError::Template(
                "demonstration technique selected but no demonstration_format template".into(),
            )
        })?;
        let mut blocks = Vec::new();
        if let Some(header) = &templates.demonstrations_header {
            blocks.push(header.clone());
        }
        for demo in demos {
            blocks.push(
                format
                    .replace("{input}", &with_hint(&demo.text))
                    .replace("{output}", label_word(demo.label)),
            );
        }
        segments.push((SegmentKind::Demonstrations, blocks.join("\n\n")));
    }
    segments.push((
        SegmentKind::Input,
        templates.input_format.replace("{input}", &with_hint(&instance.text)),
    ));

    let full_text = segments
        .iter()
        .map(|(_, text)| text.as_str())
        .collect::<Vec<_>>()
        .join("\n\n");

    let reasoning_chain = if reasoning {
        if templates.reasoning_steps.is_empty() {
            return Err(CoreError::Template(
                "reasoning technique selected but no reasoning_steps template".into(),
            ));
        }
        let mut chain = templates.reasoning_steps.clone();
        chain.push(templates.output_instruction.clone());
        chain
    } else {
        Vec::new()
    };

    Ok(RenderedPrompt {
        segments,
        full_text,
        reasoning_chain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::space::{Composition, CompositionSpace, TechniqueConfig};

    fn space() -> CompositionSpace {
        CompositionSpace::new(
            "test",
            &[
                TechniqueConfig { name: "persona".into(), variants: vec![] },
                TechniqueConfig { name: "definition".into(), variants: vec![] },
                TechniqueConfig {
                    name: "demonstrations".into(),
                    variants: vec!["random".into(), "similarity".into(), "category".into()],
                },
                TechniqueConfig { name: "stimulus".into(), variants: vec![] },
                TechniqueConfig { name: "reasoning".into(), variants: vec![] },
            ],
        )
        .unwrap()
    }

    fn instance(id: &str, text: &str) -> Instance {
        Instance {
            id: id.into(),
            text: text.into(),
            label: 1,
            category: None,
            split: Split::Test,
        }
    }

    fn categories() -> Vec<String> {
        vec!["race".into(), "gender".into()]
    }

    #[test]
    fn base_composition_renders_three_segments() {
        let space = space();
        let c = Composition::base(&space);
        let input = instance("a", "some input text");
        let p = render(&c, &space, &input, &TemplateSet::minimal(), &[], &categories()).unwrap();
        let kinds: Vec<SegmentKind> = p.segments.iter().map(|(k, _)| *k).collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::TaskDescription,
                SegmentKind::OutputInstruction,
                SegmentKind::Input
            ]
        );
        assert!(p.full_text.contains("some input text"));
        assert!(!p.full_text.contains("annotator"));
        assert!(!p.full_text.contains("DEFINITION"));
        assert!(p.reasoning_chain.is_empty());
    }

    #[test]
    fn definition_appears_between_task_and_input() {
        let space = space();
        let mut c = Composition::base(&space);
        c.selection[1] = Choice::Present;
        let input = instance("a", "text");
        let p = render(&c, &space, &input, &TemplateSet::minimal(), &[], &categories()).unwrap();
        let task = p.full_text.find("### TASK").unwrap();
        let def = p.full_text.find("### DEFINITION").unwrap();
        let inp = p.full_text.find("### INPUT").unwrap();
        assert!(task < def && def < inp);
    }

    #[test]
    fn stimulus_hint_attached_to_demos_and_input() {
        let space = space();
        let mut c = Composition::base(&space);
        c.selection[2] = Choice::Variant(1);
        c.selection[3] = Choice::Present;
        let input = instance("a", "query text");
        let demo_items = vec![instance("d1", "demo one"), instance("d2", "demo two")];
        let demos: Vec<&Instance> = demo_items.iter().collect();
        let p = render(&c, &space, &input, &TemplateSet::minimal(), &demos, &categories()).unwrap();
        let hint_count = p.full_text.matches("HINT: Possible types of biases").count();
        // One hint per demonstration plus one for the input.
        assert_eq!(hint_count, 3);
        assert!(p.full_text.contains("'race', 'gender'"));
    }

    #[test]
    fn removing_a_technique_removes_only_its_segment() {
        let space = space();
        let mut with_persona = Composition::base(&space);
        with_persona.selection[0] = Choice::Present;
        with_persona.selection[1] = Choice::Present;
        let mut without_persona = with_persona.clone();
        without_persona.selection[0] = Choice::Absent;
        let input = instance("a", "text");
        let templates = TemplateSet::minimal();
        let a = render(&with_persona, &space, &input, &templates, &[], &categories()).unwrap();
        let b = render(&without_persona, &space, &input, &templates, &[], &categories()).unwrap();
        let a_rest: Vec<_> = a
            .segments
            .iter()
            .filter(|(k, _)| *k != SegmentKind::Persona)
            .collect();
        let b_all: Vec<_> = b.segments.iter().collect();
        assert_eq!(a_rest, b_all);
        // Segment kinds always appear in the global order.
        for w in a.segments.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn reasoning_populates_chain() {
        let space = space();
        let mut c = Composition::base(&space);
        c.selection[4] = Choice::Present;
        let input = instance("a", "text");
        let p = render(&c, &space, &input, &TemplateSet::minimal(), &[], &categories()).unwrap();
        assert_eq!(p.reasoning_chain.len(), 3);
        assert_eq!(p.reasoning_chain[2], TemplateSet::minimal().output_instruction);
    }

    #[test]
    fn missing_template_for_selected_technique_errors() {
        let space = space();
        let mut c = Composition::base(&space);
        c.selection[0] = Choice::Present;
        let mut templates = TemplateSet::minimal();
        templates.persona = None;
        let input = instance("a", "text");
        let err = render(&c, &space, &input, &templates, &[], &categories()).unwrap_err();
        assert!(err.to_string().contains("persona"));
    }

    #[test]
    fn demo_mismatch_errors() {
        let space = space();
        let input = instance("a", "text");
        let templates = TemplateSet::minimal();
        // Demos provided for a composition without the technique.
        let demo = instance("d", "demo");
        let err = render(
            &Composition::base(&space),
            &space,
            &input,
            &templates,
            &[&demo],
            &categories(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("without a demonstration technique"));
        // Technique selected but no demos.
        let mut c = Composition::base(&space);
        c.selection[2] = Choice::Variant(0);
        assert!(render(&c, &space, &input, &templates, &[], &categories()).is_err());
    }

    #[test]
    fn render_is_pure() {
        let space = space();
        let mut c = Composition::base(&space);
        c.selection[0] = Choice::Present;
        c.selection[3] = Choice::Present;
        let input = instance("a", "text");
        let templates = TemplateSet::minimal();
        let a = render(&c, &space, &input, &templates, &[], &categories()).unwrap();
        let b = render(&c, &space, &input, &templates, &[], &categories()).unwrap();
        assert_eq!(a, b);
    }
}
