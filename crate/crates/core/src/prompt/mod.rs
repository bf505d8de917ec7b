//! Prompt construction: templates, demonstration selection, and rendering.

pub mod demos;
pub mod render;
pub mod templates;

pub use demos::{
    select_demonstrations, DemonstrationConfig, DemonstrationStrategy, SimilarityScorer,
    TfIdfScorer,
};
pub use render::{render, RenderedPrompt, SegmentKind, TechniqueRole};
pub use templates::TemplateSet;
