//! Core library for exploring compositions of prompting techniques on binary
//! text classification: space enumeration, prompt construction, prediction
//! collection, cooperative-game attribution (Shapley values and interaction
//! indices), adaptive per-instance composition selection, and evaluation.

pub mod cache;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod game;
pub mod gateway;
pub mod matrix;
pub mod plots;
pub mod predictor;
pub mod prompt;
pub mod shapley;
pub mod space;
pub mod synthetic;

pub use cache::{CacheKey, PredictionCache};
pub use corpus::{load_corpus, split_instances, write_corpus, Instance, Split};
pub use error::{CoreError, Result};
pub use eval::{macro_f1, one_sided_t_test, EvalReport};
pub use game::{build_game, Coalition, CompositionGame, VariantFixing};
pub use gateway::{backend_for, collect, Backend, GatewayConfig};
pub use matrix::{build_label_matrix, LabelMatrix, PredictionRecord};
pub use predictor::{featurize, train, PredictorModel, TrainConfig};
pub use prompt::{render, select_demonstrations, RenderedPrompt, TemplateSet};
pub use shapley::{
    exact_shapley, pairwise_sii, reconstruct_and_select, two_sii, SelectionMode, ShapleyReport,
};
pub use space::{
    coalition_of, count_compositions, decode, encode, enumerate_compositions, Composition,
    CompositionId, CompositionSpace, Technique, TechniqueConfig,
};
