//! Config file loading and validation. Errors are aggregated with JSON
//! pointer style paths so a bad config reports everything at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use promptcomp_core::eval::RandomBaseline;
use promptcomp_core::gateway::GatewayConfig;
use promptcomp_core::prompt::render::TechniqueRole;
use promptcomp_core::prompt::{DemonstrationConfig, DemonstrationStrategy, TemplateSet};
use promptcomp_core::space::DEFAULT_ENUMERATION_CAP;
use promptcomp_core::{
    count_compositions, load_corpus, CompositionSpace, Instance, TechniqueConfig, TrainConfig,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSection {
    pub name: String,
    pub techniques: Vec<TechniqueConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_demonstrations() -> DemonstrationConfig {
    DemonstrationConfig {
        strategy: DemonstrationStrategy::Random,
        k: 2,
        seed: 0,
    }
}

fn default_artifacts_dir() -> String {
    "artifacts".into()
}

fn default_random_baseline() -> RandomBaseline {
    RandomBaseline::Uniform
}

/// The config file as written on disk. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub space: SpaceSection,
    /// Path to a template manifest; omitted means the bundled minimal set.
    #[serde(default)]
    pub templates: Option<String>,
    pub corpus: String,
    #[serde(default)]
    pub categories: Vec<String>,
    pub gateway: GatewayConfig,
    #[serde(default = "default_demonstrations")]
    pub demonstrations: DemonstrationConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    #[serde(default)]
    pub tie_label: u8,
    #[serde(default = "default_random_baseline")]
    pub random_baseline: RandomBaseline,
    #[serde(default = "default_artifacts_dir")]
    pub artifacts_dir: String,
}

/// Validated, normalized configuration with referenced files loaded.
#[derive(Debug)]
pub struct Config {
    pub raw: RawConfig,
    pub config_path: PathBuf,
    pub space: CompositionSpace,
    pub templates: TemplateSet,
    pub corpus: Vec<Instance>,
    pub corpus_path: PathBuf,
    pub artifacts_dir: PathBuf,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Load and validate a config file. On failure, returns every detected
/// problem as `<json-pointer>: <message>` lines.
pub fn validate_config(path: &Path) -> Result<Config, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("/: cannot read config {}: {e}", path.display())])?;
    let raw: RawConfig =
        serde_json::from_str(&text).map_err(|e| vec![format!("/: invalid config JSON: {e}")])?;

    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut errors = Vec::new();

    let space = match CompositionSpace::new(&raw.space.name, &raw.space.techniques) {
        Ok(space) => {
            for (i, t) in space.techniques.iter().enumerate() {
                if TechniqueRole::from_name(&t.name).is_none() {
                    errors.push(format!(
                        "/space/techniques/{i}/name: no renderer role for technique '{}'",
                        t.name
                    ));
                }
            }
            if count_compositions(&space) > raw.enumeration_cap {
                errors.push(format!(
                    "/enumeration_cap: space has {} compositions, cap is {}",
                    count_compositions(&space),
                    raw.enumeration_cap
                ));
            }
            Some(space)
        }
        Err(e) => {
            errors.push(format!("/space/techniques: {e}"));
            None
        }
    };

    let templates = match &raw.templates {
        Some(rel) => match TemplateSet::load(&resolve(&base, rel)) {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(format!("/templates: {e}"));
                None
            }
        },
        None => Some(TemplateSet::minimal()),
    };

    let corpus_path = resolve(&base, &raw.corpus);
    let corpus = match load_corpus(&corpus_path) {
        Ok(c) => Some(c),
        Err(e) => {
            errors.push(format!("/corpus: {e}"));
            None
        }
    };

    if let Err(e) = raw.gateway.validate() {
        errors.push(format!("/gateway: {e}"));
    }
    if raw.seeds.is_empty() {
        errors.push("/seeds: at least one seed is required".into());
    }
    if raw.tie_label > 1 {
        errors.push(format!("/tie_label: must be 0 or 1, got {}", raw.tie_label));
    }
    if raw.demonstrations.k == 0
        && raw.demonstrations.strategy != DemonstrationStrategy::Category
    {
        errors.push("/demonstrations/k: must be positive for random/similarity".into());
    }
    if raw.train.epochs == 0 || raw.train.batch_size == 0 {
        errors.push("/train: epochs and batch_size must be positive".into());
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let artifacts_dir = resolve(&base, &raw.artifacts_dir);
    Ok(Config {
        space: space.unwrap(),
        templates: templates.unwrap(),
        corpus: corpus.unwrap(),
        corpus_path,
        artifacts_dir,
        config_path: path.to_path_buf(),
        raw,
    })
}
