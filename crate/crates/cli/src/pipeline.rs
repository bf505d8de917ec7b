//! Subcommand implementations. Every command writes its artifacts into the
//! config's artifacts directory plus a manifest listing them.

use std::path::{Path, PathBuf};

use promptcomp_core::corpus::{split_instances, write_corpus, Instance, Split};
use promptcomp_core::error::{CoreError, Result};
use promptcomp_core::eval::{
    best_composition, correct_ratio, mean_stdev, one_sided_t_test, run_baselines,
    selection_frequencies, selection_macro_f1, AdaptiveOutcome, EvalReport,
};
use promptcomp_core::game::{build_game, composition_for_coalition, CompositionGame, VariantFixing};
use promptcomp_core::gateway::{backend_for, collect, CollectRequest};
use promptcomp_core::matrix::{build_label_matrix, LabelMatrix, PredictionRecord};
use promptcomp_core::plots::{
    export_force_plot, export_network_plot, render_force_svg, render_network_svg,
};
use promptcomp_core::predictor::{train, PredictorModel, TrainConfig};
use promptcomp_core::shapley::{reconstruct_and_select, two_sii, SelectionMode, ShapleyReport};
use promptcomp_core::space::{count_compositions, decode, encode, CompositionId};
use promptcomp_core::synthetic::{generate_planted_corpus, planted_space, SyntheticConfig};
use promptcomp_core::{macro_f1, PredictionCache};

use crate::config::Config;
use crate::manifest::ManifestBuilder;

/// Success level of a command, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Complete,
    /// Some predictions failed; rerun `collect` to retry them.
    PartialCollection,
}

fn ensure_artifacts_dir(config: &Config) -> Result<()> {
    std::fs::create_dir_all(&config.artifacts_dir)?;
    Ok(())
}

fn cache_path(config: &Config) -> PathBuf {
    config.artifacts_dir.join("cache.jsonl")
}

fn composition_ids(config: &Config) -> Vec<CompositionId> {
    (0..count_compositions(&config.space)).map(CompositionId).collect()
}

fn cached_records(cache: &PredictionCache) -> Vec<PredictionRecord> {
    cache.records().cloned().collect()
}

fn matrix_for(
    config: &Config,
    records: &[PredictionRecord],
    split: Split,
    seed: u64,
) -> Result<LabelMatrix> {
    let instances = split_instances(&config.corpus, split);
    if instances.is_empty() {
        return Err(CoreError::Eval(format!("corpus has no {split} instances")));
    }
    build_label_matrix(
        records,
        &instances,
        &composition_ids(config),
        &config.raw.gateway.model_id,
        seed,
    )
}

fn describe_id(config: &Config, id: CompositionId) -> String {
    decode(id, &config.space)
        .map(|c| c.describe(&config.space))
        .unwrap_or_else(|_| format!("c{}", id.0))
}

fn suffix(split: Split, seed: u64, fixing: &VariantFixing) -> String {
    let mut s = format!("{split}_seed{seed}");
    for (t, v) in &fixing.choices {
        s.push_str(&format!("_{t}-{v}"));
    }
    s
}

fn parse_fixes(fixes: &[String]) -> Result<VariantFixing> {
    let mut choices = Vec::new();
    for fix in fixes {
        let (t, v) = fix.split_once('=').ok_or_else(|| {
            CoreError::Game(format!("--fix expects technique=variant, got '{fix}'"))
        })?;
        choices.push((t.to_string(), v.to_string()));
    }
    Ok(VariantFixing { choices })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn cmd_enumerate(config: &Config) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("enumerate", config)?;
    let ids = composition_ids(config);
    println!("space '{}': {} compositions", config.space.name, ids.len());
    println!("id,description");

    let path = config.artifacts_dir.join("compositions.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["id", "description"])?;
    for id in &ids {
        let description = describe_id(config, *id);
        println!("{},{description}", id.0);
        writer.write_record([id.0.to_string(), description])?;
    }
    writer.flush()?;
    manifest.add(&path);
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

pub fn cmd_collect(
    config: &Config,
    splits: &[Split],
    allow_partial: bool,
) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("collect", config)?;
    let backend = backend_for(&config.raw.gateway)?;
    let mut cache = PredictionCache::open(&cache_path(config))?;
    manifest.add(&cache_path(config));

    let ids = composition_ids(config);
    let train_pool = split_instances(&config.corpus, Split::Train);
    let mut total_failures = 0usize;
    let mut total_calls = 0u64;

    for &seed in &config.raw.seeds {
        for &split in splits {
            let instances = split_instances(&config.corpus, split);
            if instances.is_empty() {
                continue;
            }
            let request = CollectRequest {
                space: &config.space,
                composition_ids: &ids,
                instances: &instances,
                demo_pool: &train_pool,
                templates: &config.templates,
                categories: &config.raw.categories,
                demo_config: &config.raw.demonstrations,
                seed,
                allow_partial: true,
            };
            let outcome = collect(&request, &config.raw.gateway, backend.as_ref(), &mut cache)?;
            total_failures += outcome.failures;
            total_calls += outcome.upstream_calls;
            println!(
                "collect {split} seed {seed}: {} records, {} upstream calls, {} cache hits, {} failures",
                outcome.records.len(),
                outcome.upstream_calls,
                outcome.cache_hits,
                outcome.failures
            );

            if outcome.failures == 0 || allow_partial {
                let matrix = build_label_matrix(
                    &outcome.records,
                    &instances,
                    &ids,
                    &config.raw.gateway.model_id,
                    seed,
                )?;
                let matrix_path = config
                    .artifacts_dir
                    .join(format!("matrix_{split}_seed{seed}.csv"));
                matrix.write_csv(&matrix_path)?;
                manifest.add(&matrix_path);
                let predictions_path = config
                    .artifacts_dir
                    .join(format!("predictions_{split}_seed{seed}.csv"));
                matrix.write_predictions_csv(&predictions_path)?;
                manifest.add(&predictions_path);
            }
        }
    }
    println!("total upstream calls: {total_calls}");
    manifest.finish()?;
    if total_failures > 0 {
        eprintln!("{total_failures} predictions failed; rerun collect to retry");
        return Ok(RunOutcome::PartialCollection);
    }
    Ok(RunOutcome::Complete)
}

pub fn cmd_game(
    config: &Config,
    split: Split,
    seed: Option<u64>,
    fixes: &[String],
) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("game", config)?;
    let seed = seed.unwrap_or(config.raw.seeds[0]);
    let fixing = parse_fixes(fixes)?;
    let cache = PredictionCache::open(&cache_path(config))?;
    let records = cached_records(&cache);
    let matrix = matrix_for(config, &records, split, seed)?;
    let game = build_game(&matrix, &config.space, &fixing, "macro_f1", |truth, pred| {
        macro_f1(truth, pred).expect("matrix rows are aligned")
    })?;
    let path = config
        .artifacts_dir
        .join(format!("game_{}.csv", suffix(split, seed, &fixing)));
    game.write_csv(&path)?;
    manifest.add(&path);
    println!(
        "game over {} players, baseline {:.4}, full {:.4} -> {}",
        game.player_count,
        game.baseline(),
        game.full_value(),
        path.display()
    );
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

fn shapley_report_path(config: &Config, suffix: &str) -> PathBuf {
    config.artifacts_dir.join(format!("shapley_{suffix}.json"))
}

pub fn cmd_shapley(
    config: &Config,
    split: Split,
    seed: Option<u64>,
    fixes: &[String],
) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("shapley", config)?;
    let seed = seed.unwrap_or(config.raw.seeds[0]);
    let fixing = parse_fixes(fixes)?;
    let suffix = suffix(split, seed, &fixing);
    let game_path = config.artifacts_dir.join(format!("game_{suffix}.csv"));
    if !game_path.exists() {
        return Err(CoreError::Game(format!(
            "game file {} not found; run the game subcommand first",
            game_path.display()
        )));
    }
    let mut game = CompositionGame::read_csv(&game_path, "macro_f1")?;
    game.player_names = config.space.techniques.iter().map(|t| t.name.clone()).collect();
    game.variant_fixing = fixing;

    let report = two_sii(&game)?;
    let report_path = shapley_report_path(config, &suffix);
    write_json(&report_path, &report)?;
    manifest.add(&report_path);

    let force = export_force_plot(&report);
    let force_json = config.artifacts_dir.join(format!("force_plot_{suffix}.json"));
    write_json(&force_json, &force)?;
    manifest.add(&force_json);
    let force_svg = config.artifacts_dir.join(format!("force_plot_{suffix}.svg"));
    std::fs::write(&force_svg, render_force_svg(&force))?;
    manifest.add(&force_svg);

    let network = export_network_plot(&report);
    let network_json = config
        .artifacts_dir
        .join(format!("network_plot_{suffix}.json"));
    write_json(&network_json, &network)?;
    manifest.add(&network_json);
    let network_svg = config
        .artifacts_dir
        .join(format!("network_plot_{suffix}.svg"));
    std::fs::write(&network_svg, render_network_svg(&network))?;
    manifest.add(&network_svg);

    for (name, sv) in report.player_names.iter().zip(&report.sv) {
        println!("{name}: sv {sv:+.4}");
    }
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

#[derive(serde::Serialize)]
struct SelectionArtifact {
    mode: SelectionMode,
    best_mask: u32,
    best_members: Vec<String>,
    best_composition_id: u64,
    best_description: String,
    predicted: Vec<f64>,
}

pub fn cmd_select(
    config: &Config,
    mode: SelectionMode,
    split: Split,
    seed: Option<u64>,
    fixes: &[String],
) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("select", config)?;
    let seed = seed.unwrap_or(config.raw.seeds[0]);
    let fixing = parse_fixes(fixes)?;
    let suffix = suffix(split, seed, &fixing);
    let report_path = shapley_report_path(config, &suffix);
    if !report_path.exists() {
        return Err(CoreError::Game(format!(
            "shapley report {} not found; run the shapley subcommand first",
            report_path.display()
        )));
    }
    let report: ShapleyReport = serde_json::from_str(&std::fs::read_to_string(&report_path)?)?;
    let selection = reconstruct_and_select(&report, mode);
    let composition = composition_for_coalition(selection.best, &config.space, &fixing)?;
    let id = encode(&composition, &config.space);
    let artifact = SelectionArtifact {
        mode,
        best_mask: selection.best.0,
        best_members: selection
            .best
            .members()
            .map(|i| config.space.techniques[i].name.clone())
            .collect(),
        best_composition_id: id.0,
        best_description: composition.describe(&config.space),
        predicted: selection.predicted,
    };
    let mode_name = match mode {
        SelectionMode::Sv => "sv",
        SelectionMode::Si => "si",
    };
    let path = config
        .artifacts_dir
        .join(format!("selection_{mode_name}_{suffix}.json"));
    write_json(&path, &artifact)?;
    manifest.add(&path);
    println!(
        "{mode_name} selection: {} (composition {})",
        artifact.best_description, artifact.best_composition_id
    );
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

fn model_path(config: &Config, seed: u64) -> PathBuf {
    config.artifacts_dir.join(format!("model_seed{seed}.json"))
}

pub fn cmd_train(config: &Config) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("train", config)?;
    let cache = PredictionCache::open(&cache_path(config))?;
    let records = cached_records(&cache);
    let instances = split_instances(&config.corpus, Split::Train);
    let texts: Vec<&str> = instances.iter().map(|i| i.text.as_str()).collect();
    for &seed in &config.raw.seeds {
        let matrix = matrix_for(config, &records, Split::Train, seed)?;
        let train_config = TrainConfig {
            seed,
            ..config.raw.train.clone()
        };
        let (model, trace) = train(&matrix, &texts, &config.space, &train_config)?;
        let path = model_path(config, seed);
        model.save(&path)?;
        manifest.add(&path);
        let trace_path = config
            .artifacts_dir
            .join(format!("loss_trace_seed{seed}.json"));
        write_json(&trace_path, &trace)?;
        manifest.add(&trace_path);
        println!(
            "train seed {seed}: {} epochs, loss {:.4} -> {:.4}",
            trace.len(),
            trace.first().unwrap_or(&0.0),
            trace.last().unwrap_or(&0.0)
        );
    }
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

#[derive(serde::Serialize)]
struct SelectionRow {
    instance_id: String,
    composition_id: u64,
    score: f64,
}

fn model_selections(
    model: &PredictorModel,
    instances: &[&Instance],
) -> Vec<(String, CompositionId, f64)> {
    instances
        .iter()
        .map(|i| {
            let (cid, score) = model.select_composition(&i.text);
            (i.id.clone(), cid, score)
        })
        .collect()
}

pub fn cmd_predict(config: &Config, split: Split) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("predict", config)?;
    let instances = split_instances(&config.corpus, split);
    if instances.is_empty() {
        return Err(CoreError::Eval(format!("corpus has no {split} instances")));
    }
    for &seed in &config.raw.seeds {
        let model = PredictorModel::load(&model_path(config, seed))?;
        model.check_space(&config.space)?;
        let rows: Vec<SelectionRow> = model_selections(&model, &instances)
            .into_iter()
            .map(|(instance_id, cid, score)| SelectionRow {
                instance_id,
                composition_id: cid.0,
                score,
            })
            .collect();
        let path = config
            .artifacts_dir
            .join(format!("selections_{split}_seed{seed}.json"));
        write_json(&path, &rows)?;
        manifest.add(&path);
        println!("predict {split} seed {seed}: {} selections", rows.len());
    }
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

pub fn cmd_evaluate(config: &Config, split: Split) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("evaluate", config)?;
    let cache = PredictionCache::open(&cache_path(config))?;
    let records = cached_records(&cache);
    let instances = split_instances(&config.corpus, split);
    if instances.is_empty() {
        return Err(CoreError::Eval(format!("corpus has no {split} instances")));
    }
    let train_labels: Vec<u8> = split_instances(&config.corpus, Split::Train)
        .iter()
        .map(|i| i.label)
        .collect();

    let mut adaptive = Vec::new();
    let mut adaptive_f1s = Vec::new();
    let mut best_on_test_f1s = Vec::new();
    let mut selections_per_seed = Vec::new();
    let mut first_matrix: Option<LabelMatrix> = None;

    for &seed in &config.raw.seeds {
        let matrix = matrix_for(config, &records, split, seed)?;
        let model = PredictorModel::load(&model_path(config, seed))?;
        model.check_space(&config.space)?;
        let selections: Vec<CompositionId> = model_selections(&model, &instances)
            .into_iter()
            .map(|(_, cid, _)| cid)
            .collect();
        let f1 = selection_macro_f1(&selections, &matrix)?;
        let ratio = correct_ratio(&selections, &matrix)?;
        adaptive.push(AdaptiveOutcome {
            seed,
            macro_f1: f1,
            correct_ratio: ratio,
        });
        adaptive_f1s.push(f1);
        best_on_test_f1s.push(best_composition(&matrix)?.score);
        selections_per_seed.push(selections);
        if first_matrix.is_none() {
            first_matrix = Some(matrix);
        }
    }
    let matrix = first_matrix.expect("seeds are validated non-empty");

    let val_instances = split_instances(&config.corpus, Split::Validation);
    let val_matrix = if val_instances.is_empty() {
        None
    } else {
        Some(matrix_for(config, &records, Split::Validation, config.raw.seeds[0])?)
    };

    let baselines = run_baselines(
        &matrix,
        val_matrix.as_ref(),
        &train_labels,
        &config.raw.seeds,
        config.raw.tie_label,
        config.raw.random_baseline,
    )?;
    let (adaptive_mean_f1, adaptive_stdev_f1) = mean_stdev(&adaptive_f1s);
    let significance = if adaptive_f1s.len() >= 2 {
        Some(one_sided_t_test(&adaptive_f1s, &best_on_test_f1s)?)
    } else {
        None
    };
    let report = EvalReport {
        split: split.to_string(),
        per_composition_f1: EvalReport::per_composition_scores(&matrix)?,
        baselines,
        adaptive,
        adaptive_mean_f1,
        adaptive_stdev_f1,
        selection_frequencies: selection_frequencies(
            &selections_per_seed,
            &composition_ids(config),
        ),
        significance_vs_best_on_test: significance,
    };

    let json_path = config.artifacts_dir.join("report.json");
    write_json(&json_path, &report)?;
    manifest.add(&json_path);
    let md_path = config.artifacts_dir.join("report.md");
    std::fs::write(&md_path, report.to_markdown(|id| describe_id(config, id)))?;
    manifest.add(&md_path);

    println!(
        "adaptive {:.4} ± {:.4} | best-on-test {:.4} | oracle {:.4}",
        report.adaptive_mean_f1,
        report.adaptive_stdev_f1,
        report.baselines.best_on_test.score,
        report.baselines.oracle
    );
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

pub fn cmd_report(config: &Config) -> Result<RunOutcome> {
    ensure_artifacts_dir(config)?;
    let mut manifest = ManifestBuilder::start("report", config)?;
    let json_path = config.artifacts_dir.join("report.json");
    if !json_path.exists() {
        return Err(CoreError::Eval(format!(
            "evaluation report {} not found; run the evaluate subcommand first",
            json_path.display()
        )));
    }
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(&json_path)?)?;
    let mut markdown = report.to_markdown(|id| describe_id(config, id));

    // Append attribution sections for every Shapley report present, in a
    // stable filename order.
    let mut shapley_files: Vec<PathBuf> = std::fs::read_dir(&config.artifacts_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("shapley_") && n.ends_with(".json"))
        })
        .collect();
    shapley_files.sort();
    for path in &shapley_files {
        let shapley: ShapleyReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("shapley");
        markdown.push_str(&format!("\n## Attribution ({name})\n\n"));
        markdown.push_str("| Technique | Shapley value | Order-1 term |\n|---|---|---|\n");
        for (i, player) in shapley.player_names.iter().enumerate() {
            markdown.push_str(&format!(
                "| {player} | {:+.4} | {:+.4} |\n",
                shapley.sv[i], shapley.two_sii_order1[i]
            ));
        }
        if !shapley.sii_pairs.is_empty() {
            markdown.push_str("\n| Pair | Interaction |\n|---|---|\n");
            for pair in &shapley.sii_pairs {
                markdown.push_str(&format!(
                    "| {} + {} | {:+.4} |\n",
                    shapley.player_names[pair.i], shapley.player_names[pair.j], pair.value
                ));
            }
        }
    }

    let md_path = config.artifacts_dir.join("report.md");
    std::fs::write(&md_path, markdown)?;
    manifest.add(&md_path);
    println!("wrote {}", md_path.display());
    manifest.finish()?;
    Ok(RunOutcome::Complete)
}

/// Write a self-contained planted-corpus experiment directory: corpus plus a
/// ready-to-run config against the mock marker backend.
pub fn cmd_synth(
    out_dir: &Path,
    train: usize,
    validation: usize,
    test: usize,
    seed: u64,
) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let synth = SyntheticConfig {
        train,
        validation,
        test,
        seed,
    };
    let corpus = generate_planted_corpus(&synth)?;
    let corpus_path = out_dir.join("corpus.jsonl");
    write_corpus(&corpus_path, &corpus)?;

    let space = planted_space();
    let config = serde_json::json!({
        "space": {
            "name": space.name,
            "techniques": space
                .techniques
                .iter()
                .map(|t| serde_json::json!({"name": t.name, "variants": t.variants}))
                .collect::<Vec<_>>(),
        },
        "corpus": "corpus.jsonl",
        "categories": ["race", "gender", "profession", "religion"],
        "gateway": {
            "endpoint": "mock:marker",
            "model_id": "mock-marker",
            "backoff_base_ms": 0,
        },
        "seeds": [1, 2, 3],
        "train": {
            "dim": 1 << 16,
            "epochs": 40,
            "batch_size": 32,
            "learning_rate": 2.0,
            "seed": 0,
        },
        "artifacts_dir": "artifacts",
    });
    let config_path = out_dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
    println!(
        "wrote {} instances to {} and config to {}",
        corpus.len(),
        corpus_path.display(),
        config_path.display()
    );
    Ok(RunOutcome::Complete)
}
