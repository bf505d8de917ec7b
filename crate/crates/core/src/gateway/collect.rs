//! Cache-aware bulk collection of predictions over (instance, composition)
//! pairs with bounded concurrency. Prompts are rendered up front on the main
//! thread; workers only talk to the backend; the cache has a single writer.
//!
//! Only parseable predictions are cached, so a rerun retries past failures
//! and a fully warm cache issues zero upstream calls.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::cache::PredictionCache;
use crate::corpus::Instance;
use crate::error::{CoreError, Result};
use crate::matrix::PredictionRecord;
use crate::prompt::{
    render, select_demonstrations, DemonstrationConfig, DemonstrationStrategy, RenderedPrompt,
    TechniqueRole, TemplateSet, TfIdfScorer,
};
use crate::space::{decode, Choice, CompositionId, CompositionSpace};

use super::{classify, classify_with_reasoning, Backend, GatewayConfig};

pub struct CollectRequest<'a> {
    pub space: &'a CompositionSpace,
    pub composition_ids: &'a [CompositionId],
    pub instances: &'a [&'a Instance],
    /// Training pool for demonstration selection.
    pub demo_pool: &'a [&'a Instance],
    pub templates: &'a TemplateSet,
    pub categories: &'a [String],
    pub demo_config: &'a DemonstrationConfig,
    pub seed: u64,
    /// When false, any null prediction in the requested set is an error
    /// (already collected successes stay cached).
    pub allow_partial: bool,
}

#[derive(Debug)]
pub struct CollectOutcome {
    /// All requested records in (instance, composition id) order.
    pub records: Vec<PredictionRecord>,
    /// Backend calls issued by this run.
    pub upstream_calls: u64,
    /// Requested pairs answered from the cache.
    pub cache_hits: usize,
    /// Null-label records in the requested set.
    pub failures: usize,
}

fn strategy_for_variant(name: &str) -> Result<DemonstrationStrategy> {
    match name {
        "random" => Ok(DemonstrationStrategy::Random),
        "similarity" => Ok(DemonstrationStrategy::Similarity),
        "category" => Ok(DemonstrationStrategy::Category),
        other => Err(CoreError::Demonstration(format!(
            "no demonstration strategy for variant '{other}'"
        ))),
    }
}

struct Task {
    instance_index: usize,
    composition_id: CompositionId,
    instance_id: String,
    instance_label: u8,
    prompt: RenderedPrompt,
}

pub fn collect(
    request: &CollectRequest,
    config: &GatewayConfig,
    backend: &dyn Backend,
    cache: &mut PredictionCache,
) -> Result<CollectOutcome> {
    config.validate()?;
    let calls_before = backend.calls();

    let mut composition_ids = request.composition_ids.to_vec();
    composition_ids.sort_unstable();
    composition_ids.dedup();

    let scorer = TfIdfScorer;
    let mut cache_hits = 0usize;
    let mut tasks: Vec<Task> = Vec::new();

    for cid in &composition_ids {
        let composition = decode(*cid, request.space)?;

        // Resolve the demonstration strategy once per composition.
        let demo_strategy = request
            .space
            .techniques
            .iter()
            .find(|t| TechniqueRole::from_name(&t.name) == Some(TechniqueRole::Demonstrations))
            .and_then(|t| match composition.choice(t.id) {
                Choice::Absent => None,
                Choice::Present => Some(Ok(request.demo_config.strategy)),
                Choice::Variant(v) => Some(strategy_for_variant(&t.variants[v])),
            })
            .transpose()?;

        // Random and category selection do not depend on the instance.
        let mut shared_demos: Option<Vec<&Instance>> = None;
        if let Some(strategy) = demo_strategy {
            if strategy != DemonstrationStrategy::Similarity {
                let cfg = DemonstrationConfig {
                    strategy,
                    ..request.demo_config.clone()
                };
                shared_demos = Some(select_demonstrations(
                    &cfg,
                    request.instances.first().ok_or_else(|| {
                        CoreError::Gateway("collect called with no instances".into())
                    })?,
                    request.demo_pool,
                    &scorer,
                )?);
            }
        }

        for (instance_index, instance) in request.instances.iter().enumerate() {
            let key = (
                config.model_id.clone(),
                cid.0,
                instance.id.clone(),
                request.seed,
            );
            if cache.get(&key).is_some() {
                cache_hits += 1;
                continue;
            }
            let demos: Vec<&Instance> = match (&demo_strategy, &shared_demos) {
                (None, _) => Vec::new(),
                (Some(_), Some(shared)) => shared.clone(),
                (Some(strategy), None) => {
                    let cfg = DemonstrationConfig {
                        strategy: *strategy,
                        ..request.demo_config.clone()
                    };
                    select_demonstrations(&cfg, instance, request.demo_pool, &scorer)?
                }
            };
            let prompt = render(
                &composition,
                request.space,
                instance,
                request.templates,
                &demos,
                request.categories,
            )?;
            tasks.push(Task {
                instance_index,
                composition_id: *cid,
                instance_id: instance.id.clone(),
                instance_label: instance.label,
                prompt,
            });
        }
    }

    let mut fetched: Vec<(usize, u64, PredictionRecord)> = Vec::with_capacity(tasks.len());
    if !tasks.is_empty() {
        let next = AtomicUsize::new(0);
        let (sender, receiver) = mpsc::channel::<Result<(usize, u64, PredictionRecord)>>();
        let workers = config.max_in_flight.min(tasks.len());
        let tasks = &tasks;
        let seed = request.seed;
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let sender = sender.clone();
                let next = &next;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= tasks.len() {
                        break;
                    }
                    let task = &tasks[i];
                    let result = if task.prompt.reasoning_chain.is_empty() {
                        classify(
                            &task.prompt,
                            config,
                            backend,
                            &task.instance_id,
                            task.instance_label,
                            task.composition_id,
                            seed,
                        )
                    } else {
                        classify_with_reasoning(
                            &task.prompt,
                            config,
                            backend,
                            &task.instance_id,
                            task.instance_label,
                            task.composition_id,
                            seed,
                        )
                    };
                    let ok = result.is_ok();
                    let _ = sender.send(
                        result.map(|r| (task.instance_index, task.composition_id.0, r)),
                    );
                    if !ok {
                        break;
                    }
                });
            }
            drop(sender);
            for result in receiver {
                fetched.push(result?);
            }
            Ok::<(), CoreError>(())
        })?;
    }

    // Single serialized writer; checkpoint in a stable order.
    fetched.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut new_records: std::collections::HashMap<(usize, u64), PredictionRecord> =
        std::collections::HashMap::new();
    for (row, cid, record) in fetched {
        if record.predicted_label.is_some() {
            cache.put(record.clone())?;
        }
        new_records.insert((row, cid), record);
    }

    let mut records = Vec::with_capacity(request.instances.len() * composition_ids.len());
    let mut failures = 0usize;
    for (row, instance) in request.instances.iter().enumerate() {
        for cid in &composition_ids {
            let key = (
                config.model_id.clone(),
                cid.0,
                instance.id.clone(),
                request.seed,
            );
            let record = match new_records.get(&(row, cid.0)) {
                Some(r) => r.clone(),
                None => cache
                    .get(&key)
                    .ok_or_else(|| {
                        CoreError::Gateway(format!(
                            "no record collected for ({}, c{})",
                            instance.id, cid.0
                        ))
                    })?
                    .clone(),
            };
            if record.predicted_label.is_none() {
                failures += 1;
            }
            records.push(record);
        }
    }

    let outcome = CollectOutcome {
        records,
        upstream_calls: backend.calls() - calls_before,
        cache_hits,
        failures,
    };
    if outcome.failures > 0 && !request.allow_partial {
        return Err(CoreError::Gateway(format!(
            "{} of {} predictions failed; rerun to retry or allow partial output",
            outcome.failures,
            request.instances.len() * composition_ids.len()
        )));
    }
    Ok(outcome)
}
