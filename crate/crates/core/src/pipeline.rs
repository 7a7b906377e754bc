//! End-to-end assessment of a response: decompose it into atoms, make the
//! atoms standalone, retrieve evidence, extract relations, build the model
//! and read off per-atom posteriors.

use std::collections::BTreeMap;
use std::sync::Arc;

use factreason_pgm::{min_fill_order, ve_marginals, wmb_marginals, GraphicalModel, InferenceResult, WmbConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fanout::{try_map_bounded, DEFAULT_CONCURRENCY};
use crate::llm::LlmClient;
use crate::model_builder::{
    build_fr_model, dedup_contexts, AtomRecord, ContextRecord, FrVariant, RelationEdge, DEFAULT_ATOM_PRIOR,
};
use crate::prompts;
use crate::relations::{extract_pair_relation, PairKind, RelationModelConfig, Utterance};
use crate::retrieval::{retrieve, Retriever, RetrieverConfig, RetrieverSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub prompt: String,
    pub response: String,
}

/// The clients each stage talks to.
#[derive(Clone)]
pub struct Services {
    pub atomizer: LlmClient,
    pub reviser: LlmClient,
    pub evaluator: LlmClient,
    pub retriever: Arc<dyn Retriever>,
}

impl Services {
    /// Every stage uses the same model.
    pub fn shared(client: LlmClient, retriever: Arc<dyn Retriever>) -> Self {
        Self {
            atomizer: client.clone(),
            reviser: client.clone(),
            evaluator: client,
            retriever,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Exact elimination up to `exact_width_limit`, mini-buckets beyond.
    Auto,
    Exact,
    Wmb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub engine: Engine,
    pub i_bound: usize,
    pub iterations: usize,
    pub seed: u64,
    pub exact_width_limit: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        let wmb = WmbConfig::default();
        Self {
            engine: Engine::Auto,
            i_bound: wmb.i_bound,
            iterations: wmb.iterations,
            seed: wmb.seed,
            exact_width_limit: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: FrVariant,
    pub atom_prior: f64,
    /// Replaces every context's own prior when set.
    pub context_prior: Option<f64>,
    pub retriever: RetrieverConfig,
    pub relation: RelationModelConfig,
    pub inference: InferenceConfig,
    /// Upper bound on parallel work items within a stage.
    pub concurrency: usize,
}

impl PipelineConfig {
    pub fn new(variant: FrVariant, retriever: RetrieverConfig) -> Self {
        Self {
            variant,
            atom_prior: DEFAULT_ATOM_PRIOR,
            context_prior: None,
            retriever,
            relation: RelationModelConfig::default(),
            inference: InferenceConfig::default(),
            concurrency: DEFAULT_CONCURRENCY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        self.retriever.validate()?;
        self.relation.validate()?;
        if self.inference.i_bound < 1 {
            return Err(Error::InvalidArgument("i-bound must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::new(FrVariant::Fr2, RetrieverConfig::default_for(RetrieverSource::Wikipedia))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceSummary {
    pub engine: Engine,
    pub induced_width: usize,
    pub log_z: f64,
    pub log_z_upper: Option<f64>,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub atoms: Vec<AtomRecord>,
    pub contexts: Vec<ContextRecord>,
    pub edges: Vec<RelationEdge>,
    /// `(P(false), P(true))` per atom id.
    pub marginals: BTreeMap<String, (f64, f64)>,
    pub variant: FrVariant,
    pub inference: InferenceSummary,
}

impl AssessmentResult {
    pub fn p_true(&self, atom_id: &str) -> Option<f64> {
        self.marginals.get(atom_id).map(|m| m.1)
    }
}

/// Keeps the text of every reply line that starts with `- `.
pub fn parse_atoms(reply: &str) -> Vec<String> {
    reply
        .lines()
        .filter_map(|l| l.trim_start().strip_prefix("- "))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Decomposes a response into atoms named `a0`, `a1`, ...
pub fn atomize(client: &LlmClient, response: &str) -> Result<Vec<AtomRecord>> {
    if response.trim().is_empty() {
        return Err(Error::InvalidArgument("response is empty".into()));
    }
    let reply = client.chat(&prompts::atomizer(response))?;
    let texts = parse_atoms(&reply.text);
    if texts.is_empty() {
        return Err(Error::EmptyDecomposition);
    }
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| AtomRecord::new(format!("a{i}"), t))
        .collect()
}

/// Text between the first pair of `####` markers, if non-empty.
pub fn parse_revision(reply: &str) -> Option<String> {
    let start = reply.find("####")? + 4;
    let len = reply[start..].find("####")?;
    let inner = reply[start..start + len].trim();
    (!inner.is_empty()).then(|| inner.to_string())
}

/// Rewrites an atom to stand on its own. If the reply has no usable
/// revision the atom is returned unchanged with `revision_failed` set.
pub fn revise(client: &LlmClient, atom: &AtomRecord, enclosing_context: &str) -> Result<AtomRecord> {
    let reply = client.chat(&prompts::reviser(enclosing_context, &atom.text))?;
    let mut out = atom.clone();
    match parse_revision(&reply.text) {
        Some(text) if text != atom.text => {
            out.original_text = Some(std::mem::replace(&mut out.text, text));
        }
        Some(_) => {}
        None => {
            log::warn!("no revision found for atom {}; keeping it as is", atom.atom_id);
            out.revision_failed = true;
        }
    }
    Ok(out)
}

/// Atomizes a response and revises each atom against the full response.
pub fn prepare_atoms(record: &ResponseRecord, config: &PipelineConfig, services: &Services) -> Result<Vec<AtomRecord>> {
    let atoms = atomize(&services.atomizer, &record.response).map_err(|e| e.in_stage("atomize", &[&record.id]))?;
    try_map_bounded(&atoms, config.concurrency, |a| {
        revise(&services.reviser, a, &record.response).map_err(|e| e.in_stage("revise", &[&record.id, &a.atom_id]))
    })
}

/// Retrieves evidence for every atom; results are concatenated in atom
/// order.
pub fn gather_contexts(
    atoms: &[AtomRecord],
    config: &PipelineConfig,
    services: &Services,
) -> Result<Vec<ContextRecord>> {
    let per_atom = try_map_bounded(atoms, config.concurrency, |a| {
        retrieve(a, &config.retriever, services.retriever.as_ref()).map_err(|e| e.in_stage("retrieve", &[&a.atom_id]))
    })?;
    Ok(per_atom.into_iter().flatten().collect())
}

/// Which pairs get a relation judgment under `variant`, as
/// `(context index, atom index or context index, kind)`.
pub fn relation_pairs(
    atoms: &[AtomRecord],
    contexts: &[ContextRecord],
    variant: FrVariant,
) -> Vec<(usize, usize, PairKind)> {
    let mut pairs = Vec::new();
    for (ai, a) in atoms.iter().enumerate() {
        for (ci, c) in contexts.iter().enumerate() {
            let wanted = match variant {
                FrVariant::Fr1 { k_per_atom } => c.retrieved_for.get(&a.atom_id).is_some_and(|&r| r < k_per_atom),
                FrVariant::Fr2 | FrVariant::Fr3 => true,
            };
            if wanted {
                pairs.push((ci, ai, PairKind::ContextAtom));
            }
        }
    }
    if variant == FrVariant::Fr3 {
        for i in 0..contexts.len() {
            for j in i + 1..contexts.len() {
                pairs.push((i, j, PairKind::ContextContext));
            }
        }
    }
    pairs
}

/// Runs inference with the configured engine.
pub fn infer(model: &GraphicalModel, config: &InferenceConfig) -> Result<(InferenceResult, InferenceSummary)> {
    let order = min_fill_order(model);
    let width = order.induced_width();
    let engine = match config.engine {
        Engine::Auto if width <= config.exact_width_limit => Engine::Exact,
        Engine::Auto => Engine::Wmb,
        e => e,
    };
    let result = match engine {
        Engine::Exact => ve_marginals(model, &order)?,
        _ => wmb_marginals(
            model,
            &order,
            WmbConfig {
                i_bound: config.i_bound,
                iterations: config.iterations,
                seed: config.seed,
            },
        )?,
    };
    let summary = InferenceSummary {
        engine,
        induced_width: width,
        log_z: result.log_z,
        log_z_upper: result.log_z_upper,
        exact: result.exact,
    };
    Ok((result, summary))
}

/// Everything after retrieval: deduplication (FR2/FR3), relation
/// extraction, model construction and inference.
pub fn evaluate(
    atoms: Vec<AtomRecord>,
    contexts: Vec<ContextRecord>,
    config: &PipelineConfig,
    services: &Services,
) -> Result<AssessmentResult> {
    config.validate()?;
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("no atoms to assess".into()));
    }
    let contexts = if config.variant.dedups() {
        dedup_contexts(contexts)
    } else {
        contexts
    };
    let pairs = relation_pairs(&atoms, &contexts, config.variant);
    let found = try_map_bounded(&pairs, config.concurrency, |&(i, j, kind)| {
        let c = &contexts[i];
        let a = Utterance {
            id: &c.context_id,
            text: c.text(),
        };
        let b = match kind {
            PairKind::ContextAtom => Utterance {
                id: &atoms[j].atom_id,
                text: &atoms[j].text,
            },
            PairKind::ContextContext => Utterance {
                id: &contexts[j].context_id,
                text: contexts[j].text(),
            },
        };
        extract_pair_relation(&services.evaluator, &config.relation, a, b, kind)
            .map_err(|e| e.in_stage("relations", &[a.id, b.id]))
    })?;
    let edges: Vec<RelationEdge> = found.into_iter().flatten().collect();

    let built = build_fr_model(
        &atoms,
        &contexts,
        &edges,
        config.variant,
        config.atom_prior,
        config.context_prior,
    )
    .map_err(|e| e.in_stage("build", &[]))?;
    let (result, summary) = infer(&built.model, &config.inference).map_err(|e| e.in_stage("inference", &[]))?;
    let marginals = atoms
        .iter()
        .map(|a| {
            let [f, t] = result.marginals.get(built.bindings[&a.atom_id]);
            (a.atom_id.clone(), (f, t))
        })
        .collect();
    Ok(AssessmentResult {
        atoms,
        contexts,
        edges,
        marginals,
        variant: config.variant,
        inference: summary,
    })
}

/// Full pipeline for one response.
pub fn assess_response(
    record: &ResponseRecord,
    config: &PipelineConfig,
    services: &Services,
) -> Result<AssessmentResult> {
    config.validate()?;
    let atoms = prepare_atoms(record, config, services)?;
    let contexts = gather_contexts(&atoms, config, services)?;
    evaluate(atoms, contexts, config, services)
}
