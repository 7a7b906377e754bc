//! Runs one assessor over a dataset and aggregates the per-entry scores.

use std::collections::BTreeMap;
use std::fmt;

use factreason_core::baselines::{assess_atom, BaselineKind, BaselineVerdict};
use factreason_core::fanout::{map_bounded, try_map_bounded};
use factreason_core::metrics::{AtomVerdict, FactualityReport, Label};
use factreason_core::model_builder::{AtomRecord, ContextRecord, FrVariant, DEFAULT_CONTEXT_PRIOR};
use factreason_core::pipeline::{evaluate, gather_contexts, prepare_atoms, PipelineConfig, ResponseRecord, Services};
use factreason_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Assessor {
    Fr1,
    Fr2,
    Fr3,
    Fs,
    Fv,
    Vs,
    #[value(name = "deepseek")]
    DeepSeek,
}

impl Assessor {
    pub fn name(self) -> &'static str {
        match self {
            Assessor::Fr1 => "fr1",
            Assessor::Fr2 => "fr2",
            Assessor::Fr3 => "fr3",
            Assessor::Fs => "fs",
            Assessor::Fv => "fv",
            Assessor::Vs => "vs",
            Assessor::DeepSeek => "deepseek",
        }
    }

    /// The model variant, for the graphical-model assessors. FR1 keeps each
    /// atom's top `per_atom` contexts.
    pub fn variant(self, per_atom: usize) -> Option<FrVariant> {
        match self {
            Assessor::Fr1 => Some(FrVariant::Fr1 { k_per_atom: per_atom }),
            Assessor::Fr2 => Some(FrVariant::Fr2),
            Assessor::Fr3 => Some(FrVariant::Fr3),
            _ => None,
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Assessor::Fs => Some(BaselineKind::FactScore),
            Assessor::Fv => Some(BaselineKind::FactVerify),
            Assessor::Vs => Some(BaselineKind::VeriScore),
            Assessor::DeepSeek => Some(BaselineKind::DeepSeek),
            _ => None,
        }
    }
}

impl fmt::Display for Assessor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub assessor: Assessor,
    /// Dataset name used in reports.
    pub dataset: String,
    /// Supported-atom count at which recall saturates.
    pub k: usize,
    /// Retrieval, priors, relation model, inference and concurrency. The
    /// variant field is overwritten from `assessor`.
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn new(assessor: Assessor, dataset: impl Into<String>, k: usize, pipeline: PipelineConfig) -> Self {
        Self {
            assessor,
            dataset: dataset.into(),
            k,
            pipeline,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        self.effective_pipeline().validate()
    }

    fn effective_pipeline(&self) -> PipelineConfig {
        let mut p = self.pipeline.clone();
        if let Some(v) = self.assessor.variant(p.retriever.k) {
            p.variant = v;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub id: String,
    pub atoms: Vec<AtomRecord>,
    pub report: Option<FactualityReport>,
    /// Raw verdicts of a prompt-based assessor.
    pub baseline: Option<Vec<BaselineVerdict>>,
    /// For claim entries: whether the claim was labeled supported.
    pub correct: Option<bool>,
    pub error: Option<String>,
}

impl EntryResult {
    fn failed(id: &str, error: &Error) -> Self {
        Self {
            id: id.to_string(),
            atoms: Vec::new(),
            report: None,
            baseline: None,
            correct: None,
            error: Some(error.to_string()),
        }
    }
}

/// Means over the entries that completed. Counts are means too and are
/// only rounded when rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub entries: usize,
    pub failed: usize,
    pub failed_ids: Vec<String>,
    pub supported: f64,
    pub contradicted: f64,
    pub undecided: f64,
    pub precision: f64,
    pub f1_at_k: f64,
    /// Present when every completed entry has posteriors.
    pub e_measure: Option<f64>,
    pub mae: Option<f64>,
    pub brier: Option<f64>,
    /// Fraction of claims labeled supported, for claim datasets.
    pub accuracy: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl Aggregate {
    pub fn from_entries(entries: &[EntryResult]) -> Self {
        let reports: Vec<&FactualityReport> = entries.iter().filter_map(|e| e.report.as_ref()).collect();
        let collect = |f: &dyn Fn(&FactualityReport) -> Option<f64>| -> Vec<f64> {
            reports.iter().filter_map(|r| f(r)).collect()
        };
        let all_or_none = |f: &dyn Fn(&FactualityReport) -> Option<f64>| {
            let v = collect(f);
            if v.len() == reports.len() {
                mean(&v)
            } else {
                None
            }
        };
        let correct: Vec<f64> = entries
            .iter()
            .filter_map(|e| e.correct.map(|c| if c { 1.0 } else { 0.0 }))
            .collect();
        let failed_ids: Vec<String> = entries
            .iter()
            .filter(|e| e.error.is_some())
            .map(|e| e.id.clone())
            .collect();
        Self {
            entries: entries.len(),
            failed: failed_ids.len(),
            failed_ids,
            supported: mean(&collect(&|r| Some(r.supported as f64))).unwrap_or(0.0),
            contradicted: mean(&collect(&|r| Some(r.contradicted as f64))).unwrap_or(0.0),
            undecided: mean(&collect(&|r| Some(r.undecided as f64))).unwrap_or(0.0),
            precision: mean(&collect(&|r| Some(r.precision))).unwrap_or(0.0),
            f1_at_k: mean(&collect(&|r| Some(r.f1_at_k))).unwrap_or(0.0),
            e_measure: all_or_none(&|r| r.e_measure),
            mae: mean(&collect(&|r| r.abs_error)),
            brier: mean(&collect(&|r| r.brier)),
            accuracy: mean(&correct),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub assessor: String,
    pub dataset: String,
    pub k: usize,
    /// Sorted by entry id.
    pub entries: Vec<EntryResult>,
    pub aggregate: Aggregate,
}

/// Atoms, their evidence, and gold labels for one entry.
struct Prepared {
    atoms: Vec<AtomRecord>,
    contexts: Vec<ContextRecord>,
    gold: Option<Vec<bool>>,
    is_claim: bool,
}

fn prepare(entry: &DatasetEntry, pipeline: &PipelineConfig, services: &Services) -> Result<Prepared> {
    if let (Some(claim), Some(inline)) = (&entry.claim, &entry.inline_contexts) {
        let atom = AtomRecord::new("a0", claim.clone())?;
        let prior = pipeline.context_prior.unwrap_or(DEFAULT_CONTEXT_PRIOR);
        let contexts = inline
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut rec = ContextRecord::inline(format!("c{i}"), c.text.clone());
                rec.prior_true = prior;
                rec.retrieved_for = BTreeMap::from([(atom.atom_id.clone(), i)]);
                rec
            })
            .collect();
        return Ok(Prepared {
            atoms: vec![atom],
            contexts,
            gold: None,
            is_claim: true,
        });
    }
    let response = entry
        .response
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("entry `{}` has neither response nor claim", entry.id)))?;
    let (atoms, gold) = match &entry.gold_atoms {
        // labeled entries are scored on their annotated atoms
        Some(gold) => {
            let atoms = gold
                .iter()
                .enumerate()
                .map(|(i, g)| AtomRecord::new(format!("a{i}"), g.text.clone()))
                .collect::<Result<Vec<_>>>()?;
            (atoms, Some(gold.iter().map(|g| g.supported).collect()))
        }
        None => {
            let record = ResponseRecord {
                id: entry.id.clone(),
                prompt: entry.prompt.clone(),
                response: response.to_string(),
            };
            (prepare_atoms(&record, pipeline, services)?, None)
        }
    };
    let contexts = gather_contexts(&atoms, pipeline, services)?;
    Ok(Prepared {
        atoms,
        contexts,
        gold,
        is_claim: false,
    })
}

fn run_baseline(
    kind: BaselineKind,
    atoms: &[AtomRecord],
    contexts: &[ContextRecord],
    pipeline: &PipelineConfig,
    services: &Services,
) -> Result<Vec<BaselineVerdict>> {
    try_map_bounded(atoms, pipeline.concurrency, |atom| {
        let own: Vec<ContextRecord> = contexts
            .iter()
            .filter(|c| c.retrieved_for.contains_key(&atom.atom_id))
            .cloned()
            .collect();
        if own.is_empty() {
            return Ok(BaselineVerdict {
                atom_id: atom.atom_id.clone(),
                label: Label::Undecided,
                raw_reply: String::new(),
            });
        }
        assess_atom(kind, &services.evaluator, atom, &own)
    })
}

fn process_entry(
    entry: &DatasetEntry,
    config: &RunConfig,
    pipeline: &PipelineConfig,
    services: &Services,
) -> Result<EntryResult> {
    let Prepared {
        atoms,
        contexts,
        gold,
        is_claim,
    } = prepare(entry, pipeline, services)?;
    let (verdicts, baseline, atoms) = match config.assessor.baseline() {
        Some(kind) => {
            let b = run_baseline(kind, &atoms, &contexts, pipeline, services)?;
            let v = b
                .iter()
                .map(|b| AtomVerdict::from_label(b.atom_id.clone(), b.label))
                .collect();
            (v, Some(b), atoms)
        }
        None => {
            let res = evaluate(atoms, contexts, pipeline, services)?;
            let v = res
                .atoms
                .iter()
                .map(|a| AtomVerdict::from_posterior(a.atom_id.clone(), res.marginals[&a.atom_id].1))
                .collect();
            (v, None, res.atoms)
        }
    };
    let report = FactualityReport::new(verdicts, config.k, gold.as_deref())?;
    let correct = is_claim.then(|| report.verdicts[0].label == Label::Supported);
    Ok(EntryResult {
        id: entry.id.clone(),
        atoms,
        report: Some(report),
        baseline,
        correct,
        error: None,
    })
}

/// Runs the configured assessor over every entry. An entry that fails is
/// recorded with its error and the run goes on, except when the provider
/// reports an exhausted quota: then the run stops so it can be resumed
/// from the cache later.
pub fn run_experiment(entries: &[DatasetEntry], config: &RunConfig, services: &Services) -> Result<ExperimentReport> {
    config.validate()?;
    if entries.is_empty() {
        return Err(Error::InvalidArgument("no entries to assess".into()));
    }
    let pipeline = config.effective_pipeline();
    let outcomes = map_bounded(entries, pipeline.concurrency, |e| {
        process_entry(e, config, &pipeline, services)
    });
    let mut results = Vec::with_capacity(entries.len());
    for (entry, outcome) in entries.iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) if matches!(e.root(), Error::Quota(_)) => return Err(e),
            Err(e) => {
                log::warn!("entry {} failed: {e}", entry.id);
                results.push(EntryResult::failed(&entry.id, &e));
            }
        }
    }
    results.sort_by(|a, b| a.id.cmp(&b.id));
    let aggregate = Aggregate::from_entries(&results);
    Ok(ExperimentReport {
        assessor: config.assessor.name().to_string(),
        dataset: config.dataset.clone(),
        k: config.k,
        entries: results,
        aggregate,
    })
}
