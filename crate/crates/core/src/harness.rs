//! Training loop, evaluation and the robustness experiments.
//!
//! All randomness is drawn from streams derived from a seed and a position
//! (epoch, sample index), so every function here is deterministic and
//! evaluation does not depend on how samples are distributed over threads.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::sampling::{corrupt_conflict, corrupt_missing, sample_negatives};
use crate::datagen::{stream_rng, DatagenError, LabeledSample};
use crate::dsl::Program;
use crate::kb::{Group, LabeledQuery, Origin, SampleKb, Triple, TripleObject, TriplePredicate, Vocabulary};
use crate::metrics::{MetricsReport, Scored};
use crate::rrn::{
    encode, loss_and_gradients, optimizer_step, probabilities, AdamState, Embeddings, RrnError, Rrn,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Rrn(#[from] RrnError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error("training split is empty")]
    EmptyTrainingSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without improvement of the monitored eval score before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Train on every labeled query instead of positives plus sampled
    /// negatives; meant for small toy datasets.
    pub full_universe: bool,
    #[serde(default)]
    pub monitor: Monitor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, patience: 5, seed: 0, full_universe: false, monitor: Monitor::Loss }
    }
}

/// The eval quantity that early stopping and best-model selection follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monitor {
    /// Mean eval BCE.
    #[default]
    Loss,
    /// Micro F1 of the inferable relation queries. While it is zero or
    /// undefined the eval loss decides.
    F1,
}

impl Monitor {
    /// Score to minimize.
    pub fn score(self, loss: f64, inferable_f1: Option<f64>) -> f64 {
        match (self, inferable_f1) {
            (Monitor::Loss, _) => loss,
            (Monitor::F1, Some(f)) if f > 0.0 => 1.0 - f,
            (Monitor::F1, _) => 1.0 + loss,
        }
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Rrn<f32>,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: u64,
    pub best_eval_score: Option<f64>,
    pub best_params: Vec<f32>,
    pub epochs_since_best: usize,
}

impl TrainState {
    pub fn new(model: Rrn<f32>) -> Self {
        let n = model.params.len();
        Self {
            best_params: model.params.clone(),
            model,
            adam: AdamState::new(n),
            epoch: 0,
            best_eval_score: None,
            epochs_since_best: 0,
        }
    }

    /// The model with the best parameters seen so far.
    pub fn best_model(&self) -> Rrn<f32> {
        let mut m = self.model.clone();
        m.params.clone_from(&self.best_params);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u64,
    pub train_loss: f64,
    pub eval_score: Option<f64>,
    pub improved: bool,
}

/// The query set for one training step: every positive, every class query,
/// every specified query and `ratio` corrupted negatives per positive
/// relation query (or the whole labeled universe when `full`).
pub fn training_queries<R: Rng + ?Sized>(
    sample: &LabeledSample,
    ratio: usize,
    full: bool,
    rng: &mut R,
) -> Vec<LabeledQuery> {
    if full {
        return sample.queries.clone();
    }
    let mut out: Vec<LabeledQuery> = sample
        .queries
        .iter()
        .filter(|q| q.label || q.group == Group::Class || q.origin == Origin::Specified)
        .copied()
        .collect();
    let truth: HashSet<Triple> = sample.queries.iter().filter(|q| q.label).map(|q| q.triple).collect();
    let chosen: HashSet<Triple> = out.iter().map(|q| q.triple).collect();
    let negatives = sample_negatives(&sample.kb, &sample.queries, ratio, |t| truth.contains(t), rng);
    out.extend(negatives.into_iter().filter(|q| !chosen.contains(&q.triple)));
    out
}

/// One epoch over `train` in a shuffled order, one optimizer step per sample.
/// Returns the mean training loss.
pub fn train_epoch(state: &mut TrainState, train: &[LabeledSample], cfg: &TrainConfig) -> Result<f64, HarnessError> {
    if train.is_empty() {
        return Err(HarnessError::EmptyTrainingSplit);
    }
    let mut rng = stream_rng(cfg.seed, 2 * state.epoch);
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);
    let mut total = 0.0;
    for i in order {
        let queries = training_queries(&train[i], state.model.hp.negative_ratio, cfg.full_universe, &mut rng);
        let (loss, mut grads) = loss_and_gradients(&state.model, &train[i].kb, &queries, &mut rng)?;
        optimizer_step(&mut state.adam, &mut state.model, &mut grads)?;
        total += loss as f64;
    }
    state.epoch += 1;
    Ok(total / train.len() as f64)
}

/// Trains until `cfg.epochs` epochs are complete or the score reported by
/// `eval_score` (lower is better) has not improved for `cfg.patience` epochs.
/// When `eval_score` returns `None` the latest parameters always count as the
/// best.
pub fn fit(
    state: &mut TrainState,
    train: &[LabeledSample],
    cfg: &TrainConfig,
    mut eval_score: impl FnMut(&Rrn<f32>) -> Result<Option<f64>, RrnError>,
    mut on_epoch: impl FnMut(&EpochLog, &TrainState),
) -> Result<(), HarnessError> {
    while (state.epoch as usize) < cfg.epochs && state.epochs_since_best < cfg.patience.max(1) {
        let train_loss = train_epoch(state, train, cfg)?;
        let eval_score = eval_score(&state.model)?;
        let improved = match (eval_score, state.best_eval_score) {
            (Some(l), Some(best)) => l < best,
            _ => true,
        };
        if improved {
            state.best_eval_score = eval_score;
            state.best_params.clone_from(&state.model.params);
            state.epochs_since_best = 0;
        } else {
            state.epochs_since_best += 1;
        }
        on_epoch(&EpochLog { epoch: state.epoch, train_loss, eval_score, improved }, state);
    }
    Ok(())
}

/// Encodes sample `index` of a split with the stream `(seed, index)`.
pub fn encode_indexed(model: &Rrn<f32>, kb: &SampleKb, seed: u64, index: usize) -> Result<Embeddings<f32>, RrnError> {
    encode(model, kb, &mut stream_rng(seed, index as u64))
}

/// Model probabilities for every labeled query of a sample.
pub fn score_sample(model: &Rrn<f32>, sample: &LabeledSample, seed: u64, index: usize) -> Result<Vec<Scored>, RrnError> {
    let e = encode_indexed(model, &sample.kb, seed, index)?;
    score_queries(model, &e, &sample.queries)
}

fn score_queries(model: &Rrn<f32>, e: &Embeddings<f32>, queries: &[LabeledQuery]) -> Result<Vec<Scored>, RrnError> {
    let triples: Vec<Triple> = queries.iter().map(|q| q.triple).collect();
    let probs = probabilities(model, e, &triples)?;
    Ok(queries
        .iter()
        .zip(probs)
        .map(|(q, p)| Scored { triple: q.triple, label: q.label, origin: q.origin, group: q.group, prob: p as f64 })
        .collect())
}

/// Binary cross-entropy of one scored query, with the probability clamped away
/// from 0 and 1.
pub fn scored_loss(s: &Scored) -> f64 {
    let p = s.prob.clamp(1e-7, 1.0 - 1e-7);
    if s.label {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    }
}

/// Mean cross-entropy over every labeled query of `samples`.
pub fn mean_loss(model: &Rrn<f32>, samples: &[LabeledSample], seed: u64) -> Result<f64, RrnError> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, s) in samples.iter().enumerate() {
        for q in score_sample(model, s, seed, i)? {
            sum += scored_loss(&q);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

pub fn evaluate(model: &Rrn<f32>, samples: &[LabeledSample], vocab: &Vocabulary, seed: u64) -> Result<MetricsReport, RrnError> {
    let mut all = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        all.extend(score_sample(model, s, seed, i)?);
    }
    Ok(MetricsReport::from_scored(&all, vocab))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMode {
    Missing,
    Conflict,
}

/// Outcome of a corruption experiment. For missing facts a hit is a removed
/// fact that the model still predicts true; for conflicts a hit is an
/// original fact that keeps probability at least 0.5 next to its negation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionReport {
    pub mode: CorruptionMode,
    pub hits: u64,
    pub support: u64,
    pub rate: Option<f64>,
    pub baseline: MetricsReport,
    pub corrupted: MetricsReport,
    /// Corrupted minus baseline total accuracy.
    pub accuracy_delta: Option<f64>,
}

// Offset separating corruption streams from encoding streams.
const CORRUPTION_STREAM: u64 = 1 << 62;

/// Scores of one sample before and after its corruption.
#[derive(Debug, Clone)]
pub struct CorruptionOutcome {
    pub baseline: Vec<Scored>,
    pub corrupted: Vec<Scored>,
    /// The removed or contradicted fact.
    pub fact: Triple,
    pub hit: bool,
}

/// Corrupts sample `index` (on a copy), re-encodes it and scores its original
/// labels.
pub fn corruption_outcome(
    model: &Rrn<f32>,
    program: &Program,
    sample: &LabeledSample,
    mode: CorruptionMode,
    seed: u64,
    index: usize,
) -> Result<CorruptionOutcome, HarnessError> {
    let mut rng = stream_rng(seed, CORRUPTION_STREAM + index as u64);
    let (kb, fact) = match mode {
        CorruptionMode::Missing => corrupt_missing(program, &sample.kb, &mut rng)?,
        CorruptionMode::Conflict => corrupt_conflict(&sample.kb, &mut rng)?,
    };
    let baseline = score_sample(model, sample, seed, index)?;
    let e = encode_indexed(model, &kb, seed, index)?;
    let corrupted = score_queries(model, &e, &sample.queries)?;
    let p = probabilities(model, &e, core::slice::from_ref(&fact))?[0];
    Ok(CorruptionOutcome { baseline, corrupted, fact, hit: p >= 0.5 })
}

impl CorruptionReport {
    pub fn assemble(mode: CorruptionMode, outcomes: &[CorruptionOutcome], vocab: &Vocabulary) -> Self {
        let base: Vec<Scored> = outcomes.iter().flat_map(|o| o.baseline.iter().copied()).collect();
        let bad: Vec<Scored> = outcomes.iter().flat_map(|o| o.corrupted.iter().copied()).collect();
        let baseline = MetricsReport::from_scored(&base, vocab);
        let corrupted = MetricsReport::from_scored(&bad, vocab);
        let hits = outcomes.iter().filter(|o| o.hit).count() as u64;
        let support = outcomes.len() as u64;
        let accuracy_delta = match (corrupted.total.accuracy, baseline.total.accuracy) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        Self {
            mode,
            hits,
            support,
            rate: (support > 0).then(|| hits as f64 / support as f64),
            baseline,
            corrupted,
            accuracy_delta,
        }
    }
}

/// Runs a corruption experiment over a split. Stored samples are not modified.
pub fn run_corruption_experiment(
    model: &Rrn<f32>,
    program: &Program,
    samples: &[LabeledSample],
    mode: CorruptionMode,
    seed: u64,
) -> Result<CorruptionReport, HarnessError> {
    let outcomes = samples
        .iter()
        .enumerate()
        .map(|(i, s)| corruption_outcome(model, program, s, mode, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorruptionReport::assemble(mode, &outcomes, &program.vocabulary))
}

pub fn run_missing_fact_experiment(
    model: &Rrn<f32>,
    program: &Program,
    samples: &[LabeledSample],
    seed: u64,
) -> Result<CorruptionReport, HarnessError> {
    run_corruption_experiment(model, program, samples, CorruptionMode::Missing, seed)
}

pub fn run_conflict_experiment(
    model: &Rrn<f32>,
    program: &Program,
    samples: &[LabeledSample],
    seed: u64,
) -> Result<CorruptionReport, HarnessError> {
    run_corruption_experiment(model, program, samples, CorruptionMode::Conflict, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub individual: String,
    /// Classes the individual belongs to according to the sample's labels.
    pub classes: Vec<String>,
    pub values: Vec<f32>,
}

/// One row per individual of sample `index`: its true classes and its final
/// embedding.
pub fn export_embeddings(
    model: &Rrn<f32>,
    sample: &LabeledSample,
    vocab: &Vocabulary,
    seed: u64,
    index: usize,
) -> Result<Vec<EmbeddingRow>, RrnError> {
    let e = encode_indexed(model, &sample.kb, seed, index)?;
    let mut classes: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for q in sample.queries.iter().filter(|q| q.label && q.group == Group::Class) {
        if let (TriplePredicate::Member, TripleObject::Class(c)) = (q.triple.predicate, q.triple.object) {
            classes.entry(q.triple.subject.index()).or_default().push(vocab.class_name(c).into());
        }
    }
    Ok(sample
        .kb
        .roster
        .ids()
        .map(|i| EmbeddingRow {
            individual: sample.kb.roster.name(i).into(),
            classes: classes.remove(&i.index()).unwrap_or_default(),
            values: e.row(i.index()).to_vec(),
        })
        .collect())
}
