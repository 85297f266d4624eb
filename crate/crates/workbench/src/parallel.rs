//! Sample-level parallelism with results returned in input order.

use std::thread;

use rrn_core::datagen::LabeledSample;
use rrn_core::dsl::Program;
use rrn_core::harness::{corruption_outcome, score_sample, scored_loss, CorruptionMode, CorruptionReport};
use rrn_core::kb::Vocabulary;
use rrn_core::metrics::{MetricsReport, Scored};
use rrn_core::rrn::{Rrn, RrnError};

use crate::Result;

/// Applies `f` to every item using up to `jobs` threads. Items are split into
/// contiguous chunks and results are concatenated in input order, so the
/// output does not depend on `jobs`.
pub fn par_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(j, x)| f(c * chunk + j, x))
                        .collect::<Vec<U>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Scores every sample; sample `i` is encoded with stream `(seed, i)` no
/// matter how many jobs run.
pub fn score_split(model: &Rrn<f32>, samples: &[LabeledSample], seed: u64, jobs: usize) -> Result<Vec<Scored>, RrnError> {
    let per_sample = par_map(samples, jobs, |i, s| score_sample(model, s, seed, i));
    let mut out = Vec::new();
    for scored in per_sample {
        out.extend(scored?);
    }
    Ok(out)
}

pub fn evaluate(model: &Rrn<f32>, samples: &[LabeledSample], vocab: &Vocabulary, seed: u64, jobs: usize) -> Result<MetricsReport> {
    Ok(MetricsReport::from_scored(&score_split(model, samples, seed, jobs)?, vocab))
}

/// Mean cross-entropy over all labeled queries, summed in sample order.
pub fn mean_loss(model: &Rrn<f32>, samples: &[LabeledSample], seed: u64, jobs: usize) -> Result<f64, RrnError> {
    let scored = score_split(model, samples, seed, jobs)?;
    let sum: f64 = scored.iter().map(scored_loss).sum();
    Ok(if scored.is_empty() { 0.0 } else { sum / scored.len() as f64 })
}

pub fn corruption_experiment(
    model: &Rrn<f32>,
    program: &Program,
    samples: &[LabeledSample],
    mode: CorruptionMode,
    seed: u64,
    jobs: usize,
) -> Result<CorruptionReport> {
    let outcomes = par_map(samples, jobs, |i, s| corruption_outcome(model, program, s, mode, seed, i))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorruptionReport::assemble(mode, &outcomes, &program.vocabulary))
}
