//! Sample-level transformations: BFS extraction, negative sampling and
//! corruptions.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::seq::SliceRandom;
use rand::Rng;

use super::DatagenError;
use crate::dsl::Program;
use crate::kb::{
    from_triple, Group, IndividualId, LabeledQuery, Origin, Roster, SampleKb, Triple, TripleObject,
};
use crate::reasoner::{entails, Semantics};

/// Result of [`extract_bfs_subgraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsSample {
    pub sample: SampleKb,
    /// True if the start's connected component had fewer than `n` individuals.
    pub exhausted: bool,
}

/// Breadth-first search over the undirected relation graph of `dump`,
/// starting at `start`, until `n` individuals are discovered. The sample holds
/// every dump triple whose individuals were all discovered.
///
/// Neighbors are visited in an order shuffled by `rng`.
pub fn extract_bfs_subgraph<R: Rng + ?Sized>(
    dump: &SampleKb,
    start: IndividualId,
    n: usize,
    rng: &mut R,
) -> Result<BfsSample, DatagenError> {
    if dump.num_facts() == 0 {
        return Err(DatagenError::EmptyDump);
    }
    if !dump.roster.contains(start) || !dump.facts().any(|t| t.mentions(start)) {
        return Err(DatagenError::UnknownStart);
    }
    let mut adj: HashMap<IndividualId, Vec<IndividualId>> = HashMap::new();
    for t in dump.facts() {
        if let Some(o) = t.object_individual() {
            if o != t.subject {
                adj.entry(t.subject).or_default().push(o);
                adj.entry(o).or_default().push(t.subject);
            }
        }
    }
    let mut order = alloc::vec![start];
    let mut seen: BTreeSet<IndividualId> = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    'bfs: while let Some(u) = queue.pop_front() {
        let mut next: Vec<IndividualId> = adj.get(&u).cloned().unwrap_or_default();
        next.sort_unstable();
        next.dedup();
        next.shuffle(rng);
        for v in next {
            if order.len() >= n {
                break 'bfs;
            }
            if seen.insert(v) {
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    let exhausted = order.len() < n;
    let roster = Roster::from_names(order.iter().map(|&i| dump.roster.name(i)));
    let remap: HashMap<IndividualId, IndividualId> =
        order.iter().enumerate().map(|(k, &i)| (i, IndividualId(k as u32))).collect();
    let mut sample = SampleKb::new(roster);
    sample.provenance = dump.provenance.clone();
    for t in dump.facts() {
        let Some(&s) = remap.get(&t.subject) else { continue };
        let object = match t.object {
            TripleObject::Individual(o) => match remap.get(&o) {
                Some(&o) => TripleObject::Individual(o),
                None => continue,
            },
            c @ TripleObject::Class(_) => c,
        };
        sample
            .insert(Triple { subject: s, object, ..*t })
            .expect("remapped into roster");
    }
    Ok(BfsSample { sample, exhausted })
}

// Attempts allowed per requested negative before giving up on it.
const RETRY_BUDGET: usize = 100;

/// Corrupts each positive relation query up to `ratio` times by replacing its
/// subject or object (fair coin) with a uniformly drawn individual. Candidates
/// for which `is_true` holds, or that were already drawn, are rejected.
pub fn sample_negatives<R: Rng + ?Sized>(
    sample: &SampleKb,
    positives: &[LabeledQuery],
    ratio: usize,
    is_true: impl Fn(&Triple) -> bool,
    rng: &mut R,
) -> Vec<LabeledQuery> {
    let n = sample.roster.len() as u32;
    let mut out = Vec::new();
    let mut drawn = BTreeSet::new();
    if n == 0 {
        return out;
    }
    for q in positives.iter().filter(|q| q.label && q.group == Group::Relation) {
        for _ in 0..ratio {
            for _ in 0..RETRY_BUDGET {
                let mut t = q.triple.positive_form();
                let x = IndividualId(rng.random_range(0..n));
                if rng.random_bool(0.5) {
                    t.subject = x;
                } else {
                    t.object = TripleObject::Individual(x);
                }
                if !is_true(&t) && drawn.insert(t) {
                    out.push(LabeledQuery {
                        triple: t,
                        label: false,
                        origin: Origin::Inferable,
                        group: Group::Relation,
                    });
                    break;
                }
            }
        }
    }
    out
}

/// Removes one fact, chosen uniformly among the facts that the ontology cannot
/// re-derive from the remaining ones.
pub fn corrupt_missing<R: Rng + ?Sized>(
    program: &Program,
    sample: &SampleKb,
    rng: &mut R,
) -> Result<(SampleKb, Triple), DatagenError> {
    if sample.num_facts() == 0 {
        return Err(DatagenError::EmptySample);
    }
    let mut facts: Vec<Triple> = sample.facts().copied().collect();
    facts.shuffle(rng);
    for f in facts {
        let mut reduced = sample.clone();
        reduced.remove(&f);
        let lit = from_triple(&f, &program.vocabulary).map_err(|_| DatagenError::EmptySample)?;
        let derivable = entails(program, &reduced, &lit, Semantics::Plain)
            .map(|v| v.entailed)
            .unwrap_or(false);
        if !derivable {
            return Ok((reduced, f));
        }
    }
    Err(DatagenError::NoRemovableFact)
}

/// Adds the negation of a uniformly chosen fact and marks the copy as
/// inconsistent by construction.
pub fn corrupt_conflict<R: Rng + ?Sized>(
    sample: &SampleKb,
    rng: &mut R,
) -> Result<(SampleKb, Triple), DatagenError> {
    let n = sample.num_facts();
    if n == 0 {
        return Err(DatagenError::EmptySample);
    }
    let f = *sample.facts().nth(rng.random_range(0..n)).expect("index in range");
    let mut out = sample.clone();
    out.insert(f.negation()).expect("same individuals");
    out.inconsistent_by_construction = true;
    Ok((out, f))
}
