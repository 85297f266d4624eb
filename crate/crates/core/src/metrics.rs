//! Per-predicate evaluation metrics grouped into four blocks: specified and
//! inferable queries, each split into class and relation queries.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::kb::{Group, Origin, Triple, TripleObject, TriplePredicate, Vocabulary};

/// A labeled query with the model's probability that it holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub triple: Triple,
    pub label: bool,
    pub origin: Origin,
    pub group: Group,
    pub prob: f64,
}

impl Scored {
    pub fn predicted(&self) -> bool {
        self.prob >= 0.5
    }
}

/// Confusion counts; the positive class is "true".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn add(&mut self, label: bool, predicted: bool) {
        match (label, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2tp / (2tp + fp + fn)`, the harmonic mean of precision and recall.
    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Average precision of a ranking: the mean, over positives, of the precision
/// at each positive's rank. Ties keep input order. `None` without positives.
pub fn average_precision(scores: &[(f64, bool)]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0));
    let (mut hits, mut sum) = (0u64, 0.0);
    for (rank, &i) in idx.iter().enumerate() {
        if scores[i].1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auc_pr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub positives: u64,
    pub negatives: u64,
}

impl Summary {
    fn from_counts(c: &Counts, auc_pr: Option<f64>) -> Self {
        Self {
            auc_pr,
            precision: c.precision(),
            recall: c.recall(),
            accuracy: c.accuracy(),
            f1: c.f1(),
            positives: c.positives(),
            negatives: c.negatives(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateRow {
    pub predicate: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub rows: Vec<PredicateRow>,
    /// Pooled over all queries of the block.
    pub micro: Summary,
    /// Unweighted mean of the defined per-predicate values.
    #[serde(rename = "macro")]
    pub macro_: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub blocks: Vec<Block>,
    /// Pooled over every evaluated query.
    pub total: Summary,
    pub queries: u64,
}

pub const BLOCKS: [(Origin, Group, &str); 4] = [
    (Origin::Specified, Group::Class, "specified classes"),
    (Origin::Inferable, Group::Class, "inferable classes"),
    (Origin::Specified, Group::Relation, "specified relations"),
    (Origin::Inferable, Group::Relation, "inferable relations"),
];

fn predicate_name(t: &Triple, vocab: &Vocabulary) -> String {
    match (t.predicate, t.object) {
        (TriplePredicate::Member, TripleObject::Class(c)) => vocab.class_name(c).to_string(),
        (TriplePredicate::Relation(r), _) => vocab.relation_name(r).to_string(),
        _ => "?".to_string(),
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricsReport {
    /// Aggregates scored queries. Rows within a block follow vocabulary order.
    pub fn from_scored(scored: &[Scored], vocab: &Vocabulary) -> Self {
        let order: BTreeMap<String, usize> = vocab
            .classes()
            .iter()
            .chain(vocab.relations())
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut total = Counts::default();
        let mut all: Vec<(f64, bool)> = Vec::with_capacity(scored.len());
        let mut blocks = Vec::new();
        for (origin, group, name) in BLOCKS {
            let mut per: BTreeMap<usize, (String, Counts, Vec<(f64, bool)>)> = BTreeMap::new();
            let mut counts = Counts::default();
            let mut ranked = Vec::new();
            for s in scored.iter().filter(|s| s.origin == origin && s.group == group) {
                let pname = predicate_name(&s.triple, vocab);
                let key = order.get(&pname).copied().unwrap_or(usize::MAX);
                let e = per.entry(key).or_insert_with(|| (pname, Counts::default(), Vec::new()));
                e.1.add(s.label, s.predicted());
                e.2.push((s.prob, s.label));
                counts.add(s.label, s.predicted());
                ranked.push((s.prob, s.label));
            }
            let rows: Vec<PredicateRow> = per
                .into_values()
                .map(|(predicate, c, r)| PredicateRow {
                    predicate,
                    summary: Summary::from_counts(&c, average_precision(&r)),
                })
                .collect();
            let macro_ = Summary {
                auc_pr: mean(rows.iter().map(|r| r.summary.auc_pr)),
                precision: mean(rows.iter().map(|r| r.summary.precision)),
                recall: mean(rows.iter().map(|r| r.summary.recall)),
                accuracy: mean(rows.iter().map(|r| r.summary.accuracy)),
                f1: mean(rows.iter().map(|r| r.summary.f1)),
                positives: counts.positives(),
                negatives: counts.negatives(),
            };
            total.merge(&counts);
            all.extend_from_slice(&ranked);
            blocks.push(Block {
                name: name.to_string(),
                micro: Summary::from_counts(&counts, average_precision(&ranked)),
                macro_,
                rows,
            });
        }
        Self {
            blocks,
            total: Summary::from_counts(&total, average_precision(&all)),
            queries: scored.len() as u64,
        }
    }

    pub fn block(&self, origin: Origin, group: Group) -> &Block {
        let i = BLOCKS.iter().position(|b| b.0 == origin && b.1 == group).expect("all blocks listed");
        &self.blocks[i]
    }

    /// One table per block: predicate, AUC-PR, precision, recall, accuracy,
    /// F1, positive/negative support.
    pub fn to_markdown(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
        }
        fn line(out: &mut String, name: &str, s: &Summary) {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {} | {} | {} | {} / {} |",
                cell(s.auc_pr),
                cell(s.precision),
                cell(s.recall),
                cell(s.accuracy),
                cell(s.f1),
                s.positives,
                s.negatives
            );
        }
        let mut out = String::new();
        for b in &self.blocks {
            let mut title = b.name.clone();
            if let Some(first) = title.get_mut(0..1) {
                first.make_ascii_uppercase();
            }
            let _ = writeln!(out, "### {title}\n");
            out.push_str("| predicate | AUC-PR | precision | recall | accuracy | F1 | pos / neg |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            for r in &b.rows {
                line(&mut out, &r.predicate, &r.summary);
            }
            line(&mut out, "**micro**", &b.micro);
            line(&mut out, "**macro**", &b.macro_);
            out.push('\n');
        }
        let _ = writeln!(out, "### Total\n");
        out.push_str("| queries | AUC-PR | precision | recall | accuracy | F1 | pos / neg |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        line(&mut out, &format!("{}", self.queries), &self.total);
        out
    }
}
