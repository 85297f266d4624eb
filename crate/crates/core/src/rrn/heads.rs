//! Query perceptrons and the training loss.
//!
//! Relation query `⟨s,R,o⟩`: `σ(w2ᵀ relu(W1s e_s + W1o e_o + b1) + b2)` with
//! per-relation weights. Class query `⟨i,member,C⟩`: a hidden layer
//! `relu(Wh e_i + bh)` shared by all classes and one output unit per class.
//! A negated query gets `1 - p` of its positive form.

use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::Rng;

use super::encode::{draw_schedule, encode_taped};
use super::linalg::{add_acc, gemv_acc, gemv_t_acc, outer_acc, sigmoid, softplus};
use super::{init_embeddings, Embeddings, RrnError, Rrn, Scalar};
use crate::kb::{LabeledQuery, SampleKb, Triple, TripleObject, TriplePredicate};

enum Query {
    Relation { r: usize, s: usize, o: usize },
    Class { c: usize, i: usize },
}

/// Lazily computed per-individual projections of the head inputs.
struct HeadCache<F> {
    subj: HashMap<(usize, usize), Vec<F>>,
    obj: HashMap<(usize, usize), Vec<F>>,
    class_hidden: HashMap<usize, Vec<F>>,
}

impl<F: Scalar> Rrn<F> {
    fn query(&self, t: &Triple, n: usize) -> Result<Query, RrnError> {
        let s = t.subject.index();
        if s >= n {
            return Err(RrnError::UnknownIndividual(t.subject.0));
        }
        match (t.predicate, t.object) {
            (TriplePredicate::Relation(r), TripleObject::Individual(o)) if r.index() < self.num_relations => {
                if o.index() >= n {
                    return Err(RrnError::UnknownIndividual(o.0));
                }
                Ok(Query::Relation { r: r.index(), s, o: o.index() })
            }
            (TriplePredicate::Member, TripleObject::Class(c)) if c.index() < self.num_classes => {
                Ok(Query::Class { c: c.index(), i: s })
            }
            _ => Err(RrnError::UnknownPredicate),
        }
    }

    fn new_cache(&self) -> HeadCache<F> {
        HeadCache { subj: HashMap::new(), obj: HashMap::new(), class_hidden: HashMap::new() }
    }

    fn subj_proj<'a>(&self, cache: &'a mut HeadCache<F>, e: &Embeddings<F>, r: usize, s: usize) -> &'a [F] {
        let (d, h) = (self.hp.dim, self.hp.hidden);
        let head = self.rel_heads[r];
        cache.subj.entry((r, s)).or_insert_with(|| {
            let mut a = self.slice(head.b1, h).to_vec();
            gemv_acc(&mut a, self.slice(head.w1s, h * d), d, e.row(s));
            a
        })
    }

    fn obj_proj<'a>(&self, cache: &'a mut HeadCache<F>, e: &Embeddings<F>, r: usize, o: usize) -> &'a [F] {
        let (d, h) = (self.hp.dim, self.hp.hidden);
        let head = self.rel_heads[r];
        cache.obj.entry((r, o)).or_insert_with(|| {
            let mut a = alloc::vec![F::zero(); h];
            gemv_acc(&mut a, self.slice(head.w1o, h * d), d, e.row(o));
            a
        })
    }

    /// Pre-activation of the shared class hidden layer.
    fn class_pre<'a>(&self, cache: &'a mut HeadCache<F>, e: &Embeddings<F>, i: usize) -> &'a [F] {
        let (d, h) = (self.hp.dim, self.hp.hidden);
        let ch = self.class_head;
        cache.class_hidden.entry(i).or_insert_with(|| {
            let mut a = self.slice(ch.bh, h).to_vec();
            gemv_acc(&mut a, self.slice(ch.wh, h * d), d, e.row(i));
            a
        })
    }

    /// Logit of the positive form of `q`; also returns the hidden
    /// pre-activation for the backward pass.
    fn logit(&self, cache: &mut HeadCache<F>, e: &Embeddings<F>, q: &Query) -> (F, Vec<F>) {
        let h = self.hp.hidden;
        match *q {
            Query::Relation { r, s, o } => {
                let head = self.rel_heads[r];
                let mut a = self.subj_proj(cache, e, r, s).to_vec();
                add_acc(&mut a, self.obj_proj(cache, e, r, o));
                let w2 = self.slice(head.w2, h);
                let z = a.iter().zip(w2).fold(self.params[head.b2], |acc, (&v, &w)| acc + v.max(F::zero()) * w);
                (z, a)
            }
            Query::Class { c, i } => {
                let out = self.class_outs[c];
                let a = self.class_pre(cache, e, i).to_vec();
                let w = self.slice(out.w, h);
                let z = a.iter().zip(w).fold(self.params[out.b], |acc, (&v, &w)| acc + v.max(F::zero()) * w);
                (z, a)
            }
        }
    }
}

/// Logits of the positive forms of `queries` (negation flags are ignored).
pub fn query_logits<F: Scalar>(model: &Rrn<F>, e: &Embeddings<F>, queries: &[Triple]) -> Result<Vec<F>, RrnError> {
    let mut cache = model.new_cache();
    queries
        .iter()
        .map(|t| {
            let q = model.query(t, e.len())?;
            Ok(model.logit(&mut cache, e, &q).0)
        })
        .collect()
}

/// Probability that each query holds; negated queries get `1 - p`.
pub fn probabilities<F: Scalar>(model: &Rrn<F>, e: &Embeddings<F>, queries: &[Triple]) -> Result<Vec<F>, RrnError> {
    let logits = query_logits(model, e, queries)?;
    Ok(queries
        .iter()
        .zip(logits)
        .map(|(t, z)| {
            let p = sigmoid(z);
            if t.negated {
                F::one() - p
            } else {
                p
            }
        })
        .collect())
}

pub fn predict<F: Scalar>(model: &Rrn<F>, e: &Embeddings<F>, q: &Triple) -> Result<F, RrnError> {
    Ok(probabilities(model, e, core::slice::from_ref(q))?[0])
}

/// Mean binary cross-entropy over `queries` and its gradient with respect to
/// every parameter, for an explicit initial embedding matrix and schedule.
pub fn loss_and_gradients_with<F: Scalar>(
    model: &Rrn<F>,
    facts: &[Triple],
    init: Embeddings<F>,
    schedule: &[Vec<usize>],
    queries: &[LabeledQuery],
) -> Result<(F, Vec<F>), RrnError> {
    if queries.is_empty() {
        return Err(RrnError::EmptyQuerySet);
    }
    let (d, h) = (model.hp.dim, model.hp.hidden);
    let (e, tape) = encode_taped(model, facts, init, schedule)?;
    let n = e.len();
    let inv = F::one() / F::of(queries.len() as f64);
    let mut g = alloc::vec![F::zero(); model.params.len()];
    let mut cache = model.new_cache();
    // summed hidden-layer gradients, keyed like the cache
    let mut acc_s: HashMap<(usize, usize), Vec<F>> = HashMap::new();
    let mut acc_o: HashMap<(usize, usize), Vec<F>> = HashMap::new();
    let mut acc_c: HashMap<usize, Vec<F>> = HashMap::new();
    let mut loss = F::zero();
    for lq in queries {
        let q = model.query(&lq.triple, n)?;
        let label = lq.label != lq.triple.negated;
        let (z, a) = model.logit(&mut cache, &e, &q);
        let y = if label { F::one() } else { F::zero() };
        loss += softplus(z) - y * z;
        let dz = (sigmoid(z) - y) * inv;
        let (w_out, b_out, acc) = match q {
            Query::Relation { r, s, o } => {
                let head = model.rel_heads[r];
                acc_o.entry((r, o)).or_insert_with(|| alloc::vec![F::zero(); h]);
                (head.w2, head.b2, acc_s.entry((r, s)).or_insert_with(|| alloc::vec![F::zero(); h]))
            }
            Query::Class { c, i } => {
                let out = model.class_outs[c];
                (out.w, out.b, acc_c.entry(i).or_insert_with(|| alloc::vec![F::zero(); h]))
            }
        };
        g[b_out] += dz;
        let mut da = alloc::vec![F::zero(); h];
        for k in 0..h {
            if a[k] > F::zero() {
                g[w_out + k] += dz * a[k];
                da[k] = dz * model.params[w_out + k];
            }
        }
        add_acc(acc, &da);
        if let Query::Relation { r, o, .. } = q {
            add_acc(acc_o.get_mut(&(r, o)).expect("inserted above"), &da);
        }
    }
    let mut de = Embeddings::from_rows(d, alloc::vec![F::zero(); n * d]);
    let mut keys: Vec<_> = acc_s.keys().copied().collect();
    keys.sort_unstable();
    for (r, s) in keys {
        let da = &acc_s[&(r, s)];
        let head = model.rel_heads[r];
        outer_acc(&mut g[head.w1s..head.w1s + h * d], d, da, e.row(s));
        add_acc(&mut g[head.b1..head.b1 + h], da);
        gemv_t_acc(de.row_mut(s), model.slice(head.w1s, h * d), d, da);
    }
    let mut keys: Vec<_> = acc_o.keys().copied().collect();
    keys.sort_unstable();
    for (r, o) in keys {
        let da = &acc_o[&(r, o)];
        let head = model.rel_heads[r];
        outer_acc(&mut g[head.w1o..head.w1o + h * d], d, da, e.row(o));
        gemv_t_acc(de.row_mut(o), model.slice(head.w1o, h * d), d, da);
    }
    let mut keys: Vec<_> = acc_c.keys().copied().collect();
    keys.sort_unstable();
    let ch = model.class_head;
    for i in keys {
        let da = &acc_c[&i];
        outer_acc(&mut g[ch.wh..ch.wh + h * d], d, da, e.row(i));
        add_acc(&mut g[ch.bh..ch.bh + h], da);
        gemv_t_acc(de.row_mut(i), model.slice(ch.wh, h * d), d, da);
    }
    model.backward_tape(&tape, &mut de, &mut g);
    Ok((loss * inv, g))
}

/// [`loss_and_gradients_with`] on a sample, drawing the initial embeddings and
/// the visiting order from `rng` exactly as [`super::encode`] does.
pub fn loss_and_gradients<F: Scalar, R: Rng + ?Sized>(
    model: &Rrn<F>,
    sample: &SampleKb,
    queries: &[LabeledQuery],
    rng: &mut R,
) -> Result<(F, Vec<F>), RrnError> {
    if queries.is_empty() {
        return Err(RrnError::EmptyQuerySet);
    }
    let facts: Vec<Triple> = sample.facts().copied().collect();
    if facts.len() > model.hp.capacity {
        return Err(RrnError::CapacityExceeded { facts: facts.len(), capacity: model.hp.capacity });
    }
    let init = init_embeddings(sample.roster.len(), &model.hp, rng);
    let schedule = draw_schedule(facts.len(), model.hp.passes, rng);
    loss_and_gradients_with(model, &facts, init, &schedule, queries)
}
