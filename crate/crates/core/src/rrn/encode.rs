//! The update cells and the multi-pass encoder, with their backward pass.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::linalg::{add_acc, dot, gemv_acc, gemv_t_acc, outer_acc, sigmoid};
use super::{init_embeddings, Cell, Embeddings, RrnError, Rrn, Scalar};
use crate::kb::{SampleKb, Triple, TripleObject, TriplePredicate};

/// Intermediate values of one side of one update step.
#[derive(Debug, Clone)]
struct SideRecord<F> {
    cell: Cell,
    row: usize,
    /// Row of the other individual for relation cells.
    other: Option<usize>,
    x: Vec<F>,
    y: Vec<F>,
    pre_m: Vec<F>,
    z: Vec<F>,
    c: Vec<F>,
    out: Vec<F>,
    norm: F,
}

/// Everything the backward pass needs from an encoder run.
#[derive(Debug, Clone, Default)]
pub struct Tape<F> {
    steps: Vec<Vec<SideRecord<F>>>,
}

impl<F> Tape<F> {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
}

enum Target {
    Relation { subj: Cell, obj: Cell, s: usize, o: usize },
    Class { cell: Cell, i: usize },
}

impl<F: Scalar> Rrn<F> {
    fn target(&self, t: &Triple, n: usize) -> Result<Target, RrnError> {
        let neg = t.negated as usize;
        let s = t.subject.index();
        if s >= n {
            return Err(RrnError::UnknownIndividual(t.subject.0));
        }
        match (t.predicate, t.object) {
            (TriplePredicate::Relation(r), TripleObject::Individual(o)) => {
                if r.index() >= self.num_relations {
                    return Err(RrnError::UnknownPredicate);
                }
                if o.index() >= n {
                    return Err(RrnError::UnknownIndividual(o.0));
                }
                let base = (r.index() * 2 + neg) * 2;
                Ok(Target::Relation {
                    subj: self.rel_cells[base],
                    obj: self.rel_cells[base + 1],
                    s,
                    o: o.index(),
                })
            }
            (TriplePredicate::Member, TripleObject::Class(c)) if c.index() < self.num_classes => {
                Ok(Target::Class { cell: self.class_cells[c.index() * 2 + neg], i: s })
            }
            _ => Err(RrnError::UnknownPredicate),
        }
    }

    fn cell_forward(&self, cell: &Cell, row: usize, other: Option<usize>, x: &[F], y: &[F]) -> SideRecord<F> {
        let d = self.hp.dim;
        let p = |off: usize, len: usize| self.slice(off, len);
        let mut pre_m = p(cell.bm, d).to_vec();
        gemv_acc(&mut pre_m, p(cell.wmx, d * d), d, x);
        if let Some(wmy) = cell.wmy {
            gemv_acc(&mut pre_m, p(wmy, d * d), d, y);
        }
        let m: Vec<F> = pre_m.iter().map(|&v| v.max(F::zero())).collect();
        let mut z = p(cell.bz, d).to_vec();
        gemv_acc(&mut z, p(cell.wzx, d * d), d, x);
        gemv_acc(&mut z, p(cell.wzm, d * d), d, &m);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut c = p(cell.bc, d).to_vec();
        gemv_acc(&mut c, p(cell.wcx, d * d), d, x);
        gemv_acc(&mut c, p(cell.wcm, d * d), d, &m);
        c.iter_mut().for_each(|v| *v = v.tanh_m());
        let mut out: Vec<F> = (0..d).map(|k| (F::one() - z[k]) * x[k] + z[k] * c[k]).collect();
        let norm = dot(&out, &out).sqrt().max(F::min_positive_value());
        out.iter_mut().for_each(|v| *v = *v / norm);
        SideRecord {
            cell: *cell,
            row,
            other,
            x: x.to_vec(),
            y: if other.is_some() { y.to_vec() } else { Vec::new() },
            pre_m,
            z,
            c,
            out,
            norm,
        }
    }

    fn step(&self, e: &mut Embeddings<F>, t: &Triple) -> Result<Vec<SideRecord<F>>, RrnError> {
        let recs = match self.target(t, e.len())? {
            Target::Relation { subj, obj, s, o } => {
                let (xs, xo) = (e.row(s).to_vec(), e.row(o).to_vec());
                let mut recs = alloc::vec![self.cell_forward(&subj, s, Some(o), &xs, &xo)];
                if s != o {
                    recs.push(self.cell_forward(&obj, o, Some(s), &xo, &xs));
                }
                recs
            }
            Target::Class { cell, i } => {
                let x = e.row(i).to_vec();
                alloc::vec![self.cell_forward(&cell, i, None, &x, &[])]
            }
        };
        for r in &recs {
            e.row_mut(r.row).copy_from_slice(&r.out);
        }
        Ok(recs)
    }

    /// Backward through one side: adds parameter gradients to `g` and returns
    /// the gradients with respect to `x` and `y`.
    fn cell_backward(&self, r: &SideRecord<F>, dout: &[F], g: &mut [F]) -> (Vec<F>, Vec<F>) {
        let d = self.hp.dim;
        let cell = &r.cell;
        let proj = dot(&r.out, dout);
        let du: Vec<F> = (0..d).map(|k| (dout[k] - r.out[k] * proj) / r.norm).collect();
        let mut dx: Vec<F> = (0..d).map(|k| du[k] * (F::one() - r.z[k])).collect();
        let gz: Vec<F> = (0..d)
            .map(|k| du[k] * (r.c[k] - r.x[k]) * r.z[k] * (F::one() - r.z[k]))
            .collect();
        let gc: Vec<F> = (0..d)
            .map(|k| du[k] * r.z[k] * (F::one() - r.c[k] * r.c[k]))
            .collect();
        let m: Vec<F> = r.pre_m.iter().map(|&v| v.max(F::zero())).collect();
        let dd = d * d;
        outer_acc(&mut g[cell.wzx..cell.wzx + dd], d, &gz, &r.x);
        outer_acc(&mut g[cell.wzm..cell.wzm + dd], d, &gz, &m);
        add_acc(&mut g[cell.bz..cell.bz + d], &gz);
        outer_acc(&mut g[cell.wcx..cell.wcx + dd], d, &gc, &r.x);
        outer_acc(&mut g[cell.wcm..cell.wcm + dd], d, &gc, &m);
        add_acc(&mut g[cell.bc..cell.bc + d], &gc);
        gemv_t_acc(&mut dx, self.slice(cell.wzx, dd), d, &gz);
        gemv_t_acc(&mut dx, self.slice(cell.wcx, dd), d, &gc);
        let mut dm = alloc::vec![F::zero(); d];
        gemv_t_acc(&mut dm, self.slice(cell.wzm, dd), d, &gz);
        gemv_t_acc(&mut dm, self.slice(cell.wcm, dd), d, &gc);
        let gm: Vec<F> = (0..d)
            .map(|k| if r.pre_m[k] > F::zero() { dm[k] } else { F::zero() })
            .collect();
        outer_acc(&mut g[cell.wmx..cell.wmx + dd], d, &gm, &r.x);
        add_acc(&mut g[cell.bm..cell.bm + d], &gm);
        gemv_t_acc(&mut dx, self.slice(cell.wmx, dd), d, &gm);
        let mut dy = Vec::new();
        if let Some(wmy) = cell.wmy {
            outer_acc(&mut g[wmy..wmy + dd], d, &gm, &r.y);
            dy = alloc::vec![F::zero(); d];
            gemv_t_acc(&mut dy, self.slice(wmy, dd), d, &gm);
        }
        (dx, dy)
    }

    /// Propagates `de` (gradient w.r.t. the final embeddings) back through
    /// every recorded step, accumulating parameter gradients into `g`. On
    /// return `de` holds the gradient w.r.t. the initial embeddings.
    pub(crate) fn backward_tape(&self, tape: &Tape<F>, de: &mut Embeddings<F>, g: &mut [F]) {
        let d = self.hp.dim;
        for step in tape.steps.iter().rev() {
            let douts: Vec<Vec<F>> = step.iter().map(|r| de.row(r.row).to_vec()).collect();
            for r in step {
                de.row_mut(r.row).iter_mut().for_each(|v| *v = F::zero());
            }
            for (r, dout) in step.iter().zip(&douts) {
                let (dx, dy) = self.cell_backward(r, dout, g);
                add_acc(de.row_mut(r.row), &dx);
                if let Some(o) = r.other {
                    debug_assert_eq!(dy.len(), d);
                    add_acc(de.row_mut(o), &dy);
                }
            }
        }
    }
}

/// Applies the update for one fact triple in place. Only the rows of the
/// individuals mentioned by `t` change.
pub fn update_step<F: Scalar>(model: &Rrn<F>, e: &mut Embeddings<F>, t: &Triple) -> Result<(), RrnError> {
    model.step(e, t).map(|_| ())
}

/// `passes` independent shuffles of `0..n`.
pub fn draw_schedule<R: Rng + ?Sized>(n: usize, passes: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..passes)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            order
        })
        .collect()
}

fn run<F: Scalar>(
    model: &Rrn<F>,
    facts: &[Triple],
    mut e: Embeddings<F>,
    schedule: &[Vec<usize>],
    mut tape: Option<&mut Tape<F>>,
) -> Result<Embeddings<F>, RrnError> {
    if facts.len() > model.hp.capacity {
        return Err(RrnError::CapacityExceeded { facts: facts.len(), capacity: model.hp.capacity });
    }
    if schedule.is_empty() {
        return Err(RrnError::ZeroPasses);
    }
    for pass in schedule {
        for &k in pass {
            let recs = model.step(&mut e, &facts[k])?;
            if let Some(t) = tape.as_deref_mut() {
                t.steps.push(recs);
            }
        }
    }
    Ok(e)
}

/// Runs the encoder from explicit initial embeddings and a fixed visiting
/// order (`schedule[p]` lists indices into `facts` for pass `p`).
pub fn encode_with<F: Scalar>(
    model: &Rrn<F>,
    facts: &[Triple],
    init: Embeddings<F>,
    schedule: &[Vec<usize>],
) -> Result<Embeddings<F>, RrnError> {
    run(model, facts, init, schedule, None)
}

/// Like [`encode_with`], also recording a tape for the backward pass.
pub fn encode_taped<F: Scalar>(
    model: &Rrn<F>,
    facts: &[Triple],
    init: Embeddings<F>,
    schedule: &[Vec<usize>],
) -> Result<(Embeddings<F>, Tape<F>), RrnError> {
    let mut tape = Tape::default();
    let e = run(model, facts, init, schedule, Some(&mut tape))?;
    Ok((e, tape))
}

/// Encodes a sample: random initial embeddings, then `hp.passes` passes over
/// its facts, each in a freshly shuffled order.
pub fn encode<F: Scalar, R: Rng + ?Sized>(
    model: &Rrn<F>,
    sample: &SampleKb,
    rng: &mut R,
) -> Result<Embeddings<F>, RrnError> {
    let facts: Vec<Triple> = sample.facts().copied().collect();
    if facts.len() > model.hp.capacity {
        return Err(RrnError::CapacityExceeded { facts: facts.len(), capacity: model.hp.capacity });
    }
    let init = init_embeddings(sample.roster.len(), &model.hp, rng);
    let schedule = draw_schedule(facts.len(), model.hp.passes, rng);
    encode_with(model, &facts, init, &schedule)
}
