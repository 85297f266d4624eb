//! The recursive reasoning network.
//!
//! Every individual of a sample starts from a random unit vector. The encoder
//! then sweeps over the sample's fact triples several times; each triple
//! updates the embeddings of the individuals it mentions through a gated cell
//! owned by its predicate (separate banks for negated predicates, and for the
//! subject and object side of relations). Queries are answered by small
//! perceptrons over the final embeddings.
//!
//! The cell for a relation triple `⟨s,R,o⟩`, subject side, is
//!
//! ```text
//! m = relu(Wmx e_s + Wmy e_o + bm)
//! z = σ(Wzx e_s + Wzm m + bz)
//! c = tanh(Wcx e_s + Wcm m + bc)
//! e_s ← normalize((1 - z) ⊙ e_s + z ⊙ c)
//! ```
//!
//! and symmetrically for `e_o`; both sides read the rows as they were before
//! the step. Class triples `⟨i,member,C⟩` update `e_i` alone, with `m` computed
//! from `e_i`. Gradients are computed by hand (reverse mode over a tape of the
//! encoder's steps), so the code is generic over the scalar type: training
//! runs in `f32` and gradient checks in `f64`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand::distr::{Distribution, StandardUniform, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::Vocabulary;

mod encode;
mod heads;
pub mod linalg;
mod optim;

pub use encode::{draw_schedule, encode, encode_taped, encode_with, update_step, Tape};
pub use heads::{loss_and_gradients, loss_and_gradients_with, predict, probabilities, query_logits};
pub use optim::{adam_update, clip_global_norm, optimizer_step, AdamError, AdamState};

/// Float type the model runs in. The transcendental functions call `libm`
/// directly, so results do not depend on whether `std` math is linked in.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Debug + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }
    fn exp_m(self) -> Self;
    fn ln_1p_m(self) -> Self;
    fn tanh_m(self) -> Self;
}

impl Scalar for f32 {
    fn exp_m(self) -> Self {
        libm::expf(self)
    }
    fn ln_1p_m(self) -> Self {
        libm::log1pf(self)
    }
    fn tanh_m(self) -> Self {
        libm::tanhf(self)
    }
}

impl Scalar for f64 {
    fn exp_m(self) -> Self {
        libm::exp(self)
    }
    fn ln_1p_m(self) -> Self {
        libm::log1p(self)
    }
    fn tanh_m(self) -> Self {
        libm::tanh(self)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RrnError {
    #[error("sample has {facts} facts, more than the capacity {capacity}")]
    CapacityExceeded { facts: usize, capacity: usize },
    #[error("the number of passes must be at least 1")]
    ZeroPasses,
    #[error("individual #{0} is outside the embedding matrix")]
    UnknownIndividual(u32),
    #[error("predicate is not in the model's vocabulary")]
    UnknownPredicate,
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("non-finite gradient in parameter {0}")]
    NonFinite(String),
    #[error("parameter vector has {got} entries, layout needs {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Embedding dimension.
    pub dim: usize,
    /// Hidden width of the query perceptrons.
    pub hidden: usize,
    /// Number of passes over the facts.
    pub passes: usize,
    pub learning_rate: f64,
    /// Sampled negatives per positive relation query during training.
    pub negative_ratio: usize,
    /// Standard deviation of the random initial embeddings (before normalizing).
    pub init_scale: f64,
    /// Largest number of facts an encodable sample may contain.
    pub capacity: usize,
    /// Global gradient norm above which gradients are rescaled.
    pub clip_norm: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 32,
            hidden: 64,
            passes: 8,
            learning_rate: 1e-3,
            negative_ratio: 4,
            init_scale: 0.1,
            capacity: 1_000_000,
            clip_norm: 5.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), RrnError> {
        if self.dim == 0 || self.hidden == 0 || self.capacity == 0 {
            return Err(RrnError::InvalidHyperparams("sizes must be positive"));
        }
        if self.passes == 0 {
            return Err(RrnError::ZeroPasses);
        }
        if !(self.learning_rate > 0.0 && self.init_scale > 0.0 && self.clip_norm > 0.0) {
            return Err(RrnError::InvalidHyperparams("rates and scales must be positive"));
        }
        Ok(())
    }
}

/// A named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    tensors: Vec<TensorSpec>,
    len: usize,
}

impl Layout {
    fn push(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let offset = self.len;
        self.tensors.push(TensorSpec { name, offset, rows, cols });
        self.len += rows * cols;
        offset
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The tensor containing flat index `i`.
    pub fn tensor_at(&self, i: usize) -> Option<&TensorSpec> {
        let k = self.tensors.partition_point(|t| t.offset + t.len() <= i);
        self.tensors.get(k).filter(|t| t.range().contains(&i))
    }
}

/// Offsets of one update cell's tensors. `wmy` is `None` for class cells.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub wmx: usize,
    pub wmy: Option<usize>,
    pub bm: usize,
    pub wzx: usize,
    pub wzm: usize,
    pub bz: usize,
    pub wcx: usize,
    pub wcm: usize,
    pub bc: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RelHead {
    pub w1s: usize,
    pub w1o: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ClassHead {
    pub wh: usize,
    pub bh: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ClassOut {
    pub w: usize,
    pub b: usize,
}

/// An RRN bound to one vocabulary.
#[derive(Debug, Clone)]
pub struct Rrn<F> {
    pub hp: Hyperparams,
    pub params: Vec<F>,
    layout: Layout,
    num_classes: usize,
    num_relations: usize,
    /// Indexed by `(relation * 2 + negated) * 2 + side` (side 0 = subject).
    rel_cells: Vec<Cell>,
    /// Indexed by `class * 2 + negated`.
    class_cells: Vec<Cell>,
    rel_heads: Vec<RelHead>,
    class_head: ClassHead,
    class_outs: Vec<ClassOut>,
}

struct Builder {
    layout: Layout,
    d: usize,
}

impl Builder {
    fn cell(&mut self, prefix: &str, relation: bool) -> Cell {
        let d = self.d;
        let mut t = |suffix: &str, rows, cols| self.layout.push(format!("{prefix}.{suffix}"), rows, cols);
        Cell {
            wmx: t("Wmx", d, d),
            wmy: relation.then(|| t("Wmy", d, d)),
            bm: t("bm", d, 1),
            wzx: t("Wzx", d, d),
            wzm: t("Wzm", d, d),
            bz: t("bz", d, 1),
            wcx: t("Wcx", d, d),
            wcm: t("Wcm", d, d),
            bc: t("bc", d, 1),
        }
    }
}

impl<F: Scalar> Rrn<F> {
    /// A model with all parameters zero.
    pub fn zeros(vocab: &Vocabulary, hp: Hyperparams) -> Result<Self, RrnError> {
        hp.validate()?;
        let (d, h) = (hp.dim, hp.hidden);
        let mut b = Builder { layout: Layout::default(), d };
        let mut rel_cells = Vec::new();
        for name in vocab.relations() {
            for polarity in ["pos", "neg"] {
                for side in ["subj", "obj"] {
                    rel_cells.push(b.cell(&format!("update.{name}.{polarity}.{side}"), true));
                }
            }
        }
        let mut class_cells = Vec::new();
        for name in vocab.classes() {
            for polarity in ["pos", "neg"] {
                class_cells.push(b.cell(&format!("update.member.{name}.{polarity}"), false));
            }
        }
        let l = &mut b.layout;
        let rel_heads = vocab
            .relations()
            .iter()
            .map(|name| RelHead {
                w1s: l.push(format!("head.{name}.W1s"), h, d),
                w1o: l.push(format!("head.{name}.W1o"), h, d),
                b1: l.push(format!("head.{name}.b1"), h, 1),
                w2: l.push(format!("head.{name}.w2"), h, 1),
                b2: l.push(format!("head.{name}.b2"), 1, 1),
            })
            .collect();
        let class_head = ClassHead {
            wh: l.push("head.member.Wh".into(), h, d),
            bh: l.push("head.member.bh".into(), h, 1),
        };
        let class_outs = vocab
            .classes()
            .iter()
            .map(|name| ClassOut {
                w: l.push(format!("head.member.{name}.w"), h, 1),
                b: l.push(format!("head.member.{name}.b"), 1, 1),
            })
            .collect();
        let layout = b.layout;
        Ok(Self {
            hp,
            params: alloc::vec![F::zero(); layout.len()],
            layout,
            num_classes: vocab.num_classes(),
            num_relations: vocab.num_relations(),
            rel_cells,
            class_cells,
            rel_heads,
            class_head,
            class_outs,
        })
    }

    /// A freshly initialized model: matrices uniform in `±sqrt(6 / (rows + cols))`
    /// (vectors of head output weights use their length as both fans), biases zero.
    pub fn new<R: Rng + ?Sized>(vocab: &Vocabulary, hp: Hyperparams, rng: &mut R) -> Result<Self, RrnError> {
        let mut m = Self::zeros(vocab, hp)?;
        for t in m.layout.tensors.clone() {
            let is_bias = t.cols == 1 && !t.name.ends_with(".w2") && !t.name.ends_with(".w");
            if is_bias {
                continue;
            }
            let fan = if t.cols == 1 { 2 * t.rows } else { t.rows + t.cols };
            let a = (6.0 / fan as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a).expect("finite bounds");
            for v in &mut m.params[t.range()] {
                *v = F::of(dist.sample(rng));
            }
        }
        Ok(m)
    }

    /// Binds an existing parameter vector to the layout for `vocab`.
    pub fn from_params(vocab: &Vocabulary, hp: Hyperparams, params: Vec<F>) -> Result<Self, RrnError> {
        let mut m = Self::zeros(vocab, hp)?;
        if params.len() != m.params.len() {
            return Err(RrnError::ShapeMismatch { expected: m.params.len(), got: params.len() });
        }
        m.params = params;
        Ok(m)
    }

    /// The same model with parameters converted to another scalar type.
    pub fn cast<G: Scalar>(&self) -> Rrn<G> {
        Rrn {
            hp: self.hp,
            params: self.params.iter().map(|v| G::of(v.to_f64().expect("finite"))).collect(),
            layout: self.layout.clone(),
            num_classes: self.num_classes,
            num_relations: self.num_relations,
            rel_cells: self.rel_cells.clone(),
            class_cells: self.class_cells.clone(),
            rel_heads: self.rel_heads.clone(),
            class_head: self.class_head,
            class_outs: self.class_outs.clone(),
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub(crate) fn slice(&self, offset: usize, len: usize) -> &[F] {
        &self.params[offset..offset + len]
    }
}

/// One embedding row per individual.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<F> {
    dim: usize,
    data: Vec<F>,
}

impl<F: Scalar> Embeddings<F> {
    pub fn from_rows(dim: usize, data: Vec<F>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "ragged embedding matrix");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    /// Rows reordered so that new row `perm[i]` is old row `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = alloc::vec![F::zero(); self.data.len()];
        for (i, &p) in perm.iter().enumerate() {
            data[p * self.dim..(p + 1) * self.dim].copy_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }
}

/// Box-Muller, one draw per pair of uniforms.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - Distribution::<f64>::sample(&StandardUniform, rng);
    let u2: f64 = Distribution::<f64>::sample(&StandardUniform, rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Random unit-norm rows: i.i.d. Gaussian entries with standard deviation
/// `hp.init_scale`, then normalized.
pub fn init_embeddings<F: Scalar, R: Rng + ?Sized>(n: usize, hp: &Hyperparams, rng: &mut R) -> Embeddings<F> {
    let d = hp.dim;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| hp.init_scale * standard_normal(rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        data.extend(row.iter().map(|v| F::of(v / norm)));
    }
    Embeddings { dim: d, data }
}
