//! Knowledge-base domain model: vocabulary, individuals, literals, triples and
//! benchmark samples.
//!
//! Every fact is available in two views. A [`Literal`] is the logical form
//! (`human(mary)`, `¬isAt(mary,bedroom)`); a [`Triple`] is the uniform
//! `⟨subject, predicate, object⟩` encoding consumed by the neural model, where
//! class memberships use the reserved [`MEMBER_TOKEN`] predicate with the class
//! in object position.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Surface token of the membership predicate in triples and fact files.
pub const MEMBER_TOKEN: &str = "member";

/// Head token of constraint rules in the rule language.
pub const BOTTOM_TOKEN: &str = "false";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("unknown individual `{0}`")]
    UnknownIndividual(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`{0}` is a reserved name")]
    ReservedName(String),
    #[error("`{0}` is declared more than once")]
    DuplicateName(String),
    #[error("`{0}` is not a valid predicate or constant name")]
    InvalidName(String),
    #[error("malformed triple: {0}")]
    MalformedTriple(String),
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Dense per-sample individual id.
    IndividualId
);
id_type!(ClassId);
id_type!(RelationId);

/// A predicate of the vocabulary, resolved to its id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredicateRef {
    Class(ClassId),
    Relation(RelationId),
}

impl PredicateRef {
    pub fn arity(self) -> usize {
        match self {
            PredicateRef::Class(_) => 1,
            PredicateRef::Relation(_) => 2,
        }
    }
}

/// Returns true for names usable as predicates or constants: a lowercase ASCII
/// letter or digit followed by alphanumerics and underscores.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_reserved(name: &str) -> bool {
    name == MEMBER_TOKEN || name == BOTTOM_TOKEN
}

/// Ordered class and relation names of one ontology.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    classes: Vec<String>,
    relations: Vec<String>,
    index: BTreeMap<String, PredicateRef>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_names<C, R>(classes: C, relations: R) -> Result<Self, KbError>
    where
        C: IntoIterator,
        C::Item: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
    {
        let mut vocab = Self::new();
        for c in classes {
            vocab.add_class(c.as_ref())?;
        }
        for r in relations {
            vocab.add_relation(r.as_ref())?;
        }
        Ok(vocab)
    }

    fn check_new(&self, name: &str) -> Result<(), KbError> {
        if is_reserved(name) {
            return Err(KbError::ReservedName(name.to_string()));
        }
        if !is_valid_name(name) {
            return Err(KbError::InvalidName(name.to_string()));
        }
        if self.index.contains_key(name) {
            return Err(KbError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn add_class(&mut self, name: &str) -> Result<ClassId, KbError> {
        self.check_new(name)?;
        let id = ClassId(self.classes.len() as u32);
        self.classes.push(name.to_string());
        self.index.insert(name.to_string(), PredicateRef::Class(id));
        Ok(id)
    }

    pub fn add_relation(&mut self, name: &str) -> Result<RelationId, KbError> {
        self.check_new(name)?;
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(name.to_string());
        self.index.insert(name.to_string(), PredicateRef::Relation(id));
        Ok(id)
    }

    pub fn lookup(&self, name: &str) -> Option<PredicateRef> {
        self.index.get(name).copied()
    }

    pub fn class(&self, name: &str) -> Option<ClassId> {
        match self.lookup(name) {
            Some(PredicateRef::Class(c)) => Some(c),
            _ => None,
        }
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        match self.lookup(name) {
            Some(PredicateRef::Relation(r)) => Some(r),
            _ => None,
        }
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        &self.classes[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()]
    }

    pub fn predicate_name(&self, p: PredicateRef) -> &str {
        match p {
            PredicateRef::Class(c) => self.class_name(c),
            PredicateRef::Relation(r) => self.relation_name(r),
        }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.classes.len() as u32).map(ClassId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn contains_class(&self, id: ClassId) -> bool {
        id.index() < self.classes.len()
    }

    pub fn contains_relation(&self, id: RelationId) -> bool {
        id.index() < self.relations.len()
    }
}

/// Interning table mapping individual names to dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roster {
    names: Vec<String>,
    ids: BTreeMap<String, IndividualId>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I>(names: I) -> Self
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut roster = Self::new();
        for n in names {
            roster.intern(n.as_ref());
        }
        roster
    }

    pub fn intern(&mut self, name: &str) -> IndividualId {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = IndividualId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<IndividualId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: IndividualId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: IndividualId) -> bool {
        id.index() < self.names.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = IndividualId> {
        (0..self.names.len() as u32).map(IndividualId)
    }
}

/// A ground atom: a class membership or a binary relation between individuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fact {
    Class {
        class: ClassId,
        individual: IndividualId,
    },
    Relation {
        relation: RelationId,
        subject: IndividualId,
        object: IndividualId,
    },
}

impl Fact {
    pub fn predicate(&self) -> PredicateRef {
        match *self {
            Fact::Class { class, .. } => PredicateRef::Class(class),
            Fact::Relation { relation, .. } => PredicateRef::Relation(relation),
        }
    }

    /// The first argument: the member of a class fact, the subject of a relation.
    pub fn subject(&self) -> IndividualId {
        match *self {
            Fact::Class { individual, .. } => individual,
            Fact::Relation { subject, .. } => subject,
        }
    }

    pub fn individuals(&self) -> impl Iterator<Item = IndividualId> {
        let (a, b) = match *self {
            Fact::Class { individual, .. } => (individual, None),
            Fact::Relation {
                subject, object, ..
            } => (subject, Some(object)),
        };
        core::iter::once(a).chain(b)
    }
}

/// A possibly negated ground fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub fact: Fact,
    pub positive: bool,
}

impl Literal {
    pub fn positive(fact: Fact) -> Self {
        Self {
            fact,
            positive: true,
        }
    }

    pub fn negative(fact: Fact) -> Self {
        Self {
            fact,
            positive: false,
        }
    }

    pub fn negate(self) -> Self {
        Self {
            fact: self.fact,
            positive: !self.positive,
        }
    }

    pub fn as_triple(&self) -> Triple {
        as_triple(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TriplePredicate {
    Member,
    Relation(RelationId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TripleObject {
    Individual(IndividualId),
    Class(ClassId),
}

/// `⟨subject, predicate, object⟩`, where a negated predicate encodes a negated fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: IndividualId,
    pub predicate: TriplePredicate,
    pub negated: bool,
    pub object: TripleObject,
}

impl Triple {
    pub fn relation(subject: IndividualId, relation: RelationId, object: IndividualId) -> Self {
        Self {
            subject,
            predicate: TriplePredicate::Relation(relation),
            negated: false,
            object: TripleObject::Individual(object),
        }
    }

    pub fn member(individual: IndividualId, class: ClassId) -> Self {
        Self {
            subject: individual,
            predicate: TriplePredicate::Member,
            negated: false,
            object: TripleObject::Class(class),
        }
    }

    pub fn negation(self) -> Self {
        Self {
            negated: !self.negated,
            ..self
        }
    }

    pub fn positive_form(self) -> Self {
        Self {
            negated: false,
            ..self
        }
    }

    pub fn is_class_triple(&self) -> bool {
        matches!(self.predicate, TriplePredicate::Member)
    }

    /// The individual in object position, if this is a relation triple.
    pub fn object_individual(&self) -> Option<IndividualId> {
        match self.object {
            TripleObject::Individual(i) => Some(i),
            TripleObject::Class(_) => None,
        }
    }

    pub fn individuals(&self) -> impl Iterator<Item = IndividualId> {
        core::iter::once(self.subject).chain(self.object_individual())
    }

    pub fn mentions(&self, i: IndividualId) -> bool {
        self.individuals().any(|j| j == i)
    }

    /// Renders the triple with names, e.g. `mary member human` or `mary -isAt kitchen`.
    pub fn display<'a>(&'a self, vocab: &'a Vocabulary, roster: &'a Roster) -> TripleDisplay<'a> {
        TripleDisplay {
            triple: self,
            vocab,
            roster,
        }
    }
}

pub struct TripleDisplay<'a> {
    triple: &'a Triple,
    vocab: &'a Vocabulary,
    roster: &'a Roster,
}

impl fmt::Display for TripleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.triple;
        let pred = match t.predicate {
            TriplePredicate::Member => MEMBER_TOKEN,
            TriplePredicate::Relation(r) => self.vocab.relation_name(r),
        };
        let object = match t.object {
            TripleObject::Individual(i) => self.roster.name(i),
            TripleObject::Class(c) => self.vocab.class_name(c),
        };
        let neg = if t.negated { "-" } else { "" };
        write!(f, "{} {}{} {}", self.roster.name(t.subject), neg, pred, object)
    }
}

pub fn as_triple(literal: &Literal) -> Triple {
    let t = match literal.fact {
        Fact::Class { class, individual } => Triple::member(individual, class),
        Fact::Relation {
            relation,
            subject,
            object,
        } => Triple::relation(subject, relation, object),
    };
    if literal.positive {
        t
    } else {
        t.negation()
    }
}

/// Inverse of [`as_triple`]; rejects triples whose object kind does not match
/// the predicate or whose ids fall outside `vocab`.
pub fn from_triple(triple: &Triple, vocab: &Vocabulary) -> Result<Literal, KbError> {
    let fact = match (triple.predicate, triple.object) {
        (TriplePredicate::Member, TripleObject::Class(class)) => {
            if !vocab.contains_class(class) {
                return Err(KbError::MalformedTriple(alloc::format!(
                    "unknown class id {}",
                    class.0
                )));
            }
            Fact::Class {
                class,
                individual: triple.subject,
            }
        }
        (TriplePredicate::Relation(relation), TripleObject::Individual(object)) => {
            if !vocab.contains_relation(relation) {
                return Err(KbError::MalformedTriple(alloc::format!(
                    "unknown relation id {}",
                    relation.0
                )));
            }
            Fact::Relation {
                relation,
                subject: triple.subject,
                object,
            }
        }
        (TriplePredicate::Member, TripleObject::Individual(_)) => {
            return Err(KbError::MalformedTriple(
                "membership triple with an individual as object".into(),
            ))
        }
        (TriplePredicate::Relation(_), TripleObject::Class(_)) => {
            return Err(KbError::MalformedTriple(
                "relation triple with a class as object".into(),
            ))
        }
    };
    Ok(Literal {
        fact,
        positive: !triple.negated,
    })
}

/// Where a sample came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
}

/// One benchmark knowledge base: individuals plus a set of (possibly negated)
/// fact triples over a vocabulary held by the caller.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleKb {
    pub roster: Roster,
    facts: BTreeSet<Triple>,
    pub provenance: Provenance,
    /// Set by corruption operations that deliberately add contradicting facts.
    pub inconsistent_by_construction: bool,
}

impl SampleKb {
    pub fn new(roster: Roster) -> Self {
        Self {
            roster,
            ..Self::default()
        }
    }

    pub fn with_provenance(mut self, generator: &str, seed: u64) -> Self {
        self.provenance = Provenance {
            generator: generator.to_string(),
            seed,
        };
        self
    }

    /// Adds a fact; returns false if it was already present.
    pub fn insert(&mut self, triple: Triple) -> Result<bool, KbError> {
        for i in triple.individuals() {
            if !self.roster.contains(i) {
                return Err(KbError::UnknownIndividual(alloc::format!("#{}", i.0)));
            }
        }
        Ok(self.facts.insert(triple))
    }

    pub fn insert_literal(&mut self, literal: &Literal) -> Result<bool, KbError> {
        self.insert(as_triple(literal))
    }

    pub fn remove(&mut self, triple: &Triple) -> bool {
        self.facts.remove(triple)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.facts.contains(triple)
    }

    pub fn facts(&self) -> impl ExactSizeIterator<Item = &Triple> + Clone {
        self.facts.iter()
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.facts.iter().map(|t| {
            let fact = match (t.predicate, t.object) {
                (TriplePredicate::Member, TripleObject::Class(class)) => Fact::Class {
                    class,
                    individual: t.subject,
                },
                (TriplePredicate::Relation(relation), TripleObject::Individual(object)) => {
                    Fact::Relation {
                        relation,
                        subject: t.subject,
                        object,
                    }
                }
                _ => unreachable!("facts are validated on insertion"),
            };
            Literal {
                fact,
                positive: !t.negated,
            }
        })
    }

    /// Checks every predicate against `vocab` (rosters are checked on insertion).
    pub fn validate(&self, vocab: &Vocabulary) -> Result<(), KbError> {
        for t in &self.facts {
            from_triple(t, vocab)?;
        }
        Ok(())
    }

    /// True if some fact occurs together with its negation.
    pub fn has_direct_contradiction(&self) -> bool {
        self.facts
            .iter()
            .any(|t| !t.negated && self.facts.contains(&t.negation()))
    }

    /// Serializes the facts as `subject<TAB>predicate<TAB>object<TAB>+|-` lines.
    pub fn to_tsv(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for t in &self.facts {
            push_tsv_line(&mut out, t, vocab, &self.roster);
        }
        out
    }
}

pub(crate) fn push_tsv_line(out: &mut String, t: &Triple, vocab: &Vocabulary, roster: &Roster) {
    out.push_str(roster.name(t.subject));
    out.push('\t');
    match t.predicate {
        TriplePredicate::Member => out.push_str(MEMBER_TOKEN),
        TriplePredicate::Relation(r) => out.push_str(vocab.relation_name(r)),
    }
    out.push('\t');
    match t.object {
        TripleObject::Individual(i) => out.push_str(roster.name(i)),
        TripleObject::Class(c) => out.push_str(vocab.class_name(c)),
    }
    out.push('\t');
    out.push(if t.negated { '-' } else { '+' });
    out.push('\n');
}

/// 3-valued summary of the explicitly stated class memberships of one individual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceVector(Vec<i8>);

impl IncidenceVector {
    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn incidence_vector(
    sample: &SampleKb,
    vocab: &Vocabulary,
    individual: IndividualId,
) -> Result<IncidenceVector, KbError> {
    if !sample.roster.contains(individual) {
        return Err(KbError::UnknownIndividual(alloc::format!(
            "#{}",
            individual.0
        )));
    }
    let mut entries = alloc::vec![0i8; vocab.num_classes()];
    for c in vocab.class_ids() {
        let t = Triple::member(individual, c);
        if sample.contains(&t) {
            entries[c.index()] = 1;
        } else if sample.contains(&t.negation()) {
            entries[c.index()] = -1;
        }
    }
    Ok(IncidenceVector(entries))
}

/// Which candidate queries to enumerate for a sample.
#[derive(Debug, Clone, Copy)]
pub enum QueryScope<'a> {
    /// Every ordered pair (reflexive pairs included) for every relation, and
    /// every individual for every class.
    Full,
    /// Only relation queries that mention a test individual; class queries for
    /// test individuals and for `class_extras` (regions and subregions in the
    /// countries benchmark).
    Touching {
        test: &'a [IndividualId],
        class_extras: &'a [IndividualId],
    },
}

/// Enumerates the candidate query triples of a sample, all in positive form.
///
/// Relation queries come first (relation-major, then subject, then object),
/// followed by class queries (individual-major).
pub fn query_universe(sample: &SampleKb, vocab: &Vocabulary, scope: QueryScope<'_>) -> Vec<Triple> {
    let n = sample.roster.len() as u32;
    let (test, extras): (BTreeSet<IndividualId>, BTreeSet<IndividualId>) = match scope {
        QueryScope::Full => (BTreeSet::new(), BTreeSet::new()),
        QueryScope::Touching { test, class_extras } => (
            test.iter().copied().collect(),
            class_extras.iter().copied().collect(),
        ),
    };
    let full = matches!(scope, QueryScope::Full);
    let mut out = Vec::new();
    for r in vocab.relation_ids() {
        for s in 0..n {
            for o in 0..n {
                let (s, o) = (IndividualId(s), IndividualId(o));
                if full || test.contains(&s) || test.contains(&o) {
                    out.push(Triple::relation(s, r, o));
                }
            }
        }
    }
    for i in 0..n {
        let i = IndividualId(i);
        if full || test.contains(&i) || extras.contains(&i) {
            for c in vocab.class_ids() {
                out.push(Triple::member(i, c));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    /// The fact or its negation is literally stated in the sample.
    Specified,
    /// Only derivable (or refutable) through the ontology.
    Inferable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Class,
    Relation,
}

impl Group {
    pub fn of(triple: &Triple) -> Self {
        if triple.is_class_triple() {
            Group::Class
        } else {
            Group::Relation
        }
    }
}

/// A query triple (positive form) with its ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledQuery {
    pub triple: Triple,
    pub label: bool,
    pub origin: Origin,
    pub group: Group,
}
