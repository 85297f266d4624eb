//! Symbolic oracle: least-model materialization and entailment checks.
//!
//! [`materialize`] runs semi-naive (delta-driven) forward chaining over
//! per-predicate tuple stores indexed on both argument positions.
//! [`naive_fixpoint`] is a deliberately simple re-implementation used as a
//! test oracle; the two must agree on every input.
//!
//! Constraints (`false :- ...`) never stop derivation. Every satisfied
//! grounding is recorded as a [`Violation`] and the model is flagged
//! inconsistent, as is any negative database fact whose atom gets derived.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use thiserror::Error;

use crate::dsl::{Atom, BodyAtom, Head, Program, Term};
use crate::kb::{
    from_triple, ClassId, Fact, Group, IndividualId, LabeledQuery, Literal, Origin, PredicateRef,
    RelationId, Roster, SampleKb, Triple, Vocabulary,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReasonerError {
    #[error("individual #{0} is not in the roster")]
    UnknownIndividual(u32),
    #[error("predicate is not in the vocabulary")]
    UnknownPredicate,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    /// A constraint whose body holds; `body` lists the matched atoms in rule order.
    Constraint { rule: usize, body: Vec<Fact> },
    /// `¬α` is a database fact but `α` is derived.
    Contradiction(Fact),
}

/// The least model of a program and database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeastModel {
    /// Database roster, extended with constants that only occur in the program.
    pub roster: Roster,
    pub derived: BTreeSet<Fact>,
    pub inconsistent: bool,
    pub violations: BTreeSet<Violation>,
}

impl LeastModel {
    pub fn contains(&self, fact: &Fact) -> bool {
        self.derived.contains(fact)
    }

    pub fn contains_triple(&self, triple: &Triple, vocab: &Vocabulary) -> bool {
        from_triple(&triple.positive_form(), vocab)
            .map(|l| self.derived.contains(&l.fact))
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Semantics {
    /// Positive literals by membership in the least model; negative literals by
    /// constraint refutation.
    Plain,
    /// Closed world: every non-derivable atom is false.
    Cwa,
    /// Local closed world: an atom is false if it is not derivable and the
    /// database states some fact with the same predicate and subject.
    Lcwa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntailmentVerdict {
    pub entailed: bool,
    pub semantics: Semantics,
}

// ---------------------------------------------------------------------------
// Compilation of rules into slot form

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Var(usize),
    Const(u32),
    Any,
}

#[derive(Debug, Clone)]
struct CAtom {
    pred: usize,
    args: [Slot; 2],
}

#[derive(Debug, Clone)]
struct CRule {
    index: usize,
    head: Option<CAtom>,
    body: Vec<CAtom>,
    neq: Vec<(Slot, Slot)>,
    nvars: usize,
}

fn pred_index(vocab: &Vocabulary, p: PredicateRef) -> usize {
    match p {
        PredicateRef::Class(c) => c.index(),
        PredicateRef::Relation(r) => vocab.num_classes() + r.index(),
    }
}

fn fact_key(vocab: &Vocabulary, f: &Fact) -> (usize, [u32; 2]) {
    match *f {
        Fact::Class { class, individual } => (class.index(), [individual.0, NONE]),
        Fact::Relation {
            relation,
            subject,
            object,
        } => (
            vocab.num_classes() + relation.index(),
            [subject.0, object.0],
        ),
    }
}

fn key_fact(vocab: &Vocabulary, pred: usize, t: [u32; 2]) -> Fact {
    let nc = vocab.num_classes();
    if pred < nc {
        Fact::Class {
            class: ClassId(pred as u32),
            individual: IndividualId(t[0]),
        }
    } else {
        Fact::Relation {
            relation: RelationId((pred - nc) as u32),
            subject: IndividualId(t[0]),
            object: IndividualId(t[1]),
        }
    }
}

struct RuleCompiler<'a, 'r> {
    vocab: &'a Vocabulary,
    roster: &'r mut Roster,
    vars: Vec<&'a str>,
}

impl<'a> RuleCompiler<'a, '_> {
    fn slot(&mut self, t: &'a Term) -> Slot {
        match t {
            Term::Constant(c) => Slot::Const(self.roster.intern(c).0),
            Term::Anonymous => Slot::Any,
            Term::Variable(v) => match self.vars.iter().position(|x| *x == v.as_str()) {
                Some(i) => Slot::Var(i),
                None => {
                    self.vars.push(v.as_str());
                    Slot::Var(self.vars.len() - 1)
                }
            },
        }
    }

    fn atom(&mut self, a: &'a Atom) -> CAtom {
        let a0 = self.slot(&a.args[0]);
        let a1 = match a.args.get(1) {
            Some(t) => self.slot(t),
            None => Slot::Any,
        };
        CAtom {
            pred: pred_index(self.vocab, a.predicate),
            args: [a0, a1],
        }
    }
}

fn compile(program: &Program, roster: &mut Roster) -> Vec<CRule> {
    let mut out = Vec::with_capacity(program.rules.len());
    for (index, rule) in program.rules.iter().enumerate() {
        let mut c = RuleCompiler {
            vocab: &program.vocabulary,
            roster: &mut *roster,
            vars: Vec::new(),
        };
        let body: Vec<CAtom> = rule.atoms().map(|a| c.atom(a)).collect();
        let head = match &rule.head {
            Head::Atom(a) => Some(c.atom(a)),
            Head::Bottom => None,
        };
        let neq = rule
            .body
            .iter()
            .filter_map(|b| match b {
                BodyAtom::NotEqual(l, r) => Some((c.slot(l), c.slot(r))),
                BodyAtom::Atom(_) => None,
            })
            .collect();
        out.push(CRule {
            index,
            head,
            body,
            neq,
            nvars: c.vars.len(),
        });
    }
    out
}

fn resolve(slot: Slot, binding: &[u32]) -> u32 {
    match slot {
        Slot::Var(v) => binding[v],
        Slot::Const(c) => c,
        Slot::Any => NONE,
    }
}

fn neq_holds(neq: &[(Slot, Slot)], binding: &[u32]) -> bool {
    neq.iter()
        .all(|&(l, r)| resolve(l, binding) != resolve(r, binding))
}

// ---------------------------------------------------------------------------
// Semi-naive evaluation

#[derive(Default)]
struct Store {
    tuples: Vec<[u32; 2]>,
    set: HashSet<[u32; 2]>,
    by_arg: [HashMap<u32, Vec<u32>>; 2],
}

impl Store {
    fn insert(&mut self, t: [u32; 2]) -> bool {
        if !self.set.insert(t) {
            return false;
        }
        let id = self.tuples.len() as u32;
        self.tuples.push(t);
        self.by_arg[0].entry(t[0]).or_default().push(id);
        if t[1] != NONE {
            self.by_arg[1].entry(t[1]).or_default().push(id);
        }
        true
    }
}

#[derive(Clone, Copy)]
struct Range {
    lo: u32,
    hi: u32,
}

struct Engine<'a> {
    stores: &'a [Store],
}

impl Engine<'_> {
    /// Enumerates all bindings of `plan` (body atom indices in evaluation
    /// order) with per-atom tuple-id ranges.
    fn join(
        &self,
        rule: &CRule,
        plan: &[usize],
        ranges: &[Range],
        binding: &mut [u32],
        matched: &mut [[u32; 2]],
        emit: &mut dyn FnMut(&[u32], &[[u32; 2]]),
    ) {
        let Some((&ai, rest)) = plan.split_first() else {
            if neq_holds(&rule.neq, binding) {
                emit(binding, matched);
            }
            return;
        };
        let atom = &rule.body[ai];
        let store = &self.stores[atom.pred];
        let range = ranges[ai];
        let b0 = resolve(atom.args[0], binding);
        let b1 = resolve(atom.args[1], binding);
        let mut visit = |id: u32, binding: &mut [u32], matched: &mut [[u32; 2]]| {
            let t = store.tuples[id as usize];
            if (b0 != NONE && t[0] != b0) || (b1 != NONE && t[1] != b1) {
                return;
            }
            let mut set = [None, None];
            for k in 0..2 {
                if let Slot::Var(v) = atom.args[k] {
                    if binding[v] == NONE {
                        binding[v] = t[k];
                        set[k] = Some(v);
                    } else if binding[v] != t[k] {
                        // repeated variable bound by the other position
                        for v in set.iter().flatten() {
                            binding[*v] = NONE;
                        }
                        return;
                    }
                }
            }
            matched[ai] = t;
            self.join(rule, rest, ranges, binding, matched, emit);
            for v in set.iter().flatten() {
                binding[*v] = NONE;
            }
        };
        let candidates = if b0 != NONE {
            Some(store.by_arg[0].get(&b0))
        } else if b1 != NONE {
            Some(store.by_arg[1].get(&b1))
        } else {
            None
        };
        match candidates {
            Some(None) => {}
            Some(Some(ids)) => {
                let start = ids.partition_point(|&i| i < range.lo);
                for &id in &ids[start..] {
                    if id >= range.hi {
                        break;
                    }
                    visit(id, binding, matched);
                }
            }
            None => {
                for id in range.lo..range.hi {
                    visit(id, binding, matched);
                }
            }
        }
    }
}

/// Evaluation order for a rule when body atom `first` ranges over the delta:
/// greedily pick the atom with the most bound arguments next.
fn plan_for(rule: &CRule, first: usize) -> Vec<usize> {
    let mut bound = alloc::vec![false; rule.nvars];
    let mut plan = alloc::vec![first];
    let mark = |a: &CAtom, bound: &mut [bool]| {
        for s in a.args {
            if let Slot::Var(v) = s {
                bound[v] = true;
            }
        }
    };
    mark(&rule.body[first], &mut bound);
    let mut left: Vec<usize> = (0..rule.body.len()).filter(|&i| i != first).collect();
    while !left.is_empty() {
        let score = |i: usize| {
            rule.body[i]
                .args
                .iter()
                .filter(|s| match s {
                    Slot::Var(v) => bound[*v],
                    Slot::Const(_) => true,
                    Slot::Any => false,
                })
                .count()
        };
        let (pos, _) = left
            .iter()
            .enumerate()
            .max_by_key(|(k, &i)| (score(i), core::cmp::Reverse(*k)))
            .expect("non-empty");
        let next = left.remove(pos);
        mark(&rule.body[next], &mut bound);
        plan.push(next);
    }
    plan
}

fn instantiate(atom: &CAtom, binding: &[u32]) -> [u32; 2] {
    [resolve(atom.args[0], binding), resolve(atom.args[1], binding)]
}

fn split_database(
    vocab: &Vocabulary,
    db: &SampleKb,
) -> (Vec<(usize, [u32; 2])>, Vec<(usize, [u32; 2])>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for lit in db.literals() {
        let k = fact_key(vocab, &lit.fact);
        if lit.positive {
            pos.push(k);
        } else {
            neg.push(k);
        }
    }
    (pos, neg)
}

fn contradictions(
    vocab: &Vocabulary,
    neg: &[(usize, [u32; 2])],
    holds: impl Fn(usize, [u32; 2]) -> bool,
) -> Vec<Violation> {
    neg.iter()
        .filter(|(p, t)| holds(*p, *t))
        .map(|(p, t)| Violation::Contradiction(key_fact(vocab, *p, *t)))
        .collect()
}

/// Computes the least model of `program ∪ db` by semi-naive evaluation.
pub fn materialize(program: &Program, db: &SampleKb) -> LeastModel {
    let vocab = &program.vocabulary;
    let mut roster = db.roster.clone();
    let rules = compile(program, &mut roster);
    let npred = vocab.num_classes() + vocab.num_relations();
    let mut stores: Vec<Store> = (0..npred).map(|_| Store::default()).collect();
    let (pos, neg) = split_database(vocab, db);
    for (p, t) in &pos {
        stores[*p].insert(*t);
    }
    let plans: Vec<Vec<Vec<usize>>> = rules
        .iter()
        .map(|r| (0..r.body.len()).map(|i| plan_for(r, i)).collect())
        .collect();

    let mut violations = BTreeSet::new();
    let mut stable = alloc::vec![0u32; npred];
    loop {
        let total: Vec<u32> = stores.iter().map(|s| s.tuples.len() as u32).collect();
        if total == stable {
            break;
        }
        let mut fresh: Vec<(usize, [u32; 2])> = Vec::new();
        let mut pending: HashSet<(usize, [u32; 2])> = HashSet::new();
        {
            let engine = Engine { stores: &stores };
            for (rule, rule_plans) in rules.iter().zip(&plans) {
                let mut binding = alloc::vec![NONE; rule.nvars];
                let mut matched = alloc::vec![[NONE; 2]; rule.body.len()];
                for (i, plan) in rule_plans.iter().enumerate() {
                    let p = rule.body[i].pred;
                    if stable[p] == total[p] {
                        continue;
                    }
                    let ranges: Vec<Range> = rule
                        .body
                        .iter()
                        .enumerate()
                        .map(|(j, a)| match j.cmp(&i) {
                            core::cmp::Ordering::Less => Range {
                                lo: 0,
                                hi: stable[a.pred],
                            },
                            core::cmp::Ordering::Equal => Range {
                                lo: stable[a.pred],
                                hi: total[a.pred],
                            },
                            core::cmp::Ordering::Greater => Range {
                                lo: 0,
                                hi: total[a.pred],
                            },
                        })
                        .collect();
                    let mut emit = |binding: &[u32], matched: &[[u32; 2]]| match &rule.head {
                        Some(h) => {
                            let t = instantiate(h, binding);
                            if !stores[h.pred].set.contains(&t) && pending.insert((h.pred, t)) {
                                fresh.push((h.pred, t));
                            }
                        }
                        None => {
                            violations.insert(Violation::Constraint {
                                rule: rule.index,
                                body: rule
                                    .body
                                    .iter()
                                    .zip(matched)
                                    .map(|(a, t)| key_fact(vocab, a.pred, *t))
                                    .collect(),
                            });
                        }
                    };
                    engine.join(rule, plan, &ranges, &mut binding, &mut matched, &mut emit);
                }
            }
        }
        stable = total;
        for (p, t) in fresh {
            stores[p].insert(t);
        }
    }

    violations.extend(contradictions(vocab, &neg, |p, t| stores[p].set.contains(&t)));
    let derived = stores
        .iter()
        .enumerate()
        .flat_map(|(p, s)| s.tuples.iter().map(move |t| key_fact(vocab, p, *t)))
        .collect();
    LeastModel {
        roster,
        derived,
        inconsistent: !violations.is_empty(),
        violations,
    }
}

// ---------------------------------------------------------------------------
// Naive oracle

type Interp = BTreeSet<(usize, [u32; 2])>;

fn naive_matches(
    rule: &CRule,
    facts: &Interp,
    k: usize,
    binding: &mut Vec<u32>,
    matched: &mut Vec<[u32; 2]>,
    out: &mut Vec<(Vec<u32>, Vec<[u32; 2]>)>,
) {
    if k == rule.body.len() {
        if neq_holds(&rule.neq, binding) {
            out.push((binding.clone(), matched.clone()));
        }
        return;
    }
    let atom = &rule.body[k];
    let lo = (atom.pred, [0, 0]);
    let hi = (atom.pred, [u32::MAX, u32::MAX]);
    for (_, t) in facts.range(lo..=hi) {
        let saved = binding.clone();
        let mut ok = true;
        for (i, s) in atom.args.iter().enumerate() {
            match *s {
                Slot::Any => {}
                Slot::Const(c) => ok &= t[i] == c,
                Slot::Var(v) => {
                    if binding[v] == NONE {
                        binding[v] = t[i];
                    } else {
                        ok &= binding[v] == t[i];
                    }
                }
            }
        }
        if ok {
            matched.push(*t);
            naive_matches(rule, facts, k + 1, binding, matched, out);
            matched.pop();
        }
        *binding = saved;
    }
}

fn consequences(rules: &[CRule], facts: &Interp) -> Interp {
    let mut out = Interp::new();
    for rule in rules {
        let Some(head) = &rule.head else { continue };
        let mut found = Vec::new();
        naive_matches(
            rule,
            facts,
            0,
            &mut alloc::vec![NONE; rule.nvars],
            &mut Vec::new(),
            &mut found,
        );
        for (b, _) in found {
            out.insert((head.pred, instantiate(head, &b)));
        }
    }
    out
}

/// Naive fixpoint iteration: apply every rule to everything until nothing changes.
pub fn naive_fixpoint(program: &Program, db: &SampleKb) -> LeastModel {
    let vocab = &program.vocabulary;
    let mut roster = db.roster.clone();
    let rules = compile(program, &mut roster);
    let (pos, neg) = split_database(vocab, db);
    let mut facts: Interp = pos.into_iter().collect();
    loop {
        let next = consequences(&rules, &facts);
        let before = facts.len();
        facts.extend(next);
        if facts.len() == before {
            break;
        }
    }
    let mut violations = BTreeSet::new();
    for rule in rules.iter().filter(|r| r.head.is_none()) {
        let mut found = Vec::new();
        naive_matches(
            rule,
            &facts,
            0,
            &mut alloc::vec![NONE; rule.nvars],
            &mut Vec::new(),
            &mut found,
        );
        for (_, m) in found {
            violations.insert(Violation::Constraint {
                rule: rule.index,
                body: rule
                    .body
                    .iter()
                    .zip(&m)
                    .map(|(a, t)| key_fact(vocab, a.pred, *t))
                    .collect(),
            });
        }
    }
    violations.extend(contradictions(vocab, &neg, |p, t| facts.contains(&(p, t))));
    LeastModel {
        derived: facts.iter().map(|(p, t)| key_fact(vocab, *p, *t)).collect(),
        roster,
        inconsistent: !violations.is_empty(),
        violations,
    }
}

/// One round of naive rule application (constraints ignored) over `facts`.
pub fn immediate_consequences(
    program: &Program,
    roster: &Roster,
    facts: &BTreeSet<Fact>,
) -> BTreeSet<Fact> {
    let vocab = &program.vocabulary;
    let mut roster = roster.clone();
    let rules = compile(program, &mut roster);
    let interp: Interp = facts.iter().map(|f| fact_key(vocab, f)).collect();
    consequences(&rules, &interp)
        .into_iter()
        .map(|(p, t)| key_fact(vocab, p, t))
        .collect()
}

// ---------------------------------------------------------------------------
// Entailment

fn check_literal(lit: &Literal, roster: &Roster) -> Result<(), ReasonerError> {
    for i in lit.fact.individuals() {
        if !roster.contains(i) {
            return Err(ReasonerError::UnknownIndividual(i.0));
        }
    }
    Ok(())
}

/// Decides `program ∪ db ⊨ lit` under the given semantics.
pub fn entails(
    program: &Program,
    db: &SampleKb,
    lit: &Literal,
    semantics: Semantics,
) -> Result<EntailmentVerdict, ReasonerError> {
    check_literal(lit, &db.roster)?;
    if from_triple(&lit.as_triple(), &program.vocabulary).is_err() {
        return Err(ReasonerError::UnknownPredicate);
    }
    let model = materialize(program, db);
    let entailed = if lit.positive {
        model.contains(&lit.fact)
    } else {
        match semantics {
            Semantics::Plain => refutes(program, db, &model, &lit.fact),
            Semantics::Cwa => !model.contains(&lit.fact),
            Semantics::Lcwa => {
                !model.contains(&lit.fact)
                    && (subject_known(db, &lit.fact) || refutes(program, db, &model, &lit.fact))
            }
        }
    };
    Ok(EntailmentVerdict {
        entailed,
        semantics,
    })
}

/// `¬α` holds by refutation when it is stated, or when adding `α` triggers a
/// violation the database alone does not.
fn refutes(program: &Program, db: &SampleKb, base: &LeastModel, fact: &Fact) -> bool {
    let neg = crate::kb::as_triple(&Literal::negative(*fact));
    if db.contains(&neg) {
        return true;
    }
    let mut extended = db.clone();
    extended
        .insert_literal(&Literal::positive(*fact))
        .expect("literal checked against roster");
    let m = materialize(program, &extended);
    m.violations.iter().any(|v| !base.violations.contains(v))
}

fn subject_known(db: &SampleKb, fact: &Fact) -> bool {
    let (pred, subj) = (fact.predicate(), fact.subject());
    db.literals()
        .any(|l| l.positive && l.fact.predicate() == pred && l.fact.subject() == subj)
}

pub fn is_consistent(program: &Program, db: &SampleKb) -> bool {
    !materialize(program, db).inconsistent
}

/// Labels every query with CWA truth from the least model of `program ∪ db`.
pub fn label_queries(program: &Program, db: &SampleKb, universe: &[Triple]) -> Vec<LabeledQuery> {
    let model = materialize(program, db);
    label_with_model(&model, &program.vocabulary, db, universe)
}

/// Labels queries against an explicitly supplied ground-truth model (which must
/// share `db`'s individual ids); origin is still decided by `db`.
pub fn label_with_model(
    truth: &LeastModel,
    vocab: &Vocabulary,
    db: &SampleKb,
    universe: &[Triple],
) -> Vec<LabeledQuery> {
    universe
        .iter()
        .map(|t| {
            let t = t.positive_form();
            let origin = if db.contains(&t) || db.contains(&t.negation()) {
                Origin::Specified
            } else {
                Origin::Inferable
            };
            LabeledQuery {
                triple: t,
                label: truth.contains_triple(&t, vocab),
                origin,
                group: Group::of(&t),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_facts, parse_literal, parse_program, triple_by_name};

    const KITCHEN: &str = "\
human(X) :- holds(X,_).
object(Y) :- holds(_,Y).
false :- human(X), object(X).
isAt(Y,Z) :- holds(X,Y), isAt(X,Z).
false :- isAt(X,Y), isAt(X,Z), Y != Z.
";
    const KITCHEN_FACTS: &str = "holds(mary,apple).\nisAt(mary,kitchen).\n";

    fn kitchen() -> (Program, SampleKb) {
        let p = parse_program(KITCHEN).unwrap();
        let d = parse_facts(KITCHEN_FACTS, &p.vocabulary).unwrap();
        (p, d)
    }

    fn query(p: &Program, d: &SampleKb, q: &str, sem: Semantics) -> bool {
        let mut d = d.clone();
        let l = parse_literal(q, &p.vocabulary, &mut d.roster).unwrap();
        entails(p, &d, &l, sem).unwrap().entailed
    }

    #[test]
    fn kitchen_model() {
        let (p, d) = kitchen();
        let m = materialize(&p, &d);
        assert!(!m.inconsistent);
        let v = &p.vocabulary;
        for (s, pr, o) in [
            ("mary", "member", "human"),
            ("apple", "member", "object"),
            ("apple", "isAt", "kitchen"),
        ] {
            let t = triple_by_name(v, &d.roster, s, pr, o).unwrap();
            assert!(m.contains_triple(&t, v), "{s} {pr} {o}");
        }
        assert_eq!(m.derived.len(), 5);
        assert_eq!(m, naive_fixpoint(&p, &d));
    }

    #[test]
    fn kitchen_queries() {
        let (p, d) = kitchen();
        assert!(query(&p, &d, "isAt(apple,kitchen)", Semantics::Cwa));
        assert!(!query(&p, &d, "human(apple)", Semantics::Cwa));
        assert!(query(&p, &d, "-human(apple)", Semantics::Cwa));
        assert!(!query(&p, &d, "isAt(mary,bedroom)", Semantics::Cwa));
        assert!(query(&p, &d, "-isAt(mary,bedroom)", Semantics::Cwa));
        // refutation through the constraints, without closing the world
        assert!(query(&p, &d, "-human(apple)", Semantics::Plain));
        assert!(query(&p, &d, "-isAt(mary,bedroom)", Semantics::Plain));
        // two locations for the apple would violate the second constraint
        assert!(query(&p, &d, "-isAt(apple,mary)", Semantics::Plain));
        assert!(!query(&p, &d, "-holds(mary,kitchen)", Semantics::Plain));
    }

    #[test]
    fn lcwa_sits_between_plain_and_cwa() {
        let (p, d) = kitchen();
        // holds(mary,_) is known, so the LCWA closes it; isAt(kitchen,_) is not.
        assert!(query(&p, &d, "-holds(mary,kitchen)", Semantics::Lcwa));
        assert!(!query(&p, &d, "-holds(mary,kitchen)", Semantics::Plain));
        assert!(!query(&p, &d, "-isAt(kitchen,mary)", Semantics::Lcwa));
        assert!(query(&p, &d, "-isAt(kitchen,mary)", Semantics::Cwa));
        assert!(!query(&p, &d, "-isAt(kitchen,mary)", Semantics::Plain));
    }

    #[test]
    fn empty_database_derives_nothing() {
        let (p, _) = kitchen();
        let d = SampleKb::default();
        let m = materialize(&p, &d);
        assert!(m.derived.is_empty());
        assert!(!m.inconsistent);
        assert_eq!(m, naive_fixpoint(&p, &d));
    }

    #[test]
    fn transitive_chain() {
        let p = parse_program("locatedIn(X,Z) :- locatedIn(X,Y), locatedIn(Y,Z).").unwrap();
        let d = parse_facts("locatedIn(a,b).\nlocatedIn(b,c).", &p.vocabulary).unwrap();
        let m = materialize(&p, &d);
        let t = triple_by_name(&p.vocabulary, &d.roster, "a", "locatedIn", "c").unwrap();
        assert!(m.contains_triple(&t, &p.vocabulary));
        assert_eq!(m.derived.len(), 3);
        assert_eq!(m, naive_fixpoint(&p, &d));
    }

    #[test]
    fn constraint_violation_is_reported_not_fatal() {
        let (p, _) = kitchen();
        let d = parse_facts(&alloc::format!("{KITCHEN_FACTS}human(apple).\n"), &p.vocabulary)
            .unwrap();
        let m = materialize(&p, &d);
        assert!(m.inconsistent);
        assert!(m
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Constraint { rule: 2, .. })));
        // derivation continued past the violation
        let t = triple_by_name(&p.vocabulary, &d.roster, "apple", "isAt", "kitchen").unwrap();
        assert!(m.contains_triple(&t, &p.vocabulary));
        assert!(!is_consistent(&p, &d));
        assert!(is_consistent(&p, &SampleKb::default()));
        assert_eq!(m, naive_fixpoint(&p, &d));
    }

    #[test]
    fn direct_contradiction_marks_inconsistency() {
        let (p, _) = kitchen();
        let d = parse_facts(
            &alloc::format!("{KITCHEN_FACTS}-isAt(apple,kitchen).\n"),
            &p.vocabulary,
        )
        .unwrap();
        let m = materialize(&p, &d);
        assert!(m.inconsistent);
        assert!(m
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Contradiction(_))));
    }

    #[test]
    fn program_constants_extend_the_roster() {
        let p = parse_program("p(X,home) :- q(X).\nr(X) :- p(X,home).").unwrap();
        let d = parse_facts("q(a).", &p.vocabulary).unwrap();
        let m = materialize(&p, &d);
        assert_eq!(m.roster.len(), 2);
        assert_eq!(m.derived.len(), 3);
        assert_eq!(m, naive_fixpoint(&p, &d));
    }

    #[test]
    fn repeated_variables_and_constants_in_bodies() {
        let p = parse_program("self(X) :- e(X,X).\nfromA(Y) :- e(a,Y).").unwrap();
        let d = parse_facts("e(a,a). e(a,b). e(b,c).", &p.vocabulary).unwrap();
        let m = materialize(&p, &d);
        assert_eq!(m.derived.len(), 3 + 1 + 2);
        assert_eq!(m, naive_fixpoint(&p, &d));
    }

    #[test]
    fn labels_mark_specified_facts() {
        let (p, d) = kitchen();
        let u = crate::kb::query_universe(&d, &p.vocabulary, crate::kb::QueryScope::Full);
        let labels = label_queries(&p, &d, &u);
        assert_eq!(labels.len(), u.len());
        let specified: Vec<_> = labels
            .iter()
            .filter(|q| q.origin == Origin::Specified)
            .collect();
        assert_eq!(specified.len(), 2);
        assert!(specified.iter().all(|q| q.label));
        assert_eq!(labels.iter().filter(|q| q.label).count(), 5);
    }

    #[test]
    fn unknown_individual_is_an_error() {
        let (p, d) = kitchen();
        let lit = Literal::positive(Fact::Class {
            class: ClassId(0),
            individual: IndividualId(99),
        });
        assert_eq!(
            entails(&p, &d, &lit, Semantics::Cwa),
            Err(ReasonerError::UnknownIndividual(99))
        );
    }
}
