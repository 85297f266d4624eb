//! Random programs and databases for property tests of the parser and reasoner.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::dsl::{Atom, BodyAtom, Head, Program, Rule, Term};
use crate::kb::{
    ClassId, IndividualId, PredicateRef, RelationId, Roster, SampleKb, Triple, Vocabulary,
};

#[derive(Debug, Clone, Copy)]
pub struct FuzzConfig {
    pub max_classes: usize,
    pub max_relations: usize,
    pub max_rules: usize,
    pub max_body: usize,
    pub max_constants: usize,
    pub max_facts: usize,
    /// Probability that a generated rule is a constraint.
    pub constraint_rate: f64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            max_classes: 2,
            max_relations: 3,
            max_rules: 5,
            max_body: 3,
            max_constants: 6,
            max_facts: 12,
            constraint_rate: 0.15,
        }
    }
}

const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

fn random_vocab<R: Rng + ?Sized>(rng: &mut R, cfg: &FuzzConfig) -> Vocabulary {
    let nc = rng.random_range(0..=cfg.max_classes);
    let nr = rng.random_range(1..=cfg.max_relations.max(1));
    Vocabulary::with_names(
        (0..nc).map(|i| format!("c{i}")),
        (0..nr).map(|i| format!("r{i}")),
    )
    .expect("generated names are valid")
}

fn random_predicate<R: Rng + ?Sized>(rng: &mut R, vocab: &Vocabulary) -> PredicateRef {
    let n = vocab.num_classes() + vocab.num_relations();
    let k = rng.random_range(0..n);
    if k < vocab.num_classes() {
        PredicateRef::Class(ClassId(k as u32))
    } else {
        PredicateRef::Relation(RelationId((k - vocab.num_classes()) as u32))
    }
}

fn random_body_term<R: Rng + ?Sized>(rng: &mut R, constants: &[String]) -> Term {
    match rng.random_range(0..10) {
        0 if !constants.is_empty() => Term::Constant(constants.choose(rng).unwrap().clone()),
        1 => Term::Anonymous,
        _ => Term::Variable((*VARS.choose(rng).unwrap()).into()),
    }
}

fn random_rule<R: Rng + ?Sized>(
    rng: &mut R,
    vocab: &Vocabulary,
    constants: &[String],
    cfg: &FuzzConfig,
) -> Rule {
    let nbody = rng.random_range(1..=cfg.max_body.max(1));
    let mut body = Vec::new();
    let mut bound: Vec<String> = Vec::new();
    for _ in 0..nbody {
        let p = random_predicate(rng, vocab);
        let args: Vec<Term> = (0..p.arity()).map(|_| random_body_term(rng, constants)).collect();
        for a in &args {
            if let Term::Variable(v) = a {
                if !bound.contains(v) {
                    bound.push(v.clone());
                }
            }
        }
        body.push(BodyAtom::Atom(Atom { predicate: p, args }));
    }
    let pick_head_term = |rng: &mut R| -> Term {
        if !bound.is_empty() && (constants.is_empty() || rng.random_bool(0.9)) {
            Term::Variable(bound.choose(rng).unwrap().clone())
        } else if !constants.is_empty() {
            Term::Constant(constants.choose(rng).unwrap().clone())
        } else {
            Term::Constant("k0".into())
        }
    };
    if bound.len() >= 2 && rng.random_bool(0.25) {
        let l = bound.choose(rng).unwrap().clone();
        let r = bound.choose(rng).unwrap().clone();
        body.push(BodyAtom::NotEqual(Term::Variable(l), Term::Variable(r)));
    }
    let head = if rng.random_bool(cfg.constraint_rate) {
        Head::Bottom
    } else {
        let p = random_predicate(rng, vocab);
        let args = (0..p.arity()).map(|_| pick_head_term(rng)).collect();
        Head::Atom(Atom { predicate: p, args })
    };
    Rule { head, body }
}

/// A random safe program over a fresh vocabulary `c0.., r0..`, using constants `k0..`.
pub fn random_program<R: Rng + ?Sized>(rng: &mut R, cfg: &FuzzConfig) -> Program {
    let vocabulary = random_vocab(rng, cfg);
    let nconst = rng.random_range(1..=cfg.max_constants.max(1));
    let constants: Vec<String> = (0..nconst).map(|i| format!("k{i}")).collect();
    let nrules = rng.random_range(1..=cfg.max_rules.max(1));
    let rules = (0..nrules)
        .map(|_| random_rule(rng, &vocabulary, &constants, cfg))
        .collect();
    Program { vocabulary, rules }
}

/// A random positive database over `vocab` with constants `k0..k{n-1}`.
pub fn random_database<R: Rng + ?Sized>(
    rng: &mut R,
    vocab: &Vocabulary,
    constants: usize,
    facts: usize,
) -> SampleKb {
    let roster = Roster::from_names((0..constants).map(|i| format!("k{i}")));
    let mut db = SampleKb::new(roster);
    let n = constants as u32;
    for _ in 0..facts {
        let t = match random_predicate(rng, vocab) {
            PredicateRef::Class(c) => Triple::member(IndividualId(rng.random_range(0..n)), c),
            PredicateRef::Relation(r) => Triple::relation(
                IndividualId(rng.random_range(0..n)),
                r,
                IndividualId(rng.random_range(0..n)),
            ),
        };
        db.insert(t).expect("ids drawn from roster");
    }
    db
}

/// Source text of a rule whose head mentions a variable missing from its body.
pub fn random_unsafe_rule_text<R: Rng + ?Sized>(rng: &mut R) -> String {
    let body_var = VARS.choose(rng).unwrap();
    let free = VARS.iter().find(|v| *v != body_var).unwrap();
    match rng.random_range(0..3) {
        0 => format!("p({free}) :- q({body_var})."),
        1 => format!("p({body_var},{free}) :- q({body_var},_)."),
        _ => format!("false :- q({body_var}), {body_var} != {free}."),
    }
}
