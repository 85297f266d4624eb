//! Family trees: people with a gender, linked by `parentOf`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{stream_rng, DatagenError, LabeledSample};
use crate::dsl::{parse_program, Program};
use crate::kb::{query_universe, IndividualId, QueryScope, Roster, SampleKb, Triple};
use crate::reasoner::label_queries;

pub const FAMILY_ONTOLOGY: &str = "\
% Family relations. R(a,b) reads \"a is the R of b\".
@class female, male.
@relation auntOf, boyCousinOf, boyFirstCousinOnceRemovedOf, boySecondCousinOf,
    brotherOf, daughterOf, fatherOf, girlCousinOf, girlFirstCousinOnceRemovedOf,
    girlSecondCousinOf, granddaughterOf, grandfatherOf, grandmotherOf, grandsonOf,
    greatAuntOf, greatGranddaughterOf, greatGrandfatherOf, greatGrandmotherOf,
    greatGrandsonOf, greatUncleOf, motherOf, nephewOf, nieceOf, parentOf,
    secondAuntOf, secondUncleOf, sisterOf, sonOf, uncleOf.

false :- male(X), female(X).

fatherOf(X,Y) :- parentOf(X,Y), male(X).
motherOf(X,Y) :- parentOf(X,Y), female(X).
sonOf(X,Y) :- parentOf(Y,X), male(X).
daughterOf(X,Y) :- parentOf(Y,X), female(X).

brotherOf(X,Y) :- parentOf(P,X), parentOf(P,Y), X != Y, male(X).
sisterOf(X,Y) :- parentOf(P,X), parentOf(P,Y), X != Y, female(X).

grandfatherOf(X,Z) :- parentOf(X,Y), parentOf(Y,Z), male(X).
grandmotherOf(X,Z) :- parentOf(X,Y), parentOf(Y,Z), female(X).
grandsonOf(X,Z) :- parentOf(Z,Y), parentOf(Y,X), male(X).
granddaughterOf(X,Z) :- parentOf(Z,Y), parentOf(Y,X), female(X).

greatGrandfatherOf(X,W) :- parentOf(X,Y), parentOf(Y,Z), parentOf(Z,W), male(X).
greatGrandmotherOf(X,W) :- parentOf(X,Y), parentOf(Y,Z), parentOf(Z,W), female(X).
greatGrandsonOf(X,W) :- parentOf(W,Z), parentOf(Z,Y), parentOf(Y,X), male(X).
greatGranddaughterOf(X,W) :- parentOf(W,Z), parentOf(Z,Y), parentOf(Y,X), female(X).

uncleOf(X,Y) :- brotherOf(X,P), parentOf(P,Y).
auntOf(X,Y) :- sisterOf(X,P), parentOf(P,Y).
nephewOf(X,Y) :- parentOf(P,X), brotherOf(Y,P), male(X).
nephewOf(X,Y) :- parentOf(P,X), sisterOf(Y,P), male(X).
nieceOf(X,Y) :- parentOf(P,X), brotherOf(Y,P), female(X).
nieceOf(X,Y) :- parentOf(P,X), sisterOf(Y,P), female(X).

greatUncleOf(X,Y) :- brotherOf(X,G), parentOf(G,P), parentOf(P,Y).
greatAuntOf(X,Y) :- sisterOf(X,G), parentOf(G,P), parentOf(P,Y).

boyCousinOf(X,Y) :- parentOf(P,X), uncleOf(P,Y), X != Y, male(X).
boyCousinOf(X,Y) :- parentOf(P,X), auntOf(P,Y), X != Y, male(X).
girlCousinOf(X,Y) :- parentOf(P,X), uncleOf(P,Y), X != Y, female(X).
girlCousinOf(X,Y) :- parentOf(P,X), auntOf(P,Y), X != Y, female(X).

% X is a child of a cousin of Y.
boyFirstCousinOnceRemovedOf(X,Y) :- parentOf(P,X), boyCousinOf(P,Y), male(X).
boyFirstCousinOnceRemovedOf(X,Y) :- parentOf(P,X), girlCousinOf(P,Y), male(X).
girlFirstCousinOnceRemovedOf(X,Y) :- parentOf(P,X), boyCousinOf(P,Y), female(X).
girlFirstCousinOnceRemovedOf(X,Y) :- parentOf(P,X), girlCousinOf(P,Y), female(X).

boySecondCousinOf(X,Y) :- parentOf(P,X), parentOf(Q,Y), boyCousinOf(P,Q), X != Y, male(X).
boySecondCousinOf(X,Y) :- parentOf(P,X), parentOf(Q,Y), girlCousinOf(P,Q), X != Y, male(X).
girlSecondCousinOf(X,Y) :- parentOf(P,X), parentOf(Q,Y), boyCousinOf(P,Q), X != Y, female(X).
girlSecondCousinOf(X,Y) :- parentOf(P,X), parentOf(Q,Y), girlCousinOf(P,Q), X != Y, female(X).

% X is a cousin of a parent of Y.
secondUncleOf(X,Y) :- boyCousinOf(X,P), parentOf(P,Y).
secondAuntOf(X,Y) :- girlCousinOf(X,P), parentOf(P,Y).
";

/// The built-in family ontology.
pub fn family_ontology() -> Program {
    parse_program(FAMILY_ONTOLOGY).expect("built-in family ontology parses")
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FamilyGenConfig {
    pub max_people: usize,
    /// Maximum number of generations spanned by one tree.
    pub max_depth: usize,
    /// Maximum number of children per person.
    pub max_branching: usize,
    /// Chance of halting after each successful addition.
    pub stop_probability: f64,
}

impl Default for FamilyGenConfig {
    fn default() -> Self {
        Self {
            max_people: 26,
            max_depth: 5,
            max_branching: 5,
            stop_probability: 0.02,
        }
    }
}

impl FamilyGenConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.max_people == 0 || self.max_depth == 0 || self.max_branching == 0 {
            return Err(DatagenError::InvalidConfig("bounds must be positive"));
        }
        if !(0.0..=1.0).contains(&self.stop_probability) {
            return Err(DatagenError::InvalidConfig("stop probability must lie in [0,1]"));
        }
        Ok(())
    }
}

struct Person {
    male: bool,
    generation: i32,
    parents: Vec<usize>,
    children: usize,
}

// Consecutive rejected additions before the tree is considered saturated.
const MAX_REJECTIONS: usize = 1000;

/// Grows one random family tree.
///
/// Starting from a single person, a uniformly chosen person receives either a
/// child or (coin flip, only while they have fewer than two parents) a parent.
/// Additions that would break the depth or branching bound are rejected. A
/// second parent always has the opposite gender of the first.
pub fn generate_family_sample<R: Rng + ?Sized>(
    cfg: &FamilyGenConfig,
    rng: &mut R,
) -> Result<SampleKb, DatagenError> {
    cfg.validate()?;
    let mut people = alloc::vec![Person {
        male: rng.random_bool(0.5),
        generation: 0,
        parents: Vec::new(),
        children: 0,
    }];
    let (mut lo, mut hi) = (0i32, 0i32);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut rejections = 0;
    while people.len() < cfg.max_people && rejections < MAX_REJECTIONS {
        let p = rng.random_range(0..people.len());
        let add_parent = people[p].parents.len() < 2 && rng.random_bool(0.5);
        let g = people[p].generation + if add_parent { -1 } else { 1 };
        let span = (hi.max(g) - lo.min(g) + 1) as usize;
        let fits = span <= cfg.max_depth && (add_parent || people[p].children < cfg.max_branching);
        if !fits {
            rejections += 1;
            continue;
        }
        rejections = 0;
        lo = lo.min(g);
        hi = hi.max(g);
        let new = people.len();
        if add_parent {
            let male = match people[p].parents.first() {
                Some(&other) => !people[other].male,
                None => rng.random_bool(0.5),
            };
            people.push(Person { male, generation: g, parents: Vec::new(), children: 1 });
            people[p].parents.push(new);
            edges.push((new, p));
        } else {
            people.push(Person {
                male: rng.random_bool(0.5),
                generation: g,
                parents: alloc::vec![p],
                children: 0,
            });
            people[p].children += 1;
            edges.push((p, new));
        }
        if rng.random_bool(cfg.stop_probability) {
            break;
        }
    }

    let vocab = family_ontology().vocabulary;
    let parent = vocab.relation("parentOf").expect("declared");
    let (male, female) = (vocab.class("male").expect("declared"), vocab.class("female").expect("declared"));
    let roster = Roster::from_names((0..people.len()).map(|i| format!("p{i}")));
    let mut kb = SampleKb::new(roster);
    for (i, person) in people.iter().enumerate() {
        let c = if person.male { male } else { female };
        kb.insert(Triple::member(IndividualId(i as u32), c)).expect("in roster");
    }
    for (a, b) in edges {
        kb.insert(Triple::relation(IndividualId(a as u32), parent, IndividualId(b as u32)))
            .expect("in roster");
    }
    Ok(kb)
}

/// Sample `index` of a family corpus seeded with `seed`, labeled over the full
/// query universe.
pub fn family_labeled_sample(
    program: &Program,
    cfg: &FamilyGenConfig,
    seed: u64,
    index: u64,
) -> Result<LabeledSample, DatagenError> {
    let mut rng = stream_rng(seed, index);
    let kb = generate_family_sample(cfg, &mut rng)?.with_provenance("family", seed);
    let universe = query_universe(&kb, &program.vocabulary, QueryScope::Full);
    let queries = label_queries(program, &kb, &universe);
    Ok(LabeledSample { kb, queries })
}

/// Shape statistics of a family sample, computed from its facts alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeShape {
    pub people: usize,
    /// Number of people on the longest `parentOf` chain.
    pub depth: usize,
    pub max_children: usize,
    pub max_parents: usize,
}

pub fn tree_shape(kb: &SampleKb, program: &Program) -> TreeShape {
    let parent = program.vocabulary.relation("parentOf").expect("family vocabulary");
    let n = kb.roster.len();
    let mut children: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let mut parents = alloc::vec![0usize; n];
    for t in kb.facts() {
        if t.predicate == crate::kb::TriplePredicate::Relation(parent) && !t.negated {
            let o = t.object_individual().expect("relation triple");
            children[t.subject.index()].push(o.index());
            parents[o.index()] += 1;
        }
    }
    // longest downward chain from each node, memoized; the graph is acyclic
    fn down(i: usize, children: &[Vec<usize>], memo: &mut [usize]) -> usize {
        if memo[i] == 0 {
            memo[i] = 1 + children[i].iter().map(|&c| down(c, children, memo)).max().unwrap_or(0);
        }
        memo[i]
    }
    let mut memo = alloc::vec![0usize; n];
    let depth = (0..n).map(|i| down(i, &children, &mut memo)).max().unwrap_or(0);
    TreeShape {
        people: n,
        depth,
        max_children: children.iter().map(Vec::len).max().unwrap_or(0),
        max_parents: parents.iter().copied().max().unwrap_or(0),
    }
}
