use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rrn_core::datagen::countries::{
    synthetic_grid_world,
    countries_ontology, synthetic_world, CountriesConfig, CountriesGenerator, CountriesVersion,
};
use rrn_core::datagen::family::{
    family_labeled_sample, family_ontology, generate_family_sample, tree_shape, FamilyGenConfig,
};
use rrn_core::datagen::sampling::{
    corrupt_conflict, corrupt_missing, extract_bfs_subgraph, sample_negatives,
};
use rrn_core::datagen::{stream_rng, DatagenError};
use rrn_core::dsl::{parse_facts, parse_program};
use rrn_core::kb::{
    Group, IndividualId, LabeledQuery, Origin, Roster, SampleKb, Triple, TriplePredicate,
    Vocabulary,
};
use rrn_core::reasoner::{is_consistent, materialize, naive_fixpoint};

const FAMILY_RELATIONS: [&str; 29] = [
    "auntOf", "boyCousinOf", "boyFirstCousinOnceRemovedOf", "boySecondCousinOf", "brotherOf",
    "daughterOf", "fatherOf", "girlCousinOf", "girlFirstCousinOnceRemovedOf",
    "girlSecondCousinOf", "granddaughterOf", "grandfatherOf", "grandmotherOf", "grandsonOf",
    "greatAuntOf", "greatGranddaughterOf", "greatGrandfatherOf", "greatGrandmotherOf",
    "greatGrandsonOf", "greatUncleOf", "motherOf", "nephewOf", "nieceOf", "parentOf",
    "secondAuntOf", "secondUncleOf", "sisterOf", "sonOf", "uncleOf",
];

#[test]
fn family_vocabulary_matches_relation_table() {
    let p = family_ontology();
    assert_eq!(p.vocabulary.relations(), FAMILY_RELATIONS);
    assert_eq!(p.vocabulary.classes(), ["female", "male"]);
    let derived: BTreeSet<&str> =
        p.derived_relations().into_iter().map(|r| p.vocabulary.relation_name(r)).collect();
    assert_eq!(derived.len(), 28);
    assert!(!derived.contains("parentOf"));
}

fn family_db(text: &str) -> (rrn_core::dsl::Program, SampleKb) {
    let p = family_ontology();
    let db = parse_facts(text, &p.vocabulary).unwrap();
    (p, db)
}

fn holds(p: &rrn_core::dsl::Program, db: &SampleKb, rel: &str, a: &str, b: &str) -> bool {
    let r = p.vocabulary.relation(rel).unwrap();
    let t = Triple::relation(db.roster.get(a).unwrap(), r, db.roster.get(b).unwrap());
    materialize(p, db).contains_triple(&t, &p.vocabulary)
}

#[test]
fn father_follows_from_parent_and_gender() {
    let (p, db) = family_db("parentOf(a,b). male(a). female(b).");
    assert!(holds(&p, &db, "fatherOf", "a", "b"));
    assert!(holds(&p, &db, "daughterOf", "b", "a"));
    assert!(!holds(&p, &db, "motherOf", "a", "b"));
}

#[test]
fn siblings_on_a_four_person_tree_agree_with_naive_oracle() {
    let (p, db) = family_db(
        "parentOf(m,a). parentOf(m,b). parentOf(m,c). female(m). male(a). female(b). male(c).",
    );
    assert_eq!(materialize(&p, &db), naive_fixpoint(&p, &db));
    assert!(holds(&p, &db, "brotherOf", "a", "b"));
    assert!(holds(&p, &db, "brotherOf", "a", "c"));
    assert!(holds(&p, &db, "sisterOf", "b", "a"));
    assert!(!holds(&p, &db, "brotherOf", "a", "a"));
    assert!(!holds(&p, &db, "sisterOf", "a", "b"));
}

#[test]
fn extended_kinship_directions() {
    // g -> {p, u}; p -> x; u -> y; x -> xc; y -> yc
    let (p, db) = family_db(
        "parentOf(g,p). parentOf(g,u). parentOf(p,x). parentOf(u,y). parentOf(x,xc). parentOf(y,yc).
         male(g). female(p). male(u). male(x). female(y). female(xc). male(yc).",
    );
    assert!(holds(&p, &db, "uncleOf", "u", "x"));
    assert!(holds(&p, &db, "nephewOf", "x", "u"));
    assert!(holds(&p, &db, "nieceOf", "y", "p"));
    assert!(holds(&p, &db, "boyCousinOf", "x", "y"));
    assert!(holds(&p, &db, "girlCousinOf", "y", "x"));
    assert!(holds(&p, &db, "greatUncleOf", "u", "xc"));
    assert!(holds(&p, &db, "greatGrandfatherOf", "g", "yc"));
    assert!(holds(&p, &db, "greatGranddaughterOf", "xc", "g"));
    // xc is a child of y's cousin x
    assert!(holds(&p, &db, "girlFirstCousinOnceRemovedOf", "xc", "y"));
    assert!(holds(&p, &db, "secondAuntOf", "y", "xc"));
    assert!(holds(&p, &db, "secondUncleOf", "x", "yc"));
    assert!(holds(&p, &db, "boySecondCousinOf", "yc", "xc"));
    assert!(holds(&p, &db, "girlSecondCousinOf", "xc", "yc"));
    assert!(is_consistent(&p, &db));
}

#[test]
fn family_bounds_hold_on_a_thousand_samples() {
    let p = family_ontology();
    let cfg = FamilyGenConfig::default();
    let mut total = 0usize;
    for i in 0..1000 {
        let kb = generate_family_sample(&cfg, &mut stream_rng(3, i)).unwrap();
        let s = tree_shape(&kb, &p);
        assert!(s.people <= 26 && s.depth <= 5 && s.max_children <= 5 && s.max_parents <= 2);
        assert!(is_consistent(&p, &kb));
        for t in kb.facts() {
            let name = match t.predicate {
                TriplePredicate::Member => "member",
                TriplePredicate::Relation(r) => p.vocabulary.relation_name(r),
            };
            assert!(name == "member" || name == "parentOf");
            assert!(!t.negated);
        }
        total += s.people;
    }
    let mean = total as f64 / 1000.0;
    assert!((mean - 22.8).abs() <= 0.2 * 22.8, "mean size {mean}");
}

#[test]
fn second_parent_has_opposite_gender() {
    let p = family_ontology();
    let parent = p.vocabulary.relation("parentOf").unwrap();
    let male = p.vocabulary.class("male").unwrap();
    for i in 0..200 {
        let kb = generate_family_sample(&FamilyGenConfig::default(), &mut stream_rng(4, i)).unwrap();
        for c in kb.roster.ids() {
            let parents: Vec<IndividualId> = kb
                .facts()
                .filter(|t| t.predicate == TriplePredicate::Relation(parent) && t.object_individual() == Some(c))
                .map(|t| t.subject)
                .collect();
            if let [a, b] = parents[..] {
                assert_ne!(kb.contains(&Triple::member(a, male)), kb.contains(&Triple::member(b, male)));
            }
        }
    }
}

#[test]
fn twelve_person_sample_has_4032_derived_relation_queries() {
    let p = family_ontology();
    let derived = p.derived_relations();
    let sample = (0..)
        .map(|i| family_labeled_sample(&p, &FamilyGenConfig::default(), 5, i).unwrap())
        .find(|s| s.kb.roster.len() == 12)
        .unwrap();
    let rel_queries: Vec<&LabeledQuery> =
        sample.queries.iter().filter(|q| q.group == Group::Relation).collect();
    let on_derived = rel_queries
        .iter()
        .filter(|q| matches!(q.triple.predicate, TriplePredicate::Relation(r) if derived.contains(&r)))
        .count();
    assert_eq!(on_derived, 4032);
    assert_eq!(rel_queries.len(), 12 * 12 * 29);
    assert_eq!(sample.queries.len(), 12 * 12 * 29 + 12 * 2);
    for q in &sample.queries {
        if sample.kb.contains(&q.triple) {
            assert!(q.label);
            assert_eq!(q.origin, Origin::Specified);
        }
    }
}

#[test]
fn inferable_relation_labels_are_sparse() {
    let p = family_ontology();
    let (mut pos, mut all) = (0usize, 0usize);
    for i in 0..1000 {
        let s = family_labeled_sample(&p, &FamilyGenConfig::default(), 6, i).unwrap();
        for q in &s.queries {
            if q.group == Group::Relation && q.origin == Origin::Inferable {
                all += 1;
                pos += q.label as usize;
            }
        }
    }
    let frac = pos as f64 / all as f64;
    assert!(frac < 0.03, "positive fraction {frac}");
}

#[test]
fn family_generation_is_deterministic() {
    let p = family_ontology();
    let cfg = FamilyGenConfig::default();
    for i in 0..20 {
        let a = family_labeled_sample(&p, &cfg, 9, i).unwrap();
        let b = family_labeled_sample(&p, &cfg, 9, i).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kb.to_tsv(&p.vocabulary), b.kb.to_tsv(&p.vocabulary));
    }
}

#[test]
fn invalid_family_config_is_rejected() {
    let cfg = FamilyGenConfig { stop_probability: 1.5, ..FamilyGenConfig::default() };
    assert!(generate_family_sample(&cfg, &mut stream_rng(0, 0)).is_err());
}

#[test]
fn countries_ontology_rules() {
    let p = countries_ontology();
    let db = parse_facts("locatedIn(c,s). locatedIn(s,r). neighborOf(a,b). locatedIn(d,lone).", &p.vocabulary).unwrap();
    let m = materialize(&p, &db);
    assert_eq!(m, naive_fixpoint(&p, &db));
    let id = |n: &str| db.roster.get(n).unwrap();
    let v = &p.vocabulary;
    let loc = v.relation("locatedIn").unwrap();
    let nb = v.relation("neighborOf").unwrap();
    assert!(m.contains_triple(&Triple::relation(id("c"), loc, id("r")), v));
    assert!(m.contains_triple(&Triple::member(id("s"), v.class("subregion").unwrap()), v));
    assert!(m.contains_triple(&Triple::member(id("r"), v.class("region").unwrap()), v));
    assert!(!m.contains_triple(&Triple::member(id("lone"), v.class("region").unwrap()), v));
    assert!(m.contains_triple(&Triple::relation(id("b"), nb, id("a")), v));
    for x in ["a", "b"] {
        assert!(m.contains_triple(&Triple::member(id(x), v.class("country").unwrap()), v));
    }
    assert!(!m.inconsistent);
}

fn located_in(p: &rrn_core::dsl::Program) -> TriplePredicate {
    TriplePredicate::Relation(p.vocabulary.relation("locatedIn").unwrap())
}

#[test]
fn countries_versions_drop_the_right_facts() {
    let world = synthetic_world();
    assert_eq!(world.countries.len(), 60);
    for version in [CountriesVersion::S1, CountriesVersion::S2, CountriesVersion::S3] {
        let g = CountriesGenerator::new(world.clone(), CountriesConfig::new(version), 1).unwrap();
        let p = g.program().clone();
        let test = g.test_sample();
        assert_eq!(test.test_countries.len(), 20);
        let kb = &test.labeled.kb;
        assert!(is_consistent(&p, kb));
        let m = materialize(&p, kb);
        let missing: Vec<&LabeledQuery> = test
            .labeled
            .queries
            .iter()
            .filter(|q| q.label && q.origin == Origin::Inferable && q.triple.predicate == located_in(&p))
            .filter(|q| test.test_countries.contains(&q.triple.subject))
            .collect();
        assert!(!missing.is_empty());
        let recovered = missing.iter().filter(|q| m.contains_triple(&q.triple, &p.vocabulary)).count();
        match version {
            CountriesVersion::S1 => assert_eq!(recovered, missing.len()),
            _ => assert!(recovered < missing.len()),
        }
        for q in &test.labeled.queries {
            if q.group == Group::Relation {
                assert!(test.test_countries.iter().any(|&c| q.triple.mentions(c)));
            }
        }
        // every test country keeps a neighbor outside the test set
        let nb = TriplePredicate::Relation(p.vocabulary.relation("neighborOf").unwrap());
        for &c in &test.test_countries {
            assert!(kb.facts().any(|t| t.predicate == nb
                && t.subject == c
                && !test.test_countries.contains(&t.object_individual().unwrap())));
        }
    }
}

#[test]
fn countries_held_out_sets_never_reach_training() {
    let g = CountriesGenerator::new(synthetic_world(), CountriesConfig::new(CountriesVersion::S3), 2).unwrap();
    let (eval, test) = g.held_out();
    let held: BTreeSet<&String> = eval.iter().chain(test).collect();
    assert_eq!(held.len(), 40);
    for i in 0..20 {
        let s = g.train_sample(i).unwrap();
        assert!(!s.test_countries.is_empty());
        for name in s.labeled.kb.roster.names() {
            assert!(!held.contains(name));
        }
        assert!(is_consistent(g.program(), &s.labeled.kb));
    }
    assert_eq!(g.train_sample(3).unwrap(), g.train_sample(3).unwrap());
}

#[test]
fn larger_worlds_train_on_full_drop_sets() {
    let world = synthetic_grid_world(16, 10);
    let g = CountriesGenerator::new(world, CountriesConfig::new(CountriesVersion::S2), 4).unwrap();
    assert_eq!(g.train_sample(0).unwrap().test_countries.len(), 20);
}

#[test]
fn twenty_independent_countries_instances() {
    let sets: BTreeSet<Vec<String>> = (0..20)
        .map(|seed| {
            let g = CountriesGenerator::new(synthetic_world(), CountriesConfig::new(CountriesVersion::S1), seed).unwrap();
            g.held_out().1.to_vec()
        })
        .collect();
    assert_eq!(sets.len(), 20);
}

fn chain_dump(n: usize, extra_component: usize) -> SampleKb {
    let mut v = Vocabulary::new();
    let r = v.add_relation("link").unwrap();
    let c = v.add_class("node").unwrap();
    let roster = Roster::from_names((0..n + extra_component).map(|i| format!("n{i}")));
    let mut kb = SampleKb::new(roster);
    for i in 0..n - 1 {
        kb.insert(Triple::relation(IndividualId(i as u32), r, IndividualId(i as u32 + 1))).unwrap();
    }
    for i in n..n + extra_component - 1 {
        kb.insert(Triple::relation(IndividualId(i as u32 + 1), r, IndividualId(i as u32))).unwrap();
    }
    for i in 0..(n + extra_component) as u32 {
        kb.insert(Triple::member(IndividualId(i), c)).unwrap();
    }
    kb
}

#[test]
fn bfs_on_a_long_chain_stops_at_n() {
    let dump = chain_dump(500, 2);
    let out = extract_bfs_subgraph(&dump, IndividualId(250), 200, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(out.sample.roster.len(), 200);
    assert!(!out.exhausted);
    // induced subgraph: 199 links plus 200 class facts, nothing dangling
    assert_eq!(out.sample.num_facts(), 199 + 200);
    out.sample.validate(&{
        let mut v = Vocabulary::new();
        v.add_relation("link").unwrap();
        v.add_class("node").unwrap();
        v
    })
    .unwrap();
}

#[test]
fn bfs_on_a_small_component_reports_exhaustion() {
    let dump = chain_dump(300, 150);
    let out = extract_bfs_subgraph(&dump, IndividualId(360), 200, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(out.sample.roster.len(), 150);
    assert!(out.exhausted);
    assert_eq!(
        extract_bfs_subgraph(&SampleKb::new(Roster::new()), IndividualId(0), 5, &mut ChaCha8Rng::seed_from_u64(0)),
        Err(DatagenError::EmptyDump)
    );
}

#[test]
fn negatives_avoid_true_triples_and_respect_budget() {
    let p = family_ontology();
    let s = family_labeled_sample(&p, &FamilyGenConfig::default(), 7, 0).unwrap();
    let truth: BTreeSet<Triple> = s.queries.iter().filter(|q| q.label).map(|q| q.triple).collect();
    let positives: Vec<LabeledQuery> = s
        .queries
        .iter()
        .filter(|q| q.label && q.group == Group::Relation)
        .take(10)
        .copied()
        .collect();
    let model = materialize(&p, &s.kb);
    let mut sets = BTreeSet::new();
    for seed in 0..100 {
        let neg = sample_negatives(&s.kb, &positives, 4, |t| truth.contains(t), &mut stream_rng(seed, 0));
        assert!(neg.len() <= 40);
        for q in &neg {
            assert!(!q.label);
            assert!(!model.contains_triple(&q.triple, &p.vocabulary));
        }
        sets.insert(neg);
    }
    assert!(sets.len() >= 95);
}

#[test]
fn missing_fact_corruption_removes_a_non_inferable_fact() {
    let p = family_ontology();
    let db = parse_facts("parentOf(a,b). parentOf(a,c). male(a). female(b). male(c).", &p.vocabulary).unwrap();
    for seed in 0..10 {
        let (out, removed) = corrupt_missing(&p, &db, &mut stream_rng(seed, 0)).unwrap();
        assert!(!out.contains(&removed));
        assert_eq!(out.num_facts() + 1, db.num_facts());
        assert!(!materialize(&p, &out).contains_triple(&removed, &p.vocabulary));
    }
    let single = parse_facts("male(a).", &p.vocabulary).unwrap();
    let (out, removed) = corrupt_missing(&p, &single, &mut stream_rng(0, 0)).unwrap();
    assert_eq!(out.num_facts(), 0);
    assert!(single.contains(&removed));
}

#[test]
fn missing_fact_corruption_skips_derivable_facts() {
    let p = parse_program("r(X,Z) :- r(X,Y), r(Y,Z).").unwrap();
    let db = parse_facts("r(a,b). r(b,c). r(a,c).", &p.vocabulary).unwrap();
    let rac = rrn_core::dsl::triple_by_name(&p.vocabulary, &db.roster, "a", "r", "c").unwrap();
    for seed in 0..20 {
        let (_, removed) = corrupt_missing(&p, &db, &mut stream_rng(seed, 0)).unwrap();
        assert_ne!(removed, rac);
    }
}

#[test]
fn conflict_corruption_adds_a_negation_to_a_copy() {
    let p = family_ontology();
    let db = parse_facts("parentOf(a,b). male(a). female(b).", &p.vocabulary).unwrap();
    let before = db.clone();
    let (out, f) = corrupt_conflict(&db, &mut stream_rng(1, 0)).unwrap();
    assert_eq!(db, before);
    assert!(out.contains(&f) && out.contains(&f.negation()));
    assert!(out.inconsistent_by_construction);
    let m = materialize(&p, &out);
    assert!(m.inconsistent);
    assert!(!is_consistent(&p, &out));
}
