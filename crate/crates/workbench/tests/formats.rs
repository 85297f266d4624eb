use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrn_core::datagen::countries::{synthetic_world, CountriesConfig, CountriesGenerator, CountriesVersion};
use rrn_core::datagen::family::{family_labeled_sample, family_ontology, FamilyGenConfig};
use rrn_core::harness::{TrainConfig, TrainState};
use rrn_core::rrn::{Hyperparams, Rrn};
use rrn_workbench::checkpoint;
use rrn_workbench::dataset::{
    generate_countries_dataset, generate_family_dataset, CountriesDatasetConfig, Dataset, FamilyDatasetConfig, Split,
    SplitSizes,
};
use rrn_workbench::fixtures::kitchen;
use rrn_workbench::io::{facts_to_text, labels_to_text, parse_labels, parse_world, world_to_text};
use rrn_workbench::WorkbenchError;

#[test]
fn facts_and_labels_roundtrip() {
    let p = family_ontology();
    let cfg = FamilyGenConfig { max_people: 9, ..Default::default() };
    for i in 0..5 {
        let s = family_labeled_sample(&p, &cfg, 3, i).unwrap();
        let text = facts_to_text(&s.kb, &p.vocabulary);
        let kb = rrn_core::dsl::parse_facts(&text, &p.vocabulary).unwrap();
        assert_eq!(kb.roster, s.kb.roster);
        assert!(kb.facts().eq(s.kb.facts()));
        let labels = labels_to_text(&s.queries, &p.vocabulary, &kb.roster);
        let back = parse_labels(&labels, &p.vocabulary, &kb.roster, "x".as_ref()).unwrap();
        assert_eq!(back, s.queries);
    }
}

#[test]
fn label_parse_errors_name_the_line() {
    let (p, kb) = kitchen();
    let bad = "mary\tholds\tapple\t+\ttrue\tspecified\nmary\tholds\tpear\t+\ttrue\tspecified\n";
    match parse_labels(bad, &p.vocabulary, &kb.roster, "l.tsv".as_ref()) {
        Err(WorkbenchError::Format { line, message, .. }) => {
            assert_eq!(line, 2);
            assert!(message.contains("pear"));
        }
        other => panic!("expected a format error, got {other:?}"),
    }
    let short = "mary\tholds\tapple\t+\n";
    assert!(parse_labels(short, &p.vocabulary, &kb.roster, "l.tsv".as_ref()).is_err());
}

#[test]
fn world_table_roundtrip() {
    let w = synthetic_world().normalized().unwrap();
    let text = world_to_text(&w);
    assert_eq!(parse_world(&text, "w.tsv".as_ref()).unwrap(), w);
    let asym = "a\tr1\ts1\nb\tr1\ts1\nneighbor\ta\tb\nneighbor\tb\ta\n";
    let parsed = parse_world(asym, "w.tsv".as_ref()).unwrap();
    assert_eq!(parsed.neighbors, vec![("a".to_string(), "b".to_string())]);
    let bad = "a\tr1\ts1\nb\tr2\ts1\n";
    assert!(parse_world(bad, "w.tsv".as_ref()).is_err());
}

#[test]
fn family_dataset_reloads_as_generated() {
    let dir = tempfile::tempdir().unwrap();
    let gen = FamilyGenConfig { max_people: 10, ..Default::default() };
    let cfg = FamilyDatasetConfig { sizes: SplitSizes { train: 4, eval: 2, test: 3 }, generator: gen };
    let m = generate_family_dataset(dir.path(), &cfg, 5, 2).unwrap();
    let ids: Vec<u64> = Split::ALL.iter().flat_map(|&s| m.splits.get(s).iter().map(|e| e.id)).collect();
    assert_eq!(ids, (0..9).collect::<Vec<_>>(), "ids are unique across splits");
    let ds = Dataset::open(dir.path()).unwrap();
    let p = family_ontology();
    for split in Split::ALL {
        for (entry, s) in ds.entries(split).iter().zip(ds.load_split(split).unwrap()) {
            let want = family_labeled_sample(&p, &gen, 5, entry.id).unwrap();
            assert_eq!(s.kb.roster, want.kb.roster);
            assert!(s.kb.facts().eq(want.kb.facts()));
            assert_eq!(s.queries, want.queries);
            assert_eq!(entry.num_queries, want.queries.len());
        }
    }
}

#[test]
fn countries_dataset_keeps_test_countries_out_of_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CountriesDatasetConfig { train_samples: 3, generator: CountriesConfig::new(CountriesVersion::S3) };
    generate_countries_dataset(dir.path(), &synthetic_world(), &cfg, 9, 1).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let gen = CountriesGenerator::new(synthetic_world(), cfg.generator, 9).unwrap();
    let (eval_set, test_set) = gen.held_out();
    assert_eq!(ds.entries(Split::Eval)[0].test_individuals, eval_set);
    assert_eq!(ds.entries(Split::Test)[0].test_individuals, test_set);
    for s in ds.load_split(Split::Train).unwrap() {
        for name in eval_set.iter().chain(test_set) {
            assert!(s.kb.roster.get(name).is_none(), "{name} leaked into training");
        }
    }
    let test = ds.load_split(Split::Test).unwrap();
    assert_eq!(test[0].queries, gen.test_sample().labeled.queries);
}

#[test]
fn checkpoint_roundtrip_and_vocabulary_check() {
    let dir = tempfile::tempdir().unwrap();
    let p = family_ontology();
    let hp = Hyperparams { dim: 4, hidden: 5, passes: 2, ..Default::default() };
    let model: Rrn<f32> = Rrn::new(&p.vocabulary, hp, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut state = TrainState::new(model);
    state.epoch = 3;
    state.best_eval_score = Some(0.123456789);
    state.adam.step = 17;
    state.adam.m[2] = -0.5;
    state.best_params[0] = 9.0;
    let cfg = TrainConfig { seed: 42, ..Default::default() };
    checkpoint::save(dir.path(), &p.vocabulary, &state, &cfg).unwrap();

    let (m, back) = checkpoint::load(dir.path(), &p.vocabulary).unwrap();
    assert_eq!(m.train, cfg);
    assert_eq!(m.num_parameters, state.model.params.len());
    assert_eq!(back.model.params, state.model.params);
    assert_eq!(back.best_params, state.best_params);
    assert_eq!(back.adam.m, state.adam.m);
    assert_eq!(back.adam.v, state.adam.v);
    assert_eq!((back.epoch, back.adam.step, back.best_eval_score), (3, 17, Some(0.123456789)));
    let blob = fs::read(dir.path().join("params.bin")).unwrap();
    assert_eq!(blob.len(), 4 * state.model.params.len());
    assert_eq!(&blob[..4], &state.model.params[0].to_le_bytes());

    let (other, _) = kitchen();
    match checkpoint::load(dir.path(), &other.vocabulary) {
        Err(WorkbenchError::VocabularyMismatch { .. }) => {}
        other => panic!("expected a vocabulary mismatch, got {:?}", other.map(|_| ())),
    }

    let mut blob = blob;
    blob[0] ^= 1;
    fs::write(dir.path().join("params.bin"), blob).unwrap();
    assert!(matches!(
        checkpoint::load(dir.path(), &p.vocabulary),
        Err(WorkbenchError::Checkpoint { .. })
    ));
}
