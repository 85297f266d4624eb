use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrn_core::dsl::parse_facts;
use rrn_core::kb::{
    ClassId, Group, IndividualId, LabeledQuery, Origin, RelationId, Roster, SampleKb, Triple,
    Vocabulary,
};
use rrn_core::rrn::{
    adam_update, clip_global_norm, draw_schedule, encode, encode_taped, encode_with,
    init_embeddings, loss_and_gradients, loss_and_gradients_with, optimizer_step, predict,
    probabilities, update_step, AdamState, Embeddings, Hyperparams, Rrn, RrnError,
};

fn vocab() -> Vocabulary {
    Vocabulary::with_names(["a", "b"], ["r", "s"]).unwrap()
}

fn small_hp(dim: usize) -> Hyperparams {
    Hyperparams { dim, hidden: 5, passes: 2, ..Hyperparams::default() }
}

fn set(model: &mut Rrn<f64>, name: &str, values: &[f64]) {
    let t = model.layout().tensors().iter().find(|t| t.name == name).unwrap().clone();
    assert_eq!(t.len(), values.len());
    model.params[t.range()].copy_from_slice(values);
}

#[test]
fn initial_rows_are_unit_norm_and_seeded() {
    let hp = Hyperparams::default();
    let e: Embeddings<f32> = init_embeddings(50, &hp, &mut ChaCha8Rng::seed_from_u64(1));
    for i in 0..50 {
        let n: f32 = e.row(i).iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }
    let again: Embeddings<f32> = init_embeddings(50, &hp, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(e, again);
}

#[test]
fn initial_rows_never_collide() {
    let hp = Hyperparams { dim: 8, ..Hyperparams::default() };
    let e: Embeddings<f64> = init_embeddings(10_000, &hp, &mut ChaCha8Rng::seed_from_u64(2));
    let rows: BTreeSet<Vec<u64>> = (0..e.len()).map(|i| e.row(i).iter().map(|v| v.to_bits()).collect()).collect();
    assert_eq!(rows.len(), 10_000);
}

#[test]
fn update_step_touches_only_mentioned_rows() {
    let v = vocab();
    let model: Rrn<f32> = Rrn::new(&v, Hyperparams::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let mut e: Embeddings<f32> = init_embeddings(6, &model.hp, &mut rng);
        let before = e.clone();
        let s = IndividualId(rng.random_range(0..6));
        let t = if rng.random_bool(0.5) {
            Triple::relation(s, RelationId(rng.random_range(0..2)), IndividualId(rng.random_range(0..6)))
        } else {
            Triple::member(s, ClassId(rng.random_range(0..2)))
        };
        let t = if rng.random_bool(0.3) { t.negation() } else { t };
        update_step(&model, &mut e, &t).unwrap();
        let changed: Vec<usize> = (0..6).filter(|&i| e.row(i) != before.row(i)).collect();
        assert!(changed.len() <= 2);
        for i in 0..6 {
            if !t.mentions(IndividualId(i as u32)) {
                assert_eq!(e.row(i), before.row(i));
            }
            let n: f32 = e.row(i).iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn zero_cell_keeps_direction_and_bias_cell_matches_hand_computation() {
    let v = Vocabulary::with_names(["a"], ["r"]).unwrap();
    let mut model: Rrn<f64> = Rrn::zeros(&v, small_hp(2)).unwrap();
    let x = [0.6, 0.8];
    let mut e = Embeddings::from_rows(2, vec![x[0], x[1], 1.0, 0.0]);
    // gate 0.5, candidate tanh(0) = 0: half of x, renormalized back to x
    update_step(&model, &mut e, &Triple::member(IndividualId(0), ClassId(0))).unwrap();
    assert!((e.row(0)[0] - 0.6).abs() < 1e-12 && (e.row(0)[1] - 0.8).abs() < 1e-12);

    set(&mut model, "update.r.pos.subj.bc", &[1.0, 0.0]);
    update_step(&model, &mut e, &Triple::relation(IndividualId(0), RelationId(0), IndividualId(1))).unwrap();
    // u = 0.5 x + 0.5 (tanh 1, 0) = (0.680797, 0.4), normalized
    assert!((e.row(0)[0] - 0.862_193_602_8).abs() < 1e-9);
    assert!((e.row(0)[1] - 0.506_578_909_2).abs() < 1e-9);
    // object side has zero weights, so its row keeps its direction
    assert_eq!(e.row(1), &[1.0, 0.0]);
}

fn micro_kb(rng: &mut ChaCha8Rng, n: u32) -> SampleKb {
    let mut kb = SampleKb::new(Roster::from_names((0..n).map(|i| format!("i{i}"))));
    for _ in 0..rng.random_range(1..=5) {
        let s = IndividualId(rng.random_range(0..n));
        let t = if rng.random_bool(0.6) {
            Triple::relation(s, RelationId(rng.random_range(0..2)), IndividualId(rng.random_range(0..n)))
        } else {
            Triple::member(s, ClassId(rng.random_range(0..2)))
        };
        kb.insert(if rng.random_bool(0.2) { t.negation() } else { t }).unwrap();
    }
    kb
}

fn all_queries(n: u32, rng: &mut ChaCha8Rng) -> Vec<LabeledQuery> {
    let mut out = Vec::new();
    for s in 0..n {
        for c in 0..2 {
            out.push(LabeledQuery {
                triple: Triple::member(IndividualId(s), ClassId(c)),
                label: rng.random_bool(0.5),
                origin: Origin::Inferable,
                group: Group::Class,
            });
        }
        for o in 0..n {
            for r in 0..2 {
                out.push(LabeledQuery {
                    triple: Triple::relation(IndividualId(s), RelationId(r), IndividualId(o)),
                    label: rng.random_bool(0.5),
                    origin: Origin::Inferable,
                    group: Group::Relation,
                });
            }
        }
    }
    out
}

#[test]
fn encode_rejects_zero_passes_and_visits_each_fact_once_per_pass() {
    let v = vocab();
    let hp = Hyperparams { passes: 0, ..small_hp(4) };
    assert_eq!(Rrn::<f32>::zeros(&v, hp).unwrap_err(), RrnError::ZeroPasses);
    let model: Rrn<f64> = Rrn::new(&v, Hyperparams { passes: 1, ..small_hp(4) }, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let kb = micro_kb(&mut ChaCha8Rng::seed_from_u64(6), 3);
    let facts: Vec<Triple> = kb.facts().copied().collect();
    let init: Embeddings<f64> = init_embeddings(3, &model.hp, &mut ChaCha8Rng::seed_from_u64(7));
    let (_, tape) = encode_taped(&model, &facts, init.clone(), &draw_schedule(facts.len(), 1, &mut ChaCha8Rng::seed_from_u64(8))).unwrap();
    assert_eq!(tape.num_steps(), facts.len());
    assert_eq!(encode_with(&model, &facts, init, &[]), Err(RrnError::ZeroPasses));
}

#[test]
fn encode_refuses_samples_beyond_capacity() {
    let v = vocab();
    let model: Rrn<f32> = Rrn::zeros(&v, Hyperparams { capacity: 2, ..small_hp(4) }).unwrap();
    let kb = parse_facts("r(x,y). r(y,z). a(x).", &v).unwrap();
    assert_eq!(
        encode(&model, &kb, &mut ChaCha8Rng::seed_from_u64(0)),
        Err(RrnError::CapacityExceeded { facts: 3, capacity: 2 })
    );
}

#[test]
fn encoding_is_deterministic_for_a_seed() {
    let v = vocab();
    let model: Rrn<f32> = Rrn::new(&v, Hyperparams::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let kb = micro_kb(&mut ChaCha8Rng::seed_from_u64(10), 3);
    let a = encode(&model, &kb, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let b = encode(&model, &kb, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn probabilities_are_open_unit_interval_and_negation_complements() {
    let v = vocab();
    let model: Rrn<f64> = Rrn::new(&v, small_hp(4), &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let e: Embeddings<f64> = init_embeddings(3, &model.hp, &mut ChaCha8Rng::seed_from_u64(13));
    for lq in all_queries(3, &mut ChaCha8Rng::seed_from_u64(14)) {
        let p = predict(&model, &e, &lq.triple).unwrap();
        let q = predict(&model, &e, &lq.triple.negation()).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(q, 1.0 - p);
    }
    assert_eq!(
        predict(&model, &e, &Triple::relation(IndividualId(0), RelationId(0), IndividualId(7))),
        Err(RrnError::UnknownIndividual(7))
    );
}

#[test]
fn loss_is_ln2_for_a_zero_model_and_near_zero_for_confident_truth() {
    let v = vocab();
    let mut model: Rrn<f64> = Rrn::zeros(&v, small_hp(4)).unwrap();
    let kb = micro_kb(&mut ChaCha8Rng::seed_from_u64(15), 3);
    let qs = all_queries(3, &mut ChaCha8Rng::seed_from_u64(16));
    let (loss, _) = loss_and_gradients(&model, &kb, &qs, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    // output biases alone can make every query of one label certain
    let positives: Vec<LabeledQuery> = qs.iter().map(|q| LabeledQuery { label: true, ..*q }).collect();
    for name in ["head.r.b2", "head.s.b2", "head.member.a.b", "head.member.b.b"] {
        set(&mut model, name, &[40.0]);
    }
    let (loss, _) = loss_and_gradients(&model, &kb, &positives, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    assert!(loss < 1e-12);
    assert_eq!(
        loss_and_gradients(&model, &kb, &[], &mut ChaCha8Rng::seed_from_u64(0)),
        Err(RrnError::EmptyQuerySet)
    );
}

#[test]
fn gradients_match_central_differences() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for case in 0..10 {
        let hp = Hyperparams { dim: 4, hidden: 4, passes: 2, ..Hyperparams::default() };
        let mut model: Rrn<f64> = Rrn::new(&v, hp, &mut rng).unwrap();
        // random biases so that no bank sits at a symmetric point
        for p in model.params.iter_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let n = rng.random_range(1..=3);
        let kb = micro_kb(&mut rng, n);
        let facts: Vec<Triple> = kb.facts().copied().collect();
        let init: Embeddings<f64> = init_embeddings(n as usize, &hp, &mut rng);
        let schedule = draw_schedule(facts.len(), hp.passes, &mut rng);
        let qs = all_queries(n, &mut rng);
        let (_, g) = loss_and_gradients_with(&model, &facts, init.clone(), &schedule, &qs).unwrap();
        let h = 1e-6;
        for i in 0..model.params.len() {
            let orig = model.params[i];
            model.params[i] = orig + h;
            let (lp, _) = loss_and_gradients_with(&model, &facts, init.clone(), &schedule, &qs).unwrap();
            model.params[i] = orig - h;
            let (lm, _) = loss_and_gradients_with(&model, &facts, init.clone(), &schedule, &qs).unwrap();
            model.params[i] = orig;
            let num = (lp - lm) / (2.0 * h);
            let err = (num - g[i]).abs();
            let rel = err / num.abs().max(g[i].abs());
            assert!(
                err <= 1e-6 || rel <= 1e-3,
                "case {case}, {}: analytic {} numeric {num}",
                model.layout().tensor_at(i).unwrap().name,
                g[i]
            );
        }
    }
}

#[test]
fn permuting_individuals_permutes_probabilities() {
    let v = vocab();
    let model: Rrn<f32> = Rrn::new(&v, Hyperparams::default(), &mut ChaCha8Rng::seed_from_u64(19)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let n = 6u32;
    let kb = {
        let mut kb = SampleKb::new(Roster::from_names((0..n).map(|i| format!("i{i}"))));
        for _ in 0..12 {
            let s = IndividualId(rng.random_range(0..n));
            kb.insert(Triple::relation(s, RelationId(rng.random_range(0..2)), IndividualId(rng.random_range(0..n)))).unwrap();
            kb.insert(Triple::member(s, ClassId(rng.random_range(0..2)))).unwrap();
        }
        kb
    };
    let facts: Vec<Triple> = kb.facts().copied().collect();
    let mut perm: Vec<usize> = (0..n as usize).collect();
    use rand::seq::SliceRandom;
    perm.shuffle(&mut rng);
    let map = |i: IndividualId| IndividualId(perm[i.index()] as u32);
    let permute = |t: &Triple| {
        let mut t = *t;
        t.subject = map(t.subject);
        if let Some(o) = t.object_individual() {
            t.object = rrn_core::kb::TripleObject::Individual(map(o));
        }
        t
    };
    let facts_p: Vec<Triple> = facts.iter().map(permute).collect();
    let init: Embeddings<f32> = init_embeddings(n as usize, &model.hp, &mut rng);
    let schedule = draw_schedule(facts.len(), model.hp.passes, &mut rng);
    let e = encode_with(&model, &facts, init.clone(), &schedule).unwrap();
    let ep = encode_with(&model, &facts_p, init.permuted(&perm), &schedule).unwrap();
    let qs: Vec<Triple> = all_queries(n, &mut rng).iter().map(|q| q.triple).collect();
    let qp: Vec<Triple> = qs.iter().map(permute).collect();
    let a = probabilities(&model, &e, &qs).unwrap();
    let b = probabilities(&model, &ep, &qp).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6);
    }
}

#[test]
fn fresh_adam_with_zero_gradient_leaves_parameters() {
    let v = vocab();
    let mut model: Rrn<f32> = Rrn::new(&v, small_hp(4), &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let before = model.params.clone();
    let mut state = AdamState::new(model.params.len());
    let mut g = vec![0.0f32; model.params.len()];
    optimizer_step(&mut state, &mut model, &mut g).unwrap();
    assert_eq!(model.params, before);
    assert_eq!(state.step, 1);
}

#[test]
fn adam_converges_on_a_quadratic() {
    let mut x = [3.0f64];
    let mut state = AdamState::new(1);
    for _ in 0..5000 {
        let mut g = [2.0 * (x[0] - 1.5)];
        adam_update(&mut state, &mut x, &mut g, 0.01, 5.0).unwrap();
    }
    assert!((x[0] - 1.5).abs() < 1e-3, "{}", x[0]);
}

#[test]
fn clipping_scales_large_gradients_to_the_bound() {
    let mut g = vec![30.0f64, 40.0];
    let before = clip_global_norm(&mut g, 5.0);
    assert_eq!(before, 50.0);
    assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] - 4.0).abs() < 1e-12);
}

#[test]
fn non_finite_gradient_names_its_parameter() {
    let v = vocab();
    let mut model: Rrn<f32> = Rrn::zeros(&v, small_hp(4)).unwrap();
    let t = model.layout().tensors().iter().find(|t| t.name == "head.s.w2").unwrap().clone();
    let mut g = vec![0.0f32; model.params.len()];
    g[t.offset + 1] = f32::NAN;
    let mut state = AdamState::new(model.params.len());
    let before = model.params.clone();
    assert_eq!(
        optimizer_step(&mut state, &mut model, &mut g),
        Err(RrnError::NonFinite("head.s.w2".into()))
    );
    assert_eq!(model.params, before);
}
