//! Cross-module invariants as property tests.

use proptest::prelude::*;

use sgcodec::entropy::{decode, encode};
use sgcodec::multi_round::{decode_multi, encode_multi};
use sgcodec::two_stage::{compression_ratio, decode_stream, encode_stream};
use sgcodec::{
    compress, compress_multi, recover, recover_multi, ClassTriplet, Codebook, Corpus, EntityRef, KnowledgeBase,
    RatioBasis, SceneGraph, Thresholds, Triplet,
};

const CLASSES: [&str; 5] = ["man", "dog", "car", "hat", "road"];
const RELATIONS: [&str; 4] = ["on", "near", "has", "wearing"];

fn triplet() -> impl Strategy<Value = Triplet> {
    (0..CLASSES.len(), 0u32..2, 0..RELATIONS.len(), 0..CLASSES.len(), 0u32..2).prop_map(|(h, hi, r, t, ti)| {
        let ti = if h == t && hi == ti { hi + 1 } else { ti };
        Triplet::new(
            EntityRef::new(CLASSES[h], hi).unwrap(),
            RELATIONS[r],
            EntityRef::new(CLASSES[t], ti).unwrap(),
        )
    })
}

fn graph() -> impl Strategy<Value = SceneGraph> {
    prop::collection::vec(triplet(), 1..8).prop_map(|ts| SceneGraph::new("g", ts))
}

fn corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec(graph(), 1..10).prop_map(Corpus::new)
}

fn class_message() -> impl Strategy<Value = Vec<ClassTriplet>> {
    prop::collection::vec((0..CLASSES.len(), 0..3usize, 0..CLASSES.len()), 1..10).prop_map(|v| {
        v.into_iter()
            .map(|(h, r, t)| ClassTriplet::new(CLASSES[h], RELATIONS[r], CLASSES[t]))
            .collect()
    })
}

fn tables(kb: &KnowledgeBase) -> (String, String, String) {
    (
        format!("{:?}", kb.relation_table),
        format!("{:?}", kb.cooccurrence_table),
        format!("{:?}", kb.vocabulary),
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn build_distributes_over_concat(a in corpus(), b in corpus()) {
        let merged = KnowledgeBase::build(&a).unwrap().merge(&KnowledgeBase::build(&b).unwrap()).unwrap();
        prop_assert_eq!(&merged, &KnowledgeBase::build(&a.concat(&b)).unwrap());
        merged.validate().unwrap();
    }

    #[test]
    fn merge_commutes_associates_with_identity(a in corpus(), b in corpus(), c in corpus()) {
        let (ka, kb, kc) = (
            KnowledgeBase::build(&a).unwrap(),
            KnowledgeBase::build(&b).unwrap(),
            KnowledgeBase::build(&c).unwrap(),
        );
        prop_assert_eq!(tables(&ka.merge(&kb).unwrap()), tables(&kb.merge(&ka).unwrap()));
        prop_assert_eq!(
            ka.merge(&kb).unwrap().merge(&kc).unwrap(),
            ka.merge(&kb.merge(&kc).unwrap()).unwrap()
        );
        prop_assert_eq!(&ka.merge(&KnowledgeBase::empty()).unwrap(), &ka);
        prop_assert_eq!(&KnowledgeBase::empty().merge(&ka).unwrap(), &ka);
    }

    #[test]
    fn persist_roundtrip_and_determinism(c in corpus()) {
        let kb = KnowledgeBase::build(&c).unwrap();
        let bytes = kb.persist();
        prop_assert_eq!(&bytes, &kb.persist());
        prop_assert_eq!(KnowledgeBase::load(&bytes).unwrap(), kb);
    }

    #[test]
    fn single_byte_corruption_detected(c in corpus(), pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let kb = KnowledgeBase::build(&c).unwrap();
        let mut bytes = kb.persist();
        let i = pos.index(bytes.len());
        bytes[i] ^= flip;
        prop_assert!(KnowledgeBase::load(&bytes).is_err());
    }

    #[test]
    fn distributions_sum_to_one(c in corpus()) {
        let kb = KnowledgeBase::build(&c).unwrap();
        for (h, t) in kb.relation_table.keys() {
            let sum: f64 = kb.query_relation(h, t).probabilities().values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
        for h in kb.cooccurrence_table.keys() {
            let sum: f64 = kb.query_tail(h).probabilities().values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_invariant_under_count_scaling(c in corpus(), k in 2usize..4) {
        let kb = KnowledgeBase::build(&c).unwrap();
        let mut scaled = c.clone();
        for _ in 1..k {
            scaled = scaled.concat(&c);
        }
        let kb_k = KnowledgeBase::build(&scaled).unwrap();
        for (h, t) in kb.relation_table.keys() {
            prop_assert_eq!(kb.relation_argmax(h, t), kb_k.relation_argmax(h, t));
        }
        for h in kb.cooccurrence_table.keys() {
            prop_assert_eq!(kb.tail_argmax(h), kb_k.tail_argmax(h));
        }
    }

    #[test]
    fn universal_context_is_vacuous(c in corpus()) {
        let marker = Triplet::parse("marker#0", "in", "scene#0");
        let marked = Corpus::new(
            c.graphs
                .iter()
                .map(|g| {
                    let mut g = g.clone();
                    g.triplets.push(marker.clone());
                    g
                })
                .collect(),
        );
        let kb = KnowledgeBase::build(&marked).unwrap();
        let ctx = [marker.class_triplet()];
        for (h, t) in kb.relation_table.keys() {
            // Samples are sets, so the conditional estimate counts graphs rather than triplets.
            let by_graph = KnowledgeBase::from_samples(kb.samples.clone());
            prop_assert_eq!(kb.conditional_relation(h, t, &ctx), by_graph.query_relation(h, t));
        }
    }

    #[test]
    fn two_stage_roundtrip(train in corpus(), g in graph(), tr in 0.0f64..=1.0, tt in 0.0f64..=1.0) {
        let kb = KnowledgeBase::build(&train).unwrap();
        let cb = Codebook::build(&kb.vocabulary).unwrap();
        let s = compress(&kb, &g, Thresholds::new(tr, tt).unwrap());
        let mut back = recover(&kb, &s).unwrap();
        back.image_id = g.image_id.clone();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(&decode_stream(&encode_stream(&s, &cb), &cb).unwrap(), &s);
        let rho = compression_ratio(&g, &s, RatioBasis::Tokens).unwrap();
        prop_assert!(rho > 0.0 && rho <= 1.0);
    }

    #[test]
    fn multi_round_roundtrip(samples in prop::collection::vec(class_message(), 1..30), msg in class_message(), rounds in 1u32..=4) {
        let kb = KnowledgeBase::from_samples(samples);
        let cb = Codebook::build(&kb.vocabulary).unwrap();
        let s = compress_multi(&kb, &msg, rounds).unwrap();
        prop_assert!(s.rounds_executed <= rounds);
        prop_assert_eq!(&recover_multi(&kb, &s).unwrap(), &msg);
        prop_assert_eq!(&decode_multi(&encode_multi(&s, &cb), &cb).unwrap(), &s);
        prop_assert!(s.ratio() > 0.0 && s.ratio() <= 1.0);
    }

    #[test]
    fn multi_round_omissions_grow_with_budget(samples in prop::collection::vec(class_message(), 1..30), msg in class_message()) {
        let kb = KnowledgeBase::from_samples(samples);
        let mut previous = 0;
        for rounds in 1..=4 {
            let s = compress_multi(&kb, &msg, rounds).unwrap();
            let omitted = s.omitted_after_round(rounds);
            prop_assert!(omitted >= previous);
            previous = omitted;
        }
    }

    #[test]
    fn entropy_roundtrip(freqs in prop::collection::btree_map("[a-z]{1,6}", 1u64..500, 1..20), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..40)) {
        let cb = Codebook::build(&freqs).unwrap();
        let vocab: Vec<&String> = freqs.keys().collect();
        let tokens: Vec<String> = picks.iter().map(|i| vocab[i.index(vocab.len())].clone()).chain(["zebra crossing".to_string()]).collect();
        let bits = encode(&cb, &tokens);
        prop_assert_eq!(decode(&cb, &bits, tokens.len() as u64).unwrap(), tokens);
        let (num, den) = cb.kraft_fraction();
        prop_assert!(num <= den);
    }
}

#[test]
fn merge_version_mismatch_rejected() {
    let a = KnowledgeBase::build(&Corpus::new(vec![SceneGraph::new("g", vec![Triplet::parse("man#0", "on", "road#0")])])).unwrap();
    let mut b = a.clone();
    b.version += 1;
    assert!(a.merge(&b).is_err());
}
