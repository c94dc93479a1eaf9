use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skg_core::persist::{decode_snapshot, encode_snapshot, FORMAT_VERSION};
use skg_core::*;
use skg_testkit::*;

fn assert_equivalent(a: &IndexSnapshot, b: &IndexSnapshot) {
    assert_eq!(a.doc_count(), b.doc_count());
    assert_eq!(a.generation(), b.generation());
    assert_eq!(a.schema(), b.schema());
    for d in 0..a.doc_count() {
        assert_eq!(a.external_id(d), b.external_id(d));
    }
    for f in a.schema().fields() {
        let name = f.name.as_str();
        assert_eq!(a.terms(name).unwrap(), b.terms(name).unwrap());
        for term in a.terms(name).unwrap() {
            let pa = a.postings(name, term).unwrap().unwrap();
            let pb = b.postings(name, term).unwrap().unwrap();
            assert_eq!(pa.entries().collect::<Vec<_>>(), pb.entries().collect::<Vec<_>>());
        }
        for d in 0..a.doc_count() {
            assert_eq!(a.forward_terms(name, d).unwrap(), b.forward_terms(name, d).unwrap());
        }
    }
}

fn toy_request() -> TraversalRequest {
    TraversalRequest {
        starting_node: vec!["skills:java".into()],
        background: None,
        nodes: vec![
            NodeSpec::discover("title", 2).with_child(NodeSpec::discover("skills", 3)),
            NodeSpec::discover("keywords", 5).with_scorer(ScorerKind::Popularity),
        ],
    }
}

#[test]
fn toy10_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.skg");
    let snap = toy10_snapshot();
    save_snapshot(&snap, &path).unwrap();
    let loaded = load_snapshot(&path).unwrap();
    assert_equivalent(&snap, &loaded);
    assert_eq!(
        loaded.phrase_docset("keywords", &["java", "engineer"]).unwrap(),
        snap.phrase_docset("keywords", &["java", "engineer"]).unwrap()
    );
    let before = serde_json::to_string(&traverse(&snap, &toy_request()).unwrap()).unwrap();
    let after = serde_json::to_string(&traverse(&loaded, &toy_request()).unwrap()).unwrap();
    assert_eq!(before, after);
    assert_eq!(encode_snapshot(&loaded), encode_snapshot(&snap));
}

#[test]
fn empty_snapshot_round_trips() {
    let snap = IndexSnapshot::empty(toy10_schema());
    let loaded = decode_snapshot(&encode_snapshot(&snap)).unwrap();
    assert_equivalent(&snap, &loaded);
}

#[test]
fn truncation_and_bit_flips_are_detected() {
    let bytes = encode_snapshot(&toy10_snapshot());
    for cut in [0, 7, 23, 24, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            matches!(decode_snapshot(&bytes[..cut]), Err(SkgError::CorruptSnapshot(_))),
            "cut at {cut}"
        );
    }
    for i in (24..bytes.len()).step_by(7) {
        let mut b = bytes.clone();
        b[i] ^= 0x10;
        assert!(matches!(decode_snapshot(&b), Err(SkgError::CorruptSnapshot(_))), "flip at {i}");
    }
    let mut b = bytes.clone();
    b[0] = b'X';
    assert!(matches!(decode_snapshot(&b), Err(SkgError::CorruptSnapshot(_))));
}

#[test]
fn future_version_is_rejected() {
    let mut bytes = encode_snapshot(&toy10_snapshot());
    bytes[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    match decode_snapshot(&bytes) {
        Err(SkgError::VersionMismatch { found, supported }) => {
            assert_eq!(found, FORMAT_VERSION + 1);
            assert_eq!(supported, FORMAT_VERSION);
        }
        other => panic!("expected version error, got {other:?}"),
    }
}

#[test]
fn writer_resumes_from_a_loaded_snapshot() {
    let loaded = Arc::new(decode_snapshot(&encode_snapshot(&toy10_snapshot())).unwrap());
    let mut w = IndexWriter::from_snapshot(loaded);
    assert!(matches!(
        w.add_document(&Document::new("d3").with("skills", vec!["x"])),
        Err(SkgError::DuplicateId(_))
    ));
    w.add_document(&Document::new("d11").with("skills", vec!["java"])).unwrap();
    let snap = w.commit();
    assert_eq!(snap.doc_count(), 11);
    assert_eq!(snap.term_docset("skills", "java").unwrap().len(), 5);
    assert_eq!(snap.internal_id("d11"), Some(10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_corpora_round_trip(seed in any::<u64>()) {
        let corpus = random_corpus(&mut ChaCha8Rng::seed_from_u64(seed), 200, 40, &["a", "b"]);
        let snap = corpus.snapshot();
        let loaded = decode_snapshot(&encode_snapshot(&snap)).unwrap();
        assert_equivalent(&snap, &loaded);
    }
}
