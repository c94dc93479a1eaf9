use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skg_core::analysis::tokenize;
use skg_core::scoring::{consequent_confidence, path_foreground, popularity, relatedness};
use skg_core::*;
use skg_testkit::*;

fn as_ids(set: &DocSet) -> Ids {
    set.iter().map(|d| d as usize).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn set_of(snap: &IndexSnapshot, ids: &Ids) -> DocSet {
    DocSet::from_unsorted(snap.doc_count(), ids.iter().map(|&i| i as u32))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_and_inverted_indexes_agree(seed in any::<u64>()) {
        let corpus = random_corpus(&mut rng(seed), 30, 10, &["a", "b"]);
        let snap = corpus.snapshot();
        for field in &corpus.fields {
            for term in snap.terms(field).unwrap() {
                let inv = snap.term_docset(field, term).unwrap();
                for d in 0..snap.doc_count() {
                    let fwd = snap.forward_terms(field, d).unwrap();
                    prop_assert_eq!(inv.contains(d), fwd.contains(&term.as_str()));
                }
            }
            for d in 0..snap.doc_count() {
                let fwd: BTreeSet<String> = snap.forward_terms(field, d).unwrap().into_iter().map(String::from).collect();
                let plain = corpus.docs[d as usize].fields.get(field).cloned().unwrap_or_default();
                prop_assert_eq!(fwd, plain);
            }
        }
    }

    #[test]
    fn enumeration_is_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 40, 10, &["a", "b"]);
        let snap = corpus.snapshot();
        let docs: Ids = corpus.all().into_iter().filter(|_| r.gen_bool(0.4)).collect();
        let set = set_of(&snap, &docs);
        for field in &corpus.fields {
            let got: BTreeSet<(String, u32)> = snap.enumerate_field_terms(field, &set).unwrap().into_iter().collect();
            let want: BTreeSet<(String, u32)> = corpus
                .vocabulary(field)
                .into_iter()
                .map(|t| { let c = corpus.docs_with(field, &t).intersection(&docs).count() as u32; (t, c) })
                .filter(|(_, c)| *c > 0)
                .collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn phrases_match_adjacent_tokens(seed in any::<u64>()) {
        let mut r = rng(seed);
        let words = ["red", "green", "blue", "gold"];
        let texts: Vec<String> = (0..r.gen_range(1..25))
            .map(|_| (0..r.gen_range(1..7)).map(|_| words[r.gen_range(0..4)]).collect::<Vec<_>>().join(" "))
            .collect();
        let schema = Schema::new([FieldSchema::new("text", FieldKind::AnalyzedText)]).unwrap();
        let docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| Document::new(format!("x{i}")).with("text", t.as_str())).collect();
        let snap = build_snapshot(schema, &docs);
        for _ in 0..10 {
            let phrase: Vec<&str> = (0..r.gen_range(1..4)).map(|_| words[r.gen_range(0..4)]).collect();
            let got = snap.phrase_docset("text", &phrase).unwrap();
            let want: Ids = texts.iter().enumerate().filter(|(_, t)| {
                let toks: Vec<String> = tokenize(t).collect();
                toks.windows(phrase.len()).any(|w| w.iter().zip(&phrase).all(|(a, b)| a == b))
            }).map(|(i, _)| i).collect();
            prop_assert_eq!(as_ids(&got), want);
            let all_terms = phrase.iter().fold(snap.all_docs(), |acc, t| acc.intersect(&snap.term_docset("text", t).unwrap()));
            prop_assert!(got.is_subset(&all_terms));
        }
    }

    #[test]
    fn materialization_matches_predicates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 50, 8, &["a", "b"]);
        let snap = corpus.snapshot();
        for _ in 0..8 {
            let e = random_expr(&mut r, &corpus, 4);
            let node = materialize(&e, &snap).unwrap();
            prop_assert_eq!(as_ids(&node.docs), oracle_eval(&corpus, &e));
        }
    }

    #[test]
    fn de_morgan(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 40, 8, &["a", "b"]);
        let snap = corpus.snapshot();
        let a = random_expr(&mut r, &corpus, 3);
        let b = random_expr(&mut r, &corpus, 3);
        let ev = |e: QueryExpr| evaluate(&e, &snap).unwrap();
        prop_assert_eq!(
            ev(QueryExpr::not(QueryExpr::And(vec![a.clone(), b.clone()]))),
            ev(QueryExpr::Or(vec![QueryExpr::not(a.clone()), QueryExpr::not(b.clone())]))
        );
        prop_assert_eq!(
            ev(QueryExpr::not(QueryExpr::Or(vec![a.clone(), b.clone()]))),
            ev(QueryExpr::And(vec![QueryExpr::not(a.clone()), QueryExpr::not(b)]))
        );
        prop_assert_eq!(ev(QueryExpr::not(QueryExpr::not(a.clone()))), ev(a));
    }

    #[test]
    fn print_then_parse_is_identity_on_canonical_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 10, 8, &["a", "b"]);
        let snap = corpus.snapshot();
        let e = random_expr(&mut r, &corpus, 4);
        let printed = e.to_string();
        let parsed = parse_query(&printed).unwrap();
        prop_assert_eq!(parsed.to_string(), printed.clone());
        prop_assert_eq!(parse_query(&parsed.to_string()).unwrap(), parsed.clone());
        prop_assert_eq!(evaluate(&parsed, &snap).unwrap(), evaluate(&e, &snap).unwrap());
    }

    #[test]
    fn scorers_match_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 20, 10, &["a", "b"]);
        let snap = corpus.snapshot();
        let bg_expr = if r.gen_bool(0.5) { QueryExpr::All } else { random_expr(&mut r, &corpus, 2) };
        let bg = oracle_eval(&corpus, &bg_expr);
        for field in &corpus.fields {
            for fg_term in corpus.vocabulary(field) {
                let fg = corpus.docs_with(field, &fg_term);
                let ctx = ScoringContext::new(&set_of(&snap, &fg), set_of(&snap, &bg));
                for cand_field in &corpus.fields {
                    for cand_term in corpus.vocabulary(cand_field) {
                        let cand = corpus.docs_with(cand_field, &cand_term);
                        let cset = snap.term_docset(cand_field, &cand_term).unwrap();
                        let want = oracle_score(&fg, &cand, &bg);
                        let got = relatedness(&ctx, &cset);
                        prop_assert!((got.raw_z - want.z).abs() < 1e-9);
                        prop_assert!((got.relatedness - want.relatedness).abs() < 1e-9);
                        prop_assert_eq!(got.foreground_popularity, want.foreground_popularity);
                        prop_assert_eq!(got.background_popularity, want.background_popularity);
                        prop_assert!(got.foreground_popularity <= got.background_popularity);
                        prop_assert_eq!(popularity(&ctx, &cset), want.foreground_popularity);
                        match (consequent_confidence(&ctx, &cset), oracle_consequent(&fg, &cand, &bg)) {
                            (Ok(c), Some(o)) => {
                                prop_assert!((c - o).abs() < 1e-12);
                                prop_assert!((0.0..=1.0).contains(&c));
                                prop_assert_eq!(c == 1.0, ctx.foreground().is_subset(&cset));
                                prop_assert!((c - got.popularity as f64 / ctx.foreground().len() as f64).abs() < 1e-15);
                            }
                            (Err(SkgError::EmptyForeground), None) => {}
                            other => prop_assert!(false, "consequent mismatch {:?}", other),
                        }
                        // Overlap is symmetric in the two nodes.
                        let rev = ScoringContext::new(&cset, set_of(&snap, &bg));
                        prop_assert_eq!(relatedness(&rev, &set_of(&snap, &fg)).foreground_popularity, got.foreground_popularity);
                    }
                }
            }
        }
    }

    #[test]
    fn replication_scales_z_by_sqrt_k(seed in any::<u64>(), k in prop::sample::select(vec![2usize, 3, 4, 9])) {
        let corpus = random_corpus(&mut rng(seed), 20, 8, &["a", "b"]);
        let base = corpus.snapshot();
        let big = corpus.replicate(k).snapshot();
        for fg_term in corpus.vocabulary("a") {
            let c1 = ScoringContext::new(&base.term_docset("a", &fg_term).unwrap(), base.all_docs());
            let ck = ScoringContext::new(&big.term_docset("a", &fg_term).unwrap(), big.all_docs());
            for t in corpus.vocabulary("b") {
                let z1 = relatedness(&c1, &base.term_docset("b", &t).unwrap()).raw_z;
                let zk = relatedness(&ck, &big.term_docset("b", &t).unwrap()).raw_z;
                prop_assert!((zk - z1 * (k as f64).sqrt()).abs() < 1e-9, "{} vs {}", zk, z1);
            }
            let ranking = |snap: &IndexSnapshot| {
                let req = TraversalRequest {
                    starting_node: vec![QueryExpr::term("a", fg_term.clone()).to_string()],
                    background: None,
                    nodes: vec![NodeSpec::discover("b", 100)],
                };
                traverse(snap, &req).unwrap().nodes[0].values.iter().map(|v| v.name.clone()).collect::<Vec<_>>()
            };
            prop_assert_eq!(ranking(&base), ranking(&big));
        }
    }

    #[test]
    fn path_foreground_is_and_materialization(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 40, 8, &["a", "b"]);
        let snap = corpus.snapshot();
        let exprs: Vec<QueryExpr> = (0..r.gen_range(1..5)).map(|_| random_expr(&mut r, &corpus, 2)).collect();
        let sets: Vec<DocSet> = exprs.iter().map(|e| evaluate(e, &snap).unwrap()).collect();
        prop_assert_eq!(path_foreground(&sets).unwrap(), evaluate(&QueryExpr::And(exprs), &snap).unwrap());
    }

    #[test]
    fn traversal_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 50, 8, &["a", "b"]);
        let snap = corpus.snapshot();
        let start = random_expr(&mut r, &corpus, 2);
        let bg = if r.gen_bool(0.7) { None } else { Some(random_expr(&mut r, &corpus, 1)) };
        let specs: Vec<NodeSpec> = (0..r.gen_range(1..3)).map(|_| random_spec(&mut r, &corpus, 3)).collect();
        let req = TraversalRequest {
            starting_node: vec![start.to_string()],
            background: bg.as_ref().map(|b| b.to_string()),
            nodes: specs.clone(),
        };
        let got = traverse(&snap, &req).unwrap();
        let bg_ids = bg.map(|b| oracle_eval(&corpus, &b)).unwrap_or_else(|| corpus.all());
        let want = oracle_traverse(&corpus, &oracle_eval(&corpus, &start), &bg_ids, &specs, ScorerKind::Relatedness);
        compare_levels(&got.nodes, &want, &specs)?;
    }

    #[test]
    fn top_k_is_a_prefix_of_top_k_plus_one(seed in any::<u64>(), k in 0u64..6) {
        let mut r = rng(seed);
        let corpus = random_corpus(&mut r, 50, 10, &["a", "b"]);
        let snap = corpus.snapshot();
        let start = random_expr(&mut r, &corpus, 2).to_string();
        for scorer in [ScorerKind::Relatedness, ScorerKind::Popularity, ScorerKind::Consequent, ScorerKind::Antecedent] {
            let run = |limit| {
                let req = TraversalRequest {
                    starting_node: vec![start.clone()],
                    background: None,
                    nodes: vec![NodeSpec::discover("b", limit).with_scorer(scorer)],
                };
                traverse(&snap, &req).unwrap().nodes[0].values.iter().map(|v| v.name.clone()).collect::<Vec<_>>()
            };
            let small = run(k);
            let large = run(k + 1);
            prop_assert!(small.len() as u64 <= k);
            prop_assert_eq!(&large[..small.len()], &small[..]);
        }
    }
}

fn compare_levels(got: &[LevelResult], want: &[OracleLevel], specs: &[NodeSpec]) -> Result<(), TestCaseError> {
    prop_assert_eq!(got.len(), want.len());
    prop_assert_eq!(got.len(), specs.len());
    for ((g, w), spec) in got.iter().zip(want).zip(specs) {
        prop_assert_eq!(&g.field, &w.field);
        let gn: Vec<&str> = g.values.iter().map(|v| v.name.as_str()).collect();
        let wn: Vec<&str> = w.values.iter().map(|v| v.name.as_str()).collect();
        prop_assert_eq!(gn, wn);
        for (gv, wv) in g.values.iter().zip(&w.values) {
            prop_assert_eq!(gv.score.foreground_popularity, wv.score.foreground_popularity);
            prop_assert_eq!(gv.score.background_popularity, wv.score.background_popularity);
            prop_assert!((gv.score.relatedness - wv.score.relatedness).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&gv.score.relatedness));
            match (gv.confidence, wv.confidence) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "confidence mismatch {:?}", other),
            }
            let discovered = !spec.values.iter().any(|v| v.to_lowercase() == gv.name);
            if discovered {
                prop_assert!(gv.score.foreground_popularity >= spec.min_count);
            }
            compare_levels(&gv.nodes, &wv.nodes, &spec.nodes)?;
        }
    }
    Ok(())
}

#[test]
fn snapshots_are_stable_under_concurrent_ingestion() {
    let mut w = IndexWriter::new(toy10_schema());
    for d in toy10_docs() {
        w.add_document(&d).unwrap();
    }
    let snap = w.commit();
    let req = TraversalRequest {
        starting_node: vec!["skills:java".into()],
        background: None,
        nodes: vec![NodeSpec::discover("title", 5).with_child(NodeSpec::discover("skills", 5))],
    };
    let expected = serde_json::to_string(&traverse(&snap, &req).unwrap()).unwrap();
    let handle = w.handle();
    std::thread::scope(|s| {
        s.spawn(move || {
            for i in 0..200 {
                let d = Document::new(format!("extra{i}"))
                    .with("skills", vec!["java", "rust"])
                    .with("title", "analyst");
                w.add_document(&d).unwrap();
                w.commit();
            }
        });
        for _ in 0..4 {
            let snap = Arc::clone(&snap);
            let (req, expected, handle) = (req.clone(), expected.clone(), handle.clone());
            s.spawn(move || {
                for _ in 0..100 {
                    let got = serde_json::to_string(&traverse(&snap, &req).unwrap()).unwrap();
                    assert_eq!(got, expected);
                    let live = handle.current();
                    assert_eq!(
                        live.term_docset("skills", "rust").unwrap().len() as u32 + 10,
                        live.doc_count(),
                    );
                }
            });
        }
    });
    assert_eq!(handle.current().doc_count(), 210);
}
