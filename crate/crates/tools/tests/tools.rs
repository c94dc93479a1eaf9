use std::process::Command;

use skg_core::{parse_query, IndexWriter, ScorerKind};
use skg_testkit::*;
use skg_tools::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn ingest_examples() {
    let mut w = IndexWriter::new(toy10_schema());
    assert_eq!(ingest_reader(&mut w, toy10_jsonl().as_bytes()).unwrap(), 10);
    assert_eq!(w.snapshot().doc_count(), 10);

    let mut w = IndexWriter::new(toy10_schema());
    assert_eq!(ingest_reader(&mut w, "".as_bytes()).unwrap(), 0);

    let mut w = IndexWriter::new(toy10_schema());
    let dup = format!("{}{}", toy10_jsonl(), r#"{"id":"d3","skills":["x"]}"#);
    match ingest_reader(&mut w, dup.as_bytes()) {
        Err(ToolError::Line { line, message }) => {
            assert_eq!(line, 11);
            assert!(message.contains("d3"));
        }
        other => panic!("expected a line error, got {other:?}"),
    }
    assert_eq!(w.snapshot().doc_count(), 0);
    assert_eq!(w.pending_count(), 0);

    let mut w = IndexWriter::new(toy10_schema());
    let bad = "{\"id\":\"a\",\"skills\":[\"x\"]}\nnot json\n";
    assert!(matches!(ingest_reader(&mut w, bad.as_bytes()), Err(ToolError::Line { line: 2, .. })));
    assert_eq!(w.snapshot().doc_count(), 0);
}

#[test]
fn cleanse_examples() {
    let s = toy10_snapshot();
    let pairs = vec![
        ("java".to_string(), "hadoop".to_string()),
        ("java".to_string(), "nursing".to_string()),
        ("java".to_string(), "java".to_string()),
        ("java".to_string(), "cobol".to_string()),
    ];
    let out = cleanse_pairs(&s, "skills", &pairs, 0.4).unwrap();
    assert!(close(out[0].relatedness, 0.4107, 1e-4));
    assert_eq!(out[0].verdict, Verdict::Kept);
    assert!(close(out[1].relatedness, -0.4621, 1e-4));
    assert_eq!(out[1].verdict, Verdict::Blacklisted);
    assert!(out[2].relatedness > 0.0);
    assert_eq!(out[2].verdict, Verdict::Kept);
    assert!(out[3].unknown);
    assert_eq!(out[3].relatedness, 0.0);
    assert_eq!(out[3].to_tsv(), "java\tcobol\t0.000000\tblacklisted\tunknown");
    assert_eq!(blacklist_fraction(&out), 0.5);

    // Pure threshold function, independent of order.
    let mut reversed = pairs.clone();
    reversed.reverse();
    let mut again = cleanse_pairs(&s, "skills", &reversed, 0.4).unwrap();
    again.reverse();
    assert_eq!(again, out);
    for p in cleanse_pairs(&s, "skills", &pairs, DEFAULT_THRESHOLD).unwrap() {
        assert_eq!(p.verdict == Verdict::Blacklisted, p.relatedness < 0.5);
    }
}

#[test]
fn multi_word_pairs_become_phrases() {
    let s = toy10_snapshot();
    let pairs = vec![("java engineer".to_string(), "senior".to_string())];
    let out = cleanse_pairs(&s, "keywords", &pairs, 0.5).unwrap();
    assert!(!out[0].unknown);
    // FG {d1}, candidate {d1}: y=1, n=1, p=0.1.
    let z = (1.0 - 0.1) / (0.1f64 * 0.9).sqrt();
    assert!(close(out[0].relatedness, (z / 2.0).tanh(), 1e-12));
}

#[test]
fn summarize_examples() {
    let s = toy10_snapshot();
    let fg = parse_query("title:engineer").unwrap();
    let sum = summarize_document(&s, "skills", &strings(&["excel", "hadoop"]), Some(&fg), 5).unwrap();
    let got: Vec<_> = sum.entries.iter().map(|e| (e.phrase.as_str(), e.relatedness)).collect();
    assert_eq!(got[0].0, "hadoop");
    assert!(close(got[0].1, 0.4107, 1e-3));
    assert_eq!(got[1].0, "excel");
    assert!(close(got[1].1, -0.3215, 1e-3));

    let fg = parse_query("title:nurse").unwrap();
    let sum = summarize_document(&s, "skills", &strings(&["nursing"]), Some(&fg), 5).unwrap();
    assert!(close(sum.entries[0].relatedness, 0.7659, 1e-3));

    let sum = summarize_document(&s, "skills", &[], Some(&fg), 5).unwrap();
    assert!(sum.entries.is_empty());

    let fg = parse_query("title:astronaut").unwrap();
    let sum = summarize_document(&s, "skills", &strings(&["java", "excel"]), Some(&fg), 5).unwrap();
    assert!(sum.warning.is_some());
    assert!(sum.entries.iter().all(|e| e.relatedness == 0.0));
}

#[test]
fn summary_order_matches_brute_force() {
    let s = toy10_snapshot();
    let phrases = strings(&["java", "hadoop", "spark", "nursing", "trauma", "excel", "cobol"]);
    let fg = parse_query("title:engineer OR title:analyst").unwrap();
    let sum = summarize_document(&s, "skills", &phrases, Some(&fg), 5).unwrap();
    let c = {
        let mut c = skg_testkit::Corpus {
            fields: vec!["skills".into(), "title".into()],
            docs: Vec::new(),
        };
        for d in toy10_docs() {
            let mut fields = std::collections::BTreeMap::new();
            for f in ["skills", "title"] {
                fields.insert(f.to_string(), d.fields[f].values().iter().cloned().collect());
            }
            c.docs.push(PlainDoc { id: d.id.clone(), fields });
        }
        c
    };
    let fg_ids = oracle_eval(&c, &fg);
    let mut want: Vec<(String, f64)> = phrases
        .iter()
        .map(|p| (p.clone(), oracle_score(&fg_ids, &c.docs_with("skills", p), &c.all()).z))
        .collect();
    want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let got: Vec<&str> = sum.entries.iter().map(|e| e.phrase.as_str()).collect();
    assert_eq!(got, want.iter().map(|w| w.0.as_str()).collect::<Vec<_>>());
}

#[test]
fn tfidf_examples() {
    let s = toy10_snapshot();
    let ranked = tfidf_ranking(&s, "skills", &strings(&["java", "excel"])).unwrap();
    assert_eq!(ranked[0].0, "excel");
    assert!(close(ranked[0].1, 10f64.ln(), 1e-12));
    assert!(close(ranked[1].1, 2.5f64.ln(), 1e-12));
    let top1 = tfidf_foreground(&s, "skills", &strings(&["java", "excel"]), 1).unwrap();
    assert_eq!(top1.to_string(), "skills:excel");
    assert_eq!(tfidf_foreground(&s, "skills", &strings(&["spark"]), 3).unwrap().to_string(), "skills:spark");
    let all = tfidf_foreground(&s, "skills", &strings(&["java", "excel"]), 10).unwrap();
    assert_eq!(all.to_string(), "(skills:excel OR skills:java)");
    // Unseen terms are smoothed with df = 1.
    let unseen = tfidf_ranking(&s, "skills", &strings(&["cobol"])).unwrap();
    assert!(close(unseen[0].1, 10f64.ln(), 1e-12));
    // tf counts occurrences: three javas outweigh one excel.
    let ranked = tfidf_ranking(&s, "skills", &strings(&["java", "java", "java", "excel"])).unwrap();
    assert_eq!(ranked[0].0, "java");
    assert!(close(ranked[0].1, 3.0 * 2.5f64.ln(), 1e-12));
    // Ties fall back to the term.
    let ranked = tfidf_ranking(&s, "skills", &strings(&["trauma", "nursing"])).unwrap();
    assert_eq!(ranked[0].0, "nursing");
}

#[test]
fn tfidf_fallback_foreground() {
    let s = toy10_snapshot();
    // Top-1 tf-idf phrase is excel (df 1); its foreground is d10.
    let sum = summarize_document(&s, "skills", &strings(&["java", "excel"]), None, 1).unwrap();
    assert_eq!(sum.foreground, "skills:excel");
    assert_eq!(sum.entries[0].phrase, "excel");
}

#[test]
fn predict_examples() {
    let s = build_snapshot(recency_schema(), &recency_docs());
    let v = predict(&s, "skills_2:java", "title_1", ScorerKind::Consequent, 1, 10).unwrap();
    assert_eq!(v[0].name, "engineer");
    assert_eq!(v[0].confidence, Some(0.625));
    let total: f64 = v.iter().map(|x| x.confidence.unwrap()).sum();
    assert!(total <= 1.0 + 1e-12);
    // title_1 is single-valued, so the confidences partition the foreground.
    assert!(close(total, 1.0, 1e-12));

    let v = predict(&s, "skills_2:java", "title_1", ScorerKind::Consequent, 1, 10).unwrap();
    assert!(v.iter().all(|x| x.name != "nurse"));
    let explicit = skg_core::traverse(
        &s,
        &skg_core::TraversalRequest {
            starting_node: vec!["skills_2:java".into()],
            background: None,
            nodes: vec![skg_core::NodeSpec::discover("title_1", 0)
                .with_scorer(ScorerKind::Consequent)
                .with_values(["nurse"])],
        },
    )
    .unwrap();
    assert_eq!(explicit.nodes[0].values[0].confidence, Some(0.0));

    let v = predict(&s, "title_1:engineer", "skills_3", ScorerKind::Antecedent, 1, 10).unwrap();
    assert_eq!(v[0].name, "java");
    assert_eq!(v[0].confidence, Some(0.2));

    let v = predict(&s, "skills_2:java", "title_1", ScorerKind::Consequent, 2, 10).unwrap();
    assert!(v.iter().all(|x| x.score.foreground_popularity >= 2));
    assert!(predict(&s, "skills_2:java", "title_1", ScorerKind::Relatedness, 1, 10).is_err());
}

#[test]
fn antecedent_excludes_earlier_matches() {
    let s = build_snapshot(recency_schema(), &recency_docs());
    let q = parse_query("skills_2:java").unwrap();
    let start = prediction_start(&s, &q, ScorerKind::Antecedent);
    assert_eq!(start.to_string(), "(skills_2:java AND NOT skills_3:java)");
    // r2 and r4 already had java one entry earlier.
    assert_eq!(skg_core::evaluate(&start, &s).unwrap().len(), 6);
    assert_eq!(prediction_start(&s, &q, ScorerKind::Consequent), q);
    let q1 = parse_query("title_1:engineer").unwrap();
    assert_eq!(
        prediction_start(&s, &q1, ScorerKind::Antecedent).to_string(),
        "(title_1:engineer AND NOT (title_2:engineer OR title_3:engineer))"
    );
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    std::fs::write(p("schema.json"), toy10_schema().to_json()).unwrap();
    std::fs::write(p("toy.jsonl"), toy10_jsonl()).unwrap();
    let skg = env!("CARGO_BIN_EXE_skg");
    let run = |args: &[&str]| {
        let out = Command::new(skg).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        (String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
    };
    let index = p("toy.skg");
    let index = index.to_str().unwrap();
    let (out, _) = run(&[
        "ingest",
        "--schema",
        p("schema.json").to_str().unwrap(),
        "--input",
        p("toy.jsonl").to_str().unwrap(),
        "--index",
        index,
    ]);
    assert!(out.contains("\"indexed\":10"));

    std::fs::write(
        p("req.json"),
        r#"{"starting_node": ["skills:java"], "nodes": [{"type": "title", "limit": 1}]}"#,
    )
    .unwrap();
    let (out, _) = run(&["query", "--index", index, "--request", p("req.json").to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["nodes"][0]["values"][0]["name"], "engineer");

    std::fs::write(p("pairs.tsv"), "java\thadoop\njava\tnursing\n").unwrap();
    let (out, err) = run(&[
        "cleanse",
        "--index",
        index,
        "--pairs",
        p("pairs.tsv").to_str().unwrap(),
        "--field",
        "skills",
        "--threshold",
        "0.4",
        "--blacklist",
        p("black.tsv").to_str().unwrap(),
    ]);
    assert_eq!(out, "java\thadoop\t0.410686\tkept\njava\tnursing\t-0.462117\tblacklisted\n");
    assert!(err.contains("blacklisted 1 of 2"));
    assert_eq!(std::fs::read_to_string(p("black.tsv")).unwrap(), "java\tnursing\n");

    std::fs::write(p("phrases.txt"), "excel\nhadoop\n").unwrap();
    let (out, _) = run(&[
        "summarize",
        "--index",
        index,
        "--field",
        "skills",
        "--phrases",
        p("phrases.txt").to_str().unwrap(),
        "--foreground",
        "title:engineer",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["entries"][0]["phrase"], "hadoop");

    let (out, _) = run(&[
        "predict", "--index", index, "--start", "skills:java", "--target", "title", "--scorer", "consequent",
        "--min-count", "1", "--limit", "1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["name"], "engineer");
    assert_eq!(v[0]["confidence"], 0.75);

    let bad = Command::new(skg)
        .args(["query", "--index", p("missing.skg").to_str().unwrap(), "--request", "-"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
