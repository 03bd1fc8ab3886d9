//! Metric values checked against numbers produced offline by
//! `tools/oracles/metrics_oracle.py` (NLTK sentence BLEU and set Jaccard).

use llull_core::metrics::{bleu, distinct1, jaccard, relevance, similarity_topk, Aggregate};
use llull_core::text::tokenize;
use serde_json::Value;

const TOLERANCE: f64 = 1e-9;

fn oracle() -> Value {
    serde_json::from_str(include_str!("../../../fixtures/oracles/metrics_oracle.json")).unwrap()
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_owned()).collect()
}

#[test]
fn sentence_bleu_matches_reference_scorer() {
    let data = oracle();
    let pairs = data["bleu_pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 50);
    for p in pairs {
        let cand = p["candidate"].as_str().unwrap();
        let refr = p["reference"].as_str().unwrap();
        let expected = p["bleu"].as_f64().unwrap();
        let got = bleu(&tokenize(cand), &tokenize(refr)).unwrap();
        assert!((got - expected).abs() <= TOLERANCE, "{cand:?} vs {refr:?}: {got} != {expected}");
    }
}

#[test]
fn relevance_is_mean_of_pairwise_bleu() {
    let data = oracle();
    let ideas = strings(&data["relevance"]["ideas"]);
    let refs = strings(&data["relevance"]["references"]);
    let got = relevance(&ideas, &refs).unwrap();
    assert!((got - data["relevance"]["value"].as_f64().unwrap()).abs() <= TOLERANCE);
}

#[test]
fn similarity_topk_matches_brute_force() {
    let data = oracle();
    let s = &data["similarity"];
    let ideas = strings(&s["ideas"]);
    let refs = strings(&s["references"]);
    assert_eq!((ideas.len(), refs.len()), (3, 10));
    let max = similarity_topk(&ideas, &refs, Aggregate::Max).unwrap();
    let mean = similarity_topk(&ideas, &refs, Aggregate::Mean).unwrap();
    assert!((max - s["max"].as_f64().unwrap()).abs() <= TOLERANCE);
    assert!((mean - s["mean"].as_f64().unwrap()).abs() <= TOLERANCE);
    assert!((distinct1(&ideas).unwrap() - s["distinct1"].as_f64().unwrap()).abs() <= TOLERANCE);
}

#[test]
fn jaccard_worked_example() {
    let a = tokenize("Mamba for Question Answering");
    let b = tokenize("Diffusion for question-answering");
    assert!((jaccard(&a, &b).unwrap() - 3.0 / 5.0).abs() <= TOLERANCE);
}
