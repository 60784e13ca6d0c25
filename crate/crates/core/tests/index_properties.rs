mod common;

use common::{exact_max_score, random_set, rng};
use dessert::storage::encode_index;
use dessert::{
    synth, DessertIndex, Document, IndexConfig, InnerAggregation, Phi, PrefilterConfig, RankedResults, ScoredDoc,
    Scorer, SearchParams, VectorSet,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn config(dim: usize, c: usize, l: usize, seed: u64) -> IndexConfig {
    IndexConfig::new(dim)
        .with_tables(c, l)
        .with_seed(seed)
        .with_prefilter(PrefilterConfig::disabled())
}

fn single_score(query: &VectorSet, set: &VectorSet, c: usize, l: usize, seed: u64) -> f64 {
    let docs = [Document::new(0, set.clone())];
    let index = DessertIndex::build(&docs, config(set.dim(), c, l, seed)).unwrap();
    let codes = index.hash_query(query).unwrap();
    index.score_candidate(0, &codes, &Scorer::default()).unwrap()
}

#[test]
fn scores_converge_to_exact_relevance() {
    let mut r = rng(17);
    let instances: Vec<(VectorSet, VectorSet)> = (0..50)
        .map(|_| {
            let m = r.random_range(1..=8);
            let mq = r.random_range(1..=4);
            (random_set(&mut r, mq, 16), random_set(&mut r, m, 16))
        })
        .collect();
    let mut errors = Vec::new();
    for l in [16usize, 128, 1024] {
        let err: f64 = instances
            .iter()
            .enumerate()
            .map(|(i, (q, s))| (single_score(q, s, 1, l, i as u64) - exact_max_score(q, s)).abs())
            .sum::<f64>()
            / instances.len() as f64;
        errors.push(err);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] <= 0.03, "{errors:?}");
}

#[test]
fn variance_shrinks_like_one_over_l() {
    let mut r = rng(23);
    let q = random_set(&mut r, 2, 16);
    let s = random_set(&mut r, 4, 16);
    let scaled: Vec<f64> = [16usize, 64, 256]
        .into_iter()
        .map(|l| {
            let xs: Vec<f64> = (0..400).map(|seed| single_score(&q, &s, 1, l, seed)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            var * l as f64
        })
        .collect();
    for v in &scaled[1..] {
        let ratio = v / scaled[0];
        assert!((0.5..=2.0).contains(&ratio), "{scaled:?}");
    }
}

/// Scores every set from raw hashes, lookups and the mean of row maxima.
fn reimplemented_ranking(index: &DessertIndex, docs: &[Document], query: &VectorSet) -> RankedResults {
    let family = index.family();
    let lookup = index.lookup();
    let q_codes: Vec<_> = query.rows().map(|v| family.hash(v).unwrap()).collect();
    let mut entries: Vec<ScoredDoc> = docs
        .iter()
        .map(|d| {
            let d_codes: Vec<_> = d.vectors.rows().map(|v| family.hash(v).unwrap()).collect();
            let mut total = 0.0;
            for qc in &q_codes {
                let best = d_codes
                    .iter()
                    .map(|dc| dc.as_slice().iter().zip(qc.as_slice()).filter(|(a, b)| a == b).count())
                    .max()
                    .unwrap();
                total += lookup.similarity(best);
            }
            ScoredDoc {
                doc_id: d.id,
                score: total / q_codes.len() as f64,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
    RankedResults { entries }
}

#[test]
fn unfiltered_query_equals_exhaustive_scoring() {
    let docs = synth::random_documents(60, 6, 12, 5);
    let index = DessertIndex::build(&docs, config(12, 3, 24, 9)).unwrap();
    let mut r = rng(6);
    for _ in 0..20 {
        let mq = r.random_range(1..=5);
        let q = random_set(&mut r, mq, 12);
        let got = index.query(&q, &SearchParams::top_k(docs.len())).unwrap();
        assert_eq!(got, reimplemented_ranking(&index, &docs, &q));
    }
}

#[test]
fn full_probe_prefilter_equals_unfiltered() {
    let docs = synth::clustered_documents(80, 5, 12, 6, 2, 0.3, 4);
    let filtered = IndexConfig::new(12)
        .with_tables(3, 24)
        .with_seed(2)
        .with_prefilter(PrefilterConfig {
            centroids: Some(6),
            ..PrefilterConfig::default()
        });
    let with = DessertIndex::build(&docs, filtered).unwrap();
    let without = DessertIndex::build(&docs, config(12, 3, 24, 2)).unwrap();
    let mut r = rng(8);
    for _ in 0..10 {
        let q = random_set(&mut r, 3, 12);
        let all = SearchParams::top_k(80).with_filter(6, 80);
        assert_eq!(
            with.query(&q, &all).unwrap(),
            without.query(&q, &SearchParams::top_k(80)).unwrap()
        );
    }
}

fn permuted(docs: &[Document], seed: u64) -> Vec<Document> {
    let mut r = rng(seed);
    docs.iter()
        .map(|d| {
            let mut rows: Vec<&[f32]> = d.vectors.rows().collect();
            rows.shuffle(&mut r);
            Document::new(d.id, VectorSet::from_rows(&rows).unwrap())
        })
        .collect()
}

#[test]
fn row_order_does_not_change_scores() {
    let docs = synth::random_documents(40, 7, 10, 12);
    let shuffled = permuted(&docs, 3);
    for inner in [InnerAggregation::Max, InnerAggregation::AvgPhi(Phi::ExpMinusOne)] {
        let cfg = config(10, 4, 32, 1).with_inner(inner);
        let a = DessertIndex::build(&docs, cfg).unwrap();
        let b = DessertIndex::build(&shuffled, cfg).unwrap();
        let mut r = rng(4);
        for _ in 0..10 {
            let q = random_set(&mut r, 3, 10);
            let ra = a.query(&q, &SearchParams::top_k(40)).unwrap();
            let rb = b.query(&q, &SearchParams::top_k(40)).unwrap();
            assert_eq!(ra.ids(), rb.ids());
            for (x, y) in ra.entries.iter().zip(&rb.entries) {
                assert!((x.score - y.score).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn queries_leave_the_index_untouched() {
    let docs = synth::clustered_documents(50, 4, 8, 5, 2, 0.3, 1);
    let index = DessertIndex::build(&docs, IndexConfig::new(8).with_tables(4, 16)).unwrap();
    let before = encode_index(&index).unwrap();
    let mut r = rng(2);
    for i in 0..30 {
        let q = random_set(&mut r, 4, 8);
        let params = SearchParams::top_k(5).with_filter(2, 20).parallel(i % 2 == 0);
        index.query(&q, &params).unwrap();
    }
    assert_eq!(encode_index(&index).unwrap(), before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parallel_and_sequential_agree(seed in any::<u64>(), n in 1usize..40, k in 1usize..10) {
        let docs = synth::random_documents(n, 4, 8, seed);
        let index = DessertIndex::build(&docs, config(8, 3, 16, seed)).unwrap();
        let mut r = rng(seed ^ 1);
        let q = random_set(&mut r, 3, 8);
        let seq = index.query(&q, &SearchParams::top_k(k)).unwrap();
        let par = index.query(&q, &SearchParams::top_k(k).parallel(true)).unwrap();
        prop_assert_eq!(&seq, &par);
        prop_assert_eq!(seq.len(), k.min(n));
        prop_assert!(seq.entries.iter().all(|e| (0.0..=1.0).contains(&e.score)));
    }

    #[test]
    fn self_query_scores_one(seed in any::<u64>(), m in 1usize..10) {
        let docs = synth::random_documents(5, m, 8, seed);
        let index = DessertIndex::build(&docs, config(8, 4, 16, seed)).unwrap();
        for d in &docs {
            let codes = index.hash_query(&d.vectors).unwrap();
            let i = index.doc_ids().iter().position(|&x| x == d.id).unwrap();
            prop_assert_eq!(index.score_candidate(i, &codes, &Scorer::default()).unwrap(), 1.0);
        }
    }
}
