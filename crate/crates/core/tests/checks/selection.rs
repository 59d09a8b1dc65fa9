//! Important-K and recent-N against score-sort and filter-sort oracles.

use std::collections::{BTreeMap, BTreeSet};

use lsa_core::corpus::{AspectMention, AspectVocabulary, RawReview, Rule};
use lsa_core::graph::{AspectGraph, EntityIndex, NodeId};
use lsa_core::selection::{important_k, recent_n, InteractionHistory, PreferenceScorer};
use lsa_core::tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles;

pub struct Case {
    reviews: Vec<RawReview>,
    /// Aspect ids mentioned by each review, possibly repeated.
    mentioned: Vec<Vec<u32>>,
    n_aspects: usize,
    d: usize,
    prefs: Vec<Vec<f64>>,
    w1: Vec<Vec<f64>>,
    aspects: Vec<Vec<f64>>,
}

pub fn random_case(rng: &mut ChaCha8Rng, max_aspects: usize) -> Case {
    let n_aspects = rng.random_range(1..=max_aspects);
    let n_users = rng.random_range(1..=5);
    let n_items = rng.random_range(1..=5);
    let d = rng.random_range(1..=6);
    let n_reviews = rng.random_range(0..=40);
    let mut reviews = Vec::new();
    let mut mentioned = Vec::new();
    for _ in 0..n_reviews {
        reviews.push(RawReview {
            user_id: format!("u{}", rng.random_range(0..n_users)),
            item_id: format!("i{}", rng.random_range(0..n_items)),
            rating: 3.0,
            // A narrow range forces timestamp ties.
            timestamp: rng.random_range(0..30) * 3600,
            text: Some(String::new()),
            triples: None,
        });
        let k = rng.random_range(0..6);
        mentioned.push((0..k).map(|_| rng.random_range(0..n_aspects as u32)).collect());
    }
    let mut row = |zero: bool| -> Vec<f64> {
        (0..d)
            .map(|_| if zero { 0.0 } else { (rng.random_range(-4..=4) as f64) * 0.25 })
            .collect()
    };
    let prefs: Vec<Vec<f64>> = (0..n_users.max(n_items)).map(|i| row(i % 3 == 0)).collect();
    let w1: Vec<Vec<f64>> = (0..d).map(|_| row(false)).collect();
    // Quantised embeddings make exact score ties common.
    let aspects: Vec<Vec<f64>> = (0..n_aspects).map(|a| row(a % 4 == 1)).collect();
    Case {
        reviews,
        mentioned,
        n_aspects,
        d,
        prefs,
        w1,
        aspects,
    }
}

fn matrix(rows: &[Vec<f64>], cols: usize) -> Matrix {
    Matrix::from_vec(rows.len(), cols, rows.iter().flatten().copied().collect())
}

fn build(case: &Case) -> (AspectGraph, EntityIndex) {
    let names: Vec<String> = (0..case.n_aspects).map(|a| format!("a{a}")).collect();
    let vocab = AspectVocabulary::from_parts(names, vec![1; case.n_aspects], 1);
    let mentions: Vec<AspectMention> = case
        .mentioned
        .iter()
        .enumerate()
        .flat_map(|(r, ids)| {
            ids.iter().map(move |&a| AspectMention {
                review_index: r,
                aspect: format!("a{a}"),
                opinion: "good".into(),
                rule: Rule::Amod,
            })
        })
        .collect();
    let entities = EntityIndex::from_reviews(&case.reviews);
    (AspectGraph::build(&case.reviews, &mentions, &vocab, &entities), entities)
}

/// Per-node weights and interaction lists straight from the raw reviews.
fn raw_edges(case: &Case, user_side: bool, name: &str) -> (BTreeMap<u32, u32>, Vec<(u32, i64)>) {
    let mut w = BTreeMap::new();
    let mut history = Vec::new();
    for (r, ids) in case.reviews.iter().zip(&case.mentioned) {
        let owner = if user_side { &r.user_id } else { &r.item_id };
        if owner != name {
            continue;
        }
        let distinct: BTreeSet<u32> = ids.iter().copied().collect();
        for a in distinct {
            *w.entry(a).or_insert(0) += 1;
            history.push((a, r.timestamp));
        }
    }
    (w, history)
}

pub fn check_case(case: &Case, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (graph, entities) = build(case);
    let prefs = matrix(&case.prefs, case.d);
    let w1 = matrix(&case.w1, case.d);
    let aspects = matrix(&case.aspects, case.d);
    let scorer = PreferenceScorer {
        preferences: &prefs,
        projection: &w1,
        aspects: &aspects,
    };
    let nodes: Vec<(bool, String, usize)> = (0..entities.n_users())
        .map(|u| (true, entities.user_name(u).to_string(), u))
        .chain((0..entities.n_items()).map(|i| (false, entities.item_name(i).to_string(), i)))
        .collect();
    for (user_side, name, idx) in nodes {
        let node = if user_side { NodeId::user(idx) } else { NodeId::item(idx) };
        let (w, history) = raw_edges(case, user_side, &name);
        for &a in w.keys() {
            if graph.edge_weight(node, a) != w[&a] {
                return Err(format!("weight mismatch at {name}/{a}"));
            }
        }
        let k = rng.random_range(1..=12);
        for full in [false, true] {
            let candidates: Vec<u32> = if full { (0..case.n_aspects as u32).collect() } else { w.keys().copied().collect() };
            let scored: Vec<(u32, f64)> = candidates
                .iter()
                .map(|&a| {
                    let wt = w.get(&a).copied().unwrap_or(0);
                    let s = oracles::edge_score(wt)
                        + oracles::preference_score(&case.prefs[idx], &case.w1, &case.aspects[a as usize]);
                    (a, s)
                })
                .collect();
            let want = oracles::select_top(scored, k);
            let got = important_k(&graph, &scorer, node, k, full).map_err(|e| e.to_string())?;
            let valid: Vec<u32> = got.aspect_ids.iter().zip(&got.mask).filter(|(_, &m)| m).map(|(&a, _)| a).collect();
            if valid != want || got.mask.len() != k || got.mask.iter().take(want.len()).any(|m| !m) {
                return Err(format!("important_k {name} k={k} full={full}: got {valid:?}, want {want:?}"));
            }
        }
        let lib_history = InteractionHistory::from_graph(&graph, node).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let now = rng.random_range(0..32) * 3600;
            let n = rng.random_range(1..=8);
            let window = [0.05, 0.5, 2.0][rng.random_range(0..3)];
            let want = oracles::recent(&history, now, n, window);
            let got = recent_n(&lib_history, node, now, n, window).map_err(|e| e.to_string())?;
            let times = got.timestamps.clone().unwrap();
            let valid: Vec<(u32, i64)> = (0..n).filter(|&s| got.mask[s]).map(|s| (got.aspect_ids[s], times[s])).collect();
            if valid != want || got.mask.len() != n {
                return Err(format!("recent_n {name} now={now} n={n}: got {valid:?}, want {want:?}"));
            }
        }
    }
    Ok(())
}

/// `graphs` random graphs with up to 200 aspects, seeds `0..graphs`.
pub fn random_graphs(graphs: u64) -> Result<String, String> {
    for seed in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_case(&mut rng, 200);
        check_case(&case, &mut rng).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{graphs} graphs"))
}
