use std::collections::BTreeSet;

use lsa_core::encoder::{attention_weights, encode_sequence, gate_values, gated_fusion};
use lsa_core::graph::NodeId;
use lsa_core::model::{LsaModel, ModelConfig, Variant};
use lsa_core::predictor::aggregation_weights;
use lsa_core::selection::{Horizon, InterestSequence};
use lsa_core::tensor::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common;

/// A model on a 12-user fixture with K = 6, N = 4.
pub fn model(d: usize, lambda: f64) -> (common::Fixture, LsaModel) {
    let f = common::fixture(12, 8, 6, 3);
    let config = ModelConfig {
        d,
        lambda,
        long_k: 6,
        short_n: 4,
        ..common::tiny_model_config()
    };
    let (m, _, _) = common::model_on(&f, config, Variant::Full, 5);
    (f, m)
}

pub fn row_times(v: &[f64], w: &Matrix) -> Vec<f64> {
    (0..w.cols()).map(|j| (0..v.len()).map(|i| v[i] * w[(i, j)]).sum()).collect()
}

/// Every attention row sums to 1 within 1e-6 and puts exactly zero weight on
/// masked slots; the aspect-aggregation weights sum to 1.
pub fn attention_rows() -> Result<String, String> {
    let (f, m) = model(4, 1.0);
    let n_aspects = f.data.vocab.len() as u32;
    let side = &m.layout.user;
    let mut rows = 0;
    let mut worst = 0.0f64;
    for valid in 0..=6usize {
        for (horizon, enc, slots) in [(Horizon::Long, &side.long, 6), (Horizon::Short, &side.short, 4)] {
            if valid > slots {
                continue;
            }
            let mut seq = InterestSequence::empty(NodeId::user(1), slots, horizon);
            for s in 0..valid {
                seq.aspect_ids[s] = (s as u32 * 3) % n_aspects;
                seq.mask[s] = true;
            }
            if horizon == Horizon::Short {
                seq.timestamps = Some((0..slots as i64).map(|s| 1_000_000 - s * 5000).collect());
                seq.reference_time = Some(1_000_000);
            }
            for w in attention_weights(&m.params, enc, &m.layout.tables, &seq) {
                if w.cols() != slots + 1 {
                    return Err(format!("attention has {} columns, want {}", w.cols(), slots + 1));
                }
                for r in 0..w.rows() {
                    let row = w.row(r);
                    let dev = (row.iter().sum::<f64>() - 1.0).abs();
                    worst = worst.max(dev);
                    if dev > 1e-6 {
                        return Err(format!("{horizon:?} row sums to 1 ± {dev:.2e}"));
                    }
                    if let Some(s) = (0..slots).find(|&s| !seq.mask[s] && row[s + 1] != 0.0) {
                        return Err(format!("{horizon:?} masked slot {s} has weight {}", row[s + 1]));
                    }
                    rows += 1;
                }
            }
        }
    }
    let ctx = vec![0.3, -0.1, 0.5, 0.2];
    let w = aggregation_weights(&m.params, &m.layout.aggregation, m.layout.tables.aspect, &ctx, &[0, 2, 3]);
    let dev = (w.iter().sum::<f64>() - 1.0).abs();
    if dev > 1e-12 {
        return Err(format!("aggregation weights sum to 1 ± {dev:.2e}"));
    }
    Ok(format!("{rows} rows, max |sum - 1| {worst:.1e}"))
}

/// Gate saturated to 1 gives twice the projected long-term vector; gate
/// saturated to 0 gives projected short plus projected long.
pub fn forced_gate() -> Result<String, String> {
    let (_, mut m) = model(4, 1.0);
    let mut worst = 0.0f64;
    for gate in [m.layout.user.gate.clone(), m.layout.item.gate.clone()] {
        let long = [0.4, -1.2, 0.7, 0.05];
        let short = [-0.3, 0.8, 0.1, 1.5];
        let l = row_times(&long, m.params.get(gate.w_long));
        let s = row_times(&short, m.params.get(gate.w_short));
        let d = m.params.get(gate.b_gate).cols();
        let rows = m.params.get(gate.w_gate).rows();
        *m.params.get_mut(gate.w_gate) = Matrix::zeros(rows, d);
        for (bias, g, want) in [(800.0, 1.0, l.iter().map(|x| 2.0 * x).collect::<Vec<_>>()), (-800.0, 0.0, s.iter().zip(&l).map(|(a, b)| a + b).collect())] {
            *m.params.get_mut(gate.b_gate) = Matrix::filled(1, d, bias);
            if gate_values(&m.params, &gate, &long, &short).iter().any(|&v| v != g) {
                return Err(format!("gate did not saturate to {g}"));
            }
            let out = gated_fusion(&m.params, &gate, &long, &short);
            for j in 0..d {
                let err = (out[j] - want[j]).abs();
                worst = worst.max(err);
                if err > 1e-12 {
                    return Err(format!("g={g}: component {j} is {} want {}", out[j], want[j]));
                }
            }
        }
    }
    Ok(format!("g=1 and g=0 on both sides, max abs err {worst:.1e}"))
}

/// Long-term sequence over `ids`, skipping `padding` slots.
pub fn long_seq(ids: &[u32], padding: &[usize], slots: usize) -> InterestSequence {
    let mut seq = InterestSequence::empty(NodeId::item(2), slots, Horizon::Long);
    let mut it = ids.iter();
    for s in 0..slots {
        if !padding.contains(&s) {
            if let Some(&a) = it.next() {
                seq.aspect_ids[s] = a;
                seq.mask[s] = true;
            }
        }
    }
    seq
}

/// Anchor outputs of the long-term encoder, as bit patterns, for two
/// orderings of the same aspect set.
pub fn permuted_pair(m: &LsaModel, ids: &[u32], shuffled: &[u32], pad: &[usize]) -> (Vec<u64>, Vec<u64>) {
    let slots = ids.len().max(6) + pad.len();
    let a = long_seq(ids, &[], slots);
    let b = long_seq(shuffled, pad, slots);
    let enc = &m.layout.item.long;
    let bits = |s: &InterestSequence| -> Vec<u64> {
        encode_sequence(&m.params, enc, &m.layout.tables, s).iter().map(|x| x.to_bits()).collect()
    };
    (bits(&a), bits(&b))
}

pub fn permutation_invariance(trials: usize, seed: u64) -> Result<String, String> {
    let (f, m) = model(4, 1.0);
    let n = f.data.vocab.len() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let size = rng.random_range(1..=6.min(n as usize));
        let ids: Vec<u32> = (0..size).map(|_| rng.random_range(0..n)).collect::<BTreeSet<_>>().into_iter().collect();
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut rng);
        let pad: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(0..6)).collect();
        let (a, b) = permuted_pair(&m, &ids, &shuffled, &pad);
        if a != b {
            return Err(format!("trial {t}: {ids:?} vs {shuffled:?} differ"));
        }
    }
    Ok(format!("{trials} permutations, bitwise equal"))
}

/// With λ = 0 the prediction bits do not depend on the candidate aspects;
/// with λ = 1 they do.
pub fn zero_lambda() -> Result<String, String> {
    let (f, m) = model(4, 0.0);
    let long = m.long_term_sequences(&f.data.context).map_err(|e| e.to_string())?;
    let n_aspects = f.data.vocab.len() as u32;
    let sets: Vec<Vec<u32>> = vec![vec![], vec![0], (0..n_aspects).collect(), vec![1, 3], vec![n_aspects - 1]];
    let mut compared = 0;
    for x in f.data.train.iter().take(25) {
        let mut ex = m.prepare(&f.data.context, x).map_err(|e| e.to_string())?;
        let base = m.predict(&long, &ex).to_bits();
        for set in &sets {
            ex.candidates.aspects = set.clone();
            if m.predict(&long, &ex).to_bits() != base {
                return Err(format!("aspect set {set:?} changed the prediction"));
            }
            compared += 1;
        }
    }
    let (f, m) = model(4, 1.0);
    let long = m.long_term_sequences(&f.data.context).map_err(|e| e.to_string())?;
    let mut ex = m.prepare(&f.data.context, &f.data.train[0]).map_err(|e| e.to_string())?;
    ex.candidates.aspects = vec![0];
    let a = m.predict(&long, &ex);
    ex.candidates.aspects = vec![1, 2];
    if a == m.predict(&long, &ex) {
        return Err("aspect set has no effect even with λ = 1".into());
    }
    Ok(format!("{compared} predictions bitwise equal"))
}
