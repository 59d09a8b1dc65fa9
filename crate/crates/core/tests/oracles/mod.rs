//! Brute-force reference implementations shared by the integration tests and
//! the acceptance run. They are written for clarity, not speed, and avoid the
//! library's own helpers.
#![allow(dead_code)]

/// Frequency score `1 / (1 + e^{-exp(w/100)})`.
pub fn edge_score(w: u32) -> f64 {
    let z = (w as f64 / 100.0).exp();
    1.0 / (1.0 + (-z).exp())
}

/// `(W·y)·e / √d` with sequential sums.
pub fn preference_score(y: &[f64], w1: &[Vec<f64>], e: &[f64]) -> f64 {
    let d = y.len();
    let mut q = vec![0.0; d];
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += w1[i][j] * y[j];
        }
        q[i] = s;
    }
    let mut s = 0.0;
    for i in 0..d {
        s += q[i] * e[i];
    }
    s / (d as f64).sqrt()
}

/// Picks the best remaining candidate `k` times: highest score, then lowest id.
pub fn select_top(mut scored: Vec<(u32, f64)>, k: usize) -> Vec<u32> {
    let mut out = Vec::new();
    while out.len() < k && !scored.is_empty() {
        let mut best = 0;
        for i in 1..scored.len() {
            let (a, s) = scored[i];
            let (ba, bs) = scored[best];
            if s > bs || (s == bs && a < ba) {
                best = i;
            }
        }
        out.push(scored.remove(best).0);
    }
    out
}

/// Interactions strictly before `now` inside the window, newest first,
/// ties by aspect id, at most `n`.
pub fn recent(history: &[(u32, i64)], now: i64, n: usize, window_days: f64) -> Vec<(u32, i64)> {
    let window = window_days * 86_400.0;
    let mut pool: Vec<(u32, i64)> = history
        .iter()
        .copied()
        .filter(|&(_, t)| t < now && (now - t) as f64 <= window)
        .collect();
    let mut out = Vec::new();
    while out.len() < n && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (a, t) = pool[i];
            let (ba, bt) = pool[best];
            if t > bt || (t == bt && a < ba) {
                best = i;
            }
        }
        out.push(pool.remove(best));
    }
    out
}

/// `b + Σ w_i x_i + Σ_{i<j} ⟨v_i, v_j⟩ x_i x_j` by the double loop.
pub fn fm_brute(x: &[f64], w: &[f64], v: &[Vec<f64>], bias: f64) -> f64 {
    let mut total = bias;
    for i in 0..x.len() {
        total += w[i] * x[i];
    }
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let mut dot = 0.0;
            for f in 0..v[i].len() {
                dot += v[i][f] * v[j][f];
            }
            total += dot * x[i] * x[j];
        }
    }
    total
}

fn dcg(relevance_in_rank_order: &[f64], k: usize) -> f64 {
    relevance_in_rank_order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &r)| (2f64.powf(r) - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

/// Heap's algorithm over index permutations.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Best DCG over every ordering of `relevance`.
pub fn ideal_dcg_brute(relevance: &[f64], k: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_permutation(relevance.len(), |perm| {
        let r: Vec<f64> = perm.iter().map(|&i| relevance[i]).collect();
        best = best.max(dcg(&r, k));
    });
    best
}

/// NDCG@k given the ideal DCG. Predicted ties keep list order. An all-zero
/// ideal scores 1.
pub fn ndcg_with_ideal(relevance: &[f64], predicted: &[f64], k: usize, ideal: f64) -> f64 {
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| predicted[b].partial_cmp(&predicted[a]).unwrap());
    let ranked: Vec<f64> = order.iter().map(|&i| relevance[i]).collect();
    if ideal <= 0.0 {
        1.0
    } else {
        dcg(&ranked, k) / ideal
    }
}

/// NDCG@k with the ideal DCG found by trying every ordering of the list.
pub fn ndcg_brute(relevance: &[f64], predicted: &[f64], k: usize) -> f64 {
    ndcg_with_ideal(relevance, predicted, k, ideal_dcg_brute(relevance, k))
}

/// Calls `f(relevance, predicted, ndcg_oracle)` for every rating list over
/// {1..5} of length 1..=max_len, with a deterministic prediction list that
/// contains ties. The permutation search runs once per rating multiset,
/// since every ordering of a multiset shares the same best DCG.
pub fn for_each_rating_list(max_len: usize, k: usize, mut f: impl FnMut(&[f64], &[f64], f64)) -> usize {
    let mut ideal: std::collections::HashMap<Vec<u8>, f64> = std::collections::HashMap::new();
    let mut count = 0;
    for len in 1..=max_len {
        for code in 0..5usize.pow(len as u32) {
            let digits: Vec<u8> = (0..len).map(|j| ((code / 5usize.pow(j as u32)) % 5 + 1) as u8).collect();
            let rel: Vec<f64> = digits.iter().map(|&d| f64::from(d)).collect();
            let pred: Vec<f64> = (0..len).map(|j| ((code * 31 + j * 17) % 7) as f64).collect();
            let mut key = digits.clone();
            key.sort_unstable();
            let best = *ideal.entry(key).or_insert_with(|| ideal_dcg_brute(&rel, k));
            f(&rel, &pred, ndcg_with_ideal(&rel, &pred, k, best));
            count += 1;
        }
    }
    count
}
