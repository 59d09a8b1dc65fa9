//! Interest-aware aspect aggregation and factorization-machine scoring.
//!
//! For a user–item pair the candidate aspects are the union of both aspect
//! neighbourhoods. A fused context `f = ReLU(W_f·[p ⊕ q] + b_f)` queries those
//! aspects with dot-product attention, giving `h_a`. The rating is then an FM
//! over `x = p ⊕ q ⊕ λ·h_a`:
//!
//! ```text
//! r̂ = b₀ + b_u + b_i + x·w + Σ_{i<j} ⟨V_i, V_j⟩ x_i x_j
//! ```
//!
//! with the pairwise sum evaluated as `½ Σ_f [(Σ_i V_if x_i)² − Σ_i V_if² x_i²]`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::graph::AspectId;
use crate::params::{uniform_matrix, ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Matrix;

/// Sorted union of user and item aspects, truncated to `max_union` ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAspects {
    pub aspects: Vec<AspectId>,
    /// Whether the union exceeded the cap and was cut.
    pub truncated: bool,
}

pub fn candidate_aspects(user: &[AspectId], item: &[AspectId], max_union: usize) -> CandidateAspects {
    let mut all: Vec<AspectId> = user.iter().chain(item).copied().collect();
    all.sort_unstable();
    all.dedup();
    let truncated = all.len() > max_union;
    all.truncate(max_union);
    CandidateAspects {
        aspects: all,
        truncated,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    /// `4d × d`
    pub w_fuse: ParamId,
    pub b_fuse: ParamId,
    pub w_query: ParamId,
    pub w_key: ParamId,
    pub w_value: ParamId,
}

impl AggregationParams {
    pub fn init(store: &mut ParamStore, rng: &mut Rng, d: usize) -> Self {
        let bound = 1.0 / libm::sqrt(d as f64);
        AggregationParams {
            w_fuse: store.add("agg.w_fuse", uniform_matrix(rng, 4 * d, d, 1.0 / libm::sqrt(4.0 * d as f64))),
            b_fuse: store.add("agg.b_fuse", Matrix::zeros(1, d)),
            w_query: store.add("agg.w_query", uniform_matrix(rng, d, d, bound)),
            w_key: store.add("agg.w_key", uniform_matrix(rng, d, d, bound)),
            w_value: store.add("agg.w_value", uniform_matrix(rng, d, d, bound)),
        }
    }

    pub fn param_ids(&self) -> [ParamId; 5] {
        [self.w_fuse, self.b_fuse, self.w_query, self.w_key, self.w_value]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Softmax attention queried by the user–item context.
    #[default]
    Attention,
    /// Unweighted mean of the value vectors.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmParams {
    /// `1 × 1`
    pub global_bias: ParamId,
    /// `n_users × 1`
    pub user_bias: ParamId,
    /// `n_items × 1`
    pub item_bias: ParamId,
    /// `d' × 1`
    pub linear: ParamId,
    /// `d' × k_fm`
    pub factors: ParamId,
    /// Weight on `h_a` inside the feature vector; fixed, not learned.
    pub lambda: f64,
}

impl FmParams {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut Rng,
        n_users: usize,
        n_items: usize,
        features: usize,
        rank: usize,
        lambda: f64,
        global_mean: f64,
    ) -> Self {
        FmParams {
            global_bias: store.add("fm.b0", Matrix::scalar(global_mean)),
            user_bias: store.add("fm.user_bias", Matrix::zeros(n_users, 1)),
            item_bias: store.add("fm.item_bias", Matrix::zeros(n_items, 1)),
            linear: store.add("fm.w", uniform_matrix(rng, features, 1, 0.01)),
            factors: store.add(
                "fm.v",
                uniform_matrix(rng, features, rank, 1.0 / libm::sqrt(features as f64)),
            ),
            lambda,
        }
    }

    pub fn param_ids(&self) -> [ParamId; 5] {
        [self.global_bias, self.user_bias, self.item_bias, self.linear, self.factors]
    }
}

/// `ReLU(W_f·[p ⊕ q] + b_f)`
pub fn context_fusion_on_tape(tape: &mut Tape<'_>, agg: &AggregationParams, p: Var, q: Var) -> Var {
    let both = tape.concat_cols(&[p, q]);
    let w = tape.param(agg.w_fuse);
    let b = tape.param(agg.b_fuse);
    let z = tape.affine(both, w, b);
    tape.relu(z)
}

/// `h_a`, the attention-weighted sum of value vectors; zero for no aspects.
pub fn aggregate_on_tape(
    tape: &mut Tape<'_>,
    agg: &AggregationParams,
    aspect_table: ParamId,
    context: Var,
    aspects: &[AspectId],
    mode: AggregationMode,
) -> Var {
    let d = tape.value(context).cols();
    if aspects.is_empty() {
        return tape.constant(Matrix::zeros(1, d));
    }
    let rows: Vec<Option<usize>> = aspects.iter().map(|&a| Some(a as usize)).collect();
    let emb = tape.gather_rows(aspect_table, &rows);
    let wv = tape.param(agg.w_value);
    let values = tape.matmul(emb, wv);
    match mode {
        AggregationMode::Mean => tape.mean_rows(values),
        AggregationMode::Attention => {
            let wq = tape.param(agg.w_query);
            let wk = tape.param(agg.w_key);
            let query = tape.matmul(context, wq);
            let keys = tape.matmul(emb, wk);
            let scores = tape.matmul_t(query, keys);
            let weights = tape.masked_softmax(scores, &alloc::vec![true; aspects.len()]);
            tape.matmul(weights, values)
        }
    }
}

/// Attention weights of the aggregation on plain values, for inspection.
pub fn aggregation_weights(store: &ParamStore, agg: &AggregationParams, aspect_table: ParamId, context: &[f64], aspects: &[AspectId]) -> Vec<f64> {
    if aspects.is_empty() {
        return Vec::new();
    }
    let mut tape = Tape::new(store);
    let ctx = tape.constant(Matrix::row_vector(context.to_vec()));
    let rows: Vec<Option<usize>> = aspects.iter().map(|&a| Some(a as usize)).collect();
    let emb = tape.gather_rows(aspect_table, &rows);
    let wq = tape.param(agg.w_query);
    let wk = tape.param(agg.w_key);
    let query = tape.matmul(ctx, wq);
    let keys = tape.matmul(emb, wk);
    let scores = tape.matmul_t(query, keys);
    let weights = tape.masked_softmax(scores, &alloc::vec![true; aspects.len()]);
    tape.value(weights).data().to_vec()
}

/// FM rating for the feature row `x` (`1 × d'`). Unknown users or items
/// (`None`) contribute no bias.
pub fn fm_on_tape(tape: &mut Tape<'_>, fm: &FmParams, x: Var, user: Option<usize>, item: Option<usize>) -> Var {
    let b0 = tape.param(fm.global_bias);
    let bu = tape.gather_rows(fm.user_bias, &[user]);
    let bi = tape.gather_rows(fm.item_bias, &[item]);
    let w = tape.param(fm.linear);
    let linear = tape.matmul(x, w);

    let v = tape.param(fm.factors);
    let xv = tape.matmul(x, v);
    let xv_sq = tape.square(xv);
    let x_sq = tape.square(x);
    let v_sq = tape.square(v);
    let diag = tape.matmul(x_sq, v_sq);
    let diff = tape.sub(xv_sq, diag);
    let pair_sum = tape.sum(diff);
    let pairwise = tape.scale(pair_sum, 0.5);

    let biases = tape.add(b0, bu);
    let biases = tape.add(biases, bi);
    let out = tape.add(biases, linear);
    tape.add(out, pairwise)
}

/// `x = p ⊕ q ⊕ λ·h_a`
pub fn feature_row(tape: &mut Tape<'_>, p: Var, q: Var, h_a: Var, lambda: f64) -> Var {
    let scaled = tape.scale(h_a, lambda);
    tape.concat_cols(&[p, q, scaled])
}

/// FM score on plain values using the linear-time pairwise identity.
pub fn fm_score(x: &[f64], linear: &[f64], factors: &Matrix, biases: f64) -> f64 {
    assert_eq!(x.len(), linear.len(), "feature width");
    assert_eq!(factors.rows(), x.len(), "factor rows");
    let lin: f64 = x.iter().zip(linear).map(|(a, b)| a * b).sum();
    let mut pairwise = 0.0;
    for f in 0..factors.cols() {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let t = factors[(i, f)] * xi;
            s += t;
            s2 += t * t;
        }
        pairwise += s * s - s2;
    }
    biases + lin + 0.5 * pairwise
}
