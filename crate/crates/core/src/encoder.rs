//! Long- and short-term interest encoders and the gated fusion of their outputs.
//!
//! An encoder is a stack of pre-norm Transformer blocks whose self-attention is
//! replaced by multi-head GATv2 scoring:
//!
//! ```text
//! score_h(i, j) = a_hᵀ · LeakyReLU(W_att · [x_i ‖ x_j])_h
//! ```
//!
//! softmax-normalised over the unmasked positions `j`. The block output at the
//! anchor position (index 0) is the interest vector. Short-term sequences add a
//! recency-rank embedding and a log-bucketed elapsed-days embedding to each
//! aspect token; long-term sequences are treated as sets and carry no position.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::corpus::SECONDS_PER_DAY;
use crate::graph::NodeKind;
use crate::params::{uniform_matrix, ParamId, ParamStore};
use crate::rng::Rng;
use crate::selection::{Horizon, InterestSequence};
use crate::tensor::Matrix;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const FFN_MULTIPLIER: usize = 4;
pub const TIME_BUCKETS: usize = 16;

/// Embedding tables shared by every branch of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTables {
    pub user: ParamId,
    pub item: ParamId,
    pub aspect: ParamId,
    /// Rating-preference embeddings `y_u`.
    pub user_pref: ParamId,
    /// Rating-preference embeddings `y_i`.
    pub item_pref: ParamId,
}

impl EmbeddingTables {
    pub fn init(store: &mut ParamStore, rng: &mut Rng, n_users: usize, n_items: usize, n_aspects: usize, d: usize) -> Self {
        let bound = 1.0 / libm::sqrt(d as f64);
        EmbeddingTables {
            user: store.add("emb.user", uniform_matrix(rng, n_users, d, bound)),
            item: store.add("emb.item", uniform_matrix(rng, n_items, d, bound)),
            aspect: store.add("emb.aspect", uniform_matrix(rng, n_aspects, d, bound)),
            user_pref: store.add("pref.user", uniform_matrix(rng, n_users, d, bound)),
            item_pref: store.add("pref.item", uniform_matrix(rng, n_items, d, bound)),
        }
    }

    pub fn anchor_table(&self, kind: NodeKind) -> ParamId {
        match kind {
            NodeKind::Item => self.item,
            _ => self.user,
        }
    }

    pub fn pref_table(&self, kind: NodeKind) -> ParamId {
        match kind {
            NodeKind::Item => self.item_pref,
            _ => self.user_pref,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayer {
    pub att_norm_gain: ParamId,
    pub att_norm_bias: ParamId,
    /// `2d × d`: rows `0..d` act on the attending token, rows `d..2d` on the attended one.
    pub att_w: ParamId,
    /// `1 × d`, split into per-head slices.
    pub att_vec: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub ff_norm_gain: ParamId,
    pub ff_norm_bias: ParamId,
    pub ff_w1: ParamId,
    pub ff_b1: ParamId,
    pub ff_w2: ParamId,
    pub ff_b2: ParamId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layers: Vec<EncoderLayer>,
    pub final_gain: ParamId,
    pub final_bias: ParamId,
    pub heads: usize,
    /// Recency-rank embeddings (short-term encoders only).
    pub positions: Option<ParamId>,
    /// Elapsed-time bucket embeddings (short-term encoders only).
    pub time_buckets: Option<ParamId>,
}

impl EncoderParams {
    /// Panics unless `heads` divides `d`; configs are validated before this.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        store: &mut ParamStore,
        rng: &mut Rng,
        prefix: &str,
        d: usize,
        layers: usize,
        heads: usize,
        horizon: Horizon,
        max_positions: usize,
    ) -> Self {
        assert!(heads >= 1 && d % heads == 0, "heads must divide d");
        let hidden = FFN_MULTIPLIER * d;
        let w = |rng: &mut Rng, rows: usize, cols: usize| uniform_matrix(rng, rows, cols, 1.0 / libm::sqrt(rows as f64));
        let mut out = Vec::with_capacity(layers);
        for l in 0..layers {
            let p = format!("{prefix}.layer{l}");
            out.push(EncoderLayer {
                att_norm_gain: store.add(format!("{p}.att_norm.gain"), Matrix::filled(1, d, 1.0)),
                att_norm_bias: store.add(format!("{p}.att_norm.bias"), Matrix::zeros(1, d)),
                att_w: store.add(format!("{p}.att.w"), w(rng, 2 * d, d)),
                att_vec: store.add(
                    format!("{p}.att.a"),
                    uniform_matrix(rng, 1, d, 1.0 / libm::sqrt((d / heads) as f64)),
                ),
                out_w: store.add(format!("{p}.att.out_w"), w(rng, d, d)),
                out_b: store.add(format!("{p}.att.out_b"), Matrix::zeros(1, d)),
                ff_norm_gain: store.add(format!("{p}.ff_norm.gain"), Matrix::filled(1, d, 1.0)),
                ff_norm_bias: store.add(format!("{p}.ff_norm.bias"), Matrix::zeros(1, d)),
                ff_w1: store.add(format!("{p}.ff.w1"), w(rng, d, hidden)),
                ff_b1: store.add(format!("{p}.ff.b1"), Matrix::zeros(1, hidden)),
                ff_w2: store.add(format!("{p}.ff.w2"), w(rng, hidden, d)),
                ff_b2: store.add(format!("{p}.ff.b2"), Matrix::zeros(1, d)),
            });
        }
        let (positions, time_buckets) = match horizon {
            Horizon::Long => (None, None),
            Horizon::Short => {
                let bound = 1.0 / libm::sqrt(d as f64);
                (
                    Some(store.add(format!("{prefix}.positions"), uniform_matrix(rng, max_positions, d, bound))),
                    Some(store.add(format!("{prefix}.time_buckets"), uniform_matrix(rng, TIME_BUCKETS, d, bound))),
                )
            }
        };
        EncoderParams {
            layers: out,
            final_gain: store.add(format!("{prefix}.final_norm.gain"), Matrix::filled(1, d, 1.0)),
            final_bias: store.add(format!("{prefix}.final_norm.bias"), Matrix::zeros(1, d)),
            heads,
            positions,
            time_buckets,
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for l in &self.layers {
            ids.extend([
                l.att_norm_gain,
                l.att_norm_bias,
                l.att_w,
                l.att_vec,
                l.out_w,
                l.out_b,
                l.ff_norm_gain,
                l.ff_norm_bias,
                l.ff_w1,
                l.ff_b1,
                l.ff_w2,
                l.ff_b2,
            ]);
        }
        ids.extend([self.final_gain, self.final_bias]);
        ids.extend(self.positions);
        ids.extend(self.time_buckets);
        ids
    }
}

/// Bucket of an elapsed duration: 0 days → 0, 1 → 1, 2–3 → 2, 4–7 → 3, …
/// capped at the last bucket.
pub fn time_bucket(elapsed_seconds: i64) -> usize {
    let days = (elapsed_seconds.max(0) / SECONDS_PER_DAY) as u64;
    let bucket = if days == 0 { 0 } else { 64 - days.leading_zeros() as usize };
    bucket.min(TIME_BUCKETS - 1)
}

/// Long-term sequences are sets: valid aspects are sorted ascending so the
/// encoding does not depend on slot order.
fn canonical_slots(seq: &InterestSequence) -> (Vec<Option<usize>>, Vec<bool>) {
    match seq.horizon {
        Horizon::Short => (
            seq.aspect_ids
                .iter()
                .zip(&seq.mask)
                .map(|(&a, &m)| m.then_some(a as usize))
                .collect(),
            seq.mask.clone(),
        ),
        Horizon::Long => {
            let mut valid = seq.valid_aspects();
            valid.sort_unstable();
            let mut rows: Vec<Option<usize>> = valid.iter().map(|&a| Some(a as usize)).collect();
            let mut mask = alloc::vec![true; valid.len()];
            rows.resize(seq.aspect_ids.len(), None);
            mask.resize(seq.aspect_ids.len(), false);
            (rows, mask)
        }
    }
}

/// Encoder output plus the attention weights of every layer and head. They
/// are `S × S` matrices on the tape, except in the last layer where only the
/// anchor row (`1 × S`) is computed.
pub struct EncodeTrace {
    pub output: Var,
    pub attention: Vec<Var>,
}

/// Encodes `seq` on `tape`, returning the `1 × d` anchor output.
pub fn encode_on_tape(tape: &mut Tape<'_>, enc: &EncoderParams, tables: &EmbeddingTables, seq: &InterestSequence) -> Var {
    encode_traced(tape, enc, tables, seq).output
}

pub fn encode_traced(tape: &mut Tape<'_>, enc: &EncoderParams, tables: &EmbeddingTables, seq: &InterestSequence) -> EncodeTrace {
    let (rows, slot_mask) = canonical_slots(seq);
    let anchor = tape.gather_rows(tables.anchor_table(seq.anchor.kind), &[Some(seq.anchor.index as usize)]);
    let aspects = tape.gather_rows(tables.aspect, &rows);
    let mut aspects = aspects;

    if seq.horizon == Horizon::Short {
        if let Some(pos) = enc.positions {
            let max = tape.params().get(pos).rows();
            let idx: Vec<Option<usize>> = (0..rows.len())
                .map(|r| (slot_mask[r] && r < max).then_some(r))
                .collect();
            let p = tape.gather_rows(pos, &idx);
            aspects = tape.add(aspects, p);
        }
        if let (Some(buckets), Some(times), Some(now)) = (enc.time_buckets, &seq.timestamps, seq.reference_time) {
            let idx: Vec<Option<usize>> = times
                .iter()
                .zip(&slot_mask)
                .map(|(&t, &m)| m.then(|| time_bucket(now - t)))
                .collect();
            let b = tape.gather_rows(buckets, &idx);
            aspects = tape.add(aspects, b);
        }
    }

    let mut h = tape.concat_rows(&[anchor, aspects]);
    let mut mask = alloc::vec![true];
    mask.extend_from_slice(&slot_mask);
    let d = tape.value(h).cols();
    let head_dim = d / enc.heads;
    let mut attention = Vec::new();

    for (l, layer) in enc.layers.iter().enumerate() {
        // Only the anchor row is read after the last layer.
        let last = l + 1 == enc.layers.len();
        let gain = tape.param(layer.att_norm_gain);
        let bias = tape.param(layer.att_norm_bias);
        let x = tape.layer_norm(h, gain, bias);
        let w = tape.param(layer.att_w);
        let w_target = tape.slice_rows(w, 0, d);
        let w_source = tape.slice_rows(w, d, d);
        let queries = if last { tape.slice_rows(x, 0, 1) } else { x };
        if last {
            h = tape.slice_rows(h, 0, 1);
        }
        let target = tape.matmul(queries, w_target);
        let source = tape.matmul(x, w_source);
        let att = tape.param(layer.att_vec);
        let mut heads = Vec::with_capacity(enc.heads);
        for hd in 0..enc.heads {
            let t = tape.slice_cols(target, hd * head_dim, head_dim);
            let s = tape.slice_cols(source, hd * head_dim, head_dim);
            let a = tape.slice_cols(att, hd * head_dim, head_dim);
            let scores = tape.gatv2_scores(t, s, a, LEAKY_SLOPE);
            let weights = tape.masked_softmax(scores, &mask);
            attention.push(weights);
            heads.push(tape.matmul(weights, s));
        }
        let merged = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
        let out_w = tape.param(layer.out_w);
        let out_b = tape.param(layer.out_b);
        let attended = tape.affine(merged, out_w, out_b);
        h = tape.add(h, attended);

        let gain = tape.param(layer.ff_norm_gain);
        let bias = tape.param(layer.ff_norm_bias);
        let x = tape.layer_norm(h, gain, bias);
        let w1 = tape.param(layer.ff_w1);
        let b1 = tape.param(layer.ff_b1);
        let hidden = tape.affine(x, w1, b1);
        let hidden = tape.relu(hidden);
        let w2 = tape.param(layer.ff_w2);
        let b2 = tape.param(layer.ff_b2);
        let ff = tape.affine(hidden, w2, b2);
        h = tape.add(h, ff);
    }

    let gain = tape.param(enc.final_gain);
    let bias = tape.param(enc.final_bias);
    let h = tape.layer_norm(h, gain, bias);
    EncodeTrace {
        output: h,
        attention,
    }
}

/// Interest vector of `seq` under the current parameters.
pub fn encode_sequence(store: &ParamStore, enc: &EncoderParams, tables: &EmbeddingTables, seq: &InterestSequence) -> Vec<f64> {
    let mut tape = Tape::new(store);
    let out = encode_on_tape(&mut tape, enc, tables, seq);
    tape.value(out).data().to_vec()
}

/// Attention weights of every layer and head, in layer-major order.
pub fn attention_weights(store: &ParamStore, enc: &EncoderParams, tables: &EmbeddingTables, seq: &InterestSequence) -> Vec<Matrix> {
    let mut tape = Tape::new(store);
    let trace = encode_traced(&mut tape, enc, tables, seq);
    trace.attention.iter().map(|&w| tape.value(w).clone()).collect()
}

/// How long- and short-term interests are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// `g ⊙ e_l' + (1 − g) ⊙ e_s' + e_l'`
    #[default]
    Gated,
    /// `(e_l' + e_s') / 2`
    Average,
    LongOnly,
    ShortOnly,
}

/// Projections, gate and preference MLP of one side (users or items).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w_long: ParamId,
    pub w_short: ParamId,
    /// `2d × d`
    pub w_gate: ParamId,
    pub b_gate: ParamId,
    /// Preference MLP weight `W₃`.
    pub w_pref: ParamId,
    pub b_pref: ParamId,
}

impl GateParams {
    pub fn init(store: &mut ParamStore, rng: &mut Rng, prefix: &str, d: usize) -> Self {
        let bound = 1.0 / libm::sqrt(d as f64);
        GateParams {
            w_long: store.add(format!("{prefix}.w_long"), uniform_matrix(rng, d, d, bound)),
            w_short: store.add(format!("{prefix}.w_short"), uniform_matrix(rng, d, d, bound)),
            w_gate: store.add(
                format!("{prefix}.w_gate"),
                uniform_matrix(rng, 2 * d, d, 1.0 / libm::sqrt(2.0 * d as f64)),
            ),
            b_gate: store.add(format!("{prefix}.b_gate"), Matrix::zeros(1, d)),
            w_pref: store.add(format!("{prefix}.w_pref"), uniform_matrix(rng, d, d, bound)),
            b_pref: store.add(format!("{prefix}.b_pref"), Matrix::zeros(1, d)),
        }
    }

    pub fn param_ids(&self) -> [ParamId; 6] {
        [self.w_long, self.w_short, self.w_gate, self.b_gate, self.w_pref, self.b_pref]
    }
}

/// Fused interest `e` from the encoder outputs `ê_l`, `ê_s` (`1 × d` each).
pub fn fuse_on_tape(tape: &mut Tape<'_>, gate: &GateParams, long: Var, short: Var, mode: FusionMode) -> Var {
    match mode {
        FusionMode::Gated => {
            let wl = tape.param(gate.w_long);
            let ws = tape.param(gate.w_short);
            let l = tape.matmul(long, wl);
            let s = tape.matmul(short, ws);
            let both = tape.concat_cols(&[l, s]);
            let wg = tape.param(gate.w_gate);
            let bg = tape.param(gate.b_gate);
            let pre = tape.affine(both, wg, bg);
            let g = tape.sigmoid(pre);
            let neg = tape.scale(g, -1.0);
            let one_minus = tape.add_scalar(neg, 1.0);
            let gl = tape.mul(g, l);
            let gs = tape.mul(one_minus, s);
            let mixed = tape.add(gl, gs);
            tape.add(mixed, l)
        }
        FusionMode::Average => {
            let wl = tape.param(gate.w_long);
            let ws = tape.param(gate.w_short);
            let l = tape.matmul(long, wl);
            let s = tape.matmul(short, ws);
            let sum = tape.add(l, s);
            tape.scale(sum, 0.5)
        }
        FusionMode::LongOnly => {
            let wl = tape.param(gate.w_long);
            tape.matmul(long, wl)
        }
        FusionMode::ShortOnly => {
            let ws = tape.param(gate.w_short);
            tape.matmul(short, ws)
        }
    }
}

/// `ReLU(y·W₃ + b) ⊕ e`, a `1 × 2d` row.
pub fn final_representation_on_tape(tape: &mut Tape<'_>, gate: &GateParams, pref: Var, fused: Var) -> Var {
    let w = tape.param(gate.w_pref);
    let b = tape.param(gate.b_pref);
    let z = tape.affine(pref, w, b);
    let z = tape.relu(z);
    tape.concat_cols(&[z, fused])
}

/// Gated fusion on plain vectors.
pub fn gated_fusion(store: &ParamStore, gate: &GateParams, long: &[f64], short: &[f64]) -> Vec<f64> {
    let mut tape = Tape::new(store);
    let l = tape.constant(Matrix::row_vector(long.to_vec()));
    let s = tape.constant(Matrix::row_vector(short.to_vec()));
    let out = fuse_on_tape(&mut tape, gate, l, s, FusionMode::Gated);
    tape.value(out).data().to_vec()
}

/// The gate vector `g = σ(W_g·[e_l' ‖ e_s'] + b_g)` on plain vectors.
pub fn gate_values(store: &ParamStore, gate: &GateParams, long: &[f64], short: &[f64]) -> Vec<f64> {
    let mut tape = Tape::new(store);
    let l = tape.constant(Matrix::row_vector(long.to_vec()));
    let s = tape.constant(Matrix::row_vector(short.to_vec()));
    let wl = tape.param(gate.w_long);
    let ws = tape.param(gate.w_short);
    let l = tape.matmul(l, wl);
    let s = tape.matmul(s, ws);
    let both = tape.concat_cols(&[l, s]);
    let wg = tape.param(gate.w_gate);
    let bg = tape.param(gate.b_gate);
    let pre = tape.affine(both, wg, bg);
    let g = tape.sigmoid(pre);
    tape.value(g).data().to_vec()
}

pub fn final_representation(store: &ParamStore, gate: &GateParams, pref: &[f64], fused: &[f64]) -> Vec<f64> {
    let mut tape = Tape::new(store);
    let y = tape.constant(Matrix::row_vector(pref.to_vec()));
    let e = tape.constant(Matrix::row_vector(fused.to_vec()));
    let out = final_representation_on_tape(&mut tape, gate, y, e);
    tape.value(out).data().to_vec()
}
