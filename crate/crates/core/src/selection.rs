//! Choosing which aspects feed the interest encoders.
//!
//! Long-term sequences keep the `K` neighbour aspects with the highest
//! relevance `σ(exp(w / 100)) + (W₁·y)·e_a / √d`. Short-term sequences keep the
//! `N` most recent aspect interactions strictly before the current time and
//! inside a `T`-day window.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::SECONDS_PER_DAY;
use crate::error::{Error, Result};
use crate::graph::{AspectGraph, AspectId, NodeId};
use crate::tensor::{dot, sigmoid, Matrix};

/// Divisor inside the exponential of the frequency score.
pub const EDGE_WEIGHT_SCALE: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Long,
    Short,
}

/// `[anchor, a_1, …, a_M]` with a validity mask over the aspect slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterestSequence {
    pub anchor: NodeId,
    pub aspect_ids: Vec<AspectId>,
    pub mask: Vec<bool>,
    /// Per-slot interaction time (short-term only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Vec<i64>>,
    /// The time of the interaction being scored (short-term only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_time: Option<i64>,
    pub horizon: Horizon,
}

impl InterestSequence {
    /// Anchor plus `slots` masked aspect positions.
    pub fn empty(anchor: NodeId, slots: usize, horizon: Horizon) -> Self {
        InterestSequence {
            anchor,
            aspect_ids: alloc::vec![0; slots],
            mask: alloc::vec![false; slots],
            timestamps: None,
            reference_time: None,
            horizon,
        }
    }

    /// Number of token positions including the anchor.
    pub fn len(&self) -> usize {
        1 + self.aspect_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Aspect ids in valid slots, in sequence order.
    pub fn valid_aspects(&self) -> Vec<AspectId> {
        self.aspect_ids
            .iter()
            .zip(&self.mask)
            .filter(|(_, &ok)| ok)
            .map(|(&a, _)| a)
            .collect()
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// `(aspect, timestamp)` interactions of one user or item.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionHistory {
    pub entries: Vec<(AspectId, i64)>,
}

impl InteractionHistory {
    pub fn new(entries: Vec<(AspectId, i64)>) -> Self {
        InteractionHistory { entries }
    }

    pub fn from_graph(graph: &AspectGraph, node: NodeId) -> Result<Self> {
        Ok(InteractionHistory {
            entries: graph.interactions(node)?,
        })
    }
}

/// Frequency score `σ(exp(w / 100))`, in `(0.5, 1)` for any `w ≥ 0`.
pub fn edge_weight_score(w: u32) -> f64 {
    sigmoid(libm::exp(f64::from(w) / EDGE_WEIGHT_SCALE))
}

/// Rating-preference score `(W₁·y)·e_a / √d`.
pub fn rating_preference_score(y: &[f64], e_a: &[f64], w1: &Matrix) -> Result<f64> {
    let q = project_preference(y, w1)?;
    if e_a.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "aspect embedding",
            expected: q.len(),
            found: e_a.len(),
        });
    }
    Ok(dot(&q, e_a) / libm::sqrt(q.len() as f64))
}

/// `W₁·y` for a square `W₁`.
pub fn project_preference(y: &[f64], w1: &Matrix) -> Result<Vec<f64>> {
    let d = y.len();
    if w1.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            what: "preference projection",
            expected: d,
            found: if w1.rows() != d { w1.rows() } else { w1.cols() },
        });
    }
    Ok((0..d).map(|i| dot(w1.row(i), y)).collect())
}

/// Inputs of the rating-preference term for one side (users or items).
#[derive(Clone, Copy, Debug)]
pub struct PreferenceScorer<'a> {
    /// Rating-preference embeddings `y`, one row per node.
    pub preferences: &'a Matrix,
    /// Projection `W₁`.
    pub projection: &'a Matrix,
    /// Aspect embeddings `e_a`, one row per aspect.
    pub aspects: &'a Matrix,
}

impl PreferenceScorer<'_> {
    fn scores(&self, node: usize, candidates: &[(AspectId, u32)]) -> Result<Vec<(AspectId, f64)>> {
        let d = self.aspects.cols();
        let zero;
        let y = if node < self.preferences.rows() {
            self.preferences.row(node)
        } else {
            zero = alloc::vec![0.0; d];
            &zero
        };
        let q = project_preference(y, self.projection)?;
        let scale = libm::sqrt(d as f64);
        Ok(candidates
            .iter()
            .map(|&(a, w)| {
                let pref = dot(&q, self.aspects.row(a as usize)) / scale;
                (a, edge_weight_score(w) + pref)
            })
            .collect())
    }
}

/// Important-K selection: the anchor followed by the `k` highest-relevance
/// aspects (descending score, ties by ascending id), padded with masked slots
/// up to `k`. With `full_vocabulary` every aspect is ranked, using `w = 0`
/// for aspects the node never mentioned.
pub fn important_k(
    graph: &AspectGraph,
    scorer: &PreferenceScorer<'_>,
    node: NodeId,
    k: usize,
    full_vocabulary: bool,
) -> Result<InterestSequence> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let candidates: Vec<(AspectId, u32)> = if full_vocabulary {
        (0..scorer.aspects.rows() as AspectId)
            .map(|a| (a, graph.edge_weight(node, a)))
            .collect()
    } else {
        graph.weighted_neighbors(node)?
    };
    let mut scored = scorer.scores(node.index as usize, &candidates)?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);

    let mut seq = InterestSequence::empty(node, k, Horizon::Long);
    for (slot, (a, _)) in scored.into_iter().enumerate() {
        seq.aspect_ids[slot] = a;
        seq.mask[slot] = true;
    }
    Ok(seq)
}

/// Recent-N selection: interactions with `t < t_curr` and
/// `t_curr − t ≤ window_days · 86400`, newest first (ties by ascending id),
/// truncated to `n` and padded with masked slots up to `n`. Repeated aspects
/// stay as separate tokens.
pub fn recent_n(
    history: &InteractionHistory,
    anchor: NodeId,
    t_curr: i64,
    n: usize,
    window_days: f64,
) -> Result<InterestSequence> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if window_days.is_nan() || window_days <= 0.0 {
        return Err(Error::InvalidConfig("T must be positive".into()));
    }
    let window = window_days * SECONDS_PER_DAY as f64;
    let mut kept: Vec<(AspectId, i64)> = history
        .entries
        .iter()
        .copied()
        .filter(|&(_, t)| t < t_curr && ((t_curr - t) as f64) <= window)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    kept.truncate(n);

    let mut seq = InterestSequence::empty(anchor, n, Horizon::Short);
    let mut times = alloc::vec![t_curr; n];
    for (slot, (a, t)) in kept.into_iter().enumerate() {
        seq.aspect_ids[slot] = a;
        seq.mask[slot] = true;
        times[slot] = t;
    }
    seq.timestamps = Some(times);
    seq.reference_time = Some(t_curr);
    Ok(seq)
}
