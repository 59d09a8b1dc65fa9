//! The full model: parameter layout, ablation wiring and the per-interaction
//! forward pass.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encoder::{
    encode_on_tape, final_representation_on_tape, fuse_on_tape, EmbeddingTables, EncoderParams, FusionMode,
    GateParams,
};
use crate::error::{Error, Result};
use crate::graph::{AspectGraph, AspectId, NodeId, NodeKind};
use crate::params::{uniform_matrix, ParamId, ParamStore};
use crate::predictor::{
    aggregate_on_tape, candidate_aspects, context_fusion_on_tape, feature_row, fm_on_tape, AggregationMode,
    AggregationParams, CandidateAspects, FmParams,
};
use crate::rng::SeedStreams;
use crate::selection::{important_k, recent_n, Horizon, InteractionHistory, InterestSequence, PreferenceScorer};

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding width `d`.
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    /// Long-term sequence length `K`.
    pub long_k: usize,
    /// Short-term sequence length `N`.
    pub short_n: usize,
    /// Short-term window `T`, in days.
    pub window_days: f64,
    pub lambda: f64,
    pub k_fm: usize,
    pub max_union: usize,
    /// Rank every vocabulary aspect for Important-K instead of only neighbours.
    pub full_vocabulary: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 64,
            layers: 2,
            heads: 2,
            long_k: 64,
            short_n: 20,
            window_days: 180.0,
            lambda: 1.0,
            k_fm: 8,
            max_union: 128,
            full_vocabulary: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.d == 0 {
            return bad("d must be at least 1");
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return bad("heads must divide d");
        }
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.long_k == 0 || self.short_n == 0 {
            return bad("K and N must be at least 1");
        }
        if self.window_days.is_nan() || self.window_days <= 0.0 {
            return bad("T must be positive");
        }
        if self.k_fm == 0 {
            return bad("k_fm must be at least 1");
        }
        if self.max_union == 0 {
            return bad("max_union must be at least 1");
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        Ok(())
    }

    /// FM feature width `d' = 5d`.
    pub fn feature_width(&self) -> usize {
        5 * self.d
    }
}

/// Model variants compared in the ablation study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    NoAspectAttention,
    NoFusion,
    NoShort,
    NoLong,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoAspectAttention,
        Variant::NoFusion,
        Variant::NoShort,
        Variant::NoLong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAspectAttention => "no_aspect_attention",
            Variant::NoFusion => "no_fusion",
            Variant::NoShort => "no_short",
            Variant::NoLong => "no_long",
        }
    }

    pub fn fusion(self) -> FusionMode {
        match self {
            Variant::NoFusion => FusionMode::Average,
            Variant::NoShort => FusionMode::LongOnly,
            Variant::NoLong => FusionMode::ShortOnly,
            _ => FusionMode::Gated,
        }
    }

    pub fn aggregation(self) -> AggregationMode {
        match self {
            Variant::NoAspectAttention => AggregationMode::Mean,
            _ => AggregationMode::Attention,
        }
    }

    pub fn uses_long(self) -> bool {
        self != Variant::NoLong
    }

    pub fn uses_short(self) -> bool {
        self != Variant::NoShort
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// One side (users or items) of the interest pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideParams {
    /// Rating-preference projection `W₁` used by Important-K.
    pub select_w1: ParamId,
    pub long: EncoderParams,
    pub short: EncoderParams,
    pub gate: GateParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub tables: EmbeddingTables,
    pub user: SideParams,
    pub item: SideParams,
    pub aggregation: AggregationParams,
    pub fm: FmParams,
}

impl ModelLayout {
    pub fn side(&self, kind: NodeKind) -> &SideParams {
        match kind {
            NodeKind::Item => &self.item,
            _ => &self.user,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsaModel {
    pub config: ModelConfig,
    pub variant: Variant,
    pub params: ParamStore,
    pub layout: ModelLayout,
}

impl LsaModel {
    /// Fresh parameters drawn from the `init` stream of `seed`. `global_mean`
    /// initialises the FM global bias.
    pub fn new(
        config: ModelConfig,
        variant: Variant,
        n_users: usize,
        n_items: usize,
        n_aspects: usize,
        global_mean: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = SeedStreams::new(seed).stream("init");
        let mut store = ParamStore::new();
        let d = config.d;
        let tables = EmbeddingTables::init(&mut store, &mut rng, n_users, n_items, n_aspects, d);
        let mut side = |name: &str, store: &mut ParamStore| SideParams {
            select_w1: store.add(
                alloc::format!("{name}.select.w1"),
                uniform_matrix(&mut rng, d, d, 1.0 / libm::sqrt(d as f64)),
            ),
            long: EncoderParams::init(
                store,
                &mut rng,
                &alloc::format!("{name}.long"),
                d,
                config.layers,
                config.heads,
                Horizon::Long,
                config.long_k,
            ),
            short: EncoderParams::init(
                store,
                &mut rng,
                &alloc::format!("{name}.short"),
                d,
                config.layers,
                config.heads,
                Horizon::Short,
                config.short_n,
            ),
            gate: GateParams::init(store, &mut rng, &alloc::format!("{name}.gate"), d),
        };
        let user = side("user", &mut store);
        let item = side("item", &mut store);
        let aggregation = AggregationParams::init(&mut store, &mut rng, d);
        let fm = FmParams::init(
            &mut store,
            &mut rng,
            n_users,
            n_items,
            config.feature_width(),
            config.k_fm,
            config.lambda,
            global_mean,
        );
        Ok(LsaModel {
            config,
            variant,
            params: store,
            layout: ModelLayout {
                tables,
                user,
                item,
                aggregation,
                fm,
            },
        })
    }

    /// Rebuilds a trained model from checkpoint bytes. Tensor names and
    /// shapes must match the layout implied by the arguments.
    pub fn from_checkpoint(
        config: ModelConfig,
        variant: Variant,
        n_users: usize,
        n_items: usize,
        n_aspects: usize,
        bytes: &[u8],
    ) -> Result<Self> {
        let mut model = LsaModel::new(config, variant, n_users, n_items, n_aspects, 0.0, 0)?;
        let stored = ParamStore::from_checkpoint_bytes(bytes)?;
        model.params.load_values_from(&stored)?;
        Ok(model)
    }

    /// Tensors that take part in this variant's forward pass or selection.
    pub fn used_parameters(&self) -> BTreeSet<ParamId> {
        let l = &self.layout;
        let v = self.variant;
        let mut used: BTreeSet<ParamId> = [
            l.tables.user,
            l.tables.item,
            l.tables.aspect,
            l.tables.user_pref,
            l.tables.item_pref,
        ]
        .into_iter()
        .collect();
        for side in [&l.user, &l.item] {
            if v.uses_long() {
                used.insert(side.select_w1);
                used.extend(side.long.param_ids());
                used.insert(side.gate.w_long);
            }
            if v.uses_short() {
                used.extend(side.short.param_ids());
                used.insert(side.gate.w_short);
            }
            if v.fusion() == FusionMode::Gated {
                used.insert(side.gate.w_gate);
                used.insert(side.gate.b_gate);
            }
            used.insert(side.gate.w_pref);
            used.insert(side.gate.b_pref);
        }
        used.insert(l.aggregation.w_fuse);
        used.insert(l.aggregation.b_fuse);
        used.insert(l.aggregation.w_value);
        if v.aggregation() == AggregationMode::Attention {
            used.insert(l.aggregation.w_query);
            used.insert(l.aggregation.w_key);
        }
        used.extend(l.fm.param_ids());
        used
    }

    /// Tables with one row per user or item.
    pub fn entity_parameters(&self) -> [ParamId; 6] {
        let l = &self.layout;
        [
            l.tables.user,
            l.tables.item,
            l.tables.user_pref,
            l.tables.item_pref,
            l.fm.user_bias,
            l.fm.item_bias,
        ]
    }

    /// Scalar count of [`used_parameters`](Self::used_parameters).
    pub fn used_scalar_count(&self) -> usize {
        self.used_parameters()
            .into_iter()
            .map(|id| self.params.get(id).data().len())
            .sum()
    }

    fn scorer(&self, kind: NodeKind) -> PreferenceScorer<'_> {
        let t = &self.layout.tables;
        PreferenceScorer {
            preferences: self.params.get(t.pref_table(kind)),
            projection: self.params.get(self.layout.side(kind).select_w1),
            aspects: self.params.get(t.aspect),
        }
    }

    /// Important-K sequences for every user and item under the current
    /// parameters.
    pub fn long_term_sequences(&self, ctx: &ModelContext) -> Result<LongTermSequences> {
        let k = self.config.long_k;
        let full = self.config.full_vocabulary;
        let users = (0..ctx.graph.n_users())
            .map(|u| important_k(&ctx.graph, &self.scorer(NodeKind::User), NodeId::user(u), k, full))
            .collect::<Result<Vec<_>>>()?;
        let items = (0..ctx.graph.n_items())
            .map(|i| important_k(&ctx.graph, &self.scorer(NodeKind::Item), NodeId::item(i), k, full))
            .collect::<Result<Vec<_>>>()?;
        Ok(LongTermSequences { users, items })
    }

    /// Parameter-independent inputs of one interaction.
    pub fn prepare(&self, ctx: &ModelContext, x: &Interaction) -> Result<PreparedExample> {
        ctx.prepare(x, self.config.short_n, self.config.window_days, self.config.max_union)
    }

    /// Records the forward pass of one interaction and returns the `1 × 1`
    /// predicted rating.
    pub fn forward(&self, tape: &mut Tape<'_>, long: &LongTermSequences, ex: &PreparedExample) -> Var {
        let p = self.side_representation(tape, long, ex, NodeKind::User);
        let q = self.side_representation(tape, long, ex, NodeKind::Item);
        let l = &self.layout;
        let context = context_fusion_on_tape(tape, &l.aggregation, p, q);
        let h_a = aggregate_on_tape(
            tape,
            &l.aggregation,
            l.tables.aspect,
            context,
            &ex.candidates.aspects,
            self.variant.aggregation(),
        );
        let x = feature_row(tape, p, q, h_a, l.fm.lambda);
        fm_on_tape(tape, &l.fm, x, ex.user_index(self), ex.item_index(self))
    }

    fn side_representation(
        &self,
        tape: &mut Tape<'_>,
        long: &LongTermSequences,
        ex: &PreparedExample,
        kind: NodeKind,
    ) -> Var {
        let side = self.layout.side(kind);
        let tables = &self.layout.tables;
        let (index, short_seq) = match kind {
            NodeKind::Item => (ex.item, &ex.item_short),
            _ => (ex.user, &ex.user_short),
        };
        let d = self.config.d;
        let long_vec = if self.variant.uses_long() {
            let seq = long.get(kind, index).cloned().unwrap_or_else(|| {
                InterestSequence::empty(short_seq.anchor, self.config.long_k, Horizon::Long)
            });
            encode_on_tape(tape, &side.long, tables, &seq)
        } else {
            tape.constant(crate::tensor::Matrix::zeros(1, d))
        };
        let short_vec = if self.variant.uses_short() {
            encode_on_tape(tape, &side.short, tables, short_seq)
        } else {
            tape.constant(crate::tensor::Matrix::zeros(1, d))
        };
        let fused = fuse_on_tape(tape, &side.gate, long_vec, short_vec, self.variant.fusion());
        let n_rows = self.params.get(tables.pref_table(kind)).rows();
        let pref = tape.gather_rows(tables.pref_table(kind), &[(index < n_rows).then_some(index)]);
        final_representation_on_tape(tape, &side.gate, pref, fused)
    }

    /// Unclamped predicted rating.
    pub fn predict(&self, long: &LongTermSequences, ex: &PreparedExample) -> f64 {
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, long, ex);
        tape.value(out).item()
    }

    pub fn n_users(&self) -> usize {
        self.params.get(self.layout.tables.user).rows()
    }

    pub fn n_items(&self) -> usize {
        self.params.get(self.layout.tables.item).rows()
    }
}

/// Important-K sequences, indexed by user and item.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LongTermSequences {
    pub users: Vec<InterestSequence>,
    pub items: Vec<InterestSequence>,
}

impl LongTermSequences {
    pub fn get(&self, kind: NodeKind, index: usize) -> Option<&InterestSequence> {
        match kind {
            NodeKind::Item => self.items.get(index),
            _ => self.users.get(index),
        }
    }
}

/// A rated user–item interaction with dense indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
}

/// Everything about an interaction that does not depend on parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedExample {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
    pub user_short: InterestSequence,
    pub item_short: InterestSequence,
    pub candidates: CandidateAspects,
}

impl PreparedExample {
    fn user_index(&self, model: &LsaModel) -> Option<usize> {
        (self.user < model.n_users()).then_some(self.user)
    }

    fn item_index(&self, model: &LsaModel) -> Option<usize> {
        (self.item < model.n_items()).then_some(self.item)
    }
}

/// The graph plus per-node lookups derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelContext {
    pub graph: AspectGraph,
    user_histories: Vec<InteractionHistory>,
    item_histories: Vec<InteractionHistory>,
    user_neighbors: Vec<Vec<AspectId>>,
    item_neighbors: Vec<Vec<AspectId>>,
}

impl ModelContext {
    pub fn new(graph: AspectGraph) -> Self {
        let hist = |node: NodeId| InteractionHistory::from_graph(&graph, node).unwrap_or_default();
        let neigh = |node: NodeId| graph.neighbor_aspects(node).unwrap_or_default();
        let user_histories = (0..graph.n_users()).map(|u| hist(NodeId::user(u))).collect();
        let item_histories = (0..graph.n_items()).map(|i| hist(NodeId::item(i))).collect();
        let user_neighbors = (0..graph.n_users()).map(|u| neigh(NodeId::user(u))).collect();
        let item_neighbors = (0..graph.n_items()).map(|i| neigh(NodeId::item(i))).collect();
        ModelContext {
            graph,
            user_histories,
            item_histories,
            user_neighbors,
            item_neighbors,
        }
    }

    pub fn user_history(&self, user: usize) -> Option<&InteractionHistory> {
        self.user_histories.get(user)
    }

    pub fn item_history(&self, item: usize) -> Option<&InteractionHistory> {
        self.item_histories.get(item)
    }

    pub fn prepare(&self, x: &Interaction, n: usize, window_days: f64, max_union: usize) -> Result<PreparedExample> {
        let empty = InteractionHistory::default();
        let user_short = recent_n(
            self.user_histories.get(x.user).unwrap_or(&empty),
            NodeId::user(x.user),
            x.timestamp,
            n,
            window_days,
        )?;
        let item_short = recent_n(
            self.item_histories.get(x.item).unwrap_or(&empty),
            NodeId::item(x.item),
            x.timestamp,
            n,
            window_days,
        )?;
        let none: &[AspectId] = &[];
        let candidates = candidate_aspects(
            self.user_neighbors.get(x.user).map_or(none, Vec::as_slice),
            self.item_neighbors.get(x.item).map_or(none, Vec::as_slice),
            max_union,
        );
        Ok(PreparedExample {
            user: x.user,
            item: x.item,
            rating: x.rating,
            timestamp: x.timestamp,
            user_short,
            item_short,
            candidates,
        })
    }
}

/// Short identifier used in reports.
pub fn describe(model: &LsaModel) -> String {
    alloc::format!(
        "{} d={} L={} H={} K={} N={} T={}",
        model.variant,
        model.config.d,
        model.config.layers,
        model.config.heads,
        model.config.long_k,
        model.config.short_n,
        model.config.window_days
    )
}
