//! The tripartite user–item–aspect graph.
//!
//! Users and items connect to aspects with an integer weight (number of
//! reviews mentioning the aspect) and the sorted timestamps of those reviews.
//! User–item edges carry every `(rating, timestamp)` observed for the pair.
//! There are no user–user, item–item or aspect–aspect edges.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{AspectMention, AspectVocabulary, RawReview};
use crate::error::{Error, Result};

pub type AspectId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    User,
    Item,
    Aspect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: u32,
}

impl NodeId {
    pub fn user(index: usize) -> Self {
        NodeId {
            kind: NodeKind::User,
            index: index as u32,
        }
    }

    pub fn item(index: usize) -> Self {
        NodeId {
            kind: NodeKind::Item,
            index: index as u32,
        }
    }

    pub fn aspect(index: AspectId) -> Self {
        NodeId {
            kind: NodeKind::Aspect,
            index,
        }
    }
}

/// Dense indices for user and item string ids, in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityIndex {
    users: Vec<String>,
    items: Vec<String>,
    #[serde(skip)]
    user_lookup: BTreeMap<String, u32>,
    #[serde(skip)]
    item_lookup: BTreeMap<String, u32>,
}

impl EntityIndex {
    pub fn from_reviews<'a>(reviews: impl IntoIterator<Item = &'a RawReview>) -> Self {
        let mut index = EntityIndex::default();
        for r in reviews {
            index.insert_user(&r.user_id);
            index.insert_item(&r.item_id);
        }
        index
    }

    fn insert_user(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.user_lookup.get(id) {
            return i;
        }
        let i = self.users.len() as u32;
        self.users.push(id.into());
        self.user_lookup.insert(id.into(), i);
        i
    }

    fn insert_item(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.item_lookup.get(id) {
            return i;
        }
        let i = self.items.len() as u32;
        self.items.push(id.into());
        self.item_lookup.insert(id.into(), i);
        i
    }

    pub fn reindex(&mut self) {
        self.user_lookup = self.users.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
        self.item_lookup = self.items.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
    }

    pub fn user(&self, id: &str) -> Option<usize> {
        self.user_lookup.get(id).map(|&i| i as usize)
    }

    pub fn item(&self, id: &str) -> Option<usize> {
        self.item_lookup.get(id).map(|&i| i as usize)
    }

    pub fn user_name(&self, index: usize) -> &str {
        &self.users[index]
    }

    pub fn item_name(&self, index: usize) -> &str {
        &self.items[index]
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectEdge {
    pub weight: u32,
    /// Ascending review timestamps, one per contributing review.
    pub times: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AspectGraph {
    n_aspects: usize,
    user_aspects: Vec<BTreeMap<AspectId, AspectEdge>>,
    item_aspects: Vec<BTreeMap<AspectId, AspectEdge>>,
    ratings: BTreeMap<(u32, u32), Vec<RatingEvent>>,
}

impl AspectGraph {
    pub fn empty(n_users: usize, n_items: usize, n_aspects: usize) -> Self {
        AspectGraph {
            n_aspects,
            user_aspects: alloc::vec![BTreeMap::new(); n_users],
            item_aspects: alloc::vec![BTreeMap::new(); n_items],
            ratings: BTreeMap::new(),
        }
    }

    /// Builds the graph from `reviews`. Each review adds 1 to the weight of
    /// every distinct vocabulary aspect it mentions, on both its user and its
    /// item, and records its timestamp on those edges. Mentions whose aspect is
    /// not in `vocab` or whose review index is out of range are skipped.
    /// Reviews whose user or item is absent from `entities` are skipped.
    pub fn build(
        reviews: &[RawReview],
        mentions: &[AspectMention],
        vocab: &AspectVocabulary,
        entities: &EntityIndex,
    ) -> Self {
        let mut per_review: Vec<BTreeSet<AspectId>> = alloc::vec![BTreeSet::new(); reviews.len()];
        for m in mentions {
            if let (Some(set), Some(id)) = (per_review.get_mut(m.review_index), vocab.id(&m.aspect)) {
                set.insert(id);
            }
        }
        let mut graph = AspectGraph::empty(entities.n_users(), entities.n_items(), vocab.len());
        for (review, aspects) in reviews.iter().zip(&per_review) {
            let (Some(u), Some(i)) = (entities.user(&review.user_id), entities.item(&review.item_id)) else {
                continue;
            };
            for &a in aspects {
                Self::bump(&mut graph.user_aspects[u], a, review.timestamp);
                Self::bump(&mut graph.item_aspects[i], a, review.timestamp);
            }
            let events = graph.ratings.entry((u as u32, i as u32)).or_default();
            let pos = events.partition_point(|e| e.timestamp <= review.timestamp);
            events.insert(
                pos,
                RatingEvent {
                    rating: review.rating,
                    timestamp: review.timestamp,
                },
            );
        }
        graph
    }

    fn bump(edges: &mut BTreeMap<AspectId, AspectEdge>, aspect: AspectId, ts: i64) {
        let edge = edges.entry(aspect).or_default();
        edge.weight += 1;
        let pos = edge.times.partition_point(|&t| t <= ts);
        edge.times.insert(pos, ts);
    }

    pub fn n_users(&self) -> usize {
        self.user_aspects.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_aspects.len()
    }

    pub fn n_aspects(&self) -> usize {
        self.n_aspects
    }

    fn edges(&self, node: NodeId) -> Result<Option<&BTreeMap<AspectId, AspectEdge>>> {
        match node.kind {
            NodeKind::User => Ok(self.user_aspects.get(node.index as usize)),
            NodeKind::Item => Ok(self.item_aspects.get(node.index as usize)),
            NodeKind::Aspect => Err(Error::AspectNode),
        }
    }

    /// Interaction frequency `w`, zero when there is no edge.
    pub fn edge_weight(&self, node: NodeId, aspect: AspectId) -> u32 {
        self.edge(node, aspect).map_or(0, |e| e.weight)
    }

    pub fn edge(&self, node: NodeId, aspect: AspectId) -> Option<&AspectEdge> {
        self.edges(node).ok().flatten().and_then(|m| m.get(&aspect))
    }

    /// Aspects with `w ≥ 1` for a user or item, ascending. Unknown indices
    /// have no neighbours.
    pub fn neighbor_aspects(&self, node: NodeId) -> Result<Vec<AspectId>> {
        Ok(self
            .edges(node)?
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default())
    }

    /// All `(aspect, weight)` pairs of a node, ascending by aspect.
    pub fn weighted_neighbors(&self, node: NodeId) -> Result<Vec<(AspectId, u32)>> {
        Ok(self
            .edges(node)?
            .map(|m| m.iter().map(|(&a, e)| (a, e.weight)).collect())
            .unwrap_or_default())
    }

    /// Every `(aspect, timestamp)` of a node, ascending by aspect then time.
    pub fn interactions(&self, node: NodeId) -> Result<Vec<(AspectId, i64)>> {
        Ok(self
            .edges(node)?
            .map(|m| {
                m.iter()
                    .flat_map(|(&a, e)| e.times.iter().map(move |&t| (a, t)))
                    .collect()
            })
            .unwrap_or_default())
    }

    pub fn ratings(&self, user: usize, item: usize) -> &[RatingEvent] {
        self.ratings
            .get(&(user as u32, item as u32))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn rating_edges(&self) -> impl Iterator<Item = (usize, usize, &[RatingEvent])> {
        self.ratings
            .iter()
            .map(|(&(u, i), v)| (u as usize, i as usize, v.as_slice()))
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        let mut edges = Vec::new();
        for (kind, table) in [(NodeKind::User, &self.user_aspects), (NodeKind::Item, &self.item_aspects)] {
            for (index, m) in table.iter().enumerate() {
                for (&aspect, e) in m {
                    edges.push(SnapshotEdge {
                        node: NodeId {
                            kind,
                            index: index as u32,
                        },
                        aspect,
                        weight: e.weight,
                        times: e.times.clone(),
                    });
                }
            }
        }
        let ratings = self
            .ratings
            .iter()
            .map(|(&(user, item), events)| SnapshotRatings {
                user,
                item,
                events: events.clone(),
            })
            .collect();
        GraphSnapshot {
            version: GRAPH_SNAPSHOT_VERSION,
            n_users: self.n_users(),
            n_items: self.n_items(),
            n_aspects: self.n_aspects,
            edges,
            ratings,
        }
    }

    pub fn from_snapshot(s: &GraphSnapshot) -> Result<Self> {
        if s.version != GRAPH_SNAPSHOT_VERSION {
            return Err(Error::InvalidConfig(alloc::format!(
                "unsupported graph snapshot version {}",
                s.version
            )));
        }
        let mut g = AspectGraph::empty(s.n_users, s.n_items, s.n_aspects);
        for e in &s.edges {
            let table = match e.node.kind {
                NodeKind::User => &mut g.user_aspects,
                NodeKind::Item => &mut g.item_aspects,
                NodeKind::Aspect => return Err(Error::AspectNode),
            };
            let slot = table.get_mut(e.node.index as usize).ok_or(Error::DimensionMismatch {
                what: "snapshot node index",
                expected: s.n_users.max(s.n_items),
                found: e.node.index as usize,
            })?;
            if e.weight == 0 || e.times.len() != e.weight as usize || e.times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "snapshot edge {:?}/{} violates weight/timestamp invariants",
                    e.node,
                    e.aspect
                )));
            }
            slot.insert(
                e.aspect,
                AspectEdge {
                    weight: e.weight,
                    times: e.times.clone(),
                },
            );
        }
        for r in &s.ratings {
            g.ratings.insert((r.user, r.item), r.events.clone());
        }
        Ok(g)
    }
}

pub const GRAPH_SNAPSHOT_VERSION: u32 = 1;

/// Serializable form of [`AspectGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub version: u32,
    pub n_users: usize,
    pub n_items: usize,
    pub n_aspects: usize,
    pub edges: Vec<SnapshotEdge>,
    pub ratings: Vec<SnapshotRatings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEdge {
    pub node: NodeId,
    pub aspect: AspectId,
    pub weight: u32,
    pub times: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRatings {
    pub user: u32,
    pub item: u32,
    pub events: Vec<RatingEvent>,
}
