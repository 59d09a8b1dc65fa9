//! Review records and rule-based aspect–opinion extraction over dependency
//! triples.
//!
//! Three patterns fire:
//!
//! * `amod(noun, adj)`: the modified noun is the aspect, the adjective the opinion.
//! * `dobj(verb, noun)`: the object is the aspect, the verb the opinion.
//! * `nsubj(H, noun)` + `acomp(H, adj)` with the same head `H`: the subject is
//!   the aspect, the complement the opinion.
//!
//! Everything else is ignored. Aspect nouns are lowercased and passed through a
//! small plural-stripping table so "cables" and "cable" merge.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Amod,
    Dobj,
    Nsubj,
    Acomp,
    #[serde(other)]
    Other,
}

impl Relation {
    pub fn parse(label: &str) -> Relation {
        match label.to_ascii_lowercase().as_str() {
            "amod" => Relation::Amod,
            "dobj" | "obj" => Relation::Dobj,
            "nsubj" => Relation::Nsubj,
            "acomp" => Relation::Acomp,
            _ => Relation::Other,
        }
    }
}

/// A dependency edge `relation(head, dependent)`. Serialized as a
/// `[relation, head, dependent]` array.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(Relation, String, String)", into = "(Relation, String, String)")]
pub struct DependencyTriple {
    pub relation: Relation,
    pub head: String,
    pub dependent: String,
}

impl DependencyTriple {
    pub fn new(relation: Relation, head: &str, dependent: &str) -> Self {
        DependencyTriple {
            relation,
            head: head.to_lowercase(),
            dependent: dependent.to_lowercase(),
        }
    }
}

impl From<(Relation, String, String)> for DependencyTriple {
    fn from((relation, head, dependent): (Relation, String, String)) -> Self {
        DependencyTriple::new(relation, &head, &dependent)
    }
}

impl From<DependencyTriple> for (Relation, String, String) {
    fn from(t: DependencyTriple) -> Self {
        (t.relation, t.head, t.dependent)
    }
}

/// One user–item interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawReview {
    #[serde(rename = "user")]
    pub user_id: String,
    #[serde(rename = "item")]
    pub item_id: String,
    pub rating: f64,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triples: Option<Vec<DependencyTriple>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReviewError {
    RatingOutOfRange(f64),
    NegativeTimestamp(i64),
    NoContent,
    EmptyId,
}

impl fmt::Display for ReviewError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReviewError::RatingOutOfRange(r) => write!(f, "rating {r} outside [1, 5]"),
            ReviewError::NegativeTimestamp(t) => write!(f, "negative timestamp {t}"),
            ReviewError::NoContent => write!(f, "review has neither text nor triples"),
            ReviewError::EmptyId => write!(f, "empty user or item id"),
        }
    }
}

impl RawReview {
    pub fn validate(&self) -> Result<(), ReviewError> {
        if !(1.0..=5.0).contains(&self.rating) {
            return Err(ReviewError::RatingOutOfRange(self.rating));
        }
        if self.timestamp < 0 {
            return Err(ReviewError::NegativeTimestamp(self.timestamp));
        }
        if self.text.is_none() && self.triples.is_none() {
            return Err(ReviewError::NoContent);
        }
        if self.user_id.is_empty() || self.item_id.is_empty() {
            return Err(ReviewError::EmptyId);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Amod,
    Dobj,
    NsubjAcomp,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AspectMention {
    pub review_index: usize,
    pub aspect: String,
    pub opinion: String,
    pub rule: Rule,
}

/// Singular form of a lowercase noun via a fixed suffix table.
pub fn lemmatize_noun(token: &str) -> String {
    let t = token.to_lowercase();
    let n = t.len();
    if n <= 3 || !t.is_ascii() {
        return t;
    }
    if let Some(stem) = t.strip_suffix("ies") {
        if stem.len() >= 2 {
            return alloc::format!("{stem}y");
        }
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if t.ends_with(suffix) {
            return t[..n - 2].to_string();
        }
    }
    for keep in ["ss", "us", "is", "ous"] {
        if t.ends_with(keep) {
            return t;
        }
    }
    if let Some(stem) = t.strip_suffix('s') {
        return stem.to_string();
    }
    t
}

/// Per-triple outcome of [`extract_with_usage`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub mentions: Vec<AspectMention>,
    /// `matched[k]` is true when triple `k` took part in at least one rule.
    pub matched: Vec<bool>,
}

/// Aspect–opinion mentions of one review, deduplicated by
/// `(aspect, opinion, rule)` and sorted, so the result does not depend on
/// triple order.
pub fn extract_aspect_mentions(triples: &[DependencyTriple], review_index: usize) -> Vec<AspectMention> {
    extract_with_usage(triples, review_index).mentions
}

pub fn extract_with_usage(triples: &[DependencyTriple], review_index: usize) -> Extraction {
    let mut found: BTreeSet<(Rule, String, String)> = BTreeSet::new();
    let mut matched = alloc::vec![false; triples.len()];

    for (k, t) in triples.iter().enumerate() {
        if t.head.is_empty() || t.dependent.is_empty() {
            continue;
        }
        match t.relation {
            Relation::Amod => {
                found.insert((Rule::Amod, lemmatize_noun(&t.head), t.dependent.clone()));
                matched[k] = true;
            }
            Relation::Dobj => {
                found.insert((Rule::Dobj, lemmatize_noun(&t.dependent), t.head.clone()));
                matched[k] = true;
            }
            _ => {}
        }
    }

    for (s, subj) in triples.iter().enumerate() {
        if subj.relation != Relation::Nsubj || subj.dependent.is_empty() {
            continue;
        }
        for (c, comp) in triples.iter().enumerate() {
            if comp.relation == Relation::Acomp && comp.head == subj.head && !comp.dependent.is_empty() {
                found.insert((
                    Rule::NsubjAcomp,
                    lemmatize_noun(&subj.dependent),
                    comp.dependent.clone(),
                ));
                matched[s] = true;
                matched[c] = true;
            }
        }
    }

    let mut mentions: Vec<AspectMention> = found
        .into_iter()
        .map(|(rule, aspect, opinion)| AspectMention {
            review_index,
            aspect,
            opinion,
            rule,
        })
        .collect();
    mentions.sort_by(|a, b| {
        (&a.aspect, &a.opinion, a.rule).cmp(&(&b.aspect, &b.opinion, b.rule))
    });
    Extraction { mentions, matched }
}

/// Dense aspect ids, most frequent first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectVocabulary {
    aspects: Vec<String>,
    frequencies: Vec<u64>,
    min_freq: u64,
    #[serde(skip)]
    index: BTreeMap<String, u32>,
}

impl AspectVocabulary {
    /// Keeps aspects mentioned at least `min_freq` times; ids follow
    /// descending frequency with lexicographic tie-break.
    pub fn build<'a>(mentions: impl IntoIterator<Item = &'a AspectMention>, min_freq: u64) -> Self {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for m in mentions {
            *counts.entry(m.aspect.as_str()).or_default() += 1;
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_freq.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_parts(
            kept.iter().map(|(a, _)| a.to_string()).collect(),
            kept.iter().map(|(_, c)| *c).collect(),
            min_freq,
        )
    }

    pub fn from_parts(aspects: Vec<String>, frequencies: Vec<u64>, min_freq: u64) -> Self {
        let index = aspects
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i as u32))
            .collect();
        AspectVocabulary {
            aspects,
            frequencies,
            min_freq,
            index,
        }
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .aspects
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.aspects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aspects.is_empty()
    }

    pub fn id(&self, aspect: &str) -> Option<u32> {
        self.index.get(aspect).copied()
    }

    pub fn aspect(&self, id: u32) -> Option<&str> {
        self.aspects.get(id as usize).map(String::as_str)
    }

    pub fn frequency(&self, id: u32) -> Option<u64> {
        self.frequencies.get(id as usize).copied()
    }

    pub fn min_freq(&self) -> u64 {
        self.min_freq
    }

    pub fn aspects(&self) -> &[String] {
        &self.aspects
    }
}
