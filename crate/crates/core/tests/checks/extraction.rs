use std::collections::BTreeSet;

use lsa_core::corpus::{extract_aspect_mentions, DependencyTriple, Relation, Rule};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct Fixture {
    pub name: String,
    pub triples: Vec<(String, String, String)>,
    pub gold: Vec<(String, String, String)>,
}

pub fn fixtures() -> Vec<Fixture> {
    serde_json::from_str(include_str!("../fixtures/extraction.json")).expect("fixture file parses")
}

pub fn rule_name(r: Rule) -> &'static str {
    match r {
        Rule::Amod => "amod",
        Rule::Dobj => "dobj",
        Rule::NsubjAcomp => "nsubj_acomp",
    }
}

pub fn triples_of(f: &Fixture) -> Vec<DependencyTriple> {
    f.triples
        .iter()
        .map(|(rel, h, d)| DependencyTriple::new(Relation::parse(rel), h, d))
        .collect()
}

/// Every fixture's extracted (aspect, opinion, rule) set equals its gold set.
pub fn gold_fixtures() -> Result<String, String> {
    let all = fixtures();
    let mut rules = BTreeSet::new();
    for f in &all {
        let got: BTreeSet<(String, String, String)> = extract_aspect_mentions(&triples_of(f), 0)
            .into_iter()
            .map(|m| (m.aspect, m.opinion, rule_name(m.rule).to_string()))
            .collect();
        let gold: BTreeSet<_> = f.gold.iter().cloned().collect();
        if got != gold {
            return Err(format!("fixture `{}`: got {got:?}, want {gold:?}", f.name));
        }
        rules.extend(gold.into_iter().map(|g| g.2));
    }
    if rules.len() != 3 {
        return Err(format!("fixtures exercise only {rules:?}"));
    }
    Ok(format!("{} fixtures", all.len()))
}
