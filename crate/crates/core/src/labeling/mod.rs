//! Structural entity labels mined from frequent relation subsets.
//!
//! Every entity is described by the set of relations it takes part in (as
//! subject or object). Relation subsets shared by enough entities become
//! type labels; each entity keeps the first `k_type` patterns it contains in
//! global pattern order. Entities that contain no frequent pattern get their
//! whole relation set as a fallback type.

pub mod apriori;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tkg::{EntityId, RelationId, TemporalKg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("min_support_fraction must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    pub entity: EntityId,
    /// Sorted, duplicate-free.
    pub relations: Vec<RelationId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentPattern {
    pub relations: Vec<RelationId>,
    pub support_count: usize,
    pub type_id: TypeId,
}

/// Pattern table plus per-entity labels, indexed by entity id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    /// Mined patterns first (type ids `0..num_mined`), then fallback patterns.
    pub patterns: Vec<FrequentPattern>,
    pub num_mined: usize,
    pub labels: Vec<Vec<TypeId>>,
}

impl LabelAssignment {
    pub fn labels_of(&self, entity: EntityId) -> &[TypeId] {
        &self.labels[entity.0 as usize]
    }

    /// Number of distinct category labels, mined and fallback.
    pub fn num_types(&self) -> usize {
        self.patterns.len()
    }

    pub fn to_document(&self, kg: &TemporalKg) -> LabelDocument {
        LabelDocument {
            patterns: self
                .patterns
                .iter()
                .map(|p| PatternRecord {
                    type_id: p.type_id.0,
                    relations: p.relations.iter().map(|r| kg.relation_name(*r).to_string()).collect(),
                    support: p.support_count,
                    fallback: p.type_id.0 as usize >= self.num_mined,
                })
                .collect(),
            labels: self
                .labels
                .iter()
                .enumerate()
                .map(|(e, l)| {
                    (
                        kg.entity_name(EntityId(e as u32)).to_string(),
                        l.iter().map(|t| t.0).collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &LabelDocument, kg: &TemporalKg) -> Result<Self, String> {
        let mut patterns = Vec::with_capacity(doc.patterns.len());
        for (i, p) in doc.patterns.iter().enumerate() {
            if p.type_id as usize != i {
                return Err(format!("pattern {i} has type_id {}", p.type_id));
            }
            let relations = p
                .relations
                .iter()
                .map(|name| {
                    kg.relations()
                        .get(name)
                        .map(RelationId)
                        .ok_or_else(|| format!("unknown relation {name:?} in pattern {i}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            patterns.push(FrequentPattern {
                relations,
                support_count: p.support,
                type_id: TypeId(p.type_id),
            });
        }
        let mut labels = vec![Vec::new(); kg.entities().len()];
        for (name, ids) in &doc.labels {
            let e = kg
                .entities()
                .get(name)
                .ok_or_else(|| format!("unknown entity {name:?} in labels"))?;
            if let Some(bad) = ids.iter().find(|&&t| t as usize >= patterns.len()) {
                return Err(format!("entity {name:?} references missing type {bad}"));
            }
            labels[e as usize] = ids.iter().map(|&t| TypeId(t)).collect();
        }
        if let Some(e) = labels.iter().position(Vec::is_empty) {
            return Err(format!("entity {:?} has no label", kg.entity_name(EntityId(e as u32))));
        }
        let num_mined = doc.patterns.iter().take_while(|p| !p.fallback).count();
        if doc.patterns[num_mined..].iter().any(|p| !p.fallback) {
            return Err("mined pattern listed after a fallback pattern".into());
        }
        Ok(LabelAssignment { patterns, num_mined, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub type_id: u32,
    pub relations: Vec<String>,
    pub support: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDocument {
    pub patterns: Vec<PatternRecord>,
    pub labels: BTreeMap<String, Vec<u32>>,
}

pub fn build_relation_sets(kg: &TemporalKg) -> Vec<RelationSet> {
    let mut sets: Vec<BTreeSet<RelationId>> = vec![BTreeSet::new(); kg.entities().len()];
    for e in kg.events() {
        sets[e.subject.0 as usize].insert(e.relation);
        sets[e.object.0 as usize].insert(e.relation);
    }
    sets.into_iter()
        .enumerate()
        .map(|(i, s)| RelationSet {
            entity: EntityId(i as u32),
            relations: s.into_iter().collect(),
        })
        .collect()
}

/// Smallest support count meeting `fraction` of `n` entities.
pub fn min_support_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize
}

pub fn mine_frequent_relation_subsets(
    relation_sets: &[RelationSet],
    min_support_fraction: f64,
    max_subset_len: usize,
) -> Result<Vec<FrequentPattern>, LabelError> {
    if !(min_support_fraction > 0.0 && min_support_fraction <= 1.0) {
        return Err(LabelError::InvalidThreshold(min_support_fraction));
    }
    if max_subset_len == 0 {
        return Err(LabelError::InvalidParameter("max_subset_len must be >= 1".into()));
    }
    let transactions: Vec<Vec<u32>> = relation_sets
        .iter()
        .map(|s| s.relations.iter().map(|r| r.0).collect())
        .collect();
    let min_count = min_support_count(min_support_fraction, relation_sets.len());
    let mut found = apriori::frequent_itemsets(&transactions, min_count, max_subset_len);
    found.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then(b.len().cmp(&a.len())).then(a.cmp(b)));
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(i, (items, support_count))| FrequentPattern {
            relations: items.into_iter().map(RelationId).collect(),
            support_count,
            type_id: TypeId(i as u32),
        })
        .collect())
}

pub fn assign_labels(
    relation_sets: &[RelationSet],
    patterns: &[FrequentPattern],
    k_type: usize,
) -> Result<LabelAssignment, LabelError> {
    if k_type == 0 {
        return Err(LabelError::InvalidParameter("k_type must be >= 1".into()));
    }
    let mut table = patterns.to_vec();
    let num_mined = table.len();
    let mut fallback: HashMap<Vec<RelationId>, TypeId> = HashMap::new();
    let mut labels = Vec::with_capacity(relation_sets.len());
    let as_u32 = |rs: &[RelationId]| rs.iter().map(|r| r.0).collect::<Vec<u32>>();
    let pattern_items: Vec<Vec<u32>> = patterns.iter().map(|p| as_u32(&p.relations)).collect();

    for set in relation_sets {
        let have = as_u32(&set.relations);
        let mut chosen: Vec<TypeId> = patterns
            .iter()
            .zip(&pattern_items)
            .filter(|(_, items)| apriori::is_sorted_subset(items, &have))
            .take(k_type)
            .map(|(p, _)| p.type_id)
            .collect();
        if chosen.is_empty() && !set.relations.is_empty() {
            let id = *fallback.entry(set.relations.clone()).or_insert_with(|| {
                let id = TypeId(table.len() as u32);
                let support_count = relation_sets
                    .iter()
                    .filter(|o| apriori::is_sorted_subset(&have, &as_u32(&o.relations)))
                    .count();
                table.push(FrequentPattern {
                    relations: set.relations.clone(),
                    support_count,
                    type_id: id,
                });
                id
            });
            chosen.push(id);
        }
        labels.push(chosen);
    }
    Ok(LabelAssignment {
        patterns: table,
        num_mined,
        labels,
    })
}

/// Convenience wrapper running the three labeling stages over a corpus.
pub fn label_entities(
    kg: &TemporalKg,
    min_support_fraction: f64,
    max_subset_len: usize,
    k_type: usize,
) -> Result<LabelAssignment, LabelError> {
    let sets = build_relation_sets(kg);
    let patterns = mine_frequent_relation_subsets(&sets, min_support_fraction, max_subset_len)?;
    assign_labels(&sets, &patterns, k_type)
}
