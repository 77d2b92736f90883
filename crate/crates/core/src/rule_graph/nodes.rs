use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::labeling::{LabelAssignment, TypeId};
use crate::tkg::{Event, EventId, RelationId, TemporalKg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `<subject type, relation, object type>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleKey {
    pub subject_type: TypeId,
    pub relation: RelationId,
    pub object_type: TypeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleNode {
    pub node_id: NodeId,
    pub key: RuleKey,
    /// Sorted ascending, never empty.
    pub support: Vec<EventId>,
}

/// One node per witnessed `<c_s, r, c_o>`; every event lands in the cross
/// product of its subject and object labels. Node ids follow key order.
pub fn generate_rule_nodes(kg: &TemporalKg, labels: &LabelAssignment) -> Vec<RuleNode> {
    let mut groups: BTreeMap<RuleKey, Vec<EventId>> = BTreeMap::new();
    for e in kg.events() {
        for &cs in labels.labels_of(e.subject) {
            for &co in labels.labels_of(e.object) {
                let key = RuleKey {
                    subject_type: cs,
                    relation: e.relation,
                    object_type: co,
                };
                groups.entry(key).or_default().push(e.event_id);
            }
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (key, support))| RuleNode {
            node_id: NodeId(i as u32),
            key,
            support,
        })
        .collect()
}

pub fn hamming_distance(u: &RuleKey, v: &RuleKey) -> u8 {
    (u.subject_type != v.subject_type) as u8 + (u.relation != v.relation) as u8 + (u.object_type != v.object_type) as u8
}

/// Positional mismatches between two events' `(s, r, o)`, ignoring time.
pub fn event_hamming(a: &Event, b: &Event) -> u8 {
    (a.subject != b.subject) as u8 + (a.relation != b.relation) as u8 + (a.object != b.object) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::FrequentPattern;

    fn key(s: u32, r: u32, o: u32) -> RuleKey {
        RuleKey { subject_type: TypeId(s), relation: RelationId(r), object_type: TypeId(o) }
    }

    fn manual_labels(per_entity: Vec<Vec<u32>>) -> LabelAssignment {
        let n_types = per_entity.iter().flatten().max().map_or(0, |m| m + 1);
        LabelAssignment {
            patterns: (0..n_types)
                .map(|t| FrequentPattern { relations: vec![], support_count: 1, type_id: TypeId(t) })
                .collect(),
            num_mined: n_types as usize,
            labels: per_entity.into_iter().map(|l| l.into_iter().map(TypeId).collect()).collect(),
        }
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(&key(0, 0, 1), &key(0, 0, 1)), 0);
        assert_eq!(hamming_distance(&key(0, 0, 1), &key(0, 0, 2)), 1);
        assert_eq!(hamming_distance(&key(0, 0, 1), &key(2, 1, 3)), 3);
    }

    #[test]
    fn single_event_single_label() {
        let kg = TemporalKg::parse_str("A\tr\tB\t2020-01-01\n").unwrap();
        let nodes = generate_rule_nodes(&kg, &manual_labels(vec![vec![0], vec![1]]));
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].support, vec![EventId(0)]);
    }

    #[test]
    fn cross_product_of_labels() {
        let kg = TemporalKg::parse_str("A\tr\tB\t2020-01-01\n").unwrap();
        let nodes = generate_rule_nodes(&kg, &manual_labels(vec![vec![0, 1], vec![2, 3]]));
        assert_eq!(nodes.len(), 4);
        assert!(nodes.iter().all(|n| n.support == vec![EventId(0)]));
        let ids: Vec<u32> = nodes.iter().map(|n| n.node_id.0).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn same_category_events_share_a_node() {
        let text = "Oman\tintend_cooperate\tQatar\t2011-04-26\n\
                    Kuwait\tintend_cooperate\tBahrain\t2011-05-02\n\
                    Oman\tintend_cooperate\tBahrain\t2011-06-10\n";
        let kg = TemporalKg::parse_str(text).unwrap();
        // Oman, Kuwait -> Country_1; Qatar, Bahrain -> Country_2
        let mut per = vec![vec![]; kg.entities().len()];
        for (name, t) in [("Oman", 0), ("Kuwait", 0), ("Qatar", 1), ("Bahrain", 1)] {
            per[kg.entities().get(name).unwrap() as usize] = vec![t];
        }
        let nodes = generate_rule_nodes(&kg, &manual_labels(per));
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].support.len(), 3);
    }
}
