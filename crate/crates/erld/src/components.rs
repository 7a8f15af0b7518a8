//! Cross-bucket consolidation via connected components.
//!
//! Each resolved bucket item contributes a star of edges over its original
//! member documents, anchored at the smallest member. Components of the
//! resulting graph are the final clusters; each is merged into one entity.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::document::{merge, DocumentId, Entity, EntityId};
use crate::error::{ErldError, Result};
use crate::index::PrimaryKeyStore;

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cursor = x;
        while self.parent[cursor] != root {
            let next = self.parent[cursor];
            self.parent[cursor] = root;
            cursor = next;
        }
        root
    }

    /// Joins the sets containing `a` and `b`; false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Expands member sets into star edge lists anchored at each set's
/// smallest member. Singleton sets contribute no edges.
pub fn star_edges<'a, I>(member_sets: I) -> Vec<(DocumentId, DocumentId)>
where
    I: IntoIterator<Item = &'a BTreeSet<DocumentId>>,
{
    let mut edges = Vec::new();
    for members in member_sets {
        let mut iter = members.iter();
        let Some(center) = iter.next() else {
            continue;
        };
        for other in iter {
            edges.push((center.clone(), other.clone()));
        }
    }
    edges
}

/// Connected components over `ids` with the given edges, returned sorted by
/// smallest member. Every endpoint must appear in `ids`.
pub fn connected_components(
    ids: &[DocumentId],
    edges: &[(DocumentId, DocumentId)],
) -> Result<Vec<BTreeSet<DocumentId>>> {
    let index: BTreeMap<&DocumentId, usize> =
        ids.iter().enumerate().map(|(i, d)| (d, i)).collect();
    let mut forest = UnionFind::new(ids.len());
    for (a, b) in edges {
        let ia = *index
            .get(a)
            .ok_or_else(|| ErldError::UnknownDocument(a.to_string()))?;
        let ib = *index
            .get(b)
            .ok_or_else(|| ErldError::UnknownDocument(b.to_string()))?;
        forest.union(ia, ib);
    }
    let mut groups: BTreeMap<usize, BTreeSet<DocumentId>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        groups.entry(forest.find(i)).or_default().insert(id.clone());
    }
    let mut components: Vec<BTreeSet<DocumentId>> = groups.into_values().collect();
    components.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    Ok(components)
}

/// Merges each component's documents into an entity named after its
/// smallest member.
pub fn consolidate(
    components: Vec<BTreeSet<DocumentId>>,
    store: &PrimaryKeyStore,
) -> Result<Vec<Entity>> {
    let mut entities = Vec::with_capacity(components.len());
    for members in components {
        let mut docs = Vec::with_capacity(members.len());
        for id in &members {
            docs.push(
                store
                    .get(id)
                    .ok_or_else(|| ErldError::UnknownDocument(id.to_string()))?,
            );
        }
        let id = EntityId::for_members(&members);
        let merged = merge(docs)?;
        entities.push(Entity { id, members, merged });
    }
    Ok(entities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::Document;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::VecDeque;

    fn ids(names: &[&str]) -> Vec<DocumentId> {
        names.iter().map(|n| DocumentId::from(*n)).collect()
    }

    fn set(names: &[&str]) -> BTreeSet<DocumentId> {
        names.iter().map(|n| DocumentId::from(*n)).collect()
    }

    #[test]
    fn union_find_tracks_transitive_joins() {
        let mut forest = UnionFind::new(6);
        assert!(forest.union(0, 1));
        assert!(forest.union(2, 3));
        assert!(!forest.same(0, 2));
        assert!(forest.union(1, 2));
        assert!(!forest.union(0, 3));
        assert!(forest.same(0, 3));
        assert!(!forest.same(0, 4));
        assert!(!forest.same(4, 5));
    }

    #[test]
    fn star_edges_anchor_at_smallest_member() {
        let sets = [set(&["d3", "d1", "d2"]), set(&["d5"]), set(&["d7", "d6"])];
        let edges = star_edges(sets.iter());
        assert_eq!(
            edges,
            vec![
                ("d1".into(), "d2".into()),
                ("d1".into(), "d3".into()),
                ("d6".into(), "d7".into()),
            ]
        );
    }

    #[test]
    fn overlapping_stars_fuse_into_one_component() {
        // Two buckets resolve overlapping clusters {d1,d2} and {d2,d3};
        // consolidation must fuse them.
        let all = ids(&["d1", "d2", "d3", "d4"]);
        let sets = [set(&["d1", "d2"]), set(&["d2", "d3"])];
        let edges = star_edges(sets.iter());
        let components = connected_components(&all, &edges).unwrap();
        assert_eq!(components, vec![set(&["d1", "d2", "d3"]), set(&["d4"])]);
    }

    #[test]
    fn edge_to_unknown_document_is_rejected() {
        let all = ids(&["d1"]);
        let err = connected_components(&all, &[("d1".into(), "ghost".into())]).unwrap_err();
        assert!(matches!(err, ErldError::UnknownDocument(_)));
    }

    fn bfs_components(
        ids: &[DocumentId],
        edges: &[(DocumentId, DocumentId)],
    ) -> Vec<BTreeSet<DocumentId>> {
        let mut adjacency: BTreeMap<&DocumentId, Vec<&DocumentId>> =
            ids.iter().map(|d| (d, Vec::new())).collect();
        for (a, b) in edges {
            adjacency.get_mut(a).unwrap().push(b);
            adjacency.get_mut(b).unwrap().push(a);
        }
        let mut seen: BTreeSet<&DocumentId> = BTreeSet::new();
        let mut components = Vec::new();
        for start in ids {
            if seen.contains(start) {
                continue;
            }
            let mut component = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(node) = queue.pop_front() {
                component.insert(node.clone());
                for next in &adjacency[node] {
                    if seen.insert(next) {
                        queue.push_back(next);
                    }
                }
            }
            components.push(component);
        }
        components.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        components
    }

    #[test]
    fn agrees_with_breadth_first_labeling_on_random_graphs() {
        let mut rng = StdRng::seed_from_u64(77);
        for round in 0..30 {
            let n = rng.gen_range(1..=80);
            let nodes: Vec<DocumentId> =
                (0..n).map(|i| DocumentId(format!("n{i:03}"))).collect();
            let edge_count = rng.gen_range(0..=(2 * n));
            let edges: Vec<(DocumentId, DocumentId)> = (0..edge_count)
                .map(|_| {
                    (
                        nodes[rng.gen_range(0..n)].clone(),
                        nodes[rng.gen_range(0..n)].clone(),
                    )
                })
                .collect();
            let fast = connected_components(&nodes, &edges).unwrap();
            let slow = bfs_components(&nodes, &edges);
            assert_eq!(fast, slow, "round {round}");
        }
    }

    #[test]
    fn components_do_not_depend_on_the_anchor_choice() {
        let mut rng = StdRng::seed_from_u64(78);
        for _ in 0..20 {
            let n = 30;
            let nodes: Vec<DocumentId> =
                (0..n).map(|i| DocumentId(format!("n{i:02}"))).collect();
            let mut sets = Vec::new();
            for _ in 0..rng.gen_range(1..=8) {
                let size = rng.gen_range(2..=5);
                let members: BTreeSet<DocumentId> = (0..size)
                    .map(|_| nodes[rng.gen_range(0..n)].clone())
                    .collect();
                sets.push(members);
            }
            let star = star_edges(sets.iter());
            // Same member sets expanded around a random anchor instead of
            // the smallest member.
            let random_anchor: Vec<(DocumentId, DocumentId)> = sets
                .iter()
                .flat_map(|members| {
                    let list: Vec<&DocumentId> = members.iter().collect();
                    let center = list[rng.gen_range(0..list.len())].clone();
                    members
                        .iter()
                        .filter(|m| **m != center)
                        .map(|m| (center.clone(), m.clone()))
                        .collect::<Vec<_>>()
                })
                .collect();
            let a = connected_components(&nodes, &star).unwrap();
            let b = connected_components(&nodes, &random_anchor).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn consolidation_merges_member_documents() {
        let mut store = PrimaryKeyStore::new();
        let mut d1 = Document::new("d1", "PAN");
        d1.add_value("name", "Amit Kumar");
        d1.add_value("dob", "1985-03-12");
        let mut d2 = Document::new("d2", "VOT");
        d2.add_value("name", "Amit Kumar");
        d2.add_value("address", "Flat 9 Rajaji Nagar Delhi");
        let mut d3 = Document::new("d3", "DL");
        d3.add_value("name", "Suresh Patel");
        store.insert(d1);
        store.insert(d2);
        store.insert(d3);
        let entities = consolidate(vec![set(&["d1", "d2"]), set(&["d3"])], &store).unwrap();
        assert_eq!(entities.len(), 2);
        assert_eq!(entities[0].id.as_str(), "E:d1");
        assert_eq!(entities[0].members, set(&["d1", "d2"]));
        assert_eq!(
            entities[0].merged.values("address").collect::<Vec<_>>(),
            vec!["Flat 9 Rajaji Nagar Delhi"]
        );
        assert_eq!(
            entities[0].merged.values("dob").collect::<Vec<_>>(),
            vec!["1985-03-12"]
        );
        assert_eq!(entities[1].id.as_str(), "E:d3");
    }

    #[test]
    fn consolidation_requires_every_member_document() {
        let store = PrimaryKeyStore::new();
        let err = consolidate(vec![set(&["d1"])], &store).unwrap_err();
        assert!(matches!(err, ErldError::UnknownDocument(_)));
    }
}
