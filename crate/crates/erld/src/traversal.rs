//! Reference traversal: collecting the documents reachable from a starting
//! document by following links down (documents it refers to) and up
//! (documents that refer to it).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::document::{Document, DocumentId, EntityId};
use crate::index::{InvertedIndex, PrimaryKeyStore};
use crate::schema::{RefRole, SchemaConfig};

/// Bounds on the traversal walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalConfig {
    /// Number of downstream/upstream rounds per document.
    pub max_steps: usize,
    /// A single upstream search returning more documents than this is
    /// discarded as too unspecific.
    pub ust_fanout_threshold: usize,
}

impl Default for TraversalConfig {
    fn default() -> Self {
        TraversalConfig {
            max_steps: 4,
            ust_fanout_threshold: 10,
        }
    }
}

/// The traversal set of one document. Members never include the owner.
///
/// In incremental runs, members that were already resolved appear as their
/// entities instead of raw documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalSet {
    pub owner: DocumentId,
    pub docs: BTreeSet<DocumentId>,
    pub entities: BTreeSet<EntityId>,
}

impl TraversalSet {
    pub fn is_empty(&self) -> bool {
        self.docs.is_empty() && self.entities.is_empty()
    }

    pub fn len(&self) -> usize {
        self.docs.len() + self.entities.len()
    }
}

/// Explicit reference values of a document, domain-filtered by the schema.
fn explicit_values<'a>(doc: &'a Document, schema: &'a SchemaConfig) -> Vec<&'a str> {
    let mut out = Vec::new();
    for spec in schema.referential_attributes() {
        if spec.ref_role != Some(RefRole::Explicit) {
            continue;
        }
        if let Some(domain) = &spec.domain {
            if !doc.types.contains(domain) {
                continue;
            }
        }
        out.extend(doc.values(&spec.name));
    }
    out
}

/// One downstream hop: the documents this document explicitly refers to.
/// References to keys absent from the store are dropped.
pub fn downstream_step(
    doc: &Document,
    pk: &PrimaryKeyStore,
    schema: &SchemaConfig,
) -> BTreeSet<DocumentId> {
    let mut out = BTreeSet::new();
    for value in explicit_values(doc, schema) {
        let id = DocumentId(value.trim().to_string());
        if id != doc.id && pk.contains(&id) {
            out.insert(id);
        }
    }
    out
}

/// All documents reachable from `start` by explicit references.
pub fn downstream_closure(
    start: &DocumentId,
    pk: &PrimaryKeyStore,
    schema: &SchemaConfig,
) -> BTreeSet<DocumentId> {
    let mut out = BTreeSet::new();
    let mut queue: VecDeque<DocumentId> = VecDeque::new();
    queue.push_back(start.clone());
    let mut visited = BTreeSet::new();
    visited.insert(start.clone());
    while let Some(id) = queue.pop_front() {
        let Some(doc) = pk.get(&id) else { continue };
        for next in downstream_step(doc, pk, schema) {
            if visited.insert(next.clone()) {
                out.insert(next.clone());
                queue.push_back(next);
            }
        }
    }
    out.remove(start);
    out
}

/// One upstream hop: searches the document's own primary key and each of its
/// explicit reference values in the inverted index and unions the postings.
///
/// Any single search whose result set (excluding the document itself) exceeds
/// the fanout threshold is discarded entirely.
pub fn upstream_step(
    doc: &Document,
    inverted: &InvertedIndex,
    schema: &SchemaConfig,
    threshold: usize,
) -> BTreeSet<DocumentId> {
    let mut tokens = vec![doc.id.to_string()];
    tokens.extend(
        explicit_values(doc, schema)
            .into_iter()
            .map(|v| v.trim().to_string()),
    );
    let mut out = BTreeSet::new();
    for token in tokens {
        let mut hits = inverted.search(&token);
        hits.remove(&doc.id);
        if hits.len() > threshold {
            continue;
        }
        out.extend(hits);
    }
    out
}

/// Computes the traversal set of one document: repeated rounds of a full
/// downstream closure over the frontier followed by a single upstream hop
/// from the frontier and its downstream additions.
pub fn traversal_set(
    owner: &DocumentId,
    pk: &PrimaryKeyStore,
    inverted: &InvertedIndex,
    schema: &SchemaConfig,
    config: &TraversalConfig,
) -> TraversalSet {
    traversal_set_with_resolved(owner, pk, inverted, schema, config, &BTreeMap::new())
}

/// Traversal with entity substitution for incremental runs: documents that
/// appear in `resolved` are reported as their entities. The walk itself still
/// passes through them, so links via old documents keep working.
pub fn traversal_set_with_resolved(
    owner: &DocumentId,
    pk: &PrimaryKeyStore,
    inverted: &InvertedIndex,
    schema: &SchemaConfig,
    config: &TraversalConfig,
    resolved: &BTreeMap<DocumentId, EntityId>,
) -> TraversalSet {
    let mut members: BTreeSet<DocumentId> = BTreeSet::new();
    let mut frontier: BTreeSet<DocumentId> = BTreeSet::new();
    frontier.insert(owner.clone());

    for _ in 0..config.max_steps {
        let mut added: BTreeSet<DocumentId> = BTreeSet::new();

        for id in &frontier {
            for down in downstream_closure(id, pk, schema) {
                if down != *owner && !members.contains(&down) {
                    added.insert(down);
                }
            }
        }
        members.extend(added.iter().cloned());

        let mut ust_sources: BTreeSet<DocumentId> = frontier.clone();
        ust_sources.extend(added.iter().cloned());
        let mut up_added: BTreeSet<DocumentId> = BTreeSet::new();
        for id in &ust_sources {
            let Some(doc) = pk.get(id) else { continue };
            for up in upstream_step(doc, inverted, schema, config.ust_fanout_threshold) {
                if up != *owner && !members.contains(&up) {
                    up_added.insert(up);
                }
            }
        }
        members.extend(up_added.iter().cloned());

        frontier = added;
        frontier.extend(up_added);
        if frontier.is_empty() {
            break;
        }
    }

    let mut docs = BTreeSet::new();
    let mut entities = BTreeSet::new();
    for id in members {
        match resolved.get(&id) {
            Some(entity) => {
                entities.insert(entity.clone());
            }
            None => {
                docs.insert(id);
            }
        }
    }
    TraversalSet {
        owner: owner.clone(),
        docs,
        entities,
    }
}

/// Traversal sets for every document in the store, keyed by owner.
pub fn all_traversal_sets(
    pk: &PrimaryKeyStore,
    inverted: &InvertedIndex,
    schema: &SchemaConfig,
    config: &TraversalConfig,
) -> BTreeMap<DocumentId, TraversalSet> {
    pk.ids()
        .map(|id| {
            (
                id.clone(),
                traversal_set(id, pk, inverted, schema, config),
            )
        })
        .collect()
}
