//! End-to-end resolution: indexes, traversal, blocking, match-merge, and
//! consolidation, in batch and incremental form.
//!
//! Batch resolution hashes every document into banded MinHash buckets, drags
//! each document's traversal set into its buckets, resolves buckets with
//! iterative match-merge, and consolidates overlapping bucket results through
//! connected components. Incremental resolution replays the same steps for
//! new documents only, pulling previously resolved entities into the touched
//! buckets instead of their member documents.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::components::{connected_components, consolidate, star_edges};
use crate::document::{merge, Document, DocumentId, Entity, EntityId};
use crate::error::{ErldError, Result};
use crate::imm::rswoosh;
use crate::index::build_indexes;
use crate::lsh::{doc_bucket_ids, singleton_bucket_id, LshIndex, LshParams, TokenDictionary};
use crate::matching::{CachedMatcher, RuleSet, TraversalSetsOracle, WorkItem};
use crate::pair_cache::{self, PairCache};
use crate::schema::SchemaConfig;
use crate::state::ResolutionState;
use crate::traversal::{all_traversal_sets, traversal_set_with_resolved, TraversalConfig};

/// Tunables of a resolution run. Persisted with the state so incremental
/// runs keep hashing and walking exactly as the original run did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolveConfig {
    #[serde(default)]
    pub traversal: TraversalConfig,
    pub lsh_m: usize,
    pub lsh_n: usize,
    pub lsh_seed: u64,
    pub cache_capacity: usize,
}

impl Default for ResolveConfig {
    fn default() -> ResolveConfig {
        ResolveConfig {
            traversal: TraversalConfig::default(),
            lsh_m: 3,
            lsh_n: 6,
            lsh_seed: 7,
            cache_capacity: pair_cache::DEFAULT_CAPACITY,
        }
    }
}

impl ResolveConfig {
    pub fn lsh_params(&self) -> LshParams {
        LshParams::from_seed(self.lsh_m, self.lsh_n, self.lsh_seed)
    }
}

/// Counters and timings of one resolution run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// Documents processed by this run (all of them in batch, new ones in
    /// incremental).
    pub documents: usize,
    /// Buckets that held more than one item and went through match-merge.
    pub buckets: usize,
    /// Entities in the state after the run.
    pub entities: usize,
    /// Merges performed across all buckets.
    pub merges: u64,
    /// Match-function invocations that missed the pair cache.
    pub fresh_evaluations: u64,
    /// Fresh evaluations whose two sides were both single source documents.
    pub fresh_document_pairs: u64,
    /// Evaluations answered from the pair cache.
    pub cache_hits: u64,
    /// Distinct document pairs sharing at least one working bucket.
    pub co_bucketed_document_pairs: u64,
    /// Upper bound on fresh evaluations: sum over buckets of all pairs over
    /// every item the bucket ever held, merges included.
    pub bucket_pair_budget: u64,
    /// Prior entities materialized by an incremental run.
    pub entities_read: BTreeSet<EntityId>,
    pub wall: Duration,
}

fn count_pairs(set_sizes: u64) -> u64 {
    set_sizes * set_sizes.saturating_sub(1) / 2
}

fn reject_duplicates(docs: &[Document]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for doc in docs {
        if !seen.insert(&doc.id) {
            return Err(ErldError::Config(format!(
                "document {} appears twice in the input",
                doc.id
            )));
        }
    }
    Ok(())
}

/// Resolves a full corpus from scratch.
pub fn resolve_batch(
    docs: Vec<Document>,
    schema: &SchemaConfig,
    rules: &RuleSet,
    config: &ResolveConfig,
) -> Result<(ResolutionState, RunStats)> {
    let cache = PairCache::with_capacity(config.cache_capacity);
    resolve_batch_with_cache(docs, schema, rules, config, cache)
}

/// Batch resolution on top of an existing pair cache, so reruns over known
/// pairs skip re-evaluation.
pub fn resolve_batch_with_cache(
    docs: Vec<Document>,
    schema: &SchemaConfig,
    rules: &RuleSet,
    config: &ResolveConfig,
    mut cache: PairCache,
) -> Result<(ResolutionState, RunStats)> {
    let started = Instant::now();
    reject_duplicates(&docs)?;
    cache.reset_counters();

    let (pk, inverted) = build_indexes(&docs, schema);
    drop(docs);
    let sets = all_traversal_sets(&pk, &inverted, schema, &config.traversal);

    // Hash every document, in id order so token ids are reproducible.
    let params = config.lsh_params();
    let mut dict = TokenDictionary::new();
    let mut lsh_index: LshIndex = BTreeMap::new();
    let mut doc_buckets: BTreeMap<DocumentId, Vec<String>> = BTreeMap::new();
    for doc in pk.documents() {
        let bids = match doc_bucket_ids(doc, schema, &mut dict, &params) {
            Ok(bids) => bids,
            Err(ErldError::EmptyWordSet(_)) => vec![singleton_bucket_id(&doc.id)],
            Err(e) => return Err(e),
        };
        for bid in &bids {
            lsh_index
                .entry(bid.clone())
                .or_default()
                .insert(doc.id.clone());
        }
        doc_buckets.insert(doc.id.clone(), bids);
    }

    // Working buckets: hash assignments plus each owner's traversal set.
    let mut work: BTreeMap<String, BTreeSet<DocumentId>> = lsh_index.clone();
    for (id, ts) in &sets {
        if ts.docs.is_empty() {
            continue;
        }
        for bid in &doc_buckets[id] {
            work.get_mut(bid)
                .expect("every document is in its own buckets")
                .extend(ts.docs.iter().cloned());
        }
    }

    let mut co_bucketed: BTreeSet<(DocumentId, DocumentId)> = BTreeSet::new();
    for members in work.values() {
        let list: Vec<&DocumentId> = members.iter().collect();
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                co_bucketed.insert((list[i].clone(), list[j].clone()));
            }
        }
    }

    let oracle = TraversalSetsOracle::new(&sets);
    let mut matcher = CachedMatcher::new(rules, &mut cache);
    let mut resolved_member_sets: Vec<BTreeSet<DocumentId>> = Vec::new();
    let mut merges = 0u64;
    let mut budget = 0u64;
    let mut buckets_resolved = 0usize;
    for members in work.values() {
        if members.len() < 2 {
            continue;
        }
        buckets_resolved += 1;
        let items: Vec<WorkItem> = members
            .iter()
            .map(|id| WorkItem::from_document(pk.get(id).expect("bucket member is stored")))
            .collect();
        let initial = items.len() as u64;
        let outcome = rswoosh(items, &mut matcher, &oracle)?;
        merges += outcome.merges as u64;
        budget += count_pairs(initial + outcome.merges as u64);
        for item in outcome.items {
            if item.members.len() >= 2 {
                resolved_member_sets.push(item.members);
            }
        }
    }
    let fresh_document_pairs = matcher.fresh_document_pairs();
    drop(matcher);

    let all_ids: Vec<DocumentId> = pk.ids().cloned().collect();
    let edges = star_edges(resolved_member_sets.iter());
    let components = connected_components(&all_ids, &edges)?;
    let entities = consolidate(components, &pk)?;
    let mut doc_entity_map = BTreeMap::new();
    for entity in &entities {
        for member in &entity.members {
            doc_entity_map.insert(member.clone(), entity.id.clone());
        }
    }

    let stats = RunStats {
        documents: pk.len(),
        buckets: buckets_resolved,
        entities: entities.len(),
        merges,
        fresh_evaluations: cache.fresh_evaluations(),
        fresh_document_pairs,
        cache_hits: cache.hits(),
        co_bucketed_document_pairs: co_bucketed.len() as u64,
        bucket_pair_budget: budget,
        entities_read: BTreeSet::new(),
        wall: started.elapsed(),
    };
    let state = ResolutionState {
        schema: schema.clone(),
        rules: rules.config().clone(),
        config: config.clone(),
        documents: pk,
        inverted,
        token_dict: dict,
        lsh_index,
        entities,
        doc_entity_map,
        tombstones: BTreeMap::new(),
        pair_cache: cache,
    };
    Ok((state, stats))
}

#[derive(Default)]
struct TouchedBucket {
    docs: BTreeSet<DocumentId>,
    entities: BTreeSet<EntityId>,
}

/// Resolves new documents against an existing state, touching only the
/// buckets the new documents hash or link into. Entities outside those
/// buckets are neither read nor rewritten.
pub fn resolve_incremental(
    state: &mut ResolutionState,
    new_docs: Vec<Document>,
) -> Result<RunStats> {
    let started = Instant::now();
    let schema = state.schema.clone();
    let rules = RuleSet::compile(state.rules.clone(), &schema)?;
    let config = state.config.clone();
    state.pair_cache.reset_counters();

    reject_duplicates(&new_docs)?;
    let mut incoming: BTreeMap<DocumentId, Document> = BTreeMap::new();
    for doc in new_docs {
        if state.documents.contains(&doc.id) {
            return Err(ErldError::Config(format!(
                "document {} is already resolved in this state",
                doc.id
            )));
        }
        incoming.insert(doc.id.clone(), doc);
    }

    for doc in incoming.values() {
        state.inverted.add_document(doc, &schema);
        state.documents.insert(doc.clone());
    }

    // Traversal for new documents walks the combined corpus; resolved
    // documents it reaches are reported as their entities.
    let mut sets = BTreeMap::new();
    for id in incoming.keys() {
        let ts = traversal_set_with_resolved(
            id,
            &state.documents,
            &state.inverted,
            &schema,
            &config.traversal,
            &state.doc_entity_map,
        );
        sets.insert(id.clone(), ts);
    }

    let params = config.lsh_params();
    let mut new_doc_buckets: BTreeMap<DocumentId, Vec<String>> = BTreeMap::new();
    for (id, doc) in &incoming {
        let bids = match doc_bucket_ids(doc, &schema, &mut state.token_dict, &params) {
            Ok(bids) => bids,
            Err(ErldError::EmptyWordSet(_)) => vec![singleton_bucket_id(id)],
            Err(e) => return Err(e),
        };
        new_doc_buckets.insert(id.clone(), bids);
    }

    // A touched bucket holds the new document, its traversal companions,
    // and the entities of old documents that hashed into the same bucket.
    let mut touched: BTreeMap<String, TouchedBucket> = BTreeMap::new();
    for (id, bids) in &new_doc_buckets {
        let ts = &sets[id];
        for bid in bids {
            let slot = touched.entry(bid.clone()).or_default();
            slot.docs.insert(id.clone());
            slot.docs.extend(ts.docs.iter().cloned());
            slot.entities.extend(ts.entities.iter().cloned());
            if let Some(old_members) = state.lsh_index.get(bid) {
                for old in old_members {
                    if let Some(entity) = state.doc_entity_map.get(old) {
                        slot.entities.insert(entity.clone());
                    }
                }
            }
        }
    }

    let entity_index: BTreeMap<&EntityId, &Entity> =
        state.entities.iter().map(|e| (&e.id, e)).collect();
    let mut entities_read: BTreeSet<EntityId> = BTreeSet::new();
    let oracle = TraversalSetsOracle::new(&sets);
    let mut matcher = CachedMatcher::new(&rules, &mut state.pair_cache);
    let mut resolved_items: Vec<WorkItem> = Vec::new();
    let mut co_bucketed: BTreeSet<(DocumentId, DocumentId)> = BTreeSet::new();
    let mut merges = 0u64;
    let mut budget = 0u64;
    let mut buckets_resolved = 0usize;

    for slot in touched.values() {
        let doc_list: Vec<&DocumentId> = slot.docs.iter().collect();
        for i in 0..doc_list.len() {
            for j in i + 1..doc_list.len() {
                co_bucketed.insert((doc_list[i].clone(), doc_list[j].clone()));
            }
        }
        let mut items: Vec<WorkItem> = Vec::new();
        for id in &slot.docs {
            let doc = state
                .documents
                .get(id)
                .ok_or_else(|| ErldError::UnknownDocument(id.to_string()))?;
            items.push(WorkItem::from_document(doc));
        }
        for entity_id in &slot.entities {
            let entity = entity_index.get(entity_id).ok_or_else(|| {
                ErldError::InvariantViolation(format!(
                    "state maps documents to unknown entity {entity_id}"
                ))
            })?;
            entities_read.insert(entity_id.clone());
            items.push(WorkItem::from_entity(entity));
        }
        if items.len() < 2 {
            resolved_items.extend(items);
            continue;
        }
        buckets_resolved += 1;
        let initial = items.len() as u64;
        let outcome = rswoosh(items, &mut matcher, &oracle)?;
        merges += outcome.merges as u64;
        budget += count_pairs(initial + outcome.merges as u64);
        resolved_items.extend(outcome.items);
    }
    let fresh_document_pairs = matcher.fresh_document_pairs();
    drop(matcher);

    // Consolidate only the nodes the touched buckets put in play.
    let mut touched_nodes: BTreeSet<DocumentId> = BTreeSet::new();
    for item in &resolved_items {
        touched_nodes.extend(item.members.iter().cloned());
    }
    let node_list: Vec<DocumentId> = touched_nodes.into_iter().collect();
    let edges = star_edges(resolved_items.iter().map(|i| &i.members));
    let components = connected_components(&node_list, &edges)?;

    let mut replaced: BTreeSet<EntityId> = BTreeSet::new();
    let mut rebuilt: Vec<Entity> = Vec::new();
    for members in components {
        let old: BTreeSet<EntityId> = members
            .iter()
            .filter_map(|d| state.doc_entity_map.get(d).cloned())
            .collect();
        // A component keeps the smallest prior entity id; other prior ids
        // retire in its favor. Components of new documents only get a fresh
        // id from their smallest member.
        let id = match old.iter().next() {
            Some(survivor) => {
                for retired in old.iter().skip(1) {
                    state.tombstones.insert(retired.clone(), survivor.clone());
                }
                survivor.clone()
            }
            None => EntityId::for_members(&members),
        };
        replaced.extend(old.iter().cloned());
        let mut member_docs = Vec::with_capacity(members.len());
        for d in &members {
            member_docs.push(
                state
                    .documents
                    .get(d)
                    .ok_or_else(|| ErldError::UnknownDocument(d.to_string()))?,
            );
        }
        let merged = merge(member_docs)?;
        rebuilt.push(Entity { id, members, merged });
    }

    state.entities.retain(|e| !replaced.contains(&e.id));
    for entity in &rebuilt {
        for member in &entity.members {
            state.doc_entity_map.insert(member.clone(), entity.id.clone());
        }
    }
    state.entities.extend(rebuilt);
    state.entities.sort_by(|a, b| a.id.cmp(&b.id));

    // Only genuinely hashed assignments persist; dragged items stay a
    // per-run construction.
    for (id, bids) in &new_doc_buckets {
        for bid in bids {
            state
                .lsh_index
                .entry(bid.clone())
                .or_default()
                .insert(id.clone());
        }
    }

    Ok(RunStats {
        documents: incoming.len(),
        buckets: buckets_resolved,
        entities: state.entities.len(),
        merges,
        fresh_evaluations: state.pair_cache.fresh_evaluations(),
        fresh_document_pairs,
        cache_hits: state.pair_cache.hits(),
        co_bucketed_document_pairs: co_bucketed.len() as u64,
        bucket_pair_budget: budget,
        entities_read,
        wall: started.elapsed(),
    })
}
