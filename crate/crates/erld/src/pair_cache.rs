//! Bounded cache of pairwise match outcomes.
//!
//! Keys are canonically ordered pairs of member-set digests, so a merged
//! document hits the same entry wherever the same member sets meet again,
//! across buckets and across incremental runs. One map holds both outcomes,
//! which keeps the matching and non-matching sets disjoint by construction.

use std::collections::{HashMap, VecDeque};

/// Default capacity: ten million pairs.
pub const DEFAULT_CAPACITY: usize = 10_000_000;

/// Canonically ordered pair of member-set digests.
pub type PairKey = (u128, u128);

/// Builds the cache key for two items identified by their member-set digests.
pub fn pair_key(a: u128, b: u128) -> PairKey {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct PairCache {
    map: HashMap<PairKey, bool>,
    order: VecDeque<PairKey>,
    capacity: usize,
    hits: u64,
    fresh: u64,
}

impl Default for PairCache {
    fn default() -> Self {
        PairCache::with_capacity(DEFAULT_CAPACITY)
    }
}

impl PairCache {
    pub fn with_capacity(capacity: usize) -> PairCache {
        PairCache {
            map: HashMap::new(),
            order: VecDeque::new(),
            capacity: capacity.max(1),
            hits: 0,
            fresh: 0,
        }
    }

    /// Cached outcome for a pair, if present. Counts a hit.
    pub fn lookup(&mut self, key: PairKey) -> Option<bool> {
        let found = self.map.get(&key).copied();
        if found.is_some() {
            self.hits += 1;
        }
        found
    }

    /// Records a freshly evaluated outcome, evicting the oldest entry once
    /// the capacity is reached.
    pub fn record(&mut self, key: PairKey, matched: bool) {
        self.fresh += 1;
        if self.map.contains_key(&key) {
            return;
        }
        if self.map.len() >= self.capacity {
            if let Some(oldest) = self.order.pop_front() {
                self.map.remove(&oldest);
            }
        }
        self.map.insert(key, matched);
        self.order.push_back(key);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Number of outcomes recorded since construction (cache misses).
    pub fn fresh_evaluations(&self) -> u64 {
        self.fresh
    }

    /// Resets the hit and fresh-evaluation counters, keeping the entries.
    pub fn reset_counters(&mut self) {
        self.hits = 0;
        self.fresh = 0;
    }

    pub fn matching_count(&self) -> usize {
        self.map.values().filter(|&&m| m).count()
    }

    pub fn non_matching_count(&self) -> usize {
        self.map.values().filter(|&&m| !m).count()
    }

    /// Entries in insertion order, oldest first, for persistence.
    pub fn entries(&self) -> impl Iterator<Item = (PairKey, bool)> + '_ {
        self.order.iter().map(|k| (*k, self.map[k]))
    }

    /// Rebuilds a cache from persisted entries, oldest first.
    pub fn from_entries(capacity: usize, entries: Vec<(PairKey, bool)>) -> PairCache {
        let mut cache = PairCache::with_capacity(capacity);
        for (key, matched) in entries {
            if cache.map.len() >= cache.capacity {
                if let Some(oldest) = cache.order.pop_front() {
                    cache.map.remove(&oldest);
                }
            }
            if cache.map.insert(key, matched).is_none() {
                cache.order.push_back(key);
            }
        }
        cache
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_ordering_is_canonical() {
        assert_eq!(pair_key(2, 1), pair_key(1, 2));
    }

    #[test]
    fn lookup_counts_hits_and_record_counts_fresh() {
        let mut cache = PairCache::with_capacity(10);
        let k = pair_key(1, 2);
        assert_eq!(cache.lookup(k), None);
        cache.record(k, true);
        assert_eq!(cache.lookup(k), Some(true));
        assert_eq!(cache.hits(), 1);
        assert_eq!(cache.fresh_evaluations(), 1);
        assert_eq!(cache.matching_count(), 1);
        assert_eq!(cache.non_matching_count(), 0);
    }

    #[test]
    fn capacity_evicts_oldest_first() {
        let mut cache = PairCache::with_capacity(2);
        cache.record(pair_key(1, 2), true);
        cache.record(pair_key(3, 4), false);
        cache.record(pair_key(5, 6), true);
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.lookup(pair_key(1, 2)), None);
        assert_eq!(cache.lookup(pair_key(3, 4)), Some(false));
        assert_eq!(cache.lookup(pair_key(5, 6)), Some(true));
    }

    #[test]
    fn entries_round_trip_in_order() {
        let mut cache = PairCache::with_capacity(8);
        cache.record(pair_key(1, 2), true);
        cache.record(pair_key(3, 4), false);
        let entries: Vec<_> = cache.entries().collect();
        let rebuilt = PairCache::from_entries(8, entries.clone());
        assert_eq!(rebuilt.entries().collect::<Vec<_>>(), entries);
    }
}
