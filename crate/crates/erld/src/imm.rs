//! Iterative match-merge over the items of one blocking bucket.
//!
//! The queue-based procedure pops an item, compares it against the resolved
//! set, and on the first match removes the partner, merges, and requeues the
//! merged item at the back; otherwise the item joins the resolved set. For
//! match functions whose verdicts survive merges, the outcome equals the
//! exhaustive fixpoint while comparing far fewer pairs.

use std::collections::VecDeque;

use crate::error::Result;
use crate::matching::{CachedMatcher, MatchFunction, TraversalOracle, WorkItem};

/// Result of resolving one bucket.
#[derive(Debug)]
pub struct BucketResolution {
    /// Items that no longer match each other.
    pub items: Vec<WorkItem>,
    /// Number of merges performed while resolving the bucket.
    pub merges: usize,
}

/// Resolves a bucket with the queue-based match-merge procedure.
///
/// Input order does not matter: items are first sorted by their smallest
/// member id, and merged items requeue at the back, so the outcome is
/// deterministic for a given bucket.
pub fn rswoosh(
    items: Vec<WorkItem>,
    matcher: &mut CachedMatcher,
    traversal: &dyn TraversalOracle,
) -> Result<BucketResolution> {
    let mut pending: Vec<WorkItem> = items;
    pending.sort_by(|a, b| a.sort_key().cmp(b.sort_key()));
    let mut queue: VecDeque<WorkItem> = pending.into();
    let mut resolved: Vec<WorkItem> = Vec::new();
    let mut merges = 0;

    while let Some(item) = queue.pop_front() {
        let hit = resolved
            .iter()
            .position(|candidate| matcher.matches(&item, candidate, traversal));
        match hit {
            Some(index) => {
                let partner = resolved.remove(index);
                queue.push_back(item.merged_with(&partner)?);
                merges += 1;
            }
            None => resolved.push(item),
        }
    }

    Ok(BucketResolution {
        items: resolved,
        merges,
    })
}

/// Reference resolution: repeatedly scan every pair in ascending member-id
/// order and merge the first match until none remains. Quadratic and
/// uncached; used to cross-check the queue-based procedure.
pub fn exhaustive_match_merge(
    items: Vec<WorkItem>,
    function: &dyn MatchFunction,
    traversal: &dyn TraversalOracle,
) -> Result<Vec<WorkItem>> {
    let mut set = items;
    set.sort_by(|a, b| a.sort_key().cmp(b.sort_key()));
    loop {
        let mut merged_at = None;
        'scan: for i in 0..set.len() {
            for j in i + 1..set.len() {
                if function.is_match(&set[i], &set[j], traversal) {
                    merged_at = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((i, j)) = merged_at else {
            return Ok(set);
        };
        let right = set.remove(j);
        let left = set.remove(i);
        set.push(left.merged_with(&right)?);
        set.sort_by(|a, b| a.sort_key().cmp(b.sort_key()));
    }
}
