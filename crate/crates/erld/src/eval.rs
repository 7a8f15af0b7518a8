//! Pairwise evaluation against gold labels, a quadratic baseline, and a
//! runner that measures what the traversal predicate buys.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::components::{connected_components, consolidate};
use crate::document::{Document, DocumentId, Entity};
use crate::error::{ErldError, Result};
use crate::index::build_indexes;
use crate::matching::{MatchFunction, RuleSet, TraversalSetsOracle, WorkItem};
use crate::pipeline::{resolve_batch, ResolveConfig, RunStats};
use crate::schema::SchemaConfig;
use crate::traversal::{all_traversal_sets, TraversalConfig};

/// Pair-counting comparison of a predicted clustering against gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub true_pairs: u64,
    pub predicted_pairs: u64,
    pub correct_pairs: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Computes pairwise precision, recall, and F1 from two labelings of the
/// same documents. A side with no positive pairs scores 1.0 on its own
/// ratio, since it asserts nothing that could be wrong.
pub fn pairwise_metrics(
    predicted: &BTreeMap<DocumentId, String>,
    gold: &BTreeMap<DocumentId, String>,
) -> Result<PairMetrics> {
    for doc in gold.keys() {
        if !predicted.contains_key(doc) {
            return Err(ErldError::CoverageMismatch(format!(
                "gold document {doc} has no prediction"
            )));
        }
    }
    for doc in predicted.keys() {
        if !gold.contains_key(doc) {
            return Err(ErldError::CoverageMismatch(format!(
                "predicted document {doc} is not in the gold standard"
            )));
        }
    }

    let mut gold_sizes: BTreeMap<&String, u64> = BTreeMap::new();
    for label in gold.values() {
        *gold_sizes.entry(label).or_default() += 1;
    }
    let mut predicted_sizes: BTreeMap<&String, u64> = BTreeMap::new();
    for label in predicted.values() {
        *predicted_sizes.entry(label).or_default() += 1;
    }
    let mut joint_sizes: BTreeMap<(&String, &String), u64> = BTreeMap::new();
    for (doc, predicted_label) in predicted {
        let gold_label = &gold[doc];
        *joint_sizes.entry((predicted_label, gold_label)).or_default() += 1;
    }

    let true_pairs: u64 = gold_sizes.values().map(|&n| pairs(n)).sum();
    let predicted_pairs: u64 = predicted_sizes.values().map(|&n| pairs(n)).sum();
    let correct_pairs: u64 = joint_sizes.values().map(|&n| pairs(n)).sum();

    let precision = if predicted_pairs == 0 {
        1.0
    } else {
        correct_pairs as f64 / predicted_pairs as f64
    };
    let recall = if true_pairs == 0 {
        1.0
    } else {
        correct_pairs as f64 / true_pairs as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PairMetrics {
        true_pairs,
        predicted_pairs,
        correct_pairs,
        precision,
        recall,
        f1,
    })
}

/// Document labels induced by a set of entities.
pub fn entity_labels(entities: &[Entity]) -> BTreeMap<DocumentId, String> {
    let mut labels = BTreeMap::new();
    for entity in entities {
        for member in &entity.members {
            labels.insert(member.clone(), entity.id.to_string());
        }
    }
    labels
}

/// Reads tab-separated `document_id<TAB>label` lines.
pub fn read_labels_tsv<R: BufRead>(reader: R) -> Result<BTreeMap<DocumentId, String>> {
    let mut labels = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, '\t');
        let (Some(doc), Some(label)) = (fields.next(), fields.next()) else {
            return Err(ErldError::Corpus {
                line: idx + 1,
                message: "expected two tab-separated fields".into(),
            });
        };
        if label.trim().is_empty() {
            return Err(ErldError::Corpus {
                line: idx + 1,
                message: "empty label".into(),
            });
        }
        if labels
            .insert(DocumentId::from(doc.trim()), label.trim().to_string())
            .is_some()
        {
            return Err(ErldError::Corpus {
                line: idx + 1,
                message: format!("document {} labeled twice", doc.trim()),
            });
        }
    }
    Ok(labels)
}

pub fn write_labels_tsv<W: Write>(
    mut writer: W,
    labels: &BTreeMap<DocumentId, String>,
) -> Result<()> {
    for (doc, label) in labels {
        writeln!(writer, "{doc}\t{label}")?;
    }
    Ok(())
}

/// Result of the quadratic reference resolution.
#[derive(Debug)]
pub struct BaselineOutcome {
    pub entities: Vec<Entity>,
    /// Match evaluations performed: all document pairs, each exactly once.
    pub evaluations: u64,
    pub wall: Duration,
}

/// Resolves a corpus by evaluating every document pair and taking connected
/// components of the matches. No blocking, no merging during comparison, no
/// caching: the honest quadratic reference.
pub fn all_pairs_baseline(
    docs: Vec<Document>,
    schema: &SchemaConfig,
    rules: &RuleSet,
    traversal: &TraversalConfig,
) -> Result<BaselineOutcome> {
    let started = Instant::now();
    let (pk, inverted) = build_indexes(&docs, schema);
    drop(docs);
    let sets = all_traversal_sets(&pk, &inverted, schema, traversal);
    let oracle = TraversalSetsOracle::new(&sets);

    let items: Vec<WorkItem> = pk.documents().map(WorkItem::from_document).collect();
    let mut evaluations = 0u64;
    let mut edges: Vec<(DocumentId, DocumentId)> = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            evaluations += 1;
            if rules.is_match(&items[i], &items[j], &oracle) {
                edges.push((items[i].doc.id.clone(), items[j].doc.id.clone()));
            }
        }
    }
    let all_ids: Vec<DocumentId> = pk.ids().cloned().collect();
    let components = connected_components(&all_ids, &edges)?;
    let entities = consolidate(components, &pk)?;
    Ok(BaselineOutcome {
        entities,
        evaluations,
        wall: started.elapsed(),
    })
}

/// Side-by-side resolution of one corpus under two rule sets.
#[derive(Debug)]
pub struct BenefitReport {
    pub with_traversal: PairMetrics,
    pub without_traversal: PairMetrics,
    pub with_stats: RunStats,
    pub without_stats: RunStats,
    /// recall(with) - recall(without).
    pub recall_gain: f64,
    /// precision(without) - precision(with); negative when traversal helps
    /// precision too.
    pub precision_drop: f64,
    pub recall_strictly_higher: bool,
}

/// Resolves the corpus twice, with and without traversal rules, and
/// evaluates both against the gold labels.
pub fn traversal_benefit(
    docs: &[Document],
    schema: &SchemaConfig,
    rules_with: &RuleSet,
    rules_without: &RuleSet,
    config: &ResolveConfig,
    gold: &BTreeMap<DocumentId, String>,
) -> Result<BenefitReport> {
    let (state_with, with_stats) = resolve_batch(docs.to_vec(), schema, rules_with, config)?;
    let (state_without, without_stats) =
        resolve_batch(docs.to_vec(), schema, rules_without, config)?;
    let with_traversal = pairwise_metrics(&entity_labels(&state_with.entities), gold)?;
    let without_traversal = pairwise_metrics(&entity_labels(&state_without.entities), gold)?;
    Ok(BenefitReport {
        recall_gain: with_traversal.recall - without_traversal.recall,
        precision_drop: without_traversal.precision - with_traversal.precision,
        recall_strictly_higher: with_traversal.recall > without_traversal.recall,
        with_traversal,
        without_traversal,
        with_stats,
        without_stats,
    })
}
