//! Match rules and their evaluation over work items.
//!
//! A rule set is a disjunction of rules; each rule is a conjunction of
//! predicates. Hard attributes compare by exact value intersection, soft
//! attributes by maximum pairwise similarity against a threshold, and the
//! traversal predicate asks whether either item lies in the other's
//! traversal set. Outcomes are cached by member-set digest pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::document::{member_set_digest, merge, Document, DocumentId, Entity, EntityId};
use crate::error::{ErldError, Result};
use crate::pair_cache::{pair_key, PairCache};
use crate::schema::SchemaConfig;
use crate::similarity::Metric;
use crate::traversal::TraversalSet;

/// Unit of match evaluation: a document (possibly merged) plus the source
/// members and previously resolved entities it stands for.
#[derive(Debug, Clone)]
pub struct WorkItem {
    pub doc: Document,
    pub members: BTreeSet<DocumentId>,
    pub origin_entities: BTreeSet<EntityId>,
    pub digest: u128,
}

impl WorkItem {
    pub fn from_document(doc: &Document) -> WorkItem {
        let mut members = BTreeSet::new();
        members.insert(doc.id.clone());
        let digest = member_set_digest(&members);
        WorkItem {
            doc: doc.clone(),
            members,
            origin_entities: BTreeSet::new(),
            digest,
        }
    }

    pub fn from_entity(entity: &Entity) -> WorkItem {
        let mut origins = BTreeSet::new();
        origins.insert(entity.id.clone());
        let digest = member_set_digest(&entity.members);
        WorkItem {
            doc: entity.merged.clone(),
            members: entity.members.clone(),
            origin_entities: origins,
            digest,
        }
    }

    /// True for an item standing for exactly one source document.
    pub fn is_single_document(&self) -> bool {
        self.members.len() == 1 && self.origin_entities.is_empty()
    }

    /// Merges two items: attribute union plus member and origin union.
    pub fn merged_with(&self, other: &WorkItem) -> Result<WorkItem> {
        let doc = merge([&self.doc, &other.doc])?;
        let mut members = self.members.clone();
        members.extend(other.members.iter().cloned());
        let mut origins = self.origin_entities.clone();
        origins.extend(other.origin_entities.iter().cloned());
        let digest = member_set_digest(&members);
        Ok(WorkItem {
            doc,
            members,
            origin_entities: origins,
            digest,
        })
    }

    /// Deterministic ordering key: the smallest member id.
    pub fn sort_key(&self) -> &DocumentId {
        self.members.iter().next().expect("items have members")
    }
}

/// Answers whether two items are related by reference traversal.
pub trait TraversalOracle {
    fn related(&self, a: &WorkItem, b: &WorkItem) -> bool;
}

/// Oracle backed by per-document traversal sets. The relation is evaluated
/// in both directions, so co-blocking asymmetry does not hide links.
pub struct TraversalSetsOracle<'a> {
    sets: &'a BTreeMap<DocumentId, TraversalSet>,
}

impl<'a> TraversalSetsOracle<'a> {
    pub fn new(sets: &'a BTreeMap<DocumentId, TraversalSet>) -> Self {
        TraversalSetsOracle { sets }
    }

    fn one_direction(&self, from: &WorkItem, to: &WorkItem) -> bool {
        for member in &from.members {
            let Some(ts) = self.sets.get(member) else {
                continue;
            };
            if ts.docs.iter().any(|d| to.members.contains(d)) {
                return true;
            }
            if ts
                .entities
                .iter()
                .any(|e| to.origin_entities.contains(e))
            {
                return true;
            }
        }
        false
    }
}

impl TraversalOracle for TraversalSetsOracle<'_> {
    fn related(&self, a: &WorkItem, b: &WorkItem) -> bool {
        self.one_direction(a, b) || self.one_direction(b, a)
    }
}

/// Oracle for contexts without traversal information.
pub struct NoTraversal;

impl TraversalOracle for NoTraversal {
    fn related(&self, _: &WorkItem, _: &WorkItem) -> bool {
        false
    }
}

/// Pluggable pair classifier. Rule sets are the default implementation; any
/// scorer mapping two items to a boolean can slot in instead.
pub trait MatchFunction {
    fn is_match(&self, a: &WorkItem, b: &WorkItem, traversal: &dyn TraversalOracle) -> bool;
}

/// Wire form of one conjunct.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjunctConfig {
    pub predicate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

/// Wire form of one rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub conjuncts: Vec<ConjunctConfig>,
}

/// Wire form of the rule set file: `{"rules": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSetConfig {
    pub rules: Vec<RuleConfig>,
}

#[derive(Debug, Clone, PartialEq)]
enum Predicate {
    HardEquality {
        attribute: String,
    },
    Similar {
        attribute: String,
        metric: Metric,
        threshold: f64,
    },
    InTraversalSet,
}

#[derive(Debug, Clone)]
struct Rule {
    name: String,
    predicates: Vec<Predicate>,
}

/// A validated, compiled rule set.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<Rule>,
    config: RuleSetConfig,
}

impl RuleSet {
    pub fn from_json(text: &str, schema: &SchemaConfig) -> Result<RuleSet> {
        let config: RuleSetConfig = serde_json::from_str(text)?;
        RuleSet::compile(config, schema)
    }

    pub fn load(path: &Path, schema: &SchemaConfig) -> Result<RuleSet> {
        let text = std::fs::read_to_string(path)?;
        RuleSet::from_json(&text, schema)
    }

    pub fn compile(config: RuleSetConfig, schema: &SchemaConfig) -> Result<RuleSet> {
        if config.rules.is_empty() {
            return Err(ErldError::Config("rule set declares no rules".into()));
        }
        let mut rules = Vec::with_capacity(config.rules.len());
        for (i, rule) in config.rules.iter().enumerate() {
            let name = rule
                .name
                .clone()
                .unwrap_or_else(|| format!("rule{}", i + 1));
            if rule.conjuncts.is_empty() {
                return Err(ErldError::Config(format!("{name} has no conjuncts")));
            }
            let mut predicates = Vec::with_capacity(rule.conjuncts.len());
            for conjunct in &rule.conjuncts {
                predicates.push(compile_conjunct(conjunct, schema, &name)?);
            }
            rules.push(Rule { name, predicates });
        }
        Ok(RuleSet { rules, config })
    }

    pub fn config(&self) -> &RuleSetConfig {
        &self.config
    }

    pub fn rule_names(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.name.as_str()).collect()
    }

    /// True when any rule's traversal predicate could fire.
    pub fn uses_traversal(&self) -> bool {
        self.rules
            .iter()
            .any(|r| r.predicates.iter().any(|p| *p == Predicate::InTraversalSet))
    }

    /// The first rule that accepts the pair, mainly for diagnostics.
    pub fn first_matching_rule(
        &self,
        a: &WorkItem,
        b: &WorkItem,
        traversal: &dyn TraversalOracle,
    ) -> Option<&str> {
        self.rules
            .iter()
            .find(|rule| {
                rule.predicates
                    .iter()
                    .all(|p| evaluate_predicate(p, a, b, traversal))
            })
            .map(|r| r.name.as_str())
    }
}

impl MatchFunction for RuleSet {
    fn is_match(&self, a: &WorkItem, b: &WorkItem, traversal: &dyn TraversalOracle) -> bool {
        self.first_matching_rule(a, b, traversal).is_some()
    }
}

fn compile_conjunct(
    conjunct: &ConjunctConfig,
    schema: &SchemaConfig,
    rule: &str,
) -> Result<Predicate> {
    match conjunct.predicate.as_str() {
        "in_traversal_set" => {
            if conjunct.attribute.is_some() || conjunct.threshold.is_some() {
                return Err(ErldError::Config(format!(
                    "{rule}: in_traversal_set takes no attribute or threshold"
                )));
            }
            Ok(Predicate::InTraversalSet)
        }
        "same" => {
            let attribute = conjunct.attribute.clone().ok_or_else(|| {
                ErldError::Config(format!("{rule}: same predicate needs an attribute"))
            })?;
            let spec = schema.attribute(&attribute).ok_or_else(|| {
                ErldError::Config(format!(
                    "{rule}: attribute {attribute} is not in the schema"
                ))
            })?;
            if spec.match_role.is_hard() {
                if conjunct.threshold.is_some() || conjunct.metric.is_some() {
                    return Err(ErldError::Config(format!(
                        "{rule}: {attribute} is hard, equality takes no metric or threshold"
                    )));
                }
                Ok(Predicate::HardEquality { attribute })
            } else {
                let defaults = spec.similarity.clone().unwrap_or_default();
                let metric = match &conjunct.metric {
                    Some(name) => Metric::parse(name)?,
                    None => Metric::parse(&defaults.metric)?,
                };
                let threshold = conjunct.threshold.unwrap_or(defaults.threshold);
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(ErldError::Config(format!(
                        "{rule}: threshold {threshold} for {attribute} is out of [0, 1]"
                    )));
                }
                Ok(Predicate::Similar {
                    attribute,
                    metric,
                    threshold,
                })
            }
        }
        other => Err(ErldError::Config(format!(
            "{rule}: unknown predicate {other}"
        ))),
    }
}

fn evaluate_predicate(
    predicate: &Predicate,
    a: &WorkItem,
    b: &WorkItem,
    traversal: &dyn TraversalOracle,
) -> bool {
    match predicate {
        Predicate::HardEquality { attribute } => {
            let (Some(va), Some(vb)) = (a.doc.attrs.get(attribute), b.doc.attrs.get(attribute))
            else {
                return false;
            };
            va.intersection(vb).next().is_some()
        }
        Predicate::Similar {
            attribute,
            metric,
            threshold,
        } => {
            let (Some(va), Some(vb)) = (a.doc.attrs.get(attribute), b.doc.attrs.get(attribute))
            else {
                return false;
            };
            for x in va {
                let x = x.to_lowercase();
                for y in vb {
                    if metric.score(&x, &y.to_lowercase()) >= *threshold {
                        return true;
                    }
                }
            }
            false
        }
        // Checked in both orders so the match function stays commutative
        // even when an oracle only knows one direction of the relation.
        Predicate::InTraversalSet => traversal.related(a, b) || traversal.related(b, a),
    }
}

/// Reference pluggable scorer: a weighted sum of per-attribute similarity
/// scores compared against a threshold.
#[derive(Debug, Clone)]
pub struct LinearScorer {
    pub features: Vec<(String, Metric, f64)>,
    pub threshold: f64,
}

impl LinearScorer {
    pub fn score(&self, a: &WorkItem, b: &WorkItem) -> f64 {
        let mut total = 0.0;
        for (attribute, metric, weight) in &self.features {
            let (Some(va), Some(vb)) = (a.doc.attrs.get(attribute), b.doc.attrs.get(attribute))
            else {
                continue;
            };
            let mut best: f64 = 0.0;
            for x in va {
                let x = x.to_lowercase();
                for y in vb {
                    best = best.max(metric.score(&x, &y.to_lowercase()));
                }
            }
            total += weight * best;
        }
        total
    }
}

impl MatchFunction for LinearScorer {
    fn is_match(&self, a: &WorkItem, b: &WorkItem, _: &dyn TraversalOracle) -> bool {
        self.score(a, b) >= self.threshold
    }
}

/// Match evaluation through the pair cache, with counters split between
/// all fresh evaluations and those whose sides are both single documents.
pub struct CachedMatcher<'a> {
    function: &'a dyn MatchFunction,
    cache: &'a mut PairCache,
    fresh_document_pairs: u64,
}

impl<'a> CachedMatcher<'a> {
    pub fn new(function: &'a dyn MatchFunction, cache: &'a mut PairCache) -> CachedMatcher<'a> {
        CachedMatcher {
            function,
            cache,
            fresh_document_pairs: 0,
        }
    }

    pub fn matches(
        &mut self,
        a: &WorkItem,
        b: &WorkItem,
        traversal: &dyn TraversalOracle,
    ) -> bool {
        let key = pair_key(a.digest, b.digest);
        if let Some(cached) = self.cache.lookup(key) {
            return cached;
        }
        let outcome = self.function.is_match(a, b, traversal);
        self.cache.record(key, outcome);
        if a.is_single_document() && b.is_single_document() {
            self.fresh_document_pairs += 1;
        }
        outcome
    }

    /// Fresh evaluations where both sides were single source documents.
    pub fn fresh_document_pairs(&self) -> u64 {
        self.fresh_document_pairs
    }

    pub fn cache(&self) -> &PairCache {
        self.cache
    }
}
