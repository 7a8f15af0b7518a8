//! Synthetic resident-document corpora with ground truth.
//!
//! Each generated person holds up to one document per registry domain
//! (voter roll, tax card, driving licence, bank account, phone contract).
//! Documents of one person reference each other explicitly through
//! `proof_id` or implicitly inside `document_details` free text; document
//! numbers are globally unique, so references never leak across persons.
//! A configurable share of persons are link-only: their documents agree on
//! the name but on nothing else, so only the reference trail can recover
//! them. Relatives share a surname and an address without any references,
//! which keeps those attributes non-discriminative.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::document::{Document, DocumentId};
use crate::error::Result;
use crate::matching::{RuleSet, RuleSetConfig};
use crate::schema::SchemaConfig;

pub const DOMAINS: [&str; 5] = ["VOT", "PAN", "DL", "BAN", "PHN"];

/// Tunables of the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Primary persons to generate; relatives come on top.
    pub entities: usize,
    /// Share of persons whose documents only connect through references.
    pub link_only_fraction: f64,
    /// Probability that a person holds a document in a given domain.
    pub doc_creation_prob: f64,
    /// Probability of the first relative; the second comes at half of it.
    pub relative_prob: f64,
    /// Probability of one extra reference beyond the spanning links.
    pub reference_extra_prob: f64,
    /// Probability that a spanning link is an implicit free-text mention
    /// instead of an explicit proof entry.
    pub implicit_mention_prob: f64,
}

impl Default for GeneratorConfig {
    fn default() -> GeneratorConfig {
        GeneratorConfig {
            seed: 17,
            entities: 100,
            link_only_fraction: 0.1,
            doc_creation_prob: 0.55,
            relative_prob: 0.5,
            reference_extra_prob: 0.3,
            implicit_mention_prob: 0.25,
        }
    }
}

/// A generated corpus with its ground truth.
#[derive(Debug)]
pub struct GeneratedCorpus {
    /// Documents sorted by id.
    pub documents: Vec<Document>,
    /// Gold label per document.
    pub gold: BTreeMap<DocumentId, String>,
    /// Labels of the link-only persons.
    pub link_only: BTreeSet<String>,
    /// Number of distinct gold entities.
    pub entity_count: usize,
}

const FIRST_NAMES: [&str; 24] = [
    "Amit", "Bhavna", "Chirag", "Deepa", "Esha", "Farhan", "Gauri", "Harish", "Ishita", "Jatin",
    "Kavita", "Lakshmi", "Mohan", "Nisha", "Omprakash", "Priya", "Qamar", "Rahul", "Sunita",
    "Tarun", "Usha", "Vikram", "Yamini", "Zoya",
];

const SURNAMES: [&str; 16] = [
    "Kumar", "Sharma", "Verma", "Patel", "Reddy", "Iyer", "Das", "Mehta", "Chopra", "Naidu",
    "Joshi", "Bose", "Gill", "Khanna", "Pillai", "Rathore",
];

const STREETS: [&str; 12] = [
    "MG Road", "Park Street", "Shastri Marg", "Brigade Road", "Ring Road", "Station Road",
    "Nehru Street", "Gandhi Path", "Lake View Road", "Temple Street", "Canal Road", "Mall Road",
];

const LOCALITIES: [&str; 10] = [
    "Shivaji Nagar", "Salt Lake", "Indiranagar", "Rajaji Nagar", "Civil Lines", "Sector 12",
    "Model Town", "Anna Nagar", "Kothrud", "Banjara Hills",
];

const CITIES: [(&str, &str); 8] = [
    ("Pune", "Maharashtra"),
    ("Kolkata", "West Bengal"),
    ("Bengaluru", "Karnataka"),
    ("Delhi", "Delhi"),
    ("Chennai", "Tamil Nadu"),
    ("Jaipur", "Rajasthan"),
    ("Surat", "Gujarat"),
    ("Lucknow", "Uttar Pradesh"),
];

/// Schema of the resident-document domains.
pub fn residents_schema() -> SchemaConfig {
    SchemaConfig::from_json(
        r#"{
            "document_types": ["VOT", "PAN", "DL", "BAN", "PHN"],
            "primary_keys": {
                "VOT": "voter_no",
                "PAN": "pan_no",
                "DL": "licence_no",
                "BAN": "account_no",
                "PHN": "sim_no"
            },
            "attributes": [
                {"name": "name", "match": "soft",
                 "similarity": {"metric": "jaro_winkler", "threshold": 0.9}},
                {"name": "address", "match": "soft",
                 "similarity": {"metric": "jaccard", "threshold": 0.6}},
                {"name": "date_of_birth", "match": "hard"},
                {"name": "phone_number", "match": "hard"},
                {"name": "email_id", "match": "hard"},
                {"name": "proof_id", "match": "hard", "reference": "explicit"},
                {"name": "document_details", "match": "soft", "reference": "implicit"},
                {"name": "voter_no", "match": "unique", "domain": "VOT"},
                {"name": "pan_no", "match": "unique", "domain": "PAN"},
                {"name": "licence_no", "match": "unique", "domain": "DL"},
                {"name": "account_no", "match": "unique", "domain": "BAN"},
                {"name": "sim_no", "match": "unique", "domain": "PHN"}
            ]
        }"#,
    )
    .expect("the built-in schema is valid")
}

/// The standard rule set over the resident schema. With traversal enabled
/// it adds the two link rules; without, only the textual rules remain.
pub fn residents_rules(with_traversal: bool) -> RuleSetConfig {
    let with: RuleSetConfig = serde_json::from_str(
        r#"{"rules": [
            {"name": "name_link", "conjuncts": [
                {"predicate": "same", "attribute": "name"},
                {"predicate": "in_traversal_set"}
            ]},
            {"name": "name_dob_address", "conjuncts": [
                {"predicate": "same", "attribute": "name"},
                {"predicate": "same", "attribute": "date_of_birth"},
                {"predicate": "same", "attribute": "address"}
            ]},
            {"name": "email_link", "conjuncts": [
                {"predicate": "same", "attribute": "email_id"},
                {"predicate": "in_traversal_set"}
            ]},
            {"name": "name_phone_address", "conjuncts": [
                {"predicate": "same", "attribute": "name"},
                {"predicate": "same", "attribute": "phone_number"},
                {"predicate": "same", "attribute": "address"}
            ]},
            {"name": "name_email", "conjuncts": [
                {"predicate": "same", "attribute": "name"},
                {"predicate": "same", "attribute": "email_id"}
            ]}
        ]}"#,
    )
    .expect("the built-in rules parse");
    if with_traversal {
        with
    } else {
        RuleSetConfig {
            rules: with
                .rules
                .into_iter()
                .filter(|r| {
                    r.conjuncts
                        .iter()
                        .all(|c| c.predicate != "in_traversal_set")
                })
                .collect(),
        }
    }
}

/// Compiled form of [`residents_rules`].
pub fn residents_rule_set(with_traversal: bool) -> Result<RuleSet> {
    RuleSet::compile(residents_rules(with_traversal), &residents_schema())
}

struct Counters {
    document: u64,
    phone: u64,
    email: u64,
    gold: u64,
}

struct Profile {
    name: String,
    address: String,
    dob: String,
    phone: String,
    email: String,
}

fn key_attribute(domain: &str) -> &'static str {
    match domain {
        "VOT" => "voter_no",
        "PAN" => "pan_no",
        "DL" => "licence_no",
        "BAN" => "account_no",
        _ => "sim_no",
    }
}

fn make_address(rng: &mut ChaCha8Rng) -> String {
    let (city, state) = CITIES[rng.gen_range(0..CITIES.len())];
    format!(
        "{} {} {} {} {} {}",
        rng.gen_range(1..250),
        STREETS[rng.gen_range(0..STREETS.len())],
        LOCALITIES[rng.gen_range(0..LOCALITIES.len())],
        city,
        state,
        rng.gen_range(110001..700109)
    )
}

fn make_dob(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{:04}-{:02}-{:02}",
        rng.gen_range(1950..2005),
        rng.gen_range(1..13),
        rng.gen_range(1..29)
    )
}

fn make_phone(counters: &mut Counters) -> String {
    counters.phone += 1;
    format!("9{:09}", counters.phone)
}

fn make_email(name: &str, counters: &mut Counters) -> String {
    counters.email += 1;
    let local: String = name
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(".");
    format!("{local}.{:06}@example.org", counters.email)
}

fn make_profile(rng: &mut ChaCha8Rng, counters: &mut Counters) -> Profile {
    let name = format!(
        "{} {}",
        FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())],
        SURNAMES[rng.gen_range(0..SURNAMES.len())]
    );
    Profile {
        address: make_address(rng),
        dob: make_dob(rng),
        phone: make_phone(counters),
        email: make_email(&name, counters),
        name,
    }
}

/// Which profile attributes a domain's document carries.
fn domain_attributes(domain: &str, rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let mut attrs = vec!["name"];
    match domain {
        "VOT" => {
            attrs.push("address");
            if rng.gen_bool(0.5) {
                attrs.push("date_of_birth");
            }
        }
        "PAN" => {
            attrs.push("date_of_birth");
            if rng.gen_bool(0.6) {
                attrs.push("email_id");
            }
            if rng.gen_bool(0.5) {
                attrs.push("address");
            }
        }
        "DL" => {
            attrs.push("address");
            attrs.push("date_of_birth");
            if rng.gen_bool(0.5) {
                attrs.push("phone_number");
            }
        }
        "BAN" => {
            attrs.push("phone_number");
            if rng.gen_bool(0.65) {
                attrs.push("address");
            }
            if rng.gen_bool(0.5) {
                attrs.push("email_id");
            }
            if rng.gen_bool(0.5) {
                attrs.push("date_of_birth");
            }
        }
        _ => {
            attrs.push("phone_number");
            if rng.gen_bool(0.7) {
                attrs.push("address");
            }
            if rng.gen_bool(0.4) {
                attrs.push("email_id");
            }
        }
    }
    attrs
}

struct PersonDocs {
    docs: Vec<Document>,
    label: String,
}

#[allow(clippy::too_many_arguments)]
fn make_person(
    rng: &mut ChaCha8Rng,
    config: &GeneratorConfig,
    counters: &mut Counters,
    link_only: bool,
    shared: Option<&Profile>,
    max_domains: usize,
) -> PersonDocs {
    counters.gold += 1;
    let label = format!("g{:06}", counters.gold);

    let mut profile = make_profile(rng, counters);
    if let Some(family) = shared {
        // Relatives share the surname and the household address.
        let surname = family.name.split_whitespace().last().unwrap_or("Kumar");
        profile.name = format!(
            "{} {}",
            FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())],
            surname
        );
        profile.email = make_email(&profile.name, counters);
        profile.address = family.address.clone();
    }

    let mut chosen: Vec<&str> = DOMAINS
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(config.doc_creation_prob))
        .take(max_domains)
        .collect();
    if chosen.is_empty() {
        chosen.push(DOMAINS[rng.gen_range(0..DOMAINS.len())]);
    }

    let mut dob_granted = false;
    let mut docs: Vec<Document> = Vec::with_capacity(chosen.len());
    for domain in chosen {
        counters.document += 1;
        let number = format!("{:06}", counters.document);
        let id = format!("{domain}{number}");
        let mut doc = Document::new(id, domain);
        doc.add_value(key_attribute(domain), &number);
        for attr in domain_attributes(domain, rng) {
            match attr {
                "name" => doc.add_value("name", &profile.name),
                "address" => {
                    // Link-only persons never repeat an address.
                    let value = if link_only {
                        make_address(rng)
                    } else {
                        profile.address.clone()
                    };
                    doc.add_value("address", value);
                }
                "date_of_birth" => {
                    if link_only && dob_granted {
                        continue;
                    }
                    dob_granted = true;
                    doc.add_value("date_of_birth", &profile.dob);
                }
                "phone_number" => {
                    let value = if link_only {
                        make_phone(counters)
                    } else {
                        profile.phone.clone()
                    };
                    doc.add_value("phone_number", value);
                }
                _ => {
                    let value = if link_only {
                        make_email(&profile.name, counters)
                    } else {
                        profile.email.clone()
                    };
                    doc.add_value("email_id", value);
                }
            }
        }
        docs.push(doc);
    }

    // Spanning references keep every person internally reachable; extras
    // thicken the trail. Some links hide inside free text.
    for i in 1..docs.len() {
        let target = docs[rng.gen_range(0..i)].id.to_string();
        if rng.gen_bool(config.implicit_mention_prob) {
            docs[i].add_value(
                "document_details",
                format!("Issued against record {target} during verification"),
            );
        } else {
            docs[i].add_value("proof_id", target);
        }
    }
    if docs.len() > 2 {
        for i in 0..docs.len() {
            if rng.gen_bool(config.reference_extra_prob) {
                let j = rng.gen_range(0..docs.len());
                if i != j {
                    let target = docs[j].id.to_string();
                    docs[i].add_value("proof_id", target);
                }
            }
        }
    }

    PersonDocs { docs, label }
}

/// Generates a corpus. The same configuration always produces the same
/// corpus, byte for byte.
pub fn generate(config: &GeneratorConfig) -> GeneratedCorpus {
    let mut counters = Counters {
        document: 0,
        phone: 0,
        email: 0,
        gold: 0,
    };
    let mut documents = Vec::new();
    let mut gold = BTreeMap::new();
    let mut link_only_labels = BTreeSet::new();

    for ordinal in 0..config.entities {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(ordinal as u64 + 1);

        let link_only = rng.gen_bool(config.link_only_fraction);
        let person = make_person(&mut rng, config, &mut counters, link_only, None, 5);
        if link_only {
            link_only_labels.insert(person.label.clone());
        }
        let family_profile = if link_only {
            None
        } else {
            Some(Profile {
                name: person.docs[0]
                    .values("name")
                    .next()
                    .expect("primary documents carry a name")
                    .to_string(),
                address: person
                    .docs
                    .iter()
                    .flat_map(|d| d.values("address"))
                    .next()
                    .map(str::to_string)
                    .unwrap_or_else(|| make_address(&mut rng)),
                dob: String::new(),
                phone: String::new(),
                email: String::new(),
            })
        };
        for doc in person.docs {
            gold.insert(doc.id.clone(), person.label.clone());
            documents.push(doc);
        }

        // Relatives: same household, no references to the primary.
        if let Some(family) = &family_profile {
            let slots = [config.relative_prob, config.relative_prob / 2.0];
            for p in slots {
                if !rng.gen_bool(p) {
                    continue;
                }
                let relative = make_person(&mut rng, config, &mut counters, false, Some(family), 2);
                for doc in relative.docs {
                    gold.insert(doc.id.clone(), relative.label.clone());
                    documents.push(doc);
                }
            }
        }
    }

    documents.sort_by(|a, b| a.id.cmp(&b.id));
    GeneratedCorpus {
        documents,
        gold,
        link_only: link_only_labels,
        entity_count: counters.gold as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{entity_labels, pairwise_metrics};
    use crate::pipeline::{resolve_batch, ResolveConfig};
    use crate::traversal::{all_traversal_sets, TraversalConfig};
    use std::collections::BTreeSet;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let config = GeneratorConfig {
            entities: 30,
            ..GeneratorConfig::default()
        };
        let a = generate(&config);
        let b = generate(&config);
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.gold, b.gold);

        let other = generate(&GeneratorConfig {
            seed: config.seed + 1,
            ..config
        });
        assert_ne!(a.documents, other.documents);
    }

    #[test]
    fn corpus_is_well_formed() {
        let schema = residents_schema();
        let corpus = generate(&GeneratorConfig {
            entities: 50,
            ..GeneratorConfig::default()
        });
        let mut ids = BTreeSet::new();
        let mut per_person_domains: BTreeMap<&String, BTreeSet<&str>> = BTreeMap::new();
        for doc in &corpus.documents {
            assert!(ids.insert(doc.id.clone()), "duplicate id {}", doc.id);
            assert!(doc.values("name").next().is_some(), "{} has no name", doc.id);
            let doc_type = doc.types.iter().next().unwrap();
            assert!(schema.is_known_type(doc_type));
            let key = schema.key_attribute(doc_type).unwrap();
            assert_eq!(doc.values(key).count(), 1);
            let label = corpus.gold.get(&doc.id).expect("every document has gold");
            let domains = per_person_domains.entry(label).or_default();
            assert!(
                domains.insert(doc_type.as_str()),
                "{label} holds two {doc_type} documents"
            );
        }
        assert_eq!(corpus.gold.len(), corpus.documents.len());
        assert_eq!(per_person_domains.len(), corpus.entity_count);
        assert!(corpus.entity_count >= 50);
    }

    #[test]
    fn references_never_cross_gold_entities() {
        let corpus = generate(&GeneratorConfig {
            entities: 60,
            ..GeneratorConfig::default()
        });
        let by_id: BTreeMap<&DocumentId, &Document> =
            corpus.documents.iter().map(|d| (&d.id, d)).collect();
        for doc in &corpus.documents {
            let own = &corpus.gold[&doc.id];
            for target in doc.values("proof_id") {
                let target_id = DocumentId::from(target);
                let target_doc = by_id.get(&target_id).expect("references resolve");
                assert_eq!(&corpus.gold[&target_doc.id], own);
            }
            for text in doc.values("document_details") {
                let mentioned = text
                    .split_whitespace()
                    .find(|w| by_id.contains_key(&DocumentId::from(*w)))
                    .expect("mention embeds a document id");
                let target_id = DocumentId::from(mentioned);
                assert_eq!(&corpus.gold[&target_id], own);
            }
        }
    }

    #[test]
    fn traversal_stays_within_the_owning_person() {
        let schema = residents_schema();
        let corpus = generate(&GeneratorConfig {
            entities: 40,
            ..GeneratorConfig::default()
        });
        let (pk, inverted) = crate::index::build_indexes(&corpus.documents, &schema);
        let sets = all_traversal_sets(&pk, &inverted, &schema, &TraversalConfig::default());
        for (owner, ts) in &sets {
            assert!(ts.docs.len() <= 4, "{owner} walks to {} documents", ts.docs.len());
            for member in &ts.docs {
                assert_eq!(
                    corpus.gold[member], corpus.gold[owner],
                    "{owner} walked into a different person"
                );
            }
        }
    }

    #[test]
    fn link_only_persons_exist_and_need_references() {
        let corpus = generate(&GeneratorConfig {
            entities: 120,
            ..GeneratorConfig::default()
        });
        assert!(!corpus.link_only.is_empty());
        // Multi-document link-only persons share no hard attribute values.
        let mut checked = 0;
        for label in &corpus.link_only {
            let docs: Vec<&Document> = corpus
                .documents
                .iter()
                .filter(|d| &corpus.gold[&d.id] == label)
                .collect();
            for i in 0..docs.len() {
                for j in i + 1..docs.len() {
                    for attr in ["date_of_birth", "phone_number", "email_id", "address"] {
                        let a: BTreeSet<&str> = docs[i].values(attr).collect();
                        let b: BTreeSet<&str> = docs[j].values(attr).collect();
                        assert!(
                            a.intersection(&b).next().is_none(),
                            "link-only {label} shares {attr}"
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0, "no multi-document link-only person generated");
    }

    #[test]
    fn resolution_is_precise_and_references_lift_recall() {
        let schema = residents_schema();
        let corpus = generate(&GeneratorConfig {
            entities: 60,
            seed: 23,
            ..GeneratorConfig::default()
        });
        let config = ResolveConfig::default();
        let with = residents_rule_set(true).unwrap();
        let without = residents_rule_set(false).unwrap();

        let (state_with, _) =
            resolve_batch(corpus.documents.clone(), &schema, &with, &config).unwrap();
        let (state_without, _) =
            resolve_batch(corpus.documents.clone(), &schema, &without, &config).unwrap();
        let m_with =
            pairwise_metrics(&entity_labels(&state_with.entities), &corpus.gold).unwrap();
        let m_without =
            pairwise_metrics(&entity_labels(&state_without.entities), &corpus.gold).unwrap();

        assert_eq!(m_with.precision, 1.0, "traversal rules must stay precise");
        assert_eq!(m_without.precision, 1.0, "textual rules must stay precise");
        assert!(
            m_with.recall > m_without.recall,
            "references should recover pairs textual rules miss ({} vs {})",
            m_with.recall,
            m_without.recall
        );
        assert!(m_with.recall > 0.95, "recall with references: {}", m_with.recall);
    }
}
