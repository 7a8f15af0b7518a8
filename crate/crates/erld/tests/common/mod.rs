//! Shared fixture: a small corpus of identity documents for four people,
//! plus a five-document reference chain.
#![allow(dead_code)] // each test target uses a different slice of the fixture
//!
//! The corpus is built so that every consolidation path matters: one pair
//! merges only through a reference walk, one only through attribute
//! equality, one only after an intermediate merge, and one document stays
//! alone despite being referenced by a stranger.

use erld::matching::{RuleSet, RuleSetConfig};
use erld::Document;
use erld::SchemaConfig;

pub fn fixture_schema() -> SchemaConfig {
    SchemaConfig::from_json(
        r#"{
            "document_types": ["PAN", "VOT", "DL", "BAN"],
            "primary_keys": {
                "PAN": "pan_no",
                "VOT": "voter_no",
                "DL": "licence_no",
                "BAN": "account_no"
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
                {"name": "pan_no", "match": "unique", "domain": "PAN"},
                {"name": "voter_no", "match": "unique", "domain": "VOT"},
                {"name": "licence_no", "match": "unique", "domain": "DL"},
                {"name": "account_no", "match": "unique", "domain": "BAN"}
            ]
        }"#,
    )
    .expect("fixture schema is valid")
}

pub fn fixture_rules_config() -> RuleSetConfig {
    serde_json::from_str(
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
    .expect("fixture rules parse")
}

pub fn fixture_rule_set(schema: &SchemaConfig) -> RuleSet {
    RuleSet::compile(fixture_rules_config(), schema).expect("fixture rules compile")
}

fn doc(id: &str, doc_type: &str, pairs: &[(&str, &str)]) -> Document {
    let mut d = Document::new(id, doc_type);
    for (attr, value) in pairs {
        d.add_value(attr, *value);
    }
    d
}

/// Eleven documents describing four people.
///
/// Amit Kumar: PAN11 -> VOT22 <- DL33, and BAN44 shares phone and address
/// with DL33 but carries no references. Anita Sharma: PAN55 and DL77 share
/// an address, BAN80 mentions the licence only in free text. Rahul Verma:
/// three documents tied by textual attributes alone. Suresh Patel's licence
/// mentions Rahul's bank account but belongs to someone else.
pub fn fixture_documents() -> Vec<Document> {
    vec![
        doc(
            "PAN11",
            "PAN",
            &[
                ("name", "Amit Kumar"),
                ("date_of_birth", "1985-03-12"),
                ("proof_id", "VOT22"),
                ("pan_no", "11"),
            ],
        ),
        doc(
            "VOT22",
            "VOT",
            &[
                ("name", "Amit Kumar"),
                ("address", "Flat 9 Rajaji Nagar Delhi"),
                ("voter_no", "22"),
            ],
        ),
        doc(
            "DL33",
            "DL",
            &[
                ("name", "Amit Kumar"),
                ("phone_number", "9811001100"),
                ("address", "45 Shastri Marg Shivaji Nagar Pune Maharashtra"),
                ("licence_no", "33"),
                ("proof_id", "VOT22"),
            ],
        ),
        doc(
            "BAN44",
            "BAN",
            &[
                ("name", "Amit Kumar"),
                ("phone_number", "9811001100"),
                ("address", "45 Shastri Marg Shivaji Nagar Pune Maharashtra"),
                ("account_no", "44"),
            ],
        ),
        doc(
            "PAN55",
            "PAN",
            &[
                ("name", "Anita Sharma"),
                ("date_of_birth", "1990-07-21"),
                ("phone_number", "9900112233"),
                (
                    "address",
                    "12 MG Road 4th Block Indiranagar Bengaluru Karnataka 560038",
                ),
                ("pan_no", "55"),
            ],
        ),
        doc(
            "DL77",
            "DL",
            &[
                ("name", "Anita Sharma"),
                ("phone_number", "9900112233"),
                ("email_id", "anita.s@example.com"),
                (
                    "address",
                    "12 MG Road 4th Block Indiranagar Bengaluru Karnataka 560038",
                ),
                ("licence_no", "77"),
            ],
        ),
        doc(
            "BAN80",
            "BAN",
            &[
                ("name", "Anita Sharma"),
                ("phone_number", "9900112233"),
                ("date_of_birth", "1990-07-21"),
                ("address", "88 Brigade Road Bengaluru"),
                ("account_no", "80"),
                ("document_details", "Driving License ID:DL77"),
            ],
        ),
        doc(
            "PAN88",
            "PAN",
            &[
                ("name", "Rahul Verma"),
                ("date_of_birth", "1978-11-02"),
                ("address", "7 Park Street Salt Lake Kolkata West Bengal"),
                ("email_id", "rahul.v@example.com"),
                ("pan_no", "88"),
            ],
        ),
        doc(
            "BAN91",
            "BAN",
            &[
                ("name", "Rahul Verma"),
                ("date_of_birth", "1978-11-02"),
                ("address", "7 Park Street Salt Lake Kolkata West Bengal"),
                ("account_no", "91"),
                ("phone_number", "9830012345"),
            ],
        ),
        doc(
            "VOT99",
            "VOT",
            &[
                ("name", "Rahul Verma"),
                ("email_id", "rahul.v@example.com"),
                ("address", "7 Park Street Salt Lake Kolkata West Bengal"),
                ("voter_no", "99"),
            ],
        ),
        doc(
            "DL12",
            "DL",
            &[
                ("name", "Suresh Patel"),
                ("licence_no", "12"),
                ("address", "31 Ring Road Surat Gujarat"),
                (
                    "document_details",
                    "Issued against Bank Account No. BAN91 for verification",
                ),
            ],
        ),
    ]
}

/// The four expected member groups, smallest id first.
pub fn fixture_expected_groups() -> Vec<Vec<&'static str>> {
    vec![
        vec!["BAN44", "DL33", "PAN11", "VOT22"],
        vec!["BAN80", "DL77", "PAN55"],
        vec!["BAN91", "PAN88", "VOT99"],
        vec!["DL12"],
    ]
}

/// Five documents where each points at the previous one, so the first can
/// only be reached by walking reference holders upstream hop by hop.
pub fn reference_chain() -> Vec<Document> {
    vec![
        doc("PAN201", "PAN", &[("name", "Chain Start"), ("pan_no", "201")]),
        doc(
            "VOT202",
            "VOT",
            &[("name", "Chain Two"), ("voter_no", "202"), ("proof_id", "PAN201")],
        ),
        doc(
            "DL203",
            "DL",
            &[("name", "Chain Three"), ("licence_no", "203"), ("proof_id", "VOT202")],
        ),
        doc(
            "BAN204",
            "BAN",
            &[("name", "Chain Four"), ("account_no", "204"), ("proof_id", "DL203")],
        ),
        doc(
            "PAN205",
            "PAN",
            &[("name", "Chain Five"), ("pan_no", "205"), ("proof_id", "BAN204")],
        ),
    ]
}
