//! Schema configuration: attribute roles, document types, primary key rules.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ErldError, Result};

/// How an attribute participates in matching.
///
/// `Hard` attributes compare by textual identity, `Soft` by a similarity
/// metric with a threshold, and `Unique` attributes are hard attributes that
/// additionally identify a document within its type (at most one value per
/// source document).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRole {
    Soft,
    Hard,
    Unique,
}

impl MatchRole {
    pub fn is_hard(self) -> bool {
        matches!(self, MatchRole::Hard | MatchRole::Unique)
    }
}

/// Whether an attribute's values refer to other documents.
///
/// Explicit values are primary keys verbatim; implicit values are free text
/// that may mention keys among other tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefRole {
    Explicit,
    Implicit,
}

/// Similarity settings for a soft attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    pub metric: String,
    pub threshold: f64,
}

impl Default for SimilaritySpec {
    fn default() -> Self {
        SimilaritySpec {
            metric: "jaro_winkler".to_string(),
            threshold: 0.9,
        }
    }
}

/// One attribute declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(rename = "match", default = "default_match_role")]
    pub match_role: MatchRole,
    #[serde(rename = "reference", default, skip_serializing_if = "Option::is_none")]
    pub ref_role: Option<RefRole>,
    /// Restricts the attribute to one document type; absent means all types.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// Metric and threshold used when a rule tests this attribute softly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilaritySpec>,
}

fn default_match_role() -> MatchRole {
    MatchRole::Soft
}

/// The schema: document types, their primary key attributes, and the
/// attribute declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub document_types: Vec<String>,
    /// For each document type, the unique attribute whose value (prefixed
    /// with the type) forms the primary key.
    pub primary_keys: BTreeMap<String, String>,
    pub attributes: Vec<AttributeSpec>,
}

impl SchemaConfig {
    pub fn from_json(text: &str) -> Result<SchemaConfig> {
        let schema: SchemaConfig = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<SchemaConfig> {
        let text = std::fs::read_to_string(path)?;
        SchemaConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.document_types.is_empty() {
            return Err(ErldError::Schema("no document types declared".into()));
        }
        let types: BTreeSet<&str> = self.document_types.iter().map(|s| s.as_str()).collect();
        if types.len() != self.document_types.len() {
            return Err(ErldError::Schema("duplicate document type".into()));
        }
        for spec in &self.attributes {
            if spec.name.is_empty() {
                return Err(ErldError::Schema("attribute with empty name".into()));
            }
            if let Some(domain) = &spec.domain {
                if !types.contains(domain.as_str()) {
                    return Err(ErldError::Schema(format!(
                        "attribute {} is scoped to unknown document type {}",
                        spec.name, domain
                    )));
                }
            }
            if spec.similarity.is_some() && spec.match_role.is_hard() {
                return Err(ErldError::Schema(format!(
                    "attribute {} is hard but declares a similarity metric",
                    spec.name
                )));
            }
        }
        // Attribute names must be unambiguous within every document type.
        for doc_type in &self.document_types {
            let mut seen = BTreeSet::new();
            for spec in self.attributes_for_type(doc_type) {
                if !seen.insert(spec.name.as_str()) {
                    return Err(ErldError::Schema(format!(
                        "attribute {} declared twice for document type {}",
                        spec.name, doc_type
                    )));
                }
            }
        }
        for doc_type in &self.document_types {
            let key_attr = self.primary_keys.get(doc_type).ok_or_else(|| {
                ErldError::Schema(format!("document type {doc_type} has no primary key rule"))
            })?;
            let spec = self
                .attributes_for_type(doc_type)
                .find(|s| &s.name == key_attr)
                .ok_or_else(|| {
                    ErldError::Schema(format!(
                        "primary key attribute {key_attr} is not declared for type {doc_type}"
                    ))
                })?;
            if spec.match_role != MatchRole::Unique {
                return Err(ErldError::Schema(format!(
                    "primary key attribute {key_attr} of type {doc_type} must be unique"
                )));
            }
        }
        for declared in self.primary_keys.keys() {
            if !types.contains(declared.as_str()) {
                return Err(ErldError::Schema(format!(
                    "primary key rule references unknown document type {declared}"
                )));
            }
        }
        Ok(())
    }

    /// Attribute declarations that apply to one document type.
    pub fn attributes_for_type<'a>(
        &'a self,
        doc_type: &'a str,
    ) -> impl Iterator<Item = &'a AttributeSpec> {
        self.attributes
            .iter()
            .filter(move |s| s.domain.as_deref().map_or(true, |d| d == doc_type))
    }

    /// Looks up an attribute declaration by name (any domain).
    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|s| s.name == name)
    }

    pub fn is_known_type(&self, doc_type: &str) -> bool {
        self.document_types.iter().any(|t| t == doc_type)
    }

    /// The primary key attribute for a document type.
    pub fn key_attribute(&self, doc_type: &str) -> Option<&str> {
        self.primary_keys.get(doc_type).map(|s| s.as_str())
    }

    /// Builds a primary key from a type and the unique attribute value.
    pub fn build_key(&self, doc_type: &str, key_value: &str) -> String {
        format!("{doc_type}{key_value}")
    }

    /// Attributes whose values feed the reference index.
    pub fn referential_attributes(&self) -> impl Iterator<Item = &AttributeSpec> {
        self.attributes.iter().filter(|s| s.ref_role.is_some())
    }

    /// Hash of the canonical serialized form; incremental runs refuse state
    /// built under a different schema.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex::encode(hasher.finalize())
    }
}
