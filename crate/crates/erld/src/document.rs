//! Documents, entities, and the set-union merge they share.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ErldError, Result};

/// Identifier of a source document, formed from its type and unique attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocumentId(pub String);

impl DocumentId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocumentId {
    fn from(s: &str) -> Self {
        DocumentId(s.to_string())
    }
}

impl From<String> for DocumentId {
    fn from(s: String) -> Self {
        DocumentId(s)
    }
}

/// Identifier of a resolved entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    /// Entity id for a cluster, derived from its smallest member id.
    pub fn for_members<'a, I: IntoIterator<Item = &'a DocumentId>>(members: I) -> EntityId {
        let smallest = members
            .into_iter()
            .min()
            .map(|d| d.0.clone())
            .unwrap_or_default();
        EntityId(format!("E:{smallest}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

/// A document: multi-valued attributes plus the type tags it carries.
///
/// Source documents have exactly one type tag; merged documents carry the
/// union of the tags of their sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub types: BTreeSet<String>,
    pub attrs: BTreeMap<String, BTreeSet<String>>,
}

impl Document {
    pub fn new(id: impl Into<DocumentId>, doc_type: impl Into<String>) -> Document {
        let mut types = BTreeSet::new();
        types.insert(doc_type.into());
        Document {
            id: id.into(),
            types,
            attrs: BTreeMap::new(),
        }
    }

    /// Adds one value to an attribute, creating the value set on first use.
    pub fn add_value(&mut self, attr: &str, value: impl Into<String>) {
        self.attrs
            .entry(attr.to_string())
            .or_default()
            .insert(value.into());
    }

    pub fn with_value(mut self, attr: &str, value: impl Into<String>) -> Document {
        self.add_value(attr, value);
        self
    }

    /// Values of one attribute, empty if the attribute is absent.
    pub fn values(&self, attr: &str) -> impl Iterator<Item = &str> {
        self.attrs
            .get(attr)
            .into_iter()
            .flat_map(|v| v.iter().map(|s| s.as_str()))
    }

    pub fn has_attr(&self, attr: &str) -> bool {
        self.attrs.get(attr).map_or(false, |v| !v.is_empty())
    }
}

/// Attribute-wise set union of a non-empty list of documents.
///
/// The output synthesizes a fresh id derived from the input ids; it is the
/// attribute map that is meaningful, and on that level the operation is
/// idempotent, commutative, and associative.
pub fn merge<'a, I>(docs: I) -> Result<Document>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    let mut types: BTreeSet<String> = BTreeSet::new();
    let mut attrs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut seen = false;
    for doc in docs {
        seen = true;
        ids.insert(doc.id.as_str());
        types.extend(doc.types.iter().cloned());
        for (name, values) in &doc.attrs {
            attrs
                .entry(name.clone())
                .or_default()
                .extend(values.iter().cloned());
        }
    }
    if !seen {
        return Err(ErldError::EmptyMerge);
    }
    let id = DocumentId(format!("M:{}", short_digest(ids.iter().copied())));
    Ok(Document { id, types, attrs })
}

/// Stable content digest over a sorted id list, used for synthesized ids and
/// member-set cache keys.
pub fn short_digest<'a, I: IntoIterator<Item = &'a str>>(sorted_ids: I) -> String {
    let mut hasher = Sha256::new();
    for id in sorted_ids {
        hasher.update((id.len() as u64).to_le_bytes());
        hasher.update(id.as_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// 128-bit digest of a sorted member-id set; the pair cache keys on these.
pub fn member_set_digest(members: &BTreeSet<DocumentId>) -> u128 {
    let mut hasher = Sha256::new();
    for id in members {
        hasher.update((id.0.len() as u64).to_le_bytes());
        hasher.update(id.0.as_bytes());
    }
    let out = hasher.finalize();
    u128::from_le_bytes(out[..16].try_into().expect("sha256 yields 32 bytes"))
}

/// A resolved entity: the merged document plus the source ids it covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub members: BTreeSet<DocumentId>,
    pub merged: Document,
}

impl Entity {
    pub fn from_members(
        id: EntityId,
        members: BTreeSet<DocumentId>,
        docs: Vec<&Document>,
    ) -> Result<Entity> {
        let merged = merge(docs)?;
        Ok(Entity { id, members, merged })
    }
}
