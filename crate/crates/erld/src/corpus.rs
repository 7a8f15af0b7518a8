//! Reading and writing the JSON-Lines corpus and entity output formats.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::document::{Document, DocumentId, Entity};
use crate::error::{ErldError, Result};
use crate::schema::SchemaConfig;

/// Wire form of one corpus record: `{"type": ..., "attrs": {name: [values]}}`.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    #[serde(rename = "type")]
    doc_type: String,
    attrs: BTreeMap<String, Vec<String>>,
}

/// Parses a JSON-Lines corpus into documents with schema-derived ids.
///
/// Values are trimmed of surrounding whitespace. Unknown attributes are kept
/// (they default to soft, non-referential). A record missing its primary key
/// attribute is a record-level error carrying the line number; two records
/// that construct the same id are a corpus-level error naming both lines.
pub fn parse_corpus<R: BufRead>(reader: R, schema: &SchemaConfig) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| ErldError::Corpus {
            line: line_no,
            message: format!("invalid record: {e}"),
        })?;
        let doc = record_to_document(raw, schema, line_no)?;
        if let Some(first_line) = seen.get(doc.id.as_str()) {
            return Err(ErldError::DuplicateId {
                id: doc.id.to_string(),
                first_line: *first_line,
                second_line: line_no,
            });
        }
        seen.insert(doc.id.to_string(), line_no);
        docs.push(doc);
    }
    Ok(docs)
}

fn record_to_document(raw: RawRecord, schema: &SchemaConfig, line: usize) -> Result<Document> {
    if !schema.is_known_type(&raw.doc_type) {
        return Err(ErldError::Corpus {
            line,
            message: format!("unknown document type {}", raw.doc_type),
        });
    }
    let key_attr = schema
        .key_attribute(&raw.doc_type)
        .expect("validated schema has a key rule per type");

    let mut attrs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (name, values) in raw.attrs {
        let trimmed: BTreeSet<String> = values
            .iter()
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if !trimmed.is_empty() {
            attrs.insert(name, trimmed);
        }
    }

    let key_values = attrs.get(key_attr).cloned().unwrap_or_default();
    if key_values.is_empty() {
        return Err(ErldError::Corpus {
            line,
            message: format!(
                "record of type {} is missing its primary key attribute {}",
                raw.doc_type, key_attr
            ),
        });
    }
    if key_values.len() > 1 {
        return Err(ErldError::Corpus {
            line,
            message: format!(
                "unique attribute {} holds {} values in one record",
                key_attr,
                key_values.len()
            ),
        });
    }
    let key_value = key_values.iter().next().expect("non-empty");
    let id = schema.build_key(&raw.doc_type, key_value);

    let mut types = BTreeSet::new();
    types.insert(raw.doc_type);
    Ok(Document {
        id: DocumentId(id),
        types,
        attrs,
    })
}

/// Writes documents back out in the corpus record format.
pub fn write_corpus<W: Write>(mut writer: W, docs: &[Document]) -> Result<()> {
    for doc in docs {
        let doc_type = doc
            .types
            .iter()
            .next()
            .cloned()
            .unwrap_or_default();
        let raw = RawRecord {
            doc_type,
            attrs: doc
                .attrs
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
        };
        serde_json::to_writer(&mut writer, &raw)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Wire form of one resolved entity.
#[derive(Debug, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity_id: String,
    pub members: Vec<String>,
    pub attrs: BTreeMap<String, Vec<String>>,
}

impl From<&Entity> for EntityRecord {
    fn from(e: &Entity) -> EntityRecord {
        EntityRecord {
            entity_id: e.id.to_string(),
            members: e.members.iter().map(|m| m.to_string()).collect(),
            attrs: e
                .merged
                .attrs
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
        }
    }
}

/// Writes entities as JSON-Lines, one `{"entity_id", "members", "attrs"}`
/// object per line, sorted by entity id.
pub fn write_entities<W: Write>(mut writer: W, entities: &[Entity]) -> Result<()> {
    let mut sorted: Vec<&Entity> = entities.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for entity in sorted {
        serde_json::to_writer(&mut writer, &EntityRecord::from(entity))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads entity records, as written by [`write_entities`].
pub fn read_entity_records<R: BufRead>(reader: R) -> Result<Vec<EntityRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EntityRecord = serde_json::from_str(&line).map_err(|e| ErldError::Corpus {
            line: idx + 1,
            message: format!("invalid entity record: {e}"),
        })?;
        records.push(record);
    }
    Ok(records)
}
