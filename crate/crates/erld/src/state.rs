//! Durable resolution state: everything an incremental run needs to
//! continue exactly where a previous run stopped.
//!
//! A state directory holds the schema, rules, and run configuration, the
//! document and inverted-index stores, the token dictionary and bucket
//! assignments, the resolved entities, and the pair cache. A manifest pins
//! a format version and a checksum per file; loading verifies the checksums,
//! re-derives whatever is derivable, and checks the cross-file invariants
//! before returning a usable state.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{read_entity_records, write_entities, EntityRecord};
use crate::document::{merge, Document, DocumentId, Entity, EntityId};
use crate::error::{ErldError, Result};
use crate::index::{InvertedIndex, PrimaryKeyStore};
use crate::lsh::{LshIndex, TokenDictionary};
use crate::matching::{RuleSet, RuleSetConfig};
use crate::pair_cache::PairCache;
use crate::pipeline::ResolveConfig;
use crate::schema::SchemaConfig;

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = "LOCK";
const SCHEMA_FILE: &str = "schema.json";
const RULES_FILE: &str = "rules.json";
const CONFIG_FILE: &str = "config.json";
const DOCUMENTS_FILE: &str = "documents.jsonl";
const INVERTED_FILE: &str = "inverted.idx";
const TOKENS_FILE: &str = "tokens.txt";
const BUCKETS_FILE: &str = "lsh_buckets.jsonl";
const ENTITIES_FILE: &str = "entities.jsonl";
const DOC_ENTITY_FILE: &str = "doc_entity_map.json";
const TOMBSTONES_FILE: &str = "tombstones.json";
const PAIR_CACHE_FILE: &str = "pair_cache.bin";

const PAIR_CACHE_MAGIC: &[u8; 8] = b"ERLDPCH1";

/// The complete output and working set of a resolution run.
#[derive(Debug, Clone)]
pub struct ResolutionState {
    pub schema: SchemaConfig,
    pub rules: RuleSetConfig,
    pub config: ResolveConfig,
    pub documents: PrimaryKeyStore,
    pub inverted: InvertedIndex,
    pub token_dict: TokenDictionary,
    pub lsh_index: LshIndex,
    pub entities: Vec<Entity>,
    pub doc_entity_map: BTreeMap<DocumentId, EntityId>,
    pub tombstones: BTreeMap<EntityId, EntityId>,
    pub pair_cache: PairCache,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    schema_hash: String,
    files: BTreeMap<String, FileStamp>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileStamp {
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BucketRow {
    bucket: String,
    docs: Vec<DocumentId>,
}

/// Exclusive writer lock on a state directory, released on drop.
#[derive(Debug)]
pub struct StateLock {
    path: PathBuf,
}

impl StateLock {
    pub fn acquire(dir: &Path) -> Result<StateLock> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(StateLock { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                Err(ErldError::Locked(path.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StateLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

fn write_state_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileStamp> {
    let tmp = dir.join(format!("{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(FileStamp {
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

fn read_state_file(dir: &Path, name: &str, stamp: &FileStamp) -> Result<Vec<u8>> {
    let bytes = fs::read(dir.join(name))
        .map_err(|e| ErldError::Corruption(format!("cannot read {name}: {e}")))?;
    if bytes.len() as u64 != stamp.bytes {
        return Err(ErldError::Corruption(format!(
            "{name} is {} bytes, manifest says {}",
            bytes.len(),
            stamp.bytes
        )));
    }
    if sha256_hex(&bytes) != stamp.sha256 {
        return Err(ErldError::Corruption(format!("{name} fails its checksum")));
    }
    Ok(bytes)
}

fn encode_pair_cache(cache: &PairCache) -> Vec<u8> {
    let entries: Vec<((u128, u128), bool)> = cache.entries().collect();
    let mut out = Vec::with_capacity(24 + entries.len() * 33);
    out.extend_from_slice(PAIR_CACHE_MAGIC);
    out.extend_from_slice(&(cache.capacity() as u64).to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for ((lo, hi), matched) in entries {
        out.extend_from_slice(&lo.to_le_bytes());
        out.extend_from_slice(&hi.to_le_bytes());
        out.push(u8::from(matched));
    }
    out
}

fn decode_pair_cache(bytes: &[u8]) -> Result<PairCache> {
    if bytes.len() < 24 || &bytes[..8] != PAIR_CACHE_MAGIC {
        return Err(ErldError::Corruption("bad pair cache header".into()));
    }
    let capacity = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let body = &bytes[24..];
    if body.len() != count * 33 {
        return Err(ErldError::Corruption(format!(
            "pair cache body is {} bytes for {count} entries",
            body.len()
        )));
    }
    let mut entries = Vec::with_capacity(count);
    for chunk in body.chunks_exact(33) {
        let lo = u128::from_le_bytes(chunk[..16].try_into().expect("16 bytes"));
        let hi = u128::from_le_bytes(chunk[16..32].try_into().expect("16 bytes"));
        let matched = match chunk[32] {
            0 => false,
            1 => true,
            other => {
                return Err(ErldError::Corruption(format!(
                    "pair cache entry has verdict byte {other}"
                )))
            }
        };
        entries.push(((lo, hi), matched));
    }
    Ok(PairCache::from_entries(capacity, entries))
}

impl ResolutionState {
    /// Compiles the stored rules against the stored schema.
    pub fn compiled_rules(&self) -> Result<RuleSet> {
        RuleSet::compile(self.rules.clone(), &self.schema)
    }

    /// Follows tombstones from a possibly retired entity id to the living
    /// one that absorbed it.
    pub fn resolve_entity_id(&self, id: &EntityId) -> EntityId {
        let mut current = id.clone();
        let mut hops = 0;
        while let Some(next) = self.tombstones.get(&current) {
            current = next.clone();
            hops += 1;
            if hops > self.tombstones.len() {
                break;
            }
        }
        current
    }

    /// Rejects inputs built under a different schema or run configuration.
    pub fn check_matches(&self, schema: &SchemaConfig, config: &ResolveConfig) -> Result<()> {
        if schema.fingerprint() != self.schema.fingerprint() {
            return Err(ErldError::StaleState(
                "schema differs from the one this state was built under".into(),
            ));
        }
        if *config != self.config {
            return Err(ErldError::StaleState(
                "run configuration differs from the one this state was built under".into(),
            ));
        }
        Ok(())
    }

    /// Cross-file consistency checks. Every document belongs to exactly one
    /// entity, stored entities reproduce the merge of their members, bucket
    /// rows point at stored documents, tombstones resolve to living entities,
    /// and the inverted index equals a rebuild from the documents.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(ErldError::InvariantViolation(msg));

        let mut covered: BTreeMap<&DocumentId, &EntityId> = BTreeMap::new();
        for entity in &self.entities {
            if entity.members.is_empty() {
                return fail(format!("entity {} has no members", entity.id));
            }
            let named_member = entity
                .id
                .as_str()
                .strip_prefix("E:")
                .map(|m| DocumentId::from(m));
            match named_member {
                Some(m) if entity.members.contains(&m) => {}
                _ => {
                    return fail(format!(
                        "entity {} is not named after one of its members",
                        entity.id
                    ))
                }
            }
            let mut docs = Vec::with_capacity(entity.members.len());
            for member in &entity.members {
                if covered.insert(member, &entity.id).is_some() {
                    return fail(format!("document {member} belongs to two entities"));
                }
                match self.documents.get(member) {
                    Some(doc) => docs.push(doc),
                    None => {
                        return fail(format!(
                            "entity {} lists unknown document {member}",
                            entity.id
                        ))
                    }
                }
            }
            let remerged = merge(docs)?;
            if remerged != entity.merged {
                return fail(format!(
                    "entity {} does not equal the merge of its members",
                    entity.id
                ));
            }
        }
        if covered.len() != self.documents.len() {
            return fail(format!(
                "{} documents stored but {} assigned to entities",
                self.documents.len(),
                covered.len()
            ));
        }
        for (doc, entity) in &self.doc_entity_map {
            if covered.get(doc) != Some(&entity) {
                return fail(format!("document {doc} maps to {entity} but belongs elsewhere"));
            }
        }
        if self.doc_entity_map.len() != covered.len() {
            return fail("document-to-entity map does not cover every document".into());
        }

        for (bucket, docs) in &self.lsh_index {
            for doc in docs {
                if !self.documents.contains(doc) {
                    return fail(format!("bucket {bucket} lists unknown document {doc}"));
                }
            }
        }

        let living: BTreeSet<&EntityId> = self.entities.iter().map(|e| &e.id).collect();
        for (retired, survivor) in &self.tombstones {
            if living.contains(retired) {
                return fail(format!("tombstoned entity {retired} is still live"));
            }
            let resolved = self.resolve_entity_id(survivor);
            if !living.contains(&resolved) {
                return fail(format!(
                    "tombstone for {retired} does not resolve to a living entity"
                ));
            }
        }

        let mut rebuilt = InvertedIndex::new();
        for doc in self.documents.documents() {
            rebuilt.add_document(doc, &self.schema);
        }
        if rebuilt != self.inverted {
            return fail("inverted index does not match its documents".into());
        }
        Ok(())
    }

    /// Writes the state to a directory, taking the writer lock for the
    /// duration. Existing state files are replaced; the manifest goes last,
    /// so an interrupted save is detected as corruption rather than loaded.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let _lock = StateLock::acquire(dir)?;
        let mut files = BTreeMap::new();

        files.insert(
            SCHEMA_FILE.to_string(),
            write_state_file(dir, SCHEMA_FILE, &serde_json::to_vec_pretty(&self.schema)?)?,
        );
        files.insert(
            RULES_FILE.to_string(),
            write_state_file(dir, RULES_FILE, &serde_json::to_vec_pretty(&self.rules)?)?,
        );
        files.insert(
            CONFIG_FILE.to_string(),
            write_state_file(dir, CONFIG_FILE, &serde_json::to_vec_pretty(&self.config)?)?,
        );

        let mut docs_bytes = Vec::new();
        for doc in self.documents.documents() {
            serde_json::to_writer(&mut docs_bytes, doc)?;
            docs_bytes.push(b'\n');
        }
        files.insert(
            DOCUMENTS_FILE.to_string(),
            write_state_file(dir, DOCUMENTS_FILE, &docs_bytes)?,
        );

        let mut inverted_bytes = Vec::new();
        self.inverted.write_binary(&mut inverted_bytes)?;
        files.insert(
            INVERTED_FILE.to_string(),
            write_state_file(dir, INVERTED_FILE, &inverted_bytes)?,
        );

        let mut token_bytes = Vec::new();
        for token in self.token_dict.tokens_in_order() {
            token_bytes.extend_from_slice(token.as_bytes());
            token_bytes.push(b'\n');
        }
        files.insert(
            TOKENS_FILE.to_string(),
            write_state_file(dir, TOKENS_FILE, &token_bytes)?,
        );

        let mut bucket_bytes = Vec::new();
        for (bucket, docs) in &self.lsh_index {
            let row = BucketRow {
                bucket: bucket.clone(),
                docs: docs.iter().cloned().collect(),
            };
            serde_json::to_writer(&mut bucket_bytes, &row)?;
            bucket_bytes.push(b'\n');
        }
        files.insert(
            BUCKETS_FILE.to_string(),
            write_state_file(dir, BUCKETS_FILE, &bucket_bytes)?,
        );

        let mut entity_bytes = Vec::new();
        write_entities(&mut entity_bytes, &self.entities)?;
        files.insert(
            ENTITIES_FILE.to_string(),
            write_state_file(dir, ENTITIES_FILE, &entity_bytes)?,
        );

        files.insert(
            DOC_ENTITY_FILE.to_string(),
            write_state_file(
                dir,
                DOC_ENTITY_FILE,
                &serde_json::to_vec_pretty(&self.doc_entity_map)?,
            )?,
        );
        files.insert(
            TOMBSTONES_FILE.to_string(),
            write_state_file(
                dir,
                TOMBSTONES_FILE,
                &serde_json::to_vec_pretty(&self.tombstones)?,
            )?,
        );
        files.insert(
            PAIR_CACHE_FILE.to_string(),
            write_state_file(dir, PAIR_CACHE_FILE, &encode_pair_cache(&self.pair_cache))?,
        );

        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            schema_hash: self.schema.fingerprint(),
            files,
        };
        write_state_file(dir, MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    /// Loads and fully verifies a state directory.
    pub fn load(dir: &Path) -> Result<ResolutionState> {
        if dir.join(LOCK_FILE).exists() {
            return Err(ErldError::Locked(dir.join(LOCK_FILE).display().to_string()));
        }
        let manifest_bytes = fs::read(dir.join(MANIFEST_FILE))
            .map_err(|e| ErldError::Corruption(format!("cannot read state manifest: {e}")))?;
        let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| ErldError::Corruption(format!("state manifest is unreadable: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(ErldError::VersionMismatch {
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let stamp = |name: &str| -> Result<&FileStamp> {
            manifest
                .files
                .get(name)
                .ok_or_else(|| ErldError::Corruption(format!("manifest lists no {name}")))
        };

        let schema: SchemaConfig =
            serde_json::from_slice(&read_state_file(dir, SCHEMA_FILE, stamp(SCHEMA_FILE)?)?)?;
        schema.validate()?;
        if schema.fingerprint() != manifest.schema_hash {
            return Err(ErldError::Corruption(
                "schema does not match the manifest schema hash".into(),
            ));
        }
        let rules: RuleSetConfig =
            serde_json::from_slice(&read_state_file(dir, RULES_FILE, stamp(RULES_FILE)?)?)?;
        RuleSet::compile(rules.clone(), &schema)?;
        let config: ResolveConfig =
            serde_json::from_slice(&read_state_file(dir, CONFIG_FILE, stamp(CONFIG_FILE)?)?)?;

        let mut documents = PrimaryKeyStore::new();
        let doc_bytes = read_state_file(dir, DOCUMENTS_FILE, stamp(DOCUMENTS_FILE)?)?;
        for (i, line) in doc_bytes.split(|b| *b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_slice(line).map_err(|e| {
                ErldError::Corruption(format!("document line {} is unreadable: {e}", i + 1))
            })?;
            if documents.contains(&doc.id) {
                return Err(ErldError::Corruption(format!(
                    "document {} stored twice",
                    doc.id
                )));
            }
            documents.insert(doc);
        }

        let inverted = InvertedIndex::read_binary(
            read_state_file(dir, INVERTED_FILE, stamp(INVERTED_FILE)?)?.as_slice(),
        )?;

        let token_bytes = read_state_file(dir, TOKENS_FILE, stamp(TOKENS_FILE)?)?;
        let token_text = String::from_utf8(token_bytes)
            .map_err(|_| ErldError::Corruption("token dictionary is not utf-8".into()))?;
        let tokens: Vec<String> = token_text.lines().map(str::to_string).collect();
        let token_dict = TokenDictionary::from_tokens(tokens)?;

        let mut lsh_index: LshIndex = BTreeMap::new();
        let bucket_bytes = read_state_file(dir, BUCKETS_FILE, stamp(BUCKETS_FILE)?)?;
        for (i, line) in bucket_bytes.split(|b| *b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: BucketRow = serde_json::from_slice(line).map_err(|e| {
                ErldError::Corruption(format!("bucket line {} is unreadable: {e}", i + 1))
            })?;
            if lsh_index
                .insert(row.bucket.clone(), row.docs.into_iter().collect())
                .is_some()
            {
                return Err(ErldError::Corruption(format!(
                    "bucket {} stored twice",
                    row.bucket
                )));
            }
        }

        let entity_bytes = read_state_file(dir, ENTITIES_FILE, stamp(ENTITIES_FILE)?)?;
        let records = read_entity_records(BufReader::new(entity_bytes.as_slice()))?;
        let mut entities = Vec::with_capacity(records.len());
        for record in records {
            entities.push(rebuild_entity(&record, &documents)?);
        }

        let doc_entity_map: BTreeMap<DocumentId, EntityId> = serde_json::from_slice(
            &read_state_file(dir, DOC_ENTITY_FILE, stamp(DOC_ENTITY_FILE)?)?,
        )?;
        let tombstones: BTreeMap<EntityId, EntityId> = serde_json::from_slice(
            &read_state_file(dir, TOMBSTONES_FILE, stamp(TOMBSTONES_FILE)?)?,
        )?;
        let pair_cache = decode_pair_cache(&read_state_file(
            dir,
            PAIR_CACHE_FILE,
            stamp(PAIR_CACHE_FILE)?,
        )?)?;

        let state = ResolutionState {
            schema,
            rules,
            config,
            documents,
            inverted,
            token_dict,
            lsh_index,
            entities,
            doc_entity_map,
            tombstones,
            pair_cache,
        };
        state.verify()?;
        Ok(state)
    }
}

fn rebuild_entity(record: &EntityRecord, documents: &PrimaryKeyStore) -> Result<Entity> {
    let members: BTreeSet<DocumentId> = record
        .members
        .iter()
        .map(|m| DocumentId::from(m.as_str()))
        .collect();
    let mut docs = Vec::with_capacity(members.len());
    for member in &members {
        docs.push(documents.get(member).ok_or_else(|| {
            ErldError::Corruption(format!(
                "entity {} lists unstored document {member}",
                record.entity_id
            ))
        })?);
    }
    let merged = merge(docs)?;
    // The stored attribute view must agree with the re-merged documents.
    for (attr, values) in &record.attrs {
        let rebuilt: Vec<&str> = merged.values(attr).collect();
        if rebuilt.len() != values.len() || rebuilt.iter().zip(values).any(|(a, b)| *a != b) {
            return Err(ErldError::Corruption(format!(
                "entity {} stores attribute {attr} that its members do not produce",
                record.entity_id
            )));
        }
    }
    if record.attrs.len() != merged.attrs.len() {
        return Err(ErldError::Corruption(format!(
            "entity {} stores a different attribute set than its members produce",
            record.entity_id
        )));
    }
    Ok(Entity {
        id: EntityId::from(record.entity_id.as_str()),
        members,
        merged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{resolve_batch, resolve_incremental};
    use tempfile::TempDir;

    fn schema() -> SchemaConfig {
        SchemaConfig::from_json(
            r#"{
                "document_types": ["A", "B"],
                "primary_keys": {"A": "a_no", "B": "b_no"},
                "attributes": [
                    {"name": "name", "match": "soft",
                     "similarity": {"metric": "jaro_winkler", "threshold": 0.9}},
                    {"name": "email_id", "match": "hard"},
                    {"name": "proof_id", "match": "hard", "reference": "explicit"},
                    {"name": "a_no", "match": "unique", "domain": "A"},
                    {"name": "b_no", "match": "unique", "domain": "B"}
                ]
            }"#,
        )
        .unwrap()
    }

    fn rules(schema: &SchemaConfig) -> RuleSet {
        RuleSet::from_json(
            r#"{"rules": [
                {"name": "email", "conjuncts": [
                    {"predicate": "same", "attribute": "name"},
                    {"predicate": "same", "attribute": "email_id"}
                ]},
                {"name": "linked", "conjuncts": [
                    {"predicate": "same", "attribute": "name"},
                    {"predicate": "in_traversal_set"}
                ]}
            ]}"#,
            schema,
        )
        .unwrap()
    }

    fn doc(id_no: &str, doc_type: &str, pairs: &[(&str, &str)]) -> Document {
        let mut d = Document::new(format!("{doc_type}{id_no}"), doc_type);
        d.add_value(if doc_type == "A" { "a_no" } else { "b_no" }, id_no);
        for (a, v) in pairs {
            d.add_value(a, *v);
        }
        d
    }

    fn sample_state() -> ResolutionState {
        let schema = schema();
        let rules = rules(&schema);
        let docs = vec![
            doc("1", "A", &[("name", "Amit Kumar"), ("email_id", "k@x.in")]),
            doc("2", "B", &[("name", "Amit Kumar"), ("email_id", "k@x.in")]),
            doc("3", "A", &[("name", "Anita Sharma"), ("proof_id", "B2")]),
            doc("4", "B", &[("name", "Suresh Patel")]),
        ];
        let (state, _) =
            resolve_batch(docs, &schema, &rules, &ResolveConfig::default()).unwrap();
        state
    }

    fn entity_view(state: &ResolutionState) -> Vec<(String, Vec<String>)> {
        state
            .entities
            .iter()
            .map(|e| {
                (
                    e.id.to_string(),
                    e.members.iter().map(|m| m.to_string()).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn save_and_load_round_trip_everything() {
        let state = sample_state();
        let dir = TempDir::new().unwrap();
        state.save(dir.path()).unwrap();
        let back = ResolutionState::load(dir.path()).unwrap();

        assert_eq!(entity_view(&back), entity_view(&state));
        assert_eq!(back.doc_entity_map, state.doc_entity_map);
        assert_eq!(back.lsh_index, state.lsh_index);
        assert_eq!(back.inverted, state.inverted);
        assert_eq!(
            back.token_dict.tokens_in_order(),
            state.token_dict.tokens_in_order()
        );
        assert_eq!(back.schema.fingerprint(), state.schema.fingerprint());
        assert_eq!(back.config, state.config);
        assert_eq!(back.pair_cache.capacity(), state.pair_cache.capacity());
        let a: Vec<_> = state.pair_cache.entries().collect();
        let b: Vec<_> = back.pair_cache.entries().collect();
        assert_eq!(a, b);
        for (x, y) in state.entities.iter().zip(back.entities.iter()) {
            assert_eq!(x.merged, y.merged);
        }
    }

    #[test]
    fn loaded_state_continues_exactly_like_the_in_memory_one() {
        let schema = schema();
        let rules = rules(&schema);
        let head = vec![
            doc("1", "A", &[("name", "Amit Kumar"), ("email_id", "k@x.in")]),
            doc("2", "B", &[("name", "Anita Sharma"), ("email_id", "a@x.in")]),
        ];
        let tail = vec![doc("9", "B", &[("name", "Amit Kumar"), ("email_id", "k@x.in")])];
        let config = ResolveConfig::default();

        let (mut in_memory, _) =
            resolve_batch(head.clone(), &schema, &rules, &config).unwrap();
        let dir = TempDir::new().unwrap();
        in_memory.save(dir.path()).unwrap();
        resolve_incremental(&mut in_memory, tail.clone()).unwrap();

        let mut reloaded = ResolutionState::load(dir.path()).unwrap();
        resolve_incremental(&mut reloaded, tail).unwrap();

        assert_eq!(entity_view(&reloaded), entity_view(&in_memory));
        assert_eq!(reloaded.doc_entity_map, in_memory.doc_entity_map);
        assert_eq!(reloaded.tombstones, in_memory.tombstones);
        assert_eq!(reloaded.lsh_index, in_memory.lsh_index);
        let a: Vec<_> = in_memory.pair_cache.entries().collect();
        let b: Vec<_> = reloaded.pair_cache.entries().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let state = sample_state();
        let dir = TempDir::new().unwrap();
        state.save(dir.path()).unwrap();

        // Bit flip in a checksummed file.
        let path = dir.path().join(DOCUMENTS_FILE);
        let mut bytes = fs::read(&path).unwrap();
        bytes[10] ^= 0x20;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            ResolutionState::load(dir.path()),
            Err(ErldError::Corruption(_))
        ));
    }

    #[test]
    fn truncated_pair_cache_is_rejected() {
        let state = sample_state();
        let dir = TempDir::new().unwrap();
        state.save(dir.path()).unwrap();
        let path = dir.path().join(PAIR_CACHE_FILE);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len().saturating_sub(5)]).unwrap();
        assert!(matches!(
            ResolutionState::load(dir.path()),
            Err(ErldError::Corruption(_))
        ));
    }

    #[test]
    fn missing_files_and_foreign_versions_are_rejected() {
        let state = sample_state();
        let dir = TempDir::new().unwrap();
        state.save(dir.path()).unwrap();

        let manifest_path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).unwrap();
        fs::write(
            &manifest_path,
            text.replace("\"format_version\": 1", "\"format_version\": 99"),
        )
        .unwrap();
        assert!(matches!(
            ResolutionState::load(dir.path()),
            Err(ErldError::VersionMismatch { found: 99, .. })
        ));

        fs::write(&manifest_path, text).unwrap();
        fs::remove_file(dir.path().join(TOMBSTONES_FILE)).unwrap();
        assert!(matches!(
            ResolutionState::load(dir.path()),
            Err(ErldError::Corruption(_))
        ));
    }

    #[test]
    fn lock_blocks_concurrent_writers_and_loaders() {
        let state = sample_state();
        let dir = TempDir::new().unwrap();
        state.save(dir.path()).unwrap();

        let _lock = StateLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            state.save(dir.path()),
            Err(ErldError::Locked(_))
        ));
        assert!(matches!(
            ResolutionState::load(dir.path()),
            Err(ErldError::Locked(_))
        ));
        drop(_lock);
        state.save(dir.path()).unwrap();
        ResolutionState::load(dir.path()).unwrap();
    }

    #[test]
    fn stale_inputs_are_refused() {
        let state = sample_state();
        let other_schema = SchemaConfig::from_json(
            r#"{
                "document_types": ["A"],
                "primary_keys": {"A": "a_no"},
                "attributes": [{"name": "a_no", "match": "unique"}]
            }"#,
        )
        .unwrap();
        assert!(matches!(
            state.check_matches(&other_schema, &state.config),
            Err(ErldError::StaleState(_))
        ));
        let mut other_config = state.config.clone();
        other_config.lsh_seed += 1;
        assert!(matches!(
            state.check_matches(&state.schema, &other_config),
            Err(ErldError::StaleState(_))
        ));
        state.check_matches(&state.schema, &state.config).unwrap();
    }

    #[test]
    fn inconsistent_in_memory_state_fails_verification() {
        let mut state = sample_state();
        state.verify().unwrap();
        // Point one document at the wrong entity.
        let doc = state.doc_entity_map.keys().next().unwrap().clone();
        state
            .doc_entity_map
            .insert(doc, EntityId::from("E:nowhere"));
        assert!(matches!(
            state.verify(),
            Err(ErldError::InvariantViolation(_))
        ));
    }
}
