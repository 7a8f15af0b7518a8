//! Primary key store and the inverted index over referential tokens.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::document::{Document, DocumentId};
use crate::error::{ErldError, Result};
use crate::schema::{RefRole, SchemaConfig};

/// Characters that delimit tokens inside implicit referential values.
pub const IMPLICIT_DELIMITERS: &[char] = &['.', ',', ':', ';', '(', ')', '"', '\''];

/// Tokenizes one referential value according to its role.
///
/// Explicit values are primary keys and stay whole (trimmed). Implicit values
/// are free text: they split on whitespace and on the delimiter set, so
/// `"Driving License ID:DL77"` yields `Driving`, `License`, `ID`, `DL77`.
pub fn tokenize_referential(value: &str, role: RefRole) -> Vec<String> {
    match role {
        RefRole::Explicit => {
            let t = value.trim();
            if t.is_empty() {
                Vec::new()
            } else {
                vec![t.to_string()]
            }
        }
        RefRole::Implicit => value
            .split(|c: char| c.is_whitespace() || IMPLICIT_DELIMITERS.contains(&c))
            .filter(|t| !t.is_empty())
            .map(|t| t.to_string())
            .collect(),
    }
}

/// Documents by primary key.
#[derive(Debug, Default, Clone)]
pub struct PrimaryKeyStore {
    docs: BTreeMap<DocumentId, Document>,
}

impl PrimaryKeyStore {
    pub fn new() -> PrimaryKeyStore {
        PrimaryKeyStore::default()
    }

    pub fn insert(&mut self, doc: Document) {
        self.docs.insert(doc.id.clone(), doc);
    }

    pub fn get(&self, id: &DocumentId) -> Option<&Document> {
        self.docs.get(id)
    }

    pub fn contains(&self, id: &DocumentId) -> bool {
        self.docs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &DocumentId> {
        self.docs.keys()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }
}

/// Inverted index from referential tokens to the documents carrying them.
///
/// Each document also indexes its own primary key as a token, so the posting
/// list of a key covers both its owner and every document mentioning it.
/// Token search is exact and case-sensitive.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, BTreeSet<DocumentId>>,
}

impl InvertedIndex {
    pub fn new() -> InvertedIndex {
        InvertedIndex::default()
    }

    /// Indexes one document's referential values and its own key.
    pub fn add_document(&mut self, doc: &Document, schema: &SchemaConfig) {
        self.entry(doc.id.as_str()).insert(doc.id.clone());
        for spec in schema.referential_attributes() {
            let Some(role) = spec.ref_role else { continue };
            if let Some(domain) = &spec.domain {
                if !doc.types.contains(domain) {
                    continue;
                }
            }
            for value in doc.values(&spec.name) {
                for token in tokenize_referential(value, role) {
                    self.entry(&token).insert(doc.id.clone());
                }
            }
        }
    }

    fn entry(&mut self, token: &str) -> &mut BTreeSet<DocumentId> {
        if !self.postings.contains_key(token) {
            self.postings.insert(token.to_string(), BTreeSet::new());
        }
        self.postings.get_mut(token).expect("just inserted")
    }

    /// Posting set for an exact token; empty for unseen tokens.
    pub fn search(&self, token: &str) -> BTreeSet<DocumentId> {
        self.postings.get(token).cloned().unwrap_or_default()
    }

    pub fn posting_len(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, |p| p.len())
    }

    pub fn token_count(&self) -> usize {
        self.postings.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(|k| k.as_str())
    }

    /// Serializes as a versioned, length-prefixed table of sorted tokens and
    /// sorted posting lists.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.postings.len() as u64).to_le_bytes())?;
        for (token, postings) in &self.postings {
            write_str(&mut w, token)?;
            w.write_all(&(postings.len() as u32).to_le_bytes())?;
            for id in postings {
                write_str(&mut w, id.as_str())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<InvertedIndex> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if magic != *MAGIC {
            return Err(ErldError::Corruption("bad inverted index header".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(ErldError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let count = read_u64(&mut r)?;
        let mut postings = BTreeMap::new();
        let mut last_token: Option<String> = None;
        for _ in 0..count {
            let token = read_str(&mut r)?;
            if let Some(prev) = &last_token {
                if prev >= &token {
                    return Err(ErldError::Corruption("tokens out of order".into()));
                }
            }
            let n = read_u32(&mut r)?;
            let mut ids = BTreeSet::new();
            for _ in 0..n {
                ids.insert(DocumentId(read_str(&mut r)?));
            }
            if ids.len() != n as usize {
                return Err(ErldError::Corruption("duplicate posting entries".into()));
            }
            last_token = Some(token.clone());
            postings.insert(token, ids);
        }
        let mut trailer = [0u8; 1];
        if r.read(&mut trailer)? != 0 {
            return Err(ErldError::Corruption("trailing bytes after index".into()));
        }
        Ok(InvertedIndex { postings })
    }
}

const MAGIC: &[u8; 8] = b"ERLDIIX\x01";
const FORMAT_VERSION: u32 = 1;

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| ErldError::Corruption("unexpected end of index file".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 24 {
        return Err(ErldError::Corruption("implausible string length".into()));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| ErldError::Corruption("invalid utf-8 in index".into()))
}

/// Builds both indexes over a corpus.
pub fn build_indexes(
    docs: &[Document],
    schema: &SchemaConfig,
) -> (PrimaryKeyStore, InvertedIndex) {
    let mut pk = PrimaryKeyStore::new();
    let mut inverted = InvertedIndex::new();
    for doc in docs {
        inverted.add_document(doc, schema);
        pk.insert(doc.clone());
    }
    (pk, inverted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> SchemaConfig {
        SchemaConfig::from_json(
            r#"{
                "document_types": ["DL", "BAN", "VOT"],
                "primary_keys": {"DL": "licence_no", "BAN": "account_no", "VOT": "voter_no"},
                "attributes": [
                    {"name": "name", "match": "soft"},
                    {"name": "proof_id", "match": "hard", "reference": "explicit"},
                    {"name": "document_details", "match": "soft", "reference": "implicit"},
                    {"name": "licence_no", "match": "unique", "domain": "DL"},
                    {"name": "account_no", "match": "unique", "domain": "BAN"},
                    {"name": "voter_no", "match": "unique", "domain": "VOT"}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn implicit_values_split_on_whitespace_and_punctuation() {
        let tokens = tokenize_referential("Driving License ID:DL77", RefRole::Implicit);
        assert_eq!(tokens, vec!["Driving", "License", "ID", "DL77"]);
        let tokens = tokenize_referential("ID:DL77", RefRole::Implicit);
        assert_eq!(tokens, vec!["ID", "DL77"]);
        let tokens = tokenize_referential("(see BAN91).", RefRole::Implicit);
        assert_eq!(tokens, vec!["see", "BAN91"]);
    }

    #[test]
    fn explicit_values_stay_whole() {
        assert_eq!(
            tokenize_referential("  VOT22 ", RefRole::Explicit),
            vec!["VOT22"]
        );
        assert!(tokenize_referential("   ", RefRole::Explicit).is_empty());
    }

    #[test]
    fn posting_lists_cover_referrers_and_the_owner() {
        let schema = schema();
        let d6 = Document::new("DL77", "DL").with_value("licence_no", "77");
        let d7 = Document::new("BAN80", "BAN")
            .with_value("account_no", "80")
            .with_value("document_details", "Driving License ID:DL77");
        let (_, inverted) = build_indexes(&[d6, d7], &schema);
        let hits = inverted.search("DL77");
        let ids: Vec<&str> = hits.iter().map(|d| d.as_str()).collect();
        assert_eq!(ids, vec!["BAN80", "DL77"]);
        assert!(inverted.search("XYZ").is_empty());
    }

    #[test]
    fn search_is_case_sensitive() {
        let schema = schema();
        let d = Document::new("BAN1", "BAN")
            .with_value("account_no", "1")
            .with_value("document_details", "ref DL77");
        let (_, inverted) = build_indexes(&[d], &schema);
        assert_eq!(inverted.search("DL77").len(), 1);
        assert!(inverted.search("dl77").is_empty());
    }

    /// Brute-force scan over the raw documents, used as the index oracle.
    fn scan_for_token(docs: &[Document], schema: &SchemaConfig, token: &str) -> BTreeSet<DocumentId> {
        let mut out = BTreeSet::new();
        for doc in docs {
            if doc.id.as_str() == token {
                out.insert(doc.id.clone());
            }
            for spec in schema.referential_attributes() {
                if let Some(domain) = &spec.domain {
                    if !doc.types.contains(domain) {
                        continue;
                    }
                }
                for value in doc.values(&spec.name) {
                    if tokenize_referential(value, spec.ref_role.unwrap())
                        .iter()
                        .any(|t| t == token)
                    {
                        out.insert(doc.id.clone());
                    }
                }
            }
        }
        out
    }

    #[test]
    fn search_agrees_with_a_brute_force_scan() {
        let schema = schema();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut docs = Vec::new();
        for i in 0..50 {
            let mut d = Document::new(format!("BAN{i}"), "BAN");
            d.add_value("account_no", i.to_string());
            if rng.gen_bool(0.6) {
                let target = rng.gen_range(0..50);
                d.add_value("proof_id", format!("VOT{target}"));
            }
            if rng.gen_bool(0.5) {
                let target = rng.gen_range(0..50);
                d.add_value(
                    "document_details",
                    format!("linked to account: BAN{target}, verified."),
                );
            }
            docs.push(d);
        }
        let (_, inverted) = build_indexes(&docs, &schema);
        let mut probes: Vec<String> = (0..50).map(|i| format!("BAN{i}")).collect();
        probes.extend((0..50).map(|i| format!("VOT{i}")));
        probes.push("account".to_string());
        probes.push("missing-token".to_string());
        for probe in probes {
            assert_eq!(
                inverted.search(&probe),
                scan_for_token(&docs, &schema, &probe),
                "token {probe}"
            );
        }
    }

    #[test]
    fn incremental_add_equals_batch_build() {
        let schema = schema();
        let docs: Vec<Document> = (0..20)
            .map(|i| {
                Document::new(format!("VOT{i}"), "VOT")
                    .with_value("voter_no", i.to_string())
                    .with_value("proof_id", format!("VOT{}", (i + 1) % 20))
            })
            .collect();
        let (_, batch) = build_indexes(&docs, &schema);
        let mut incremental = InvertedIndex::new();
        for d in &docs {
            incremental.add_document(d, &schema);
        }
        assert_eq!(batch, incremental);
    }

    #[test]
    fn binary_format_round_trips_and_rejects_corruption() {
        let schema = schema();
        let docs: Vec<Document> = (0..10)
            .map(|i| {
                Document::new(format!("DL{i}"), "DL")
                    .with_value("licence_no", i.to_string())
                    .with_value("document_details", format!("see DL{}", (i + 3) % 10))
            })
            .collect();
        let (_, index) = build_indexes(&docs, &schema);
        let mut bytes = Vec::new();
        index.write_binary(&mut bytes).unwrap();
        let back = InvertedIndex::read_binary(bytes.as_slice()).unwrap();
        assert_eq!(index, back);

        let truncated = &bytes[..bytes.len() - 3];
        assert!(InvertedIndex::read_binary(truncated).is_err());

        let mut flipped = bytes.clone();
        flipped[3] ^= 0xff;
        assert!(InvertedIndex::read_binary(flipped.as_slice()).is_err());
    }
}
