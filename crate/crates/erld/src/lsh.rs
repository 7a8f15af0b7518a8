//! MinHash signatures and banded locality-sensitive bucket assignment.
//!
//! Each document's word set is hashed by `m * n` affine functions
//! `(a*x + b) mod p` over interned token ids. Band `j` concatenates its `m`
//! minimum values into one bucket id, so two documents share a bucket with
//! probability `1 - (1 - J^m)^n` at word-set Jaccard `J`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::document::{Document, DocumentId};
use crate::error::{ErldError, Result};
use crate::schema::SchemaConfig;

/// Modulus for the affine hash family: the Mersenne prime 2^31 - 1, larger
/// than any token id the dictionary will assign.
pub const HASH_PRIME: u64 = 2_147_483_647;

/// Buckets and their member documents.
pub type LshIndex = BTreeMap<String, BTreeSet<DocumentId>>;

/// Parameters of the hash family. `coefficients` holds `m * n` pairs in
/// `(band, row)` order, all drawn deterministically from `rng_seed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshParams {
    pub m: usize,
    pub n: usize,
    pub prime: u64,
    pub rng_seed: u64,
    pub coefficients: Vec<(u64, u64)>,
}

impl LshParams {
    pub fn from_seed(m: usize, n: usize, rng_seed: u64) -> LshParams {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut seen = BTreeSet::new();
        let mut coefficients = Vec::with_capacity(m * n);
        while coefficients.len() < m * n {
            let a = rng.gen_range(1..HASH_PRIME);
            let b = rng.gen_range(0..HASH_PRIME);
            if seen.insert((a, b)) {
                coefficients.push((a, b));
            }
        }
        LshParams {
            m,
            n,
            prime: HASH_PRIME,
            rng_seed,
            coefficients,
        }
    }

    pub fn functions(&self) -> usize {
        self.m * self.n
    }
}

/// Append-only mapping from word tokens to integer ids.
///
/// Ids are assigned in first-seen order and never change, so incremental
/// runs hash old tokens exactly as the batch run did.
#[derive(Debug, Default, Clone)]
pub struct TokenDictionary {
    ids: HashMap<String, u64>,
    tokens: Vec<String>,
}

impl TokenDictionary {
    pub fn new() -> TokenDictionary {
        TokenDictionary::default()
    }

    /// Id for a token, assigning the next free id on first sight.
    pub fn intern(&mut self, token: &str) -> u64 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u64;
        assert!(id < HASH_PRIME, "token dictionary exceeded the hash modulus");
        self.ids.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        id
    }

    pub fn lookup(&self, token: &str) -> Option<u64> {
        self.ids.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in id order, for persistence.
    pub fn tokens_in_order(&self) -> &[String] {
        &self.tokens
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<TokenDictionary> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u64).is_some() {
                return Err(ErldError::Corruption(format!(
                    "token dictionary repeats token {t}"
                )));
            }
        }
        Ok(TokenDictionary { ids, tokens })
    }
}

/// The word set of a document: every value of every non-referential
/// attribute, split on whitespace and lowercased.
pub fn word_set(doc: &Document, schema: &SchemaConfig) -> BTreeSet<String> {
    let mut words = BTreeSet::new();
    for (name, values) in &doc.attrs {
        let referential = schema
            .attributes
            .iter()
            .filter(|s| &s.name == name)
            .filter(|s| s.domain.as_deref().map_or(true, |d| doc.types.contains(d)))
            .any(|s| s.ref_role.is_some());
        if referential {
            continue;
        }
        for value in values {
            for word in value.split_whitespace() {
                words.insert(word.to_lowercase());
            }
        }
    }
    words
}

/// MinHash signature of a token-id set: one minimum per hash function, in
/// `(band, row)` order. An empty set is an error.
pub fn signature(token_ids: &[u64], params: &LshParams) -> Result<Vec<u64>> {
    if token_ids.is_empty() {
        return Err(ErldError::EmptyWordSet(String::new()));
    }
    let mut values = Vec::with_capacity(params.functions());
    for &(a, b) in &params.coefficients {
        let mut min = u64::MAX;
        for &x in token_ids {
            debug_assert!(x < params.prime);
            let h = (a * x + b) % params.prime;
            if h < min {
                min = h;
            }
        }
        values.push(min);
    }
    Ok(values)
}

/// Bucket ids of a signature: band index prefix plus the band's `m`
/// concatenated minimums.
pub fn bucket_ids(sig: &[u64], params: &LshParams) -> Vec<String> {
    let mut ids = Vec::with_capacity(params.n);
    for band in 0..params.n {
        let mut id = format!("{band}:");
        for row in 0..params.m {
            if row > 0 {
                id.push('-');
            }
            id.push_str(&sig[band * params.m + row].to_string());
        }
        ids.push(id);
    }
    ids
}

/// Bucket id used for a document whose word set is empty: a singleton bucket
/// keyed by the document id, so the document still reaches match-merge.
pub fn singleton_bucket_id(doc_id: &DocumentId) -> String {
    format!("empty:{doc_id}")
}

/// Computes a document's bucket ids, interning its words into the dictionary.
pub fn doc_bucket_ids(
    doc: &Document,
    schema: &SchemaConfig,
    dict: &mut TokenDictionary,
    params: &LshParams,
) -> Result<Vec<String>> {
    let words = word_set(doc, schema);
    let token_ids: Vec<u64> = words.iter().map(|w| dict.intern(w)).collect();
    if token_ids.is_empty() {
        return Err(ErldError::EmptyWordSet(doc.id.to_string()));
    }
    let sig = signature(&token_ids, params)?;
    Ok(bucket_ids(&sig, params))
}
