//! Content hashing helpers shared by snapshots, transcripts and run manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Incremental SHA-256 over length-prefixed fields, so that field boundaries
/// can never be shifted to produce a colliding byte stream.
#[derive(Default)]
pub struct FieldHasher {
    inner: Sha256,
}

impl FieldHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn finish_hex(self) -> String {
        hex::encode(self.inner.finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes `value` with serde_json's deterministic struct-field order.
/// Maps must be `BTreeMap`s (or otherwise ordered) for the output to be canonical.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("in-memory serialization of plain data cannot fail")
}

pub fn canonical_hash<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(&canonical_json(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_prefix_separates_fields() {
        let mut a = FieldHasher::new();
        a.str("ab").str("c");
        let mut b = FieldHasher::new();
        b.str("a").str("bc");
        assert_ne!(a.finish_hex(), b.finish_hex());
    }

    #[test]
    fn canonical_hash_is_stable() {
        let v = serde_json::json!({"b": 1, "a": [1, 2]});
        assert_eq!(canonical_hash(&v), canonical_hash(&v.clone()));
    }
}
