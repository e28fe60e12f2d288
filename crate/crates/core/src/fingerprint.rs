use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn of_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("in-memory values always serialize");
    of_bytes(&bytes)
}

pub fn of_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Salted hash, used for handles and re-keyed identifiers.
pub fn salted(salt: &str, value: &str) -> String {
    let mut h = Sha256::new();
    h.update((salt.len() as u64).to_le_bytes());
    h.update(salt.as_bytes());
    h.update(value.as_bytes());
    hex::encode(h.finalize())
}

/// Seed and configuration hash stamped into every generated artifact.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_fingerprint: String,
}

impl Provenance {
    pub fn new<C: Serialize + ?Sized>(seed: u64, config: &C) -> Self {
        Provenance {
            seed,
            config_fingerprint: of_json(config),
        }
    }
}
