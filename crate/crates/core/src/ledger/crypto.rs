//! Hashing and account signatures.

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256, Sha512_256};

use super::primitives::{Address, Hash256};

pub fn sha256(data: &[u8]) -> Hash256 {
    Hash256(Sha256::digest(data).into())
}

pub fn sha256_parts(parts: &[&[u8]]) -> Hash256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Hash256(h.finalize().into())
}

/// Digest used for PoCW and system-puzzle thresholds.
///
/// Identity hashes (transactions, blocks, problems, addresses) are always SHA-256;
/// only the threshold digest is selectable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowHash {
    #[default]
    Sha256,
    Sha512Trunc256,
}

impl PowHash {
    pub fn digest_parts(self, parts: &[&[u8]]) -> Hash256 {
        match self {
            PowHash::Sha256 => sha256_parts(parts),
            PowHash::Sha512Trunc256 => {
                let mut h = Sha512_256::new();
                for p in parts {
                    h.update(p);
                }
                Hash256(h.finalize().into())
            }
        }
    }

    /// Hasher primed with `prefix`, for scanning many suffixes over one preimage.
    pub fn primed(self, prefix: &[u8]) -> PrimedHasher {
        match self {
            PowHash::Sha256 => {
                let mut h = Sha256::new();
                h.update(prefix);
                PrimedHasher::Sha256(h)
            }
            PowHash::Sha512Trunc256 => {
                let mut h = Sha512_256::new();
                h.update(prefix);
                PrimedHasher::Sha512Trunc256(h)
            }
        }
    }
}

#[derive(Clone)]
pub enum PrimedHasher {
    Sha256(Sha256),
    Sha512Trunc256(Sha512_256),
}

impl PrimedHasher {
    pub fn finish_with(&self, suffix: &[u8]) -> Hash256 {
        match self {
            PrimedHasher::Sha256(h) => {
                let mut h = h.clone();
                h.update(suffix);
                Hash256(h.finalize().into())
            }
            PrimedHasher::Sha512Trunc256(h) => {
                let mut h = h.clone();
                h.update(suffix);
                Hash256(h.finalize().into())
            }
        }
    }
}

/// Ed25519 public key plus signature over a transaction's signing bytes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureBundle {
    #[serde(with = "hex_array")]
    pub public_key: [u8; 32],
    #[serde(with = "hex_array")]
    pub signature: [u8; 64],
}

impl SignatureBundle {
    pub fn verify(&self, expected: &Address, message: &[u8]) -> bool {
        if Address::from_public_key(&self.public_key) != *expected {
            return false;
        }
        let Ok(key) = VerifyingKey::from_bytes(&self.public_key) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&self.signature);
        key.verify(message, &sig).is_ok()
    }
}

/// An account key pair.
#[derive(Clone)]
pub struct Keypair {
    signing: SigningKey,
    address: Address,
}

impl Keypair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(&seed);
        let address = Address::from_public_key(signing.verifying_key().as_bytes());
        Keypair { signing, address }
    }

    /// Deterministic key derived from a label, for simulations and fixtures.
    pub fn derive(label: &str) -> Self {
        Self::from_seed(sha256(label.as_bytes()).0)
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn public_key(&self) -> [u8; 32] {
        *self.signing.verifying_key().as_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> SignatureBundle {
        SignatureBundle {
            public_key: self.public_key(),
            signature: self.signing.sign(message).to_bytes(),
        }
    }
}

impl std::fmt::Debug for Keypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Keypair").field("address", &self.address).finish_non_exhaustive()
    }
}

pub(crate) mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(v: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; N];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}
