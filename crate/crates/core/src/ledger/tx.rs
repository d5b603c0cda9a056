use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::codec::{CanonicalEncode, Encoder};
use super::crypto::{sha256, sha256_parts, Keypair, SignatureBundle};
use super::primitives::{Address, Amount, Hash256};
use crate::crowdwork::{ProblemSpec, RewardTable, SolutionClaim};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TxBody {
    Transfer {
        receiver: Address,
        amount: Amount,
    },
    ProblemProposal {
        spec: Arc<ProblemSpec>,
        reward_table: Arc<RewardTable>,
        t_search: u64,
    },
    SolutionCommitment {
        problem_id: Hash256,
        digest: Hash256,
    },
    SolutionRevealing {
        problem_id: Hash256,
        commitment_ref: Hash256,
        solution: SolutionClaim,
        #[serde(with = "super::crypto::hex_array")]
        salt: [u8; 16],
    },
}

impl TxBody {
    fn encode_to(&self, enc: &mut Encoder) {
        match self {
            TxBody::Transfer { receiver, amount } => {
                enc.u8(0).address(receiver).amount(*amount);
            }
            TxBody::ProblemProposal { spec, reward_table, t_search } => {
                enc.u8(1).bytes(&spec.canonical_bytes()).bytes(&reward_table.canonical_bytes()).u64(*t_search);
            }
            TxBody::SolutionCommitment { problem_id, digest } => {
                enc.u8(2).hash(problem_id).hash(digest);
            }
            TxBody::SolutionRevealing { problem_id, commitment_ref, solution, salt } => {
                enc.u8(3).hash(problem_id).hash(commitment_ref).bytes(&solution.canonical_bytes()).raw(salt);
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TxBody::Transfer { .. } => "transfer",
            TxBody::ProblemProposal { .. } => "proposal",
            TxBody::SolutionCommitment { .. } => "commitment",
            TxBody::SolutionRevealing { .. } => "revealing",
        }
    }
}

/// A signed account transaction. The hash covers every field including the signature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub fee: Amount,
    pub nonce: u64,
    pub body: TxBody,
    pub auth: Option<SignatureBundle>,
    #[serde(skip)]
    hash: OnceLock<Hash256>,
}

impl PartialEq for Transaction {
    fn eq(&self, other: &Self) -> bool {
        self.sender == other.sender
            && self.fee == other.fee
            && self.nonce == other.nonce
            && self.body == other.body
            && self.auth == other.auth
    }
}

impl Eq for Transaction {}

impl Transaction {
    /// Unsigned transaction, valid only where signature checks are disabled.
    pub fn unsigned(sender: Address, fee: Amount, nonce: u64, body: TxBody) -> Self {
        Transaction { sender, fee, nonce, body, auth: None, hash: OnceLock::new() }
    }

    pub fn signed(key: &Keypair, fee: Amount, nonce: u64, body: TxBody) -> Self {
        let mut tx = Self::unsigned(key.address(), fee, nonce, body);
        tx.auth = Some(key.sign(&tx.signing_bytes()));
        tx
    }

    pub fn transfer(sender: Address, receiver: Address, amount: Amount, fee: Amount, nonce: u64) -> Self {
        Self::unsigned(sender, fee, nonce, TxBody::Transfer { receiver, amount })
    }

    /// Encoding covered by the signature: everything except the signature itself.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(128);
        enc.address(&self.sender).amount(self.fee).u64(self.nonce);
        self.body.encode_to(&mut enc);
        enc.finish()
    }

    pub fn hash(&self) -> Hash256 {
        *self.hash.get_or_init(|| sha256(&self.canonical_bytes()))
    }

    pub fn verify_signature(&self) -> bool {
        match &self.auth {
            Some(sig) => sig.verify(&self.sender, &self.signing_bytes()),
            None => false,
        }
    }

    /// Amount counted toward a block's transaction volume.
    pub fn volume(&self) -> Amount {
        match &self.body {
            TxBody::Transfer { amount, .. } => *amount,
            _ => Amount::ZERO,
        }
    }

    pub fn into_arc(self) -> Arc<Transaction> {
        Arc::new(self)
    }
}

impl CanonicalEncode for Transaction {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.raw(&self.signing_bytes());
        match &self.auth {
            Some(sig) => {
                enc.u8(1).raw(&sig.public_key).raw(&sig.signature);
            }
            None => {
                enc.u8(0);
            }
        }
    }
}

/// Commitment digest binding a solution to the committing miner: H(address || solution || salt).
pub fn commitment_digest(miner: &Address, solution: &SolutionClaim, salt: &[u8; 16]) -> Hash256 {
    sha256_parts(&[miner.as_bytes(), &solution.canonical_bytes(), salt])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowdwork::ClaimKind;

    fn addr(label: &str) -> Address {
        Keypair::derive(label).address()
    }

    #[test]
    fn encoding_is_deterministic_and_injective() {
        let a = Transaction::transfer(addr("a"), addr("b"), Amount(10), Amount(1), 0);
        let b = Transaction::transfer(addr("a"), addr("b"), Amount(11), Amount(1), 0);
        assert_eq!(a.canonical_bytes(), a.clone().canonical_bytes());
        assert_ne!(a.canonical_bytes(), b.canonical_bytes());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn signature_covers_body() {
        let key = Keypair::derive("alice");
        let tx = Transaction::signed(&key, Amount(1), 3, TxBody::Transfer { receiver: addr("b"), amount: Amount(5) });
        assert!(tx.verify_signature());
        let mut forged = tx.clone();
        forged.body = TxBody::Transfer { receiver: addr("b"), amount: Amount(50) };
        assert!(!forged.verify_signature());
        assert!(!Transaction::transfer(key.address(), addr("b"), Amount(5), Amount(1), 3).verify_signature());
    }

    #[test]
    fn digest_binds_miner() {
        let claim = SolutionClaim { kind: ClaimKind::Assignment(vec![1, 2]), claimed_level: 1 };
        let salt = [7u8; 16];
        assert_ne!(commitment_digest(&addr("a"), &claim, &salt), commitment_digest(&addr("b"), &claim, &salt));
        assert_ne!(commitment_digest(&addr("a"), &claim, &salt), commitment_digest(&addr("a"), &claim, &[8u8; 16]));
    }

    #[test]
    fn json_roundtrip_preserves_hash() {
        let tx = Transaction::signed(
            &Keypair::derive("x"),
            Amount(2),
            0,
            TxBody::SolutionCommitment { problem_id: Hash256([1; 32]), digest: Hash256([2; 32]) },
        );
        let back: Transaction = serde_json::from_str(&serde_json::to_string(&tx).unwrap()).unwrap();
        assert_eq!(back.hash(), tx.hash());
    }
}
