//! Append-only block store: one file of `(hash, length, json)` records plus a manifest.
//!
//! The manifest pins the genesis hash and config digest so blocks from different
//! experiments never end up in the same store.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Block, Hash256};

pub const STORE_FILE: &str = "blocks.kv";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("manifest mismatch: store holds {field} {stored}, caller expects {expected}")]
    ManifestMismatch { field: &'static str, stored: String, expected: String },
    #[error("corrupt record at byte {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub genesis_hash: Hash256,
    pub config_digest: Hash256,
}

impl Manifest {
    pub fn new(genesis_hash: Hash256, config_digest: Hash256) -> Self {
        Manifest { format: FORMAT, genesis_hash, config_digest }
    }

    fn check(&self, expected: &Manifest) -> Result<(), StoreError> {
        let mismatch = |field, a: String, b: String| Err(StoreError::ManifestMismatch { field, stored: a, expected: b });
        if self.format != expected.format {
            return mismatch("format", self.format.to_string(), expected.format.to_string());
        }
        if self.genesis_hash != expected.genesis_hash {
            return mismatch("genesis hash", self.genesis_hash.to_hex(), expected.genesis_hash.to_hex());
        }
        if self.config_digest != expected.config_digest {
            return mismatch("config digest", self.config_digest.to_hex(), expected.config_digest.to_hex());
        }
        Ok(())
    }
}

pub struct BlockStore {
    path: PathBuf,
    file: File,
    index: HashMap<Hash256, (u64, u32)>,
    end: u64,
}

impl BlockStore {
    /// Opens or creates the store in `dir`. An existing store must carry the same manifest.
    pub fn open(dir: &Path, manifest: &Manifest) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let mpath = dir.join(MANIFEST_FILE);
        if mpath.exists() {
            let stored: Manifest = serde_json::from_slice(&std::fs::read(&mpath)?)
                .map_err(|e| StoreError::Corrupt { offset: 0, reason: format!("manifest: {e}") })?;
            stored.check(manifest)?;
        } else {
            std::fs::write(&mpath, serde_json::to_vec_pretty(manifest).expect("manifest serializes"))?;
        }
        let path = dir.join(STORE_FILE);
        let file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        let (index, end) = scan(&path)?;
        Ok(BlockStore { path, file, index, end })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.index.contains_key(hash)
    }

    /// Appends `block` unless already present; returns whether it was written.
    pub fn put(&mut self, block: &Block) -> Result<bool, StoreError> {
        let hash = block.hash();
        if self.index.contains_key(&hash) {
            return Ok(false);
        }
        let value = serde_json::to_vec(block).expect("block serializes");
        let len = u32::try_from(value.len()).map_err(|_| StoreError::Corrupt { offset: self.end, reason: "block too large".into() })?;
        let mut rec = Vec::with_capacity(36 + value.len());
        rec.extend_from_slice(hash.as_bytes());
        rec.extend_from_slice(&len.to_le_bytes());
        rec.extend_from_slice(&value);
        self.file.write_all(&rec)?;
        self.index.insert(hash, (self.end + 36, len));
        self.end += rec.len() as u64;
        Ok(true)
    }

    pub fn flush(&mut self) -> Result<(), StoreError> {
        self.file.flush()?;
        Ok(())
    }

    pub fn get(&self, hash: &Hash256) -> Result<Option<Block>, StoreError> {
        let Some(&(offset, len)) = self.index.get(hash) else {
            return Ok(None);
        };
        let mut f = File::open(&self.path)?;
        f.seek(SeekFrom::Start(offset))?;
        let mut buf = vec![0u8; len as usize];
        f.read_exact(&mut buf)?;
        let block: Block =
            serde_json::from_slice(&buf).map_err(|e| StoreError::Corrupt { offset, reason: e.to_string() })?;
        if block.hash() != *hash {
            return Err(StoreError::Corrupt { offset, reason: "stored block does not hash to its key".into() });
        }
        Ok(Some(block))
    }
}

fn scan(path: &Path) -> Result<(HashMap<Hash256, (u64, u32)>, u64), StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let total = r.get_ref().metadata()?.len();
    let mut index = HashMap::new();
    let mut pos = 0u64;
    let mut head = [0u8; 36];
    while pos < total {
        if total - pos < 36 {
            return Err(StoreError::Corrupt { offset: pos, reason: "truncated record header".into() });
        }
        r.read_exact(&mut head)?;
        let mut key = [0u8; 32];
        key.copy_from_slice(&head[..32]);
        let len = u32::from_le_bytes(head[32..].try_into().unwrap());
        if total - pos - 36 < len as u64 {
            return Err(StoreError::Corrupt { offset: pos, reason: "truncated record body".into() });
        }
        r.seek_relative(len as i64)?;
        index.insert(Hash256(key), (pos + 36, len));
        pos += 36 + len as u64;
    }
    Ok((index, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Address, Amount, Genesis};

    fn genesis() -> Genesis {
        Genesis::new(vec![(Address::default(), Amount(5))])
    }

    #[test]
    fn put_get_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let g = genesis().block();
        let m = Manifest::new(g.hash(), Hash256::ZERO);
        {
            let mut s = BlockStore::open(dir.path(), &m).unwrap();
            assert!(s.put(&g).unwrap());
            assert!(!s.put(&g).unwrap());
            s.flush().unwrap();
        }
        let s = BlockStore::open(dir.path(), &m).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(&g.hash()).unwrap().unwrap(), g);
        assert!(s.get(&Hash256::ZERO).unwrap().is_none());
    }

    #[test]
    fn foreign_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = genesis().block();
        BlockStore::open(dir.path(), &Manifest::new(g.hash(), Hash256::ZERO)).unwrap();
        let other = Manifest::new(g.hash(), Hash256([1; 32]));
        assert!(matches!(BlockStore::open(dir.path(), &other), Err(StoreError::ManifestMismatch { .. })));
    }

    #[test]
    fn torn_tail_detected() {
        let dir = tempfile::tempdir().unwrap();
        let g = genesis().block();
        let m = Manifest::new(g.hash(), Hash256::ZERO);
        BlockStore::open(dir.path(), &m).unwrap().put(&g).unwrap();
        let p = dir.path().join(STORE_FILE);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(BlockStore::open(dir.path(), &m), Err(StoreError::Corrupt { .. })));
    }
}
