//! Binary SHA-256 Merkle tree. Leaves are hashed once; an odd node at the end of a
//! level is paired with itself.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::Group;

pub type Hash = [u8; 32];

fn hash_leaf(leaf: &[u8]) -> Hash {
    Sha256::digest(leaf).into()
}

fn hash_node(l: &Hash, r: &Hash) -> Hash {
    let mut h = Sha256::new();
    h.update(l);
    h.update(r);
    h.finalize().into()
}

/// Leaf bytes for a registered client: `id (8 LE) ∥ pk_1 ∥ pk_2 ∥ pk_3`.
pub fn merkle_leaf<G: Group>(id: u64, pks: &[G::Element; 3]) -> Vec<u8> {
    let mut out = id.to_le_bytes().to_vec();
    for pk in pks {
        out.extend(G::element_to_bytes(pk));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleCommitment {
    /// `levels[0]` holds the leaf hashes, the last level holds the root.
    levels: Vec<Vec<Hash>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleProof {
    pub index: usize,
    pub siblings: Vec<Hash>,
}

pub fn merkle_commit<L: AsRef<[u8]>>(leaves: &[L]) -> Result<MerkleCommitment> {
    if leaves.is_empty() {
        return Err(Error::InvalidIndex { index: 0, len: 0 });
    }
    let mut levels = vec![leaves.iter().map(|l| hash_leaf(l.as_ref())).collect::<Vec<_>>()];
    while levels.last().expect("nonempty").len() > 1 {
        let next = levels
            .last()
            .expect("nonempty")
            .chunks(2)
            .map(|pair| hash_node(&pair[0], pair.get(1).unwrap_or(&pair[0])))
            .collect();
        levels.push(next);
    }
    Ok(MerkleCommitment { levels })
}

impl MerkleCommitment {
    pub fn root(&self) -> Hash {
        self.levels.last().expect("nonempty")[0]
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn prove(&self, index: usize) -> Result<MerkleProof> {
        if index >= self.len() {
            return Err(Error::InvalidIndex { index, len: self.len() });
        }
        let mut pos = index;
        let mut siblings = Vec::with_capacity(self.levels.len() - 1);
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = pos ^ 1;
            siblings.push(*level.get(sib).unwrap_or(&level[pos]));
            pos /= 2;
        }
        Ok(MerkleProof { index, siblings })
    }
}

pub fn merkle_verify(root: &Hash, leaf: &[u8], index: usize, proof: &MerkleProof) -> bool {
    if proof.index != index {
        return false;
    }
    let mut acc = hash_leaf(leaf);
    let mut pos = index;
    for sib in &proof.siblings {
        acc = if pos & 1 == 0 { hash_node(&acc, sib) } else { hash_node(sib, &acc) };
        pos /= 2;
    }
    pos == 0 && &acc == root
}
