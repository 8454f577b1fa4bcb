//! Key pairs, Diffie-Hellman agreement, AES-GCM, Schnorr signatures and the Merkle
//! accumulator over registered public keys.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::{hash_to_scalar, Group};

pub mod merkle;

pub use merkle::{merkle_commit, merkle_leaf, merkle_verify, MerkleCommitment, MerkleProof};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum KeyPurpose {
    Mask = 1,
    AuthCrypt = 2,
    Decrypt = 3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair<G: Group> {
    pub sk: G::Scalar,
    pub pk: G::Element,
    pub purpose: KeyPurpose,
}

impl<G: Group> KeyPair<G> {
    pub fn from_secret(sk: G::Scalar, purpose: KeyPurpose) -> Self {
        KeyPair { sk, pk: G::pow_g(&sk), purpose }
    }

    pub fn generate<R: RngCore + CryptoRng>(purpose: KeyPurpose, rng: &mut R) -> Self {
        Self::from_secret(G::random_nonzero_scalar(rng), purpose)
    }
}

/// Mask, auth/crypt and decrypt key pairs, in that order.
pub fn keygen_triple<G: Group, R: RngCore + CryptoRng>(rng: &mut R) -> [KeyPair<G>; 3] {
    [
        KeyPair::generate(KeyPurpose::Mask, rng),
        KeyPair::generate(KeyPurpose::AuthCrypt, rng),
        KeyPair::generate(KeyPurpose::Decrypt, rng),
    ]
}

pub fn keygen_triple_from<G: Group>(sks: [G::Scalar; 3]) -> [KeyPair<G>; 3] {
    [
        KeyPair::from_secret(sks[0], KeyPurpose::Mask),
        KeyPair::from_secret(sks[1], KeyPurpose::AuthCrypt),
        KeyPair::from_secret(sks[2], KeyPurpose::Decrypt),
    ]
}

/// 128-bit AES-GCM key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AeKey([u8; 16]);

impl std::fmt::Debug for AeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AeKey(..)")
    }
}

impl AeKey {
    /// `SHA-256(prefix ∥ material)` truncated to 16 bytes.
    pub fn derive(prefix: &[u8], material: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(prefix);
        h.update(material);
        let mut key = [0u8; 16];
        key.copy_from_slice(&h.finalize()[..16]);
        AeKey(key)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

pub const SEED_PREFIX: &[u8] = b"secagg/ka/seed";
pub const TRANSPORT_PREFIX: &[u8] = b"secagg/ka/transport";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KaRole {
    Seed,
    Transport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KaOutput<G: Group> {
    Seed(G::Scalar),
    Transport(AeKey),
}

pub fn ka_agree<G: Group>(my_sk: &G::Scalar, their_pk: &G::Element, role: KaRole) -> Result<KaOutput<G>> {
    if G::is_identity(their_pk) {
        return Err(Error::InvalidPeerKey);
    }
    let shared = G::element_to_bytes(&G::pow(their_pk, my_sk));
    Ok(match role {
        KaRole::Seed => {
            let mut input = SEED_PREFIX.to_vec();
            input.extend_from_slice(&shared);
            KaOutput::Seed(hash_to_scalar::<G>(&input))
        }
        KaRole::Transport => KaOutput::Transport(AeKey::derive(TRANSPORT_PREFIX, &shared)),
    })
}

pub fn ka_seed<G: Group>(my_sk: &G::Scalar, their_pk: &G::Element) -> Result<G::Scalar> {
    match ka_agree::<G>(my_sk, their_pk, KaRole::Seed)? {
        KaOutput::Seed(s) => Ok(s),
        KaOutput::Transport(_) => unreachable!(),
    }
}

pub fn ka_transport<G: Group>(my_sk: &G::Scalar, their_pk: &G::Element) -> Result<AeKey> {
    match ka_agree::<G>(my_sk, their_pk, KaRole::Transport)? {
        KaOutput::Transport(k) => Ok(k),
        KaOutput::Seed(_) => unreachable!(),
    }
}

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

/// `purpose ∥ direction ∥ 0x0000 ∥ counter (8 LE)`.
///
/// `direction` is 1 when the sender id exceeds the receiver id, so the two ends of a
/// pairwise key never share a nonce space. Callers use the iteration index as the
/// counter for messages sent once per iteration.
pub fn ae_nonce(purpose: u8, sender: u64, receiver: u64, counter: u64) -> [u8; NONCE_LEN] {
    let mut nonce = [0u8; NONCE_LEN];
    nonce[0] = purpose;
    nonce[1] = (sender > receiver) as u8;
    nonce[4..].copy_from_slice(&counter.to_le_bytes());
    nonce
}

/// Returns `nonce ∥ body ∥ tag`.
pub fn ae_encrypt(key: &AeKey, nonce: &[u8; NONCE_LEN], plaintext: &[u8], ad: &[u8]) -> Vec<u8> {
    let cipher = Aes128Gcm::new(key.as_bytes().into());
    let body = cipher
        .encrypt(Nonce::from_slice(nonce), Payload { msg: plaintext, aad: ad })
        .expect("AES-GCM encryption of an in-memory buffer");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(nonce);
    out.extend_from_slice(&body);
    out
}

pub fn ae_decrypt(key: &AeKey, ciphertext: &[u8], ad: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < NONCE_LEN + TAG_LEN {
        return Err(Error::AeAuthFailure);
    }
    let (nonce, body) = ciphertext.split_at(NONCE_LEN);
    Aes128Gcm::new(key.as_bytes().into())
        .decrypt(Nonce::from_slice(nonce), Payload { msg: body, aad: ad })
        .map_err(|_| Error::AeAuthFailure)
}

/// Schnorr signature in `(e, s)` form: `e = H(R ∥ pk ∥ m)`, `s = k + e·sk`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub signer: u64,
    pub bytes: Vec<u8>,
}

const SIG_NONCE_TAG: &[u8] = b"secagg/ds/nonce";
const SIG_CHALLENGE_TAG: &[u8] = b"secagg/ds/challenge";

fn challenge<G: Group>(r: &G::Element, pk: &G::Element, m: &[u8]) -> G::Scalar {
    let mut input = SIG_CHALLENGE_TAG.to_vec();
    input.extend(G::element_to_bytes(r));
    input.extend(G::element_to_bytes(pk));
    input.extend_from_slice(m);
    hash_to_scalar::<G>(&input)
}

/// Deterministic nonce derived from the secret key and message.
pub fn ds_sign<G: Group>(signer: u64, sk: &G::Scalar, m: &[u8]) -> Signature {
    let mut input = SIG_NONCE_TAG.to_vec();
    input.extend(G::scalar_to_bytes(sk));
    input.extend_from_slice(m);
    let k = hash_to_scalar::<G>(&input);
    let pk = G::pow_g(sk);
    let e = challenge::<G>(&G::pow_g(&k), &pk, m);
    let s = k + e * *sk;
    let mut bytes = G::scalar_to_bytes(&e);
    bytes.extend(G::scalar_to_bytes(&s));
    Signature { signer, bytes }
}

pub fn ds_verify<G: Group>(pk: &G::Element, sig: &Signature, m: &[u8]) -> bool {
    if sig.bytes.len() != 2 * G::SCALAR_LEN {
        return false;
    }
    let (e_bytes, s_bytes) = sig.bytes.split_at(G::SCALAR_LEN);
    let (Some(e), Some(s)) = (G::scalar_from_bytes(e_bytes), G::scalar_from_bytes(s_bytes)) else {
        return false;
    };
    let r = G::multi_pow(&[G::generator(), *pk], &[s, -e]);
    challenge::<G>(&r, pk, m) == e
}

/// `"online" ∥ id (8 LE) ∥ t (8 LE)`.
pub fn online_message(id: u64, t: u64) -> Vec<u8> {
    let mut m = b"online".to_vec();
    m.extend_from_slice(&id.to_le_bytes());
    m.extend_from_slice(&t.to_le_bytes());
    m
}
