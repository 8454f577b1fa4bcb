//! Shamir secret sharing over `Z_q`, multilevel threshold sharing and a Feldman DKG.
//!
//! Plain Shamir sharing has no integrity: reconstructing from a tampered share
//! silently yields a wrong secret. Transport integrity comes from the AE layer.

use rand_core::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::group::{check_index_set, interpolate_scalar, Group};

pub mod dkg;
pub mod multilevel;

pub use dkg::{commitment_eval, dkg_deal, dkg_deal_secret, dkg_run, DkgDealing, DkgOutcome, DkgParticipant};
pub use multilevel::{ml_deal_first_level, ml_extend_level, ml_reconstruct, AccessLevel, AccessStructure, DealerState};

/// One evaluation `(holder_id, f(holder_id))` of a sharing polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share<G: Group> {
    pub holder: u64,
    pub value: G::Scalar,
    /// 0 for plain Shamir, otherwise the access-structure level it was dealt at.
    pub level: u8,
}

impl<G: Group> Share<G> {
    pub fn encoded_len() -> usize {
        1 + 2 * G::SCALAR_LEN
    }

    /// `level (1 byte) ∥ holder_id (scalar bytes) ∥ value (scalar bytes)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len());
        out.push(self.level);
        out.extend(G::scalar_to_bytes(&G::scalar_from_u64(self.holder)));
        out.extend(G::scalar_to_bytes(&self.value));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::encoded_len() {
            return Err(Error::Malformed("share length"));
        }
        let (id_bytes, value_bytes) = bytes[1..].split_at(G::SCALAR_LEN);
        let id_scalar = G::scalar_from_bytes(id_bytes).ok_or(Error::Malformed("share holder"))?;
        let holder = id_bytes.iter().rev().take(8).rev().fold(0u64, |acc, b| (acc << 8) | *b as u64);
        if G::scalar_from_u64(holder) != id_scalar || holder == 0 {
            return Err(Error::Malformed("share holder"));
        }
        let value = G::scalar_from_bytes(value_bytes).ok_or(Error::Malformed("share value"))?;
        Ok(Share { holder, value, level: bytes[0] })
    }
}

/// A polynomial over `Z_q`, lowest coefficient first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial<G: Group> {
    coeffs: Vec<G::Scalar>,
}

impl<G: Group> Polynomial<G> {
    pub fn from_coefficients(coeffs: Vec<G::Scalar>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs a constant term");
        Polynomial { coeffs }
    }

    /// Uniformly random polynomial of the given degree with `f(0) = secret`.
    pub fn random<R: RngCore + CryptoRng>(secret: G::Scalar, degree: usize, rng: &mut R) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        coeffs.push(secret);
        coeffs.extend((0..degree).map(|_| G::random_scalar(rng)));
        Polynomial { coeffs }
    }

    pub fn coefficients(&self) -> &[G::Scalar] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: u64) -> G::Scalar {
        self.eval_scalar(&G::scalar_from_u64(x))
    }

    pub fn eval_scalar(&self, x: &G::Scalar) -> G::Scalar {
        self.coeffs.iter().rev().fold(G::scalar_zero(), |acc, c| acc * *x + *c)
    }

    pub fn constant(&self) -> G::Scalar {
        self.coeffs[0]
    }

    pub(crate) fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = G::scalar_zero();
        let coeffs =
            (0..n).map(|i| *self.coeffs.get(i).unwrap_or(&zero) + *other.coeffs.get(i).unwrap_or(&zero)).collect();
        Polynomial { coeffs }
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        let mut coeffs = vec![G::scalar_zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j] + *a * *b;
            }
        }
        Polynomial { coeffs }
    }

    /// Evaluates at every holder, tagging shares with `level`.
    pub fn shares_for(&self, holders: &[u64], level: u8) -> Vec<Share<G>> {
        holders.iter().map(|&holder| Share { holder, value: self.eval(holder), level }).collect()
    }
}

pub(crate) fn check_threshold<G: Group>(threshold: usize, holders: &[u64]) -> Result<()> {
    check_index_set::<G>(holders)?;
    if threshold == 0 || threshold > holders.len() {
        return Err(Error::ThresholdTooLarge { threshold, holders: holders.len() });
    }
    Ok(())
}

/// Deals `secret` to `holders` so that any `threshold` of them can reconstruct it.
pub fn ss_share<G: Group, R: RngCore + CryptoRng>(
    secret: G::Scalar,
    threshold: usize,
    holders: &[u64],
    rng: &mut R,
) -> Result<Vec<Share<G>>> {
    check_threshold::<G>(threshold, holders)?;
    Ok(Polynomial::<G>::random(secret, threshold - 1, rng).shares_for(holders, 0))
}

/// Same as [`ss_share`] but with a caller-chosen polynomial.
pub fn ss_share_with<G: Group>(poly: &Polynomial<G>, threshold: usize, holders: &[u64]) -> Result<Vec<Share<G>>> {
    check_threshold::<G>(threshold, holders)?;
    if poly.degree() + 1 != threshold {
        return Err(Error::InvalidConfig(format!(
            "polynomial of degree {} cannot realise threshold {threshold}",
            poly.degree()
        )));
    }
    Ok(poly.shares_for(holders, 0))
}

/// Recovers `f(0)` from the first `threshold` shares.
pub fn ss_reconstruct<G: Group>(shares: &[Share<G>], threshold: usize) -> Result<G::Scalar> {
    if threshold == 0 || shares.len() < threshold {
        return Err(Error::InsufficientShares { have: shares.len(), need: threshold.max(1) });
    }
    let points: Vec<(u64, G::Scalar)> = shares[..threshold].iter().map(|s| (s.holder, s.value)).collect();
    interpolate_scalar::<G>(&points)
}
