//! Prime-order group abstraction and the hashing/interpolation helpers built on it.
//!
//! All masks live "in the exponent": a seed `s` becomes the group element `g_t^s`,
//! which is expanded into a mask vector by [`prg_expand`]. Two backends implement
//! [`Group`]: [`Bls12G1`] for real runs and [`TinyGroup`] (p = 23, q = 11, g = 2)
//! whose every identity can be checked by hand.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use aes::cipher::{KeyIvInit, StreamCipher};
use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

mod bls;
mod tiny;

pub use bls::Bls12G1;
pub use tiny::{TinyElement, TinyGroup, TinyScalar};

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;

/// Which backend a [`GroupSpec`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Production,
    Test,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Production => "production",
            Backend::Test => "test",
        }
    }
}

/// Public description of a group backend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    pub backend: Backend,
    pub name: &'static str,
    /// Big-endian modulus of the base field (or of `Z_p^*` for the test group).
    pub modulus: Vec<u8>,
    /// Big-endian group order `q`.
    pub order: Vec<u8>,
    /// Canonical encoding of the fixed generator.
    pub generator: Vec<u8>,
    pub element_len: usize,
    pub scalar_len: usize,
}

/// A cyclic group of prime order `q` written multiplicatively, with scalar field `Z_q`.
///
/// `VerifyKey` lives in a group where "same discrete log" can be decided: the G2 side
/// of the pairing for the production backend, and the group itself for the test
/// backend (where discrete logs are found by enumeration).
pub trait Group: Copy + Debug + Send + Sync + 'static {
    type Scalar: Copy
        + Debug
        + Eq
        + Send
        + Sync
        + Add<Output = Self::Scalar>
        + Sub<Output = Self::Scalar>
        + Mul<Output = Self::Scalar>
        + Neg<Output = Self::Scalar>;
    type Element: Copy + Debug + Eq + Send + Sync;
    type VerifyKey: Copy + Debug + Eq + Send + Sync;

    const BACKEND: Backend;
    const SCALAR_LEN: usize;
    const ELEMENT_LEN: usize;
    const VERIFY_KEY_LEN: usize;

    fn spec() -> GroupSpec;

    fn generator() -> Self::Element;
    fn identity() -> Self::Element;
    /// The group operation.
    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn inverse(a: &Self::Element) -> Self::Element;
    fn pow(base: &Self::Element, exp: &Self::Scalar) -> Self::Element;

    fn multi_pow(bases: &[Self::Element], exps: &[Self::Scalar]) -> Self::Element {
        bases.iter().zip(exps).fold(Self::identity(), |acc, (b, e)| Self::op(&acc, &Self::pow(b, e)))
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar;
    fn scalar_invert(s: &Self::Scalar) -> Option<Self::Scalar>;
    /// Reduces 64 uniformly random bytes (big-endian) into `Z_q`.
    fn scalar_from_wide(bytes: &[u8; 64]) -> Self::Scalar;
    fn scalar_to_bytes(s: &Self::Scalar) -> Vec<u8>;
    /// Accepts only canonical encodings (`value < q`).
    fn scalar_from_bytes(bytes: &[u8]) -> Option<Self::Scalar>;

    fn element_to_bytes(e: &Self::Element) -> Vec<u8>;
    fn element_from_bytes(bytes: &[u8]) -> Option<Self::Element>;
    /// One hash-and-retry attempt: interpret a digest as a candidate element.
    fn element_from_candidate(candidate: &[u8; 64]) -> Option<Self::Element>;

    fn verify_key(s: &Self::Scalar) -> Self::VerifyKey;
    fn verify_key_identity() -> Self::VerifyKey;
    fn verify_key_op(a: &Self::VerifyKey, b: &Self::VerifyKey) -> Self::VerifyKey;
    fn verify_key_pow(a: &Self::VerifyKey, s: &Self::Scalar) -> Self::VerifyKey;
    fn verify_key_to_bytes(k: &Self::VerifyKey) -> Vec<u8>;
    fn verify_key_from_bytes(bytes: &[u8]) -> Option<Self::VerifyKey>;
    /// Decides `log_base(value) == log(key)`.
    fn same_exponent(base: &Self::Element, value: &Self::Element, key: &Self::VerifyKey) -> bool;

    fn scalar_zero() -> Self::Scalar {
        Self::scalar_from_u64(0)
    }

    fn scalar_one() -> Self::Scalar {
        Self::scalar_from_u64(1)
    }

    fn random_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Self::Scalar {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Self::scalar_from_wide(&wide)
    }

    fn random_nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Self::Scalar {
        loop {
            let s = Self::random_scalar(rng);
            if s != Self::scalar_from_u64(0) {
                return s;
            }
        }
    }

    /// `g^s` for the fixed generator.
    fn pow_g(s: &Self::Scalar) -> Self::Element {
        Self::pow(&Self::generator(), s)
    }

    fn div(a: &Self::Element, b: &Self::Element) -> Self::Element {
        Self::op(a, &Self::inverse(b))
    }

    fn is_identity(e: &Self::Element) -> bool {
        *e == Self::identity()
    }
}

/// Lagrange coefficients for evaluating at zero, keyed by share index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LagrangeCoefficients<G: Group> {
    coeffs: BTreeMap<u64, G::Scalar>,
}

impl<G: Group> LagrangeCoefficients<G> {
    pub fn get(&self, index: u64) -> Option<&G::Scalar> {
        self.coeffs.get(&index)
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &G::Scalar)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Checks that `indices` are nonzero and pairwise distinct as elements of `Z_q`.
pub fn check_index_set<G: Group>(indices: &[u64]) -> Result<()> {
    let zero = G::scalar_zero();
    let mut seen = std::collections::BTreeSet::new();
    for &i in indices {
        let s = G::scalar_from_u64(i);
        if s == zero || !seen.insert(G::scalar_to_bytes(&s)) {
            return Err(Error::InvalidIndexSet);
        }
    }
    Ok(())
}

/// `β_i = Π_{j≠i} j / (j − i)` for every `i` in `indices`.
pub fn lagrange_coefficients<G: Group>(indices: &[u64]) -> Result<LagrangeCoefficients<G>> {
    if indices.is_empty() {
        return Err(Error::InvalidIndexSet);
    }
    check_index_set::<G>(indices)?;
    let xs: Vec<G::Scalar> = indices.iter().map(|&i| G::scalar_from_u64(i)).collect();
    let mut coeffs = BTreeMap::new();
    for (a, &i) in indices.iter().enumerate() {
        let mut num = G::scalar_one();
        let mut den = G::scalar_one();
        for (b, xj) in xs.iter().enumerate() {
            if a != b {
                num = num * *xj;
                den = den * (*xj - xs[a]);
            }
        }
        let inv = G::scalar_invert(&den).ok_or(Error::InvalidIndexSet)?;
        coeffs.insert(i, num * inv);
    }
    Ok(LagrangeCoefficients { coeffs })
}

/// Interpolates `f(0)` from scalar points `(x, f(x))`.
pub fn interpolate_scalar<G: Group>(points: &[(u64, G::Scalar)]) -> Result<G::Scalar> {
    let idx: Vec<u64> = points.iter().map(|(i, _)| *i).collect();
    let coeffs = lagrange_coefficients::<G>(&idx)?;
    Ok(points.iter().fold(G::scalar_zero(), |acc, (i, y)| acc + *coeffs.get(*i).expect("coefficient per point") * *y))
}

/// `Π_u shares[u]^{β_u}` over the indices of `coeffs`.
pub fn interpolate_in_exponent<G: Group>(
    shares: &BTreeMap<u64, G::Element>,
    coeffs: &LagrangeCoefficients<G>,
) -> Result<G::Element> {
    let mut bases = Vec::with_capacity(coeffs.len());
    let mut exps = Vec::with_capacity(coeffs.len());
    for (i, beta) in coeffs.iter() {
        bases.push(*shares.get(&i).ok_or(Error::MissingShare(i))?);
        exps.push(*beta);
    }
    Ok(G::multi_pow(&bases, &exps))
}

const MAP_TO_POINT_TAG: &[u8] = b"secagg/map-to-point";
const HASH_TO_SCALAR_TAG: &[u8] = b"secagg/hash-to-scalar";
const PRG_KEY_TAG: &[u8] = b"secagg/prg-key";

fn wide_digest(tag: &[u8], counter: u32, input: &[u8]) -> [u8; 64] {
    let mut out = [0u8; 64];
    for (half, chunk) in out.chunks_mut(32).enumerate() {
        let mut h = Sha256::new();
        h.update(tag);
        h.update(counter.to_le_bytes());
        h.update([half as u8]);
        h.update(input);
        chunk.copy_from_slice(&h.finalize());
    }
    out
}

/// Hash-and-retry map from bytes to a non-identity group element.
pub fn map_to_point<G: Group>(input: &[u8]) -> G::Element {
    let mut counter = 0u32;
    loop {
        let candidate = wide_digest(MAP_TO_POINT_TAG, counter, input);
        if let Some(e) = G::element_from_candidate(&candidate) {
            if !G::is_identity(&e) {
                return e;
            }
        }
        counter += 1;
    }
}

pub fn hash_to_scalar<G: Group>(input: &[u8]) -> G::Scalar {
    G::scalar_from_wide(&wide_digest(HASH_TO_SCALAR_TAG, 0, input))
}

/// Streams mask entries in `Z_{2^32}` from a group element.
///
/// The element's canonical bytes are hashed to an AES-128 key and the CTR keystream
/// (zero IV) is read as little-endian `u32` words, so shorter expansions are prefixes
/// of longer ones.
pub fn prg_expand<G: Group>(seed: &G::Element, len: usize) -> Result<Vec<u32>> {
    if len == 0 {
        return Err(Error::EmptyExpansion);
    }
    let mut h = Sha256::new();
    h.update(PRG_KEY_TAG);
    h.update(G::element_to_bytes(seed));
    let digest = h.finalize();
    let mut key = [0u8; 16];
    key.copy_from_slice(&digest[..16]);
    let mut cipher = Aes128Ctr::new(&key.into(), &[0u8; 16].into());
    let mut bytes = vec![0u8; len * 4];
    cipher.apply_keystream(&mut bytes);
    Ok(bytes.chunks_exact(4).map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]])).collect())
}

/// `g_t = map_to_point(model_digest ∥ t)` with `t` as 8 bytes little-endian.
pub fn derive_round_generator<G: Group>(model_digest: &[u8], t: u64) -> G::Element {
    let mut input = Vec::with_capacity(model_digest.len() + 8);
    input.extend_from_slice(model_digest);
    input.extend_from_slice(&t.to_le_bytes());
    map_to_point::<G>(&input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    type T = TinyGroup;

    fn s(v: u64) -> TinyScalar {
        T::scalar_from_u64(v)
    }

    fn coeff_map(indices: &[u64]) -> Vec<(u64, u64)> {
        let c = lagrange_coefficients::<T>(indices).unwrap();
        c.iter().map(|(i, v)| (i, v.value())).collect()
    }

    // Direct formula evaluated with plain integer arithmetic mod 11.
    fn oracle_beta(indices: &[u64], i: u64) -> u64 {
        let q = 11i64;
        let inv = |a: i64| (1..q).find(|b| (a.rem_euclid(q) * b) % q == 1).unwrap();
        let mut acc = 1i64;
        for &j in indices {
            if j != i {
                acc = acc * j as i64 % q * inv(j as i64 - i as i64) % q;
            }
        }
        acc.rem_euclid(q) as u64
    }

    #[test]
    fn lagrange_pairs_match_direct_formula() {
        assert_eq!(coeff_map(&[1, 2]), vec![(1, 2), (2, 10)]);
        assert_eq!(oracle_beta(&[1, 2], 1), 2);
        assert_eq!(oracle_beta(&[1, 2], 2), 10);
        assert_eq!(coeff_map(&[1, 3]), vec![(1, 7), (3, 5)]);
        assert_eq!(coeff_map(&[5]), vec![(5, 1)]);
    }

    #[test]
    fn lagrange_one_three_interpolates_random_lines() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = T::random_scalar(&mut rng);
            let b = T::random_scalar(&mut rng);
            let f = |x: u64| a + b * s(x);
            assert_eq!(s(7) * f(1) + s(5) * f(3), f(0));
        }
    }

    #[test]
    fn lagrange_rejects_bad_index_sets() {
        assert_eq!(lagrange_coefficients::<T>(&[]), Err(Error::InvalidIndexSet));
        assert_eq!(lagrange_coefficients::<T>(&[0, 1]), Err(Error::InvalidIndexSet));
        assert_eq!(lagrange_coefficients::<T>(&[2, 2]), Err(Error::InvalidIndexSet));
        // 12 ≡ 1 mod 11
        assert_eq!(lagrange_coefficients::<T>(&[1, 12]), Err(Error::InvalidIndexSet));
        assert_eq!(lagrange_coefficients::<T>(&[11]), Err(Error::InvalidIndexSet));
    }

    #[test]
    fn interpolation_in_exponent_hand_example() {
        let shares: BTreeMap<u64, TinyElement> = [(1, TinyElement::new(12)), (2, TinyElement::new(4))].into();
        let c = lagrange_coefficients::<T>(&[1, 2]).unwrap();
        let out = interpolate_in_exponent::<T>(&shares, &c).unwrap();
        // 2^7 mod 23 computed directly
        assert_eq!(out.value(), (1..=7).fold(1u64, |a, _| a * 2 % 23));
        assert_eq!(out.value(), 13);
    }

    #[test]
    fn interpolation_in_exponent_trivial_cases() {
        let x = T::pow_g(&s(6));
        let shares: BTreeMap<u64, TinyElement> = [(5, x)].into();
        let c = lagrange_coefficients::<T>(&[5]).unwrap();
        assert_eq!(interpolate_in_exponent::<T>(&shares, &c).unwrap(), x);

        let ident: BTreeMap<u64, TinyElement> = [(1, T::identity()), (2, T::identity()), (3, T::identity())].into();
        let c = lagrange_coefficients::<T>(&[1, 2, 3]).unwrap();
        assert_eq!(interpolate_in_exponent::<T>(&ident, &c).unwrap(), T::identity());

        let c = lagrange_coefficients::<T>(&[1, 4]).unwrap();
        assert_eq!(interpolate_in_exponent::<T>(&ident, &c), Err(Error::MissingShare(4)));
    }

    fn exponent_equivalence<G: Group>(rng: &mut ChaCha20Rng, max_index: u64) {
        for trial in 0..100u64 {
            let k = 1 + (trial % 4) as usize;
            let coeffs: Vec<G::Scalar> = (0..k).map(|_| G::random_scalar(rng)).collect();
            let f = |x: u64| coeffs.iter().rev().fold(G::scalar_zero(), |acc, c| acc * G::scalar_from_u64(x) + *c);
            let start = 1 + trial % (max_index - k as u64 + 1);
            let idx: Vec<u64> = (start..start + k as u64).collect();
            let beta = lagrange_coefficients::<G>(&idx).unwrap();
            let sum = idx.iter().fold(G::scalar_zero(), |acc, &i| acc + *beta.get(i).unwrap() * f(i));
            assert_eq!(sum, f(0));
            let shares: BTreeMap<u64, G::Element> = idx.iter().map(|&i| (i, G::pow_g(&f(i)))).collect();
            assert_eq!(interpolate_in_exponent::<G>(&shares, &beta).unwrap(), G::pow_g(&f(0)));
        }
    }

    #[test]
    fn exponent_interpolation_equivalence_both_backends() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        exponent_equivalence::<TinyGroup>(&mut rng, 10);
        exponent_equivalence::<Bls12G1>(&mut rng, 40);
    }

    #[test]
    fn map_to_point_properties() {
        let a = map_to_point::<T>(b"hello");
        assert_eq!(a, map_to_point::<T>(b"hello"));
        assert_ne!(a, T::identity());
        assert_eq!(T::pow(&a, &s(0)), T::identity());
        assert_eq!(a.value().pow(11) % 23, 1);

        let p = map_to_point::<Bls12G1>(b"hello");
        assert_eq!(p, map_to_point::<Bls12G1>(b"hello"));
        assert!(!Bls12G1::is_identity(&p));
    }

    #[test]
    fn map_to_point_collision_scan() {
        let mut seen = std::collections::HashSet::new();
        for i in 0u32..10_000 {
            let e = map_to_point::<Bls12G1>(&i.to_le_bytes());
            assert!(seen.insert(Bls12G1::element_to_bytes(&e)), "collision at {i}");
        }
    }

    #[test]
    fn hash_to_scalar_deterministic_and_collision_free() {
        assert_eq!(hash_to_scalar::<T>(b""), hash_to_scalar::<T>(b""));
        assert_eq!(hash_to_scalar::<Bls12G1>(b""), hash_to_scalar::<Bls12G1>(b""));
        let mut seen = std::collections::HashSet::new();
        for i in 0u32..10_000 {
            let v = hash_to_scalar::<Bls12G1>(&i.to_be_bytes());
            assert!(seen.insert(Bls12G1::scalar_to_bytes(&v)));
        }
    }

    #[test]
    fn prg_contract() {
        let g = Bls12G1::generator();
        let a = prg_expand::<Bls12G1>(&g, 16_000).unwrap();
        assert_eq!(a, prg_expand::<Bls12G1>(&g, 16_000).unwrap());
        assert_eq!(prg_expand::<Bls12G1>(&g, 0), Err(Error::EmptyExpansion));
        let short = prg_expand::<Bls12G1>(&g, 5).unwrap();
        let long = prg_expand::<Bls12G1>(&g, 10).unwrap();
        assert_eq!(&long[..5], &short[..]);
    }

    #[test]
    fn prg_distinct_seeds_differ_almost_everywhere() {
        let g1 = Bls12G1::pow_g(&Bls12G1::scalar_from_u64(1));
        let g2 = Bls12G1::pow_g(&Bls12G1::scalar_from_u64(2));
        let a = prg_expand::<Bls12G1>(&g1, 1000).unwrap();
        let b = prg_expand::<Bls12G1>(&g2, 1000).unwrap();
        let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert!(differing >= 990, "only {differing} entries differ");
    }

    #[test]
    fn round_generator_scans() {
        let digest = [7u8; 32];
        assert_eq!(derive_round_generator::<Bls12G1>(&digest, 3), derive_round_generator::<Bls12G1>(&digest, 3));
        let mut seen = std::collections::HashSet::new();
        for t in 0..10_000u64 {
            let g = derive_round_generator::<Bls12G1>(&digest, t);
            assert!(seen.insert(Bls12G1::element_to_bytes(&g)));
        }
        let mut other = digest;
        other[31] ^= 1;
        for t in 0..100u64 {
            assert_ne!(derive_round_generator::<Bls12G1>(&digest, t), derive_round_generator::<Bls12G1>(&other, t));
        }
    }
}
