//! The subgroup of squares in `Z_23^*`: order 11, generator 2.
//!
//! Small enough that every exponentiation and discrete log can be checked by hand.
//! Never use it for anything but tests.

use std::ops::{Add, Mul, Neg, Sub};

use super::{Backend, Group, GroupSpec};

const P: u64 = 23;
const Q: u64 = 11;
const G: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TinyScalar(u8);

impl TinyScalar {
    pub fn new(v: u64) -> Self {
        TinyScalar((v % Q) as u8)
    }

    pub fn value(self) -> u64 {
        self.0 as u64
    }
}

impl Add for TinyScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        TinyScalar::new(self.value() + rhs.value())
    }
}

impl Sub for TinyScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        TinyScalar::new(self.value() + Q - rhs.value())
    }
}

impl Mul for TinyScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        TinyScalar::new(self.value() * rhs.value())
    }
}

impl Neg for TinyScalar {
    type Output = Self;
    fn neg(self) -> Self {
        TinyScalar::new(Q - self.value())
    }
}

/// An element of the order-11 subgroup of `Z_23^*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TinyElement(u8);

impl TinyElement {
    /// Panics if `v` is not a member of the subgroup.
    pub fn new(v: u64) -> Self {
        Self::checked(v).expect("not a subgroup element")
    }

    pub fn checked(v: u64) -> Option<Self> {
        let v = v % P;
        (v != 0 && modpow(v, Q, P) == 1).then_some(TinyElement(v as u8))
    }

    pub fn value(self) -> u64 {
        self.0 as u64
    }

    fn discrete_log(self) -> u64 {
        (0..Q).find(|&e| modpow(G, e, P) == self.value()).expect("subgroup element has a discrete log")
    }
}

fn modpow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TinyGroup;

impl Group for TinyGroup {
    type Scalar = TinyScalar;
    type Element = TinyElement;
    type VerifyKey = TinyElement;

    const BACKEND: Backend = Backend::Test;
    const SCALAR_LEN: usize = 1;
    const ELEMENT_LEN: usize = 1;
    const VERIFY_KEY_LEN: usize = 1;

    fn spec() -> GroupSpec {
        GroupSpec {
            backend: Backend::Test,
            name: "Z23-squares",
            modulus: vec![P as u8],
            order: vec![Q as u8],
            generator: vec![G as u8],
            element_len: 1,
            scalar_len: 1,
        }
    }

    fn generator() -> TinyElement {
        TinyElement(G as u8)
    }

    fn identity() -> TinyElement {
        TinyElement(1)
    }

    fn op(a: &TinyElement, b: &TinyElement) -> TinyElement {
        TinyElement((a.value() * b.value() % P) as u8)
    }

    fn inverse(a: &TinyElement) -> TinyElement {
        TinyElement(modpow(a.value(), P - 2, P) as u8)
    }

    fn pow(base: &TinyElement, exp: &TinyScalar) -> TinyElement {
        TinyElement(modpow(base.value(), exp.value(), P) as u8)
    }

    fn scalar_from_u64(v: u64) -> TinyScalar {
        TinyScalar::new(v)
    }

    fn scalar_invert(s: &TinyScalar) -> Option<TinyScalar> {
        (s.0 != 0).then(|| TinyScalar::new(modpow(s.value(), Q - 2, Q)))
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> TinyScalar {
        TinyScalar::new(bytes.iter().fold(0u64, |r, &b| (r * 256 + b as u64) % Q))
    }

    fn scalar_to_bytes(s: &TinyScalar) -> Vec<u8> {
        vec![s.0]
    }

    fn scalar_from_bytes(bytes: &[u8]) -> Option<TinyScalar> {
        match bytes {
            [v] if (*v as u64) < Q => Some(TinyScalar(*v)),
            _ => None,
        }
    }

    fn element_to_bytes(e: &TinyElement) -> Vec<u8> {
        vec![e.0]
    }

    fn element_from_bytes(bytes: &[u8]) -> Option<TinyElement> {
        match bytes {
            [v] if (*v as u64) < P => TinyElement::checked(*v as u64),
            _ => None,
        }
    }

    fn element_from_candidate(candidate: &[u8; 64]) -> Option<TinyElement> {
        TinyElement::checked(candidate.iter().fold(0u64, |r, &b| (r * 256 + b as u64) % P))
    }

    fn verify_key(s: &TinyScalar) -> TinyElement {
        Self::pow_g(s)
    }

    fn verify_key_identity() -> TinyElement {
        Self::identity()
    }

    fn verify_key_op(a: &TinyElement, b: &TinyElement) -> TinyElement {
        Self::op(a, b)
    }

    fn verify_key_pow(a: &TinyElement, s: &TinyScalar) -> TinyElement {
        Self::pow(a, s)
    }

    fn verify_key_to_bytes(k: &TinyElement) -> Vec<u8> {
        Self::element_to_bytes(k)
    }

    fn verify_key_from_bytes(bytes: &[u8]) -> Option<TinyElement> {
        Self::element_from_bytes(bytes)
    }

    fn same_exponent(base: &TinyElement, value: &TinyElement, key: &TinyElement) -> bool {
        // Discrete logs are enumerable here.
        let b = base.discrete_log();
        let v = value.discrete_log();
        let k = key.discrete_log();
        if b == 0 {
            return v == 0;
        }
        b * k % Q == v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subgroup_is_the_squares() {
        let members: Vec<u64> = (1..P).filter(|v| TinyElement::checked(*v).is_some()).collect();
        assert_eq!(members, vec![1, 2, 3, 4, 6, 8, 9, 12, 13, 16, 18]);
        for v in members {
            assert_eq!(TinyGroup::pow(&TinyElement::new(v), &TinyScalar::new(11)), TinyGroup::identity());
        }
    }

    #[test]
    fn scalar_field_arithmetic() {
        let a = TinyScalar::new(7);
        let b = TinyScalar::new(9);
        assert_eq!((a + b).value(), 5);
        assert_eq!((a - b).value(), 9);
        assert_eq!((a * b).value(), 8);
        assert_eq!((-a).value(), 4);
        assert_eq!(TinyGroup::scalar_invert(&TinyScalar::new(2)), Some(TinyScalar::new(6)));
        assert_eq!(TinyGroup::scalar_invert(&TinyScalar::new(0)), None);
    }

    #[test]
    fn same_exponent_matches_enumeration() {
        for b in 1..Q {
            for x in 0..Q {
                for y in 0..Q {
                    let base = TinyGroup::pow_g(&TinyScalar::new(b));
                    let value = TinyGroup::pow(&base, &TinyScalar::new(x));
                    let key = TinyGroup::verify_key(&TinyScalar::new(y));
                    assert_eq!(TinyGroup::same_exponent(&base, &value, &key), x == y);
                }
            }
        }
    }

    #[test]
    fn encodings_are_canonical() {
        assert_eq!(TinyGroup::element_from_bytes(&[5]), None);
        assert_eq!(TinyGroup::element_from_bytes(&[0]), None);
        assert_eq!(TinyGroup::element_from_bytes(&[13]), Some(TinyElement(13)));
        assert_eq!(TinyGroup::scalar_from_bytes(&[11]), None);
        assert_eq!(TinyGroup::scalar_from_bytes(&[10, 0]), None);
    }
}
