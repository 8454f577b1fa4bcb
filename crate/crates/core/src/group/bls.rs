//! BLS12-381 G1 as the production group, with G2 as the verification-key group.

use blstrs::{pairing, G1Affine, G1Projective, G2Affine, G2Projective, Scalar};
use ff::Field;
use group::{Curve, Group as _};

use super::{Backend, Group, GroupSpec};

/// Effective cofactor for G1 (`1 - z` for the BLS parameter `z`).
const G1_COFACTOR: u64 = 0xd201_0000_0001_0001;

const FIELD_MODULUS: [u8; 48] = [
    0x1a, 0x01, 0x11, 0xea, 0x39, 0x7f, 0xe6, 0x9a, 0x4b, 0x1b, 0xa7, 0xb6, 0x43, 0x4b, 0xac, 0xd7, 0x64, 0x77, 0x4b,
    0x84, 0xf3, 0x85, 0x12, 0xbf, 0x67, 0x30, 0xd2, 0xa0, 0xf6, 0xb0, 0xf6, 0x24, 0x1e, 0xab, 0xff, 0xfe, 0xb1, 0x53,
    0xff, 0xff, 0xb9, 0xfe, 0xff, 0xff, 0xff, 0xff, 0xaa, 0xab,
];

const GROUP_ORDER: [u8; 32] = [
    0x73, 0xed, 0xa7, 0x53, 0x29, 0x9d, 0x7d, 0x48, 0x33, 0x39, 0xd8, 0x08, 0x09, 0xa1, 0xd8, 0x05, 0x53, 0xbd, 0xa4,
    0x02, 0xff, 0xfe, 0x5b, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bls12G1;

fn clear_cofactor(p: &G1Projective) -> G1Projective {
    // Plain double-and-add: valid for points outside the prime-order subgroup.
    let mut acc = G1Projective::identity();
    for bit in (0..64).rev() {
        acc = acc.double();
        if (G1_COFACTOR >> bit) & 1 == 1 {
            acc += p;
        }
    }
    acc
}

impl Group for Bls12G1 {
    type Scalar = Scalar;
    type Element = G1Projective;
    type VerifyKey = G2Projective;

    const BACKEND: Backend = Backend::Production;
    const SCALAR_LEN: usize = 32;
    const ELEMENT_LEN: usize = 48;
    const VERIFY_KEY_LEN: usize = 96;

    fn spec() -> GroupSpec {
        GroupSpec {
            backend: Backend::Production,
            name: "BLS12-381-G1",
            modulus: FIELD_MODULUS.to_vec(),
            order: GROUP_ORDER.to_vec(),
            generator: G1Projective::generator().to_compressed().to_vec(),
            element_len: 48,
            scalar_len: 32,
        }
    }

    fn generator() -> G1Projective {
        G1Projective::generator()
    }

    fn identity() -> G1Projective {
        G1Projective::identity()
    }

    fn op(a: &G1Projective, b: &G1Projective) -> G1Projective {
        a + b
    }

    fn inverse(a: &G1Projective) -> G1Projective {
        -a
    }

    fn pow(base: &G1Projective, exp: &Scalar) -> G1Projective {
        base * exp
    }

    fn multi_pow(bases: &[G1Projective], exps: &[Scalar]) -> G1Projective {
        match bases.len() {
            0 => G1Projective::identity(),
            1 => bases[0] * exps[0],
            _ => G1Projective::multi_exp(bases, exps),
        }
    }

    fn scalar_from_u64(v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_invert(s: &Scalar) -> Option<Scalar> {
        s.invert().into()
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> Scalar {
        let radix = Scalar::from(u64::MAX) + Scalar::ONE;
        bytes.chunks_exact(8).fold(Scalar::ZERO, |acc, limb| {
            acc * radix + Scalar::from(u64::from_be_bytes(limb.try_into().expect("8-byte limb")))
        })
    }

    fn scalar_to_bytes(s: &Scalar) -> Vec<u8> {
        s.to_bytes_be().to_vec()
    }

    fn scalar_from_bytes(bytes: &[u8]) -> Option<Scalar> {
        let arr: &[u8; 32] = bytes.try_into().ok()?;
        Scalar::from_bytes_be(arr).into()
    }

    fn element_to_bytes(e: &G1Projective) -> Vec<u8> {
        e.to_compressed().to_vec()
    }

    fn element_from_bytes(bytes: &[u8]) -> Option<G1Projective> {
        let arr: &[u8; 48] = bytes.try_into().ok()?;
        Option::<G1Affine>::from(G1Affine::from_compressed(arr)).map(G1Projective::from)
    }

    fn element_from_candidate(candidate: &[u8; 64]) -> Option<G1Projective> {
        let mut x = [0u8; 48];
        x.copy_from_slice(&candidate[..48]);
        // compression flag, no infinity flag, sign bit taken from the spare bytes
        x[0] = (x[0] & 0x1f) | 0x80 | if candidate[48] & 1 == 1 { 0x20 } else { 0 };
        let point: Option<G1Affine> = G1Affine::from_compressed_unchecked(&x).into();
        let cleared = clear_cofactor(&G1Projective::from(point?));
        (!bool::from(cleared.is_identity())).then_some(cleared)
    }

    fn verify_key(s: &Scalar) -> G2Projective {
        G2Projective::generator() * s
    }

    fn verify_key_identity() -> G2Projective {
        G2Projective::identity()
    }

    fn verify_key_op(a: &G2Projective, b: &G2Projective) -> G2Projective {
        a + b
    }

    fn verify_key_pow(a: &G2Projective, s: &Scalar) -> G2Projective {
        a * s
    }

    fn verify_key_to_bytes(k: &G2Projective) -> Vec<u8> {
        k.to_compressed().to_vec()
    }

    fn verify_key_from_bytes(bytes: &[u8]) -> Option<G2Projective> {
        let arr: &[u8; 96] = bytes.try_into().ok()?;
        Option::<G2Affine>::from(G2Affine::from_compressed(arr)).map(G2Projective::from)
    }

    fn same_exponent(base: &G1Projective, value: &G1Projective, key: &G2Projective) -> bool {
        let lhs = pairing(&value.to_affine(), &G2Affine::from(G2Projective::generator()));
        let rhs = pairing(&base.to_affine(), &key.to_affine());
        lhs == rhs
    }
}
