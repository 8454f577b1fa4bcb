//! Wire envelope `tag (1) ∥ body length (4 LE) ∥ body` and the canonical message bodies.
//!
//! Ids are 8-byte little-endian; id sets are a 4-byte LE count followed by ascending ids.
//! Group elements and scalars use their backend's fixed-length canonical encoding.

use crate::authcrypto::Signature;
use crate::error::{Error, Result};
use crate::group::Group;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    PkCommit = 0x01,
    RootSig = 0x02,
    SeedShare = 0x03,
    DkgDeal = 0x04,
    Model = 0x05,
    Report = 0x06,
    CheckReq = 0x07,
    DecResp = 0x08,
    TssReq = 0x09,
    TssPart = 0x0A,
    TssFull = 0x0B,
}

impl MsgType {
    pub const ALL: [MsgType; 11] = [
        MsgType::PkCommit,
        MsgType::RootSig,
        MsgType::SeedShare,
        MsgType::DkgDeal,
        MsgType::Model,
        MsgType::Report,
        MsgType::CheckReq,
        MsgType::DecResp,
        MsgType::TssReq,
        MsgType::TssPart,
        MsgType::TssFull,
    ];

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| *m as u8 == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::PkCommit => "PKCOMMIT",
            MsgType::RootSig => "ROOTSIG",
            MsgType::SeedShare => "SEEDSHARE",
            MsgType::DkgDeal => "DKGDEAL",
            MsgType::Model => "MODEL",
            MsgType::Report => "REPORT",
            MsgType::CheckReq => "CHECKREQ",
            MsgType::DecResp => "DECRESP",
            MsgType::TssReq => "TSSREQ",
            MsgType::TssPart => "TSSPART",
            MsgType::TssFull => "TSSFULL",
        }
    }
}

pub const ENVELOPE_HEADER: usize = 5;

pub fn seal(tag: MsgType, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ENVELOPE_HEADER + body.len());
    out.push(tag as u8);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
    out
}

/// Splits an envelope into its type and body.
pub fn open(bytes: &[u8]) -> Result<(MsgType, &[u8])> {
    if bytes.len() < ENVELOPE_HEADER {
        return Err(Error::Malformed("envelope header"));
    }
    let tag = MsgType::from_tag(bytes[0]).ok_or(Error::Malformed("message tag"))?;
    let len = u32::from_le_bytes(bytes[1..5].try_into().expect("4 bytes")) as usize;
    if bytes.len() != ENVELOPE_HEADER + len {
        return Err(Error::Malformed("envelope length"));
    }
    Ok((tag, &bytes[ENVELOPE_HEADER..]))
}

#[derive(Default, Debug)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// 4-byte length prefix followed by the bytes.
    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32).raw(bytes)
    }

    pub fn ids(&mut self, ids: &[u64]) -> &mut Self {
        self.u32(ids.len() as u32);
        for id in ids {
            self.u64(*id);
        }
        self
    }

    pub fn words(&mut self, words: &[u32]) -> &mut Self {
        self.u32(words.len() as u32);
        for w in words {
            self.u32(*w);
        }
        self
    }

    pub fn element<G: Group>(&mut self, e: &G::Element) -> &mut Self {
        self.raw(&G::element_to_bytes(e))
    }

    pub fn elements<G: Group>(&mut self, es: &[G::Element]) -> &mut Self {
        self.u32(es.len() as u32);
        for e in es {
            self.element::<G>(e);
        }
        self
    }

    pub fn scalar<G: Group>(&mut self, s: &G::Scalar) -> &mut Self {
        self.raw(&G::scalar_to_bytes(s))
    }

    pub fn signature(&mut self, sig: &Signature) -> &mut Self {
        self.u64(sig.signer).bytes(&sig.bytes)
    }
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Malformed("truncated body"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Malformed("trailing bytes"))
        }
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn count(&mut self, item_len: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(item_len) > self.buf.len() {
            return Err(Error::Malformed("count exceeds body"));
        }
        Ok(n)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.count(1)?;
        Ok(self.take(n)?.to_vec())
    }

    /// Reads an id set and checks that it is strictly ascending.
    pub fn ids(&mut self) -> Result<Vec<u64>> {
        let n = self.count(8)?;
        let ids = (0..n).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Malformed("id set not ascending"));
        }
        Ok(ids)
    }

    pub fn words(&mut self) -> Result<Vec<u32>> {
        let n = self.count(4)?;
        (0..n).map(|_| self.u32()).collect()
    }

    pub fn element<G: Group>(&mut self) -> Result<G::Element> {
        G::element_from_bytes(self.take(G::ELEMENT_LEN)?).ok_or(Error::Malformed("group element"))
    }

    pub fn elements<G: Group>(&mut self) -> Result<Vec<G::Element>> {
        let n = self.count(G::ELEMENT_LEN)?;
        (0..n).map(|_| self.element::<G>()).collect()
    }

    pub fn scalar<G: Group>(&mut self) -> Result<G::Scalar> {
        G::scalar_from_bytes(self.take(G::SCALAR_LEN)?).ok_or(Error::Malformed("scalar"))
    }

    pub fn verify_key<G: Group>(&mut self) -> Result<G::VerifyKey> {
        G::verify_key_from_bytes(self.take(G::VERIFY_KEY_LEN)?).ok_or(Error::Malformed("verify key"))
    }

    pub fn signature(&mut self) -> Result<Signature> {
        let signer = self.u64()?;
        Ok(Signature { signer, bytes: self.bytes()? })
    }
}

/// A message body with a fixed envelope tag.
pub trait WireMessage: Sized {
    const TYPE: MsgType;

    fn encode_body(&self, w: &mut Writer);

    fn decode_body(r: &mut Reader<'_>) -> Result<Self>;

    fn to_envelope(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_body(&mut w);
        seal(Self::TYPE, &w.into_bytes())
    }

    fn from_envelope(bytes: &[u8]) -> Result<Self> {
        let (tag, body) = open(bytes)?;
        if tag != Self::TYPE {
            return Err(Error::Malformed("unexpected message type"));
        }
        let mut r = Reader::new(body);
        let msg = Self::decode_body(&mut r)?;
        r.finish()?;
        Ok(msg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PkCommit<G: Group> {
    pub id: u64,
    pub pks: [G::Element; 3],
}

impl<G: Group> WireMessage for PkCommit<G> {
    const TYPE: MsgType = MsgType::PkCommit;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.id);
        for pk in &self.pks {
            w.element::<G>(pk);
        }
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        let id = r.u64()?;
        Ok(PkCommit { id, pks: [r.element::<G>()?, r.element::<G>()?, r.element::<G>()?] })
    }
}

/// Signed Merkle root together with the committed roster, ascending by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootSig<G: Group> {
    pub root: [u8; 32],
    pub sig: Signature,
    pub roster: Vec<PkCommit<G>>,
}

impl<G: Group> WireMessage for RootSig<G> {
    const TYPE: MsgType = MsgType::RootSig;

    fn encode_body(&self, w: &mut Writer) {
        w.raw(&self.root).signature(&self.sig).u32(self.roster.len() as u32);
        for entry in &self.roster {
            entry.encode_body(w);
        }
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        let root = r.take(32)?.try_into().expect("32 bytes");
        let sig = r.signature()?;
        let n = r.count(8 + 3 * G::ELEMENT_LEN)?;
        let roster = (0..n).map(|_| PkCommit::decode_body(r)).collect::<Result<_>>()?;
        Ok(RootSig { root, sig, roster })
    }
}

/// Encrypted seed shares from one client to one decryptor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedShareMsg {
    pub from: u64,
    pub to: u64,
    pub ciphertext: Vec<u8>,
}

impl WireMessage for SeedShareMsg {
    const TYPE: MsgType = MsgType::SeedShare;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.from).u64(self.to).bytes(&self.ciphertext);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        Ok(SeedShareMsg { from: r.u64()?, to: r.u64()?, ciphertext: r.bytes()? })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DkgMsg<G: Group> {
    /// Feldman commitments plus the recipient's share, encrypted under the pairwise
    /// transport key.
    Deal { dealer: u64, to: u64, commitments: Vec<G::Element>, ciphertext: Vec<u8> },
    /// `g2^{msk_u}` published once key generation completes.
    VerifyKey { from: u64, vk: G::VerifyKey },
}

impl<G: Group> WireMessage for DkgMsg<G> {
    const TYPE: MsgType = MsgType::DkgDeal;

    fn encode_body(&self, w: &mut Writer) {
        match self {
            DkgMsg::Deal { dealer, to, commitments, ciphertext } => {
                w.u8(0).u64(*dealer).u64(*to).elements::<G>(commitments).bytes(ciphertext);
            }
            DkgMsg::VerifyKey { from, vk } => {
                w.u8(1).u64(*from).raw(&G::verify_key_to_bytes(vk));
            }
        }
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        match r.u8()? {
            0 => Ok(DkgMsg::Deal {
                dealer: r.u64()?,
                to: r.u64()?,
                commitments: r.elements::<G>()?,
                ciphertext: r.bytes()?,
            }),
            1 => Ok(DkgMsg::VerifyKey { from: r.u64()?, vk: r.verify_key::<G>()? }),
            _ => Err(Error::Malformed("dkg message kind")),
        }
    }
}

/// Model announcement; the model itself is represented by its digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelMsg {
    pub t: u64,
    pub digest: [u8; 32],
}

impl WireMessage for ModelMsg {
    const TYPE: MsgType = MsgType::Model;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.t).raw(&self.digest);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        Ok(ModelMsg { t: r.u64()?, digest: r.take(32)?.try_into().expect("32 bytes") })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub id: u64,
    pub t: u64,
    pub y: Vec<u32>,
    pub m: Vec<u8>,
    pub sig: Signature,
}

impl WireMessage for Report {
    const TYPE: MsgType = MsgType::Report;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.id).u64(self.t).words(&self.y).bytes(&self.m).signature(&self.sig);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Report { id: r.u64()?, t: r.u64()?, y: r.words()?, m: r.bytes()?, sig: r.signature()? })
    }
}

/// One client's online attestation `(id, m_i, σ_i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attestation {
    pub id: u64,
    pub m: Vec<u8>,
    pub sig: Signature,
}

/// Survivor/dropout view sent to the decryptors; also the TSS request body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReq {
    pub t: u64,
    pub digest: [u8; 32],
    pub survivors: Vec<u64>,
    pub dropouts: Vec<u64>,
    pub attestations: Vec<Attestation>,
}

impl CheckReq {
    fn encode_into(&self, w: &mut Writer) {
        w.u64(self.t).raw(&self.digest).ids(&self.survivors).ids(&self.dropouts);
        w.u32(self.attestations.len() as u32);
        for a in &self.attestations {
            w.u64(a.id).bytes(&a.m).signature(&a.sig);
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self> {
        let t = r.u64()?;
        let digest = r.take(32)?.try_into().expect("32 bytes");
        let survivors = r.ids()?;
        let dropouts = r.ids()?;
        let n = r.count(8 + 4 + 8 + 4)?;
        let attestations = (0..n)
            .map(|_| Ok(Attestation { id: r.u64()?, m: r.bytes()?, sig: r.signature()? }))
            .collect::<Result<_>>()?;
        Ok(CheckReq { t, digest, survivors, dropouts, attestations })
    }
}

impl WireMessage for CheckReq {
    const TYPE: MsgType = MsgType::CheckReq;

    fn encode_body(&self, w: &mut Writer) {
        self.encode_into(w);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        Self::decode_from(r)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TssReq(pub CheckReq);

impl WireMessage for TssReq {
    const TYPE: MsgType = MsgType::TssReq;

    fn encode_body(&self, w: &mut Writer) {
        self.0.encode_into(w);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        CheckReq::decode_from(r).map(TssReq)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecBody<G: Group> {
    /// One-round mode: `c_seed`, `c_key` and the decryption shares `c_{u,i}`.
    Keyed { c_seed: Vec<u8>, c_key: G::Element, dec_shares: Vec<(u64, G::Element)> },
    /// TSS mode: the view is already certified, so the exponent shares travel as is.
    Plain { values: Vec<G::Element> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecResp<G: Group> {
    pub from: u64,
    pub t: u64,
    pub body: DecBody<G>,
}

impl<G: Group> WireMessage for DecResp<G> {
    const TYPE: MsgType = MsgType::DecResp;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.from).u64(self.t);
        match &self.body {
            DecBody::Keyed { c_seed, c_key, dec_shares } => {
                w.u8(0).bytes(c_seed).element::<G>(c_key).u32(dec_shares.len() as u32);
                for (id, c) in dec_shares {
                    w.u64(*id).element::<G>(c);
                }
            }
            DecBody::Plain { values } => {
                w.u8(1).elements::<G>(values);
            }
        }
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        let from = r.u64()?;
        let t = r.u64()?;
        let body = match r.u8()? {
            0 => {
                let c_seed = r.bytes()?;
                let c_key = r.element::<G>()?;
                let n = r.count(8 + G::ELEMENT_LEN)?;
                let dec_shares = (0..n).map(|_| Ok((r.u64()?, r.element::<G>()?))).collect::<Result<_>>()?;
                DecBody::Keyed { c_seed, c_key, dec_shares }
            }
            1 => DecBody::Plain { values: r.elements::<G>()? },
            _ => return Err(Error::Malformed("response kind")),
        };
        Ok(DecResp { from, t, body })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TssPart<G: Group> {
    pub from: u64,
    pub t: u64,
    pub on_survivors: G::Element,
    pub on_dropouts: G::Element,
}

impl<G: Group> WireMessage for TssPart<G> {
    const TYPE: MsgType = MsgType::TssPart;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.from).u64(self.t).element::<G>(&self.on_survivors).element::<G>(&self.on_dropouts);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        Ok(TssPart { from: r.u64()?, t: r.u64()?, on_survivors: r.element::<G>()?, on_dropouts: r.element::<G>()? })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TssFull<G: Group> {
    pub t: u64,
    pub survivors: Vec<u64>,
    pub dropouts: Vec<u64>,
    pub on_survivors: G::Element,
    pub on_dropouts: G::Element,
}

impl<G: Group> WireMessage for TssFull<G> {
    const TYPE: MsgType = MsgType::TssFull;

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.t)
            .ids(&self.survivors)
            .ids(&self.dropouts)
            .element::<G>(&self.on_survivors)
            .element::<G>(&self.on_dropouts);
    }

    fn decode_body(r: &mut Reader<'_>) -> Result<Self> {
        Ok(TssFull {
            t: r.u64()?,
            survivors: r.ids()?,
            dropouts: r.ids()?,
            on_survivors: r.element::<G>()?,
            on_dropouts: r.element::<G>()?,
        })
    }
}
