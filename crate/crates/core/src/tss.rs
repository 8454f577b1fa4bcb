//! BLS-style threshold signatures under the DKG master key, used as the alternative
//! cross-check of the server's survivor/dropout view.
//!
//! `σ_u = H(m)^{msk_u}` and `σ = Π σ_u^{β_u} = H(m)^{msk}`. Partials are checked with
//! [`Group::same_exponent`] against each decryptor's published verify key, which in
//! turn must match the Feldman commitments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::group::{lagrange_coefficients, map_to_point, Group};
use crate::protocol::{ClientState, DecryptorState, RoundConfig, RoundState, ServerState};
use crate::sharing::commitment_eval;
use crate::wire::{CheckReq, DecResp, TssFull, TssPart};

/// Which side of the view a signature covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewPart {
    Survivors = 0,
    Dropouts = 1,
}

/// `"secagg/tss" ∥ part ∥ t ∥ count ∥ ids`.
pub fn tss_message(t: u64, part: ViewPart, ids: &[u64]) -> Vec<u8> {
    let mut m = b"secagg/tss".to_vec();
    m.push(part as u8);
    m.extend_from_slice(&t.to_le_bytes());
    m.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for id in ids {
        m.extend_from_slice(&id.to_le_bytes());
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartialSignature<G: Group> {
    pub signer: u64,
    pub value: G::Element,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThresholdSignature<G: Group> {
    pub value: G::Element,
}

pub fn tss_sign_share<G: Group>(signer: u64, msk_u: &G::Scalar, m: &[u8]) -> PartialSignature<G> {
    PartialSignature { signer, value: G::pow(&map_to_point::<G>(m), msk_u) }
}

/// Public verification material derived from a finished DKG.
#[derive(Clone, Debug)]
pub struct TssContext<G: Group> {
    threshold: usize,
    vks: BTreeMap<u64, G::VerifyKey>,
    master: G::VerifyKey,
}

impl<G: Group> TssContext<G> {
    /// Checks every verify key against `g^{msk_u}` from the aggregated commitments
    /// and interpolates the master verify key from the first `κ` of them.
    pub fn new(aggregated: &[G::Element], vks: &BTreeMap<u64, G::VerifyKey>) -> Result<Self> {
        let threshold = aggregated.len();
        if threshold == 0 {
            return Err(Error::InvalidConfig("no DKG commitments".into()));
        }
        let g = G::generator();
        for (&u, vk) in vks {
            if !G::same_exponent(&g, &commitment_eval::<G>(aggregated, u), vk) {
                return Err(Error::CommitmentMismatch(u));
            }
        }
        if vks.len() < threshold {
            return Err(Error::InsufficientShares { have: vks.len(), need: threshold });
        }
        let ids: Vec<u64> = vks.keys().copied().take(threshold).collect();
        let beta = lagrange_coefficients::<G>(&ids)?;
        let master = ids.iter().fold(G::verify_key_identity(), |acc, u| {
            G::verify_key_op(&acc, &G::verify_key_pow(&vks[u], beta.get(*u).expect("coefficient")))
        });
        if !G::same_exponent(&g, &aggregated[0], &master) {
            return Err(Error::CommitmentMismatch(0));
        }
        Ok(TssContext { threshold, vks: vks.clone(), master })
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn master_key(&self) -> &G::VerifyKey {
        &self.master
    }
}

pub fn tss_share_verify<G: Group>(ctx: &TssContext<G>, m: &[u8], partial: &PartialSignature<G>) -> Result<bool> {
    let vk = ctx.vks.get(&partial.signer).ok_or(Error::VerifyUnavailable(partial.signer))?;
    Ok(G::same_exponent(&map_to_point::<G>(m), &partial.value, vk))
}

/// Verifies every partial, then interpolates over the `κ` lowest signer ids.
pub fn tss_combine<G: Group>(
    ctx: &TssContext<G>,
    m: &[u8],
    partials: &[PartialSignature<G>],
) -> Result<ThresholdSignature<G>> {
    let mut by_signer: BTreeMap<u64, G::Element> = BTreeMap::new();
    for p in partials {
        by_signer.entry(p.signer).or_insert(p.value);
    }
    if by_signer.len() < ctx.threshold {
        return Err(Error::InsufficientShares { have: by_signer.len(), need: ctx.threshold });
    }
    for (&signer, &value) in &by_signer {
        let ok =
            tss_share_verify(ctx, m, &PartialSignature { signer, value }).map_err(|_| Error::CombineReject(signer))?;
        if !ok {
            return Err(Error::CombineReject(signer));
        }
    }
    let chosen: Vec<(u64, G::Element)> = by_signer.into_iter().take(ctx.threshold).collect();
    let ids: Vec<u64> = chosen.iter().map(|(u, _)| *u).collect();
    let beta = lagrange_coefficients::<G>(&ids)?;
    let bases: Vec<G::Element> = chosen.iter().map(|(_, v)| *v).collect();
    let exps: Vec<G::Scalar> = ids.iter().map(|u| *beta.get(*u).expect("coefficient")).collect();
    Ok(ThresholdSignature { value: G::multi_pow(&bases, &exps) })
}

pub fn tss_verify<G: Group>(ctx: &TssContext<G>, m: &[u8], sig: &ThresholdSignature<G>) -> bool {
    G::same_exponent(&map_to_point::<G>(m), &sig.value, &ctx.master)
}

/// Server side: combines the TSSPART messages into the TSSFULL broadcast.
pub fn server_crosscheck_alt<G: Group>(
    server: &ServerState<G>,
    round: &RoundState,
    parts: &[TssPart<G>],
) -> Result<TssFull<G>> {
    let ctx = TssContext::new(server.aggregated_commitments(), server.verify_keys())?;
    let parts: Vec<&TssPart<G>> = parts.iter().filter(|p| p.t == round.t).collect();
    let on = |part: ViewPart, ids: &[u64], pick: fn(&TssPart<G>) -> G::Element| {
        let partials: Vec<PartialSignature<G>> =
            parts.iter().map(|p| PartialSignature { signer: p.from, value: pick(p) }).collect();
        tss_combine(&ctx, &tss_message(round.t, part, ids), &partials)
    };
    let on_survivors = on(ViewPart::Survivors, &round.survivors, |p| p.on_survivors)?;
    let on_dropouts = on(ViewPart::Dropouts, &round.dropouts, |p| p.on_dropouts)?;
    Ok(TssFull {
        t: round.t,
        survivors: round.survivors.clone(),
        dropouts: round.dropouts.clone(),
        on_survivors: on_survivors.value,
        on_dropouts: on_dropouts.value,
    })
}

/// Decryptor side of TSSREQ: checks the view and signs both halves.
pub fn decryptor_tss_part<G: Group>(
    state: &DecryptorState<G>,
    client: &ClientState<G>,
    cfg: &RoundConfig,
    req: &CheckReq,
) -> Result<TssPart<G>> {
    state.check_view(client, cfg, req)?;
    let msk = state.msk_share().ok_or(Error::NotParticipant(state.id()))?;
    let sign = |part, ids: &[u64]| tss_sign_share::<G>(state.id(), &msk.value, &tss_message(cfg.t, part, ids)).value;
    Ok(TssPart {
        from: state.id(),
        t: cfg.t,
        on_survivors: sign(ViewPart::Survivors, &req.survivors),
        on_dropouts: sign(ViewPart::Dropouts, &req.dropouts),
    })
}

/// Decryptor side of TSSFULL: both signatures must cover the view this decryptor
/// checked, after which the exponent shares are released in the clear.
pub fn decryptor_tss_finish<G: Group>(
    state: &DecryptorState<G>,
    client: &ClientState<G>,
    cfg: &RoundConfig,
    req: &CheckReq,
    full: &TssFull<G>,
) -> Result<DecResp<G>> {
    let selected = state.check_view(client, cfg, req)?;
    let abort = |why: &str| Error::ConsistencyAbort(format!("decryptor {}: {why}", state.id()));
    if full.t != cfg.t || full.survivors != req.survivors || full.dropouts != req.dropouts {
        return Err(abort("certified view differs from the checked view"));
    }
    let ctx = TssContext::<G>::new(state.aggregated_commitments(), state.verify_keys())
        .map_err(|e| abort(&format!("no verification context: {e}")))?;
    for (part, ids, value) in [
        (ViewPart::Survivors, &req.survivors, full.on_survivors),
        (ViewPart::Dropouts, &req.dropouts, full.on_dropouts),
    ] {
        if !tss_verify(&ctx, &tss_message(cfg.t, part, ids), &ThresholdSignature { value }) {
            return Err(abort("threshold signature does not verify"));
        }
    }
    state.plain_response(cfg, &selected, req)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{interpolate_scalar, Bls12G1, TinyElement, TinyGroup, TinyScalar};
    use crate::sharing::{dkg_deal, dkg_run, DkgOutcome};
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};
    use std::collections::BTreeSet;

    type T = TinyGroup;

    fn subsets(ids: &[u64], k: usize) -> Vec<Vec<u64>> {
        let n = ids.len();
        (0u32..1 << n)
            .filter(|mask| mask.count_ones() as usize == k)
            .map(|mask| (0..n).filter(|b| mask >> b & 1 == 1).map(|b| ids[b]).collect())
            .collect()
    }

    fn dkg<G: Group>(ids: &[u64], kappa: usize, seed: u64) -> (Vec<DkgOutcome<G>>, G::Scalar) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut msk = G::scalar_zero();
        let dealings = ids
            .iter()
            .map(|&d| {
                let (dealing, secret) = dkg_deal::<G, _>(d, ids, kappa, &mut rng).unwrap();
                msk = msk + secret;
                dealing
            })
            .collect::<Vec<_>>();
        (dkg_run::<G, _>(ids, kappa, &dealings, |_, _, s| s).unwrap().into_values().collect(), msk)
    }

    fn context<G: Group>(outcomes: &[DkgOutcome<G>]) -> TssContext<G> {
        let vks = outcomes.iter().map(|o| (o.id, G::verify_key(&o.my_share.value))).collect();
        TssContext::new(outcomes[0].aggregated_commitments(), &vks).unwrap()
    }

    #[test]
    fn hand_example_in_test_group() {
        // 2^4 = 16, 16^3 = 2^12 = 2^1 = 2 (mod 23)
        let m =
            (0u32..).map(|i| i.to_le_bytes().to_vec()).find(|m| map_to_point::<T>(m) == TinyElement::new(16)).unwrap();
        let s = tss_sign_share::<T>(1, &TinyScalar::new(3), &m);
        assert_eq!(s.value, TinyElement::new(2));
        assert_eq!(s, tss_sign_share::<T>(1, &TinyScalar::new(3), &m));
    }

    #[test]
    fn partials_differ_across_messages() {
        let msk = Bls12G1::scalar_from_u64(987_654_321);
        let values: BTreeSet<Vec<u8>> = (0..1000u32)
            .map(|i| Bls12G1::element_to_bytes(&tss_sign_share::<Bls12G1>(1, &msk, &i.to_le_bytes()).value))
            .collect();
        assert_eq!(values.len(), 1000);
    }

    #[test]
    fn share_verification() {
        let (outcomes, _) = dkg::<T>(&[1, 2, 3, 4], 3, 1);
        let ctx = context(&outcomes);
        let m = tss_message(4, ViewPart::Survivors, &[1, 2]);
        let m2 = tss_message(4, ViewPart::Survivors, &[1, 3]);
        let honest = tss_sign_share::<T>(2, &outcomes[1].my_share.value, &m);
        assert_eq!(tss_share_verify(&ctx, &m, &honest), Ok(true));
        let other = tss_sign_share::<T>(2, &outcomes[1].my_share.value, &m2);
        // distinct only if the two messages hash to different points of an 11-element group
        assert_eq!(tss_share_verify(&ctx, &m, &other), Ok(map_to_point::<T>(&m) == map_to_point::<T>(&m2)));
        let stranger = PartialSignature { signer: 9, value: honest.value };
        assert_eq!(tss_share_verify(&ctx, &m, &stranger), Err(Error::VerifyUnavailable(9)));
    }

    #[test]
    fn random_elements_never_verify() {
        let (outcomes, _) = dkg::<Bls12G1>(&[1, 2, 3], 2, 2);
        let ctx = context(&outcomes);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m = tss_message(1, ViewPart::Dropouts, &[]);
        let accepted = (0..1000)
            .filter(|_| {
                let value = Bls12G1::pow_g(&Bls12G1::random_scalar(&mut rng));
                tss_share_verify(&ctx, &m, &PartialSignature { signer: 1 + rng.next_u64() % 3, value }).unwrap()
            })
            .count();
        assert_eq!(accepted, 0);
    }

    #[test]
    fn combine_against_harness_held_msk() {
        let (outcomes, msk) = dkg::<T>(&[1, 2, 3, 4, 5, 6], 4, 4);
        let ctx = context(&outcomes);
        let points: Vec<(u64, TinyScalar)> = outcomes.iter().map(|o| (o.id, o.my_share.value)).collect();
        assert_eq!(interpolate_scalar::<T>(&points[..4]).unwrap(), msk);
        let m = tss_message(2, ViewPart::Survivors, &[3, 5, 8]);
        let partials: Vec<_> = outcomes.iter().map(|o| tss_sign_share::<T>(o.id, &o.my_share.value, &m)).collect();
        let sig = tss_combine(&ctx, &m, &partials[..4]).unwrap();
        assert_eq!(sig.value, T::pow(&map_to_point::<T>(&m), &msk));
        assert!(tss_verify(&ctx, &m, &sig));
        assert_eq!(tss_combine(&ctx, &m, &partials[..3]), Err(Error::InsufficientShares { have: 3, need: 4 }));
        let mut forged = partials[..4].to_vec();
        forged[2].value = T::op(&forged[2].value, &T::generator());
        assert_eq!(tss_combine(&ctx, &m, &forged), Err(Error::CombineReject(3)));
    }

    #[test]
    fn robustness_exhaustive() {
        let ids = [1, 2, 3, 4, 5, 6];
        let (outcomes, msk) = dkg::<T>(&ids, 4, 5);
        let ctx = context(&outcomes);
        let m = tss_message(7, ViewPart::Dropouts, &[2, 9]);
        let expected = T::pow(&map_to_point::<T>(&m), &msk);
        let partials: BTreeMap<u64, PartialSignature<T>> =
            outcomes.iter().map(|o| (o.id, tss_sign_share::<T>(o.id, &o.my_share.value, &m))).collect();
        let pick = |s: &[u64]| s.iter().map(|u| partials[u]).collect::<Vec<_>>();
        let full = subsets(&ids, 4);
        assert_eq!(full.len(), 15);
        for s in &full {
            let sig = tss_combine(&ctx, &m, &pick(s)).unwrap();
            assert_eq!(sig.value, expected);
            assert!(tss_verify(&ctx, &m, &sig));
        }
        for s in subsets(&ids, 3) {
            assert_eq!(tss_combine(&ctx, &m, &pick(&s)), Err(Error::InsufficientShares { have: 3, need: 4 }));
        }
    }

    #[test]
    fn mismatched_verify_key_is_rejected() {
        let (outcomes, _) = dkg::<T>(&[1, 2, 3], 2, 6);
        let mut vks: BTreeMap<u64, TinyElement> =
            outcomes.iter().map(|o| (o.id, T::verify_key(&o.my_share.value))).collect();
        let bumped = T::op(&vks[&2], &T::generator());
        vks.insert(2, bumped);
        assert_eq!(
            TssContext::<T>::new(outcomes[0].aggregated_commitments(), &vks).unwrap_err(),
            Error::CommitmentMismatch(2)
        );
    }

    #[test]
    fn pairing_backend_combines() {
        let (outcomes, msk) = dkg::<Bls12G1>(&[1, 2, 3, 4], 3, 7);
        let ctx = context(&outcomes);
        assert_eq!(*ctx.master_key(), Bls12G1::verify_key(&msk));
        let m = tss_message(1, ViewPart::Survivors, &[1, 2, 3]);
        let partials: Vec<_> =
            outcomes.iter().map(|o| tss_sign_share::<Bls12G1>(o.id, &o.my_share.value, &m)).collect();
        let sig = tss_combine(&ctx, &m, &partials[1..]).unwrap();
        assert!(tss_verify(&ctx, &m, &sig));
        assert!(!tss_verify(&ctx, &tss_message(2, ViewPart::Survivors, &[1, 2, 3]), &sig));
    }
}
