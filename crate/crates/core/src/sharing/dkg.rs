//! Joint-Feldman key generation: every participant deals a random secret with
//! coefficient commitments, and the master secret is the sum of all dealt secrets.
//!
//! A share that fails its commitment check aborts the run with `DkgComplaint(dealer)`.
//! There is no complaint-resolution phase.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};

use super::{check_threshold, Polynomial, Share};
use crate::error::{Error, Result};
use crate::group::Group;

/// One dealer's output: commitments `g^{a_j}` and one share per participant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DkgDealing<G: Group> {
    pub dealer: u64,
    pub commitments: Vec<G::Element>,
    pub shares: Vec<Share<G>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DkgOutcome<G: Group> {
    pub id: u64,
    pub mpk: G::Element,
    pub my_share: Share<G>,
    /// Per-dealer coefficient commitments.
    pub commitments: BTreeMap<u64, Vec<G::Element>>,
    aggregated: Vec<G::Element>,
}

impl<G: Group> DkgOutcome<G> {
    /// Commitments to the summed polynomial.
    pub fn aggregated_commitments(&self) -> &[G::Element] {
        &self.aggregated
    }

    /// `g^{msk_u}` for any participant, computed from the commitments alone.
    pub fn public_share(&self, holder: u64) -> G::Element {
        commitment_eval::<G>(&self.aggregated, holder)
    }
}

/// `Π C_k^{x^k}`, i.e. `g^{f(x)}` for the committed polynomial.
pub fn commitment_eval<G: Group>(commitments: &[G::Element], x: u64) -> G::Element {
    let x = G::scalar_from_u64(x);
    let mut power = G::scalar_one();
    let exps: Vec<G::Scalar> = commitments
        .iter()
        .map(|_| {
            let p = power;
            power = power * x;
            p
        })
        .collect();
    G::multi_pow(commitments, &exps)
}

/// Deals a fresh random secret; the secret is returned for test oracles only.
pub fn dkg_deal<G: Group, R: RngCore + CryptoRng>(
    dealer: u64,
    participants: &[u64],
    threshold: usize,
    rng: &mut R,
) -> Result<(DkgDealing<G>, G::Scalar)> {
    let secret = G::random_scalar(rng);
    Ok((dkg_deal_secret(dealer, secret, participants, threshold, rng)?, secret))
}

pub fn dkg_deal_secret<G: Group, R: RngCore + CryptoRng>(
    dealer: u64,
    secret: G::Scalar,
    participants: &[u64],
    threshold: usize,
    rng: &mut R,
) -> Result<DkgDealing<G>> {
    check_threshold::<G>(threshold, participants)?;
    let poly = Polynomial::<G>::random(secret, threshold - 1, rng);
    Ok(DkgDealing {
        dealer,
        commitments: poly.coefficients().iter().map(G::pow_g).collect(),
        shares: poly.shares_for(participants, 0),
    })
}

/// Receiving side of the DKG for one participant.
#[derive(Clone, Debug)]
pub struct DkgParticipant<G: Group> {
    id: u64,
    threshold: usize,
    participants: Vec<u64>,
    received: BTreeMap<u64, (Vec<G::Element>, G::Scalar)>,
}

impl<G: Group> DkgParticipant<G> {
    pub fn new(id: u64, participants: &[u64], threshold: usize) -> Result<Self> {
        check_threshold::<G>(threshold, participants)?;
        if !participants.contains(&id) {
            return Err(Error::NotParticipant(id));
        }
        Ok(DkgParticipant { id, threshold, participants: participants.to_vec(), received: BTreeMap::new() })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn receive(&mut self, dealer: u64, commitments: Vec<G::Element>, share: G::Scalar) -> Result<()> {
        if !self.participants.contains(&dealer) {
            return Err(Error::NotParticipant(dealer));
        }
        if commitments.len() != self.threshold {
            return Err(Error::DkgComplaint(dealer));
        }
        self.received.insert(dealer, (commitments, share));
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.received.len() == self.participants.len()
    }

    /// Verifies every received share and sums them.
    ///
    /// All dealers are checked at once; only on failure are they checked one by one
    /// to name the culprit.
    pub fn finish(self) -> Result<DkgOutcome<G>> {
        if let Some(&missing) = self.participants.iter().find(|p| !self.received.contains_key(p)) {
            return Err(Error::DkgComplaint(missing));
        }
        let mut aggregated = vec![G::identity(); self.threshold];
        let mut total = G::scalar_zero();
        for (commitments, share) in self.received.values() {
            for (acc, c) in aggregated.iter_mut().zip(commitments) {
                *acc = G::op(acc, c);
            }
            total = total + *share;
        }
        if G::pow_g(&total) != commitment_eval::<G>(&aggregated, self.id) {
            for (&dealer, (commitments, share)) in &self.received {
                if G::pow_g(share) != commitment_eval::<G>(commitments, self.id) {
                    return Err(Error::DkgComplaint(dealer));
                }
            }
            unreachable!("aggregate check failed but every dealer verified");
        }
        Ok(DkgOutcome {
            id: self.id,
            mpk: aggregated[0],
            my_share: Share { holder: self.id, value: total, level: 0 },
            commitments: self.received.into_iter().map(|(d, (c, _))| (d, c)).collect(),
            aggregated,
        })
    }
}

/// Runs the DKG in memory over `dealings`.
///
/// Every share passes through `transit(dealer, recipient, share)` before delivery,
/// which lets callers model a tampering channel.
pub fn dkg_run<G, F>(
    participants: &[u64],
    threshold: usize,
    dealings: &[DkgDealing<G>],
    mut transit: F,
) -> Result<BTreeMap<u64, DkgOutcome<G>>>
where
    G: Group,
    F: FnMut(u64, u64, G::Scalar) -> G::Scalar,
{
    let mut states: BTreeMap<u64, DkgParticipant<G>> = participants
        .iter()
        .map(|&id| DkgParticipant::new(id, participants, threshold).map(|p| (id, p)))
        .collect::<Result<_>>()?;
    for dealing in dealings {
        for share in &dealing.shares {
            let state = states.get_mut(&share.holder).ok_or(Error::NotParticipant(share.holder))?;
            let delivered = transit(dealing.dealer, share.holder, share.value);
            state.receive(dealing.dealer, dealing.commitments.clone(), delivered)?;
        }
    }
    states.into_iter().map(|(id, s)| s.finish().map(|o| (id, o))).collect()
}
