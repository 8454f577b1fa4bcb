//! Multilevel threshold sharing: new holder sets are added level by level without
//! touching shares already issued.
//!
//! Level `i` has holder set `P_i` and cumulative threshold `κ_i`. A set `A` is
//! authorised iff `Σ_{j≤i} |A ∩ P_j| ≥ κ_i` for every level `i`. The dealer keeps one
//! polynomial per level; `f_{i+1}` agrees with `f_i` at zero and at every earlier
//! holder, so old shares stay valid.

use std::collections::BTreeSet;

use rand_core::{CryptoRng, RngCore};

use super::{Polynomial, Share};
use crate::error::{Error, Result};
use crate::group::{check_index_set, interpolate_scalar, Group};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessLevel {
    pub members: BTreeSet<u64>,
    pub threshold: usize,
}

/// Ordered levels, highest privilege first.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AccessStructure {
    levels: Vec<AccessLevel>,
}

impl AccessStructure {
    /// A plain `threshold`-of-`members` structure.
    pub fn single<G: Group>(members: &[u64], threshold: usize) -> Result<Self> {
        let mut gamma = AccessStructure::default();
        gamma.push_level::<G>(members, threshold)?;
        Ok(gamma)
    }

    /// Appends a level after validating the existence conditions.
    pub fn push_level<G: Group>(&mut self, members: &[u64], threshold: usize) -> Result<()> {
        let prior = self.total_holders();
        let mut all: Vec<u64> = self.all_members().collect();
        all.extend_from_slice(members);
        check_index_set::<G>(&all)?;
        if members.is_empty() {
            return Err(Error::InvalidIndexSet);
        }
        if let Some(last) = self.levels.last() {
            if threshold <= last.threshold || threshold < prior + 1 {
                return Err(Error::DegenerateExtension { threshold, prior_holders: prior });
            }
        }
        if threshold == 0 || threshold > prior + members.len() {
            return Err(Error::ThresholdTooLarge { threshold, holders: prior + members.len() });
        }
        self.levels.push(AccessLevel { members: members.iter().copied().collect(), threshold });
        Ok(())
    }

    pub fn levels(&self) -> &[AccessLevel] {
        &self.levels
    }

    pub fn total_holders(&self) -> usize {
        self.levels.iter().map(|l| l.members.len()).sum()
    }

    pub fn all_members(&self) -> impl Iterator<Item = u64> + '_ {
        self.levels.iter().flat_map(|l| l.members.iter().copied())
    }

    /// 1-based level of a holder.
    pub fn level_of(&self, holder: u64) -> Option<u8> {
        self.levels.iter().position(|l| l.members.contains(&holder)).map(|i| (i + 1) as u8)
    }

    /// Threshold of the deepest level.
    pub fn final_threshold(&self) -> usize {
        self.levels.last().map_or(0, |l| l.threshold)
    }

    pub fn is_satisfied(&self, holders: &BTreeSet<u64>) -> bool {
        if self.levels.is_empty() {
            return false;
        }
        let mut cumulative = 0;
        for level in &self.levels {
            cumulative += level.members.intersection(holders).count();
            if cumulative < level.threshold {
                return false;
            }
        }
        true
    }

    /// Smallest authorised subset of `available`, preferring higher-privilege holders.
    pub fn minimal_quorum(&self, available: &[u64]) -> Option<Vec<u64>> {
        let mut ranked: Vec<(u8, u64)> =
            available.iter().filter_map(|&id| self.level_of(id).map(|l| (l, id))).collect();
        ranked.sort_unstable();
        ranked.dedup();
        let mut chosen = BTreeSet::new();
        for (_, id) in ranked {
            chosen.insert(id);
            if self.is_satisfied(&chosen) {
                return Some(chosen.into_iter().collect());
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct DealtLevel<G: Group> {
    poly: Polynomial<G>,
    members: Vec<u64>,
}

/// Dealer-side record needed to extend a sharing to further levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DealerState<G: Group> {
    secret: G::Scalar,
    levels: Vec<DealtLevel<G>>,
    access: AccessStructure,
}

/// Shamir `(κ_1, |P_1|)` dealing that keeps `f_1` for later extension.
pub fn ml_deal_first_level<G: Group, R: RngCore + CryptoRng>(
    secret: G::Scalar,
    threshold: usize,
    members: &[u64],
    rng: &mut R,
) -> Result<(DealerState<G>, Vec<Share<G>>)> {
    let poly = Polynomial::<G>::random(secret, threshold.max(1) - 1, rng);
    DealerState::with_first_polynomial(poly, threshold, members)
}

impl<G: Group> DealerState<G> {
    /// First level from a caller-chosen polynomial (its degree fixes `κ_1`).
    pub fn with_first_polynomial(
        poly: Polynomial<G>,
        threshold: usize,
        members: &[u64],
    ) -> Result<(Self, Vec<Share<G>>)> {
        let access = AccessStructure::single::<G>(members, threshold)?;
        if poly.degree() + 1 != threshold {
            return Err(Error::InvalidConfig("polynomial degree does not match threshold".into()));
        }
        let shares = poly.shares_for(members, 1);
        let state = DealerState {
            secret: poly.constant(),
            levels: vec![DealtLevel { poly, members: members.to_vec() }],
            access,
        };
        Ok((state, shares))
    }

    /// Deals a fresh secret under every level of an existing structure.
    pub fn deal_under<R: RngCore + CryptoRng>(
        secret: G::Scalar,
        gamma: &AccessStructure,
        rng: &mut R,
    ) -> Result<(Self, Vec<Share<G>>)> {
        let mut levels = gamma.levels().iter();
        let first = levels.next().ok_or(Error::AccessDenied)?;
        let members: Vec<u64> = first.members.iter().copied().collect();
        let (mut state, mut shares) = ml_deal_first_level(secret, first.threshold, &members, rng)?;
        for level in levels {
            let members: Vec<u64> = level.members.iter().copied().collect();
            shares.extend(state.extend_level(level.threshold, &members, rng)?);
        }
        Ok((state, shares))
    }

    pub fn secret(&self) -> G::Scalar {
        self.secret
    }

    pub fn access_structure(&self) -> &AccessStructure {
        &self.access
    }

    /// Polynomial of the deepest level dealt so far.
    pub fn current_polynomial(&self) -> &Polynomial<G> {
        &self.levels.last().expect("at least one level").poly
    }

    pub fn polynomial(&self, level: usize) -> Option<&Polynomial<G>> {
        self.levels.get(level.checked_sub(1)?).map(|l| &l.poly)
    }

    /// Adds level `P_next` with cumulative threshold `κ_next`.
    ///
    /// Requires `κ_next ≥ N_prev + 1`; below that the interpolation constraints pin
    /// `f_next = f_prev` and the new threshold would be meaningless.
    pub fn extend_level<R: RngCore + CryptoRng>(
        &mut self,
        threshold: usize,
        members: &[u64],
        rng: &mut R,
    ) -> Result<Vec<Share<G>>> {
        let prior = self.access.total_holders();
        let free = threshold.saturating_sub(prior + 1);
        let h: Vec<G::Scalar> = (0..free).map(|_| G::random_scalar(rng)).collect();
        self.extend_level_with(threshold, members, &h)
    }

    /// [`Self::extend_level`] with explicit free coefficients
    /// (`κ_next − 1 − N_prev` of them).
    pub fn extend_level_with(
        &mut self,
        threshold: usize,
        members: &[u64],
        free_coefficients: &[G::Scalar],
    ) -> Result<Vec<Share<G>>> {
        let prior_members: Vec<u64> = self.access.all_members().collect();
        let mut next_access = self.access.clone();
        next_access.push_level::<G>(members, threshold)?;
        let free = threshold - 1 - prior_members.len();
        if free_coefficients.len() != free {
            return Err(Error::InvalidConfig(format!(
                "extension needs {free} free coefficients, got {}",
                free_coefficients.len()
            )));
        }
        let prev = self.current_polynomial();
        let poly = if free == 0 {
            prev.clone()
        } else {
            // vanishing polynomial x · Π (x − p) over 0 and all earlier holders
            let vanish = prior_members
                .iter()
                .fold(Polynomial::<G>::from_coefficients(vec![G::scalar_zero(), G::scalar_one()]), |acc, &p| {
                    acc.mul(&Polynomial::from_coefficients(vec![-G::scalar_from_u64(p), G::scalar_one()]))
                });
            let h = Polynomial::<G>::from_coefficients(free_coefficients.to_vec());
            prev.add(&vanish.mul(&h))
        };
        let level = (self.levels.len() + 1) as u8;
        let shares = poly.shares_for(members, level);
        self.levels.push(DealtLevel { poly, members: members.to_vec() });
        self.access = next_access;
        Ok(shares)
    }
}

/// Free-function form of [`DealerState::extend_level`].
pub fn ml_extend_level<G: Group, R: RngCore + CryptoRng>(
    state: &mut DealerState<G>,
    threshold: usize,
    members: &[u64],
    rng: &mut R,
) -> Result<Vec<Share<G>>> {
    state.extend_level(threshold, members, rng)
}

/// Reconstructs iff the holders of `shares` satisfy `gamma`.
///
/// Fewer shares than the first-level threshold gives `InsufficientShares`; any other
/// unauthorised set gives `AccessDenied`.
pub fn ml_reconstruct<G: Group>(shares: &[Share<G>], gamma: &AccessStructure) -> Result<G::Scalar> {
    let mut holders = BTreeSet::new();
    for s in shares {
        if gamma.level_of(s.holder) != Some(s.level) || !holders.insert(s.holder) {
            return Err(Error::AccessDenied);
        }
    }
    let first = gamma.levels().first().ok_or(Error::AccessDenied)?.threshold;
    if holders.len() < first {
        return Err(Error::InsufficientShares { have: holders.len(), need: first });
    }
    if !gamma.is_satisfied(&holders) {
        return Err(Error::AccessDenied);
    }
    // Every share lies on the deepest level's polynomial, whose degree is below |A|.
    let points: Vec<(u64, G::Scalar)> = shares.iter().map(|s| (s.holder, s.value)).collect();
    interpolate_scalar::<G>(&points)
}
