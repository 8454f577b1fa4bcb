use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use secagg_core::protocol::Rate;

use crate::error::SimError;

/// Pseudorandom `⌊rate · |selected|⌋`-subset of `selected` for iteration `t`.
pub fn inject_dropouts(
    selected: &[u64],
    rate: Rate,
    eta_d: Rate,
    seed: u64,
    t: u64,
) -> Result<BTreeSet<u64>, SimError> {
    if rate > eta_d {
        return Err(SimError::InvalidPlan(format!("dropout rate {rate} exceeds η_D = {eta_d}")));
    }
    let k = rate.floor_of(selected.len());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(3_000_000 + t);
    Ok(sample(&mut rng, selected.len(), k).into_iter().map(|i| selected[i]).collect())
}
