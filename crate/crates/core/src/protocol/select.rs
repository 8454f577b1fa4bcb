//! Participant selection and neighbour graphs, all derived from the model digest so
//! every honest party computes the same sets.

use sha2::{Digest, Sha256};

use super::Selection;
use crate::error::{Error, Result};

fn hash_u64(tag: &[u8], digest: &[u8], t: u64, extra: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(tag);
    h.update((digest.len() as u32).to_le_bytes());
    h.update(digest);
    h.update(t.to_le_bytes());
    for v in extra {
        h.update(v.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Pseudorandom `n_t`-subset of `1..=n`, ascending.
pub fn choose_set_static(digest: &[u8], t: u64, n_t: usize, n: usize) -> Result<Vec<u64>> {
    if n_t > n {
        return Err(Error::InvalidConfig(format!("cannot choose {n_t} of {n}")));
    }
    let mut ids: Vec<u64> = (1..=n as u64).collect();
    let mut counter = 0u64;
    for k in 0..n_t {
        let range = (n - k) as u64;
        // rejection sampling keeps the draw unbiased
        let zone = u64::MAX - u64::MAX % range;
        let r = loop {
            let v = hash_u64(b"secagg/choose-static", digest, t, &[counter]);
            counter += 1;
            if v < zone {
                break v % range;
            }
        };
        ids.swap(k, k + r as usize);
    }
    ids.truncate(n_t);
    ids.sort_unstable();
    Ok(ids)
}

/// Client `i` is selected iff `H(digest ∥ t ∥ i) mod m < n`.
pub fn choose_set_dynamic(digest: &[u8], t: u64, n: u64, m: u64, clients: usize) -> Result<Vec<u64>> {
    if m == 0 || n > m {
        return Err(Error::InvalidConfig(format!("selection probability {n}/{m} invalid")));
    }
    Ok((1..=clients as u64).filter(|&i| hash_u64(b"secagg/choose-dynamic", digest, t, &[i]) % m < n).collect())
}

pub fn choose_set(digest: &[u8], t: u64, selection: Selection, clients: usize) -> Result<Vec<u64>> {
    match selection {
        Selection::Static { n_t } => choose_set_static(digest, t, n_t, clients),
        Selection::Dynamic { n, m } => choose_set_dynamic(digest, t, n, m, clients),
    }
}

/// Symmetric edge rule over `S_t`; complete when `|S_t| ≤ A_t + 1`.
pub fn edge_present(digest: &[u8], t: u64, set_size: usize, degree: usize, i: u64, j: u64) -> bool {
    if i == j || degree == 0 {
        return false;
    }
    if set_size <= degree + 1 {
        return true;
    }
    let modulus = set_size.div_ceil(degree) as u64;
    hash_u64(b"secagg/edge", digest, t, &[i.min(j), i.max(j)]).is_multiple_of(modulus)
}

/// `A_{i,t}`, ascending.
pub fn find_neighbors(digest: &[u8], t: u64, selected: &[u64], i: u64, degree: usize) -> Result<Vec<u64>> {
    if selected.binary_search(&i).is_err() {
        return Err(Error::NotParticipant(i));
    }
    Ok(selected.iter().copied().filter(|&j| edge_present(digest, t, selected.len(), degree, i, j)).collect())
}
