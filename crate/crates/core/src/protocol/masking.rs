//! Mask expansion and the entrywise arithmetic in `Z_{2^32}`.

use super::MaskTable;
use crate::error::Result;
use crate::group::{prg_expand, Group};

/// `(owner, owner)` for a self mask, `(min, max)` for a pairwise mask.
pub type MaskKey = (u64, u64);

/// Test hooks for mask derivation. The default is the real PRG everywhere.
#[derive(Clone, Debug, Default)]
pub struct MaskHooks {
    /// Replace every self mask by the zero vector.
    pub zero_self: bool,
    /// Fixed vectors that replace the PRG output for the listed keys.
    pub overrides: Option<MaskTable>,
}

impl MaskHooks {
    pub fn is_default(&self) -> bool {
        !self.zero_self && self.overrides.is_none()
    }

    /// Self mask of `owner`, or the pairwise mask of `(a, b)`, from `seed_element`.
    pub(crate) fn expand<G: Group>(
        &self,
        key: MaskKey,
        len: usize,
        seed_element: impl FnOnce() -> G::Element,
    ) -> Result<Vec<u32>> {
        if let Some(v) = self.overrides.as_ref().and_then(|o| o.get(&key)) {
            return Ok(v.clone());
        }
        if self.zero_self && key.0 == key.1 {
            return Ok(vec![0; len]);
        }
        prg_expand::<G>(&seed_element(), len)
    }
}

pub fn mask_key(a: u64, b: Option<u64>) -> MaskKey {
    match b {
        None => (a, a),
        Some(b) => (a.min(b), a.max(b)),
    }
}

/// `+1` iff `j > k`: the sign survivor `k` applied to its mask with dropout `j`.
pub fn mask_sign(k: u64, j: u64) -> i8 {
    if j > k {
        1
    } else {
        -1
    }
}

/// `acc += sign · v` entrywise mod `2^32`.
pub fn apply_masks(acc: &mut [u32], v: &[u32], sign: i8) {
    if sign >= 0 {
        for (a, b) in acc.iter_mut().zip(v) {
            *a = a.wrapping_add(*b);
        }
    } else {
        for (a, b) in acc.iter_mut().zip(v) {
            *a = a.wrapping_sub(*b);
        }
    }
}
