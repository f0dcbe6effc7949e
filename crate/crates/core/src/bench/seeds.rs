//! Stable seed derivation.
//!
//! Every stochastic step of a benchmark run draws its seed from the global
//! seed plus a list of name components, hashed with SHA-256. Seeds therefore
//! depend only on what a cell *is*, never on its position in the grid, so
//! adding or removing cells cannot perturb other cells' results, and the
//! derivation is stable across platforms and releases.

use sha2::{Digest, Sha256};

pub fn seed_for(global_seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    for part in parts {
        hasher.update([0x1f]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // frozen golden values (computed with an independent sha256 oracle):
        // changing them would silently re-seed every published benchmark
        assert_eq!(seed_for(42, &["split", "diabetes"]), 9666918380331267629);
        assert_eq!(
            seed_for(42, &["run", "diabetes", "tree", "dice", "0", "0"]),
            6863773680802970507
        );
    }

    #[test]
    fn parts_are_not_concatenation_ambiguous() {
        assert_ne!(seed_for(1, &["ab", "c"]), seed_for(1, &["a", "bc"]));
        assert_ne!(seed_for(1, &["x"]), seed_for(2, &["x"]));
    }
}
