//! Identification output as bytes, for comparing runs over reordered catalogs.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use rehost_core::functions::KernelAnalysis;
use rehost_core::identify::{derive_data_slots, identify_pointers_with, PointerCatalog};
use rehost_core::Execution;

pub fn identify_bytes(a: &KernelAnalysis, catalog: &PointerCatalog, version: Option<&str>, exec: Execution) -> Vec<u8> {
    let resolved = identify_pointers_with(a, catalog, version, exec);
    let slots = derive_data_slots(&resolved, catalog).ok();
    serde_json::to_vec(&(resolved, slots)).unwrap()
}

/// `n` shuffles of the pointer records.
pub fn permutations(rng: &mut ChaCha8Rng, base: &PointerCatalog, n: usize) -> Vec<PointerCatalog> {
    (0..n)
        .map(|_| {
            let mut c = base.clone();
            c.pointer.shuffle(rng);
            c
        })
        .collect()
}
