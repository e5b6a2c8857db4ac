//! Randomised call sites for the out-of-range rewrite, executed through the opaque translation
//! layer rather than checked against the rewriter's own bookkeeping.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rehost_core::emu::{RegValue, RegisterState};
use rehost_core::identify::{Resolution, ResolvedCatalog, Strategy};
use rehost_core::mmu::{run_until_exit, AddressSpace, DEFAULT_OPAQUE_BASE, DEFAULT_OPAQUE_LEN};
use rehost_core::transplant::{self, PatchedDriver};

use crate::common;

pub const REACH: i64 = 32 << 20;

pub fn resolution(pairs: &BTreeMap<String, u32>) -> ResolvedCatalog {
    let mut r = ResolvedCatalog::default();
    for (n, &a) in pairs {
        r.resolutions.insert(n.clone(), Resolution { address: a, strategy_used: Strategy::I, candidates_considered: 1 });
    }
    r
}

/// A target for a call at `site`: about half hug the BL reach boundary, the rest are spread
/// over +-48 MiB. Never inside the window the site lives in.
pub fn target_for(rng: &mut ChaCha8Rng, site: u32, window: (u32, u32)) -> u32 {
    loop {
        let d: i64 = if rng.gen_bool(0.5) {
            let edge = if rng.gen_bool(0.5) { REACH } else { -REACH };
            edge + 4 * rng.gen_range(-64i64..=64)
        } else {
            4 * rng.gen_range(-(12i64 << 20)..=(12i64 << 20))
        };
        let t = (site as i64 + 8 + d) as u32;
        if t.wrapping_sub(window.0) >= window.1 {
            return t;
        }
    }
}

pub struct Outcome {
    pub site: u32,
    pub target: u32,
    pub far: bool,
    pub exit_pc: Option<u32>,
    pub lr: Option<RegValue>,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.exit_pc == Some(self.target) && self.lr == Some(RegValue::Known(self.site.wrapping_add(4)))
    }
}

/// Builds a driver with `n` calls at the default opaque base, retargets them at random
/// destinations, then runs every call site until it leaves the window.
pub fn run_pairs(rng: &mut ChaCha8Rng, n: usize) -> (PatchedDriver, Vec<Outcome>) {
    let names: Vec<String> = (0..n).map(|k| format!("callee_{k}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let drv = common::sample_driver(0x1000, &refs, &[]);
    let base = DEFAULT_OPAQUE_BASE;
    let window = (base, DEFAULT_OPAQUE_LEN);

    let mut targets = BTreeMap::new();
    for r in drv.relocs.iter().filter(|r| r.symbol.is_some()) {
        targets.insert(r.symbol.clone().unwrap(), target_for(rng, base + r.offset, window));
    }
    let patched = transplant::fixup(&drv, base, &resolution(&targets), DEFAULT_OPAQUE_LEN).unwrap();

    let mut space = AddressSpace::with_defaults(0x4000);
    space.load_driver(&patched).unwrap();
    let out = drv
        .relocs
        .iter()
        .filter(|r| r.symbol.is_some())
        .map(|r| {
            let site = base + r.offset;
            let target = targets[r.symbol.as_ref().unwrap()];
            let far = (target as i64 - (site as i64 + 8)).abs() >= REACH;
            let exit = run_until_exit(&space, site, RegisterState::unknown(), 16).ok();
            Outcome { site, target, far, exit_pc: exit.map(|e| e.pc), lr: exit.map(|e| e.lr) }
        })
        .collect();
    (patched, out)
}
