mod common;

use std::collections::BTreeSet;

use common::{eligible, Fixture};
use rehost_core::functions::KernelAnalysis;

#[test]
fn recovers_every_called_or_prologued_function() {
    for fx in Fixture::all() {
        let want = eligible(&fx);
        assert!(want.len() * 10 > fx.symbols.functions.len() * 8, "{}: oracle too narrow", fx.name);
        let analysis = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).unwrap();
        let got: BTreeSet<u32> = analysis.functions.iter().map(|f| f.entry).collect();
        let missed: Vec<_> = want.difference(&got).map(|a| format!("{a:#x}")).collect();
        assert!(missed.is_empty(), "{}: missed {missed:?}", fx.name);
    }
}

#[test]
fn function_bounds_stay_inside_their_symbol() {
    for fx in Fixture::all() {
        let analysis = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).unwrap();
        for s in fx.symbols.functions.values() {
            if let Some(f) = analysis.function(s.addr) {
                assert!(f.end <= s.addr + s.size, "{}: {:#x} runs to {:#x}, symbol ends {:#x}", fx.name, s.addr, f.end, s.addr + s.size);
            }
        }
    }
}

#[test]
fn recovers_nothing_but_eligible_functions() {
    for fx in Fixture::all() {
        let want = eligible(&fx);
        let analysis = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).unwrap();
        let got: BTreeSet<u32> = analysis.functions.iter().map(|f| f.entry).collect();
        let extra: Vec<_> = got.difference(&want).map(|a| format!("{a:#x}")).collect();
        assert!(extra.is_empty(), "{}: spurious {extra:?}", fx.name);
    }
}
