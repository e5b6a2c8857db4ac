mod common;

use common::Fixture;
use rehost_core::decompress::detect_kernel_version;
use rehost_core::functions::KernelAnalysis;
use rehost_core::identify::{PointerCatalog, PointerKind};
use rehost_core::identify::{derive_data_slots, identify_pointers};

#[test]
fn every_applicable_entry_resolves_to_its_symbol() {
    let catalog = PointerCatalog::builtin();
    for fx in Fixture::all() {
        let version = detect_kernel_version(&fx.image).expect("banner");
        assert!(fx.name.ends_with(&version), "{}: detected {version}", fx.name);
        let analysis = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).unwrap();
        let out = identify_pointers(&analysis, &catalog, Some(&version));
        assert!(out.unresolved.is_empty(), "{}: unresolved {:?}", fx.name, out.unresolved);
        for spec in catalog.pointer.iter().filter(|p| p.applies_to(Some(&version))) {
            let got = out.resolutions[&spec.name].address;
            let want = match spec.kind {
                PointerKind::Function => fx.func(&spec.name),
                PointerKind::DataViaReturn => fx.func(if version.starts_with("2.6") { "lookup_machine_type" } else { "setup_machine_fdt" }),
            };
            assert_eq!(got, want, "{}: {} resolved to {got:#x}, symbol at {want:#x}", fx.name, spec.name);
            let used = out.resolutions[&spec.name].strategy_used;
            if Some(used) != spec.strategy {
                eprintln!("{}: {} declared {:?}, discriminated by {used:?}", fx.name, spec.name, spec.strategy);
            }
        }
        assert_eq!(
            out.resolutions.len(),
            catalog.pointer.iter().filter(|p| p.applies_to(Some(&version))).count(),
            "{}: resolutions outside the version family",
            fx.name
        );
    }
}

#[test]
fn slot_recipes_point_at_the_board_callbacks() {
    let catalog = PointerCatalog::builtin();
    for fx in Fixture::all() {
        let version = detect_kernel_version(&fx.image).unwrap();
        let analysis = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).unwrap();
        let out = identify_pointers(&analysis, &catalog, Some(&version));
        let recipes = derive_data_slots(&out, &catalog).unwrap();
        // the fixture's only machine_desc; in a real boot this is what the base function returns
        let desc = fx.object("board_desc");
        for r in &recipes {
            let mut slot = fx.word(desc + r.slot_offset);
            if r.indirect {
                slot = fx.word(slot);
            }
            let want = fx.func(if r.name == "init_irq" { "board_init_irq" } else { "board_timer_init" });
            assert_eq!(slot, want, "{}: {} slot", fx.name, r.name);
        }
    }
}
