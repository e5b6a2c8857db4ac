mod common;

use common::*;
use rehost_core::container::{FirmwareImage, RegionKind};
use rehost_core::functions::KernelAnalysis;
use rehost_core::pipeline::{self, LoadBaseSource, PipelineOptions};
use rehost_core::transplant::{apply_patchset, FlatMemory, INIT_IRQ_EXPORT, INIT_TIME_EXPORT};
use rehost_core::identify::PointerCatalog;
use rehost_core::Execution;

#[test]
fn firmware_to_patched_driver_on_every_fixture() {
    let catalog = PointerCatalog::builtin();
    for fx in Fixture::all() {
        let base = fx.symbols.load_base;
        let fw = FirmwareImage::new(firmware(&fx.image, base & 0x000f_ffff), fx.name).unwrap();
        let calls = ["setup_irq", "irq_set_chip_data", "setup_irq"];
        let drv = sample_driver(0x7000, &calls, &COMMON_IMPORTS);
        let desc = fx.object("board_desc");
        let opts = PipelineOptions { machine_desc_addr: Some(desc), ..Default::default() };
        let out = pipeline::run(&fw, &catalog, Some(&drv), &opts).unwrap();
        let r = &out.report;

        assert_eq!(r.image.container, RegionKind::Uimage, "{}", fx.name);
        assert_eq!(r.image.codec, RegionKind::Gzip);
        assert_eq!(r.image.load_base, base);
        assert_eq!(r.image.load_base_source, LoadBaseSource::Stub);
        assert_eq!(r.image.decompressed_size, fx.image.len());
        assert_eq!(out.kernel.image.bytes, fx.image);
        let analysis = KernelAnalysis::new(fx.image.clone(), base).unwrap();
        assert_eq!(r.image.function_count, analysis.functions.len());

        assert!(r.resolution.unresolved.is_empty(), "{}: {:?}", fx.name, r.resolution.unresolved);
        assert_eq!(r.resolution.resolved, r.resolution.applicable);
        for (name, res) in &out.resolved.resolutions {
            if let Some(sym) = fx.symbols.functions.get(name) {
                assert_eq!(res.address, sym.addr, "{}: {name}", fx.name);
            }
        }

        let patch = r.patch.as_ref().unwrap();
        assert!(patch.phys_unchanged);
        assert_eq!(patch.imports_bound, COMMON_IMPORTS.len());
        // 0xd0000000 is 256 MiB above the kernel, and repeated targets share a thunk
        assert_eq!(patch.calls_thunked, 3);
        assert_eq!(patch.calls_direct, 0);
        assert_eq!(patch.forward_patches, 2);

        let driver = out.driver.as_ref().unwrap();
        let pool: std::collections::BTreeSet<u32> = driver.thunks.iter().map(|t| t.thunk_offset).collect();
        assert_eq!(pool.len(), 2);
        for (i, name) in COMMON_IMPORTS.iter().enumerate() {
            let slot = drv.imports[i].slot_offset;
            assert_eq!(driver.word(slot), fx.func(name));
        }

        let mut kernel = fx.image.clone();
        apply_patchset(&mut FlatMemory { base, bytes: &mut kernel }, &out.forward).unwrap();
        let word = |a: u32| u32::from_le_bytes(kernel[(a - base) as usize..][..4].try_into().unwrap());
        let (irq_off, time_slot) = if fx.name.contains("2.6") { (44, fx.word(desc + 48)) } else { (80, desc + 84) };
        assert_eq!(word(desc + irq_off), driver.entry_map[INIT_IRQ_EXPORT]);
        assert_eq!(word(time_slot), driver.entry_map[INIT_TIME_EXPORT]);
    }
}

#[test]
fn operator_load_base_wins() {
    let fx = Fixture::load("linux-4.4.52");
    let fw = FirmwareImage::new(firmware(&fx.image, 0x0000_8000), fx.name).unwrap();
    let opts = PipelineOptions { load_base: Some(0xc000_8000), exec: Execution::Sequential, ..Default::default() };
    let out = pipeline::run(&fw, &PointerCatalog::parse("").unwrap(), None, &opts).unwrap();
    assert_eq!(out.report.image.load_base_source, LoadBaseSource::Operator);
    assert!(out.report.patch.is_none());
    assert_eq!(out.report.resolution.applicable, 0);
}

#[test]
fn bare_gzip_falls_back_to_default_base() {
    let fx = Fixture::load("linux-3.18.20");
    let fw = FirmwareImage::new(gzip(&fx.image), "raw").unwrap();
    let k = pipeline::unpack_kernel(&fw, None).unwrap();
    assert_eq!(k.load_base_source, LoadBaseSource::Default);
    assert_eq!(k.image.load_base, rehost_core::decompress::DEFAULT_LOAD_BASE);
    assert_eq!(k.image.bytes, fx.image);
}

#[test]
fn virtual_base_keeps_the_offset_within_the_megabyte() {
    assert_eq!(pipeline::virtual_load_base(0x8000_8000), 0xc000_8000);
    assert_eq!(pipeline::virtual_load_base(0x0040_8000), 0xc000_8000);
    assert_eq!(pipeline::virtual_load_base(0xc000_8000), 0xc000_8000);
}

#[test]
fn sequential_and_parallel_reports_agree() {
    let fx = Fixture::load("linux-2.6.36");
    let fw = FirmwareImage::new(firmware(&fx.image, 0x8000), fx.name).unwrap();
    let catalog = PointerCatalog::builtin();
    let drv = sample_driver(0x400, &["setup_irq"], &["irq_to_desc"]);
    let run = |exec| {
        let opts = PipelineOptions { machine_desc_addr: Some(fx.object("board_desc")), exec, ..Default::default() };
        let out = pipeline::run(&fw, &catalog, Some(&drv), &opts).unwrap();
        (serde_json::to_value(&out.report.image).unwrap(), serde_json::to_value(&out.report.resolution).unwrap(), out.driver.unwrap().image, out.forward)
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}
