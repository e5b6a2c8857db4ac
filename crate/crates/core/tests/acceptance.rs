//! One line per acceptance criterion. Every tolerance is pinned here; the test fails if any
//! criterion does.

mod common;
#[path = "oracle/a32.rs"]
mod a32;
#[path = "oracle/calls.rs"]
mod calls;
#[path = "oracle/codec.rs"]
mod codec;
#[path = "oracle/crc.rs"]
mod crc;
#[path = "oracle/permute.rs"]
mod permute;
#[path = "oracle/stub.rs"]
mod stub;
#[path = "oracle/walker.rs"]
mod walker;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::Fixture;
use rehost_core::container::{wrap_uimage, KernelBlob, UImageHeader};
use rehost_core::decompress::{decode_stream, decompress_payload, detect_kernel_version, locate_decompress_call, recover_output_start, DecompressError};
use rehost_core::disasm::linear_sweep;
use rehost_core::emu::{ImageView, RegisterState};
use rehost_core::functions::KernelAnalysis;
use rehost_core::identify::{identify_pointers, PointerCatalog, PointerKind};
use rehost_core::mmu::{run_until_exit, Access, AddressSpace, Perms, DEFAULT_OPAQUE_BASE, DEFAULT_OPAQUE_LEN};
use rehost_core::transplant;
use rehost_core::Execution;

const IDENTIFY_BUDGET: Duration = Duration::from_secs(60);
const MIN_FIXTURES: usize = 3;
const MIN_FAMILIES: usize = 2;
const DISASM_CORPUS: usize = 10_000;
const THUNK_SITE: u32 = 0x10000;
const THUNK_DISP: u32 = 72;
const THUNK_LITERAL: u32 = 0x10050;
const CALL_PAIRS: usize = 100;
const MIN_DRIVER: usize = 0x7000;
const OPAQUE_WRITES: usize = 1_000;
const GUEST_TRANSLATIONS: usize = 10_000;
const MAX_PAYLOAD: usize = 8 << 20;
const UIMAGE_PAYLOADS: usize = 50;
const CATALOG_PERMUTATIONS: usize = 10;

type Outcome = Result<String, String>;

fn fixture_identification() -> Outcome {
    let catalog = PointerCatalog::builtin();
    let fixtures = Fixture::all();
    let families: BTreeSet<String> = fixtures.iter().map(|f| f.name.split('.').take(2).collect::<Vec<_>>().join(".")).collect();
    if fixtures.len() < MIN_FIXTURES || families.len() < MIN_FAMILIES {
        return Err(format!("{} fixtures over {} families", fixtures.len(), families.len()));
    }
    let mut resolved = 0;
    let mut slowest = Duration::ZERO;
    for fx in &fixtures {
        let t = Instant::now();
        let version = detect_kernel_version(&fx.image).ok_or(format!("{}: no version banner", fx.name))?;
        let a = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).map_err(|e| e.to_string())?;
        let out = identify_pointers(&a, &catalog, Some(&version));
        slowest = slowest.max(t.elapsed());
        if !out.unresolved.is_empty() {
            return Err(format!("{}: unresolved {:?}", fx.name, out.unresolved.keys().collect::<Vec<_>>()));
        }
        let applicable: Vec<_> = catalog.pointer.iter().filter(|p| p.applies_to(Some(&version))).collect();
        if out.resolutions.len() != applicable.len() {
            return Err(format!("{}: {} resolutions for {} applicable entries", fx.name, out.resolutions.len(), applicable.len()));
        }
        for spec in applicable {
            let want = match spec.kind {
                PointerKind::Function => fx.func(&spec.name),
                PointerKind::DataViaReturn => fx.func(if version.starts_with("2.6") { "lookup_machine_type" } else { "setup_machine_fdt" }),
            };
            let got = out.resolutions[&spec.name].address;
            if got != want {
                return Err(format!("{}: {} at {got:#x}, symbol at {want:#x}", fx.name, spec.name));
            }
            resolved += 1;
        }
    }
    if slowest >= IDENTIFY_BUDGET {
        return Err(format!("slowest fixture took {slowest:?}"));
    }
    Ok(format!("{} fixtures, {} families, {resolved}/{resolved} exact, slowest {:.2?}", fixtures.len(), families.len(), slowest))
}

fn disassembly() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0a32);
    let mut blobs = 0;
    for fx in Fixture::all() {
        let n = linear_sweep(&fx.image, fx.symbols.load_base).map_err(|e| e.to_string())?.len();
        if n != fx.image.len() / 4 {
            return Err(format!("{}: {n} instructions for {} bytes", fx.name, fx.image.len()));
        }
        blobs += 1;
    }
    for _ in 0..200 {
        let words = rng.gen_range(0..4096);
        let blob: Vec<u8> = (0..words * 4).map(|_| rng.gen()).collect();
        if linear_sweep(&blob, rng.gen::<u32>() & !3).map(|v| v.len()) != Ok(words) {
            return Err(format!("random blob of {words} words"));
        }
        blobs += 1;
    }
    let a = a32::run(&mut rng, DISASM_CORPUS);
    if !a.disagreements.is_empty() {
        return Err(format!("{} disagreements, first {:?}", a.disagreements.len(), a.disagreements[0]));
    }
    Ok(format!("{blobs} sweeps exact, {} words agreed with the reference, 0 disagreements", a.agreed))
}

fn thunk_arithmetic() -> Outcome {
    // ten distinct far targets: thunk 0 heads the pool, its literal follows the ten thunks
    let names: Vec<String> = (0..10).map(|k| format!("f{k}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let drv = common::sample_driver(0x400, &refs, &[]);
    let load = THUNK_SITE - (drv.code.len() as u32 + drv.bss_size);
    let targets: BTreeMap<String, u32> = names.iter().enumerate().map(|(k, n)| (n.clone(), 0xc000_0000 + 0x40 * k as u32)).collect();
    let p = transplant::fixup(&drv, load, &calls::resolution(&targets), 0x10000).map_err(|e| e.to_string())?;
    let t = p.thunks.iter().find(|t| load + t.thunk_offset == THUNK_SITE).ok_or("no thunk at the site")?;
    let word = p.word(t.thunk_offset);
    let disp = word & 0xfff;
    // the load reads pc + 8 + disp
    let literal = THUNK_SITE + 8 + disp;
    if word & !0xfff != 0xe59f_c000 || disp != THUNK_DISP || literal != THUNK_LITERAL || load + t.slot_offset != literal {
        return Err(format!("thunk word {word:#010x}, literal {literal:#x}, slot {:#x}", load + t.slot_offset));
    }
    let mut space = AddressSpace::new(0x4000, (THUNK_SITE - 0x1000) & !0xfff, 0x2000).map_err(|e| e.to_string())?;
    space.load_driver(&p).map_err(|e| e.to_string())?;
    let exit = run_until_exit(&space, THUNK_SITE, RegisterState::unknown(), 4).map_err(|e| e.to_string())?;
    if exit.pc != t.target {
        return Err(format!("thunk exits to {:#x}, literal holds {:#x}", exit.pc, t.target));
    }
    Ok(format!("ldr ip, [pc, #{disp}] at {THUNK_SITE:#x} reads {literal:#x}"))
}

fn call_rewrite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xca11);
    let (_, outcomes) = calls::run_pairs(&mut rng, CALL_PAIRS);
    let far = outcomes.iter().filter(|o| o.far).count();
    if far == 0 || far == outcomes.len() {
        return Err(format!("{far}/{} beyond reach, the sample does not straddle it", outcomes.len()));
    }
    let bad: Vec<_> = outcomes.iter().filter(|o| !o.ok()).collect();
    if let Some(o) = bad.first() {
        return Err(format!("{} of {} wrong, e.g. {:#x} -> {:#x} exited at {:x?}", bad.len(), outcomes.len(), o.site, o.target, o.exit_pc));
    }
    Ok(format!("{}/{} reach target with lr = site + 4 ({far} through thunks)", outcomes.len(), outcomes.len()))
}

fn opaque_non_interference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0bad);
    let (mut space, touched) = walker::random_space(&mut rng, 256);
    space.set_section(0xc000_0000, 0, Perms::RWX);
    let drv = common::sample_driver(MIN_DRIVER, &["setup_irq"], &common::COMMON_IMPORTS);
    let names: BTreeMap<String, u32> = ["setup_irq", "irq_set_chip_data", "handle_level_irq", "platform_device_register"]
        .iter()
        .enumerate()
        .map(|(k, n)| (n.to_string(), 0xc000_8000 + 0x100 * k as u32))
        .collect();
    let patched = transplant::fixup(&drv, DEFAULT_OPAQUE_BASE, &calls::resolution(&names), DEFAULT_OPAQUE_LEN).map_err(|e| e.to_string())?;
    let before = space.phys.digest();
    space.load_driver(&patched).map_err(|e| e.to_string())?;
    for _ in 0..OPAQUE_WRITES {
        let len = rng.gen_range(1..=16u32);
        let v = DEFAULT_OPAQUE_BASE + rng.gen_range(0..DEFAULT_OPAQUE_LEN - len + 1);
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        space.write(v, &data).map_err(|e| e.to_string())?;
        if space.read(v, len, Access::Read).map_err(|e| e.to_string())? != data {
            return Err(format!("opaque write at {v:#x} not read back"));
        }
    }
    if space.phys.digest() != before {
        return Err("guest physical store changed".into());
    }
    let bad = walker::compare(&mut rng, &space, &touched, GUEST_TRANSLATIONS);
    if let Some(first) = bad.first() {
        return Err(format!("{} translation mismatches, first {first}", bad.len()));
    }
    Ok(format!(
        "{:#x}-byte driver, {OPAQUE_WRITES} opaque writes, digest unchanged, {GUEST_TRANSLATIONS}/{GUEST_TRANSLATIONS} translations match",
        patched.image.len()
    ))
}

fn locate(words: &[u32], base: u32) -> Result<u32, DecompressError> {
    let bytes = common::words(words);
    let instrs = linear_sweep(&bytes, base).unwrap();
    let call = locate_decompress_call(&instrs)?;
    recover_output_start(&instrs, call, Some(&ImageView::new(base, &bytes)), RegisterState::unknown())
}

fn decompression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0);
    let sizes = [1, rng.gen_range(2..4096), rng.gen_range(4096..1 << 20), rng.gen_range(1 << 20..MAX_PAYLOAD), MAX_PAYLOAD];
    let mut trips = 0;
    for &len in &sizes {
        let data = codec::payload(&mut rng, len);
        for kind in codec::CODECS {
            let stream = codec::encode(kind, &data);
            if decode_stream(&stream, kind).map_err(|e| e.to_string())? != data {
                return Err(format!("{kind:?} {len} bytes differ"));
            }
            let mut blob = common::words(&[0xe1a0_0000; 8]);
            blob.extend(&stream);
            let k = decompress_payload(&KernelBlob::from_bytes(blob)).map_err(|e| e.to_string())?;
            if k.codec != kind || k.bytes != data {
                return Err(format!("{kind:?} {len} bytes differ after scanning"));
            }
            trips += 2;
        }
    }
    let verbatim = locate(&stub::program(stub::VERBATIM, 0x8000_8000), 0x1000);
    if verbatim.as_ref().ok() != Some(&0x8000_8000) {
        return Err(format!("verbatim stub: {verbatim:?}"));
    }
    for _ in 0..100 {
        let r = stub::permuted(&mut rng);
        let start = rng.gen::<u32>() & !0xfff;
        match locate(&stub::program(r, start), 0x1000) {
            Ok(v) if v == start => {}
            other => return Err(format!("permuted stub {r:?}: {other:?}")),
        }
    }
    for _ in 0..200 {
        let ws = stub::soup(&mut rng);
        if !matches!(locate(&ws, 0), Err(DecompressError::PatternNotFound)) {
            return Err(format!("soup accepted: {ws:08x?}"));
        }
    }
    Ok(format!("{trips} round trips up to {MAX_PAYLOAD} bytes, verbatim + 100 permuted stubs found, 200 soups rejected"))
}

fn uimage_crc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4c);
    for k in 0..UIMAGE_PAYLOADS {
        let payload: Vec<u8> = (0..rng.gen_range(0..0x4_0000)).map(|_| rng.gen()).collect();
        let img = wrap_uimage(&payload, rng.gen(), rng.gen());
        let (stored, computed, data_stored, data_computed) = crc::uimage_sums(&img);
        let parsed = UImageHeader::parse_at(&img, 0).map_err(|e| e.to_string())?;
        if stored != computed || data_stored != data_computed || !parsed.data_crc_matches(&payload) {
            return Err(format!("payload {k}: header {stored:#x}/{computed:#x}, data {data_stored:#x}/{data_computed:#x}"));
        }
    }
    Ok(format!("{UIMAGE_PAYLOADS}/{UIMAGE_PAYLOADS} header and data checksums match the bitwise reference"))
}

fn determinism() -> Outcome {
    let base = PointerCatalog::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0de7);
    let perms = permute::permutations(&mut rng, &base, CATALOG_PERMUTATIONS);
    let mut runs = 0;
    for fx in Fixture::all() {
        let version = detect_kernel_version(&fx.image);
        let a = KernelAnalysis::new(fx.image.clone(), fx.symbols.load_base).map_err(|e| e.to_string())?;
        let want = permute::identify_bytes(&a, &base, version.as_deref(), Execution::Sequential);
        for (k, p) in perms.iter().enumerate() {
            let exec = if k % 2 == 0 { Execution::Parallel } else { Execution::Sequential };
            if permute::identify_bytes(&a, p, version.as_deref(), exec) != want {
                return Err(format!("{}: permutation {k} differs", fx.name));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} permuted runs byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fixture identification", fixture_identification),
        ("disassembly completeness and oracle agreement", disassembly),
        ("thunk literal arithmetic", thunk_arithmetic),
        ("call rewrite semantics", call_rewrite),
        ("opaque non-interference", opaque_non_interference),
        ("decompression round trip and stub location", decompression),
        ("uimage checksums", uimage_crc),
        ("identify determinism under catalog permutation", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
