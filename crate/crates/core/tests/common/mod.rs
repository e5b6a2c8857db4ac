#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::Deserialize;

pub const FIXTURES: [&str; 4] = ["linux-2.6.36", "linux-3.18.20", "linux-4.4.52", "linux-4.14.98"];

#[derive(Debug, Deserialize)]
pub struct Symbol {
    pub addr: u32,
    pub size: u32,
}

#[derive(Debug, Deserialize)]
pub struct Symbols {
    pub load_base: u32,
    pub functions: BTreeMap<String, Symbol>,
    pub objects: BTreeMap<String, Symbol>,
}

pub struct Fixture {
    pub name: &'static str,
    pub image: Vec<u8>,
    pub symbols: Symbols,
}

impl Fixture {
    pub fn load(name: &'static str) -> Fixture {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name);
        let image = std::fs::read(dir.join("Image")).expect("fixture image");
        let symbols = serde_json::from_slice(&std::fs::read(dir.join("symbols.json")).expect("fixture symbols")).expect("symbols.json");
        Fixture { name, image, symbols }
    }

    pub fn all() -> Vec<Fixture> {
        FIXTURES.iter().map(|n| Fixture::load(n)).collect()
    }

    pub fn func(&self, name: &str) -> u32 {
        self.symbols.functions.get(name).unwrap_or_else(|| panic!("{}: no symbol {name}", self.name)).addr
    }

    pub fn object(&self, name: &str) -> u32 {
        self.symbols.objects.get(name).unwrap_or_else(|| panic!("{}: no object {name}", self.name)).addr
    }

    pub fn word(&self, addr: u32) -> u32 {
        let off = (addr - self.symbols.load_base) as usize;
        u32::from_le_bytes(self.image[off..off + 4].try_into().unwrap())
    }
}

pub fn words(ws: &[u32]) -> Vec<u8> {
    ws.iter().flat_map(|w| w.to_le_bytes()).collect()
}

/// The head.S call site with `p` holding the output start.
pub fn head_stub(p: u32) -> Vec<u32> {
    vec![
        0xe3a0_0000,                     // mov r0, #0
        0xe482_0004,                     // str r0, [r2], #4
        0xe482_0004,
        0xe482_0004,
        0xe482_0004,
        0xe152_0003,                     // cmp r2, r3
        0x3aff_fff9,                     // blo 1b
        0xe310_0001 | p << 16,           // tst rp, #1
        0xe3c0_0001 | p << 16 | p << 12, // bic rp, rp, #1
        0x1b00_0010,                     // blne cache_on
        0xe1a0_0000 | p,                 // mov r0, rp
        0xe1a0_100d,                     // mov r1, sp
        0xe28d_2801,                     // add r2, sp, #0x10000
        0xe1a0_3007,                     // mov r3, r7
        0xeb00_0100,                     // bl decompress_kernel
    ]
}

pub fn gzip(data: &[u8]) -> Vec<u8> {
    use std::io::Write;
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(data).unwrap();
    enc.finish().unwrap()
}

/// `ldr r4, =output_start`, the call site, its literal, then the gzip stream and size trailer.
pub fn zimage(kernel: &[u8], output_start: u32) -> Vec<u8> {
    let mut ws = vec![0xe59f_4000 | (16 * 4 - 8)];
    ws.extend(head_stub(4));
    ws.push(output_start);
    let mut blob = words(&ws);
    blob.extend(gzip(kernel));
    blob.extend((kernel.len() as u32).to_le_bytes());
    blob
}

/// A uImage-wrapped zImage behind some bootloader padding.
pub fn firmware(kernel: &[u8], output_start: u32) -> Vec<u8> {
    let mut fw = vec![0xff; 0x400];
    fw.extend(rehost_core::container::wrap_uimage(&zimage(kernel, output_start), 0x8000, 0x8000));
    fw.extend([0xff; 0x100]);
    fw
}

/// Names resolved on every fixture.
pub const COMMON_IMPORTS: [&str; 4] = ["setup_irq", "irq_set_chip_data", "handle_level_irq", "platform_device_register"];

/// A driver of `code_len` bytes: init_irq calls each of `calls` and returns; one import slot per
/// `imports` entry at the end of code, plus one abs32 word pointing at its bss.
pub fn sample_driver(code_len: usize, calls: &[&str], imports: &[&str]) -> rehost_core::transplant::DriverObject {
    use rehost_core::transplant::*;
    let mut ws = vec![0xe92d_4010]; // push {r4, lr}
    let mut relocs = Vec::new();
    for name in calls {
        relocs.push(Reloc { offset: ws.len() as u32 * 4, kind: RelocKind::Call24, symbol: Some(name.to_string()) });
        ws.push(0xebff_fffe);
    }
    ws.push(0xe8bd_8010); // pop {r4, pc}
    let time = ws.len() as u32 * 4;
    ws.push(0xe12f_ff1e); // bx lr
    let n = code_len / 4;
    assert!(ws.len() + imports.len() + 1 <= n, "driver too small");
    ws.resize(n - imports.len() - 1, 0xe1a0_0000);
    let mut imps = Vec::new();
    for name in imports {
        imps.push(Import { name: name.to_string(), slot_offset: ws.len() as u32 * 4 });
        ws.push(0);
    }
    relocs.push(Reloc { offset: ws.len() as u32 * 4, kind: RelocKind::Abs32, symbol: None });
    ws.push(n as u32 * 4);
    DriverObject {
        code: words(&ws),
        relocs,
        imports: imps,
        exports: [(INIT_IRQ_EXPORT.to_string(), 0), (INIT_TIME_EXPORT.to_string(), time)].into(),
        bss_offset: n as u32 * 4,
        bss_size: 0x100,
    }
}

pub const MOV_IP_SP: u32 = 0xe1a0_c00d;

/// Entry words the recovery is expected to recognise, by raw mask rather than through the decoder.
pub fn is_prologue(w: u32) -> bool {
    // stmdb sp!, {.., lr}
    (w & 0xffff_4000) == 0xe92d_4000
        // str lr, [sp, #-4]!
        || w == 0xe52d_e004
}

/// Entries a recovery must find: direct BL targets and functions opening with a supported
/// prologue (optionally behind `mov ip, sp`).
pub fn eligible(fx: &Fixture) -> BTreeSet<u32> {
    let base = fx.symbols.load_base;
    let starts: BTreeSet<u32> = fx.symbols.functions.values().map(|s| s.addr).collect();
    let mut out = BTreeSet::new();
    for s in fx.symbols.functions.values() {
        let first = fx.word(s.addr);
        if is_prologue(first) || (first == MOV_IP_SP && is_prologue(fx.word(s.addr + 4))) {
            out.insert(s.addr);
        }
        for pc in (s.addr..s.addr + s.size).step_by(4) {
            let w = fx.word(pc);
            if w >> 28 != 0xf && (w & 0x0f00_0000) == 0x0b00_0000 {
                let off = ((w << 8) as i32 >> 6) as u32;
                let t = pc.wrapping_add(8).wrapping_add(off);
                if t >= base && starts.contains(&t) {
                    out.insert(t);
                }
            }
        }
    }
    out
}
