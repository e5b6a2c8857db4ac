//! Turning a position-zero driver object into a blob that runs inside the opaque region.
//!
//! The pipeline is [`rebase`], then [`bind_backward`], then [`rewrite_out_of_range_calls`];
//! [`fixup`] runs all three from the relocations recorded in the object. Forward pointers are
//! planned separately with [`plan_forward_install`] and applied with [`apply_patchset`].
//!
//! Calls that cannot reach their target are redirected through a pool appended after bss, so no
//! original code offset ever moves:
//!
//! ```text
//! site:      bl<cond> thunk_k         ; sets lr = site + 4
//! thunk_k:   ldr ip, [pc, #disp]      ; slot_k = thunk_k + 8 + disp
//!            bx  ip
//! ...
//! slot_k:    .word target
//! ```
//!
//! A chunk of n thunks is followed by its n slots, so the k-th load uses `disp = 8n - 4k - 8`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disasm::{decode_word, Operation};
use crate::emu::LiteralMemory;
use crate::identify::{ResolvedCatalog, SlotRecipe};

pub const MAGIC: &[u8; 8] = b"ECMODRV1";
pub const INIT_IRQ_EXPORT: &str = "ECMO_init_irq";
pub const INIT_TIME_EXPORT: &str = "ECMO_init_time";

/// BL reach: a displacement `d` from `site + 8` is direct only when `|d| < BL_RANGE`.
pub const BL_RANGE: i64 = 32 << 20;
/// Thunks per pool chunk; keeps every literal displacement well inside the 12-bit field.
pub const THUNK_CHUNK: usize = 256;
pub const THUNK_BYTES: u32 = 8;

const LDR_IP_PC: u32 = 0xe59f_c000;
const BX_IP: u32 = 0xe12f_ff1c;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransplantError {
    #[error("malformed driver container: {0}")]
    Format(String),
    #[error("invalid driver object: {0}")]
    Invalid(String),
    #[error("load address {0:#010x} is not 4-aligned")]
    MisalignedLoad(u32),
    #[error("unresolved imports: {}", .0.join(", "))]
    UnresolvedImport(Vec<String>),
    #[error("thunk pool overflow: image needs {needed:#x} bytes, budget is {budget:#x}")]
    ThunkPoolOverflow { needed: u64, budget: u64 },
    #[error("offset {0:#x} does not hold a BL")]
    NotACall(u32),
    #[error("driver exports no {0}")]
    MissingExport(String),
    #[error("slot {0} is reached through a pointer and no kernel memory was supplied")]
    IndirectSlot(String),
    #[error("patch address {0:#010x} is not mapped")]
    UnmappedAddress(u32),
    #[error("patch address {0:#010x} is not 4-aligned")]
    MisalignedPatch(u32),
    #[error("patch address {0:#010x} appears twice")]
    DuplicatePatch(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelocKind {
    /// A 32-bit absolute address relative to the driver base.
    Abs32,
    /// A `BL` to the kernel function named by `symbol`.
    Call24,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reloc {
    pub offset: u32,
    pub kind: RelocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Import {
    pub name: String,
    pub slot_offset: u32,
}

/// Driver linked at address 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverObject {
    pub code: Vec<u8>,
    pub relocs: Vec<Reloc>,
    pub imports: Vec<Import>,
    pub exports: BTreeMap<String, u32>,
    /// Always `code.len()`: bss follows the code directly.
    pub bss_offset: u32,
    pub bss_size: u32,
}

impl DriverObject {
    pub fn validate(&self) -> Result<(), TransplantError> {
        let bad = |m: String| Err(TransplantError::Invalid(m));
        let len = self.code.len() as u64;
        if len % 4 != 0 {
            return bad(format!("code length {len:#x} is not a multiple of 4"));
        }
        if self.bss_offset as u64 != len {
            return bad(format!("bss offset {:#x} does not follow the code ({len:#x})", self.bss_offset));
        }
        let mut calls = BTreeSet::new();
        for r in &self.relocs {
            if r.offset as u64 + 4 > len {
                return bad(format!("relocation at {:#x} runs past the code", r.offset));
            }
            if r.offset % 4 != 0 {
                return bad(format!("relocation at {:#x} is not 4-aligned", r.offset));
            }
            if r.kind == RelocKind::Call24 {
                if r.symbol.is_none() {
                    return bad(format!("call relocation at {:#x} names no symbol", r.offset));
                }
                calls.insert(r.offset);
            }
        }
        for i in &self.imports {
            if i.slot_offset % 4 != 0 || i.slot_offset as u64 + 4 > len {
                return bad(format!("import {} slot {:#x} is not an aligned word of the code", i.name, i.slot_offset));
            }
            if calls.contains(&i.slot_offset) {
                return bad(format!("import {} slot {:#x} is also a call site", i.name, i.slot_offset));
            }
        }
        for (name, &off) in &self.exports {
            if off as u64 >= len {
                return bad(format!("export {name} at {off:#x} lies outside the code"));
            }
        }
        for need in [INIT_IRQ_EXPORT, INIT_TIME_EXPORT] {
            if !self.exports.contains_key(need) {
                return bad(format!("missing export {need}"));
            }
        }
        Ok(())
    }

    /// Parses an `ECMODRV1` container. See `docs/ecmodrv.md` for the layout.
    pub fn from_bytes(data: &[u8]) -> Result<Self, TransplantError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(TransplantError::Format("bad magic".into()));
        }
        let code_len = r.u32()? as usize;
        let bss_offset = r.u32()?;
        let bss_size = r.u32()?;
        let n_relocs = r.u32()?;
        let n_imports = r.u32()?;
        let n_exports = r.u32()?;
        let code = r.take(code_len)?.to_vec();
        r.align()?;
        let mut relocs = Vec::new();
        for _ in 0..n_relocs {
            let offset = r.u32()?;
            let kind = match r.u32()? {
                0 => RelocKind::Abs32,
                1 => RelocKind::Call24,
                k => return Err(TransplantError::Format(format!("unknown relocation kind {k}"))),
            };
            let symbol = r.string()?;
            let symbol = (!symbol.is_empty()).then_some(symbol);
            relocs.push(Reloc { offset, kind, symbol });
        }
        let mut imports = Vec::new();
        for _ in 0..n_imports {
            let slot_offset = r.u32()?;
            imports.push(Import { name: r.string()?, slot_offset });
        }
        let mut exports = BTreeMap::new();
        for _ in 0..n_exports {
            let off = r.u32()?;
            let name = r.string()?;
            if exports.insert(name.clone(), off).is_some() {
                return Err(TransplantError::Format(format!("export {name} appears twice")));
            }
        }
        if r.pos != data.len() {
            return Err(TransplantError::Format(format!("{} trailing bytes", data.len() - r.pos)));
        }
        let drv = DriverObject { code, relocs, imports, exports, bss_offset, bss_size };
        drv.validate()?;
        Ok(drv)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        for v in [
            self.code.len() as u32,
            self.bss_offset,
            self.bss_size,
            self.relocs.len() as u32,
            self.imports.len() as u32,
            self.exports.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.code);
        pad4(&mut out);
        for r in &self.relocs {
            out.extend_from_slice(&r.offset.to_le_bytes());
            out.extend_from_slice(&(r.kind as u32).to_le_bytes());
            put_string(&mut out, r.symbol.as_deref().unwrap_or(""));
        }
        for i in &self.imports {
            out.extend_from_slice(&i.slot_offset.to_le_bytes());
            put_string(&mut out, &i.name);
        }
        for (name, off) in &self.exports {
            out.extend_from_slice(&off.to_le_bytes());
            put_string(&mut out, name);
        }
        out
    }
}

fn pad4(out: &mut Vec<u8>) {
    while out.len() % 4 != 0 {
        out.push(0);
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    pad4(out);
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TransplantError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| TransplantError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TransplantError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn align(&mut self) -> Result<(), TransplantError> {
        let pad = (4 - self.pos % 4) % 4;
        if self.take(pad)?.iter().any(|&b| b != 0) {
            return Err(TransplantError::Format("non-zero padding".into()));
        }
        Ok(())
    }

    fn string(&mut self) -> Result<String, TransplantError> {
        let n = self.u32()? as usize;
        let s = std::str::from_utf8(self.take(n)?).map_err(|_| TransplantError::Format("name is not UTF-8".into()))?;
        let s = s.to_string();
        self.align()?;
        Ok(s)
    }
}

/// One redirected call site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thunk {
    pub site_offset: u32,
    pub thunk_offset: u32,
    pub slot_offset: u32,
    pub target: u32,
}

/// A driver image placed at `load_addr`: code, zeroed bss, then the thunk pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchedDriver {
    pub image: Vec<u8>,
    pub load_addr: u32,
    pub entry_map: BTreeMap<String, u32>,
    pub code_len: u32,
    pub bss_size: u32,
    pub thunks: Vec<Thunk>,
}

impl PatchedDriver {
    pub fn bss(&self) -> &[u8] {
        &self.image[self.code_len as usize..(self.code_len + self.bss_size) as usize]
    }

    pub fn pool_offset(&self) -> u32 {
        self.code_len + self.bss_size
    }

    pub fn word(&self, offset: u32) -> u32 {
        let o = offset as usize;
        u32::from_le_bytes(self.image[o..o + 4].try_into().unwrap())
    }

    fn put(&mut self, offset: u32, word: u32) {
        let o = offset as usize;
        self.image[o..o + 4].copy_from_slice(&word.to_le_bytes());
    }
}

/// Moves the driver to `load_addr`: every abs32 slot gains `load_addr`, bss is zero-filled.
pub fn rebase(drv: &DriverObject, load_addr: u32) -> Result<PatchedDriver, TransplantError> {
    if load_addr % 4 != 0 {
        return Err(TransplantError::MisalignedLoad(load_addr));
    }
    let mut image = drv.code.clone();
    image.resize(drv.code.len() + drv.bss_size as usize, 0);
    let mut out = PatchedDriver {
        image,
        load_addr,
        entry_map: drv.exports.iter().map(|(k, &v)| (k.clone(), load_addr.wrapping_add(v))).collect(),
        code_len: drv.code.len() as u32,
        bss_size: drv.bss_size,
        thunks: Vec::new(),
    };
    for r in drv.relocs.iter().filter(|r| r.kind == RelocKind::Abs32) {
        let v = out.word(r.offset).wrapping_add(load_addr);
        out.put(r.offset, v);
    }
    Ok(out)
}

/// Writes the resolved kernel address into every import slot.
pub fn bind_backward(drv: &PatchedDriver, resolved: &ResolvedCatalog, imports: &[Import]) -> Result<PatchedDriver, TransplantError> {
    let mut missing: Vec<String> = Vec::new();
    for i in imports {
        if resolved.address_of(&i.name).is_none() && !missing.contains(&i.name) {
            missing.push(i.name.clone());
        }
    }
    if !missing.is_empty() {
        return Err(TransplantError::UnresolvedImport(missing));
    }
    let mut out = drv.clone();
    for i in imports {
        out.put(i.slot_offset, resolved.address_of(&i.name).unwrap());
    }
    Ok(out)
}

fn bl_displacement(site: u32, target: u32) -> Option<i32> {
    let d = target.wrapping_sub(site.wrapping_add(8)) as i32;
    (target % 4 == 0 && (d as i64).abs() < BL_RANGE).then_some(d)
}

fn encode_bl(cond_bits: u32, disp: i32) -> u32 {
    cond_bits | 0x0b00_0000 | ((disp >> 2) as u32 & 0x00ff_ffff)
}

/// Points every BL at `targets` (keyed by code offset) at its absolute destination, through a
/// thunk when the destination is out of BL reach. The whole image may not exceed `budget`.
pub fn rewrite_out_of_range_calls(drv: &PatchedDriver, targets: &BTreeMap<u32, u32>, budget: u32) -> Result<PatchedDriver, TransplantError> {
    let mut out = drv.clone();
    let mut far: Vec<(u32, u32)> = Vec::new();
    for (&off, &target) in targets {
        if off % 4 != 0 || off + 4 > out.code_len {
            return Err(TransplantError::NotACall(off));
        }
        let word = out.word(off);
        match decode_word(word, 0).op {
            Operation::Branch { link: true, exchange: false, .. } if word >> 28 != 0xf => {}
            _ => return Err(TransplantError::NotACall(off)),
        }
        let site = out.load_addr.wrapping_add(off);
        match bl_displacement(site, target) {
            Some(d) => out.put(off, encode_bl(word & 0xf000_0000, d)),
            None => far.push((off, target)),
        }
    }
    if far.is_empty() {
        return Ok(out);
    }

    // one thunk per distinct target
    let distinct: Vec<u32> = far.iter().map(|&(_, t)| t).collect::<BTreeSet<_>>().into_iter().collect();
    let pool = out.pool_offset().next_multiple_of(4);
    let mut thunk_of: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    let mut cursor = pool;
    for chunk in distinct.chunks(THUNK_CHUNK) {
        let n = chunk.len() as u32;
        for (k, &t) in chunk.iter().enumerate() {
            let k = k as u32;
            thunk_of.insert(t, (cursor + THUNK_BYTES * k, cursor + THUNK_BYTES * n + 4 * k));
        }
        cursor += (THUNK_BYTES + 4) * n;
    }
    let needed = cursor as u64;
    // every thunk must itself be in BL reach of its sites
    if needed > budget as u64 || needed >= BL_RANGE as u64 {
        return Err(TransplantError::ThunkPoolOverflow { needed, budget: budget as u64 });
    }
    out.image.resize(cursor as usize, 0);
    for (&target, &(thunk, slot)) in &thunk_of {
        let disp = slot - (thunk + 8);
        out.put(thunk, LDR_IP_PC | disp);
        out.put(thunk + 4, BX_IP);
        out.put(slot, target);
    }
    for (off, target) in far {
        let (thunk, slot) = thunk_of[&target];
        let cond = out.word(off) & 0xf000_0000;
        out.put(off, encode_bl(cond, thunk as i32 - off as i32 - 8));
        out.thunks.push(Thunk { site_offset: off, thunk_offset: thunk, slot_offset: slot, target });
    }
    Ok(out)
}

/// The full fixup: rebase, bind imports, then retarget every call relocation at the kernel.
pub fn fixup(drv: &DriverObject, load_addr: u32, resolved: &ResolvedCatalog, budget: u32) -> Result<PatchedDriver, TransplantError> {
    drv.validate()?;
    let calls: Vec<&Reloc> = drv.relocs.iter().filter(|r| r.kind == RelocKind::Call24).collect();
    let mut missing: Vec<String> = Vec::new();
    let names = drv.imports.iter().map(|i| &i.name).chain(calls.iter().filter_map(|r| r.symbol.as_ref()));
    for n in names {
        if resolved.address_of(n).is_none() && !missing.contains(n) {
            missing.push(n.clone());
        }
    }
    if !missing.is_empty() {
        return Err(TransplantError::UnresolvedImport(missing));
    }
    let placed = rebase(drv, load_addr)?;
    let bound = bind_backward(&placed, resolved, &drv.imports)?;
    let targets = calls.iter().map(|r| (r.offset, resolved.address_of(r.symbol.as_ref().unwrap()).unwrap())).collect();
    rewrite_out_of_range_calls(&bound, &targets, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Patch {
    pub address: u32,
    pub word: u32,
}

/// Word writes with distinct, aligned addresses, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PatchSet {
    patches: Vec<Patch>,
}

impl PatchSet {
    pub fn new(mut patches: Vec<Patch>) -> Result<Self, TransplantError> {
        patches.sort();
        for p in &patches {
            if p.address % 4 != 0 {
                return Err(TransplantError::MisalignedPatch(p.address));
            }
        }
        for w in patches.windows(2) {
            if w[0].address == w[1].address {
                return Err(TransplantError::DuplicatePatch(w[0].address));
            }
        }
        Ok(PatchSet { patches })
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// One `{"address":"0x...","word":"0x..."}` record per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for p in &self.patches {
            let _ = writeln!(s, r#"{{"address":"{:#010x}","word":"{:#010x}"}}"#, p.address, p.word);
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TransplantError> {
        #[derive(Deserialize)]
        struct Rec {
            address: String,
            word: String,
        }
        let hex = |s: &str| {
            let digits = s.strip_prefix("0x").ok_or_else(|| TransplantError::Format(format!("{s:?} lacks 0x")))?;
            u32::from_str_radix(digits, 16).map_err(|e| TransplantError::Format(format!("{s:?}: {e}")))
        };
        let mut patches = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: Rec = serde_json::from_str(line).map_err(|e| TransplantError::Format(format!("line {}: {e}", n + 1)))?;
            patches.push(Patch { address: hex(&rec.address)?, word: hex(&rec.word)? });
        }
        PatchSet::new(patches)
    }
}

/// Forward-pointer patches: each board callback slot is redirected into the driver.
///
/// Indirect slots are read through `kernel`, which must map the machine descriptor.
pub fn plan_forward_install(
    recipes: &[SlotRecipe],
    machine_desc_addr: u32,
    entry_map: &BTreeMap<String, u32>,
    kernel: Option<&dyn LiteralMemory>,
) -> Result<PatchSet, TransplantError> {
    let mut patches = Vec::new();
    for r in recipes {
        let export = match r.name.as_str() {
            "init_irq" => INIT_IRQ_EXPORT,
            "init_time" => INIT_TIME_EXPORT,
            _ => continue,
        };
        let entry = *entry_map.get(export).ok_or_else(|| TransplantError::MissingExport(export.into()))?;
        let mut slot = machine_desc_addr.wrapping_add(r.slot_offset);
        if r.indirect {
            slot = kernel.and_then(|m| m.read_word(slot)).ok_or_else(|| TransplantError::IndirectSlot(r.name.clone()))?;
        }
        patches.push(Patch { address: slot, word: entry });
    }
    PatchSet::new(patches)
}

/// Byte store that patches can be applied to.
pub trait PatchTarget {
    fn is_mapped(&self, addr: u32, len: u32) -> bool;
    fn write_word(&mut self, addr: u32, word: u32);
}

/// A flat little-endian buffer mapped at `base`.
#[derive(Debug)]
pub struct FlatMemory<'a> {
    pub base: u32,
    pub bytes: &'a mut [u8],
}

impl PatchTarget for FlatMemory<'_> {
    fn is_mapped(&self, addr: u32, len: u32) -> bool {
        addr.checked_sub(self.base).is_some_and(|o| o as u64 + len as u64 <= self.bytes.len() as u64)
    }

    fn write_word(&mut self, addr: u32, word: u32) {
        let o = (addr - self.base) as usize;
        self.bytes[o..o + 4].copy_from_slice(&word.to_le_bytes());
    }
}

/// Applies every patch, or none when any address is unmapped.
pub fn apply_patchset(memory: &mut dyn PatchTarget, ps: &PatchSet) -> Result<(), TransplantError> {
    if let Some(p) = ps.patches.iter().find(|p| !memory.is_mapped(p.address, 4)) {
        return Err(TransplantError::UnmappedAddress(p.address));
    }
    for p in &ps.patches {
        memory.write_word(p.address, p.word);
    }
    Ok(())
}
